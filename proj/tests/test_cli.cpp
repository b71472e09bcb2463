#include <gtest/gtest.h>

#include <cstdlib>
#include <sys/wait.h>

#include "support.hpp"

using namespace hts;
namespace fs = std::filesystem;

namespace {

struct Run {
    int code = -1;
    std::string err;
};

Run run(const std::string& args, const fs::path& dir) {
    const auto err_path = dir / "stderr.txt";
    const auto cmd = std::string(HTS_CLI_PATH) + " " + args + " >" + (dir / "stdout.txt").string() + " 2>" + err_path.string();
    const int status = std::system(cmd.c_str());
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, hts::testing::slurp(err_path)};
}

void write_small_tree(const fs::path& dir, bool drop_leaf = false) {
    std::ofstream h(dir / "h.csv");
    h << "A,B\nA,C\nB,D\nB,E\nC,F\nC,G\n";
    std::ofstream v(dir / "v.csv");
    v << "series_id,timestamp,value\n";
    for (const auto* id : {"D", "E", "F", "G"}) {
        if (drop_leaf && std::string(id) == "F") continue;
        for (int t = 0; t < 6; ++t) v << id << ",t" << t << ',' << (t + 1) * (id[0] - 'C') << '\n';
    }
}

/// Reconciled file back into an N x W matrix in hierarchy order.
Eigen::MatrixXd read_reconciled(const fs::path& path, const Hierarchy& h) {
    std::ifstream in(path);
    const auto table = read_series_table(in, "reconciled_forecast", path.string());
    Eigen::MatrixXd out(static_cast<Eigen::Index>(h.size()), static_cast<Eigen::Index>(table.timestamps.size()));
    for (std::size_t i = 0; i < h.size(); ++i) {
        const auto& v = table.series.at(h.id(i));
        for (std::size_t t = 0; t < v.size(); ++t)
            out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(t)) = v[t];
    }
    return out;
}

} // namespace

TEST(Cli, IngestSmallTreeSummary) {
    const auto dir = hts::testing::scratch_dir("cli_small_tree");
    write_small_tree(dir);
    const auto r = run("ingest --values " + (dir / "v.csv").string() + " --hierarchy " + (dir / "h.csv").string() +
                           " --test-len 2 --out-dir " + (dir / "panel").string(),
                       dir);
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(hts::testing::slurp(dir / "panel" / "summary.txt").find("levels (1,2,4)"), std::string::npos);
    EXPECT_TRUE(fs::exists(dir / "panel" / "manifest.json"));
    fs::remove_all(dir);
}

TEST(Cli, MissingLeafIsInputError) {
    const auto dir = hts::testing::scratch_dir("cli_missing");
    write_small_tree(dir, true);
    const auto r = run("ingest --values " + (dir / "v.csv").string() + " --hierarchy " + (dir / "h.csv").string() +
                           " --test-len 2 --out-dir " + (dir / "panel").string(),
                       dir);
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("'F'"), std::string::npos) << r.err;
    EXPECT_NE(r.err.find("\"error\""), std::string::npos);
    EXPECT_FALSE(fs::exists(dir / "panel" / "panel.csv"));
    fs::remove_all(dir);
}

TEST(Cli, BadArgumentsAndPaths) {
    const auto dir = hts::testing::scratch_dir("cli_args");
    EXPECT_EQ(run("ingest --values", dir).code, 2);
    EXPECT_EQ(run("frobnicate", dir).code, 2);
    EXPECT_EQ(run("forecast --panel /nonexistent --out-dir " + dir.string(), dir).code, 2);
    write_small_tree(dir);
    EXPECT_EQ(run("ingest --values " + (dir / "v.csv").string() + " --hierarchy " + (dir / "h.csv").string() +
                      " --test-len 9 --out-dir " + (dir / "panel").string(),
                  dir)
                  .code,
              2);
    fs::remove_all(dir);
}

TEST(Cli, PipelineOutputsAreCoherent) {
    const auto dir = hts::testing::scratch_dir("cli_pipeline");
    hts::testing::write_synthetic_files(3, dir / "v.csv", dir / "h.csv");
    const auto panel = (dir / "panel").string();
    const auto fc = (dir / "fc").string();
    const auto rec = (dir / "rec").string();
    ASSERT_EQ(run("ingest --values " + (dir / "v.csv").string() + " --hierarchy " + (dir / "h.csv").string() +
                      " --test-len 100 --out-dir " + panel,
                  dir)
                  .code,
              0);
    ASSERT_EQ(run("forecast --panel " + panel + " --p-grid 1,2 --folds 5 --out-dir " + fc, dir).code, 0);
    EXPECT_TRUE(fs::exists(fs::path(fc) / "fold_04.csv"));
    EXPECT_TRUE(fs::exists(fs::path(fc) / "lags.csv"));

    const auto h = read_hierarchy(fs::path(panel) / "hierarchy.csv");
    std::string evaluate = "evaluate --panel " + panel + " --out-dir " + (dir / "eval").string();
    for (const auto* m : {"bu", "tdhp", "tdfp", "oc", "tm", "mo"}) {
        const auto r = run("reconcile --panel " + panel + " --forecasts " + fc + " --method " + m + " --out-dir " + rec, dir);
        ASSERT_EQ(r.code, 0) << m << ": " << r.err;
        const auto path = fs::path(rec) / ("reconciled_" + std::string(m) + ".csv");
        const auto y = read_reconciled(path, h);
        EXPECT_EQ(y.cols(), 100);
        for (Eigen::Index t = 0; t < y.cols(); ++t) EXPECT_TRUE(is_coherent(h, y.col(t), 1e-9)) << m;
        EXPECT_EQ(hts::testing::slurp(path).rfind("# method ", 0), 0u);
        evaluate += " --reconciled " + std::string(m) + "=" + path.string();
    }
    const auto r = run("reconcile --panel " + panel + " --forecasts " + fc +
                           " --method trainable --ensemble 2 --epochs 5 --out-dir " + rec,
                       dir);
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_TRUE(fs::exists(fs::path(rec) / "model.json"));
    const auto y = read_reconciled(fs::path(rec) / "reconciled_trainable.csv", h);
    for (Eigen::Index t = 0; t < y.cols(); ++t) EXPECT_TRUE(is_coherent(h, y.col(t), 1e-9));

    // Reusing the saved model reproduces the file.
    const auto again = (dir / "again").string();
    ASSERT_EQ(run("reconcile --panel " + panel + " --forecasts " + fc + " --method trainable --model " +
                      (fs::path(rec) / "model.json").string() + " --out-dir " + again,
                  dir)
                  .code,
              0);
    EXPECT_EQ(read_reconciled(fs::path(again) / "reconciled_trainable.csv", h), y);

    evaluate += " --reconciled trainable=" + (fs::path(rec) / "reconciled_trainable.csv").string();
    const auto e = run(evaluate, dir);
    ASSERT_EQ(e.code, 0) << e.err;
    for (const auto* f : {"overall.csv", "levels.csv", "significance.csv"}) EXPECT_TRUE(fs::exists(dir / "eval" / f));
    EXPECT_NE(hts::testing::slurp(dir / "eval" / "overall.csv").find("metric,bu,tdhp,tdfp,oc,tm,mo,trainable"),
              std::string::npos);
    fs::remove_all(dir);
}

TEST(Cli, ContractAndMethodErrors) {
    const auto dir = hts::testing::scratch_dir("cli_contract");
    hts::testing::write_synthetic_files(4, dir / "v.csv", dir / "h.csv");
    const auto panel = (dir / "panel").string();
    ASSERT_EQ(run("ingest --values " + (dir / "v.csv").string() + " --hierarchy " + (dir / "h.csv").string() +
                      " --test-len 100 --out-dir " + panel,
                  dir)
                  .code,
              0);
    ASSERT_EQ(run("forecast --panel " + panel + " --p-grid 1 --folds 3 --out-dir " + (dir / "fc").string(), dir).code, 0);
    // External forecasts have no per-fold refits, so search refuses them.
    ASSERT_EQ(run("forecast --panel " + panel + " --external " + (dir / "fc" / "forecasts.csv").string() +
                      " --out-dir " + (dir / "ext").string(),
                  dir)
                  .code,
              0);
    const auto s = run("search --panel " + panel + " --forecasts " + (dir / "ext").string() + " --trials 1 --out-dir " +
                           (dir / "s").string(),
                       dir);
    EXPECT_EQ(s.code, 3) << s.err;
    EXPECT_EQ(run("reconcile --panel " + panel + " --forecasts " + (dir / "fc").string() + " --method magic --out-dir " +
                      (dir / "r").string(),
                  dir)
                  .code,
              2);
    fs::remove_all(dir);
}
