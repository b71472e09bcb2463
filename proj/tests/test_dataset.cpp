#include <gtest/gtest.h>

#include <sstream>

#include "support.hpp"

using namespace hts;
using hts::testing::small_tree;

namespace {

std::string leaf_csv(const std::vector<std::pair<std::string, double>>& rows, int length, double factor = 1.0) {
    std::ostringstream out;
    out << "series_id,timestamp,value\n";
    for (const auto& [id, v] : rows)
        for (int t = 0; t < length; ++t) out << id << ",d" << (t < 10 ? "0" : "") << t << ',' << v * factor << '\n';
    return out.str();
}

const std::vector<std::pair<std::string, double>> constant_leaves{{"D", 1}, {"E", 2}, {"F", 3}, {"G", 4}};

} // namespace

TEST(Ingest, ConstantLeavesBottomOnly) {
    std::istringstream in(leaf_csv(constant_leaves, 10));
    const auto panel = ingest(in, small_tree(), 2, IngestMode::bottom_only);
    EXPECT_EQ(panel.series_count(), 7u);
    EXPECT_EQ(panel.length(), 10u);
    EXPECT_EQ(panel.train_len, 8u);
    // Training rows, aggregated: 10, 3, 7, 1, 2, 3, 4 -> mean 30/7.
    EXPECT_DOUBLE_EQ(panel.global_scale, 30.0 / 7.0);
    for (Eigen::Index t = 0; t < 10; ++t) EXPECT_DOUBLE_EQ(panel.values(0, t) * panel.global_scale, 10.0);
}

TEST(Ingest, ModesAgreeOnCoherentData) {
    std::istringstream bottom(leaf_csv(constant_leaves, 10));
    std::vector<std::pair<std::string, double>> all{{"A", 10}, {"B", 3}, {"C", 7}};
    all.insert(all.end(), constant_leaves.begin(), constant_leaves.end());
    std::istringstream full(leaf_csv(all, 10));
    const auto a = ingest(bottom, small_tree(), 2, IngestMode::bottom_only);
    const auto b = ingest(full, small_tree(), 2, IngestMode::all_levels);
    EXPECT_EQ(a.values, b.values);
    EXPECT_EQ(a.global_scale, b.global_scale);
    EXPECT_EQ(a.timestamps, b.timestamps);
}

TEST(Ingest, CoherenceViolation) {
    std::vector<std::pair<std::string, double>> all{{"A", 9}, {"B", 3}, {"C", 7}};
    all.insert(all.end(), constant_leaves.begin(), constant_leaves.end());
    std::istringstream full(leaf_csv(all, 10));
    try {
        ingest(full, small_tree(), 2, IngestMode::all_levels);
        FAIL();
    } catch (const InputError& e) {
        EXPECT_NE(std::string(e.what()).find("'A'"), std::string::npos);
    }
}

TEST(Ingest, RejectsBadInput) {
    {
        std::istringstream in(leaf_csv({{"D", 1}, {"E", 2}, {"F", 3}}, 10));
        try {
            ingest(in, small_tree(), 2, IngestMode::bottom_only);
            FAIL();
        } catch (const InputError& e) {
            EXPECT_NE(std::string(e.what()).find("'G'"), std::string::npos);
        }
    }
    {
        auto text = leaf_csv(constant_leaves, 10);
        text += "D,d10,1\n";  // ragged
        std::istringstream in(text);
        EXPECT_THROW(ingest(in, small_tree(), 2, IngestMode::bottom_only), InputError);
    }
    {
        auto text = leaf_csv(constant_leaves, 10);
        text.replace(text.find("D,d03,1"), 7, "D,d03,nan");
        std::istringstream in(text);
        EXPECT_THROW(ingest(in, small_tree(), 2, IngestMode::bottom_only), InputError);
    }
    {
        auto text = leaf_csv(constant_leaves, 10);
        text.replace(text.find("D,d03,1"), 7, "D,d03,");
        std::istringstream in(text);
        EXPECT_THROW(ingest(in, small_tree(), 2, IngestMode::bottom_only), InputError);
    }
    {
        std::istringstream in(leaf_csv(constant_leaves, 10));
        EXPECT_THROW(ingest(in, small_tree(), 9, IngestMode::bottom_only), InputError);
    }
    {
        std::istringstream in("id,timestamp,value\nD,1,1\n");
        EXPECT_THROW(ingest(in, small_tree(), 0, IngestMode::bottom_only), InputError);
    }
    {
        // An upper series in bottom-only mode.
        std::istringstream in(leaf_csv({{"A", 10}, {"D", 1}, {"E", 2}, {"F", 3}, {"G", 4}}, 10));
        EXPECT_THROW(ingest(in, small_tree(), 2, IngestMode::bottom_only), InputError);
    }
}

TEST(Ingest, ScaleInvariance) {
    std::mt19937_64 rng(4);
    const auto h = small_tree();
    const auto bottom = hts::testing::uniform_matrix(rng, 4, 30, 0.5, 9.0);
    std::vector<std::string> stamps;
    for (int t = 0; t < 30; ++t) stamps.push_back("t" + std::to_string(100 + t));
    const auto a = panel_from_bottom(h, bottom, stamps, 5);
    for (double c : {0.001, 3.0, 1e6}) {
        const auto b = panel_from_bottom(h, bottom * c, stamps, 5);
        EXPECT_LT((a.values - b.values).cwiseAbs().maxCoeff(), 1e-14);
    }
}

TEST(Ingest, BottomOnlyRebuildsUpperRowsExactly) {
    std::mt19937_64 rng(9);
    const auto h = hts::testing::random_hierarchy(rng);
    const auto bottom = hts::testing::uniform_matrix(rng, static_cast<Eigen::Index>(h.bottom_count()), 12, 0, 5);
    std::vector<std::string> stamps;
    for (int t = 0; t < 12; ++t) stamps.push_back("t" + std::to_string(10 + t));
    const auto panel = panel_from_bottom(h, bottom, stamps, 2);
    for (Eigen::Index t = 0; t < 12; ++t) EXPECT_TRUE(is_coherent(h, panel.values.col(t), 1e-12));
}

TEST(BlockedFolds, EvenSplit) {
    const auto f = blocked_folds(20, 10);
    ASSERT_EQ(f.k(), 10u);
    for (std::size_t i = 0; i < 10; ++i) {
        EXPECT_EQ(f.folds[i].validation, (TimeRange{2 * i, 2 * i + 2}));
        EXPECT_EQ(total_size(f.folds[i].train), 18u);
    }
}

TEST(BlockedFolds, RemainderFrontLoaded) {
    const auto f = blocked_folds(23, 10);
    std::vector<std::size_t> sizes;
    for (const auto& fold : f.folds) sizes.push_back(fold.validation.size());
    EXPECT_EQ(sizes, (std::vector<std::size_t>{3, 3, 3, 2, 2, 2, 2, 2, 2, 2}));
}

TEST(BlockedFolds, BoundaryAndErrors) {
    const auto f = blocked_folds(10, 10);
    for (std::size_t i = 0; i < 10; ++i) EXPECT_EQ(f.folds[i].validation, (TimeRange{i, i + 1}));
    EXPECT_THROW(blocked_folds(9, 10), ContractError);
    EXPECT_THROW(blocked_folds(20, 1), ContractError);
}

TEST(BlockedFolds, CoverAndDisjoint) {
    for (std::size_t len = 4; len < 60; ++len) {
        for (std::size_t k = 2; k <= std::min<std::size_t>(len, 12); ++k) {
            const auto f = blocked_folds(len, k);
            std::vector<int> hits(len, 0);
            for (const auto& fold : f.folds) {
                for (auto t = fold.validation.begin; t < fold.validation.end; ++t) {
                    ++hits[t];
                    EXPECT_FALSE(contains(fold.train, t));
                }
                EXPECT_EQ(total_size(fold.train) + fold.validation.size(), len);
            }
            for (auto h : hits) EXPECT_EQ(h, 1);
        }
    }
}

TEST(NaiveScales, Definition) {
    Eigen::MatrixXd v(2, 4);
    v << 1, 3, 2, 2,  //
        5, 5, 5, 5;
    const auto q = naive_scales(v, {{0, 4}});
    EXPECT_DOUBLE_EQ(q(0), 1.0);
    EXPECT_DOUBLE_EQ(q(1), 0.0);
    // Pairs never straddle a gap between ranges.
    const auto split = naive_scales(v, {{0, 2}, {3, 4}});
    EXPECT_DOUBLE_EQ(split(0), 2.0);
}
