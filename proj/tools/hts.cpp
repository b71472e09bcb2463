// hts: hierarchical forecasting pipeline.
//
//   hts ingest    --values V --hierarchy H --test-len K [--mode bottom-only|all-levels] --out-dir D
//   hts forecast  --panel D [--p-grid 1,2,3,4 | --external F] [--folds 10] --out-dir D
//   hts reconcile --panel D --forecasts D --method bu|tdhp|tdfp|oc|tm|mo|trainable [...] --out-dir D
//   hts evaluate  --panel D --reconciled name=F ... [--proposed trainable] --out-dir D
//   hts search    --panel D --forecasts D [--metric mase|mlae] [--trials 100] [--seed 0] --out-dir D
//
// Errors end with exit code 2 (input), 3 (contract) or 4 (numeric) and a
// single JSON line on stderr.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "hts/hts.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* panel_file = "panel.csv";
constexpr const char* hierarchy_file = "hierarchy.csv";
constexpr const char* manifest_file = "manifest.json";
constexpr const char* forecasts_file = "forecasts.csv";

std::string fold_file(std::size_t f) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "fold_%02zu.csv", f);
    return buf;
}

json read_manifest(const fs::path& dir) {
    const auto path = dir / manifest_file;
    try {
        return json::parse(hts::io::read_text(path));
    } catch (const json::exception& e) {
        throw hts::InputError(path.string() + ": " + e.what());
    }
}

void write_manifest(const fs::path& dir, json manifest) {
    hts::io::write_atomic(dir / manifest_file, manifest.dump(2) + "\n");
}

std::string level_tuple(const hts::Hierarchy& h) {
    std::string out = "(";
    for (std::size_t l = 0; l < h.level_count(); ++l) out += (l ? "," : "") + std::to_string(h.level_sizes()[l]);
    return out + ")";
}

/// N x W block in scaled units written as raw `series_id,timestamp,<column>`.
std::string series_csv(const hts::Hierarchy& h, const std::vector<std::string>& stamps, const Eigen::MatrixXd& values,
                       double factor, const std::string& column, const std::vector<std::string>& comments = {}) {
    std::string out;
    for (const auto& c : comments) out += "# " + c + "\n";
    out += "series_id,timestamp," + column + "\n";
    for (std::size_t i = 0; i < h.size(); ++i)
        for (std::size_t t = 0; t < stamps.size(); ++t)
            out += h.id(i) + "," + stamps[t] + "," +
                   hts::io::format_double(values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(t)) * factor) + "\n";
    return out;
}

std::vector<std::string> stamps_of(const hts::SeriesPanel& panel, hts::TimeRange window) {
    return {panel.timestamps.begin() + static_cast<std::ptrdiff_t>(window.begin),
            panel.timestamps.begin() + static_cast<std::ptrdiff_t>(window.end)};
}

std::ifstream open_input(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw hts::InputError("cannot open '" + path.string() + "'");
    return in;
}

/// Panel directory: scaled all-level values plus the manifest holding the
/// global scale, so reloading is exact.
hts::SeriesPanel load_panel(const fs::path& dir) {
    const auto manifest = read_manifest(dir);
    auto h = hts::read_hierarchy(dir / hierarchy_file);
    auto in = open_input(dir / panel_file);
    auto table = hts::read_series_table(in, "value", (dir / panel_file).string());
    hts::SeriesPanel panel;
    try {
        panel.train_len = manifest.at("train_len").get<std::size_t>();
        panel.global_scale = manifest.at("global_scale").get<double>();
        panel.mode = hts::parse_mode(manifest.at("mode").get<std::string>());
    } catch (const json::exception& e) {
        throw hts::InputError("panel manifest: " + std::string(e.what()));
    }
    panel.values.resize(static_cast<Eigen::Index>(h.size()), static_cast<Eigen::Index>(table.timestamps.size()));
    for (std::size_t i = 0; i < h.size(); ++i) {
        const auto it = table.series.find(h.id(i));
        if (it == table.series.end()) throw hts::InputError("panel: missing series '" + h.id(i) + "'");
        for (std::size_t t = 0; t < it->second.size(); ++t)
            panel.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(t)) = it->second[t];
    }
    if (table.series.size() != h.size()) throw hts::InputError("panel: series outside the hierarchy");
    if (panel.train_len < 2 || panel.train_len > panel.length()) throw hts::InputError("panel: bad train_len");
    for (Eigen::Index t = 0; t < panel.values.cols(); ++t)
        if (!hts::is_coherent(h, panel.values.col(t), hts::ingest_coherence_tol))
            throw hts::InputError("panel: coherence violation at timestamp '" + table.timestamps[static_cast<std::size_t>(t)] + "'");
    panel.hierarchy = std::move(h);
    panel.timestamps = std::move(table.timestamps);
    return panel;
}

hts::ForecastSet load_forecasts(const fs::path& path, const hts::SeriesPanel& panel) {
    auto in = open_input(path);
    return hts::import_forecasts(in, panel, path.string());
}

/// Forecasts from a forecast directory or a bare CSV file.
hts::ForecastSet load_forecast_input(const fs::path& path, const hts::SeriesPanel& panel) {
    return fs::is_directory(path) ? load_forecasts(path / forecasts_file, panel) : load_forecasts(path, panel);
}

hts::Architecture resolve_arch(const std::string& arch, const hts::SeriesPanel& panel) {
    if (arch == "auto")
        return panel.series_count() > 10 * panel.train_len ? hts::Architecture::shrunk : hts::Architecture::fully_connected;
    return hts::parse_architecture(arch);
}

std::vector<std::size_t> parse_grid(const std::string& text) {
    std::vector<std::size_t> out;
    for (const auto& field : hts::io::split(text)) {
        std::size_t p = 0;
        const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), p);
        if (ec != std::errc() || ptr != field.data() + field.size() || p == 0)
            throw hts::InputError("bad lag order '" + field + "' in --p-grid");
        out.push_back(p);
    }
    return out;
}

struct Common {
    std::string out_dir;
    std::string panel;
    std::string forecasts;
    std::uint64_t seed = 0;
    std::size_t workers = 1;
};

struct TrainOptions {
    std::string arch = "auto";
    std::size_t ensemble = 10;
    std::size_t hidden_layers = 0;
    double dropout = 0.0;
    double learning_rate = 1e-3;
    double weight_decay = 1e-2;
    std::size_t epochs = 100;
    std::size_t batch_size = 128;
    std::string loss = "mase";
};

void add_train_options(CLI::App* cmd, TrainOptions& t) {
    cmd->add_option("--arch", t.arch, "auto, fc or shrunk")->check(CLI::IsMember({"auto", "fc", "shrunk"}));
    cmd->add_option("--ensemble", t.ensemble, "Ensemble size")->check(CLI::PositiveNumber);
    cmd->add_option("--hidden-layers", t.hidden_layers, "Hidden layers (0-3)")->check(CLI::Range(0, 3));
    cmd->add_option("--dropout", t.dropout, "Dropout rate");
    cmd->add_option("--lr", t.learning_rate, "Learning rate");
    cmd->add_option("--wd", t.weight_decay, "Weight decay");
    cmd->add_option("--epochs", t.epochs, "Training epochs");
    cmd->add_option("--batch-size", t.batch_size, "Batch size")->check(CLI::PositiveNumber);
    cmd->add_option("--loss", t.loss, "mase, mlae or regularized-mase");
}

json config_json_with_arch(const hts::EncoderConfig& c) { return hts::config_to_json(c); }

// ---- ingest ---------------------------------------------------------------

struct IngestArgs {
    std::string values, hierarchy, mode = "bottom-only";
    std::size_t test_len = 0;
};

int cmd_ingest(const IngestArgs& a, const Common& c) {
    const auto mode = hts::parse_mode(a.mode);
    auto h = hts::read_hierarchy(a.hierarchy);
    const auto warnings = h.warnings();
    auto in = open_input(a.values);
    const auto panel = hts::ingest(in, std::move(h), a.test_len, mode, a.values);
    const auto& hier = panel.hierarchy;

    const fs::path out(c.out_dir);
    fs::create_directories(out);
    hts::io::write_atomic(out / hierarchy_file, hts::hierarchy_text(hier));
    hts::io::write_atomic(out / panel_file,
                          series_csv(hier, panel.timestamps, panel.values, 1.0, "value",
                                     {"values divided by global_scale " + hts::io::format_double(panel.global_scale)}));
    const auto levels = level_tuple(hier);
    std::string summary = "series N=" + std::to_string(hier.size()) + " M=" + std::to_string(hier.bottom_count()) +
                          " levels " + levels + " train=" + std::to_string(panel.train_len) +
                          " test=" + std::to_string(panel.test_len()) + "\n";
    for (const auto& w : warnings) summary += "warning: " + w + "\n";
    hts::io::write_atomic(out / "summary.txt", summary);
    write_manifest(out, {{"artifact", "panel"},
                         {"N", hier.size()},
                         {"M", hier.bottom_count()},
                         {"levels", hier.level_sizes()},
                         {"train_len", panel.train_len},
                         {"test_len", panel.test_len()},
                         {"mode", hts::mode_name(panel.mode)},
                         {"global_scale", panel.global_scale},
                         {"scaling", hts::global_scale_convention},
                         {"warnings", warnings},
                         {"seed", c.seed}});
    std::cout << summary;
    return 0;
}

// ---- forecast -------------------------------------------------------------

struct ForecastArgs {
    std::string p_grid = "1,2,3,4";
    std::string external;
    std::size_t folds = 10;
};

int cmd_forecast(const ForecastArgs& a, const Common& c) {
    const auto panel = load_panel(c.panel);
    const auto& h = panel.hierarchy;
    const fs::path out(c.out_dir);
    fs::create_directories(out);
    json manifest = {{"artifact", "forecasts"}, {"seed", c.seed}};

    if (!a.external.empty()) {
        const auto set = load_forecasts(a.external, panel);
        hts::io::write_atomic(out / forecasts_file,
                              series_csv(h, stamps_of(panel, set.window), set.values, panel.global_scale, "forecast",
                                         {"source external-file"}));
        manifest["source"] = hts::source_name(set.source);
        manifest["window"] = {set.window.begin, set.window.end};
        manifest["folds"] = 0;
        write_manifest(out, manifest);
        std::cout << "imported forecasts for " << set.window.size() << " time-steps\n";
        return 0;
    }

    const auto grid = parse_grid(a.p_grid);
    const auto folds = hts::blocked_folds(panel, a.folds);
    const auto lags = hts::select_lags(panel, grid, folds);
    const auto set = hts::panel_forecasts(panel, lags);
    hts::io::write_atomic(out / forecasts_file,
                          series_csv(h, stamps_of(panel, set.window), set.values, panel.global_scale, "forecast",
                                     {"source internal-AR"}));
    std::string lag_csv = "series_id,p\n";
    for (std::size_t i = 0; i < h.size(); ++i) lag_csv += h.id(i) + "," + std::to_string(lags[i]) + "\n";
    hts::io::write_atomic(out / "lags.csv", lag_csv);

    const auto cache = hts::fold_forecasts(panel, lags, folds);
    for (std::size_t f = 0; f < cache.per_fold.size(); ++f) {
        const auto& fs_ = cache.per_fold[f];
        hts::io::write_atomic(out / fold_file(f),
                              series_csv(h, stamps_of(panel, fs_.window), fs_.values, panel.global_scale, "forecast",
                                         {"fold " + std::to_string(f) + " of " + std::to_string(folds.k())}));
    }
    manifest["source"] = hts::source_name(set.source);
    manifest["window"] = {set.window.begin, set.window.end};
    manifest["p_grid"] = grid;
    manifest["folds"] = folds.k();
    manifest["selection_metric"] = "mean validation MAE";
    write_manifest(out, manifest);
    std::cout << "forecast window [" << set.window.begin << ", " << set.window.end << "), lags";
    for (auto p : lags) std::cout << ' ' << p;
    std::cout << '\n';
    return 0;
}

// ---- reconcile ------------------------------------------------------------

struct ReconcileArgs {
    std::string method;
    std::string model;
    std::string window = "test";
    std::size_t level = 1;
    TrainOptions train;
};

hts::EncoderConfig encoder_config(const TrainOptions& t, const hts::SeriesPanel& panel, std::uint64_t seed) {
    hts::EncoderConfig cfg;
    cfg.architecture = resolve_arch(t.arch, panel);
    cfg.hidden_layers = t.hidden_layers;
    cfg.dropout = t.dropout;
    cfg.learning_rate = t.learning_rate;
    cfg.weight_decay = t.weight_decay;
    cfg.epochs = t.epochs;
    cfg.batch_size = t.batch_size;
    cfg.loss = hts::parse_loss(t.loss);
    cfg.ensemble_size = t.ensemble;
    cfg.seed = seed;
    return cfg;
}

int cmd_reconcile(const ReconcileArgs& a, const Common& c) {
    const auto panel = load_panel(c.panel);
    const auto& h = panel.hierarchy;
    const auto forecasts = load_forecast_input(c.forecasts, panel);
    const hts::SummingMatrix s(h);

    hts::TimeRange window = forecasts.window;
    if (a.window == "test") {
        window = {std::max(forecasts.window.begin, panel.train_len), forecasts.window.end};
        if (window.size() == 0) throw hts::InputError("reconcile: forecasts do not cover the test window");
    } else if (a.window != "all") {
        throw hts::InputError("reconcile: --window must be 'test' or 'all'");
    }
    std::vector<std::size_t> times;
    for (auto t = window.begin; t < window.end; ++t) times.push_back(t);
    const Eigen::MatrixXd input = forecasts.columns(times);

    const fs::path out(c.out_dir);
    fs::create_directories(out);
    std::vector<std::string> comments{"method " + a.method, "seed " + std::to_string(c.seed)};
    Eigen::MatrixXd result;
    const auto& m = a.method;
    if (m == "bu" || m == "tdhp" || m == "oc" || m == "tm") {
        hts::MappingMatrix p;
        if (m == "bu") {
            p = hts::bu_matrix(h);
        } else if (m == "tdhp") {
            p = hts::tdhp_matrix(h, panel);
        } else if (m == "oc") {
            p = hts::oc_matrix(h);
        } else {
            std::vector<std::size_t> fit;
            for (auto t = forecasts.window.begin; t < std::min(forecasts.window.end, panel.train_len); ++t) fit.push_back(t);
            Eigen::MatrixXd resid(static_cast<Eigen::Index>(h.size()), static_cast<Eigen::Index>(fit.size()));
            for (std::size_t k = 0; k < fit.size(); ++k)
                resid.col(static_cast<Eigen::Index>(k)) =
                    forecasts.at(fit[k]) - panel.values.col(static_cast<Eigen::Index>(fit[k]));
            p = hts::tm_matrix(h, hts::error_covariance(resid, hts::Shrinkage::diagonal_shrinkage));
            comments.push_back("covariance sample covariance shrunk toward its diagonal (optimal intensity)");
        }
        result = hts::reconcile_linear_columns(p, s, input);
    } else if (m == "tdfp" || m == "mo") {
        result.resize(input.rows(), input.cols());
        std::vector<std::size_t> flagged;
        for (Eigen::Index t = 0; t < input.cols(); ++t)
            result.col(t) = m == "tdfp" ? hts::tdfp_reconcile(h, input.col(t), flagged)
                                        : hts::middle_out_reconcile(h, input.col(t), a.level);
        if (!flagged.empty())
            std::cerr << "warning: " << flagged.size() << " sibling groups with zero forecast sum were split equally\n";
        if (m == "mo") comments.push_back("level " + std::to_string(a.level));
    } else if (m == "trainable") {
        hts::Ensemble ens;
        if (!a.model.empty()) {
            ens = hts::load_ensemble(a.model, h);
        } else {
            const auto cfg = encoder_config(a.train, panel, c.seed);
            ens = hts::train_ensemble(cfg, panel, forecasts, c.workers);
            hts::save_ensemble(ens, out / "model.json");
            comments.push_back("config " + hts::config_to_json(cfg).dump());
        }
        result = hts::reconcile_columns(ens, input);
    } else {
        throw hts::InputError("unknown method '" + m + "' (expected bu, tdhp, tdfp, oc, tm, mo or trainable)");
    }

    const Eigen::MatrixXd raw = result * panel.global_scale;
    for (Eigen::Index t = 0; t < raw.cols(); ++t)
        if (!hts::is_coherent(h, raw.col(t), 1e-9))
            throw hts::NumericError("reconcile: output for timestamp '" + panel.timestamps[times[static_cast<std::size_t>(t)]] +
                                    "' is not coherent");
    const auto name = "reconciled_" + m + ".csv";
    hts::io::write_atomic(out / name, series_csv(h, stamps_of(panel, window), result, panel.global_scale,
                                                 "reconciled_forecast", comments));
    std::cout << "wrote " << name << " (" << window.size() << " time-steps)\n";
    return 0;
}

// ---- evaluate -------------------------------------------------------------

struct EvaluateArgs {
    std::vector<std::string> reconciled;
    std::string proposed = "trainable";
    bool exclude_degenerate = false;
};

int cmd_evaluate(const EvaluateArgs& a, const Common& c) {
    const auto panel = load_panel(c.panel);
    const auto& h = panel.hierarchy;
    if (a.reconciled.empty()) throw hts::InputError("evaluate: no --reconciled files given");
    std::vector<std::pair<std::string, Eigen::MatrixXd>> predictions;
    hts::TimeRange window{};
    for (const auto& spec : a.reconciled) {
        std::string name, path = spec;
        if (const auto eq = spec.find('='); eq != std::string::npos) {
            name = spec.substr(0, eq);
            path = spec.substr(eq + 1);
        } else {
            name = fs::path(spec).stem().string();
            if (name.starts_with("reconciled_")) name = name.substr(11);
        }
        auto in = open_input(path);
        auto table = hts::read_series_table(in, "reconciled_forecast", path);
        std::ostringstream relabeled;
        relabeled << "series_id,timestamp,forecast\n";
        for (const auto& [id, vals] : table.series)
            for (std::size_t t = 0; t < vals.size(); ++t)
                relabeled << id << ',' << table.timestamps[t] << ',' << hts::io::format_double(vals[t]) << '\n';
        std::istringstream rin(relabeled.str());
        const auto set = hts::import_forecasts(rin, panel, path);
        if (predictions.empty()) {
            window = set.window;
        } else if (!(set.window == window)) {
            throw hts::InputError("evaluate: '" + path + "' covers a different time window");
        }
        if (window.begin < panel.train_len) throw hts::InputError("evaluate: '" + path + "' includes training time-steps");
        predictions.emplace_back(name, set.values);
    }
    const Eigen::MatrixXd actual = panel.values.middleCols(static_cast<Eigen::Index>(window.begin),
                                                           static_cast<Eigen::Index>(window.size()));
    const bool has_proposed = std::any_of(predictions.begin(), predictions.end(),
                                          [&](const auto& p) { return p.first == a.proposed; });
    auto report = hts::evaluate_methods(h, actual, hts::naive_scales(panel), predictions,
                                        has_proposed ? a.proposed : predictions.back().first, a.exclude_degenerate);
    report.metadata = {{"scaling", hts::global_scale_convention},
                       {"tm covariance", "sample covariance shrunk toward its diagonal, optimal intensity"},
                       {"t-test", "paired, two-sided, one observation per (series, time-step)"},
                       {"stars", "* p<0.05, ** p<0.01, proposed method vs best other"},
                       {"grid", "weight decay {1e-1,3e-2,1e-2}, learning rate {1e-3,1e-4,1e-5}"},
                       {"test window", std::to_string(window.size()) + " steps from " + panel.timestamps[window.begin]},
                       {"seed", std::to_string(c.seed)}};
    const fs::path out(c.out_dir);
    fs::create_directories(out);
    hts::io::write_atomic(out / "overall.csv", hts::overall_csv(report));
    hts::io::write_atomic(out / "levels.csv", hts::levels_csv(report));
    hts::io::write_atomic(out / "significance.csv", hts::significance_csv(report));
    std::cout << hts::overall_csv(report);
    return 0;
}

// ---- search ---------------------------------------------------------------

struct SearchArgs {
    std::string metric = "mase";
    std::size_t trials = 100;
    TrainOptions train;
    bool regularized = false;
};

int cmd_search(const SearchArgs& a, const Common& c) {
    const auto panel = load_panel(c.panel);
    const fs::path fdir(c.forecasts);
    if (!fs::is_directory(fdir)) throw hts::InputError("search: --forecasts must be a forecast directory");
    const auto manifest = read_manifest(fdir);
    const auto k = manifest.value("folds", std::size_t{0});
    if (k == 0)
        throw hts::ContractError("search: the forecast directory has no per-fold forecasts (external forecasts cannot "
                                 "be refitted per fold)");
    hts::FoldForecasts cache;
    cache.folds = hts::blocked_folds(panel, k);
    for (std::size_t f = 0; f < k; ++f) cache.per_fold.push_back(load_forecasts(fdir / fold_file(f), panel));
    const auto forecasts = load_forecasts(fdir / forecasts_file, panel);

    hts::EncoderConfig base;
    base.architecture = resolve_arch(a.train.arch, panel);
    base.batch_size = a.train.batch_size;
    base.ensemble_size = a.train.ensemble;
    base.seed = c.seed;
    if (a.metric == "mlae") {
        base.loss = hts::LossKind::mlae;
    } else if (a.metric == "mase") {
        base.loss = a.regularized ? hts::LossKind::regularized_mase : hts::LossKind::mase;
    } else {
        throw hts::InputError("unknown metric '" + a.metric + "' (expected mase or mlae)");
    }

    const hts::HyperGrid grid;
    const auto result = hts::random_search(
        grid, a.trials, c.seed, base,
        [&](const hts::EncoderConfig& cfg) { return hts::cv_evaluate(cfg, panel, cache).mean_score; }, c.workers);
    const auto ens = hts::train_ensemble(result.best, panel, forecasts, c.workers);

    const fs::path out(c.out_dir);
    fs::create_directories(out);
    hts::io::write_atomic(out / "search_log.csv", hts::search_log_csv(result));
    hts::io::write_atomic(out / "best_config.json", config_json_with_arch(result.best).dump(2) + "\n");
    hts::save_ensemble(ens, out / "model.json");
    write_manifest(out, {{"artifact", "search"},
                         {"metric", a.metric},
                         {"loss", hts::loss_name(base.loss)},
                         {"trials", a.trials},
                         {"folds", k},
                         {"seed", c.seed},
                         {"best_trial", result.best_trial},
                         {"best_score", result.log[result.best_trial].score},
                         {"grid_combinations", grid.combinations()}});
    std::cout << "best trial " << result.best_trial << " score "
              << hts::io::format_double(result.log[result.best_trial].score) << "\n";
    return 0;
}

void fail(hts::ErrorKind kind, const std::string& message) {
    std::cerr << json{{"error", hts::kind_name(kind)}, {"exit_code", static_cast<int>(kind)}, {"message", message}}.dump()
              << '\n';
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Hierarchical time-series forecasting and reconciliation"};
    app.require_subcommand(1);
    Common common;

    auto add_common = [&](CLI::App* cmd, bool panel, bool forecasts) {
        cmd->add_option("--out-dir", common.out_dir, "Output directory")->required();
        cmd->add_option("--seed", common.seed, "Random seed");
        cmd->add_option("--workers", common.workers, "Concurrent training jobs")->check(CLI::PositiveNumber);
        if (panel) cmd->add_option("--panel", common.panel, "Panel directory from 'ingest'")->required();
        if (forecasts) cmd->add_option("--forecasts", common.forecasts, "Forecast directory or CSV")->required();
    };

    IngestArgs ingest_args;
    auto* ingest = app.add_subcommand("ingest", "Validate observations and build a panel");
    ingest->add_option("--values", ingest_args.values, "series_id,timestamp,value CSV")->required();
    ingest->add_option("--hierarchy", ingest_args.hierarchy, "parent_id,child_id CSV")->required();
    ingest->add_option("--test-len", ingest_args.test_len, "Test time-steps")->required();
    ingest->add_option("--mode", ingest_args.mode, "bottom-only or all-levels");
    add_common(ingest, false, false);

    ForecastArgs forecast_args;
    auto* forecast = app.add_subcommand("forecast", "One-step base forecasts (AR per series or imported)");
    forecast->add_option("--p-grid", forecast_args.p_grid, "Comma-separated AR lag orders");
    forecast->add_option("--external", forecast_args.external, "series_id,timestamp,forecast CSV in raw units");
    forecast->add_option("--folds", forecast_args.folds, "Blocked cross-validation folds");
    add_common(forecast, true, false);

    ReconcileArgs reconcile_args;
    auto* reconcile = app.add_subcommand("reconcile", "Reconcile base forecasts");
    reconcile->add_option("--method", reconcile_args.method, "bu, tdhp, tdfp, oc, tm, mo or trainable")->required();
    reconcile->add_option("--model", reconcile_args.model, "Trained model file (trainable)");
    reconcile->add_option("--window", reconcile_args.window, "test or all");
    reconcile->add_option("--level", reconcile_args.level, "Middle level for 'mo'");
    add_train_options(reconcile, reconcile_args.train);
    add_common(reconcile, true, true);

    EvaluateArgs evaluate_args;
    auto* evaluate = app.add_subcommand("evaluate", "Score reconciled forecasts on the test window");
    evaluate->add_option("--reconciled", evaluate_args.reconciled, "name=path or path, repeatable")->required();
    evaluate->add_option("--proposed", evaluate_args.proposed, "Method tested against the best other one");
    evaluate->add_flag("--exclude-degenerate", evaluate_args.exclude_degenerate,
                       "Leave series with zero naive scale out of MASE");
    add_common(evaluate, true, false);

    SearchArgs search_args;
    auto* search = app.add_subcommand("search", "Random hyperparameter search with blocked cross-validation");
    search->add_option("--metric", search_args.metric, "mase or mlae");
    search->add_option("--trials", search_args.trials, "Sampled combinations")->check(CLI::PositiveNumber);
    search->add_flag("--regularized", search_args.regularized, "Use the regularized MASE loss");
    add_train_options(search, search_args.train);
    add_common(search, true, true);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        fail(hts::ErrorKind::input, e.what());
        return static_cast<int>(hts::ErrorKind::input);
    }

    try {
        if (*ingest) return cmd_ingest(ingest_args, common);
        if (*forecast) return cmd_forecast(forecast_args, common);
        if (*reconcile) return cmd_reconcile(reconcile_args, common);
        if (*evaluate) return cmd_evaluate(evaluate_args, common);
        if (*search) return cmd_search(search_args, common);
    } catch (const hts::Error& e) {
        fail(e.kind(), e.what());
        return e.exit_code();
    } catch (const fs::filesystem_error& e) {
        fail(hts::ErrorKind::input, e.what());
        return static_cast<int>(hts::ErrorKind::input);
    } catch (const std::exception& e) {
        fail(hts::ErrorKind::numeric, e.what());
        return static_cast<int>(hts::ErrorKind::numeric);
    }
    return 0;
}
