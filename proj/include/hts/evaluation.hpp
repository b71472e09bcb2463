#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <future>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "hts/dataset.hpp"
#include "hts/error.hpp"
#include "hts/forecasting.hpp"
#include "hts/io.hpp"
#include "hts/metrics.hpp"
#include "hts/neural.hpp"

namespace hts {

/// Validation score of a trained reconciler's predictions under the target
/// metric of `kind` (MLAE for the MLAE loss, otherwise the scaled error with
/// the loss's own per-series divisor).
inline double target_score(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& actual, LossKind kind,
                           const Eigen::VectorXd& naive_scale) {
    if (kind == LossKind::mlae) return mlae_score(pred, actual);
    return mase_score(pred, actual, loss_scale(kind, naive_scale));
}

struct CvResult {
    double mean_score = 0.0;
    std::vector<double> fold_scores;  // folds whose validation window holds no forecast step are skipped
};

/// Blocked cross-validation of one reconciler configuration. For each fold
/// the reconciler is trained on the fold's training steps of that fold's
/// forecasts and scored on its validation steps. Only the training slice of
/// the actuals reaches `train`.
inline CvResult cv_evaluate(const EncoderConfig& config, const SeriesPanel& panel, const FoldForecasts& cache) {
    if (cache.per_fold.size() != cache.folds.k()) throw ContractError("cv_evaluate: one forecast set per fold required");
    CvResult result;
    for (std::size_t f = 0; f < cache.folds.k(); ++f) {
        const auto& fold = cache.folds.folds[f];
        const auto& forecasts = cache.per_fold[f];
        std::vector<std::size_t> train_times, val_times;
        for (auto t = forecasts.window.begin; t < forecasts.window.end; ++t) {
            if (fold.validation.contains(t))
                val_times.push_back(t);
            else if (contains(fold.train, t))
                train_times.push_back(t);
        }
        if (train_times.empty())
            throw ContractError("cv_evaluate: fold " + std::to_string(f) + " has no training sample");
        if (val_times.empty()) continue;

        const auto data = training_data(panel, forecasts, train_times, fold.train);
        const auto enc = train(config, panel.hierarchy, data);
        const Eigen::MatrixXd pred = reconcile_columns(enc, forecasts.columns(val_times));
        Eigen::MatrixXd actual(panel.values.rows(), static_cast<Eigen::Index>(val_times.size()));
        for (std::size_t k = 0; k < val_times.size(); ++k)
            actual.col(static_cast<Eigen::Index>(k)) = panel.values.col(static_cast<Eigen::Index>(val_times[k]));
        result.fold_scores.push_back(target_score(pred, actual, config.loss, data.naive_scale));
    }
    if (result.fold_scores.empty()) throw ContractError("cv_evaluate: no fold has a scorable validation step");
    result.mean_score = mean_of(result.fold_scores);
    return result;
}

/// Sampled reconciler hyperparameters.
struct HyperGrid {
    std::vector<double> dropout{0.0, 0.1, 0.2};
    std::vector<double> learning_rate{1e-3, 1e-4, 1e-5};
    std::vector<double> weight_decay{1e-1, 3e-2, 1e-2};
    std::vector<std::size_t> epochs{50, 100, 200, 500};
    std::vector<std::size_t> hidden_layers{0, 1, 2, 3};

    std::size_t combinations() const {
        return dropout.size() * learning_rate.size() * weight_decay.size() * epochs.size() * hidden_layers.size();
    }
};

struct Trial {
    std::size_t index = 0;
    EncoderConfig config;
    double score = 0.0;
};

struct SearchResult {
    EncoderConfig best;
    std::size_t best_trial = 0;
    std::vector<Trial> log;
};

/// Draws `n` grid points uniformly with replacement; the other fields of
/// `base` are kept.
inline std::vector<EncoderConfig> sample_configs(const HyperGrid& grid, std::size_t n, std::uint64_t seed,
                                                 const EncoderConfig& base) {
    if (grid.combinations() == 0) throw ContractError("random_search: empty grid");
    std::mt19937_64 rng(seed);
    auto pick = [&rng](const auto& values) {
        std::uniform_int_distribution<std::size_t> d(0, values.size() - 1);
        return values[d(rng)];
    };
    std::vector<EncoderConfig> out;
    for (std::size_t i = 0; i < n; ++i) {
        EncoderConfig c = base;
        c.dropout = pick(grid.dropout);
        c.learning_rate = pick(grid.learning_rate);
        c.weight_decay = pick(grid.weight_decay);
        c.epochs = pick(grid.epochs);
        c.hidden_layers = pick(grid.hidden_layers);
        out.push_back(c);
    }
    return out;
}

/// Random search minimizing `score(config)`. Ties go to fewer epochs, then
/// fewer hidden layers, then the earlier draw. Trials may be scored on
/// several workers; the log and the winner do not depend on it.
inline SearchResult random_search(const HyperGrid& grid, std::size_t n, std::uint64_t seed, const EncoderConfig& base,
                                  const std::function<double(const EncoderConfig&)>& score, std::size_t workers = 1) {
    if (n < 1) throw ContractError("random_search: need at least one trial");
    const auto configs = sample_configs(grid, n, seed, base);
    SearchResult result;
    result.log.resize(n);
    for (std::size_t first = 0; first < n; first += std::max<std::size_t>(workers, 1)) {
        const auto last = std::min(n, first + std::max<std::size_t>(workers, 1));
        if (last - first == 1) {
            result.log[first] = {first, configs[first], score(configs[first])};
            continue;
        }
        std::vector<std::future<double>> jobs;
        for (auto i = first; i < last; ++i)
            jobs.push_back(std::async(std::launch::async, [&, i] { return score(configs[i]); }));
        for (auto i = first; i < last; ++i) result.log[i] = {i, configs[i], jobs[i - first].get()};
    }
    const auto key = [](const Trial& t) { return std::make_tuple(t.score, t.config.epochs, t.config.hidden_layers, t.index); };
    const auto best = std::min_element(result.log.begin(), result.log.end(),
                                       [&](const Trial& a, const Trial& b) { return key(a) < key(b); });
    result.best = best->config;
    result.best_trial = best->index;
    return result;
}

inline std::string search_log_csv(const SearchResult& r) {
    std::ostringstream out;
    out << "trial,dropout,lr,wd,epochs,layers,score\n";
    for (const auto& t : r.log)
        out << t.index << ',' << io::format_double(t.config.dropout) << ',' << io::format_double(t.config.learning_rate)
            << ',' << io::format_double(t.config.weight_decay) << ',' << t.config.epochs << ','
            << t.config.hidden_layers << ',' << io::format_double(t.score) << '\n';
    return out.str();
}

/// Test-window scores of one reconciliation method.
struct MethodScores {
    std::string name;
    double mase = 0.0;
    double mlae = 0.0;
    std::vector<LevelScore> levels;
    std::vector<double> scaled_errors;  // per (series, step), for the paired tests
    std::vector<double> log_errors;
};

struct Significance {
    std::string metric;
    std::string proposed;
    std::string best_other;
    TTestResult test;
    bool proposed_better = false;
};

struct EvalReport {
    std::vector<MethodScores> methods;
    std::vector<Significance> significance;
    std::vector<std::pair<std::string, std::string>> metadata;

    const MethodScores& method(const std::string& name) const {
        for (const auto& m : methods)
            if (m.name == name) return m;
        throw ContractError("report: no method '" + name + "'");
    }
};

/// Scores each method's N x W predictions against `actual` and tests the
/// `proposed` method against the best other one for each metric.
inline EvalReport evaluate_methods(const Hierarchy& h, const Eigen::MatrixXd& actual, const Eigen::VectorXd& naive_scale,
                                   const std::vector<std::pair<std::string, Eigen::MatrixXd>>& predictions,
                                   const std::string& proposed, bool exclude_degenerate = false) {
    if (predictions.empty()) throw ContractError("evaluate: no methods to score");
    EvalReport report;
    for (const auto& [name, pred] : predictions) {
        MethodScores s;
        s.name = name;
        s.scaled_errors = scaled_abs_errors(pred, actual, naive_scale, exclude_degenerate);
        s.log_errors = log_abs_errors(pred, actual);
        s.mase = mean_of(s.scaled_errors);
        s.mlae = mean_of(s.log_errors);
        if (!exclude_degenerate) s.levels = per_level_scores(pred, actual, h, naive_scale);
        report.methods.push_back(std::move(s));
    }
    if (predictions.size() < 2) return report;
    const auto& prop = report.method(proposed);
    for (const std::string metric : {"mase", "mlae"}) {
        const auto value = [&](const MethodScores& m) { return metric == "mase" ? m.mase : m.mlae; };
        const MethodScores* best = nullptr;
        for (const auto& m : report.methods)
            if (m.name != proposed && (best == nullptr || value(m) < value(*best))) best = &m;
        Significance sig;
        sig.metric = metric;
        sig.proposed = proposed;
        sig.best_other = best->name;
        sig.test = metric == "mase" ? paired_t_test(prop.scaled_errors, best->scaled_errors)
                                    : paired_t_test(prop.log_errors, best->log_errors);
        sig.proposed_better = value(prop) < value(*best);
        report.significance.push_back(sig);
    }
    return report;
}

namespace detail {

inline std::string fixed(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

inline std::string metadata_block(const EvalReport& r) {
    std::string out;
    for (const auto& [k, v] : r.metadata) out += "# " + k + ": " + v + "\n";
    return out;
}

inline std::string stars_for(const EvalReport& r, const std::string& metric, const std::string& method) {
    for (const auto& s : r.significance)
        if (s.metric == metric && s.proposed == method && s.proposed_better) {
            const auto stars = significance_stars(s.test.p);
            return stars.empty() ? "" : " " + stars;
        }
    return "";
}

} // namespace detail

/// Overall scores, one row per metric and one column per method. Stars mark
/// a proposed method that beats the best other one at 5% (*) or 1% (**).
inline std::string overall_csv(const EvalReport& r) {
    std::string out = detail::metadata_block(r) + "metric";
    for (const auto& m : r.methods) out += "," + m.name;
    out += "\n";
    for (const std::string metric : {"mase", "mlae"}) {
        out += metric;
        for (const auto& m : r.methods)
            out += "," + detail::fixed(metric == "mase" ? m.mase : m.mlae) + detail::stars_for(r, metric, m.name);
        out += "\n";
    }
    return out;
}

/// Per-level scores, rows "mase - level k" then "mlae - level k".
inline std::string levels_csv(const EvalReport& r) {
    std::string out = detail::metadata_block(r) + "row";
    for (const auto& m : r.methods) out += "," + m.name;
    out += "\n";
    if (r.methods.empty() || r.methods.front().levels.empty()) return out;
    const auto levels = r.methods.front().levels.size();
    for (const std::string metric : {"mase", "mlae"}) {
        for (std::size_t l = 0; l < levels; ++l) {
            out += metric + " - level " + std::to_string(l);
            for (const auto& m : r.methods)
                out += "," + detail::fixed(metric == "mase" ? m.levels[l].mase : m.levels[l].mlae);
            out += "\n";
        }
    }
    return out;
}

inline std::string significance_csv(const EvalReport& r) {
    std::string out = detail::metadata_block(r) + "metric,proposed,best_other,t,p,stars\n";
    for (const auto& s : r.significance)
        out += s.metric + "," + s.proposed + "," + s.best_other + "," + io::format_double(s.test.t) + "," +
               io::format_double(s.test.p) + "," + (s.proposed_better ? significance_stars(s.test.p) : "") + "\n";
    return out;
}

} // namespace hts
