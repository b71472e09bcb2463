#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <istream>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hts/dataset.hpp"
#include "hts/error.hpp"
#include "hts/io.hpp"

namespace hts {

/// y_t = intercept + sum_k coefficients[k-1] * y_{t-k}
struct ARModel {
    std::size_t p = 1;
    Eigen::VectorXd coefficients;
    double intercept = 0.0;
    std::size_t series_index = 0;

    /// One-step prediction for time `t` from the observed values before it.
    double predict(const Eigen::Ref<const Eigen::RowVectorXd>& series, std::size_t t) const {
        double y = intercept;
        for (std::size_t k = 1; k <= p; ++k)
            y += coefficients(static_cast<Eigen::Index>(k - 1)) * series(static_cast<Eigen::Index>(t - k));
        return y;
    }
};

inline constexpr double ols_ridge_jitter = 1e-8;

/// Targets t inside `window` whose p lags are also inside `window`.
inline std::vector<std::size_t> ar_rows(const TimeRanges& window, std::size_t p) {
    std::vector<std::size_t> rows;
    for (auto t : time_indices(window)) {
        if (t < p) continue;
        bool ok = true;
        for (std::size_t k = 1; k <= p && ok; ++k) ok = contains(window, t - k);
        if (ok) rows.push_back(t);
    }
    return rows;
}

/// Least-squares AR(p) fit on the targets of `train_window`. Rows whose lags
/// leave the window are dropped; the Gram diagonal carries a 1e-8 jitter.
inline ARModel fit_ar(const Eigen::Ref<const Eigen::RowVectorXd>& series, const TimeRanges& train_window,
                      std::size_t p, std::size_t series_index = 0) {
    if (p < 1) throw ContractError("fit_ar: lag order must be >= 1");
    for (const auto& r : train_window)
        if (r.end > static_cast<std::size_t>(series.size()))
            throw ContractError("fit_ar: training window exceeds the series length");
    const auto rows = ar_rows(train_window, p);
    if (rows.size() < p + 2)
        throw ContractError("fit_ar: AR(" + std::to_string(p) + ") needs " + std::to_string(p + 2) +
                            " usable rows, window provides " + std::to_string(rows.size()));

    const auto cols = static_cast<Eigen::Index>(p + 1);
    Eigen::MatrixXd design(static_cast<Eigen::Index>(rows.size()), cols);
    Eigen::VectorXd target(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const auto t = rows[r];
        const auto ri = static_cast<Eigen::Index>(r);
        design(ri, 0) = 1.0;
        for (std::size_t k = 1; k <= p; ++k)
            design(ri, static_cast<Eigen::Index>(k)) = series(static_cast<Eigen::Index>(t - k));
        target(ri) = series(static_cast<Eigen::Index>(t));
    }
    if (!design.allFinite() || !target.allFinite()) throw NumericError("fit_ar: non-finite values in series");

    Eigen::MatrixXd gram = design.transpose() * design;
    gram.diagonal().array() += ols_ridge_jitter;
    const Eigen::VectorXd beta = gram.ldlt().solve(design.transpose() * target);
    if (!beta.allFinite()) throw NumericError("fit_ar: least-squares solve failed");

    ARModel model;
    model.p = p;
    model.intercept = beta(0);
    model.coefficients = beta.tail(static_cast<Eigen::Index>(p));
    model.series_index = series_index;
    return model;
}

/// Teacher-forced one-step predictions for every t in `window`.
inline Eigen::VectorXd one_step_forecasts(const ARModel& model, const Eigen::Ref<const Eigen::RowVectorXd>& series,
                                          TimeRange window) {
    if (window.begin < model.p)
        throw ContractError("one_step_forecasts: window starts at " + std::to_string(window.begin) +
                            " but AR(" + std::to_string(model.p) + ") needs start >= p");
    if (window.end > static_cast<std::size_t>(series.size()))
        throw ContractError("one_step_forecasts: window exceeds the series length");
    Eigen::VectorXd out(static_cast<Eigen::Index>(window.size()));
    for (auto t = window.begin; t < window.end; ++t)
        out(static_cast<Eigen::Index>(t - window.begin)) = model.predict(series, t);
    return out;
}

/// Mean validation MAE per fold for AR(p); validation steps before p (or
/// `first_scored`) are skipped.
inline double cv_mae(const Eigen::Ref<const Eigen::RowVectorXd>& series, std::size_t p, const FoldSpec& folds,
                     std::size_t first_scored = 0) {
    double total = 0.0;
    std::size_t scored = 0;
    for (const auto& fold : folds.folds) {
        const TimeRange window{std::max({fold.validation.begin, p, first_scored}), fold.validation.end};
        if (window.size() == 0) continue;
        const auto model = fit_ar(series, fold.train, p);
        const auto pred = one_step_forecasts(model, series, window);
        const auto actual = series.segment(static_cast<Eigen::Index>(window.begin), static_cast<Eigen::Index>(window.size()));
        total += (pred.transpose() - actual).cwiseAbs().mean();
        ++scored;
    }
    if (scored == 0) throw ContractError("select_lag: no validation step is scorable for AR(" + std::to_string(p) + ")");
    return total / static_cast<double>(scored);
}

/// Lag order from `p_grid` with the lowest mean validation MAE; ties go to
/// the smaller order.
inline std::size_t select_lag(const SeriesPanel& panel, std::size_t series_index, std::vector<std::size_t> p_grid,
                              const FoldSpec& folds) {
    if (p_grid.empty()) throw ContractError("select_lag: empty lag grid");
    std::sort(p_grid.begin(), p_grid.end());
    p_grid.erase(std::unique(p_grid.begin(), p_grid.end()), p_grid.end());
    for (auto p : p_grid) {
        if (p < 1) throw ContractError("select_lag: lag order must be >= 1");
        for (const auto& fold : folds.folds) {
            if (ar_rows(fold.train, p).size() < p + 2)
                throw ContractError("select_lag: AR(" + std::to_string(p) +
                                    ") is infeasible on a fold training window of " +
                                    std::to_string(total_size(fold.train)) + " steps");
        }
    }
    if (p_grid.size() == 1) return p_grid.front();

    const Eigen::RowVectorXd series = panel.values.row(static_cast<Eigen::Index>(series_index));
    std::size_t best = p_grid.front();
    double best_score = std::numeric_limits<double>::infinity();
    // Every order is scored on the same steps, those the largest order can predict.
    for (auto p : p_grid) {
        const double score = cv_mae(series, p, folds, p_grid.back());
        if (score < best_score) {
            best_score = score;
            best = p;
        }
    }
    return best;
}

inline std::vector<std::size_t> select_lags(const SeriesPanel& panel, const std::vector<std::size_t>& p_grid,
                                            const FoldSpec& folds) {
    std::vector<std::size_t> lags(panel.series_count());
    for (std::size_t i = 0; i < lags.size(); ++i) lags[i] = select_lag(panel, i, p_grid, folds);
    return lags;
}

enum class ForecastSource { internal_ar, external_file };

inline const char* source_name(ForecastSource s) { return s == ForecastSource::internal_ar ? "internal-AR" : "external-file"; }

/// One-step-ahead base forecasts for all N series over `window` (scaled units).
struct ForecastSet {
    Eigen::MatrixXd values;  // N x window.size()
    TimeRange window;
    ForecastSource source = ForecastSource::internal_ar;

    /// Column of time index t.
    Eigen::VectorXd at(std::size_t t) const {
        if (!window.contains(t)) throw ContractError("forecast set: time index " + std::to_string(t) + " outside window");
        return values.col(static_cast<Eigen::Index>(t - window.begin));
    }

    /// Columns for the given time indices, in order.
    Eigen::MatrixXd columns(const std::vector<std::size_t>& times) const {
        Eigen::MatrixXd out(values.rows(), static_cast<Eigen::Index>(times.size()));
        for (std::size_t k = 0; k < times.size(); ++k) out.col(static_cast<Eigen::Index>(k)) = at(times[k]);
        return out;
    }
};

/// Fits AR(lags[i]) per series on `fit_window` and forecasts over `window`.
inline ForecastSet ar_forecasts(const SeriesPanel& panel, const std::vector<std::size_t>& lags,
                                const TimeRanges& fit_window, TimeRange window) {
    if (lags.size() != panel.series_count()) throw ContractError("ar_forecasts: one lag order per series required");
    ForecastSet set;
    set.window = window;
    set.source = ForecastSource::internal_ar;
    set.values.resize(static_cast<Eigen::Index>(panel.series_count()), static_cast<Eigen::Index>(window.size()));
    for (std::size_t i = 0; i < lags.size(); ++i) {
        const Eigen::RowVectorXd series = panel.values.row(static_cast<Eigen::Index>(i));
        const auto model = fit_ar(series, fit_window, lags[i], i);
        set.values.row(static_cast<Eigen::Index>(i)) = one_step_forecasts(model, series, window).transpose();
    }
    return set;
}

inline std::size_t max_lag(const std::vector<std::size_t>& lags) {
    return lags.empty() ? 0 : *std::max_element(lags.begin(), lags.end());
}

/// Forecasts over [max lag, T) from models fitted on the full training period.
inline ForecastSet panel_forecasts(const SeriesPanel& panel, const std::vector<std::size_t>& lags) {
    return ar_forecasts(panel, lags, {panel.train_range()}, {max_lag(lags), panel.length()});
}

/// Per-fold forecasts over [max lag, train_len), each from models refitted on
/// that fold's training window. These are the reconciler inputs for blocked
/// cross-validation.
struct FoldForecasts {
    FoldSpec folds;
    std::vector<ForecastSet> per_fold;
};

inline FoldForecasts fold_forecasts(const SeriesPanel& panel, const std::vector<std::size_t>& lags,
                                    const FoldSpec& folds) {
    FoldForecasts out;
    out.folds = folds;
    const TimeRange window{max_lag(lags), panel.train_len};
    for (const auto& fold : folds.folds) out.per_fold.push_back(ar_forecasts(panel, lags, fold.train, window));
    return out;
}

/// Reads `series_id,timestamp,forecast` in raw units and rescales it onto the
/// panel. The timestamps must be a contiguous run of the panel's axis.
inline ForecastSet import_forecasts(std::istream& in, const SeriesPanel& panel, const std::string& what = "forecasts") {
    auto table = read_series_table(in, "forecast", what);
    const auto& h = panel.hierarchy;
    for (const auto& [id, _] : table.series)
        if (h.index_of(id) == no_index) throw InputError(what + ": series '" + id + "' is not in the hierarchy");
    const auto first = std::find(panel.timestamps.begin(), panel.timestamps.end(), table.timestamps.front());
    if (first == panel.timestamps.end())
        throw InputError(what + ": timestamp '" + table.timestamps.front() + "' is not in the panel");
    const auto begin = static_cast<std::size_t>(first - panel.timestamps.begin());
    if (begin + table.timestamps.size() > panel.length() ||
        !std::equal(table.timestamps.begin(), table.timestamps.end(), first))
        throw InputError(what + ": timestamps are misaligned with the panel (missing or extra time-step)");

    ForecastSet set;
    set.source = ForecastSource::external_file;
    set.window = {begin, begin + table.timestamps.size()};
    set.values.resize(static_cast<Eigen::Index>(h.size()), static_cast<Eigen::Index>(set.window.size()));
    for (std::size_t i = 0; i < h.size(); ++i) {
        const auto it = table.series.find(h.id(i));
        if (it == table.series.end()) throw InputError(what + ": missing series '" + h.id(i) + "'");
        for (std::size_t k = 0; k < it->second.size(); ++k)
            set.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = it->second[k] / panel.global_scale;
    }
    return set;
}

} // namespace hts
