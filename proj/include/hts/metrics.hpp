#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hts/error.hpp"
#include "hts/hierarchy.hpp"

namespace hts {

namespace detail {

inline void check_shapes(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& actual, const char* what) {
    if (pred.rows() != actual.rows() || pred.cols() != actual.cols())
        throw ContractError(std::string(what) + ": prediction and actual shapes differ");
    if (pred.size() == 0) throw ContractError(std::string(what) + ": no observations");
    if (!pred.allFinite() || !actual.allFinite()) throw NumericError(std::string(what) + ": non-finite values");
}

} // namespace detail

/// |pred - actual| / naive_scale_i for every (series, step), row-major by
/// series. Series with zero naive scale raise unless `exclude_degenerate`,
/// in which case they are left out.
inline std::vector<double> scaled_abs_errors(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& actual,
                                             const Eigen::VectorXd& naive_scale, bool exclude_degenerate = false) {
    detail::check_shapes(pred, actual, "mase");
    if (naive_scale.size() != pred.rows()) throw ContractError("mase: naive scale must have one entry per series");
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(pred.size()));
    for (Eigen::Index i = 0; i < pred.rows(); ++i) {
        if (!(naive_scale(i) > 0.0)) {
            if (exclude_degenerate) continue;
            throw ContractError("mase: series " + std::to_string(i) +
                                " has zero naive scale (constant over the training period)");
        }
        for (Eigen::Index t = 0; t < pred.cols(); ++t) out.push_back(std::abs(pred(i, t) - actual(i, t)) / naive_scale(i));
    }
    return out;
}

/// log(1 + |pred - actual|) for every (series, step), row-major by series.
inline std::vector<double> log_abs_errors(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& actual) {
    detail::check_shapes(pred, actual, "mlae");
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(pred.size()));
    for (Eigen::Index i = 0; i < pred.rows(); ++i)
        for (Eigen::Index t = 0; t < pred.cols(); ++t) out.push_back(std::log1p(std::abs(pred(i, t) - actual(i, t))));
    return out;
}

inline double mean_of(std::span<const double> values) {
    if (values.empty()) throw ContractError("mean of an empty set of errors");
    double sum = 0.0;
    for (double v : values) sum += v;
    return sum / static_cast<double>(values.size());
}

/// Mean absolute scaled error pooled over all series and steps.
inline double mase_score(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& actual, const Eigen::VectorXd& naive_scale,
                         bool exclude_degenerate = false) {
    return mean_of(scaled_abs_errors(pred, actual, naive_scale, exclude_degenerate));
}

/// Mean of log(1 + |error|) pooled over all series and steps.
inline double mlae_score(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& actual) {
    return mean_of(log_abs_errors(pred, actual));
}

struct LevelScore {
    std::size_t level = 0;
    std::size_t observations = 0;  // series on the level x steps
    double mase = 0.0;
    double mlae = 0.0;
};

/// MASE and MLAE restricted to the series of each level.
inline std::vector<LevelScore> per_level_scores(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& actual,
                                                const Hierarchy& h, const Eigen::VectorXd& naive_scale) {
    detail::check_shapes(pred, actual, "per_level_scores");
    if (static_cast<std::size_t>(pred.rows()) != h.size())
        throw ContractError("per_level_scores: expected one row per hierarchy node");
    std::vector<LevelScore> out;
    for (std::size_t level = 0; level < h.level_count(); ++level) {
        const auto [first, last] = h.level_range(level);
        const auto rows = static_cast<Eigen::Index>(last - first);
        const auto off = static_cast<Eigen::Index>(first);
        LevelScore s;
        s.level = level;
        s.observations = static_cast<std::size_t>(rows * pred.cols());
        s.mase = mase_score(pred.middleRows(off, rows), actual.middleRows(off, rows), naive_scale.segment(off, rows));
        s.mlae = mlae_score(pred.middleRows(off, rows), actual.middleRows(off, rows));
        out.push_back(s);
    }
    return out;
}

/// Regularized incomplete beta I_x(a, b) by the modified Lentz continued
/// fraction.
inline double incomplete_beta(double a, double b, double x) {
    if (x < 0.0 || x > 1.0) throw ContractError("incomplete_beta: x outside [0, 1]");
    if (x == 0.0 || x == 1.0) return x;
    const double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
    if (x > (a + 1.0) / (a + b + 2.0)) return 1.0 - incomplete_beta(b, a, 1.0 - x);

    constexpr double tiny = 1e-300;
    constexpr double eps = 1e-16;
    double c = 1.0;
    double d = 1.0 - (a + b) * x / (a + 1.0);
    if (std::abs(d) < tiny) d = tiny;
    d = 1.0 / d;
    double f = d;
    for (int m = 1; m <= 10000; ++m) {
        const double md = m;
        double num = md * (b - md) * x / ((a + 2.0 * md - 1.0) * (a + 2.0 * md));
        d = 1.0 + num * d;
        if (std::abs(d) < tiny) d = tiny;
        c = 1.0 + num / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        f *= d * c;
        num = -(a + md) * (a + b + md) * x / ((a + 2.0 * md) * (a + 2.0 * md + 1.0));
        d = 1.0 + num * d;
        if (std::abs(d) < tiny) d = tiny;
        c = 1.0 + num / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double delta = d * c;
        f *= delta;
        if (std::abs(delta - 1.0) < eps) return std::exp(log_front) * f / a;
    }
    throw NumericError("incomplete_beta: continued fraction did not converge");
}

/// Two-sided tail probability of Student's t with `df` degrees of freedom.
inline double student_t_two_sided(double t, double df) {
    if (std::isinf(t)) return 0.0;
    return incomplete_beta(df / 2.0, 0.5, df / (df + t * t));
}

struct TTestResult {
    double t = 0.0;
    double p = 1.0;
};

/// Two-sided paired t-test on the differences a - b.
inline TTestResult paired_t_test(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw ContractError("paired_t_test: samples differ in length");
    if (a.size() < 2) throw ContractError("paired_t_test: need at least 2 pairs");
    const auto k = static_cast<double>(a.size());
    double mean = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) mean += a[i] - b[i];
    mean /= k;
    double ss = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double e = (a[i] - b[i]) - mean;
        ss += e * e;
    }
    const double sd = std::sqrt(ss / (k - 1.0));
    if (sd == 0.0) {
        if (mean == 0.0) return {0.0, 1.0};
        return {mean > 0.0 ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity(), 0.0};
    }
    const double t = mean / (sd / std::sqrt(k));
    return {t, student_t_two_sided(t, k - 1.0)};
}

/// "**" below 1%, "*" below 5%.
inline std::string significance_stars(double p) {
    if (p < 0.01) return "**";
    if (p < 0.05) return "*";
    return "";
}

} // namespace hts
