#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hts/dataset.hpp"
#include "hts/error.hpp"
#include "hts/hierarchy.hpp"

namespace hts {

enum class LinearMethod { bu, tdhp, oc, tm };

inline const char* method_name(LinearMethod m) {
    switch (m) {
        case LinearMethod::bu: return "bu";
        case LinearMethod::tdhp: return "tdhp";
        case LinearMethod::oc: return "oc";
        case LinearMethod::tm: return "tm";
    }
    return "?";
}

/// The M x N matrix P of a linear reconciler, reconciled = S * P * forecasts.
struct MappingMatrix {
    Eigen::MatrixXd entries;
    LinearMethod method = LinearMethod::bu;
};

inline MappingMatrix bu_matrix(const Hierarchy& h) {
    MappingMatrix p{Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(h.bottom_count()), static_cast<Eigen::Index>(h.size())),
                    LinearMethod::bu};
    for (std::size_t j = 0; j < h.bottom_count(); ++j)
        p.entries(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(h.bottom_indices()[j])) = 1.0;
    return p;
}

/// Top-down with historical proportions: leaf j receives
/// mean(leaf j) / mean(root) of the top-level forecast, means over `train`.
inline MappingMatrix tdhp_matrix(const Hierarchy& h, const Eigen::MatrixXd& values, const TimeRanges& train) {
    const auto count = total_size(train);
    if (count == 0) throw ContractError("tdhp: empty training window");
    Eigen::VectorXd means = Eigen::VectorXd::Zero(values.rows());
    for (const auto& r : train)
        means += values.middleCols(static_cast<Eigen::Index>(r.begin), static_cast<Eigen::Index>(r.size())).rowwise().sum();
    means /= static_cast<double>(count);
    const double root_mean = means(0);
    if (root_mean == 0.0) throw ContractError("tdhp: root series has zero training mean");
    MappingMatrix p{Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(h.bottom_count()), static_cast<Eigen::Index>(h.size())),
                    LinearMethod::tdhp};
    for (std::size_t j = 0; j < h.bottom_count(); ++j)
        p.entries(static_cast<Eigen::Index>(j), 0) = means(static_cast<Eigen::Index>(h.bottom_indices()[j])) / root_mean;
    return p;
}

inline MappingMatrix tdhp_matrix(const Hierarchy& h, const SeriesPanel& panel) {
    return tdhp_matrix(h, panel.values, {panel.train_range()});
}

inline constexpr double tdfp_zero_sum = 1e-12;

/// Top-down with forecasted proportions, descending one level at a time.
/// Sibling groups whose forecasts sum to (almost) zero split their parent
/// equally; the parents concerned are appended to `equal_splits`.
inline Eigen::VectorXd tdfp_reconcile(const Hierarchy& h, const Eigen::Ref<const Eigen::VectorXd>& forecasts,
                                      std::vector<std::size_t>& equal_splits) {
    if (static_cast<std::size_t>(forecasts.size()) != h.size())
        throw ContractError("tdfp: expected " + std::to_string(h.size()) + " forecasts, got " +
                            std::to_string(forecasts.size()));
    Eigen::VectorXd out(forecasts.size());
    out(0) = forecasts(0);
    for (std::size_t i = 0; i < h.size(); ++i) {
        const auto& kids = h.children(i);
        if (kids.empty()) continue;
        double denom = 0.0;
        for (auto c : kids) denom += forecasts(static_cast<Eigen::Index>(c));
        const double parent = out(static_cast<Eigen::Index>(i));
        if (std::abs(denom) < tdfp_zero_sum) {
            equal_splits.push_back(i);
            for (auto c : kids) out(static_cast<Eigen::Index>(c)) = parent / static_cast<double>(kids.size());
        } else {
            for (auto c : kids) out(static_cast<Eigen::Index>(c)) = parent * (forecasts(static_cast<Eigen::Index>(c)) / denom);
        }
    }
    Eigen::VectorXd bottom(static_cast<Eigen::Index>(h.bottom_count()));
    for (std::size_t j = 0; j < h.bottom_count(); ++j)
        bottom(static_cast<Eigen::Index>(j)) = out(static_cast<Eigen::Index>(h.bottom_indices()[j]));
    return SummingMatrix(h).apply(bottom);
}

inline Eigen::VectorXd tdfp_reconcile(const Hierarchy& h, const Eigen::Ref<const Eigen::VectorXd>& forecasts) {
    std::vector<std::size_t> ignored;
    return tdfp_reconcile(h, forecasts, ignored);
}

/// Middle-out: nodes on `level` keep their forecasts, forecasted proportions
/// below them, aggregation above. Leaves shallower than `level` keep theirs.
inline Eigen::VectorXd middle_out_reconcile(const Hierarchy& h, const Eigen::Ref<const Eigen::VectorXd>& forecasts,
                                            std::size_t level) {
    if (level >= h.level_count()) throw ContractError("middle_out: level " + std::to_string(level) + " does not exist");
    if (static_cast<std::size_t>(forecasts.size()) != h.size())
        throw ContractError("middle_out: expected " + std::to_string(h.size()) + " forecasts");
    Eigen::VectorXd out = forecasts;
    for (std::size_t i = 0; i < h.size(); ++i) {
        if (h.level(i) < level || h.is_leaf(i)) continue;
        const auto& kids = h.children(i);
        double denom = 0.0;
        for (auto c : kids) denom += forecasts(static_cast<Eigen::Index>(c));
        const double parent = out(static_cast<Eigen::Index>(i));
        for (auto c : kids)
            out(static_cast<Eigen::Index>(c)) = std::abs(denom) < tdfp_zero_sum
                                                    ? parent / static_cast<double>(kids.size())
                                                    : parent * (forecasts(static_cast<Eigen::Index>(c)) / denom);
    }
    Eigen::VectorXd bottom(static_cast<Eigen::Index>(h.bottom_count()));
    for (std::size_t j = 0; j < h.bottom_count(); ++j)
        bottom(static_cast<Eigen::Index>(j)) = out(static_cast<Eigen::Index>(h.bottom_indices()[j]));
    return SummingMatrix(h).apply(bottom);
}

/// Identity-weighted least-squares projection P = (S'S)^-1 S'.
inline MappingMatrix oc_matrix(const Hierarchy& h) {
    const Eigen::MatrixXd s = SummingMatrix(h).dense();
    const Eigen::MatrixXd gram = s.transpose() * s;
    return {gram.llt().solve(s.transpose()), LinearMethod::oc};
}

enum class Shrinkage { diagonal_shrinkage, diagonal_only };

/// Optimal shrinkage intensity toward the diagonal target (Schafer-Strimmer
/// estimate on standardized residuals), clamped to [0, 1].
inline double shrinkage_intensity(const Eigen::MatrixXd& residuals) {
    const auto n = residuals.rows();
    const auto r = static_cast<double>(residuals.cols());
    const Eigen::MatrixXd centered = residuals.colwise() - residuals.rowwise().mean();
    const Eigen::VectorXd sd = (centered.rowwise().squaredNorm() / (r - 1.0)).cwiseSqrt();
    Eigen::MatrixXd z = Eigen::MatrixXd::Zero(n, residuals.cols());
    for (Eigen::Index i = 0; i < n; ++i)
        if (sd(i) > 0.0) z.row(i) = centered.row(i) / sd(i);
    // Products w_kij = z_ik z_jk; correlation r_ij = sum_k w_kij / (R-1).
    double var_sum = 0.0;
    double corr_sum = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = i + 1; j < n; ++j) {
            const Eigen::ArrayXd w = z.row(i).array() * z.row(j).array();
            const double mean_w = w.mean();
            const double corr = w.sum() / (r - 1.0);
            var_sum += r / ((r - 1.0) * (r - 1.0) * (r - 1.0)) * (w - mean_w).square().sum();
            corr_sum += corr * corr;
        }
    }
    if (corr_sum == 0.0) return 1.0;
    return std::clamp(var_sum / corr_sum, 0.0, 1.0);
}

/// Sample covariance of in-sample residuals (N x R), optionally shrunk
/// toward its diagonal with the optimal-intensity estimate for that target.
inline Eigen::MatrixXd error_covariance(const Eigen::MatrixXd& residuals, Shrinkage shrink) {
    if (residuals.cols() < 2) throw ContractError("error_covariance: need at least 2 residual columns");
    if (!residuals.allFinite()) throw NumericError("error_covariance: non-finite residuals");
    const Eigen::MatrixXd centered = residuals.colwise() - residuals.rowwise().mean();
    const Eigen::MatrixXd cov = centered * centered.transpose() / static_cast<double>(residuals.cols() - 1);
    const Eigen::MatrixXd diag = cov.diagonal().asDiagonal();
    if (shrink == Shrinkage::diagonal_only) return diag;
    const double lambda = shrinkage_intensity(residuals);
    return lambda * diag + (1.0 - lambda) * cov;
}

/// Trace-minimization projection P = (S' W^-1 S)^-1 S' W^-1.
inline MappingMatrix tm_matrix(const Hierarchy& h, const Eigen::MatrixXd& w) {
    const auto n = static_cast<Eigen::Index>(h.size());
    if (w.rows() != n || w.cols() != n) throw ContractError("tm: covariance must be N x N");
    if (!w.isApprox(w.transpose(), 1e-12)) throw ContractError("tm: covariance is not symmetric");
    const Eigen::LLT<Eigen::MatrixXd> chol(w);
    if (chol.info() != Eigen::Success) throw NumericError("tm: covariance is not positive-definite");
    const Eigen::MatrixXd s = SummingMatrix(h).dense();
    const Eigen::MatrixXd winv_s = chol.solve(s);
    const Eigen::MatrixXd gram = s.transpose() * winv_s;
    const Eigen::LLT<Eigen::MatrixXd> gram_chol(gram);
    if (gram_chol.info() != Eigen::Success) throw NumericError("tm: S' W^-1 S is not positive-definite");
    return {gram_chol.solve(winv_s.transpose()), LinearMethod::tm};
}

/// S * (P * forecasts).
inline Eigen::VectorXd reconcile_linear(const MappingMatrix& p, const SummingMatrix& s,
                                        const Eigen::Ref<const Eigen::VectorXd>& forecasts) {
    if (p.entries.cols() != forecasts.size() || p.entries.rows() != s.cols() || s.rows() != forecasts.size())
        throw ContractError("reconcile_linear: shape mismatch (P " + std::to_string(p.entries.rows()) + "x" +
                            std::to_string(p.entries.cols()) + ", S " + std::to_string(s.rows()) + "x" +
                            std::to_string(s.cols()) + ", forecasts " + std::to_string(forecasts.size()) + ")");
    return s.apply(Eigen::VectorXd(p.entries * forecasts));
}

/// Column-wise reconcile_linear over an N x W block of forecasts.
inline Eigen::MatrixXd reconcile_linear_columns(const MappingMatrix& p, const SummingMatrix& s,
                                               const Eigen::MatrixXd& forecasts) {
    Eigen::MatrixXd out(forecasts.rows(), forecasts.cols());
    for (Eigen::Index t = 0; t < forecasts.cols(); ++t) out.col(t) = reconcile_linear(p, s, Eigen::VectorXd(forecasts.col(t)));
    return out;
}

} // namespace hts
