#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "hts/error.hpp"
#include "hts/hierarchy.hpp"
#include "hts/io.hpp"

namespace hts {

/// Half-open range of time indices [begin, end).
struct TimeRange {
    std::size_t begin = 0;
    std::size_t end = 0;

    std::size_t size() const noexcept { return end > begin ? end - begin : 0; }
    bool contains(std::size_t t) const noexcept { return t >= begin && t < end; }
    bool operator==(const TimeRange&) const = default;
};

using TimeRanges = std::vector<TimeRange>;

inline bool contains(const TimeRanges& ranges, std::size_t t) {
    for (const auto& r : ranges)
        if (r.contains(t)) return true;
    return false;
}

inline std::size_t total_size(const TimeRanges& ranges) {
    std::size_t n = 0;
    for (const auto& r : ranges) n += r.size();
    return n;
}

/// Time indices covered by `ranges`, ascending.
inline std::vector<std::size_t> time_indices(const TimeRanges& ranges) {
    std::vector<std::size_t> out;
    for (const auto& r : ranges)
        for (auto t = r.begin; t < r.end; ++t) out.push_back(t);
    std::sort(out.begin(), out.end());
    return out;
}

enum class IngestMode { bottom_only, all_levels };

inline const char* mode_name(IngestMode mode) {
    return mode == IngestMode::bottom_only ? "bottom-only" : "all-levels";
}

inline IngestMode parse_mode(const std::string& text) {
    if (text == "bottom-only") return IngestMode::bottom_only;
    if (text == "all-levels") return IngestMode::all_levels;
    throw InputError("unknown ingest mode '" + text + "' (expected bottom-only or all-levels)");
}

/// Coherent observations for every node, divided by one global scale.
struct SeriesPanel {
    Hierarchy hierarchy;
    Eigen::MatrixXd values;  // N x T, scaled
    std::vector<std::string> timestamps;
    std::size_t train_len = 0;
    double global_scale = 1.0;
    IngestMode mode = IngestMode::bottom_only;

    std::size_t series_count() const noexcept { return static_cast<std::size_t>(values.rows()); }
    std::size_t length() const noexcept { return static_cast<std::size_t>(values.cols()); }
    std::size_t test_len() const noexcept { return length() - train_len; }
    TimeRange train_range() const noexcept { return {0, train_len}; }
    TimeRange test_range() const noexcept { return {train_len, length()}; }
};

inline constexpr double ingest_coherence_tol = 1e-6;
inline constexpr const char* global_scale_convention = "mean |value| over all series, training window";

/// Validates raw N x T observations and applies the global scaling.
inline SeriesPanel make_panel(Hierarchy h, const Eigen::MatrixXd& raw, std::vector<std::string> timestamps,
                              std::size_t test_len, IngestMode mode) {
    const auto n = static_cast<Eigen::Index>(h.size());
    if (raw.rows() != n)
        throw InputError("panel: expected " + std::to_string(n) + " series, got " + std::to_string(raw.rows()));
    if (static_cast<std::size_t>(raw.cols()) != timestamps.size())
        throw InputError("panel: timestamp count does not match value columns");
    if (!raw.allFinite()) throw InputError("panel: non-finite value");
    const auto length = static_cast<std::size_t>(raw.cols());
    if (test_len >= length || length - test_len < 2)
        throw InputError("panel: need at least 2 training steps (T=" + std::to_string(length) +
                         ", test_len=" + std::to_string(test_len) + ")");
    for (std::size_t t = 0; t < length; ++t) {
        if (!is_coherent(h, raw.col(static_cast<Eigen::Index>(t)), ingest_coherence_tol)) {
            for (std::size_t i = 0; i < h.size(); ++i) {
                if (h.is_leaf(i)) continue;
                double sum = 0.0;
                for (auto c : h.children(i)) sum += raw(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(t));
                const double yi = raw(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(t));
                if (std::abs(yi - sum) > ingest_coherence_tol * std::max(1.0, std::abs(yi)))
                    throw InputError("panel: coherence violation at series '" + h.id(i) + "', timestamp '" +
                                     timestamps[t] + "' (value " + io::format_double(yi) + ", children sum " +
                                     io::format_double(sum) + ")");
            }
        }
    }

    SeriesPanel panel;
    panel.train_len = length - test_len;
    const auto train = raw.leftCols(static_cast<Eigen::Index>(panel.train_len));
    panel.global_scale = train.cwiseAbs().mean();
    if (!(panel.global_scale > 0.0)) throw InputError("panel: training data is identically zero");
    panel.values = raw / panel.global_scale;
    panel.hierarchy = std::move(h);
    panel.timestamps = std::move(timestamps);
    panel.mode = mode;
    return panel;
}

/// Builds a panel from M x T leaf observations; upper levels are aggregated.
inline SeriesPanel panel_from_bottom(Hierarchy h, const Eigen::MatrixXd& bottom, std::vector<std::string> timestamps,
                                     std::size_t test_len) {
    const SummingMatrix s(h);
    const Eigen::MatrixXd all = s.apply_columns(bottom);
    return make_panel(std::move(h), all, std::move(timestamps), test_len, IngestMode::bottom_only);
}

/// Parses a `series_id,timestamp,<value_column>` table into per-series rows
/// sharing one timestamp axis.
struct SeriesTable {
    std::vector<std::string> timestamps;
    std::map<std::string, std::vector<double>> series;
};

inline SeriesTable read_series_table(std::istream& in, const std::string& value_column, const std::string& what) {
    auto rows = io::read_rows(in);
    io::expect_header(rows, {"series_id", "timestamp", value_column}, what);
    std::map<std::string, std::vector<std::pair<std::string, double>>> by_series;
    std::vector<std::string> order;
    for (const auto& row : rows) {
        const auto where = what + ":" + std::to_string(row.line);
        if (row.fields.size() != 3) throw InputError(where + ": expected 3 fields");
        if (row.fields[0].empty()) throw InputError(where + ": empty series_id");
        if (row.fields[1].empty()) throw InputError(where + ": empty timestamp");
        if (row.fields[2].empty()) throw InputError(where + ": empty value for series '" + row.fields[0] + "'");
        auto& points = by_series[row.fields[0]];
        if (points.empty()) order.push_back(row.fields[0]);
        points.emplace_back(row.fields[1], io::parse_double(row.fields[2], where));
    }
    if (by_series.empty()) throw InputError(what + ": no observations");

    SeriesTable table;
    for (const auto& [id, points] : by_series) {
        std::vector<std::string> stamps;
        std::vector<double> values;
        for (const auto& [ts, v] : points) {
            if (!stamps.empty() && !(stamps.back() < ts))
                throw InputError(what + ": timestamps of series '" + id +
                                 "' are not strictly increasing at '" + ts + "'");
            stamps.push_back(ts);
            values.push_back(v);
        }
        if (table.timestamps.empty() && table.series.empty()) {
            table.timestamps = stamps;
        } else if (stamps != table.timestamps) {
            throw InputError(what + ": series '" + id + "' has ragged or misaligned timestamps");
        }
        table.series.emplace(id, std::move(values));
    }
    return table;
}

inline SeriesPanel ingest(std::istream& values, Hierarchy h, std::size_t test_len, IngestMode mode,
                          const std::string& what = "values") {
    auto table = read_series_table(values, "value", what);
    const auto length = static_cast<Eigen::Index>(table.timestamps.size());

    auto row_of = [&](std::size_t node) -> const std::vector<double>& {
        const auto it = table.series.find(h.id(node));
        if (it == table.series.end()) throw InputError(what + ": missing series '" + h.id(node) + "'");
        return it->second;
    };
    for (const auto& [id, _] : table.series) {
        const auto node = h.index_of(id);
        if (node == no_index) throw InputError(what + ": series '" + id + "' is not in the hierarchy");
        if (mode == IngestMode::bottom_only && !h.is_leaf(node))
            throw InputError(what + ": series '" + id + "' is not a leaf (bottom-only mode)");
    }

    if (mode == IngestMode::bottom_only) {
        Eigen::MatrixXd bottom(static_cast<Eigen::Index>(h.bottom_count()), length);
        for (std::size_t j = 0; j < h.bottom_count(); ++j) {
            const auto& row = row_of(h.bottom_indices()[j]);
            bottom.row(static_cast<Eigen::Index>(j)) = Eigen::Map<const Eigen::RowVectorXd>(row.data(), length);
        }
        return panel_from_bottom(std::move(h), bottom, std::move(table.timestamps), test_len);
    }
    Eigen::MatrixXd all(static_cast<Eigen::Index>(h.size()), length);
    for (std::size_t i = 0; i < h.size(); ++i) {
        const auto& row = row_of(i);
        all.row(static_cast<Eigen::Index>(i)) = Eigen::Map<const Eigen::RowVectorXd>(row.data(), length);
    }
    return make_panel(std::move(h), all, std::move(table.timestamps), test_len, IngestMode::all_levels);
}

inline SeriesPanel ingest(const std::filesystem::path& values_file, const std::filesystem::path& hierarchy_file,
                          std::size_t test_len, IngestMode mode) {
    auto h = read_hierarchy(hierarchy_file);
    std::ifstream in(values_file);
    if (!in) throw InputError("cannot open '" + values_file.string() + "'");
    return ingest(in, std::move(h), test_len, mode, values_file.string());
}

/// One blocked cross-validation split of the training period.
struct Fold {
    TimeRange validation;
    TimeRanges train;  // training period minus `validation`
};

struct FoldSpec {
    std::vector<Fold> folds;
    std::size_t train_len = 0;

    std::size_t k() const noexcept { return folds.size(); }
};

/// Splits [0, train_len) into k contiguous validation windows. Window sizes
/// are floor(train_len/k), with the remainder added one step each to the
/// earliest windows.
inline FoldSpec blocked_folds(std::size_t train_len, std::size_t k) {
    if (k < 2) throw ContractError("blocked_folds: need k >= 2, got " + std::to_string(k));
    if (train_len < k)
        throw ContractError("blocked_folds: training period of " + std::to_string(train_len) +
                            " steps is too short for " + std::to_string(k) + " folds");
    FoldSpec spec;
    spec.train_len = train_len;
    const auto base = train_len / k;
    const auto extra = train_len % k;
    std::size_t start = 0;
    for (std::size_t i = 0; i < k; ++i) {
        const auto len = base + (i < extra ? 1 : 0);
        Fold fold;
        fold.validation = {start, start + len};
        if (start > 0) fold.train.push_back({0, start});
        if (start + len < train_len) fold.train.push_back({start + len, train_len});
        spec.folds.push_back(std::move(fold));
        start += len;
    }
    return spec;
}

inline FoldSpec blocked_folds(const SeriesPanel& panel, std::size_t k) { return blocked_folds(panel.train_len, k); }

/// Per-series mean of |y_t - y_{t-1}| over consecutive pairs inside `ranges`.
/// Zero for constant series.
inline Eigen::VectorXd naive_scales(const Eigen::MatrixXd& values, const TimeRanges& ranges) {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(values.rows());
    std::size_t pairs = 0;
    for (const auto& r : ranges) {
        for (auto t = r.begin + 1; t < r.end; ++t) {
            out += (values.col(static_cast<Eigen::Index>(t)) - values.col(static_cast<Eigen::Index>(t - 1))).cwiseAbs();
            ++pairs;
        }
    }
    if (pairs == 0) throw ContractError("naive_scales: no consecutive pair of time steps");
    return out / static_cast<double>(pairs);
}

inline Eigen::VectorXd naive_scales(const SeriesPanel& panel) {
    return naive_scales(panel.values, {panel.train_range()});
}

/// Per-series mean of |y_t| over `ranges`.
inline Eigen::VectorXd mean_abs(const Eigen::MatrixXd& values, const TimeRanges& ranges) {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(values.rows());
    const auto count = total_size(ranges);
    if (count == 0) throw ContractError("mean_abs: empty time window");
    for (const auto& r : ranges)
        out += values.middleCols(static_cast<Eigen::Index>(r.begin), static_cast<Eigen::Index>(r.size()))
                   .cwiseAbs()
                   .rowwise()
                   .sum();
    return out / static_cast<double>(count);
}

} // namespace hts
