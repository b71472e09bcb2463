#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <limits>
#include <map>
#include <numeric>
#include <queue>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "hts/error.hpp"
#include "hts/io.hpp"

namespace hts {

using Edge = std::pair<std::string, std::string>;  // (parent, child)

inline constexpr std::size_t no_index = std::numeric_limits<std::size_t>::max();

/// A tree of series. Nodes are indexed 0..N-1 in level-major order (root
/// first); inside a level they keep the order of first appearance in the
/// edge list. Leaves, in node order, are the M bottom series.
class Hierarchy {
public:
    static Hierarchy build(const std::vector<Edge>& edges);
    static Hierarchy singleton(const std::string& id);

    std::size_t size() const noexcept { return ids_.size(); }
    std::size_t bottom_count() const noexcept { return bottom_.size(); }
    std::size_t level_count() const noexcept { return level_sizes_.size(); }

    const std::string& id(std::size_t node) const { return ids_.at(node); }
    const std::vector<std::string>& ids() const noexcept { return ids_; }
    std::size_t index_of(const std::string& id) const {
        const auto it = index_.find(id);
        return it == index_.end() ? no_index : it->second;
    }

    /// `no_index` for the root.
    std::size_t parent(std::size_t node) const { return parent_.at(node); }
    const std::vector<std::size_t>& children(std::size_t node) const { return children_.at(node); }
    std::size_t level(std::size_t node) const { return level_.at(node); }
    bool is_leaf(std::size_t node) const { return children_.at(node).empty(); }

    /// Node indices of the leaves, in bottom-column order.
    const std::vector<std::size_t>& bottom_indices() const noexcept { return bottom_; }
    /// Column of `node` among the leaves, or `no_index` for internal nodes.
    std::size_t bottom_position(std::size_t node) const { return bottom_pos_.at(node); }

    /// Number of series on each level, top level first.
    const std::vector<std::size_t>& level_sizes() const noexcept { return level_sizes_; }
    /// Nodes on `level`, which form the contiguous range [first, first+count).
    std::pair<std::size_t, std::size_t> level_range(std::size_t level) const {
        const auto first = std::accumulate(level_sizes_.begin(), level_sizes_.begin() + level, std::size_t{0});
        return {first, first + level_sizes_.at(level)};
    }

    /// Edges in node order; rebuilding from them reproduces this hierarchy.
    std::vector<Edge> edges() const {
        std::vector<Edge> out;
        for (std::size_t i = 1; i < size(); ++i) out.emplace_back(ids_[parent_[i]], ids_[i]);
        return out;
    }

    /// Non-fatal findings from construction (single-child chains).
    const std::vector<std::string>& warnings() const noexcept { return warnings_; }

private:
    std::vector<std::string> ids_;
    std::map<std::string, std::size_t> index_;
    std::vector<std::size_t> parent_;
    std::vector<std::vector<std::size_t>> children_;
    std::vector<std::size_t> level_;
    std::vector<std::size_t> bottom_;
    std::vector<std::size_t> bottom_pos_;
    std::vector<std::size_t> level_sizes_;
    std::vector<std::string> warnings_;

    void finish();
};

inline Hierarchy Hierarchy::singleton(const std::string& id) {
    if (id.empty()) throw InputError("hierarchy: empty node id");
    Hierarchy h;
    h.ids_ = {id};
    h.parent_ = {no_index};
    h.finish();
    return h;
}

inline Hierarchy Hierarchy::build(const std::vector<Edge>& edges) {
    if (edges.empty()) throw InputError("hierarchy: edge list is empty");

    // Raw ids by order of first appearance.
    std::vector<std::string> raw;
    std::map<std::string, std::size_t> raw_index;
    auto intern = [&](const std::string& id) {
        if (id.empty()) throw InputError("hierarchy: empty node id");
        auto [it, inserted] = raw_index.emplace(id, raw.size());
        if (inserted) raw.push_back(id);
        return it->second;
    };

    std::set<std::pair<std::size_t, std::size_t>> seen;
    std::vector<std::size_t> raw_parent;
    for (const auto& [p, c] : edges) {
        const auto pi = intern(p);
        const auto ci = intern(c);
        raw_parent.resize(raw.size(), no_index);
        if (pi == ci) throw InputError("hierarchy: cycle detected at '" + p + "'");
        if (!seen.emplace(pi, ci).second)
            throw InputError("hierarchy: duplicate edge '" + p + "," + c + "'");
        if (raw_parent[ci] != no_index)
            throw InputError("hierarchy: node '" + c + "' has more than one parent ('" + raw[raw_parent[ci]] +
                             "', '" + p + "')");
        raw_parent[ci] = pi;
    }

    std::vector<std::size_t> roots;
    for (std::size_t i = 0; i < raw.size(); ++i)
        if (raw_parent[i] == no_index) roots.push_back(i);
    if (roots.empty()) throw InputError("hierarchy: cycle detected (no root)");
    if (roots.size() > 1) {
        std::string names;
        for (auto r : roots) names += (names.empty() ? "'" : ", '") + raw[r] + "'";
        throw InputError("hierarchy: multiple roots " + names +
                         " (nodes referenced only as parents must be the single root)");
    }

    std::vector<std::vector<std::size_t>> raw_children(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i)
        if (raw_parent[i] != no_index) raw_children[raw_parent[i]].push_back(i);

    std::vector<std::size_t> raw_level(raw.size(), no_index);
    std::queue<std::size_t> frontier;
    raw_level[roots.front()] = 0;
    frontier.push(roots.front());
    std::size_t reached = 0;
    while (!frontier.empty()) {
        const auto n = frontier.front();
        frontier.pop();
        ++reached;
        for (auto c : raw_children[n]) {
            raw_level[c] = raw_level[n] + 1;
            frontier.push(c);
        }
    }
    if (reached != raw.size()) {
        for (std::size_t i = 0; i < raw.size(); ++i)
            if (raw_level[i] == no_index) throw InputError("hierarchy: cycle detected through '" + raw[i] + "'");
    }

    std::vector<std::size_t> order(raw.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return raw_level[a] < raw_level[b]; });
    std::vector<std::size_t> new_index(raw.size());
    for (std::size_t k = 0; k < order.size(); ++k) new_index[order[k]] = k;

    Hierarchy h;
    h.ids_.resize(raw.size());
    h.parent_.resize(raw.size());
    for (std::size_t k = 0; k < order.size(); ++k) {
        const auto r = order[k];
        h.ids_[k] = raw[r];
        h.parent_[k] = raw_parent[r] == no_index ? no_index : new_index[raw_parent[r]];
    }
    h.finish();
    return h;
}

inline void Hierarchy::finish() {
    const auto n = ids_.size();
    children_.assign(n, {});
    level_.assign(n, 0);
    index_.clear();
    for (std::size_t i = 0; i < n; ++i) {
        index_.emplace(ids_[i], i);
        if (parent_[i] != no_index) {
            children_[parent_[i]].push_back(i);
            level_[i] = level_[parent_[i]] + 1;
        }
    }
    bottom_.clear();
    bottom_pos_.assign(n, no_index);
    level_sizes_.clear();
    warnings_.clear();
    for (std::size_t i = 0; i < n; ++i) {
        if (children_[i].empty()) {
            bottom_pos_[i] = bottom_.size();
            bottom_.push_back(i);
        } else if (children_[i].size() == 1) {
            warnings_.push_back("node '" + ids_[i] + "' has a single child '" + ids_[children_[i].front()] + "'");
        }
        if (level_[i] >= level_sizes_.size()) level_sizes_.resize(level_[i] + 1, 0);
        ++level_sizes_[level_[i]];
    }
}

/// Reads `parent_id,child_id` lines; `#` starts a comment line.
inline Hierarchy read_hierarchy(const std::filesystem::path& path) {
    auto rows = io::read_rows(path);
    std::vector<Edge> edges;
    for (auto& row : rows) {
        if (row.fields.size() != 2)
            throw InputError(path.string() + ":" + std::to_string(row.line) + ": expected 'parent_id,child_id'");
        edges.emplace_back(std::move(row.fields[0]), std::move(row.fields[1]));
    }
    return Hierarchy::build(edges);
}

inline std::string hierarchy_text(const Hierarchy& h) {
    std::string out;
    for (const auto& [p, c] : h.edges()) out += p + "," + c + "\n";
    return out;
}

/// Path root..parent of `node`, excluding the node itself.
inline std::vector<std::size_t> ancestors(const Hierarchy& h, std::size_t node) {
    if (node >= h.size()) throw ContractError("ancestors: node index " + std::to_string(node) + " out of range");
    std::vector<std::size_t> path;
    for (auto p = h.parent(node); p != no_index; p = h.parent(p)) path.push_back(p);
    std::reverse(path.begin(), path.end());
    return path;
}

/// The N x M summing matrix. Besides the dense 0/1 entries it applies
/// itself by walking the tree, so each parent is the left-to-right sum of
/// its children; `is_coherent` checks the same sums and therefore holds
/// with zero tolerance on every output of `apply`.
class SummingMatrix {
public:
    explicit SummingMatrix(const Hierarchy& h)
        : entries_(Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(h.size()),
                                         static_cast<Eigen::Index>(h.bottom_count()))),
          children_(h.size()),
          bottom_pos_(h.size()) {
        for (std::size_t j = 0; j < h.bottom_count(); ++j) {
            const auto leaf = h.bottom_indices()[j];
            entries_(static_cast<Eigen::Index>(leaf), static_cast<Eigen::Index>(j)) = 1.0;
            for (auto a : ancestors(h, leaf))
                entries_(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(j)) = 1.0;
        }
        for (std::size_t i = 0; i < h.size(); ++i) {
            children_[i] = h.children(i);
            bottom_pos_[i] = h.bottom_position(i);
        }
    }

    const Eigen::MatrixXd& dense() const noexcept { return entries_; }
    Eigen::Index rows() const noexcept { return entries_.rows(); }
    Eigen::Index cols() const noexcept { return entries_.cols(); }

    /// S * bottom for one M-vector.
    Eigen::VectorXd apply(const Eigen::VectorXd& bottom) const {
        if (bottom.size() != cols())
            throw ContractError("summing matrix: expected " + std::to_string(cols()) + " bottom values, got " +
                                std::to_string(bottom.size()));
        Eigen::VectorXd out(rows());
        for (auto i = static_cast<std::ptrdiff_t>(children_.size()) - 1; i >= 0; --i) {
            const auto node = static_cast<std::size_t>(i);
            if (bottom_pos_[node] != no_index) {
                out(i) = bottom(static_cast<Eigen::Index>(bottom_pos_[node]));
            } else {
                double sum = 0.0;
                for (auto c : children_[node]) sum += out(static_cast<Eigen::Index>(c));
                out(i) = sum;
            }
        }
        return out;
    }

    /// Column-wise S * bottom for an M x T matrix.
    Eigen::MatrixXd apply_columns(const Eigen::MatrixXd& bottom) const {
        if (bottom.rows() != cols())
            throw ContractError("summing matrix: expected " + std::to_string(cols()) + " bottom rows, got " +
                                std::to_string(bottom.rows()));
        Eigen::MatrixXd out(rows(), bottom.cols());
        for (Eigen::Index t = 0; t < bottom.cols(); ++t) out.col(t) = apply(Eigen::VectorXd(bottom.col(t)));
        return out;
    }

private:
    Eigen::MatrixXd entries_;
    std::vector<std::vector<std::size_t>> children_;
    std::vector<std::size_t> bottom_pos_;
};

inline SummingMatrix summing_matrix(const Hierarchy& h) { return SummingMatrix(h); }

/// True iff every internal node matches the sum of its children within
/// `tol * max(1, |y_i|)`.
inline bool is_coherent(const Hierarchy& h, const Eigen::Ref<const Eigen::VectorXd>& y, double tol) {
    if (static_cast<std::size_t>(y.size()) != h.size())
        throw ContractError("is_coherent: expected " + std::to_string(h.size()) + " values, got " +
                            std::to_string(y.size()));
    for (std::size_t i = 0; i < h.size(); ++i) {
        if (h.is_leaf(i)) continue;
        double sum = 0.0;
        for (auto c : h.children(i)) sum += y(static_cast<Eigen::Index>(c));
        const double yi = y(static_cast<Eigen::Index>(i));
        if (!(std::abs(yi - sum) <= tol * std::max(1.0, std::abs(yi)))) return false;
    }
    return true;
}

} // namespace hts
