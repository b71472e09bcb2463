#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include <Eigen/Dense>

#include "hts/hts.hpp"

namespace hts::testing {

// A -> {B, C}, B -> {D, E}, C -> {F, G}
inline Hierarchy small_tree() {
    return Hierarchy::build({{"A", "B"}, {"A", "C"}, {"B", "D"}, {"B", "E"}, {"C", "F"}, {"C", "G"}});
}

/// Random tree with 2..max_levels levels and at most max_leaves leaves.
/// Internal nodes get 1..4 children (single-child chains included).
inline Hierarchy random_hierarchy(std::mt19937_64& rng, std::size_t max_levels = 4, std::size_t max_leaves = 50) {
    std::uniform_int_distribution<std::size_t> level_pick(2, max_levels);
    std::uniform_int_distribution<int> fanout(1, 4);
    const auto levels = level_pick(rng);
    std::vector<Edge> edges;
    std::vector<std::string> frontier{"n0"};
    std::size_t next = 1;
    for (std::size_t l = 1; l < levels; ++l) {
        std::vector<std::string> children;
        for (const auto& parent : frontier) {
            const auto remaining = frontier.size() - static_cast<std::size_t>(&parent - frontier.data()) - 1;
            auto k = static_cast<std::size_t>(fanout(rng));
            while (k > 1 && children.size() + k + remaining > max_leaves) --k;
            for (std::size_t c = 0; c < k; ++c) {
                const auto id = "n" + std::to_string(next++);
                edges.emplace_back(parent, id);
                children.push_back(id);
            }
        }
        frontier = std::move(children);
    }
    return Hierarchy::build(edges);
}

inline Eigen::VectorXd uniform_vector(std::mt19937_64& rng, Eigen::Index n, double lo, double hi) {
    std::uniform_real_distribution<double> d(lo, hi);
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = d(rng);
    return v;
}

inline Eigen::MatrixXd uniform_matrix(std::mt19937_64& rng, Eigen::Index r, Eigen::Index c, double lo, double hi) {
    std::uniform_real_distribution<double> d(lo, hi);
    Eigen::MatrixXd m(r, c);
    for (Eigen::Index j = 0; j < c; ++j)
        for (Eigen::Index i = 0; i < r; ++i) m(i, j) = d(rng);
    return m;
}

/// Root -> two regions -> four leaves each: N = 11, M = 8, three levels.
inline Hierarchy synthetic_hierarchy() {
    std::vector<Edge> edges{{"total", "r0"}, {"total", "r1"}};
    for (int r = 0; r < 2; ++r)
        for (int k = 0; k < 4; ++k)
            edges.emplace_back("r" + std::to_string(r), "s" + std::to_string(r) + std::to_string(k));
    return Hierarchy::build(edges);
}

/// Seeded task where the top-level base forecasts are informative and the
/// bottom ones are noisy: leaves are fixed shares of a common positive
/// signal, upper forecasts see the truth with small noise, bottom forecasts
/// with large noise.
struct SyntheticTask {
    SeriesPanel panel;
    ForecastSet forecasts;  // whole panel, columns 0..T-1
};

inline Eigen::MatrixXd synthetic_bottom(std::uint64_t seed, std::size_t m = 8, std::size_t length = 400) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> unit(0.0, 1.0);
    std::uniform_real_distribution<double> share(0.5, 2.0);
    Eigen::VectorXd w(static_cast<Eigen::Index>(m));
    for (auto& x : w) x = share(rng);
    Eigen::MatrixXd bottom(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(length));
    double level = 0.0;
    for (std::size_t t = 0; t < length; ++t) {
        level = 0.8 * level + unit(rng);
        const double g = 20.0 + 5.0 * std::sin(2.0 * std::numbers::pi * static_cast<double>(t) / 24.0) + 2.0 * level;
        for (std::size_t j = 0; j < m; ++j)
            bottom(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(t)) =
                w(static_cast<Eigen::Index>(j)) * g + 0.3 * unit(rng);
    }
    return bottom;
}

inline SyntheticTask synthetic_task(std::uint64_t seed, std::size_t test_len = 100, double upper_noise = 0.5,
                                    double bottom_noise = 4.0) {
    const auto h = synthetic_hierarchy();
    const auto bottom = synthetic_bottom(seed, h.bottom_count());
    std::vector<std::string> stamps;
    for (Eigen::Index t = 0; t < bottom.cols(); ++t) {
        char buf[16];
        std::snprintf(buf, sizeof(buf), "t%04d", static_cast<int>(t));
        stamps.emplace_back(buf);
    }
    SyntheticTask task;
    task.panel = panel_from_bottom(h, bottom, stamps, test_len);
    std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
    std::normal_distribution<double> unit(0.0, 1.0);
    const auto& y = task.panel.values;
    task.forecasts.window = {0, static_cast<std::size_t>(y.cols())};
    task.forecasts.values = y;
    const double scale = task.panel.global_scale;
    for (Eigen::Index t = 0; t < y.cols(); ++t)
        for (Eigen::Index i = 0; i < y.rows(); ++i) {
            const double sd = h.is_leaf(static_cast<std::size_t>(i)) ? bottom_noise : upper_noise;
            task.forecasts.values(i, t) += sd * unit(rng) / scale;
        }
    return task;
}

/// Writes the synthetic task's leaves as a values file and its tree as a
/// hierarchy file.
inline void write_synthetic_files(std::uint64_t seed, const std::filesystem::path& values,
                                  const std::filesystem::path& hierarchy) {
    const auto h = synthetic_hierarchy();
    const auto bottom = synthetic_bottom(seed, h.bottom_count());
    std::ofstream hv(hierarchy);
    hv << "# parent,child\n";
    for (const auto& [p, c] : h.edges()) hv << p << ',' << c << '\n';
    std::ofstream vv(values);
    vv << "series_id,timestamp,value\n";
    for (std::size_t j = 0; j < h.bottom_count(); ++j)
        for (Eigen::Index t = 0; t < bottom.cols(); ++t) {
            char buf[16];
            std::snprintf(buf, sizeof(buf), "t%04d", static_cast<int>(t));
            vv << h.id(h.bottom_indices()[j]) << ',' << buf << ','
               << io::format_double(bottom(static_cast<Eigen::Index>(j), t)) << '\n';
        }
}

inline std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

/// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("hts_" + name + "_" + std::to_string(::getpid()));
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

/// Overwrites every trainable parameter with uniform draws from [-a, a];
/// masked weights stay zero.
inline void randomize(Encoder& enc, std::mt19937_64& rng, double a = 1.0) {
    for (auto& layer : enc.layers) {
        layer.weights = uniform_matrix(rng, layer.weights.rows(), layer.weights.cols(), -a, a);
        if (layer.masked()) layer.weights = layer.weights.cwiseProduct(layer.mask);
        layer.bias = uniform_vector(rng, layer.bias.size(), -a, a);
    }
}

/// True when no ReLU pre-activation lies within `margin` of zero and no
/// reconciled error lies within `margin` of zero.
inline bool kink_free(const Encoder& enc, const Eigen::MatrixXd& inputs, const Eigen::MatrixXd& targets,
                      double margin = 1e-3) {
    const auto pass = forward(enc, inputs);
    for (std::size_t l = 0; l < enc.layers.size(); ++l)
        if (enc.layers[l].relu && (pass.pre[l].array().abs() < margin).any()) return false;
    const Eigen::MatrixXd pred = enc.summing.apply_columns(pass.output);
    return !((pred - targets).array().abs() < margin).any();
}

struct GradientCheck {
    double max_rel_error = 0.0;  // per parameter
    double max_abs_error = 0.0;
    double max_gradient = 0.0;
    std::size_t checked = 0;

    /// Largest deviation relative to the largest gradient component.
    double vector_rel_error() const { return max_gradient > 0.0 ? max_abs_error / max_gradient : max_abs_error; }
};

/// Compares analytic gradients with central differences for every
/// unmasked weight and every bias.
inline GradientCheck check_gradients(Encoder enc, const Eigen::MatrixXd& inputs, const Eigen::MatrixXd& targets,
                                     LossKind kind, const Eigen::VectorXd& naive, double h = 1e-5) {
    const auto g = gradients(enc, inputs, targets, kind, naive);
    // Central differences in double resolve gradients only down to about
    // eps * |loss| / h, so smaller magnitudes are compared against this floor.
    const double floor = 1e-5 * std::max(1.0, std::abs(g.loss));
    GradientCheck out;
    auto probe = [&](double& param, double analytic) {
        const double saved = param;
        param = saved + h;
        const double up = loss(reconcile_columns(enc, inputs), targets, kind, naive);
        param = saved - h;
        const double down = loss(reconcile_columns(enc, inputs), targets, kind, naive);
        param = saved;
        const double numeric = (up - down) / (2.0 * h);
        const double scale = std::max(std::abs(analytic), std::abs(numeric));
        const double rel = std::abs(analytic - numeric) / std::max(scale, floor);
        out.max_rel_error = std::max(out.max_rel_error, rel);
        out.max_abs_error = std::max(out.max_abs_error, std::abs(analytic - numeric));
        out.max_gradient = std::max(out.max_gradient, scale);
        ++out.checked;
    };
    for (std::size_t l = 0; l < enc.layers.size(); ++l) {
        auto& layer = enc.layers[l];
        for (Eigen::Index c = 0; c < layer.weights.cols(); ++c)
            for (Eigen::Index r = 0; r < layer.weights.rows(); ++r)
                if (!layer.masked() || layer.mask(r, c) != 0.0) probe(layer.weights(r, c), g.weights[l](r, c));
        for (Eigen::Index r = 0; r < layer.bias.size(); ++r) probe(layer.bias(r), g.bias[l](r));
    }
    return out;
}

} // namespace hts::testing
