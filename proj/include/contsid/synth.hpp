#pragma once

// Synthetic ground truth: random DAGs, linear SEMs and their observational
// and interventional samples.
//
// Random streams. Every draw comes from a std::mt19937_64 seeded through
// std::seed_seq{seed_lo, seed_hi, stream, index}; both are fully specified
// by the standard, and the variate transforms below are written out rather
// than taken from <random> distributions (whose algorithms are
// implementation-defined). Streams:
//   kGraphStream        : permutation and edge coin flips of erdos_renyi_dag
//   kCoefficientStream  : edge weights of random_linear_scm
//   kNoiseStream        : one child stream per node (index = node)
//   kSplitStream        : row shuffles (hold-out splits)
// so a dataset is reproducible across platforms given (seed, N).

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "contsid/data.hpp"
#include "contsid/errors.hpp"
#include "contsid/graph.hpp"

namespace contsid {

enum class RandomStream : std::uint32_t {
    kGraphStream = 1,
    kCoefficientStream = 2,
    kNoiseStream = 3,
    kSplitStream = 4,
};

class Rng {
public:
    Rng(std::uint64_t seed, RandomStream stream, std::uint64_t index = 0) {
        std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffU), static_cast<std::uint32_t>(seed >> 32U),
                          static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(index & 0xffffffffU),
                          static_cast<std::uint32_t>(index >> 32U)};
        engine_.seed(seq);
    }

    /// Uniform on [0, 1) with 53 random bits.
    double uniform01() { return static_cast<double>(engine_() >> 11U) * 0x1.0p-53; }

    double uniform(double low, double high) { return low + (high - low) * uniform01(); }

    /// Uniform integer in [0, bound) by rejection.
    std::uint64_t below(std::uint64_t bound) {
        if (bound == 0) { throw DomainError("empty integer range"); }
        const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                    std::numeric_limits<std::uint64_t>::max() % bound;
        std::uint64_t x = engine_();
        while (x >= limit) { x = engine_(); }
        return x % bound;
    }

    /// Standard normal by Box-Muller.
    double standard_normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = 1.0 - uniform01();  // (0, 1]
        const double u2 = uniform01();
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * std::numbers::pi * u2;
        spare_ = radius * std::sin(angle);
        has_spare_ = true;
        return radius * std::cos(angle);
    }

    double standard_exponential() { return -std::log1p(-uniform01()); }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

struct NoiseSpec {
    enum class Family { gaussian, exponential, shifted_exponential };

    Family family = Family::gaussian;
    double mean = 0.0;   ///< gaussian only
    double scale = 1.0;  ///< standard deviation (gaussian) or exponential scale

    static NoiseSpec gaussian(double mean, double std_dev) { return {Family::gaussian, mean, std_dev}; }
    static NoiseSpec exponential(double scale) { return {Family::exponential, 0.0, scale}; }
    /// Exponential minus its mean, so the noise is centred.
    static NoiseSpec shifted_exponential(double scale) { return {Family::shifted_exponential, 0.0, scale}; }

    void validate() const {
        if (!(scale > 0.0) || !std::isfinite(scale) || !std::isfinite(mean)) {
            throw DomainError("noise scale must be positive and finite");
        }
    }

    double draw(Rng &rng) const {
        switch (family) {
        case Family::gaussian: return mean + scale * rng.standard_normal();
        case Family::exponential: return scale * rng.standard_exponential();
        case Family::shifted_exponential: return scale * (rng.standard_exponential() - 1.0);
        }
        return 0.0;
    }

    [[nodiscard]] double expected_value() const {
        switch (family) {
        case Family::gaussian: return mean;
        case Family::exponential: return scale;
        case Family::shifted_exponential: return 0.0;
        }
        return 0.0;
    }

    [[nodiscard]] double variance() const { return scale * scale; }

    friend bool operator==(const NoiseSpec &, const NoiseSpec &) = default;
};

inline std::string to_string(NoiseSpec::Family family) {
    switch (family) {
    case NoiseSpec::Family::gaussian: return "gaussian";
    case NoiseSpec::Family::exponential: return "exponential";
    case NoiseSpec::Family::shifted_exponential: return "shifted_exponential";
    }
    return "unknown";
}

/// Linear structural equation model X_d = sum_{p in PA_d} w_{p,d} X_p + eps_d.
class LinearScm {
public:
    LinearScm(Dag dag, std::map<Edge, double> coefficients, std::vector<NoiseSpec> noise)
        : dag_(std::move(dag)), coefficients_(std::move(coefficients)), noise_(std::move(noise)) {
        if (noise_.size() != dag_.num_nodes()) {
            throw SizeMismatchError("need one noise spec per node");
        }
        for (const auto &spec : noise_) { spec.validate(); }
        const auto edges = dag_.edges();
        if (edges.size() != coefficients_.size()) {
            throw DomainError("coefficients must be keyed exactly by the DAG's edges");
        }
        for (const Edge &e : edges) {
            const auto it = coefficients_.find(e);
            if (it == coefficients_.end()) { throw DomainError("missing coefficient for an edge"); }
            if (!std::isfinite(it->second)) { throw DomainError("coefficients must be finite"); }
        }
    }

    [[nodiscard]] const Dag &dag() const noexcept { return dag_; }
    [[nodiscard]] const std::map<Edge, double> &coefficients() const noexcept { return coefficients_; }
    [[nodiscard]] const std::vector<NoiseSpec> &noise() const noexcept { return noise_; }
    [[nodiscard]] std::size_t num_nodes() const noexcept { return dag_.num_nodes(); }

    [[nodiscard]] double weight(Node from, Node to) const {
        const auto it = coefficients_.find({from, to});
        return it == coefficients_.end() ? 0.0 : it->second;
    }

    /// Dense D x D weight matrix, entry (p, c) = w_{p,c}.
    [[nodiscard]] Eigen::MatrixXd weight_matrix() const {
        const auto n = static_cast<Eigen::Index>(num_nodes());
        Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n, n);
        for (const auto &[e, w] : coefficients_) {
            out(static_cast<Eigen::Index>(e.first), static_cast<Eigen::Index>(e.second)) = w;
        }
        return out;
    }

private:
    Dag dag_;
    std::map<Edge, double> coefficients_;
    std::vector<NoiseSpec> noise_;
};

/// Random DAG: shuffle the nodes, then add pi(a) -> pi(b) for every a < b
/// with probability `edge_prob`.
inline Dag erdos_renyi_dag(std::size_t p, double edge_prob, std::uint64_t seed) {
    if (p < 1) { throw DomainError("need at least one node"); }
    if (!(edge_prob >= 0.0 && edge_prob <= 1.0)) { throw DomainError("edge probability must lie in [0, 1]"); }
    Rng rng(seed, RandomStream::kGraphStream);
    std::vector<Node> order(p);
    for (Node v = 0; v < p; ++v) { order[v] = v; }
    for (std::size_t k = p - 1; k > 0; --k) { std::swap(order[k], order[rng.below(k + 1)]); }
    std::vector<Edge> edges;
    for (std::size_t a = 0; a < p; ++a) {
        for (std::size_t b = a + 1; b < p; ++b) {
            if (rng.uniform01() < edge_prob) { edges.emplace_back(order[a], order[b]); }
        }
    }
    return Dag(p, edges);
}

/// Edge weights i.i.d. uniform on [low, high), drawn in row-major edge order;
/// the same noise spec on every node.
inline LinearScm random_linear_scm(const Dag &dag, double coeff_low, double coeff_high, const NoiseSpec &noise,
                                   std::uint64_t seed) {
    if (!(coeff_low < coeff_high)) { throw DomainError("coefficient interval must be non-empty"); }
    Rng rng(seed, RandomStream::kCoefficientStream);
    std::map<Edge, double> coefficients;
    for (const Edge &e : dag.edges()) { coefficients[e] = rng.uniform(coeff_low, coeff_high); }
    return {dag, std::move(coefficients), std::vector<NoiseSpec>(dag.num_nodes(), noise)};
}

namespace detail {

inline Dataset ancestral_sample(const LinearScm &scm, std::size_t n, std::uint64_t seed,
                                std::optional<std::pair<Node, double>> clamp) {
    if (n < 1) { throw DomainError("need at least one sample"); }
    const auto rows = static_cast<Eigen::Index>(n);
    Eigen::MatrixXd values(rows, static_cast<Eigen::Index>(scm.num_nodes()));
    for (Node d : scm.dag().topological_order()) {
        const auto col = static_cast<Eigen::Index>(d);
        if (clamp && clamp->first == d) {
            values.col(col).setConstant(clamp->second);
            continue;
        }
        Rng rng(seed, RandomStream::kNoiseStream, d);
        const NoiseSpec &spec = scm.noise()[d];
        for (Eigen::Index r = 0; r < rows; ++r) { values(r, col) = spec.draw(rng); }
        for (Node p : scm.dag().parent_list(d)) {
            values.col(col) += scm.weight(p, d) * values.col(static_cast<Eigen::Index>(p));
        }
    }
    return Dataset(std::move(values));
}

}  // namespace detail

inline Dataset sample_observational(const LinearScm &scm, std::size_t n, std::uint64_t seed) {
    return detail::ancestral_sample(scm, n, seed, std::nullopt);
}

/// Samples under do(X_i = value): X_i is clamped and its incoming edges ignored.
inline Dataset sample_interventional(const LinearScm &scm, Node i, double value, std::size_t n, std::uint64_t seed) {
    scm.dag().check_node(i);
    if (!std::isfinite(value)) { throw DomainError("intervention value must be finite"); }
    return detail::ancestral_sample(scm, n, seed, std::pair{i, value});
}

struct IntroExample {
    Dag g1;  ///< V1 -> V3, V2 -> V3 (true graph)
    Dag g2;  ///< V1 -> V3 only
    Dag g3;  ///< V2 -> V3 only
    LinearScm scm;
};

/// Three-node example: V1, V2 ~ N(0, 1), V3 = 10 V1 + V2 + N(0, 1).
/// Nodes are 0-indexed, so V1, V2, V3 are 0, 1, 2.
inline IntroExample intro_example() {
    Dag g1 = build_dag(3, {{0, 2}, {1, 2}});
    Dag g2 = build_dag(3, {{0, 2}});
    Dag g3 = build_dag(3, {{1, 2}});
    LinearScm scm(g1, {{{0, 2}, 10.0}, {{1, 2}, 1.0}}, std::vector<NoiseSpec>(3, NoiseSpec::gaussian(0.0, 1.0)));
    return {std::move(g1), std::move(g2), std::move(g3), std::move(scm)};
}

}  // namespace contsid
