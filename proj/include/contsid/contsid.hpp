#pragma once

// Continuous structural intervention distance.
//
// For every ordered pair (i, j) the interventional laws P(X_j | do(X_i)) implied
// by the two graphs through their parent adjustment sets are embedded in the
// RKHS of X_j and compared, averaged over the intervention values and divided
// by the norm of the observational embedding of X_j:
//
//   no path in either graph             -> 0
//   path in exactly one graph           -> mean_n || IME_g(x^n) - mu(X_j) || / ||mu(X_j)||
//   path in both, parent sets compatible-> 0
//   path in both, incompatible          -> mean_n || IME_g2(x^n) - IME_g1(x^n) || / ||mu(X_j)||

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <exception>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include <Eigen/Dense>

#include "contsid/data.hpp"
#include "contsid/embeddings.hpp"
#include "contsid/errors.hpp"
#include "contsid/graph.hpp"
#include "contsid/kernels.hpp"

namespace contsid {

enum class PairCase {
    no_path_either,
    path_true_only,
    path_learnt_only,
    both_paths_adjustment_compatible,
    both_paths_incompatible,
};

inline std::string_view to_string(PairCase c) {
    switch (c) {
    case PairCase::no_path_either: return "no_path_either";
    case PairCase::path_true_only: return "path_true_only";
    case PairCase::path_learnt_only: return "path_learnt_only";
    case PairCase::both_paths_adjustment_compatible: return "both_paths_adjustment_compatible";
    case PairCase::both_paths_incompatible: return "both_paths_incompatible";
    }
    return "unknown";
}

inline std::optional<PairCase> pair_case_from_string(std::string_view name) {
    for (auto c : {PairCase::no_path_either, PairCase::path_true_only, PairCase::path_learnt_only,
                   PairCase::both_paths_adjustment_compatible, PairCase::both_paths_incompatible}) {
        if (to_string(c) == name) { return c; }
    }
    return std::nullopt;
}

struct PairResult {
    Node i = 0;
    Node j = 0;
    PairCase pair_case = PairCase::no_path_either;
    double distance = 0.0;
};

struct MetricConfig {
    KernelConfig kernel;
    /// Intervention values per intervened node; nodes without an entry use
    /// their observed column.
    std::map<Node, std::vector<double>> intervention_values;
    /// When false the both-paths distance is left unnormalized (one-sided
    /// distances are always normalized).
    bool normalize = true;
    /// Worker threads for pair evaluation; 0 means hardware concurrency.
    unsigned threads = 1;
    /// Optional separate rows for the outer expectation over the adjustment
    /// set; the fitting rows are used when empty.
    std::optional<Dataset> marginal_samples;
};

struct MetricReport {
    std::size_t num_nodes = 0;
    /// Off-diagonal pairs in row-major order.
    std::vector<PairResult> pairs;
    double cont_sid = 0.0;
    std::size_t shd = 0;
    std::size_t sid = 0;
    MetricConfig config;
    std::string data_sha256;

    [[nodiscard]] const PairResult &at(Node i, Node j) const {
        if (i >= num_nodes || j >= num_nodes || i == j) { throw IndexError("no pair result for the requested nodes"); }
        return pairs[i * (num_nodes - 1) + (j < i ? j : j - 1)];
    }
};

/// Case label for (i, j). The both-paths split uses only the parent sets:
/// compatible iff PA_g1(i) adjusts validly in g2 or PA_g2(i) does in g1.
inline PairCase classify_pair(Node i, Node j, const Dag &g1, const Dag &g2) {
    require_same_size(g1, g2);
    const bool path1 = has_directed_path(g1, i, j);
    const bool path2 = has_directed_path(g2, i, j);
    if (!path1 && !path2) { return PairCase::no_path_either; }
    if (path1 && !path2) { return PairCase::path_true_only; }
    if (!path1 && path2) { return PairCase::path_learnt_only; }
    if (is_valid_adjustment(g2, i, j, g1.parents(i)) || is_valid_adjustment(g1, i, j, g2.parents(i))) {
        return PairCase::both_paths_adjustment_compatible;
    }
    return PairCase::both_paths_incompatible;
}

namespace detail {

/// Runs body(k) for k in [0, count) on up to `threads` workers. The first
/// exception thrown by any worker is rethrown on the calling thread.
template<typename Body>
void parallel_for(std::size_t count, unsigned threads, Body &&body) {
    if (threads == 0) { threads = std::max(1U, std::thread::hardware_concurrency()); }
    const auto workers = static_cast<std::size_t>(std::min<std::size_t>(threads, count));
    if (workers <= 1) {
        for (std::size_t k = 0; k < count; ++k) { body(k); }
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    {
        std::vector<std::jthread> pool;
        pool.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for (std::size_t k = next++; k < count; k = next++) {
                    try {
                        body(k);
                    } catch (...) {
                        const std::lock_guard lock(failure_mutex);
                        if (!failure) { failure = std::current_exception(); }
                        next = count;
                    }
                }
            });
        }
    }
    if (failure) { std::rethrow_exception(failure); }
}

}  // namespace detail

/// Shared, read-mostly state for evaluating pair distances on one dataset:
/// target Grams and batched IME coefficients, cached per target column and
/// per conditioning column list respectively. Safe to use from several
/// threads; a cache entry may be computed twice under contention but only
/// the first insertion is kept.
class DistanceContext {
public:
    DistanceContext(const Dataset &data, MetricConfig config) : data_(data), config_(std::move(config)) {
        const std::size_t d = data_.num_columns();
        if (data_.num_samples() < 2) { throw DomainError("need at least two samples"); }
        if (config_.kernel.bandwidths.size() != d) {
            throw SizeMismatchError("kernel config has " + std::to_string(config_.kernel.bandwidths.size()) +
                                    " bandwidths for " + std::to_string(d) + " columns");
        }
        config_.kernel.validate();
        for (std::size_t c = 0; c < d; ++c) {
            const auto col = data_.column(c);
            if (col.maxCoeff() == col.minCoeff()) {
                throw DegenerateColumnError("column " + std::to_string(c) + " is constant", c);
            }
        }
        for (const auto &[node, values] : config_.intervention_values) {
            data_.check_column(node);
            if (values.empty()) { throw DomainError("intervention value list must be non-empty"); }
            for (double v : values) {
                if (!std::isfinite(v)) { throw DomainError("intervention values must be finite"); }
            }
        }
        if (config_.marginal_samples && config_.marginal_samples->num_columns() != d) {
            throw SizeMismatchError("marginal samples have a different column count");
        }
    }

    [[nodiscard]] const Dataset &data() const noexcept { return data_; }
    [[nodiscard]] const MetricConfig &config() const noexcept { return config_; }

    [[nodiscard]] std::vector<double> intervention_values(Node i) const {
        const auto it = config_.intervention_values.find(i);
        if (it != config_.intervention_values.end()) { return it->second; }
        const auto span = data_.column_span(i);
        return {span.begin(), span.end()};
    }

    struct TargetStats {
        GramMatrix gram;
        double embedding_norm;  ///< ||mu(X_j)|| = sqrt(C_j) / N
    };

    std::shared_ptr<const TargetStats> target(Node j) {
        {
            const std::lock_guard lock(mutex_);
            if (auto it = targets_.find(j); it != targets_.end()) { return it->second; }
        }
        auto gram = column_gram(data_, j, config_.kernel);
        const double norm = embedding_norm(observational_coefficients(data_.num_samples()), gram);
        auto stats = std::make_shared<const TargetStats>(TargetStats{std::move(gram), norm});
        const std::lock_guard lock(mutex_);
        return targets_.emplace(j, std::move(stats)).first->second;
    }

    /// N x M coefficients of the IME for do(X_i = v) over the intervention
    /// values of i, adjusting for `parents`.
    std::shared_ptr<const Eigen::MatrixXd> ime(Node i, const NodeSet &parents, const std::string &graph_tag = {}) {
        auto key = conditioning_columns(i, parents);
        {
            const std::lock_guard lock(mutex_);
            if (auto it = imes_.find(key); it != imes_.end()) { return it->second; }
        }
        const RegressionWeights w = fit_conditional_weights(data_, i, parents, config_.kernel, graph_tag);
        const auto values = intervention_values(i);
        const Dataset *marginal = config_.marginal_samples ? &*config_.marginal_samples : nullptr;
        auto coefficients = std::make_shared<const Eigen::MatrixXd>(
            ime_coefficient_matrix(values, data_, i, parents, w, config_.kernel, marginal));
        const std::lock_guard lock(mutex_);
        return imes_.emplace(std::move(key), std::move(coefficients)).first->second;
    }

    /// Mean over intervention values of the distance between the IME under
    /// `g` and the observational embedding of X_j, over ||mu(X_j)||.
    double one_sided(Node i, Node j, const Dag &g, const std::string &graph_tag = {}) {
        if (!has_directed_path(g, i, j)) { throw DomainError("one-sided distance needs a directed i -> j path"); }
        const auto coefficients = ime(i, g.parents(i), graph_tag);
        const auto stats = target(j);
        const double uniform = 1.0 / static_cast<double>(data_.num_samples());
        const Eigen::MatrixXd diff = coefficients->array() - uniform;
        return mean_column_norm(diff, stats->gram) / stats->embedding_norm;
    }

    /// Mean over intervention values of the distance between the IMEs under
    /// g2 and g1; divided by ||mu(X_j)|| unless normalization is off.
    double two_sided(Node i, Node j, const Dag &g1, const Dag &g2) {
        const auto a1 = ime(i, g1.parents(i), "g1");
        const auto a2 = ime(i, g2.parents(i), "g2");
        const auto stats = target(j);
        const Eigen::MatrixXd diff = *a2 - *a1;
        const double raw = mean_column_norm(diff, stats->gram);
        return config_.normalize ? raw / stats->embedding_norm : raw;
    }

private:
    static double mean_column_norm(const Eigen::MatrixXd &diff, const GramMatrix &k) {
        const Eigen::MatrixXd kd = k.entries * diff;
        const Eigen::ArrayXd sq = (diff.array() * kd.array()).colwise().sum().transpose();
        return sq.max(0.0).sqrt().mean();
    }

    const Dataset &data_;
    MetricConfig config_;
    std::mutex mutex_;
    std::map<Node, std::shared_ptr<const TargetStats>> targets_;
    std::map<std::vector<std::size_t>, std::shared_ptr<const Eigen::MatrixXd>> imes_;
};

namespace detail {

inline void require_matching_data(const Dag &g1, const Dag &g2, const Dataset &data) {
    require_same_size(g1, g2);
    if (data.num_columns() != g1.num_nodes()) {
        throw SizeMismatchError("dataset has " + std::to_string(data.num_columns()) + " columns but the graphs have " +
                                std::to_string(g1.num_nodes()) + " nodes");
    }
}

inline PairResult evaluate_pair(Node i, Node j, PairCase c, const Dag &g1, const Dag &g2, DistanceContext &ctx) {
    PairResult result{i, j, c, 0.0};
    switch (c) {
    case PairCase::no_path_either:
    case PairCase::both_paths_adjustment_compatible: break;
    case PairCase::path_true_only: result.distance = ctx.one_sided(i, j, g1, "g1"); break;
    case PairCase::path_learnt_only: result.distance = ctx.one_sided(i, j, g2, "g2"); break;
    case PairCase::both_paths_incompatible: result.distance = ctx.two_sided(i, j, g1, g2); break;
    }
    return result;
}

}  // namespace detail

inline double one_sided_distance(Node i, Node j, const Dag &g_with_path, const Dataset &data, const MetricConfig &cfg) {
    detail::require_matching_data(g_with_path, g_with_path, data);
    DistanceContext ctx(data, cfg);
    return ctx.one_sided(i, j, g_with_path);
}

inline double two_sided_distance(Node i, Node j, const Dag &g1, const Dag &g2, const Dataset &data,
                                 const MetricConfig &cfg) {
    detail::require_matching_data(g1, g2, data);
    if (!has_directed_path(g1, i, j) || !has_directed_path(g2, i, j)) {
        throw DomainError("two-sided distance needs a directed i -> j path in both graphs");
    }
    DistanceContext ctx(data, cfg);
    return ctx.two_sided(i, j, g1, g2);
}

inline PairResult pair_distance(Node i, Node j, const Dag &g1, const Dag &g2, const Dataset &data,
                                const MetricConfig &cfg) {
    detail::require_matching_data(g1, g2, data);
    const PairCase c = classify_pair(i, j, g1, g2);
    if (c == PairCase::no_path_either || c == PairCase::both_paths_adjustment_compatible) { return {i, j, c, 0.0}; }
    DistanceContext ctx(data, cfg);
    return detail::evaluate_pair(i, j, c, g1, g2, ctx);
}

/// Sum of pair distances over all ordered pairs i != j, with SHD and SID.
/// Pairs are evaluated in parallel; the sum is taken in row-major order.
inline MetricReport cont_sid(const Dag &g1, const Dag &g2, const Dataset &data, const MetricConfig &cfg) {
    detail::require_matching_data(g1, g2, data);
    const std::size_t n = g1.num_nodes();
    DistanceContext ctx(data, cfg);

    MetricReport report;
    report.num_nodes = n;
    report.config = cfg;
    report.shd = shd(g1, g2);
    report.sid = sid(g1, g2);
    for (Node i = 0; i < n; ++i) {
        for (Node j = 0; j < n; ++j) {
            if (i != j) { report.pairs.push_back({i, j, classify_pair(i, j, g1, g2), 0.0}); }
        }
    }

    // Warm the caches one task per conditioning set, then evaluate pairs.
    struct Prefetch {
        Node i;
        const Dag *g;
        std::string tag;
    };
    std::vector<Prefetch> prefetch;
    std::vector<std::vector<std::size_t>> seen;
    std::vector<std::uint8_t> targets(n, 0);
    const auto want = [&](Node i, const Dag &g, const char *tag) {
        auto key = conditioning_columns(i, g.parents(i));
        if (std::ranges::find(seen, key) == seen.end()) {
            seen.push_back(std::move(key));
            prefetch.push_back({i, &g, tag});
        }
    };
    for (const PairResult &p : report.pairs) {
        if (p.pair_case == PairCase::path_true_only || p.pair_case == PairCase::both_paths_incompatible) {
            want(p.i, g1, "g1");
        }
        if (p.pair_case == PairCase::path_learnt_only || p.pair_case == PairCase::both_paths_incompatible) {
            want(p.i, g2, "g2");
        }
        if (p.pair_case != PairCase::no_path_either && p.pair_case != PairCase::both_paths_adjustment_compatible) {
            targets[p.j] = 1;
        }
    }
    detail::parallel_for(prefetch.size() + n, cfg.threads, [&](std::size_t k) {
        if (k < prefetch.size()) {
            ctx.ime(prefetch[k].i, prefetch[k].g->parents(prefetch[k].i), prefetch[k].tag);
        } else if (targets[k - prefetch.size()] != 0) {
            ctx.target(k - prefetch.size());
        }
    });
    detail::parallel_for(report.pairs.size(), cfg.threads, [&](std::size_t k) {
        PairResult &p = report.pairs[k];
        p = detail::evaluate_pair(p.i, p.j, p.pair_case, g1, g2, ctx);
    });

    for (const PairResult &p : report.pairs) { report.cont_sid += p.distance; }
    return report;
}

}  // namespace contsid
