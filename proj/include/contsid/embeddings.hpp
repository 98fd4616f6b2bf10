#pragma once

// Conditional mean embeddings by kernel ridge regression, intervention mean
// embeddings (IME) obtained by averaging the conditional embedding over the
// adjustment-set marginal, and RKHS distances between weighted embeddings.
//
// Every embedding here is a weighted sum sum_n alpha[n] k(x_j^(n), .) over
// the training samples of some target column j, so it is represented by its
// coefficient vector alpha alone.

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "contsid/data.hpp"
#include "contsid/errors.hpp"
#include "contsid/graph.hpp"
#include "contsid/kernels.hpp"

namespace contsid {

/// W = (K + N lambda I)^-1, held as a Cholesky factorization.
class RegressionWeights {
public:
    RegressionWeights(Eigen::LLT<Eigen::MatrixXd> factor, double lambda, double jitter,
                      std::vector<std::size_t> conditioning_columns, std::string graph_tag)
        : factor_(std::move(factor)), lambda_(lambda), jitter_(jitter),
          conditioning_columns_(std::move(conditioning_columns)), graph_tag_(std::move(graph_tag)) {}

    [[nodiscard]] Eigen::Index size() const { return factor_.rows(); }
    [[nodiscard]] double lambda() const noexcept { return lambda_; }
    /// Diagonal jitter added on the retry path (0 when the first attempt succeeded).
    [[nodiscard]] double jitter() const noexcept { return jitter_; }
    [[nodiscard]] const std::vector<std::size_t> &conditioning_columns() const noexcept {
        return conditioning_columns_;
    }
    [[nodiscard]] const std::string &graph_tag() const noexcept { return graph_tag_; }

    /// W * rhs.
    [[nodiscard]] Eigen::MatrixXd apply(const Eigen::MatrixXd &rhs) const {
        if (rhs.rows() != size()) { throw SizeMismatchError("right-hand side has the wrong number of rows"); }
        return factor_.solve(rhs);
    }

    /// Dense W, for tests and diagnostics only.
    [[nodiscard]] Eigen::MatrixXd dense() const {
        return factor_.solve(Eigen::MatrixXd::Identity(size(), size()));
    }

private:
    Eigen::LLT<Eigen::MatrixXd> factor_;
    double lambda_;
    double jitter_;
    std::vector<std::size_t> conditioning_columns_;
    std::string graph_tag_;
};

/// Factorizes K + N lambda I. A failed factorization is retried once with
/// 1e-8 * N extra on the diagonal before FactorizationError is thrown.
inline RegressionWeights fit_regression_weights(const GramMatrix &k, double lambda,
                                                std::vector<std::size_t> conditioning_columns = {},
                                                std::string graph_tag = {}) {
    const Eigen::Index n = k.entries.rows();
    if (n < 1 || k.entries.cols() != n) { throw SizeMismatchError("regression Gram must be square and non-empty"); }
    if (!k.symmetric) { throw DomainError("regression Gram must be a self-Gram"); }
    if (!(lambda > 0.0) || !std::isfinite(lambda)) { throw DomainError("lambda must be positive and finite"); }
    if (!k.entries.allFinite()) { throw FactorizationError("Gram matrix has non-finite entries"); }

    const double ridge = static_cast<double>(n) * lambda;
    Eigen::MatrixXd system = k.entries;
    system.diagonal().array() += ridge;
    Eigen::LLT<Eigen::MatrixXd> factor(system);
    double jitter = 0.0;
    if (factor.info() != Eigen::Success) {
        jitter = 1e-8 * static_cast<double>(n);
        system.diagonal().array() += jitter;
        factor.compute(system);
        if (factor.info() != Eigen::Success) {
            throw FactorizationError("K + N*lambda*I is not numerically positive definite (lambda = " +
                                     std::to_string(lambda) + ")");
        }
    }
    return {std::move(factor), lambda, jitter, std::move(conditioning_columns), std::move(graph_tag)};
}

/// Intervened column followed by the adjustment set.
inline std::vector<std::size_t> conditioning_columns(Node i, const NodeSet &adjustment) {
    std::vector<std::size_t> cols{i};
    cols.insert(cols.end(), adjustment.begin(), adjustment.end());
    return cols;
}

/// Fits the conditional embedding of any target given (X_i, Z = adjustment)
/// on the rows of `data`.
inline RegressionWeights fit_conditional_weights(const Dataset &data, Node i, const NodeSet &adjustment,
                                                 const KernelConfig &config, std::string graph_tag = {}) {
    auto cols = conditioning_columns(i, adjustment);
    const GramMatrix k = self_gram(data.select_columns(cols), config, cols);
    return fit_regression_weights(k, config.regularization, std::move(cols), std::move(graph_tag));
}

struct EmbeddingCoefficients {
    Eigen::VectorXd alpha;
    /// Target column the coefficients weight; unset when the coefficients
    /// do not depend on the target (observational and IME weights).
    std::optional<std::size_t> anchor_column;
};

/// Batched IME weights: column m holds the coefficients of the embedding of
/// P(X_j | do(X_i = x_hats[m])) for every target j.
///
/// alpha = (1/M) W v,  v[n] = sum_m k_i(x_i^(n), x_hat) k_Z(z^(n), z~^(m)),
///
/// where z~^(1..M) are the marginal samples used for the outer expectation
/// over Z (the training rows themselves unless `marginal` is given).
inline Eigen::MatrixXd ime_coefficient_matrix(std::span<const double> x_hats, const Dataset &data, Node i,
                                              const NodeSet &adjustment, const RegressionWeights &w,
                                              const KernelConfig &config, const Dataset *marginal = nullptr) {
    const auto cols = conditioning_columns(i, adjustment);
    if (w.conditioning_columns() != cols) {
        throw ColumnMismatchError("regression weights were fitted on different conditioning columns");
    }
    if (w.size() != static_cast<Eigen::Index>(data.num_samples())) {
        throw ColumnMismatchError("regression weights were fitted on a different sample set");
    }
    for (double x : x_hats) {
        if (!std::isfinite(x)) { throw DomainError("intervention values must be finite"); }
    }
    const Eigen::Index n = w.size();
    const Dataset &outer = marginal != nullptr ? *marginal : data;
    if (outer.num_columns() != data.num_columns() || outer.num_samples() == 0) {
        throw ColumnMismatchError("marginal sample set does not match the dataset columns");
    }

    // Product kernel: the X_i factor depends only on x_hat, the Z factor only
    // on the marginal samples, so the sum over m collapses to a row mean.
    Eigen::VectorXd z_mean = Eigen::VectorXd::Ones(n);
    if (!adjustment.empty()) {
        const std::vector<std::size_t> zcols(adjustment.begin(), adjustment.end());
        const GramMatrix kz = gram(data.select_columns(zcols), outer.select_columns(zcols), config, zcols);
        z_mean = kz.entries.rowwise().mean();
    }

    const std::size_t icol[] = {i};
    Eigen::MatrixXd hats(static_cast<Eigen::Index>(x_hats.size()), 1);
    for (std::size_t m = 0; m < x_hats.size(); ++m) { hats(static_cast<Eigen::Index>(m), 0) = x_hats[m]; }
    Eigen::MatrixXd v = gram(data.select_columns(icol), hats, config, icol).entries;
    v.array().colwise() *= z_mean.array();
    return w.apply(v);
}

inline EmbeddingCoefficients ime_coefficients(double x_hat, const Dataset &data, Node i, const NodeSet &adjustment,
                                              const RegressionWeights &w, const KernelConfig &config,
                                              const Dataset *marginal = nullptr) {
    const double hats[] = {x_hat};
    return {ime_coefficient_matrix(hats, data, i, adjustment, w, config, marginal).col(0), std::nullopt};
}

/// Coefficients of the fitted conditional embedding at each query point
/// (one query per row, columns as in w.conditioning_columns()): W k(train, query).
inline Eigen::MatrixXd conditional_coefficient_matrix(const Eigen::MatrixXd &train_points,
                                                      const Eigen::MatrixXd &query_points,
                                                      const RegressionWeights &w, const KernelConfig &config) {
    const auto &cols = w.conditioning_columns();
    return w.apply(gram(train_points, query_points, config, cols).entries);
}

/// Empirical mean embedding: uniform weights 1/N.
inline EmbeddingCoefficients observational_coefficients(std::size_t n) {
    if (n == 0) { throw DomainError("observational embedding needs at least one sample"); }
    return {Eigen::VectorXd::Constant(static_cast<Eigen::Index>(n), 1.0 / static_cast<double>(n)), std::nullopt};
}

namespace detail {

inline void require_compatible(const EmbeddingCoefficients &a, const EmbeddingCoefficients &b) {
    if (a.anchor_column && b.anchor_column && *a.anchor_column != *b.anchor_column) {
        throw SizeMismatchError("embeddings are anchored on different columns");
    }
}

inline double clamped_sqrt(double radicand) { return std::sqrt(radicand > 0.0 ? radicand : 0.0); }

}  // namespace detail

/// || sum_n a_n k(x_n, .) - sum_n b_n k(x_n, .) || over a shared sample set
/// with self-Gram `k_j`.
inline double rkhs_distance(const EmbeddingCoefficients &a, const EmbeddingCoefficients &b, const GramMatrix &k_j) {
    detail::require_compatible(a, b);
    const Eigen::Index n = k_j.entries.rows();
    if (a.alpha.size() != n || b.alpha.size() != n || k_j.entries.cols() != n) {
        throw SizeMismatchError("coefficient vectors and Gram matrix sizes differ");
    }
    const Eigen::VectorXd diff = a.alpha - b.alpha;
    return detail::clamped_sqrt(diff.dot(k_j.entries * diff));
}

/// Distance between embeddings anchored on two different sample sets:
/// sqrt(a'K_aa a + b'K_bb b - 2 a'K_ab b).
inline double rkhs_distance(const EmbeddingCoefficients &a, const GramMatrix &k_aa, const EmbeddingCoefficients &b,
                            const GramMatrix &k_bb, const GramMatrix &k_ab) {
    if (a.alpha.size() != k_aa.entries.rows() || b.alpha.size() != k_bb.entries.rows() ||
        k_ab.entries.rows() != a.alpha.size() || k_ab.entries.cols() != b.alpha.size()) {
        throw SizeMismatchError("coefficient vectors and Gram matrix sizes differ");
    }
    const double radicand = a.alpha.dot(k_aa.entries * a.alpha) + b.alpha.dot(k_bb.entries * b.alpha) -
                            2.0 * a.alpha.dot(k_ab.entries * b.alpha);
    return detail::clamped_sqrt(radicand);
}

inline double embedding_norm(const EmbeddingCoefficients &a, const GramMatrix &k_j) {
    const Eigen::Index n = k_j.entries.rows();
    if (a.alpha.size() != n || k_j.entries.cols() != n) {
        throw SizeMismatchError("coefficient vector and Gram matrix sizes differ");
    }
    return detail::clamped_sqrt(a.alpha.dot(k_j.entries * a.alpha));
}

}  // namespace contsid
