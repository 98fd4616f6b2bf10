#pragma once

// Independent ground truth for linear SEMs: exact first and second moments,
// interventional and adjustment-formula Gaussians, the closed-form RBF MMD
// between univariate Gaussians, and the plain V-statistic MMD on samples.

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "contsid/errors.hpp"
#include "contsid/graph.hpp"
#include "contsid/synth.hpp"

namespace contsid {

struct GaussianLaw {
    double mean = 0.0;
    double variance = 0.0;
};

/// Mean vector and covariance of all nodes of a linear SEM, optionally under
/// do(X_i = value). Valid for any noise family (only moments are used).
struct ScmMoments {
    Eigen::VectorXd mean;
    Eigen::MatrixXd covariance;
};

inline ScmMoments scm_moments(const LinearScm &scm, std::optional<std::pair<Node, double>> clamp = std::nullopt) {
    const auto n = static_cast<Eigen::Index>(scm.num_nodes());
    // X = B^T X + eps  =>  X = (I - B^T)^-1 eps, with B(p, c) = w_{p,c}.
    Eigen::MatrixXd bt = scm.weight_matrix().transpose();
    Eigen::VectorXd noise_mean(n);
    Eigen::VectorXd noise_var(n);
    for (Eigen::Index d = 0; d < n; ++d) {
        const auto &spec = scm.noise()[static_cast<std::size_t>(d)];
        noise_mean[d] = spec.expected_value();
        noise_var[d] = spec.variance();
    }
    if (clamp) {
        scm.dag().check_node(clamp->first);
        const auto i = static_cast<Eigen::Index>(clamp->first);
        bt.row(i).setZero();
        noise_mean[i] = clamp->second;
        noise_var[i] = 0.0;
    }
    const Eigen::MatrixXd mix = (Eigen::MatrixXd::Identity(n, n) - bt).inverse();
    return {mix * noise_mean, mix * noise_var.asDiagonal() * mix.transpose()};
}

namespace detail {

inline void require_gaussian(const LinearScm &scm) {
    for (const auto &spec : scm.noise()) {
        if (spec.family != NoiseSpec::Family::gaussian) {
            throw NonGaussianError("closed-form laws need Gaussian noise on every node");
        }
    }
}

}  // namespace detail

/// Marginal law of X_j under do(X_i = x_hat) in an all-Gaussian linear SEM.
inline GaussianLaw interventional_gaussian(const LinearScm &scm, Node i, double x_hat, Node j) {
    detail::require_gaussian(scm);
    scm.dag().check_node(j);
    if (i == j) { throw DomainError("intervened and target node must differ"); }
    const ScmMoments m = scm_moments(scm, std::pair{i, x_hat});
    const auto jj = static_cast<Eigen::Index>(j);
    return {m.mean[jj], m.covariance(jj, jj)};
}

/// Law obtained from the observational joint by the adjustment formula
/// integral p(x_j | x_hat, z) p(z) dz for the set z. Equals the true
/// interventional law exactly when z is a valid adjustment set.
inline GaussianLaw adjusted_gaussian(const LinearScm &scm, Node i, double x_hat, Node j, const NodeSet &z) {
    detail::require_gaussian(scm);
    scm.dag().check_node(i);
    scm.dag().check_node(j);
    if (i == j || z.contains(i) || z.contains(j)) { throw OverlapError("adjustment set overlaps {i, j}"); }
    const ScmMoments m = scm_moments(scm);
    std::vector<Eigen::Index> s{static_cast<Eigen::Index>(i)};
    for (Node v : z) { s.push_back(static_cast<Eigen::Index>(v)); }
    const auto k = static_cast<Eigen::Index>(s.size());
    const auto jj = static_cast<Eigen::Index>(j);

    Eigen::MatrixXd sigma_ss(k, k);
    Eigen::VectorXd sigma_sj(k);
    for (Eigen::Index a = 0; a < k; ++a) {
        sigma_sj[a] = m.covariance(s[static_cast<std::size_t>(a)], jj);
        for (Eigen::Index b = 0; b < k; ++b) {
            sigma_ss(a, b) = m.covariance(s[static_cast<std::size_t>(a)], s[static_cast<std::size_t>(b)]);
        }
    }
    const Eigen::LDLT<Eigen::MatrixXd> solver(sigma_ss);
    const Eigen::VectorXd beta = solver.solve(sigma_sj);
    const double conditional_var = m.covariance(jj, jj) - sigma_sj.dot(beta);

    // Integrate z out: the mean keeps only the x_i term, the z-part of the
    // regression adds beta_z' Sigma_zz beta_z to the variance.
    const double mean = m.mean[jj] + beta[0] * (x_hat - m.mean[s[0]]);
    const Eigen::VectorXd beta_z = beta.tail(k - 1);
    const Eigen::MatrixXd sigma_zz = sigma_ss.bottomRightCorner(k - 1, k - 1);
    const double variance = conditional_var + beta_z.dot(sigma_zz * beta_z);
    return {mean, variance > 0.0 ? variance : 0.0};
}

/// Closed-form MMD between N(m1, v1) and N(m2, v2) under the RBF kernel with
/// the given bandwidth:
///   E k(X, Y) = g / sqrt(g^2 + v1 + v2) * exp(-(m1 - m2)^2 / (2 (g^2 + v1 + v2))),
///   MMD^2 = E k(X, X') + E k(Y, Y') - 2 E k(X, Y).
/// Evaluated in a cancellation-free arrangement so that identical laws give
/// an MMD at rounding level rather than sqrt(machine epsilon).
inline double gaussian_rbf_mmd(const GaussianLaw &p, const GaussianLaw &q, double bandwidth) {
    if (!(bandwidth > 0.0) || !std::isfinite(bandwidth)) { throw DomainError("bandwidth must be positive and finite"); }
    if (p.variance < 0.0 || q.variance < 0.0) { throw DomainError("variance must be nonnegative"); }
    const double g2 = bandwidth * bandwidth;
    const double s_pq = g2 + p.variance + q.variance;
    const double h = p.variance - q.variance;  // s_pp = s_pq + h, s_qq = s_pq - h
    const double delta = p.mean - q.mean;

    // s^-1/2 differences via log1p/expm1: f(c + h) + f(c - h) - 2 f(c).
    const double inv_root = 1.0 / std::sqrt(s_pq);
    const double up = std::expm1(-0.5 * std::log1p(h / s_pq));
    const double down = std::expm1(-0.5 * std::log1p(-h / s_pq));
    const double spread_term = inv_root * (up + down);
    const double mean_term = -2.0 * inv_root * std::expm1(-delta * delta / (2.0 * s_pq));
    const double mmd_sq = bandwidth * (spread_term + mean_term);
    return std::sqrt(mmd_sq > 0.0 ? mmd_sq : 0.0);
}

/// RKHS norm of the mean embedding of N(m, v): sqrt(g / sqrt(g^2 + 2 v)).
inline double gaussian_embedding_norm(const GaussianLaw &p, double bandwidth) {
    if (!(bandwidth > 0.0) || !std::isfinite(bandwidth)) { throw DomainError("bandwidth must be positive and finite"); }
    return std::sqrt(bandwidth / std::sqrt(bandwidth * bandwidth + 2.0 * p.variance));
}

namespace detail {

/// sum_{a, b} exp(-scale (x_a - y_b)^2), blocked so the inner loop vectorizes.
inline double kernel_sum(std::span<const double> xs, std::span<const double> ys, double scale) {
    const Eigen::Map<const Eigen::ArrayXd> y(ys.data(), static_cast<Eigen::Index>(ys.size()));
    double total = 0.0;
    for (double x : xs) { total += (-scale * (y - x).square()).exp().sum(); }
    return total;
}

}  // namespace detail

/// Biased (V-statistic) MMD: sqrt(mean K_aa + mean K_bb - 2 mean K_ab).
inline double empirical_mmd(std::span<const double> samples_a, std::span<const double> samples_b, double bandwidth) {
    if (samples_a.empty() || samples_b.empty()) { throw EmptyInputError("empirical MMD needs non-empty samples"); }
    if (!(bandwidth > 0.0) || !std::isfinite(bandwidth)) { throw DomainError("bandwidth must be positive and finite"); }
    const double scale = 1.0 / (2.0 * bandwidth * bandwidth);
    const auto na = static_cast<double>(samples_a.size());
    const auto nb = static_cast<double>(samples_b.size());
    const double aa = detail::kernel_sum(samples_a, samples_a, scale) / (na * na);
    const double bb = detail::kernel_sum(samples_b, samples_b, scale) / (nb * nb);
    const double ab = detail::kernel_sum(samples_a, samples_b, scale) / (na * nb);
    const double radicand = aa + bb - 2.0 * ab;
    return std::sqrt(radicand > 0.0 ? radicand : 0.0);
}

}  // namespace contsid
