#pragma once

// Gaussian RBF kernels over real columns, product kernels over column lists,
// Gram assembly and the median-heuristic bandwidth.
//
// Convention: k(x, y) = exp(-(x - y)^2 / (2 * bandwidth^2)).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "contsid/data.hpp"
#include "contsid/errors.hpp"

namespace contsid {

enum class KernelFamily { gaussian_rbf };
enum class BandwidthRule { median_heuristic, fixed };

inline constexpr double kDefaultLambda = 1e-2;

struct KernelConfig {
    KernelFamily family = KernelFamily::gaussian_rbf;
    std::vector<double> bandwidths;  ///< one per dataset column, in data units
    double regularization = kDefaultLambda;
    BandwidthRule bandwidth_rule = BandwidthRule::median_heuristic;

    void validate() const {
        if (!(regularization > 0.0) || !std::isfinite(regularization)) {
            throw DomainError("regularization must be positive and finite");
        }
        for (std::size_t d = 0; d < bandwidths.size(); ++d) {
            if (!(bandwidths[d] > 0.0) || !std::isfinite(bandwidths[d])) {
                throw DomainError("bandwidth of column " + std::to_string(d) + " must be positive and finite");
            }
        }
    }

    [[nodiscard]] double bandwidth(std::size_t column) const {
        if (column >= bandwidths.size()) {
            throw ArityError("no bandwidth configured for column " + std::to_string(column));
        }
        return bandwidths[column];
    }
};

inline double rbf_eval(double x, double y, double bandwidth) {
    if (!std::isfinite(x) || !std::isfinite(y)) { throw DomainError("kernel arguments must be finite"); }
    if (!(bandwidth > 0.0) || !std::isfinite(bandwidth)) { throw DomainError("bandwidth must be positive and finite"); }
    const double diff = x - y;
    return std::exp(-(diff * diff) / (2.0 * bandwidth * bandwidth));
}

/// Product of per-column RBF kernels over `columns`; the tuples hold one
/// value per listed column.
inline double product_eval(std::span<const double> point_a, std::span<const double> point_b,
                           const KernelConfig &config, std::span<const std::size_t> columns) {
    if (point_a.size() != columns.size() || point_b.size() != columns.size()) {
        throw ArityError("tuple arity does not match the column list");
    }
    double value = 1.0;
    for (std::size_t k = 0; k < columns.size(); ++k) {
        value *= rbf_eval(point_a[k], point_b[k], config.bandwidth(columns[k]));
    }
    return value;
}

struct GramMatrix {
    Eigen::MatrixXd entries;
    bool symmetric = false;

    [[nodiscard]] Eigen::Index size() const noexcept { return entries.rows(); }
};

namespace detail {

inline Eigen::ArrayXd inverse_two_sigma_sq(const KernelConfig &config, std::span<const std::size_t> columns) {
    Eigen::ArrayXd scale(static_cast<Eigen::Index>(columns.size()));
    for (std::size_t k = 0; k < columns.size(); ++k) {
        const double bw = config.bandwidth(columns[k]);
        if (!(bw > 0.0) || !std::isfinite(bw)) { throw DomainError("bandwidth must be positive and finite"); }
        scale[static_cast<Eigen::Index>(k)] = 1.0 / (2.0 * bw * bw);
    }
    return scale;
}

}  // namespace detail

/// Cross Gram between point sets (one tuple per row, one column per entry
/// of `columns`). Entry (s, t) is the product kernel of row s of `points_a`
/// and row t of `points_b`.
inline GramMatrix gram(const Eigen::MatrixXd &points_a, const Eigen::MatrixXd &points_b,
                       const KernelConfig &config, std::span<const std::size_t> columns) {
    const auto arity = static_cast<Eigen::Index>(columns.size());
    if (points_a.cols() != arity || points_b.cols() != arity) {
        throw ArityError("point arity does not match the column list");
    }
    if (!points_a.allFinite() || !points_b.allFinite()) { throw DomainError("kernel arguments must be finite"); }
    const Eigen::ArrayXd scale = detail::inverse_two_sigma_sq(config, columns);
    const Eigen::Index na = points_a.rows();
    const Eigen::Index nb = points_b.rows();
    const bool same = na == nb && points_a == points_b;

    GramMatrix out{Eigen::MatrixXd::Ones(na, nb), same};
    for (Eigen::Index k = 0; k < arity; ++k) {
        const auto a = points_a.col(k);
        const auto b = points_b.col(k);
        const double s = scale[k];
        for (Eigen::Index t = 0; t < nb; ++t) {
            const Eigen::Index start = same ? t + 1 : 0;
            for (Eigen::Index r = start; r < na; ++r) {
                const double diff = a[r] - b[t];
                out.entries(r, t) *= std::exp(-s * diff * diff);
            }
        }
    }
    if (same) { out.entries.triangularView<Eigen::StrictlyUpper>() = out.entries.transpose(); }
    return out;
}

inline GramMatrix self_gram(const Eigen::MatrixXd &points, const KernelConfig &config,
                            std::span<const std::size_t> columns) {
    GramMatrix out = gram(points, points, config, columns);
    out.symmetric = true;
    return out;
}

/// Self-Gram of one dataset column.
inline GramMatrix column_gram(const Dataset &data, std::size_t column, const KernelConfig &config) {
    const std::size_t cols[] = {column};
    return self_gram(data.select_columns(cols), config, cols);
}

/// Median of the N(N-1)/2 pairwise absolute differences (lower median on
/// an even count). Throws DegenerateColumnError when all values coincide.
inline double median_bandwidth(std::span<const double> column) {
    if (column.size() < 2) { throw DegenerateColumnError("median heuristic needs at least two values"); }
    std::vector<double> diffs;
    diffs.reserve(column.size() * (column.size() - 1) / 2);
    for (std::size_t a = 0; a < column.size(); ++a) {
        for (std::size_t b = a + 1; b < column.size(); ++b) { diffs.push_back(std::abs(column[a] - column[b])); }
    }
    const auto mid = diffs.begin() + static_cast<std::ptrdiff_t>((diffs.size() - 1) / 2);
    std::nth_element(diffs.begin(), mid, diffs.end());
    if (*mid > 0.0) { return *mid; }
    // At least half the pairs tie exactly: take the median over the nonzero gaps.
    std::erase_if(diffs, [](double v) { return !(v > 0.0); });
    if (diffs.empty()) { throw DegenerateColumnError("column has zero spread"); }
    const auto nonzero_mid = diffs.begin() + static_cast<std::ptrdiff_t>((diffs.size() - 1) / 2);
    std::nth_element(diffs.begin(), nonzero_mid, diffs.end());
    return *nonzero_mid;
}

/// Per-column bandwidths for `data` under the given rule.
inline KernelConfig make_kernel_config(const Dataset &data, double lambda = kDefaultLambda,
                                       BandwidthRule rule = BandwidthRule::median_heuristic,
                                       double fixed_bandwidth = 1.0) {
    KernelConfig config;
    config.regularization = lambda;
    config.bandwidth_rule = rule;
    config.bandwidths.resize(data.num_columns());
    for (std::size_t d = 0; d < data.num_columns(); ++d) {
        if (rule == BandwidthRule::fixed) {
            config.bandwidths[d] = fixed_bandwidth;
            continue;
        }
        try {
            config.bandwidths[d] = median_bandwidth(data.column_span(d));
        } catch (const DegenerateColumnError &) {
            throw DegenerateColumnError("column " + std::to_string(d) + " is constant", d);
        }
    }
    config.validate();
    return config;
}

}  // namespace contsid
