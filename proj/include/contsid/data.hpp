#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "contsid/errors.hpp"

namespace contsid {

/// N samples by D columns of reals; column d holds the observations of node d.
class Dataset {
public:
    Dataset() = default;

    explicit Dataset(Eigen::MatrixXd values) : values_(std::move(values)) {
        if (!values_.allFinite()) { throw DomainError("dataset contains non-finite values"); }
    }

    [[nodiscard]] std::size_t num_samples() const noexcept { return static_cast<std::size_t>(values_.rows()); }
    [[nodiscard]] std::size_t num_columns() const noexcept { return static_cast<std::size_t>(values_.cols()); }

    [[nodiscard]] const Eigen::MatrixXd &values() const noexcept { return values_; }

    [[nodiscard]] auto column(std::size_t d) const {
        check_column(d);
        return values_.col(static_cast<Eigen::Index>(d));
    }

    [[nodiscard]] std::span<const double> column_span(std::size_t d) const {
        check_column(d);
        return {values_.col(static_cast<Eigen::Index>(d)).data(), num_samples()};
    }

    /// Rows restricted to the listed columns, in the listed order.
    [[nodiscard]] Eigen::MatrixXd select_columns(std::span<const std::size_t> columns) const {
        Eigen::MatrixXd out(values_.rows(), static_cast<Eigen::Index>(columns.size()));
        for (std::size_t k = 0; k < columns.size(); ++k) {
            out.col(static_cast<Eigen::Index>(k)) = column(columns[k]);
        }
        return out;
    }

    [[nodiscard]] Dataset select_rows(std::span<const std::size_t> rows) const {
        Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), values_.cols());
        for (std::size_t r = 0; r < rows.size(); ++r) {
            if (rows[r] >= num_samples()) { throw IndexError("row " + std::to_string(rows[r]) + " out of range"); }
            out.row(static_cast<Eigen::Index>(r)) = values_.row(static_cast<Eigen::Index>(rows[r]));
        }
        return Dataset(std::move(out));
    }

    void check_column(std::size_t d) const {
        if (d >= num_columns()) {
            throw IndexError("column " + std::to_string(d) + " out of range for " +
                             std::to_string(num_columns()) + " columns");
        }
    }

private:
    Eigen::MatrixXd values_;
};

}  // namespace contsid
