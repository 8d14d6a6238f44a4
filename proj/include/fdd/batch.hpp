#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "fdd/error.hpp"

namespace fdd {

/// Row-major matrix of doubles; one row per sample.
class Batch {
public:
    Batch() = default;

    Batch(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), values_(rows * cols, fill)
    {
    }

    Batch(std::size_t rows, std::size_t cols, std::vector<double> values)
        : rows_(rows), cols_(cols), values_(std::move(values))
    {
        if (values_.size() != rows_ * cols_) {
            throw DimensionError("batch: " + std::to_string(values_.size()) + " values for a " +
                                 std::to_string(rows_) + "x" + std::to_string(cols_) + " shape");
        }
    }

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    bool empty() const noexcept { return rows_ == 0; }

    std::span<double> values() noexcept { return values_; }
    std::span<const double> values() const noexcept { return values_; }

    std::span<double> row(std::size_t r) noexcept { return {values_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const noexcept { return {values_.data() + r * cols_, cols_}; }

    double& operator()(std::size_t r, std::size_t c) noexcept { return values_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const noexcept { return values_[r * cols_ + c]; }

    /// Reshape without preserving contents; keeps the allocation when possible.
    void resize(std::size_t rows, std::size_t cols)
    {
        rows_ = rows;
        cols_ = cols;
        values_.resize(rows * cols);
    }

    void fill(double v) { std::fill(values_.begin(), values_.end(), v); }

    bool all_finite() const noexcept
    {
        return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
    }

    Batch select_rows(std::span<const std::size_t> indices) const
    {
        Batch out(indices.size(), cols_);
        for (std::size_t i = 0; i < indices.size(); ++i) {
            const auto src = row(indices[i]);
            std::copy(src.begin(), src.end(), out.row(i).begin());
        }
        return out;
    }

    void append_row(std::span<const double> r)
    {
        if (rows_ == 0 && cols_ == 0) {
            cols_ = r.size();
        }
        if (r.size() != cols_) {
            throw DimensionError("batch: appending a row of width " + std::to_string(r.size()) +
                                 " to width " + std::to_string(cols_));
        }
        values_.insert(values_.end(), r.begin(), r.end());
        ++rows_;
    }

    friend bool operator==(const Batch&, const Batch&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> values_;
};

} // namespace fdd
