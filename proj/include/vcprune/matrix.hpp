#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <vector>

#include "vcprune/error.hpp"

namespace vcprune {

/// Dense row-major matrix. Rows index the output dimension, columns the
/// input dimension, matching a linear layer's (d_out, d_in) weight layout.
template <typename T>
class Matrix {
public:
    using value_type = T;

    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, T fill = T{})
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
    Matrix(std::size_t rows, std::size_t cols, std::vector<T> data)
        : rows_(rows), cols_(cols), data_(std::move(data))
    {
        if (data_.size() != rows_ * cols_) {
            throw Error(ErrorKind::dimension_mismatch, "matrix data size does not match shape");
        }
    }
    Matrix(std::initializer_list<std::initializer_list<T>> rows)
        : rows_(rows.size()), cols_(rows.size() ? rows.begin()->size() : 0)
    {
        data_.reserve(rows_ * cols_);
        for (const auto& r : rows) {
            if (r.size() != cols_) {
                throw Error(ErrorKind::dimension_mismatch, "ragged matrix literal");
            }
            data_.insert(data_.end(), r.begin(), r.end());
        }
    }

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    T& operator()(std::size_t i, std::size_t j) noexcept { return data_[i * cols_ + j]; }
    const T& operator()(std::size_t i, std::size_t j) const noexcept { return data_[i * cols_ + j]; }

    std::span<T> row(std::size_t i) noexcept { return {data_.data() + i * cols_, cols_}; }
    std::span<const T> row(std::size_t i) const noexcept { return {data_.data() + i * cols_, cols_}; }

    std::span<T> values() noexcept { return data_; }
    std::span<const T> values() const noexcept { return data_; }
    T* data() noexcept { return data_.data(); }
    const T* data() const noexcept { return data_.data(); }

    bool same_shape(const auto& other) const noexcept
    {
        return rows_ == other.rows() && cols_ == other.cols();
    }

    Matrix transposed() const
    {
        Matrix out(cols_, rows_);
        for (std::size_t i = 0; i < rows_; ++i) {
            for (std::size_t j = 0; j < cols_; ++j) {
                out(j, i) = (*this)(i, j);
            }
        }
        return out;
    }

    friend bool operator==(const Matrix&, const Matrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<T> data_;
};

/// Weights are held in double precision in memory; the container stores
/// them as 32-bit floats.
using WeightMatrix = Matrix<double>;

/// {0,1} matrix congruent to a WeightMatrix; 0 marks a pruned weight.
using PruneMask = Matrix<std::uint8_t>;

template <typename A, typename B>
void require_same_shape(const Matrix<A>& a, const Matrix<B>& b, const char* what)
{
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw Error(ErrorKind::dimension_mismatch, std::string(what) + ": shape mismatch");
    }
}

} // namespace vcprune
