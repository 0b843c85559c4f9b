#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "deepmal/nn/real.hpp"

DEEPMAL_NN_BEGIN

using Shape = std::vector<std::size_t>;

std::size_t element_count(const Shape& shape);
std::string shape_string(const Shape& shape);

/// Dense row-major array. Every extent is positive except a leading batch
/// dimension, which may be zero for empty datasets.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape, Real fill = Real(0));
    Tensor(Shape shape, std::vector<Real> values);

    const Shape& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    Real* data() { return data_.data(); }
    const Real* data() const { return data_.data(); }
    std::span<Real> values() { return data_; }
    std::span<const Real> values() const { return data_; }
    std::vector<Real>& storage() { return data_; }

    Real& operator[](std::size_t i) { return data_[i]; }
    Real operator[](std::size_t i) const { return data_[i]; }

    Real& at(std::size_t i, std::size_t j) { return data_[i * shape_[1] + j]; }
    Real at(std::size_t i, std::size_t j) const { return data_[i * shape_[1] + j]; }
    Real& at(std::size_t i, std::size_t j, std::size_t k) {
        return data_[(i * shape_[1] + j) * shape_[2] + k];
    }
    Real at(std::size_t i, std::size_t j, std::size_t k) const {
        return data_[(i * shape_[1] + j) * shape_[2] + k];
    }

    /// Extent of everything after the leading axis.
    std::size_t row_size() const;
    std::span<const Real> row(std::size_t i) const;
    std::span<Real> row(std::size_t i);

    void reshape(Shape shape);
    Tensor reshaped(Shape shape) const;
    void fill(Real value);

    /// Copies the listed leading-axis rows, in the listed order.
    Tensor gather_rows(std::span<const std::size_t> rows) const;

    bool operator==(const Tensor&) const = default;

private:
    Shape shape_;
    std::vector<Real> data_;
};

DEEPMAL_NN_END
