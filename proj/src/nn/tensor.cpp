#include "deepmal/nn/tensor.hpp"

#include <algorithm>

#include "deepmal/util/error.hpp"

DEEPMAL_NN_BEGIN

std::size_t element_count(const Shape& shape) {
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    return n;
}

std::string shape_string(const Shape& shape) {
    std::string s = "(";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += ", ";
        s += std::to_string(shape[i]);
    }
    return s + ")";
}

Tensor::Tensor(Shape shape, Real fill) : shape_(std::move(shape)) {
    for (std::size_t i = 1; i < shape_.size(); ++i) {
        if (shape_[i] == 0) throw ShapeError("tensor extents must be positive: " + shape_string(shape_));
    }
    data_.assign(element_count(shape_), fill);
}

Tensor::Tensor(Shape shape, std::vector<Real> values)
    : shape_(std::move(shape)), data_(std::move(values)) {
    if (data_.size() != element_count(shape_)) {
        throw ShapeError("value count " + std::to_string(data_.size()) +
                         " does not match shape " + shape_string(shape_));
    }
}

std::size_t Tensor::row_size() const {
    if (shape_.empty()) return 1;
    std::size_t n = 1;
    for (std::size_t i = 1; i < shape_.size(); ++i) n *= shape_[i];
    return n;
}

std::span<const Real> Tensor::row(std::size_t i) const {
    const auto n = row_size();
    return std::span<const Real>(data_).subspan(i * n, n);
}

std::span<Real> Tensor::row(std::size_t i) {
    const auto n = row_size();
    return std::span<Real>(data_).subspan(i * n, n);
}

void Tensor::reshape(Shape shape) {
    if (element_count(shape) != data_.size()) {
        throw ShapeError("cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
    }
    shape_ = std::move(shape);
}

Tensor Tensor::reshaped(Shape shape) const {
    Tensor t = *this;
    t.reshape(std::move(shape));
    return t;
}

void Tensor::fill(Real value) { std::fill(data_.begin(), data_.end(), value); }

Tensor Tensor::gather_rows(std::span<const std::size_t> rows) const {
    Shape shape = shape_;
    if (shape.empty()) throw ShapeError("gather_rows on a scalar tensor");
    shape[0] = rows.size();
    Tensor out(shape);
    const auto n = row_size();
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r] >= shape_[0]) throw ShapeError("row index out of range");
        std::copy_n(data_.begin() + static_cast<std::ptrdiff_t>(rows[r] * n), n,
                    out.data_.begin() + static_cast<std::ptrdiff_t>(r * n));
    }
    return out;
}

DEEPMAL_NN_END
