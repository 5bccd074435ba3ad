#include <draglab/tensor.hpp>

#include <algorithm>
#include <sstream>

namespace draglab {

std::string shape_string(const Shape& shape) {
    std::ostringstream out;
    out << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) out << ',';
        out << shape[i];
    }
    out << ']';
    return out.str();
}

std::size_t shape_numel(const Shape& shape) {
    std::size_t n = 1;
    for (int d : shape) {
        if (d < 0) throw ArgumentError("negative dimension in shape " + shape_string(shape));
        n *= static_cast<std::size_t>(d);
    }
    return n;
}

Tensor::Tensor(Shape shape, real fill) : shape_(std::move(shape)), data_(shape_numel(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<real> values) : shape_(std::move(shape)), data_(std::move(values)) {
    if (data_.size() != shape_numel(shape_)) {
        throw ArgumentError("tensor data size " + std::to_string(data_.size()) + " does not match shape " +
                            shape_string(shape_));
    }
}

void Tensor::fill(real value) { std::fill(data_.begin(), data_.end(), value); }

void Tensor::reshape(Shape shape) {
    if (shape_numel(shape) != data_.size()) {
        throw ArgumentError("cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
    }
    shape_ = std::move(shape);
}

Tensor& Tensor::operator+=(const Tensor& other) {
    if (data_.size() != other.data_.size()) {
        throw ArgumentError("tensor add: " + shape_string(shape_) + " vs " + shape_string(other.shape_));
    }
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
    return *this;
}

Tensor& Tensor::operator*=(real scale) {
    for (auto& v : data_) v *= scale;
    return *this;
}

void require_shape(const Tensor& t, const Shape& expected, const char* what) {
    if (t.shape() != expected) {
        throw ArgumentError(std::string(what) + ": expected shape " + shape_string(expected) + ", got " +
                            shape_string(t.shape()));
    }
}

}  // namespace draglab
