#pragma once

#include <draglab/common.hpp>

#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace draglab {

using Shape = std::vector<int>;

std::string shape_string(const Shape& shape);
std::size_t shape_numel(const Shape& shape);

/// Dense row-major tensor. Activations use the frame-major, channels-last
/// layout [frames, height, width, channels].
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape, real fill = real(0));
    Tensor(Shape shape, std::vector<real> values);

    static Tensor zeros_like(const Tensor& other) { return Tensor(other.shape()); }

    const Shape& shape() const noexcept { return shape_; }
    int dim(std::size_t axis) const { return shape_.at(axis); }
    std::size_t rank() const noexcept { return shape_.size(); }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    real* data() noexcept { return data_.data(); }
    const real* data() const noexcept { return data_.data(); }
    std::span<real> values() noexcept { return data_; }
    std::span<const real> values() const noexcept { return data_; }
    std::vector<real>& storage() noexcept { return data_; }
    const std::vector<real>& storage() const noexcept { return data_; }

    real& operator[](std::size_t i) noexcept { return data_[i]; }
    real operator[](std::size_t i) const noexcept { return data_[i]; }

    /// 4D accessor for [n, y, x, c] tensors.
    real& at(int n, int y, int x, int c) noexcept {
        return data_[((static_cast<std::size_t>(n) * shape_[1] + y) * shape_[2] + x) * shape_[3] + c];
    }
    real at(int n, int y, int x, int c) const noexcept {
        return data_[((static_cast<std::size_t>(n) * shape_[1] + y) * shape_[2] + x) * shape_[3] + c];
    }

    void fill(real value);
    void reshape(Shape shape);
    bool same_shape(const Tensor& other) const noexcept { return shape_ == other.shape_; }

    Tensor& operator+=(const Tensor& other);
    Tensor& operator*=(real scale);

private:
    Shape shape_;
    std::vector<real> data_;
};

void require_shape(const Tensor& t, const Shape& expected, const char* what);

}  // namespace draglab
