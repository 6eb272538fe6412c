#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "lotus/common.hpp"

namespace lotus {

enum class Dtype : uint8_t { F32 = 0, F64 = 1 };

template <class T>
struct dtype_tag;
template <>
struct dtype_tag<float> {
    static constexpr Dtype value = Dtype::F32;
};
template <>
struct dtype_tag<double> {
    static constexpr Dtype value = Dtype::F64;
};

// Dense row-major tensor. grad is allocated (zeros) iff requires_grad.
template <class T>
struct Tensor {
    std::vector<int> shape;
    std::vector<T> data;
    std::vector<T> grad;
    bool requires_grad = false;

    Tensor() = default;

    Tensor(std::vector<int> s, std::vector<T> d, bool rg = false)
        : shape(std::move(s)), data(std::move(d)), requires_grad(rg) {
        int64_t n = shape.empty() ? 0 : 1;
        for (int dim : shape) {
            if (dim <= 0) throw DimensionError("tensor dims must be positive");
            n *= dim;
        }
        if (n != static_cast<int64_t>(data.size()))
            throw DimensionError("tensor shape does not match buffer size");
        if (requires_grad) grad.assign(data.size(), T(0));
    }

    int64_t numel() const { return static_cast<int64_t>(data.size()); }
    int ndim() const { return static_cast<int>(shape.size()); }

    int rows() const { return shape.empty() ? 0 : shape[0]; }
    int cols() const { return ndim() < 2 ? 1 : shape[1]; }

    T& at(int r, int c) { return data[static_cast<size_t>(r) * cols() + c]; }
    const T& at(int r, int c) const { return data[static_cast<size_t>(r) * cols() + c]; }

    void zero_grad() {
        if (requires_grad) grad.assign(data.size(), T(0));
    }
};

template <class T>
using TensorPtr = std::shared_ptr<Tensor<T>>;

template <class T>
TensorPtr<T> make_tensor(std::vector<int> shape, std::vector<T> data, bool requires_grad = false) {
    return std::make_shared<Tensor<T>>(std::move(shape), std::move(data), requires_grad);
}

template <class T>
TensorPtr<T> zeros(std::vector<int> shape, bool requires_grad = false) {
    int64_t n = shape.empty() ? 0 : 1;
    for (int d : shape) n *= d;
    return std::make_shared<Tensor<T>>(std::move(shape), std::vector<T>(static_cast<size_t>(n), T(0)),
                                       requires_grad);
}

}  // namespace lotus
