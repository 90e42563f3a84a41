#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <string>
#include <vector>

#include "voxseek/error.hpp"

namespace voxseek::num {

/// Dense row-major tensor. `T` is float in production code; the gradient
/// checking oracles instantiate the same code with double.
template <class T>
struct TensorT {
    std::vector<int> shape;
    std::vector<T> v;

    TensorT() = default;

    explicit TensorT(std::vector<int> s) : shape(std::move(s)) {
        v.assign(static_cast<size_t>(count(shape)), T{});
    }

    TensorT(std::vector<int> s, std::vector<T> data) : shape(std::move(s)), v(std::move(data)) {
        if (static_cast<long long>(v.size()) != count(shape))
            throw ShapeError("tensor data length does not match shape");
    }

    static long long count(const std::vector<int>& s) {
        long long n = 1;
        for (int d : s) {
            if (d <= 0) throw ShapeError("tensor dimensions must be positive");
            n *= d;
        }
        return n;
    }

    int numel() const { return static_cast<int>(v.size()); }

    T& operator[](int i) { return v[static_cast<size_t>(i)]; }
    const T& operator[](int i) const { return v[static_cast<size_t>(i)]; }

    void fill(T x) { std::fill(v.begin(), v.end(), x); }

    bool same_shape(const TensorT& o) const { return shape == o.shape; }

    bool all_finite() const {
        for (T x : v)
            if (!std::isfinite(static_cast<double>(x))) return false;
        return true;
    }
};

using Tensor = TensorT<float>;

template <class T>
std::string shape_str(const TensorT<T>& t) {
    std::string s = "[";
    for (size_t i = 0; i < t.shape.size(); ++i) {
        if (i) s += "x";
        s += std::to_string(t.shape[i]);
    }
    return s + "]";
}

/// Named trainable tensor with its gradient accumulator.
template <class T>
struct ParameterT {
    std::string name;
    TensorT<T> value;
    TensorT<T> grad;

    ParameterT(std::string n, std::vector<int> shape)
        : name(std::move(n)), value(shape), grad(std::move(shape)) {}
};

using Parameter = ParameterT<float>;

} // namespace voxseek::num
