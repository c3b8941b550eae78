#pragma once

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstddef>
#include <sstream>
#include <string>
#include <type_traits>
#include <vector>

#include "hybridsent/errors.hpp"

namespace hybridsent {

// Dense row-major n-dimensional array. Two precision modes are supported by
// instantiation: Tensor<float> (default compute mode) and Tensor<double>
// (gradient checking and other high-tolerance verification).
template <typename T>
class Tensor {
    static_assert(std::is_floating_point_v<T>);

public:
    Tensor() = default;

    explicit Tensor(std::vector<std::size_t> shape)
        : shape_(std::move(shape)), data_(checked_volume(shape_), T(0)) {}

    Tensor(std::vector<std::size_t> shape, std::vector<T> data)
        : shape_(std::move(shape)), data_(std::move(data)) {
        if (data_.size() != checked_volume(shape_)) {
            throw DimensionError("tensor data length " + std::to_string(data_.size()) +
                                 " does not match shape " + shape_string(shape_));
        }
    }

    static Tensor full(std::vector<std::size_t> shape, T value) {
        Tensor t(std::move(shape));
        std::fill(t.data_.begin(), t.data_.end(), value);
        return t;
    }

    std::size_t rank() const { return shape_.size(); }
    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t dim(std::size_t axis) const { return shape_[axis]; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }
    std::vector<T>& storage() { return data_; }
    const std::vector<T>& storage() const { return data_; }

    T& operator[](std::size_t i) { return data_[i]; }
    const T& operator[](std::size_t i) const { return data_[i]; }

    T& operator()(std::size_t i, std::size_t j) {
        assert(rank() == 2);
        return data_[i * shape_[1] + j];
    }
    const T& operator()(std::size_t i, std::size_t j) const {
        assert(rank() == 2);
        return data_[i * shape_[1] + j];
    }
    T& operator()(std::size_t i, std::size_t j, std::size_t k) {
        assert(rank() == 3);
        return data_[(i * shape_[1] + j) * shape_[2] + k];
    }
    const T& operator()(std::size_t i, std::size_t j, std::size_t k) const {
        assert(rank() == 3);
        return data_[(i * shape_[1] + j) * shape_[2] + k];
    }

    // Row pointer for rank-2 tensors.
    T* row(std::size_t i) {
        assert(rank() == 2);
        return data_.data() + i * shape_[1];
    }
    const T* row(std::size_t i) const {
        assert(rank() == 2);
        return data_.data() + i * shape_[1];
    }

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

    void fill(T value) { std::fill(data_.begin(), data_.end(), value); }

    bool all_finite() const {
        for (const T v : data_) {
            if (!std::isfinite(v)) return false;
        }
        return true;
    }

    static std::string shape_string(const std::vector<std::size_t>& shape) {
        std::ostringstream os;
        os << '[';
        for (std::size_t i = 0; i < shape.size(); ++i) {
            if (i) os << 'x';
            os << shape[i];
        }
        os << ']';
        return os.str();
    }

    std::string shape_string() const { return shape_string(shape_); }

private:
    static std::size_t checked_volume(const std::vector<std::size_t>& shape) {
        std::size_t n = 1;
        for (const std::size_t d : shape) {
            if (d == 0) throw DimensionError("zero dimension in shape " + shape_string(shape));
            n *= d;
        }
        return shape.empty() ? 0 : n;
    }

    std::vector<std::size_t> shape_;
    std::vector<T> data_;
};

using Tensorf = Tensor<float>;
using Tensord = Tensor<double>;

enum class Activation { Identity, Sigmoid, Tanh, Relu, Gelu };

namespace scalar {

template <typename T>
inline T sigmoid(T x) {
    return T(1) / (T(1) + std::exp(-x));
}

template <typename T>
inline T relu(T x) {
    return x > T(0) ? x : T(0);
}

// tanh approximation of GELU; 0.044715 is the reference cubic coefficient.
template <typename T>
inline T gelu(T x) {
    const T k = T(0.7978845608028653558798921198687);  // sqrt(2/pi)
    return T(0.5) * x * (T(1) + std::tanh(k * (x + T(0.044715) * x * x * x)));
}

template <typename T>
inline T apply(Activation fn, T x) {
    switch (fn) {
        case Activation::Identity: return x;
        case Activation::Sigmoid: return sigmoid(x);
        case Activation::Tanh: return std::tanh(x);
        case Activation::Relu: return relu(x);
        case Activation::Gelu: return gelu(x);
    }
    return x;
}

// Derivative expressed through the pre-activation z.
template <typename T>
inline T apply_grad(Activation fn, T z) {
    switch (fn) {
        case Activation::Identity: return T(1);
        case Activation::Sigmoid: {
            const T s = sigmoid(z);
            return s * (T(1) - s);
        }
        case Activation::Tanh: {
            const T t = std::tanh(z);
            return T(1) - t * t;
        }
        case Activation::Relu: return z > T(0) ? T(1) : T(0);
        case Activation::Gelu: {
            const T k = T(0.7978845608028653558798921198687);
            const T u = k * (z + T(0.044715) * z * z * z);
            const T t = std::tanh(u);
            const T du = k * (T(1) + T(3) * T(0.044715) * z * z);
            return T(0.5) * (T(1) + t) + T(0.5) * z * (T(1) - t * t) * du;
        }
    }
    return T(1);
}

}  // namespace scalar

// C[m x n] = A[m x k] * B[k x n]. Accumulation runs over k in ascending order
// for every output element, which keeps results bit-reproducible and equal to
// the naive triple loop per precision mode.
template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
        throw DimensionError("matmul shape mismatch: " + a.shape_string() + " x " + b.shape_string());
    }
    const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
    Tensor<T> c({m, n});
    for (std::size_t i = 0; i < m; ++i) {
        const T* arow = a.row(i);
        T* crow = c.row(i);
        for (std::size_t p = 0; p < k; ++p) {
            const T av = arow[p];
            const T* brow = b.row(p);
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
    return c;
}

template <typename T>
Tensor<T> map(const Tensor<T>& x, Activation fn) {
    Tensor<T> out = x;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = scalar::apply(fn, out[i]);
    return out;
}

// Max-subtracted softmax over the last axis of a rank >= 1 tensor.
template <typename T>
Tensor<T> softmax(const Tensor<T>& x) {
    if (x.rank() == 0 || x.dim(x.rank() - 1) == 0) {
        throw DimensionError("softmax requires a non-empty last axis");
    }
    const std::size_t n = x.dim(x.rank() - 1);
    const std::size_t rows = x.size() / n;
    Tensor<T> out = x;
    for (std::size_t r = 0; r < rows; ++r) {
        T* v = out.data() + r * n;
        T mx = v[0];
        for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, v[j]);
        T sum = T(0);
        for (std::size_t j = 0; j < n; ++j) {
            v[j] = std::exp(v[j] - mx);
            sum += v[j];
        }
        for (std::size_t j = 0; j < n; ++j) v[j] /= sum;
    }
    return out;
}

// Per-last-axis normalization to mean 0 / population variance 1, then an
// affine transform by gamma and beta.
template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                     T eps = T(1e-12)) {
    if (x.rank() == 0) throw DimensionError("layer_norm requires rank >= 1");
    if (eps <= T(0)) throw ConfigError("layer_norm eps must be positive");
    const std::size_t h = x.dim(x.rank() - 1);
    if (gamma.size() != h || beta.size() != h) {
        throw DimensionError("layer_norm affine size mismatch: x " + x.shape_string() + ", gamma " +
                             gamma.shape_string() + ", beta " + beta.shape_string());
    }
    const std::size_t rows = x.size() / h;
    Tensor<T> out = x;
    for (std::size_t r = 0; r < rows; ++r) {
        T* v = out.data() + r * h;
        T mean = T(0);
        for (std::size_t j = 0; j < h; ++j) mean += v[j];
        mean /= T(h);
        T var = T(0);
        for (std::size_t j = 0; j < h; ++j) {
            const T d = v[j] - mean;
            var += d * d;
        }
        var /= T(h);
        const T inv = T(1) / std::sqrt(var + eps);
        for (std::size_t j = 0; j < h; ++j) v[j] = (v[j] - mean) * inv * gamma[j] + beta[j];
    }
    return out;
}

}  // namespace hybridsent
