#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <vector>

#include "viti/error.hpp"

namespace viti {

// Dense row-major tensor of doubles. Everything in this project is desk-scale,
// so a single scalar type keeps the gradient checks in float64 throughout.
struct Tensor {
    std::vector<int64_t> shape;
    std::vector<double> data;

    Tensor() = default;
    explicit Tensor(std::vector<int64_t> s) : shape(std::move(s)), data(numel_of(shape), 0.0) {}

    static int64_t numel_of(const std::vector<int64_t>& s) {
        int64_t n = 1;
        for (int64_t d : s) {
            if (d < 0)
                throw ContractError("tensor: negative dim");
            n *= d;
        }
        return n;
    }

    static Tensor zeros(std::vector<int64_t> s) { return Tensor(std::move(s)); }

    static Tensor full(std::vector<int64_t> s, double v) {
        Tensor t(std::move(s));
        std::fill(t.data.begin(), t.data.end(), v);
        return t;
    }

    static Tensor scalar(double v) {
        Tensor t({1});
        t.data[0] = v;
        return t;
    }

    static Tensor from(std::vector<int64_t> s, std::vector<double> d) {
        Tensor t;
        t.shape = std::move(s);
        if (numel_of(t.shape) != static_cast<int64_t>(d.size()))
            throw ContractError("tensor: data size does not match shape");
        t.data = std::move(d);
        return t;
    }

    int64_t numel() const { return static_cast<int64_t>(data.size()); }
    int rank() const { return static_cast<int>(shape.size()); }
    int64_t dim(int i) const { return shape[static_cast<size_t>(i)]; }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }

    double& operator[](int64_t i) { return data[static_cast<size_t>(i)]; }
    double operator[](int64_t i) const { return data[static_cast<size_t>(i)]; }

    // rank-2 access
    double& at(int64_t i, int64_t j) { return data[static_cast<size_t>(i * shape[1] + j)]; }
    double at(int64_t i, int64_t j) const { return data[static_cast<size_t>(i * shape[1] + j)]; }

    // rank-3 access
    double& at(int64_t i, int64_t j, int64_t k) {
        return data[static_cast<size_t>((i * shape[1] + j) * shape[2] + k)];
    }
    double at(int64_t i, int64_t j, int64_t k) const {
        return data[static_cast<size_t>((i * shape[1] + j) * shape[2] + k)];
    }

    // rank-4 access
    double& at(int64_t i, int64_t j, int64_t k, int64_t l) {
        return data[static_cast<size_t>(((i * shape[1] + j) * shape[2] + k) * shape[3] + l)];
    }
    double at(int64_t i, int64_t j, int64_t k, int64_t l) const {
        return data[static_cast<size_t>(((i * shape[1] + j) * shape[2] + k) * shape[3] + l)];
    }

    bool all_finite() const {
        for (double v : data)
            if (!std::isfinite(v))
                return false;
        return true;
    }

    Tensor reshaped(std::vector<int64_t> s) const {
        if (numel_of(s) != numel())
            throw ContractError("tensor: reshape changes element count");
        Tensor t;
        t.shape = std::move(s);
        t.data = data;
        return t;
    }
};

inline void check_same_shape(const Tensor& a, const Tensor& b, const char* what) {
    if (!a.same_shape(b))
        throw AlignmentError(std::string(what) + ": shape mismatch");
}

inline Tensor add(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "add");
    Tensor r = a;
    for (int64_t i = 0; i < r.numel(); ++i)
        r[i] += b[i];
    return r;
}

inline Tensor sub(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "sub");
    Tensor r = a;
    for (int64_t i = 0; i < r.numel(); ++i)
        r[i] -= b[i];
    return r;
}

inline Tensor mul(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "mul");
    Tensor r = a;
    for (int64_t i = 0; i < r.numel(); ++i)
        r[i] *= b[i];
    return r;
}

inline Tensor scaled(const Tensor& a, double s) {
    Tensor r = a;
    for (double& v : r.data)
        v *= s;
    return r;
}

inline double sum(const Tensor& a) {
    double s = 0.0;
    for (double v : a.data)
        s += v;
    return s;
}

inline double mean(const Tensor& a) {
    if (a.numel() == 0)
        throw ContractError("mean of empty tensor");
    return sum(a) / static_cast<double>(a.numel());
}

inline double max_abs_diff(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "max_abs_diff");
    double m = 0.0;
    for (int64_t i = 0; i < a.numel(); ++i)
        m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

}  // namespace viti
