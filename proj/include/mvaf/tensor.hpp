#pragma once

#include <initializer_list>
#include <numeric>
#include <sstream>
#include <vector>

#include "mvaf/common.hpp"

namespace mvaf {

// Dense row-major float64 array.
struct Tensor {
    std::vector<int> shape;
    std::vector<double> data;

    Tensor() = default;
    explicit Tensor(std::vector<int> s) : shape(std::move(s)) {
        data.assign(static_cast<size_t>(count(shape)), 0.0);
    }
    Tensor(std::vector<int> s, std::vector<double> d) : shape(std::move(s)), data(std::move(d)) {
        if (static_cast<long long>(data.size()) != count(shape))
            throw ShapeError("tensor data length does not match shape " + shape_str());
    }

    static long long count(const std::vector<int>& s) {
        long long n = 1;
        for (int e : s) n *= e;
        return n;
    }

    static Tensor zeros(std::vector<int> s) { return Tensor(std::move(s)); }
    static Tensor full(std::vector<int> s, double v) {
        Tensor t(std::move(s));
        std::fill(t.data.begin(), t.data.end(), v);
        return t;
    }
    static Tensor scalar(double v) { return Tensor({1}, {v}); }

    int ndim() const { return static_cast<int>(shape.size()); }
    int dim(int i) const { return shape[static_cast<size_t>(i)]; }
    int size() const { return static_cast<int>(data.size()); }

    double& operator[](int i) { return data[static_cast<size_t>(i)]; }
    double operator[](int i) const { return data[static_cast<size_t>(i)]; }

    double& at(int i, int j) { return data[static_cast<size_t>(i) * dim(1) + j]; }
    double at(int i, int j) const { return data[static_cast<size_t>(i) * dim(1) + j]; }
    double& at(int c, int h, int w) {
        return data[(static_cast<size_t>(c) * dim(1) + h) * dim(2) + w];
    }
    double at(int c, int h, int w) const {
        return data[(static_cast<size_t>(c) * dim(1) + h) * dim(2) + w];
    }

    std::string shape_str() const {
        std::ostringstream os;
        os << "(";
        for (size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
        os << ")";
        return os.str();
    }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }
};

inline void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
    if (!a.same_shape(b))
        throw ShapeError(std::string(what) + ": shape mismatch " + a.shape_str() + " vs " +
                         b.shape_str());
}

}  // namespace mvaf
