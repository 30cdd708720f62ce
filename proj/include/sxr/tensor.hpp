#pragma once

#include <cassert>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

namespace sxr {

// Dense row-major n-d array of doubles. Rank is dynamic (1..4 in practice);
// indexing overloads are provided per rank and bounds-checked in debug builds.
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
        std::int64_t n = 1;
        strides_.resize(shape_.size());
        for (int i = static_cast<int>(shape_.size()) - 1; i >= 0; --i) {
            assert(shape_[static_cast<std::size_t>(i)] > 0);
            strides_[static_cast<std::size_t>(i)] = n;
            n *= shape_[static_cast<std::size_t>(i)];
        }
        data_.assign(static_cast<std::size_t>(n), 0.0);
    }

    static Tensor zeros(std::vector<int> shape) { return Tensor(std::move(shape)); }

    const std::vector<int>& shape() const { return shape_; }
    int rank() const { return static_cast<int>(shape_.size()); }
    int dim(int i) const { return shape_[static_cast<std::size_t>(i)]; }
    std::int64_t size() const { return static_cast<std::int64_t>(data_.size()); }
    std::int64_t stride(int i) const { return strides_[static_cast<std::size_t>(i)]; }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }

    double& flat(std::int64_t i) { return data_[static_cast<std::size_t>(i)]; }
    double flat(std::int64_t i) const { return data_[static_cast<std::size_t>(i)]; }

    double& operator()(int i) {
        assert(rank() == 1 && in(0, i));
        return data_[static_cast<std::size_t>(i)];
    }
    double operator()(int i) const { return const_cast<Tensor&>(*this)(i); }

    double& operator()(int i, int j) {
        assert(rank() == 2 && in(0, i) && in(1, j));
        return data_[static_cast<std::size_t>(i * strides_[0] + j)];
    }
    double operator()(int i, int j) const { return const_cast<Tensor&>(*this)(i, j); }

    double& operator()(int i, int j, int k) {
        assert(rank() == 3 && in(0, i) && in(1, j) && in(2, k));
        return data_[static_cast<std::size_t>(i * strides_[0] + j * strides_[1] + k)];
    }
    double operator()(int i, int j, int k) const { return const_cast<Tensor&>(*this)(i, j, k); }

    double& operator()(int i, int j, int k, int l) {
        assert(rank() == 4 && in(0, i) && in(1, j) && in(2, k) && in(3, l));
        return data_[static_cast<std::size_t>(i * strides_[0] + j * strides_[1] +
                                              k * strides_[2] + l)];
    }
    double operator()(int i, int j, int k, int l) const {
        return const_cast<Tensor&>(*this)(i, j, k, l);
    }

    void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

    std::string shape_string() const {
        std::string s = "(";
        for (std::size_t i = 0; i < shape_.size(); ++i) {
            if (i) s += ", ";
            s += std::to_string(shape_[i]);
        }
        return s + ")";
    }

private:
    bool in(int axis, int i) const {
        return i >= 0 && i < shape_[static_cast<std::size_t>(axis)];
    }

    std::vector<int> shape_;
    std::vector<std::int64_t> strides_;
    std::vector<double> data_;
};

} // namespace sxr
