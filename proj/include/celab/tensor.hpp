// Copyright (c) 2026 the celab authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <vector>

#include "celab/errors.hpp"

namespace celab {

// Dense row-major tensor of doubles. Double precision keeps the
// finite-difference gradient checks well below the 1e-4 relative-error
// budget and makes every run bitwise reproducible on one build.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<int> shape);
    Tensor(std::vector<int> shape, std::vector<double> values);

    static Tensor zeros(std::vector<int> shape) { return Tensor(std::move(shape)); }
    static Tensor full(std::vector<int> shape, double v);

    const std::vector<int>& shape() const { return shape_; }
    int rank() const { return static_cast<int>(shape_.size()); }
    int dim(int i) const { return shape_[static_cast<size_t>(i)]; }
    int64_t size() const { return static_cast<int64_t>(data_.size()); }
    bool empty() const { return data_.empty(); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }

    double& operator[](int64_t i) { return data_[static_cast<size_t>(i)]; }
    double operator[](int64_t i) const { return data_[static_cast<size_t>(i)]; }

    // 2-D access, row-major.
    double& at(int r, int c) { return data_[static_cast<size_t>(r) * shape_[1] + c]; }
    double at(int r, int c) const { return data_[static_cast<size_t>(r) * shape_[1] + c]; }

    // 3-D access (channel, y, x).
    double& at3(int c, int y, int x) {
        return data_[(static_cast<size_t>(c) * shape_[1] + y) * shape_[2] + x];
    }
    double at3(int c, int y, int x) const {
        return data_[(static_cast<size_t>(c) * shape_[1] + y) * shape_[2] + x];
    }

    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }
    bool all_finite() const;

    void fill(double v);
    void add_(const Tensor& o);            // this += o
    void sub_(const Tensor& o);            // this -= o
    void scale_(double s);                 // this *= s
    void axpy_(double a, const Tensor& x); // this += a * x

private:
    std::vector<int> shape_;
    std::vector<double> data_;
};

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);

double dot_flat(const Tensor& a, const Tensor& b);
double norm2(const Tensor& a);           // L2 norm over all entries
double sum_squares(const Tensor& a);
double cosine(const Tensor& a, const Tensor& b);  // throws ZeroVector on degenerate input

// FNV-1a over the raw byte image of the data; used for freeze invariants.
uint64_t checksum_bytes(const Tensor& a);

}  // namespace celab
