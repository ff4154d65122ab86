// Copyright (c) 2026 the celab authors
// SPDX-License-Identifier: Apache-2.0

#include "celab/tensor.hpp"

#include <cmath>
#include <cstring>

namespace celab {

namespace {
int64_t shape_size(const std::vector<int>& shape) {
    int64_t n = 1;
    for (int d : shape) n *= d;
    return n;
}
}  // namespace

Tensor::Tensor(std::vector<int> shape)
    : shape_(std::move(shape)), data_(static_cast<size_t>(shape_size(shape_)), 0.0) {}

Tensor::Tensor(std::vector<int> shape, std::vector<double> values) : shape_(std::move(shape)), data_(std::move(values)) {
    if (shape_size(shape_) != static_cast<int64_t>(data_.size()))
        throw ShapeMismatch("tensor init data does not match shape");
}

Tensor Tensor::full(std::vector<int> shape, double v) {
    Tensor t(std::move(shape));
    t.fill(v);
    return t;
}

bool Tensor::all_finite() const {
    for (double v : data_)
        if (!std::isfinite(v)) return false;
    return true;
}

void Tensor::fill(double v) {
    for (double& x : data_) x = v;
}

void Tensor::add_(const Tensor& o) {
    if (!same_shape(o)) throw ShapeMismatch("add_");
    for (size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
}

void Tensor::sub_(const Tensor& o) {
    if (!same_shape(o)) throw ShapeMismatch("sub_");
    for (size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
}

void Tensor::scale_(double s) {
    for (double& x : data_) x *= s;
}

void Tensor::axpy_(double a, const Tensor& x) {
    if (!same_shape(x)) throw ShapeMismatch("axpy_");
    for (size_t i = 0; i < data_.size(); ++i) data_[i] += a * x.data_[i];
}

Tensor add(const Tensor& a, const Tensor& b) {
    Tensor out = a;
    out.add_(b);
    return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
    Tensor out = a;
    out.sub_(b);
    return out;
}

Tensor scale(const Tensor& a, double s) {
    Tensor out = a;
    out.scale_(s);
    return out;
}

double dot_flat(const Tensor& a, const Tensor& b) {
    if (a.size() != b.size()) throw ShapeMismatch("dot_flat");
    double s = 0.0;
    for (int64_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double norm2(const Tensor& a) { return std::sqrt(sum_squares(a)); }

double sum_squares(const Tensor& a) {
    double s = 0.0;
    for (int64_t i = 0; i < a.size(); ++i) s += a[i] * a[i];
    return s;
}

double cosine(const Tensor& a, const Tensor& b) {
    double na = norm2(a);
    double nb = norm2(b);
    if (na < 1e-12 || nb < 1e-12) throw ZeroVector("cosine");
    return dot_flat(a, b) / (na * nb);
}

uint64_t checksum_bytes(const Tensor& a) {
    uint64_t h = 1469598103934665603ull;
    const unsigned char* p = reinterpret_cast<const unsigned char*>(a.data());
    size_t n = static_cast<size_t>(a.size()) * sizeof(double);
    for (size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 1099511628211ull;
    }
    return h;
}

}  // namespace celab
