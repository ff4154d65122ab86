// Copyright (c) 2026 the celab authors
// SPDX-License-Identifier: Apache-2.0

#include "celab/optimizer.hpp"

#include <cmath>

namespace celab {

void Adam::step(const std::vector<Tensor*>& params, const std::vector<const Tensor*>& grads) {
    if (params.size() != grads.size()) throw ShapeMismatch("adam step lists");
    if (m_.empty()) {
        for (Tensor* p : params) {
            m_.push_back(Tensor::zeros(p->shape()));
            v_.push_back(Tensor::zeros(p->shape()));
        }
    }
    if (m_.size() != params.size()) throw ShapeMismatch("adam state slots");
    ++t_;
    double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (size_t i = 0; i < params.size(); ++i) {
        Tensor& p = *params[i];
        const Tensor& g = *grads[i];
        Tensor& m = m_[i];
        Tensor& v = v_[i];
        for (int64_t j = 0; j < p.size(); ++j) {
            m[j] = cfg_.beta1 * m[j] + (1.0 - cfg_.beta1) * g[j];
            v[j] = cfg_.beta2 * v[j] + (1.0 - cfg_.beta2) * g[j] * g[j];
            double mh = m[j] / bc1;
            double vh = v[j] / bc2;
            p[j] -= cfg_.lr * mh / (std::sqrt(vh) + cfg_.eps);
        }
    }
}

void Adam::restore(std::vector<Tensor> m, std::vector<Tensor> v, int64_t t) {
    m_ = std::move(m);
    v_ = std::move(v);
    t_ = t;
}

double clip_global_norm(const std::vector<Tensor*>& grads, double max_norm) {
    double sq = 0.0;
    for (const Tensor* g : grads) sq += sum_squares(*g);
    double n = std::sqrt(sq);
    if (n <= max_norm || n == 0.0) return 1.0;
    double s = max_norm / n;
    for (Tensor* g : grads) g->scale_(s);
    return s;
}

}  // namespace celab
