// Copyright (c) 2026 the celab authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <vector>

#include "celab/tensor.hpp"

namespace celab {

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// Adam with bias correction. Slot order is fixed by the first step() call;
// moments are exposed so checkpoints can resume exactly.
class Adam {
public:
    explicit Adam(AdamConfig cfg) : cfg_(cfg) {}

    void set_lr(double lr) { cfg_.lr = lr; }
    double lr() const { return cfg_.lr; }

    void step(const std::vector<Tensor*>& params, const std::vector<const Tensor*>& grads);

    int64_t steps_done() const { return t_; }
    std::vector<Tensor>& moments_m() { return m_; }
    std::vector<Tensor>& moments_v() { return v_; }
    void restore(std::vector<Tensor> m, std::vector<Tensor> v, int64_t t);

private:
    AdamConfig cfg_;
    std::vector<Tensor> m_, v_;
    int64_t t_ = 0;
};

// Scales grads in place so the global L2 norm is at most max_norm.
// Returns the scale applied (1.0 when no clipping happened).
double clip_global_norm(const std::vector<Tensor*>& grads, double max_norm);

}  // namespace celab
