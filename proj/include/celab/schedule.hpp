// Copyright (c) 2026 the celab authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include "celab/model_config.hpp"
#include "celab/tensor.hpp"

namespace celab {

// Linear-beta DDPM schedule. Convention: noise applies from the first step,
// so alpha_bar(0) = 1 - beta(0); alpha_bar is strictly decreasing in t.
class NoiseSchedule {
public:
    NoiseSchedule(int timesteps, double beta_min, double beta_max);
    explicit NoiseSchedule(const ModelConfig& cfg) : NoiseSchedule(cfg.timesteps, cfg.beta_min, cfg.beta_max) {}

    int timesteps() const { return static_cast<int>(betas_.size()); }
    double beta(int t) const { return betas_[static_cast<size_t>(t)]; }
    double alpha_bar(int t) const { return alpha_bars_[static_cast<size_t>(t)]; }

    // z_t = sqrt(alpha_bar_t) z0 + sqrt(1 - alpha_bar_t) eps
    Tensor add_noise(const Tensor& z0, int t, const Tensor& eps) const;

private:
    std::vector<double> betas_;
    std::vector<double> alpha_bars_;
};

}  // namespace celab
