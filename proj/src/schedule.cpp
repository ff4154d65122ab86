// Copyright (c) 2026 the celab authors
// SPDX-License-Identifier: Apache-2.0

#include "celab/schedule.hpp"

#include <cmath>

namespace celab {

NoiseSchedule::NoiseSchedule(int timesteps, double beta_min, double beta_max) {
    betas_.resize(static_cast<size_t>(timesteps));
    alpha_bars_.resize(static_cast<size_t>(timesteps));
    double acc = 1.0;
    for (int t = 0; t < timesteps; ++t) {
        double b = timesteps > 1 ? beta_min + (beta_max - beta_min) * t / (timesteps - 1) : beta_min;
        betas_[static_cast<size_t>(t)] = b;
        acc *= 1.0 - b;
        alpha_bars_[static_cast<size_t>(t)] = acc;
    }
}

Tensor NoiseSchedule::add_noise(const Tensor& z0, int t, const Tensor& eps) const {
    double ab = alpha_bar(t);
    double s0 = std::sqrt(ab);
    double s1 = std::sqrt(1.0 - ab);
    Tensor out = z0;
    out.scale_(s0);
    out.axpy_(s1, eps);
    return out;
}

}  // namespace celab
