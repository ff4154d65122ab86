// Copyright (c) 2026 the celab authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <string>

#include "celab/model_config.hpp"
#include "celab/rng.hpp"
#include "celab/tape.hpp"
#include "celab/tensor.hpp"

namespace celab {

// Small conditional denoiser: conv stem, FiLM timestep modulation, one
// cross-attention layer from pixel queries (with a learned pixel-position
// table) to token-level text features, conv head, and a t-gated skip of the
// input latent. Token-level conditioning means per-token prompt
// perturbations reach the predicted noise.
struct DenoiserParams {
    Tensor conv1_w, conv1_b;    // (C,1,3,3), (C)
    Tensor temb_w, temb_b;      // (Dt,Ht), (Ht)
    Tensor film1_gw, film1_gb;  // (Ht,C), (C)
    Tensor film1_bw, film1_bb;
    Tensor pixpos;              // (H*W, C)
    Tensor wq, wk, wv, wo;      // (C,A), (d,A), (d,A), (A,C)
    Tensor conv2_w, conv2_b;    // (C,C,3,3), (C)
    Tensor film2_gw, film2_gb;
    Tensor film2_bw, film2_bb;
    Tensor conv3_w, conv3_b;    // (1,C,3,3), (1)
    Tensor gate_w, gate_b;      // (Ht,1), (1)

    static DenoiserParams init(const ModelConfig& cfg, Rng& rng);

    void for_each_array(const std::function<void(const std::string&, Tensor&)>& fn);
    void for_each_array(const std::function<void(const std::string&, const Tensor&)>& fn) const;
    int64_t param_count() const;
    uint64_t checksum() const;
};

struct DenoiserVars {
    Var conv1_w, conv1_b, temb_w, temb_b;
    Var film1_gw, film1_gb, film1_bw, film1_bb;
    Var pixpos, wq, wk, wv, wo;
    Var conv2_w, conv2_b;
    Var film2_gw, film2_gb, film2_bw, film2_bb;
    Var conv3_w, conv3_b, gate_w, gate_b;
    std::vector<Var> ordered;
};

DenoiserVars lift_denoiser(Tape& t, const DenoiserParams& p, bool trainable);

Tensor sinusoidal_timestep(int t, int dim);

// z_t (1,H,W) + text features (L,d) + timestep -> predicted noise (1,H,W).
// Every invocation (tape or plain) bumps the global denoiser call counter.
Var predict_noise_t(Tape& t, const DenoiserVars& den, Var z_t, Var text_features, int timestep,
                    const ModelConfig& cfg);

Tensor predict_noise(const DenoiserParams& p, const Tensor& z_t, const Tensor& text_features, int timestep,
                     const ModelConfig& cfg);

// Global invocation counter; the inside-out attack phase must not advance it.
uint64_t denoiser_call_count();
void reset_denoiser_call_count();

}  // namespace celab
