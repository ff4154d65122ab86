// Copyright (c) 2026 the celab authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>

#include "celab/model.hpp"
#include "celab/tape.hpp"

namespace celab {

struct ErasureConfig {
    double eta = 1.0;        // negative guidance scale
    int warmup_steps = 200;  // concept-word-only phase
    // z_t source: partial conditional rollout of the training model (the
    // shipped behavior) or direct forward noising of a zero latent (ablation).
    bool rollout_zt = true;
};

// Negative guidance target (no gradients): eps_uncond - eta * (eps_cond -
// eps_uncond), everything under the original model. The unconditional term
// goes through the same null-prompt path as any other prediction.
Tensor negative_guidance_target(const TextEncoderParams& orig_text, const DenoiserParams& denoiser,
                                const ModelConfig& cfg, const Tensor& z_t, const Tensor& tau_p, int t,
                                double eta);

// One (t, z_t) sample for the erasure expectation. Draws derive from
// (seed, "erase.t"/"erase.init"/"erase.noise", iteration).
struct EraseSample {
    int t = 0;
    Tensor z_t;
};
EraseSample draw_erase_sample(const TextEncoderParams& train_text, const DenoiserParams& denoiser,
                              const ModelConfig& cfg, const Tensor& tau_p, const ErasureConfig& ecfg,
                              uint64_t seed, uint64_t iteration);

// Tape-level erase loss at a fixed (z_t, t, target): squared error between
// the training model's conditional prediction and the detached target.
// Gradient reaches only the lifted training encoder.
Var erase_loss_t(Tape& tape, const EncoderVars& train_enc, const DenoiserVars& denoiser_vars,
                 const ModelConfig& cfg, const Tensor& tau_p, const Tensor& z_t, int t, const Tensor& target);

// Sampled scalar version (spec operation shape). Throws DivergedTraining on
// a non-finite value.
double erase_loss(const ModelPair& pair, const Tensor& tau_p, const ErasureConfig& ecfg, uint64_t seed,
                  uint64_t iteration);

// Warm-up gate: the plain concept embedding during warm-up, the attack
// prompt afterwards. Throws MissingAttack when past warm-up with attacks
// enabled but no attack result.
struct ErasurePrompt {
    Tensor tau;
    int eos_pos = 0;
};
ErasurePrompt select_erasure_prompt(int iteration, const ErasurePrompt& concept_prompt,
                                    const std::optional<ErasurePrompt>& attack_result, int warmup_steps,
                                    bool attack_enabled);

}  // namespace celab
