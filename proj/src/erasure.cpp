// Copyright (c) 2026 the celab authors
// SPDX-License-Identifier: Apache-2.0

#include "celab/erasure.hpp"

#include <cmath>

namespace celab {

Tensor negative_guidance_target(const TextEncoderParams& orig_text, const DenoiserParams& denoiser,
                                const ModelConfig& cfg, const Tensor& z_t, const Tensor& tau_p, int t,
                                double eta) {
    Tensor uncond = predict_noise(denoiser, z_t, null_features(orig_text, cfg), t, cfg);
    Tensor cond = predict_noise(denoiser, z_t, encode_text(orig_text, tau_p), t, cfg);
    // eps_hat = uncond - eta * (cond - uncond)
    Tensor out = uncond;
    out.axpy_(-eta, sub(cond, uncond));
    return out;
}

EraseSample draw_erase_sample(const TextEncoderParams& train_text, const DenoiserParams& denoiser,
                              const ModelConfig& cfg, const Tensor& tau_p, const ErasureConfig& ecfg,
                              uint64_t seed, uint64_t iteration) {
    EraseSample s;
    Rng t_rng(derive_seed(seed, "erase.t", iteration));
    s.t = t_rng.uniform_int(cfg.timesteps);
    if (ecfg.rollout_zt) {
        Tensor cond = encode_text(train_text, tau_p);
        s.z_t = rollout_to(train_text, denoiser, cfg, cond, s.t, derive_seed(seed, "erase.init", iteration));
    } else {
        Rng noise_rng(derive_seed(seed, "erase.noise", iteration));
        Tensor eps = noise_rng.normal_tensor({1, cfg.latent_hw, cfg.latent_hw});
        NoiseSchedule sched(cfg);
        s.z_t = sched.add_noise(Tensor::zeros({1, cfg.latent_hw, cfg.latent_hw}), s.t, eps);
    }
    return s;
}

Var erase_loss_t(Tape& tape, const EncoderVars& train_enc, const DenoiserVars& denoiser_vars,
                 const ModelConfig& cfg, const Tensor& tau_p, const Tensor& z_t, int t, const Tensor& target) {
    Var feats = encode_text_t(tape, train_enc, tape.constant(tau_p));
    Var pred = predict_noise_t(tape, denoiser_vars, tape.constant(z_t), feats, t, cfg);
    return tape.mse_sum(pred, tape.constant(target));
}

double erase_loss(const ModelPair& pair, const Tensor& tau_p, const ErasureConfig& ecfg, uint64_t seed,
                  uint64_t iteration) {
    EraseSample s = draw_erase_sample(pair.training, pair.denoiser, pair.cfg, tau_p, ecfg, seed, iteration);
    Tensor target = negative_guidance_target(pair.original, pair.denoiser, pair.cfg, s.z_t, tau_p, s.t, ecfg.eta);
    Tape tape;
    EncoderVars enc = lift_encoder(tape, pair.training, false);
    Var loss = erase_loss_t(tape, enc, lift_denoiser(tape, pair.denoiser, false), pair.cfg, tau_p, s.z_t, s.t,
                            target);
    double v = tape.val(loss)[0];
    if (!std::isfinite(v)) throw DivergedTraining("erase loss non-finite");
    return v;
}

ErasurePrompt select_erasure_prompt(int iteration, const ErasurePrompt& concept_prompt,
                                    const std::optional<ErasurePrompt>& attack_result, int warmup_steps,
                                    bool attack_enabled) {
    if (iteration < warmup_steps || !attack_enabled) return concept_prompt;
    if (!attack_result.has_value()) throw MissingAttack();
    return *attack_result;
}

}  // namespace celab
