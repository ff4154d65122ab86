// Copyright (c) 2026 the celab authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "celab/denoiser.hpp"
#include "celab/model_config.hpp"
#include "celab/rng.hpp"
#include "celab/text_encoder.hpp"
#include "celab/world.hpp"

namespace celab {

// Attack-loss variants exposed for the ablation grid. Full is the shipped
// objective: -H1 + H2/H1.
enum class AttackLossVariant { H2Only, NegH1, NegH1PlusH2, Full };

AttackLossVariant attack_loss_variant_from_string(const std::string& s);
std::string to_string(AttackLossVariant v);

struct AttackConfig {
    int steps = 30;           // inner steps J
    double step_size = 1e-3;  // beta
    AttackLossVariant variant = AttackLossVariant::Full;
};

// Inside-out attack state. The concept rows stay bit-identical for the
// state's lifetime; the anchor is computed once from the initial prompt
// under the original encoder and never recomputed.
struct AttackState {
    Tensor tau_full;                      // current tau_p, (L,d)
    Tensor tau_bar;                       // initial tau_p snapshot
    Tensor tau_c;                         // frozen concept rows
    std::vector<int> template_positions;  // optimized rows (template words)
    std::vector<int> concept_positions;
    Tensor anchor;  // pooled original feature of tau_bar, unit norm
    int eos_pos = 0;
    size_t template_idx = 0;
    std::string prompt;
    int step = 0;
};

AttackState init_attack(const std::string& concept_word, const TemplateLibrary& library,
                        const TextEncoderParams& orig_text, const ModelConfig& cfg, const Vocabulary& vocab,
                        Rng& rng);

// Cosine between the anchor and the training encoder's pooled feature of
// the current attack prompt.
double compute_h1(const TextEncoderParams& orig_text, const TextEncoderParams& train_text,
                  const AttackState& state, const ModelConfig& cfg);
// Cosine between the anchor and the *original* encoder's pooled feature of
// the current attack prompt (independent of the training model).
double compute_h2(const TextEncoderParams& orig_text, const AttackState& state, const ModelConfig& cfg);

// -h1 + h2/h1. Throws DegenerateH1 when |h1| < 1e-6.
double attack_loss(double h1, double h2);
double attack_loss_for(AttackLossVariant v, double h1, double h2);

struct AttackTraceStep {
    int step = 0;
    double h1 = 0.0, h2 = 0.0, loss = 0.0;
};

// Exactly J gradient steps on the template rows. Models are read-only and
// the denoiser is never invoked. Returns the final tau_p.
Tensor run_attack(AttackState& state, const TextEncoderParams& orig_text, const TextEncoderParams& train_text,
                  const ModelConfig& cfg, const AttackConfig& acfg,
                  std::vector<AttackTraceStep>* trace = nullptr);

struct OutsideInConfig {
    double delta = 1.0;       // L2 radius of the perturbation ball
    int steps = 30;
    double step_size = 0.05;
    uint64_t seed = 0;
};

// Outside-in red-team attack: projected gradient descent on a perturbed
// prompt embedding against a frozen victim, matching the original model's
// conditional prediction. The returned embedding is inside the delta ball.
Tensor outside_in_attack(const TextEncoderParams& victim_text, const DenoiserParams& denoiser,
                         const TextEncoderParams& orig_text, const ModelConfig& cfg, const Tensor& tau_c,
                         const OutsideInConfig& ocfg);

}  // namespace celab
