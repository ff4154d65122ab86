// Copyright (c) 2026 the celab authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include "celab/model.hpp"
#include "celab/tape.hpp"

namespace celab {

struct RetentionConfig {
    int b_retain = 32;     // clamped to the retain-set size at toy scale
    int k = 4;             // local noise-consistency subset size
    double gamma_t = 0.4;  // graph loss weight
    double gamma_v = 1.0;  // image loss weight
};

// b distinct indices into the retain set, uniform without replacement.
// Throws BatchTooLarge.
std::vector<int> sample_retain_batch(const RetainSet& set, int b, Rng& rng);

// Embedded retain prompts for a sampled batch (frozen shared embedding, so
// both encoders see the same tau_r input).
struct RetainBatch {
    std::vector<Tensor> taus;
    std::vector<int> eos;
    std::vector<int> indices;
};
RetainBatch embed_retain_batch(const RetainSet& set, const std::vector<int>& indices,
                               const TextEncoderParams& embedding_source);

// Gram matrix of pooled features, (b,b). Unit-norm pooling makes entries
// cosine similarities: symmetric, unit diagonal.
Tensor semantic_graph(const TextEncoderParams& text, const RetainBatch& batch);
Var semantic_graph_t(Tape& tape, const EncoderVars& enc, const RetainBatch& batch);

// Sum of squared entrywise differences. Throws ShapeMismatch.
double graph_loss(const Tensor& m_o, const Tensor& m_n);
Var graph_loss_t(Tape& tape, Var m_n, const Tensor& m_o);

// Per-prompt cosine between the two encoders' pooled features (H3).
std::vector<double> semantic_drift(const TextEncoderParams& orig_text, const TextEncoderParams& train_text,
                                   const RetainBatch& batch);

// Indices of the k smallest entries, ties broken by ascending index.
std::vector<int> select_topk(const std::vector<double>& h3, int k);

// Shared t, per-prompt forward-noised zero latents for the selected subset.
struct ImageLossSample {
    int t = 0;
    std::vector<Tensor> z_ts;  // one per selected prompt
};
ImageLossSample draw_image_loss_sample(const ModelConfig& cfg, int n_selected, uint64_t seed,
                                       uint64_t iteration);

// Mean over selected prompts of the squared prediction gap between the two
// models. Returns a constant 0 for an empty selection.
Var image_loss_t(Tape& tape, const EncoderVars& train_enc, const DenoiserVars& denoiser_vars,
                 const TextEncoderParams& orig_text, const DenoiserParams& denoiser, const ModelConfig& cfg,
                 const RetainBatch& batch, const std::vector<int>& selected, const ImageLossSample& sample);
double image_loss(const ModelPair& pair, const RetainBatch& batch, const std::vector<int>& selected,
                  const ImageLossSample& sample);

}  // namespace celab
