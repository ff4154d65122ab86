// Copyright (c) 2026 the celab authors
// SPDX-License-Identifier: Apache-2.0

#include "celab/retention.hpp"

#include <algorithm>
#include <numeric>

namespace celab {

std::vector<int> sample_retain_batch(const RetainSet& set, int b, Rng& rng) {
    int n = static_cast<int>(set.prompts.size());
    if (b > n) throw BatchTooLarge(std::to_string(b) + " > retain set size " + std::to_string(n));
    if (b < 0) throw ConfigError("negative retain batch");
    return rng.sample_without_replacement(n, b);
}

RetainBatch embed_retain_batch(const RetainSet& set, const std::vector<int>& indices,
                               const TextEncoderParams& embedding_source) {
    RetainBatch batch;
    batch.indices = indices;
    for (int idx : indices) {
        const Tokenized& toks = set.tokenized[static_cast<size_t>(idx)];
        batch.taus.push_back(embed_tokens(toks.ids, embedding_source));
        batch.eos.push_back(toks.eos_pos);
    }
    return batch;
}

Var semantic_graph_t(Tape& tape, const EncoderVars& enc, const RetainBatch& batch) {
    if (batch.taus.empty()) throw ConfigError("semantic graph over an empty batch");
    std::vector<Var> pooled;
    for (size_t i = 0; i < batch.taus.size(); ++i) {
        Var feats = encode_text_t(tape, enc, tape.constant(batch.taus[i]));
        pooled.push_back(pool_t(tape, feats, batch.eos[i]));
    }
    Var f = tape.stack_rows(pooled);
    return tape.matmul_nt(f, f);
}

Tensor semantic_graph(const TextEncoderParams& text, const RetainBatch& batch) {
    Tape tape;
    EncoderVars enc = lift_encoder(tape, text, false);
    return tape.val(semantic_graph_t(tape, enc, batch));
}

double graph_loss(const Tensor& m_o, const Tensor& m_n) {
    if (!m_o.same_shape(m_n)) throw ShapeMismatch("graph_loss");
    double s = 0.0;
    for (int64_t i = 0; i < m_o.size(); ++i) {
        double d = m_o[i] - m_n[i];
        s += d * d;
    }
    return s;
}

Var graph_loss_t(Tape& tape, Var m_n, const Tensor& m_o) {
    return tape.mse_sum(m_n, tape.constant(m_o));
}

std::vector<double> semantic_drift(const TextEncoderParams& orig_text, const TextEncoderParams& train_text,
                                   const RetainBatch& batch) {
    std::vector<double> h3;
    h3.reserve(batch.taus.size());
    for (size_t i = 0; i < batch.taus.size(); ++i) {
        Tensor f_o = pooled_feature(orig_text, batch.taus[i], batch.eos[i]);
        Tensor f_n = pooled_feature(train_text, batch.taus[i], batch.eos[i]);
        h3.push_back(dot_flat(f_o, f_n));
    }
    return h3;
}

std::vector<int> select_topk(const std::vector<double>& h3, int k) {
    if (k > static_cast<int>(h3.size())) throw ConfigError("top-k larger than batch");
    std::vector<int> idx(h3.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(),
                     [&h3](int a, int b) { return h3[static_cast<size_t>(a)] < h3[static_cast<size_t>(b)]; });
    idx.resize(static_cast<size_t>(k));
    std::sort(idx.begin(), idx.end());
    return idx;
}

ImageLossSample draw_image_loss_sample(const ModelConfig& cfg, int n_selected, uint64_t seed,
                                       uint64_t iteration) {
    ImageLossSample s;
    Rng t_rng(derive_seed(seed, "image.t", iteration));
    s.t = t_rng.uniform_int(cfg.timesteps);
    Rng noise_rng(derive_seed(seed, "image.noise", iteration));
    NoiseSchedule sched(cfg);
    Tensor zeros = Tensor::zeros({1, cfg.latent_hw, cfg.latent_hw});
    for (int i = 0; i < n_selected; ++i) {
        Tensor eps = noise_rng.normal_tensor({1, cfg.latent_hw, cfg.latent_hw});
        s.z_ts.push_back(sched.add_noise(zeros, s.t, eps));
    }
    return s;
}

Var image_loss_t(Tape& tape, const EncoderVars& train_enc, const DenoiserVars& denoiser_vars,
                 const TextEncoderParams& orig_text, const DenoiserParams& denoiser, const ModelConfig& cfg,
                 const RetainBatch& batch, const std::vector<int>& selected, const ImageLossSample& sample) {
    if (selected.empty()) return tape.constant(Tensor::zeros({1}));
    std::vector<Var> terms;
    for (size_t i = 0; i < selected.size(); ++i) {
        const Tensor& tau = batch.taus[static_cast<size_t>(selected[i])];
        const Tensor& z_t = sample.z_ts[i];
        Tensor eps_o = predict_noise(denoiser, z_t, encode_text(orig_text, tau), sample.t, cfg);
        Var feats = encode_text_t(tape, train_enc, tape.constant(tau));
        Var eps_n = predict_noise_t(tape, denoiser_vars, tape.constant(z_t), feats, sample.t, cfg);
        terms.push_back(tape.mse_sum(eps_n, tape.constant(eps_o)));
    }
    return tape.add_scalars(terms, std::vector<double>(terms.size(), 1.0 / static_cast<double>(terms.size())));
}

double image_loss(const ModelPair& pair, const RetainBatch& batch, const std::vector<int>& selected,
                  const ImageLossSample& sample) {
    Tape tape;
    EncoderVars enc = lift_encoder(tape, pair.training, false);
    DenoiserVars den = lift_denoiser(tape, pair.denoiser, false);
    Var v = image_loss_t(tape, enc, den, pair.original, pair.denoiser, pair.cfg, batch, selected, sample);
    return tape.val(v)[0];
}

}  // namespace celab
