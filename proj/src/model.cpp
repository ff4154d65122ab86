// Copyright (c) 2026 the celab authors
// SPDX-License-Identifier: Apache-2.0

#include "celab/model.hpp"

#include <cmath>

#include "celab/optimizer.hpp"

namespace celab {

Model Model::init(const ModelConfig& cfg, uint64_t seed) {
    Model m;
    m.cfg = cfg;
    Rng text_rng(derive_seed(seed, "init.text", 0));
    Rng den_rng(derive_seed(seed, "init.denoiser", 0));
    m.text = TextEncoderParams::init(cfg, text_rng);
    m.denoiser = DenoiserParams::init(cfg, den_rng);
    return m;
}

ModelPair ModelPair::from_pretrained(const Model& m) {
    ModelPair p;
    p.cfg = m.cfg;
    p.original = m.text;
    p.training = m.text;
    p.denoiser = m.denoiser;
    return p;
}

std::vector<int> null_prompt_ids(int seq_len) {
    std::vector<int> ids(static_cast<size_t>(seq_len), Vocabulary::kPad);
    ids[0] = Vocabulary::kBos;
    ids[1] = Vocabulary::kEos;
    return ids;
}

Tensor null_features(const TextEncoderParams& text, const ModelConfig& cfg) {
    return encode_text(text, embed_tokens(null_prompt_ids(cfg.seq_len), text));
}

namespace {

// Strided descending timestep sequence for the DDIM sampler.
std::vector<int> sampler_timesteps(int total, int steps) {
    if (steps < 1 || steps > total || total % steps != 0)
        throw ConfigError("sampler steps must divide the schedule length");
    int stride = total / steps;
    std::vector<int> ts;
    for (int t = total - 1; t >= 0; t -= stride) ts.push_back(t);
    return ts;
}

Tensor ddim_step(const NoiseSchedule& sched, const Tensor& z, const Tensor& eps, int t_cur, int t_next) {
    double ab_cur = sched.alpha_bar(t_cur);
    double ab_next = t_next >= 0 ? sched.alpha_bar(t_next) : 1.0;
    Tensor x0 = z;
    x0.axpy_(-std::sqrt(1.0 - ab_cur), eps);
    x0.scale_(1.0 / std::sqrt(ab_cur));
    Tensor out = x0;
    out.scale_(std::sqrt(ab_next));
    out.axpy_(std::sqrt(1.0 - ab_next), eps);
    return out;
}

}  // namespace

Tensor sample_embedding(const TextEncoderParams& text, const DenoiserParams& den, const ModelConfig& cfg,
                        const Tensor& tau, int eos_pos, const SampleOptions& opt) {
    (void)eos_pos;  // conditioning is token-level; kept for interface symmetry
    NoiseSchedule sched(cfg);
    Rng rng(derive_seed(opt.seed, "sample.init", 0));
    Tensor z = rng.normal_tensor({1, cfg.latent_hw, cfg.latent_hw});

    bool need_cond = opt.guidance != 0.0;
    bool need_uncond = opt.guidance != 1.0;
    Tensor cond_feats, uncond_feats;
    if (need_cond) cond_feats = encode_text(text, tau);
    if (need_uncond) uncond_feats = null_features(text, cfg);

    std::vector<int> ts = sampler_timesteps(cfg.timesteps, opt.steps);
    for (size_t i = 0; i < ts.size(); ++i) {
        int t_cur = ts[i];
        int t_next = i + 1 < ts.size() ? ts[i + 1] : -1;
        Tensor eps;
        if (need_cond && need_uncond) {
            Tensor eu = predict_noise(den, z, uncond_feats, t_cur, cfg);
            Tensor ec = predict_noise(den, z, cond_feats, t_cur, cfg);
            eps = eu;
            eps.axpy_(opt.guidance, sub(ec, eu));
        } else if (need_cond) {
            eps = predict_noise(den, z, cond_feats, t_cur, cfg);
        } else {
            eps = predict_noise(den, z, uncond_feats, t_cur, cfg);
        }
        z = ddim_step(sched, z, eps, t_cur, t_next);
    }
    return z;  // identity decoder
}

Tensor sample(const TextEncoderParams& text, const DenoiserParams& den, const ModelConfig& cfg,
              const std::string& prompt, const Vocabulary& vocab, const SampleOptions& opt) {
    Tokenized toks = tokenize(prompt, vocab, cfg.seq_len);
    Tensor tau = embed_tokens(toks.ids, text);
    return sample_embedding(text, den, cfg, tau, toks.eos_pos, opt);
}

Tensor rollout_to(const TextEncoderParams& text, const DenoiserParams& den, const ModelConfig& cfg,
                  const Tensor& text_features, int t, uint64_t seed) {
    (void)text;
    NoiseSchedule sched(cfg);
    Rng rng(derive_seed(seed, "rollout.init", 0));
    Tensor z = rng.normal_tensor({1, cfg.latent_hw, cfg.latent_hw});
    for (int t_cur = cfg.timesteps - 1; t_cur > t; --t_cur) {
        Tensor eps = predict_noise(den, z, text_features, t_cur, cfg);
        z = ddim_step(sched, z, eps, t_cur, t_cur - 1);
    }
    return z;
}

PretrainResult pretrain(Model& model, const Corpus& corpus, const PretrainConfig& cfg) {
    if (corpus.empty()) throw ConfigError("pretraining corpus is empty");
    NoiseSchedule sched(model.cfg);
    Adam opt(AdamConfig{.lr = cfg.lr});
    std::vector<int> null_ids = null_prompt_ids(model.cfg.seq_len);

    PretrainResult result;
    result.loss_curve.reserve(static_cast<size_t>(cfg.steps));

    for (int step = 0; step < cfg.steps; ++step) {
        Rng draw(derive_seed(cfg.seed, "pre.draw", static_cast<uint64_t>(step)));
        Tape tape;
        EncoderVars enc = lift_encoder(tape, model.text, true);
        DenoiserVars den = lift_denoiser(tape, model.denoiser, true);

        std::vector<Var> terms;
        for (int b = 0; b < cfg.batch; ++b) {
            const CorpusEntry& e = corpus[static_cast<size_t>(draw.uniform_int(static_cast<int>(corpus.size())))];
            int t = draw.uniform_int(model.cfg.timesteps);
            Tensor eps = draw.normal_tensor({1, model.cfg.latent_hw, model.cfg.latent_hw});
            bool drop = draw.uniform() < cfg.null_prob;
            Tensor z_t = sched.add_noise(e.latent, t, eps);

            Var tau = tape.gather_rows(enc.table, drop ? null_ids : e.toks.ids);
            Var feats = encode_text_t(tape, enc, tau);
            Var pred = predict_noise_t(tape, den, tape.constant(z_t), feats, t, model.cfg);
            terms.push_back(tape.mse_sum(pred, tape.constant(eps)));
        }
        Var loss = tape.add_scalars(terms, std::vector<double>(terms.size(), 1.0 / cfg.batch));
        double loss_v = tape.val(loss)[0];
        if (!std::isfinite(loss_v)) throw DivergedTraining("pretrain step " + std::to_string(step));
        result.loss_curve.push_back(loss_v);

        tape.backward(loss);

        std::vector<Tensor*> params;
        model.text.for_each_array([&params](const std::string&, Tensor& t) { params.push_back(&t); });
        model.denoiser.for_each_array([&params](const std::string&, Tensor& t) { params.push_back(&t); });
        std::vector<const Tensor*> grads;
        for (Var v : enc.ordered) grads.push_back(&tape.grad(v));
        for (Var v : den.ordered) grads.push_back(&tape.grad(v));
        // Untouched slots (empty grads) become zeros.
        std::vector<Tensor> zero_fill;
        zero_fill.reserve(grads.size());
        for (size_t i = 0; i < grads.size(); ++i) {
            if (grads[i]->empty()) {
                zero_fill.push_back(Tensor::zeros(params[i]->shape()));
                grads[i] = &zero_fill.back();
            }
        }
        opt.step(params, grads);
    }
    return result;
}

}  // namespace celab
