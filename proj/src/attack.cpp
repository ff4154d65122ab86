// Copyright (c) 2026 the celab authors
// SPDX-License-Identifier: Apache-2.0

#include "celab/attack.hpp"

#include <cmath>

#include "celab/model.hpp"

namespace celab {

AttackLossVariant attack_loss_variant_from_string(const std::string& s) {
    if (s == "h2") return AttackLossVariant::H2Only;
    if (s == "neg_h1") return AttackLossVariant::NegH1;
    if (s == "neg_h1_h2") return AttackLossVariant::NegH1PlusH2;
    if (s == "full") return AttackLossVariant::Full;
    throw ConfigError("unknown attack loss variant: " + s + " (h2|neg_h1|neg_h1_h2|full)");
}

std::string to_string(AttackLossVariant v) {
    switch (v) {
        case AttackLossVariant::H2Only: return "h2";
        case AttackLossVariant::NegH1: return "neg_h1";
        case AttackLossVariant::NegH1PlusH2: return "neg_h1_h2";
        case AttackLossVariant::Full: return "full";
    }
    return "?";
}

AttackState init_attack(const std::string& concept_word, const TemplateLibrary& library,
                        const TextEncoderParams& orig_text, const ModelConfig& cfg, const Vocabulary& vocab,
                        Rng& rng) {
    if (!vocab.contains(concept_word)) throw UnknownToken(concept_word);
    AttackState st;
    st.template_idx = static_cast<size_t>(rng.uniform_int(static_cast<int>(library.size())));
    st.prompt = library.instantiate(st.template_idx, concept_word);
    Tokenized toks = tokenize(st.prompt, vocab, cfg.seq_len);
    st.eos_pos = toks.eos_pos;
    st.tau_full = embed_tokens(toks.ids, orig_text);
    st.tau_bar = st.tau_full;

    int concept_id = vocab.id(concept_word);
    for (int i = 1; i < toks.eos_pos; ++i) {
        if (toks.ids[static_cast<size_t>(i)] == concept_id)
            st.concept_positions.push_back(i);
        else
            st.template_positions.push_back(i);
    }
    if (st.concept_positions.empty()) throw Error("template lost the concept slot: " + st.prompt);

    int d = cfg.embed_dim;
    st.tau_c = Tensor({static_cast<int>(st.concept_positions.size()), d});
    for (size_t i = 0; i < st.concept_positions.size(); ++i)
        for (int j = 0; j < d; ++j) st.tau_c.at(static_cast<int>(i), j) = st.tau_full.at(st.concept_positions[i], j);

    st.anchor = pooled_feature(orig_text, st.tau_bar, st.eos_pos);
    return st;
}

double compute_h1(const TextEncoderParams& orig_text, const TextEncoderParams& train_text,
                  const AttackState& state, const ModelConfig& cfg) {
    (void)orig_text;
    (void)cfg;
    Tensor f_n = pooled_feature(train_text, state.tau_full, state.eos_pos);
    return dot_flat(state.anchor, f_n);
}

double compute_h2(const TextEncoderParams& orig_text, const AttackState& state, const ModelConfig& cfg) {
    (void)cfg;
    Tensor f_o = pooled_feature(orig_text, state.tau_full, state.eos_pos);
    return dot_flat(state.anchor, f_o);
}

double attack_loss(double h1, double h2) {
    if (std::abs(h1) < 1e-6) throw DegenerateH1();
    return -h1 + h2 / h1;
}

double attack_loss_for(AttackLossVariant v, double h1, double h2) {
    switch (v) {
        case AttackLossVariant::H2Only: return h2;
        case AttackLossVariant::NegH1: return -h1;
        case AttackLossVariant::NegH1PlusH2: return -h1 + h2;
        case AttackLossVariant::Full: return attack_loss(h1, h2);
    }
    throw Error("bad attack loss variant");
}

namespace {

Tensor template_rows(const AttackState& st, int d) {
    Tensor rows({static_cast<int>(st.template_positions.size()), d});
    for (size_t i = 0; i < st.template_positions.size(); ++i)
        for (int j = 0; j < d; ++j) rows.at(static_cast<int>(i), j) = st.tau_full.at(st.template_positions[i], j);
    return rows;
}

}  // namespace

Tensor run_attack(AttackState& state, const TextEncoderParams& orig_text, const TextEncoderParams& train_text,
                  const ModelConfig& cfg, const AttackConfig& acfg, std::vector<AttackTraceStep>* trace) {
    int d = cfg.embed_dim;
    bool needs_h2 = acfg.variant != AttackLossVariant::NegH1;
    for (int j = 0; j < acfg.steps; ++j) {
        Tape tape;
        Var tau_t = tape.leaf(template_rows(state, d));
        Var tau_p = tape.scatter_rows(tape.constant(state.tau_full), tau_t, state.template_positions);
        Var anchor = tape.constant(state.anchor);

        EncoderVars enc_n = lift_encoder(tape, train_text, false);
        Var f_n = pool_t(tape, encode_text_t(tape, enc_n, tau_p), state.eos_pos);
        Var h1 = tape.dot(anchor, f_n);

        Var h2{};
        if (needs_h2) {
            EncoderVars enc_o = lift_encoder(tape, orig_text, false);
            Var f_o = pool_t(tape, encode_text_t(tape, enc_o, tau_p), state.eos_pos);
            h2 = tape.dot(anchor, f_o);
        }

        Var loss{};
        switch (acfg.variant) {
            case AttackLossVariant::H2Only:
                loss = h2;
                break;
            case AttackLossVariant::NegH1:
                loss = tape.neg(h1);
                break;
            case AttackLossVariant::NegH1PlusH2:
                loss = tape.add_scalars({h1, h2}, {-1.0, 1.0});
                break;
            case AttackLossVariant::Full: {
                if (std::abs(tape.val(h1)[0]) < 1e-6) throw DegenerateH1();
                Var ratio = tape.div_scalar(h2, h1);
                loss = tape.add_scalars({h1, ratio}, {-1.0, 1.0});
                break;
            }
        }

        if (trace) {
            AttackTraceStep ts;
            ts.step = state.step;
            ts.h1 = tape.val(h1)[0];
            ts.h2 = needs_h2 ? tape.val(h2)[0] : 0.0;
            ts.loss = tape.val(loss)[0];
            trace->push_back(ts);
        }

        tape.backward(loss);
        const Tensor& g = tape.grad(tau_t);
        if (!g.empty()) {
            for (size_t i = 0; i < state.template_positions.size(); ++i)
                for (int c = 0; c < d; ++c)
                    state.tau_full.at(state.template_positions[i], c) -=
                        acfg.step_size * g.at(static_cast<int>(i), c);
        }
        ++state.step;
    }
    return state.tau_full;
}

Tensor outside_in_attack(const TextEncoderParams& victim_text, const DenoiserParams& denoiser,
                         const TextEncoderParams& orig_text, const ModelConfig& cfg, const Tensor& tau_c,
                         const OutsideInConfig& ocfg) {
    Rng rng(derive_seed(ocfg.seed, "oia.draw", 0));
    // Initial perturbation of L2 norm exactly delta.
    Tensor tau_prime = tau_c;
    if (ocfg.delta > 0.0) {
        Tensor g = rng.normal_tensor(tau_c.shape());
        double n = norm2(g);
        if (n > 0.0) tau_prime.axpy_(ocfg.delta / n, g);
    }

    // One (t, z_t) draw per attack; the victim's own sampler produces z_t
    // from the concept prompt, gradients do not flow through generation.
    int t = rng.uniform_int(cfg.timesteps);
    Tensor victim_cond = encode_text(victim_text, tau_c);
    Tensor z_t = rollout_to(victim_text, denoiser, cfg, victim_cond, t, derive_seed(ocfg.seed, "oia.init", 0));
    Tensor target = predict_noise(denoiser, z_t, encode_text(orig_text, tau_c), t, cfg);

    auto project = [&](Tensor& tp) {
        Tensor diff = sub(tp, tau_c);
        double n = norm2(diff);
        if (n > ocfg.delta) {
            tp = tau_c;
            if (ocfg.delta > 0.0) tp.axpy_(ocfg.delta / n, diff);
        }
    };
    project(tau_prime);

    for (int s = 0; s < ocfg.steps; ++s) {
        Tape tape;
        Var tp = tape.leaf(tau_prime);
        EncoderVars enc = lift_encoder(tape, victim_text, false);
        DenoiserVars den = lift_denoiser(tape, denoiser, false);
        Var feats = encode_text_t(tape, enc, tp);
        Var pred = predict_noise_t(tape, den, tape.constant(z_t), feats, t, cfg);
        Var loss = tape.mse_sum(pred, tape.constant(target));
        tape.backward(loss);
        const Tensor& g = tape.grad(tp);
        if (!g.empty()) tau_prime.axpy_(-ocfg.step_size, g);
        project(tau_prime);
    }
    return tau_prime;
}

}  // namespace celab
