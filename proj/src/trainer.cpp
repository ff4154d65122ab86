// Copyright (c) 2026 the celab authors
// SPDX-License-Identifier: Apache-2.0

#include "celab/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <json.hpp>

#include "celab/checkpoint.hpp"

namespace celab {

std::string TrainRecord::to_json_line() const {
    nlohmann::ordered_json j;
    j["iter"] = iteration;
    j["l_erase"] = l_erase;
    j["l_graph"] = l_graph;
    j["l_image"] = l_image;
    j["total"] = total;
    if (h1)
        j["h1"] = *h1;
    else
        j["h1"] = nullptr;
    if (h2)
        j["h2"] = *h2;
    else
        j["h2"] = nullptr;
    if (min_h3)
        j["min_h3"] = *min_h3;
    else
        j["min_h3"] = nullptr;
    j["wall_ms"] = wall_ms;
    j["denoiser_calls"] = denoiser_calls;
    j["attack_denoiser_calls"] = attack_denoiser_calls;
    j["clipped"] = clipped;
    return j.dump();
}

double total_loss(double l_erase, double l_graph, double l_image, double gamma_t, double gamma_v) {
    return l_erase + gamma_t * l_graph + gamma_v * l_image;
}

TrainRecord train_step(ModelPair& pair, const std::string& concept_word, const World& world,
                       const RetainSet& retain, const TrainConfig& cfg, int iteration, Adam& opt,
                       std::vector<AttackTraceStep>* attack_trace) {
    auto start = std::chrono::steady_clock::now();
    uint64_t calls_at_start = denoiser_call_count();
    TrainRecord rec;
    rec.iteration = iteration;

    // Concept prompt: the bare concept word through the frozen original
    // embedding substrate.
    Tokenized concept_toks = tokenize(concept_word, world.vocab, pair.cfg.seq_len);
    ErasurePrompt concept_prompt{embed_tokens(concept_toks.ids, pair.original), concept_toks.eos_pos};

    // Self-check phase: fresh template, J gradient steps on the template
    // rows, training model frozen. The denoiser is never touched here.
    std::optional<ErasurePrompt> attack_result;
    bool attack_now = cfg.attack_enabled && iteration >= cfg.warmup_steps;
    if (attack_now) {
        uint64_t calls_before_attack = denoiser_call_count();
        Rng attack_rng(derive_seed(cfg.seed, "attack.tmpl", static_cast<uint64_t>(iteration)));
        AttackState state;
        for (int tries = 0;; ++tries) {
            state = init_attack(concept_word, world.templates, pair.original, pair.cfg, world.vocab, attack_rng);
            try {
                run_attack(state, pair.original, pair.training, pair.cfg, cfg.attack, attack_trace);
                break;
            } catch (const DegenerateH1&) {
                if (tries >= 1) throw;  // resample once, then surface
            }
        }
        rec.h1 = compute_h1(pair.original, pair.training, state, pair.cfg);
        rec.h2 = compute_h2(pair.original, state, pair.cfg);
        rec.attack_denoiser_calls = denoiser_call_count() - calls_before_attack;
        attack_result = ErasurePrompt{state.tau_full, state.eos_pos};
    }

    ErasurePrompt tau_p =
        select_erasure_prompt(iteration, concept_prompt, attack_result, cfg.warmup_steps, cfg.attack_enabled);

    // Self-erasure phase: sample (t, z_t), build the detached negative
    // guidance target, then assemble the composite loss on one tape.
    EraseSample es = draw_erase_sample(pair.training, pair.denoiser, pair.cfg, tau_p.tau, cfg.erasure, cfg.seed,
                                       static_cast<uint64_t>(iteration));
    Tensor target =
        negative_guidance_target(pair.original, pair.denoiser, pair.cfg, es.z_t, tau_p.tau, es.t, cfg.erasure.eta);

    bool graph_on = cfg.retention.gamma_t != 0.0;
    bool image_on = cfg.retention.gamma_v != 0.0 && cfg.retention.k > 0;

    RetainBatch batch;
    std::vector<int> selected;
    ImageLossSample img_sample;
    Tensor m_o;
    if (graph_on || image_on) {
        int b = std::min(cfg.retention.b_retain, static_cast<int>(retain.prompts.size()));
        Rng batch_rng(derive_seed(cfg.seed, "retain.batch", static_cast<uint64_t>(iteration)));
        batch = embed_retain_batch(retain, sample_retain_batch(retain, b, batch_rng), pair.original);
        std::vector<double> h3 = semantic_drift(pair.original, pair.training, batch);
        rec.min_h3 = *std::min_element(h3.begin(), h3.end());
        if (graph_on) m_o = semantic_graph(pair.original, batch);
        if (image_on) {
            selected = select_topk(h3, std::min(cfg.retention.k, static_cast<int>(h3.size())));
            img_sample = draw_image_loss_sample(pair.cfg, static_cast<int>(selected.size()), cfg.seed,
                                                static_cast<uint64_t>(iteration));
        }
    }

    Tape tape;
    EncoderVars enc_n = lift_encoder(tape, pair.training, true);
    DenoiserVars den = lift_denoiser(tape, pair.denoiser, false);

    Var l_erase = erase_loss_t(tape, enc_n, den, pair.cfg, tau_p.tau, es.z_t, es.t, target);
    std::vector<Var> terms = {l_erase};
    std::vector<double> weights = {1.0};
    rec.l_erase = tape.val(l_erase)[0];
    if (graph_on) {
        Var l_graph = graph_loss_t(tape, semantic_graph_t(tape, enc_n, batch), m_o);
        rec.l_graph = tape.val(l_graph)[0];
        terms.push_back(l_graph);
        weights.push_back(cfg.retention.gamma_t);
    }
    if (image_on) {
        Var l_image =
            image_loss_t(tape, enc_n, den, pair.original, pair.denoiser, pair.cfg, batch, selected, img_sample);
        rec.l_image = tape.val(l_image)[0];
        terms.push_back(l_image);
        weights.push_back(cfg.retention.gamma_v);
    }
    Var loss = tape.add_scalars(terms, weights);
    rec.total = tape.val(loss)[0];
    if (!std::isfinite(rec.total)) throw DivergedTraining("iteration " + std::to_string(iteration));

    tape.backward(loss);

    std::vector<Tensor*> params;
    pair.training.for_each_array([&params](const std::string&, Tensor& t) { params.push_back(&t); });
    std::vector<Tensor> grads(params.size());
    std::vector<Tensor*> grad_ptrs;
    for (size_t i = 0; i < params.size(); ++i) {
        const Tensor& g = tape.grad(enc_n.ordered[i]);
        grads[i] = g.empty() ? Tensor::zeros(params[i]->shape()) : g;
        grad_ptrs.push_back(&grads[i]);
    }
    if (cfg.clip_norm > 0.0) rec.clipped = clip_global_norm(grad_ptrs, cfg.clip_norm) != 1.0;
    std::vector<const Tensor*> grad_view(grad_ptrs.begin(), grad_ptrs.end());
    opt.step(params, grad_view);

    rec.denoiser_calls = denoiser_call_count() - calls_at_start;
    rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    return rec;
}

TrainResult train(ModelPair& pair, const std::string& concept_word, const World& world, const TrainConfig& cfg) {
    if (cfg.warmup_steps > cfg.iterations && cfg.iterations > 0)
        std::cerr << "note: warm-up (" << cfg.warmup_steps << ") exceeds iteration count (" << cfg.iterations
                  << "); the whole run is warm-up\n";
    RetainSet retain = build_retain_set(world, concept_word);
    Adam opt(AdamConfig{.lr = cfg.lr});

    bool write_files = !cfg.out_dir.empty();
    std::ofstream log, trace_log;
    if (write_files) {
        std::filesystem::create_directories(cfg.out_dir);
        log.open(cfg.out_dir + "/train_log.jsonl");
        if (cfg.trace_attacks) trace_log.open(cfg.out_dir + "/attack_trace.jsonl");
    }

    CheckpointMeta meta;
    meta.config_hash = cfg.config_hash;
    meta.rng_seed = cfg.seed;
    meta.world_seed = cfg.world_seed;
    meta.world_concepts = cfg.world_concepts;
    meta.world_styles = cfg.world_styles;

    auto save_at = [&](int step, const std::string& name) {
        if (!write_files) return std::string{};
        meta.step = step;
        std::string path = cfg.out_dir + "/" + name;
        save_pair_checkpoint(path, pair, &opt, meta);
        return path;
    };

    TrainResult result;
    std::string last_ckpt;
    for (int i = 0; i < cfg.iterations; ++i) {
        std::vector<AttackTraceStep> trace;
        TrainRecord rec;
        try {
            rec = train_step(pair, concept_word, world, retain, cfg, i, opt,
                             cfg.trace_attacks ? &trace : nullptr);
        } catch (const DivergedTraining& e) {
            throw DivergedTraining(std::string(e.what()) +
                                   (last_ckpt.empty() ? "" : " (last good checkpoint: " + last_ckpt + ")"));
        }
        if (write_files) {
            log << rec.to_json_line() << "\n";
            if (cfg.trace_attacks)
                for (const AttackTraceStep& ts : trace) {
                    nlohmann::ordered_json j;
                    j["iter"] = i;
                    j["step"] = ts.step;
                    j["h1"] = ts.h1;
                    j["h2"] = ts.h2;
                    j["loss"] = ts.loss;
                    trace_log << j.dump() << "\n";
                }
        }
        result.records.push_back(rec);
        if ((i + 1) % 50 == 0 || i + 1 == cfg.iterations)
            std::cerr << "erase " << (i + 1) << "/" << cfg.iterations << " total=" << rec.total << "\n";
        if (cfg.checkpoint_interval > 0 && (i + 1) % cfg.checkpoint_interval == 0 && i + 1 < cfg.iterations)
            last_ckpt = save_at(i + 1, "erased_step" + std::to_string(i + 1) + ".ckpt");
    }
    result.final_checkpoint = save_at(cfg.iterations, "erased.ckpt");
    return result;
}

}  // namespace celab
