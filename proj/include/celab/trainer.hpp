// Copyright (c) 2026 the celab authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "celab/attack.hpp"
#include "celab/erasure.hpp"
#include "celab/model.hpp"
#include "celab/optimizer.hpp"
#include "celab/retention.hpp"

namespace celab {

struct TrainConfig {
    int iterations = 1000;
    double lr = 1e-5;
    int warmup_steps = 200;
    bool attack_enabled = true;
    AttackConfig attack;
    ErasureConfig erasure;
    RetentionConfig retention;
    uint64_t seed = 0;
    double clip_norm = 1.0;     // 0 disables clipping
    int checkpoint_interval = 0;  // 0: only the final checkpoint
    std::string out_dir;          // empty: no files written
    std::string config_hash;
    bool trace_attacks = false;
    uint64_t world_seed = 0;
    int world_concepts = 0;
    int world_styles = 0;
};

struct TrainRecord {
    int iteration = 0;
    double l_erase = 0.0;
    double l_graph = 0.0;
    double l_image = 0.0;
    double total = 0.0;
    std::optional<double> h1, h2;  // absent during warm-up / with attacks off
    std::optional<double> min_h3;  // absent when retention is off
    double wall_ms = 0.0;
    uint64_t denoiser_calls = 0;         // calls during the whole iteration
    uint64_t attack_denoiser_calls = 0;  // calls during the attack phase (0 by construction)
    bool clipped = false;

    std::string to_json_line() const;
};

// Weighted sum of Eq-style loss terms: l_erase + gamma_t * l_graph +
// gamma_v * l_image.
double total_loss(double l_erase, double l_graph, double l_image, double gamma_t, double gamma_v);

// One alternating iteration: attack (past warm-up), retention terms,
// erasure term, one Adam step on the training text encoder only.
TrainRecord train_step(ModelPair& pair, const std::string& concept_word, const World& world,
                       const RetainSet& retain, const TrainConfig& cfg, int iteration, Adam& opt,
                       std::vector<AttackTraceStep>* attack_trace = nullptr);

struct TrainResult {
    std::vector<TrainRecord> records;
    std::string final_checkpoint;  // empty when out_dir is empty
};

// Full run over cfg.iterations with JSONL record logging and periodic
// checkpointing. Deterministic given cfg.seed.
TrainResult train(ModelPair& pair, const std::string& concept_word, const World& world, const TrainConfig& cfg);

}  // namespace celab
