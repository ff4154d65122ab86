// Copyright (c) 2026 the celab authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "celab/model.hpp"
#include "celab/optimizer.hpp"

namespace celab {

// Versioned checkpoint archive: magic, schema version, JSON metadata, then
// named double arrays written as raw bytes (bitwise-lossless round trip).
struct CheckpointMeta {
    std::string kind;         // "model" or "pair"
    std::string config_hash;  // hash of the run configuration
    int64_t step = 0;
    uint64_t rng_seed = 0;    // root seed; streams rederive from (seed, tag, index)
    ModelConfig model_cfg;
    uint64_t world_seed = 0;
    int world_concepts = 0;
    int world_styles = 0;
};

inline constexpr uint32_t kCheckpointSchemaVersion = 1;

void save_model_checkpoint(const std::string& path, const Model& model, const CheckpointMeta& meta);

// expect_hash empty: skip the config check. Mismatch throws
// ConfigHashMismatch unless force (then a warning goes to stderr).
Model load_model_checkpoint(const std::string& path, CheckpointMeta* meta_out,
                            const std::string& expect_hash = "", bool force = false);

struct PairCheckpoint {
    ModelPair pair;
    std::vector<Tensor> adam_m, adam_v;
    int64_t adam_step = 0;
    CheckpointMeta meta;
};

void save_pair_checkpoint(const std::string& path, const ModelPair& pair, const Adam* opt,
                          const CheckpointMeta& meta);
PairCheckpoint load_pair_checkpoint(const std::string& path, const std::string& expect_hash = "",
                                    bool force = false);

// Peek at metadata without materializing params.
CheckpointMeta read_checkpoint_meta(const std::string& path);

}  // namespace celab
