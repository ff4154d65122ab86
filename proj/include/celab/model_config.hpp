// Copyright (c) 2026 the celab authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>

namespace celab {

// Architecture dimensions shared by the text encoder, denoiser, and noise
// schedule. Serialized into checkpoints so loads can validate shapes.
struct ModelConfig {
    int vocab_size = 64;
    int seq_len = 8;        // prompt length L, padded
    int embed_dim = 32;     // token embedding dim d
    int ffn_hidden = 64;    // encoder feedforward width
    int n_blocks = 2;       // encoder depth
    int latent_hw = 8;      // latent is 1 x latent_hw x latent_hw
    int channels = 16;      // denoiser conv channels
    int attn_dim = 16;      // cross-attention inner dim
    int temb_dim = 16;      // sinusoidal timestep embedding dim
    int temb_hidden = 32;   // timestep MLP width
    int timesteps = 50;     // schedule length T
    double beta_min = 1e-4;
    double beta_max = 0.2;

    bool operator==(const ModelConfig&) const = default;

    std::string to_json_string() const;
    static ModelConfig from_json_string(const std::string& s);
};

}  // namespace celab
