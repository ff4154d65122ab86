// Copyright (c) 2026 the celab authors
// SPDX-License-Identifier: Apache-2.0

#include "celab/model_config.hpp"

#include <json.hpp>

namespace celab {

std::string ModelConfig::to_json_string() const {
    nlohmann::ordered_json j;
    j["vocab_size"] = vocab_size;
    j["seq_len"] = seq_len;
    j["embed_dim"] = embed_dim;
    j["ffn_hidden"] = ffn_hidden;
    j["n_blocks"] = n_blocks;
    j["latent_hw"] = latent_hw;
    j["channels"] = channels;
    j["attn_dim"] = attn_dim;
    j["temb_dim"] = temb_dim;
    j["temb_hidden"] = temb_hidden;
    j["timesteps"] = timesteps;
    j["beta_min"] = beta_min;
    j["beta_max"] = beta_max;
    return j.dump();
}

ModelConfig ModelConfig::from_json_string(const std::string& s) {
    nlohmann::json j = nlohmann::json::parse(s);
    ModelConfig c;
    c.vocab_size = j.at("vocab_size");
    c.seq_len = j.at("seq_len");
    c.embed_dim = j.at("embed_dim");
    c.ffn_hidden = j.at("ffn_hidden");
    c.n_blocks = j.at("n_blocks");
    c.latent_hw = j.at("latent_hw");
    c.channels = j.at("channels");
    c.attn_dim = j.at("attn_dim");
    c.temb_dim = j.at("temb_dim");
    c.temb_hidden = j.at("temb_hidden");
    c.timesteps = j.at("timesteps");
    c.beta_min = j.at("beta_min");
    c.beta_max = j.at("beta_max");
    return c;
}

}  // namespace celab
