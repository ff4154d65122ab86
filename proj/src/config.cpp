// Copyright (c) 2026 the celab authors
// SPDX-License-Identifier: Apache-2.0

#include "celab/config.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace celab {

const std::vector<RunConfig::KeyInfo>& RunConfig::key_table() {
    static const std::vector<KeyInfo> table = {
        {"world.seed", "7", "world generation seed"},
        {"world.concepts", "8", "number of concepts (2..12); each brings 3 synonyms"},
        {"world.styles", "2", "number of style transforms (0..4)"},
        {"model.seq_len", "8", "prompt length L (padded)"},
        {"model.embed_dim", "32", "token embedding dim d"},
        {"model.ffn_hidden", "64", "encoder feedforward width"},
        {"model.blocks", "2", "encoder depth"},
        {"model.latent_hw", "8", "latent side length (1-channel latents)"},
        {"model.channels", "16", "denoiser conv channels"},
        {"model.attn_dim", "16", "denoiser cross-attention dim"},
        {"model.temb_dim", "16", "sinusoidal timestep embedding dim"},
        {"model.temb_hidden", "32", "timestep MLP width"},
        {"model.timesteps", "50", "noise schedule length T"},
        {"model.beta_min", "0.0001", "schedule beta at t=0"},
        {"model.beta_max", "0.2", "schedule beta at t=T-1"},
        {"corpus.samples", "2048", "pretraining corpus size"},
        {"corpus.seed", "11", "corpus render seed"},
        {"pretrain.steps", "4000", "pretraining steps"},
        {"pretrain.batch", "8", "pretraining batch size"},
        {"pretrain.lr", "0.002", "pretraining Adam learning rate"},
        {"pretrain.null_prob", "0.1", "unconditional conditioning dropout"},
        {"pretrain.seed", "1", "pretraining seed"},
        {"erase.concept", "circle", "erasure target word"},
        {"erase.iterations", "1000", "erasure iterations I"},
        {"erase.lr", "0.00001", "erasure learning rate alpha"},
        {"erase.warmup", "200", "warm-up iterations (concept word only)"},
        {"erase.eta", "1.0", "negative guidance scale"},
        {"erase.seed", "2", "erasure run seed"},
        {"erase.clip_norm", "1.0", "gradient clip global norm (0 disables)"},
        {"erase.checkpoint_interval", "0", "checkpoint every N iterations (0: final only)"},
        {"erase.rollout_zt", "true", "z_t from partial rollout (false: forward-noised zeros)"},
        {"erase.no_attack", "false", "disable the inside-out attack (warm-up-only / ESD mode)"},
        {"erase.no_warmup", "false", "skip the warm-up phase"},
        {"attack.steps", "30", "inner attack steps J"},
        {"attack.step_size", "0.001", "attack step size beta"},
        {"attack.loss", "full", "attack loss variant: h2|neg_h1|neg_h1_h2|full"},
        {"retain.batch", "32", "retain prompts per iteration (clamped to the set size)"},
        {"retain.k", "4", "local noise-consistency subset size"},
        {"retain.gamma_t", "0.4", "graph loss weight"},
        {"retain.gamma_v", "1.0", "image loss weight"},
        {"sample.steps", "50", "sampler steps (must divide timesteps)"},
        {"sample.guidance", "3.0", "classifier-free guidance scale"},
        {"eval.seed", "3", "evaluation seed"},
        {"eval.samples_per_prompt", "4", "samples per eval prompt"},
        {"eval.redteam", "true", "run the outside-in red team during eval"},
        {"eval.redteam_prompts", "50", "red-team prompt count"},
        {"eval.style_target", "", "style word for the optional style metric block"},
        {"eval.detector_threshold", "0.6", "detector flag threshold"},
        {"redteam.delta", "1.0", "outside-in perturbation radius"},
        {"redteam.steps", "30", "outside-in PGD steps"},
        {"redteam.step_size", "0.05", "outside-in PGD step size"},
    };
    return table;
}

RunConfig::RunConfig() {
    for (const KeyInfo& k : key_table()) values_[k.key] = k.def;
}

void RunConfig::load_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw MissingInput("config file not found: " + path);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        size_t hash_pos = line.find('#');
        if (hash_pos != std::string::npos) line.resize(hash_pos);
        auto not_space = [](unsigned char c) { return !std::isspace(c); };
        line.erase(line.begin(), std::find_if(line.begin(), line.end(), not_space));
        line.erase(std::find_if(line.rbegin(), line.rend(), not_space).base(), line.end());
        if (line.empty()) continue;
        size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(path + ":" + std::to_string(lineno) + ": expected key = value");
        std::string key = line.substr(0, eq);
        std::string val = line.substr(eq + 1);
        key.erase(std::find_if(key.rbegin(), key.rend(), not_space).base(), key.end());
        val.erase(val.begin(), std::find_if(val.begin(), val.end(), not_space));
        set(key, val);
    }
}

void RunConfig::set(const std::string& key, const std::string& val) {
    auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError("unknown config key: " + key);
    it->second = val;
}

void RunConfig::apply_override(const std::string& key_eq_value) {
    size_t eq = key_eq_value.find('=');
    if (eq == std::string::npos) throw ConfigError("override must be key=value: " + key_eq_value);
    set(key_eq_value.substr(0, eq), key_eq_value.substr(eq + 1));
}

const std::string& RunConfig::get(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError("unknown config key: " + key);
    return it->second;
}

int RunConfig::get_int(const std::string& key) const {
    try {
        size_t pos = 0;
        int v = std::stoi(get(key), &pos);
        if (pos != get(key).size()) throw std::invalid_argument(key);
        return v;
    } catch (const std::exception&) {
        throw ConfigError(key + " is not an integer: " + get(key));
    }
}

uint64_t RunConfig::get_u64(const std::string& key) const {
    try {
        size_t pos = 0;
        uint64_t v = std::stoull(get(key), &pos);
        if (pos != get(key).size()) throw std::invalid_argument(key);
        return v;
    } catch (const std::exception&) {
        throw ConfigError(key + " is not an unsigned integer: " + get(key));
    }
}

double RunConfig::get_double(const std::string& key) const {
    try {
        size_t pos = 0;
        double v = std::stod(get(key), &pos);
        if (pos != get(key).size()) throw std::invalid_argument(key);
        return v;
    } catch (const std::exception&) {
        throw ConfigError(key + " is not a number: " + get(key));
    }
}

bool RunConfig::get_bool(const std::string& key) const {
    const std::string& v = get(key);
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError(key + " is not a boolean: " + v);
}

std::string RunConfig::dump() const {
    std::ostringstream out;
    for (const auto& [k, v] : values_) out << k << " = " << v << "\n";
    return out.str();
}

std::string RunConfig::hash() const {
    uint64_t h = 1469598103934665603ull;
    auto mix = [&h](const std::string& s) {
        for (char c : s) {
            h ^= static_cast<unsigned char>(c);
            h *= 1099511628211ull;
        }
    };
    for (const auto& [k, v] : values_) {
        mix(k);
        mix("=");
        mix(v);
        mix("\n");
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return std::string(buf);
}

}  // namespace celab
