// Copyright (c) 2026 the celab authors
// SPDX-License-Identifier: Apache-2.0

#include "celab/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <iostream>
#include <map>

#include <json.hpp>

namespace celab {

namespace {

constexpr char kMagic[8] = {'C', 'E', 'L', 'A', 'B', 'C', 'K', '1'};

void write_u32(std::ostream& out, uint32_t v) { out.write(reinterpret_cast<const char*>(&v), sizeof v); }
void write_u64(std::ostream& out, uint64_t v) { out.write(reinterpret_cast<const char*>(&v), sizeof v); }

uint32_t read_u32(std::istream& in) {
    uint32_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    return v;
}
uint64_t read_u64(std::istream& in) {
    uint64_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    return v;
}

std::string meta_to_json(const CheckpointMeta& m) {
    nlohmann::ordered_json j;
    j["kind"] = m.kind;
    j["config_hash"] = m.config_hash;
    j["step"] = m.step;
    j["rng_seed"] = m.rng_seed;
    j["model_config"] = nlohmann::json::parse(m.model_cfg.to_json_string());
    j["world_seed"] = m.world_seed;
    j["world_concepts"] = m.world_concepts;
    j["world_styles"] = m.world_styles;
    return j.dump();
}

CheckpointMeta meta_from_json(const std::string& s) {
    nlohmann::json j = nlohmann::json::parse(s);
    CheckpointMeta m;
    m.kind = j.at("kind");
    m.config_hash = j.at("config_hash");
    m.step = j.at("step");
    m.rng_seed = j.at("rng_seed");
    m.model_cfg = ModelConfig::from_json_string(j.at("model_config").dump());
    m.world_seed = j.at("world_seed");
    m.world_concepts = j.at("world_concepts");
    m.world_styles = j.at("world_styles");
    return m;
}

void write_archive(const std::string& path, const std::string& meta_json,
                   const std::vector<std::pair<std::string, const Tensor*>>& arrays) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write checkpoint: " + path);
    out.write(kMagic, sizeof kMagic);
    write_u32(out, kCheckpointSchemaVersion);
    write_u64(out, meta_json.size());
    out.write(meta_json.data(), static_cast<std::streamsize>(meta_json.size()));
    write_u32(out, static_cast<uint32_t>(arrays.size()));
    for (const auto& [name, tensor] : arrays) {
        write_u32(out, static_cast<uint32_t>(name.size()));
        out.write(name.data(), static_cast<std::streamsize>(name.size()));
        write_u32(out, static_cast<uint32_t>(tensor->rank()));
        for (int i = 0; i < tensor->rank(); ++i) write_u32(out, static_cast<uint32_t>(tensor->dim(i)));
        out.write(reinterpret_cast<const char*>(tensor->data()),
                  static_cast<std::streamsize>(tensor->size() * sizeof(double)));
    }
    if (!out) throw Error("short write on checkpoint: " + path);
}

struct Archive {
    std::string meta_json;
    std::map<std::string, Tensor> arrays;
};

Archive read_archive(const std::string& path, bool meta_only = false) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw MissingInput("checkpoint not found: " + path);
    char magic[8];
    in.read(magic, sizeof magic);
    if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0)
        throw SchemaVersionMismatch("bad magic in " + path);
    uint32_t version = read_u32(in);
    if (version != kCheckpointSchemaVersion)
        throw SchemaVersionMismatch("version " + std::to_string(version) + " (expected " +
                                    std::to_string(kCheckpointSchemaVersion) + ")");
    Archive a;
    uint64_t meta_len = read_u64(in);
    a.meta_json.resize(meta_len);
    in.read(a.meta_json.data(), static_cast<std::streamsize>(meta_len));
    if (meta_only) return a;
    uint32_t n = read_u32(in);
    for (uint32_t i = 0; i < n; ++i) {
        uint32_t name_len = read_u32(in);
        std::string name(name_len, '\0');
        in.read(name.data(), name_len);
        uint32_t ndim = read_u32(in);
        std::vector<int> shape(ndim);
        for (uint32_t d = 0; d < ndim; ++d) shape[d] = static_cast<int>(read_u32(in));
        Tensor t(shape);
        in.read(reinterpret_cast<char*>(t.data()), static_cast<std::streamsize>(t.size() * sizeof(double)));
        if (!in) throw Error("truncated checkpoint: " + path);
        a.arrays.emplace(std::move(name), std::move(t));
    }
    return a;
}

void check_hash(const CheckpointMeta& meta, const std::string& expect_hash, bool force, const std::string& path) {
    if (expect_hash.empty() || meta.config_hash == expect_hash) return;
    if (!force)
        throw ConfigHashMismatch("checkpoint " + path + " was produced under config " + meta.config_hash +
                                 ", current config is " + expect_hash + " (use --force to load anyway)");
    std::cerr << "warning: loading " << path << " across config change (" << meta.config_hash << " -> "
              << expect_hash << ")\n";
}

void fill_from_archive(const Archive& a, const std::string& prefix, TextEncoderParams& p) {
    p.for_each_array([&](const std::string& name, Tensor& t) {
        auto it = a.arrays.find(prefix + name);
        if (it == a.arrays.end()) throw Error("checkpoint missing array " + prefix + name);
        if (!it->second.same_shape(t)) throw ShapeMismatch("checkpoint array " + prefix + name);
        t = it->second;
    });
}

void fill_from_archive(const Archive& a, const std::string& prefix, DenoiserParams& p) {
    p.for_each_array([&](const std::string& name, Tensor& t) {
        auto it = a.arrays.find(prefix + name);
        if (it == a.arrays.end()) throw Error("checkpoint missing array " + prefix + name);
        if (!it->second.same_shape(t)) throw ShapeMismatch("checkpoint array " + prefix + name);
        t = it->second;
    });
}

}  // namespace

void save_model_checkpoint(const std::string& path, const Model& model, const CheckpointMeta& meta_in) {
    CheckpointMeta meta = meta_in;
    meta.kind = "model";
    meta.model_cfg = model.cfg;
    std::vector<std::pair<std::string, const Tensor*>> arrays;
    model.text.for_each_array([&](const std::string& n, const Tensor& t) { arrays.emplace_back("text." + n, &t); });
    model.denoiser.for_each_array(
        [&](const std::string& n, const Tensor& t) { arrays.emplace_back("denoiser." + n, &t); });
    write_archive(path, meta_to_json(meta), arrays);
}

Model load_model_checkpoint(const std::string& path, CheckpointMeta* meta_out, const std::string& expect_hash,
                            bool force) {
    Archive a = read_archive(path);
    CheckpointMeta meta = meta_from_json(a.meta_json);
    if (meta.kind != "model") throw Error("checkpoint kind is '" + meta.kind + "', expected 'model'");
    check_hash(meta, expect_hash, force, path);
    Model m = Model::init(meta.model_cfg, 0);
    fill_from_archive(a, "text.", m.text);
    fill_from_archive(a, "denoiser.", m.denoiser);
    if (meta_out) *meta_out = meta;
    return m;
}

void save_pair_checkpoint(const std::string& path, const ModelPair& pair, const Adam* opt,
                          const CheckpointMeta& meta_in) {
    CheckpointMeta meta = meta_in;
    meta.kind = "pair";
    meta.model_cfg = pair.cfg;
    std::vector<std::pair<std::string, const Tensor*>> arrays;
    pair.original.for_each_array([&](const std::string& n, const Tensor& t) { arrays.emplace_back("orig." + n, &t); });
    pair.training.for_each_array(
        [&](const std::string& n, const Tensor& t) { arrays.emplace_back("train." + n, &t); });
    pair.denoiser.for_each_array(
        [&](const std::string& n, const Tensor& t) { arrays.emplace_back("denoiser." + n, &t); });
    if (opt) {
        auto& m = const_cast<Adam*>(opt)->moments_m();
        auto& v = const_cast<Adam*>(opt)->moments_v();
        for (size_t i = 0; i < m.size(); ++i) arrays.emplace_back("adam.m." + std::to_string(i), &m[i]);
        for (size_t i = 0; i < v.size(); ++i) arrays.emplace_back("adam.v." + std::to_string(i), &v[i]);
    }
    write_archive(path, meta_to_json(meta), arrays);
}

PairCheckpoint load_pair_checkpoint(const std::string& path, const std::string& expect_hash, bool force) {
    Archive a = read_archive(path);
    PairCheckpoint out;
    out.meta = meta_from_json(a.meta_json);
    if (out.meta.kind != "pair") throw Error("checkpoint kind is '" + out.meta.kind + "', expected 'pair'");
    check_hash(out.meta, expect_hash, force, path);
    Model proto = Model::init(out.meta.model_cfg, 0);
    out.pair.cfg = out.meta.model_cfg;
    out.pair.original = proto.text;
    out.pair.training = proto.text;
    out.pair.denoiser = proto.denoiser;
    fill_from_archive(a, "orig.", out.pair.original);
    fill_from_archive(a, "train.", out.pair.training);
    fill_from_archive(a, "denoiser.", out.pair.denoiser);
    for (size_t i = 0;; ++i) {
        auto it = a.arrays.find("adam.m." + std::to_string(i));
        if (it == a.arrays.end()) break;
        out.adam_m.push_back(it->second);
        out.adam_v.push_back(a.arrays.at("adam.v." + std::to_string(i)));
    }
    out.adam_step = out.meta.step;
    return out;
}

CheckpointMeta read_checkpoint_meta(const std::string& path) {
    Archive a = read_archive(path, /*meta_only=*/true);
    return meta_from_json(a.meta_json);
}

}  // namespace celab
