// Copyright (c) 2026 the celab authors
// SPDX-License-Identifier: Apache-2.0

#include "celab/text_encoder.hpp"

#include <cmath>

namespace celab {

namespace {
constexpr double kInitStd = 0.08;

Tensor init_normal(Rng& rng, std::vector<int> shape, double std_dev) {
    Tensor t = rng.normal_tensor(std::move(shape));
    t.scale_(std_dev);
    return t;
}
}  // namespace

TextEncoderParams TextEncoderParams::init(const ModelConfig& cfg, Rng& rng) {
    TextEncoderParams p;
    int d = cfg.embed_dim, h = cfg.ffn_hidden;
    p.table = init_normal(rng, {cfg.vocab_size, d}, 0.1);
    p.pos = init_normal(rng, {cfg.seq_len, d}, 0.1);
    p.blocks.resize(static_cast<size_t>(cfg.n_blocks));
    for (auto& b : p.blocks) {
        b.ln1_g = Tensor::full({d}, 1.0);
        b.ln1_b = Tensor::zeros({d});
        b.wq = init_normal(rng, {d, d}, kInitStd);
        b.wk = init_normal(rng, {d, d}, kInitStd);
        b.wv = init_normal(rng, {d, d}, kInitStd);
        b.wo = init_normal(rng, {d, d}, kInitStd);
        b.ln2_g = Tensor::full({d}, 1.0);
        b.ln2_b = Tensor::zeros({d});
        b.w1 = init_normal(rng, {d, h}, kInitStd);
        b.b1 = Tensor::zeros({h});
        b.w2 = init_normal(rng, {h, d}, kInitStd);
        b.b2 = Tensor::zeros({d});
    }
    p.lnf_g = Tensor::full({d}, 1.0);
    p.lnf_b = Tensor::zeros({d});
    return p;
}

void TextEncoderParams::for_each_array(const std::function<void(const std::string&, Tensor&)>& fn) {
    fn("table", table);
    fn("pos", pos);
    for (size_t i = 0; i < blocks.size(); ++i) {
        std::string pfx = "blk" + std::to_string(i) + ".";
        EncoderBlock& b = blocks[i];
        fn(pfx + "ln1_g", b.ln1_g);
        fn(pfx + "ln1_b", b.ln1_b);
        fn(pfx + "wq", b.wq);
        fn(pfx + "wk", b.wk);
        fn(pfx + "wv", b.wv);
        fn(pfx + "wo", b.wo);
        fn(pfx + "ln2_g", b.ln2_g);
        fn(pfx + "ln2_b", b.ln2_b);
        fn(pfx + "w1", b.w1);
        fn(pfx + "b1", b.b1);
        fn(pfx + "w2", b.w2);
        fn(pfx + "b2", b.b2);
    }
    fn("lnf_g", lnf_g);
    fn("lnf_b", lnf_b);
}

void TextEncoderParams::for_each_array(const std::function<void(const std::string&, const Tensor&)>& fn) const {
    const_cast<TextEncoderParams*>(this)->for_each_array(
        [&fn](const std::string& n, Tensor& t) { fn(n, t); });
}

int64_t TextEncoderParams::param_count() const {
    int64_t n = 0;
    for_each_array([&n](const std::string&, const Tensor& t) { n += t.size(); });
    return n;
}

uint64_t TextEncoderParams::checksum() const {
    uint64_t h = 1469598103934665603ull;
    for_each_array([&h](const std::string&, const Tensor& t) {
        h ^= checksum_bytes(t);
        h *= 1099511628211ull;
    });
    return h;
}

EncoderVars lift_encoder(Tape& t, const TextEncoderParams& p, bool trainable) {
    EncoderVars v;
    auto lift = [&](const Tensor& a) {
        Var var = trainable ? t.leaf(a) : t.constant(a);
        v.ordered.push_back(var);
        return var;
    };
    v.table = lift(p.table);
    v.pos = lift(p.pos);
    for (const EncoderBlock& b : p.blocks) {
        EncoderVars::BlockVars bv;
        bv.ln1_g = lift(b.ln1_g);
        bv.ln1_b = lift(b.ln1_b);
        bv.wq = lift(b.wq);
        bv.wk = lift(b.wk);
        bv.wv = lift(b.wv);
        bv.wo = lift(b.wo);
        bv.ln2_g = lift(b.ln2_g);
        bv.ln2_b = lift(b.ln2_b);
        bv.w1 = lift(b.w1);
        bv.b1 = lift(b.b1);
        bv.w2 = lift(b.w2);
        bv.b2 = lift(b.b2);
        v.blocks.push_back(bv);
    }
    v.lnf_g = lift(p.lnf_g);
    v.lnf_b = lift(p.lnf_b);
    return v;
}

Var encode_text_t(Tape& t, const EncoderVars& enc, Var tau) {
    int d = t.val(tau).dim(1);
    double attn_scale = 1.0 / std::sqrt(static_cast<double>(d));
    Var x = t.add(tau, enc.pos);
    for (const auto& b : enc.blocks) {
        Var h = t.layer_norm(x, b.ln1_g, b.ln1_b);
        Var q = t.matmul(h, b.wq);
        Var k = t.matmul(h, b.wk);
        Var vv = t.matmul(h, b.wv);
        Var a = t.softmax_rows(t.scale(t.matmul_nt(q, k), attn_scale));
        Var attn = t.matmul(t.matmul(a, vv), b.wo);
        x = t.add(x, attn);
        Var h2 = t.layer_norm(x, b.ln2_g, b.ln2_b);
        Var f = t.silu(t.add_rowvec(t.matmul(h2, b.w1), b.b1));
        Var ffn = t.add_rowvec(t.matmul(f, b.w2), b.b2);
        x = t.add(x, ffn);
    }
    return t.layer_norm(x, enc.lnf_g, enc.lnf_b);
}

Var pool_t(Tape& t, Var features, int eos_pos) {
    Var r = t.row(features, eos_pos);
    if (norm2(t.val(r)) < 1e-12) throw ZeroVector("pool");
    return t.l2_normalize(r);
}

Tensor embed_tokens(const std::vector<int>& ids, const TextEncoderParams& p) {
    int d = p.table.dim(1);
    Tensor out({static_cast<int>(ids.size()), d});
    for (size_t i = 0; i < ids.size(); ++i) {
        if (ids[i] < 0 || ids[i] >= p.table.dim(0)) throw UnknownToken("id " + std::to_string(ids[i]));
        for (int j = 0; j < d; ++j) out.at(static_cast<int>(i), j) = p.table.at(ids[i], j);
    }
    return out;
}

Tensor encode_text(const TextEncoderParams& p, const Tensor& tau) {
    Tape t;
    EncoderVars enc = lift_encoder(t, p, false);
    Var out = encode_text_t(t, enc, t.constant(tau));
    const Tensor& v = t.val(out);
    if (!v.all_finite()) throw NonFiniteActivation("encode_text");
    return v;
}

Tensor pool(const Tensor& features, int eos_pos) {
    Tape t;
    Var out = pool_t(t, t.constant(features), eos_pos);
    return t.val(out);
}

Tensor pooled_feature(const TextEncoderParams& p, const Tensor& tau, int eos_pos) {
    Tape t;
    EncoderVars enc = lift_encoder(t, p, false);
    Var out = pool_t(t, encode_text_t(t, enc, t.constant(tau)), eos_pos);
    const Tensor& v = t.val(out);
    if (!v.all_finite()) throw NonFiniteActivation("pooled_feature");
    return v;
}

}  // namespace celab
