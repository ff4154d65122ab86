// Copyright (c) 2026 the celab authors
// SPDX-License-Identifier: Apache-2.0

#include "celab/denoiser.hpp"

#include <atomic>
#include <cmath>

namespace celab {

namespace {
constexpr double kInitStd = 0.08;
std::atomic<uint64_t> g_denoiser_calls{0};

Tensor init_normal(Rng& rng, std::vector<int> shape, double std_dev) {
    Tensor t = rng.normal_tensor(std::move(shape));
    t.scale_(std_dev);
    return t;
}
}  // namespace

DenoiserParams DenoiserParams::init(const ModelConfig& cfg, Rng& rng) {
    DenoiserParams p;
    int c = cfg.channels, d = cfg.embed_dim, a = cfg.attn_dim;
    int dt = cfg.temb_dim, ht = cfg.temb_hidden, hw = cfg.latent_hw * cfg.latent_hw;
    p.conv1_w = init_normal(rng, {c, 1, 3, 3}, kInitStd);
    p.conv1_b = Tensor::zeros({c});
    p.temb_w = init_normal(rng, {dt, ht}, kInitStd);
    p.temb_b = Tensor::zeros({ht});
    p.film1_gw = init_normal(rng, {ht, c}, kInitStd);
    p.film1_gb = Tensor::zeros({c});
    p.film1_bw = init_normal(rng, {ht, c}, kInitStd);
    p.film1_bb = Tensor::zeros({c});
    p.pixpos = init_normal(rng, {hw, c}, 0.1);
    p.wq = init_normal(rng, {c, a}, kInitStd);
    p.wk = init_normal(rng, {d, a}, kInitStd);
    p.wv = init_normal(rng, {d, a}, kInitStd);
    p.wo = init_normal(rng, {a, c}, kInitStd);
    p.conv2_w = init_normal(rng, {c, c, 3, 3}, kInitStd);
    p.conv2_b = Tensor::zeros({c});
    p.film2_gw = init_normal(rng, {ht, c}, kInitStd);
    p.film2_gb = Tensor::zeros({c});
    p.film2_bw = init_normal(rng, {ht, c}, kInitStd);
    p.film2_bb = Tensor::zeros({c});
    p.conv3_w = init_normal(rng, {1, c, 3, 3}, kInitStd);
    p.conv3_b = Tensor::zeros({1});
    p.gate_w = init_normal(rng, {ht, 1}, kInitStd);
    p.gate_b = Tensor::zeros({1});
    return p;
}

void DenoiserParams::for_each_array(const std::function<void(const std::string&, Tensor&)>& fn) {
    fn("conv1_w", conv1_w);
    fn("conv1_b", conv1_b);
    fn("temb_w", temb_w);
    fn("temb_b", temb_b);
    fn("film1_gw", film1_gw);
    fn("film1_gb", film1_gb);
    fn("film1_bw", film1_bw);
    fn("film1_bb", film1_bb);
    fn("pixpos", pixpos);
    fn("wq", wq);
    fn("wk", wk);
    fn("wv", wv);
    fn("wo", wo);
    fn("conv2_w", conv2_w);
    fn("conv2_b", conv2_b);
    fn("film2_gw", film2_gw);
    fn("film2_gb", film2_gb);
    fn("film2_bw", film2_bw);
    fn("film2_bb", film2_bb);
    fn("conv3_w", conv3_w);
    fn("conv3_b", conv3_b);
    fn("gate_w", gate_w);
    fn("gate_b", gate_b);
}

void DenoiserParams::for_each_array(const std::function<void(const std::string&, const Tensor&)>& fn) const {
    const_cast<DenoiserParams*>(this)->for_each_array([&fn](const std::string& n, Tensor& t) { fn(n, t); });
}

int64_t DenoiserParams::param_count() const {
    int64_t n = 0;
    for_each_array([&n](const std::string&, const Tensor& t) { n += t.size(); });
    return n;
}

uint64_t DenoiserParams::checksum() const {
    uint64_t h = 1469598103934665603ull;
    for_each_array([&h](const std::string&, const Tensor& t) {
        h ^= checksum_bytes(t);
        h *= 1099511628211ull;
    });
    return h;
}

DenoiserVars lift_denoiser(Tape& t, const DenoiserParams& p, bool trainable) {
    DenoiserVars v;
    auto lift = [&](const Tensor& a) {
        Var var = trainable ? t.leaf(a) : t.constant(a);
        v.ordered.push_back(var);
        return var;
    };
    v.conv1_w = lift(p.conv1_w);
    v.conv1_b = lift(p.conv1_b);
    v.temb_w = lift(p.temb_w);
    v.temb_b = lift(p.temb_b);
    v.film1_gw = lift(p.film1_gw);
    v.film1_gb = lift(p.film1_gb);
    v.film1_bw = lift(p.film1_bw);
    v.film1_bb = lift(p.film1_bb);
    v.pixpos = lift(p.pixpos);
    v.wq = lift(p.wq);
    v.wk = lift(p.wk);
    v.wv = lift(p.wv);
    v.wo = lift(p.wo);
    v.conv2_w = lift(p.conv2_w);
    v.conv2_b = lift(p.conv2_b);
    v.film2_gw = lift(p.film2_gw);
    v.film2_gb = lift(p.film2_gb);
    v.film2_bw = lift(p.film2_bw);
    v.film2_bb = lift(p.film2_bb);
    v.conv3_w = lift(p.conv3_w);
    v.conv3_b = lift(p.conv3_b);
    v.gate_w = lift(p.gate_w);
    v.gate_b = lift(p.gate_b);
    return v;
}

Tensor sinusoidal_timestep(int t, int dim) {
    Tensor out({1, dim});
    int half = dim / 2;
    for (int i = 0; i < half; ++i) {
        double freq = std::exp(-std::log(10000.0) * i / half);
        out.at(0, i) = std::sin(t * freq);
        out.at(0, half + i) = std::cos(t * freq);
    }
    return out;
}

Var predict_noise_t(Tape& t, const DenoiserVars& den, Var z_t, Var text_features, int timestep,
                    const ModelConfig& cfg) {
    g_denoiser_calls.fetch_add(1, std::memory_order_relaxed);
    int c = cfg.channels, h = cfg.latent_hw, w = cfg.latent_hw;
    double attn_scale = 1.0 / std::sqrt(static_cast<double>(cfg.attn_dim));

    Var temb = t.constant(sinusoidal_timestep(timestep, cfg.temb_dim));
    Var ht = t.silu(t.add_rowvec(t.matmul(temb, den.temb_w), den.temb_b));  // (1,Ht)

    auto film_vec = [&](Var wg, Var bg) { return t.row(t.add_rowvec(t.matmul(ht, wg), bg), 0); };

    Var f = t.conv2d_3x3(z_t, den.conv1_w, den.conv1_b);
    f = t.silu(t.film(f, film_vec(den.film1_gw, den.film1_gb), film_vec(den.film1_bw, den.film1_bb)));

    Var x = t.add(t.chw_to_nc(f), den.pixpos);           // (HW,C)
    Var q = t.matmul(x, den.wq);                          // (HW,A)
    Var k = t.matmul(text_features, den.wk);              // (L,A)
    Var vv = t.matmul(text_features, den.wv);             // (L,A)
    Var attn = t.softmax_rows(t.scale(t.matmul_nt(q, k), attn_scale));
    Var o = t.matmul(t.matmul(attn, vv), den.wo);         // (HW,C)
    f = t.add(f, t.nc_to_chw(o, c, h, w));

    f = t.conv2d_3x3(f, den.conv2_w, den.conv2_b);
    f = t.silu(t.film(f, film_vec(den.film2_gw, den.film2_gb), film_vec(den.film2_bw, den.film2_bb)));

    Var eps = t.conv2d_3x3(f, den.conv3_w, den.conv3_b);  // (1,H,W)
    Var gate = t.row(t.add_rowvec(t.matmul(ht, den.gate_w), den.gate_b), 0);  // (1)
    return t.add(eps, t.mul_scalar(z_t, gate));
}

Tensor predict_noise(const DenoiserParams& p, const Tensor& z_t, const Tensor& text_features, int timestep,
                     const ModelConfig& cfg) {
    Tape t;
    DenoiserVars den = lift_denoiser(t, p, false);
    Var out = predict_noise_t(t, den, t.constant(z_t), t.constant(text_features), timestep, cfg);
    const Tensor& v = t.val(out);
    if (!v.all_finite()) throw NonFiniteActivation("predict_noise");
    return v;
}

uint64_t denoiser_call_count() { return g_denoiser_calls.load(std::memory_order_relaxed); }

void reset_denoiser_call_count() { g_denoiser_calls.store(0, std::memory_order_relaxed); }

}  // namespace celab
