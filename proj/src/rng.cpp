// Copyright (c) 2026 the celab authors
// SPDX-License-Identifier: Apache-2.0

#include "celab/rng.hpp"

#include <cmath>
#include <numbers>

namespace celab {

int Rng::uniform_int(int n) {
    // Rejection sampling keeps the draw unbiased for any n.
    uint64_t bound = UINT64_MAX - UINT64_MAX % static_cast<uint64_t>(n);
    uint64_t v;
    do {
        v = engine_();
    } while (v >= bound);
    return static_cast<int>(v % static_cast<uint64_t>(n));
}

double Rng::normal() {
    if (has_cached_) {
        has_cached_ = false;
        return cached_;
    }
    double u1 = uniform();
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log1p(-u1));  // log(1-u1), u1 in [0,1) keeps the argument > 0
    double a = 2.0 * std::numbers::pi * u2;
    cached_ = r * std::sin(a);
    has_cached_ = true;
    return r * std::cos(a);
}

Tensor Rng::normal_tensor(std::vector<int> shape) {
    Tensor t(std::move(shape));
    for (int64_t i = 0; i < t.size(); ++i) t[i] = normal();
    return t;
}

std::vector<int> Rng::sample_without_replacement(int n, int k) {
    // Partial Fisher-Yates over an index array.
    std::vector<int> idx(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) idx[static_cast<size_t>(i)] = i;
    std::vector<int> out;
    out.reserve(static_cast<size_t>(k));
    for (int i = 0; i < k; ++i) {
        int j = i + uniform_int(n - i);
        std::swap(idx[static_cast<size_t>(i)], idx[static_cast<size_t>(j)]);
        out.push_back(idx[static_cast<size_t>(i)]);
    }
    return out;
}

uint64_t derive_seed(uint64_t root, std::string_view tag, uint64_t index) {
    uint64_t h = 1469598103934665603ull;
    auto mix_byte = [&h](unsigned char b) {
        h ^= b;
        h *= 1099511628211ull;
    };
    for (char c : tag) mix_byte(static_cast<unsigned char>(c));
    for (int i = 0; i < 8; ++i) mix_byte(static_cast<unsigned char>(root >> (8 * i)));
    for (int i = 0; i < 8; ++i) mix_byte(static_cast<unsigned char>(index >> (8 * i)));
    // splitmix64 finalizer
    h += 0x9e3779b97f4a7c15ull;
    h = (h ^ (h >> 30)) * 0xbf58476d1ce4e5b9ull;
    h = (h ^ (h >> 27)) * 0x94d049bb133111ebull;
    return h ^ (h >> 31);
}

}  // namespace celab
