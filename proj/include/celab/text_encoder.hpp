// Copyright (c) 2026 the celab authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <string>
#include <vector>

#include "celab/model_config.hpp"
#include "celab/rng.hpp"
#include "celab/tape.hpp"
#include "celab/tensor.hpp"
#include "celab/vocab.hpp"

namespace celab {

// One pre-LN transformer block: single-head self-attention + feedforward.
struct EncoderBlock {
    Tensor ln1_g, ln1_b;
    Tensor wq, wk, wv, wo;  // (d,d)
    Tensor ln2_g, ln2_b;
    Tensor w1, b1;  // (d,h), (h)
    Tensor w2, b2;  // (h,d), (d)
};

// Text encoder: token embedding table, learned positions, `n_blocks`
// transformer blocks, final layer norm. The pooled feature ("aggregator")
// is the EOS-position row of the final features, L2-normalized, so every
// similarity in the pipeline is a plain dot product.
struct TextEncoderParams {
    Tensor table;  // (V,d)
    Tensor pos;    // (L,d)
    std::vector<EncoderBlock> blocks;
    Tensor lnf_g, lnf_b;

    static TextEncoderParams init(const ModelConfig& cfg, Rng& rng);

    void for_each_array(const std::function<void(const std::string&, Tensor&)>& fn);
    void for_each_array(const std::function<void(const std::string&, const Tensor&)>& fn) const;
    int64_t param_count() const;
    uint64_t checksum() const;
};

// Tape-lifted view of the encoder arrays, in for_each_array order.
struct EncoderVars {
    Var table, pos;
    struct BlockVars {
        Var ln1_g, ln1_b, wq, wk, wv, wo, ln2_g, ln2_b, w1, b1, w2, b2;
    };
    std::vector<BlockVars> blocks;
    Var lnf_g, lnf_b;
    std::vector<Var> ordered;  // same order as for_each_array
};

EncoderVars lift_encoder(Tape& t, const TextEncoderParams& p, bool trainable);

// (L,d) embedding -> (L,d) contextual features.
Var encode_text_t(Tape& t, const EncoderVars& enc, Var tau);

// Features -> unit-norm pooled feature at the EOS position.
Var pool_t(Tape& t, Var features, int eos_pos);

// Plain (inference) entry points. These run the tape forward internally so
// training and inference share one numeric path.
Tensor embed_tokens(const std::vector<int>& ids, const TextEncoderParams& p);
Tensor encode_text(const TextEncoderParams& p, const Tensor& tau);
Tensor pool(const Tensor& features, int eos_pos);
Tensor pooled_feature(const TextEncoderParams& p, const Tensor& tau, int eos_pos);

}  // namespace celab
