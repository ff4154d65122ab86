// Copyright (c) 2026 the celab authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <vector>

#include "celab/tensor.hpp"

namespace celab {

struct Var {
    int id = -1;
    bool valid() const { return id >= 0; }
};

// Reverse-mode autodiff over Tensors. A tape is built per optimization step:
// leaves are created for every array that needs a gradient, the forward pass
// records one node per operation, and backward() walks the nodes in reverse
// creation order (creation order is a topological order of the DAG).
//
// The same forward code also serves the inference paths: callers build a
// throwaway tape and read the value. Keeping one implementation per kernel
// means the trainer and the plain samplers produce bitwise-identical numbers.
class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    // Leaf with gradient tracking.
    Var leaf(const Tensor& v);
    // Leaf without gradient tracking.
    Var constant(Tensor v);

    const Tensor& val(Var v) const { return nodes_[static_cast<size_t>(v.id)].value; }
    const Tensor& grad(Var v) const;
    bool needs_grad(Var v) const { return nodes_[static_cast<size_t>(v.id)].needs_grad; }

    // Elementwise.
    Var add(Var a, Var b);
    Var sub(Var a, Var b);
    Var mul(Var a, Var b);
    Var scale(Var a, double s);
    Var neg(Var a) { return scale(a, -1.0); }
    Var silu(Var a);

    // (r,c) + (c) broadcast over rows.
    Var add_rowvec(Var m, Var v);

    // Matrix products; _nt multiplies by the transpose of b, _tn by the
    // transpose of a.
    Var matmul(Var a, Var b);
    Var matmul_nt(Var a, Var b);
    Var matmul_tn(Var a, Var b);

    Var softmax_rows(Var a);
    Var layer_norm(Var x, Var gamma, Var beta, double eps = 1e-5);

    // Row selection / assembly.
    Var gather_rows(Var table, const std::vector<int>& ids);
    Var row(Var m, int r);  // -> shape {c}
    // Copy of `base` with rows at `positions` replaced by the rows of `rows`.
    Var scatter_rows(Var base, Var rows, const std::vector<int>& positions);
    // Stack shape-{c} vectors into a (n,c) matrix.
    Var stack_rows(const std::vector<Var>& rows);

    // Vector ops.
    Var l2_normalize(Var v);
    Var dot(Var a, Var b);  // -> shape {1}

    // Reductions.
    Var sum(Var a);          // -> shape {1}
    Var sq_norm(Var a);      // sum of squares -> shape {1}
    Var mse_sum(Var a, Var b);  // sum((a-b)^2) -> shape {1}

    // Scalar (shape {1}) arithmetic.
    Var div_scalar(Var a, Var b);
    Var add_scalars(std::vector<Var> terms, std::vector<double> weights);

    // Tensor times scalar var (broadcast).
    Var mul_scalar(Var a, Var s);

    // Convolution, 3x3 kernel, zero padding 1. x: (Cin,H,W), w: (Cout,Cin,3,3), b: (Cout).
    Var conv2d_3x3(Var x, Var w, Var b);

    // (C,H,W) <-> (H*W, C) layout changes for the cross-attention block.
    Var chw_to_nc(Var x);
    Var nc_to_chw(Var x, int c, int h, int w);

    // Per-channel feature modulation: y[c,:,:] = x[c,:,:] * (1 + g[c]) + b[c].
    Var film(Var x, Var g, Var b);

    // Backpropagate from a scalar (shape {1}) node.
    void backward(Var loss);

    size_t node_count() const { return nodes_.size(); }

private:
    struct Node {
        Tensor value;
        Tensor grad;  // allocated lazily in backward()
        bool needs_grad = false;
        std::function<void(Tape&)> back;  // null for leaves/constants
    };

    Var push(Tensor value, bool needs_grad, std::function<void(Tape&)> back);
    Tensor& grad_mut(int id);
    Node& node(int id) { return nodes_[static_cast<size_t>(id)]; }

    std::vector<Node> nodes_;
};

}  // namespace celab
