// Copyright (c) 2026 the celab authors
// SPDX-License-Identifier: Apache-2.0

#include "celab/tape.hpp"

#include <cmath>
#include <memory>
#include <utility>

namespace celab {

namespace {
double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
}  // namespace

Var Tape::push(Tensor value, bool needs_grad, std::function<void(Tape&)> back) {
    Node n;
    n.value = std::move(value);
    n.needs_grad = needs_grad;
    n.back = needs_grad ? std::move(back) : nullptr;
    nodes_.push_back(std::move(n));
    return Var{static_cast<int>(nodes_.size()) - 1};
}

Var Tape::leaf(const Tensor& v) { return push(v, true, nullptr); }

Var Tape::constant(Tensor v) { return push(std::move(v), false, nullptr); }

const Tensor& Tape::grad(Var v) const {
    const Node& n = nodes_[static_cast<size_t>(v.id)];
    return n.grad;
}

Tensor& Tape::grad_mut(int id) {
    Node& n = node(id);
    if (n.grad.empty()) n.grad = Tensor::zeros(n.value.shape());
    return n.grad;
}

Var Tape::add(Var a, Var b) {
    const Tensor& va = val(a);
    const Tensor& vb = val(b);
    if (!va.same_shape(vb)) throw ShapeMismatch("tape add");
    Tensor out = va;
    out.add_(vb);
    bool ng = needs_grad(a) || needs_grad(b);
    Var r = push(std::move(out), ng, nullptr);
    if (ng) {
        int ia = a.id, ib = b.id, io = r.id;
        bool ga = needs_grad(a), gb = needs_grad(b);
        node(io).back = [ia, ib, io, ga, gb](Tape& t) {
            const Tensor& g = t.node(io).grad;
            if (g.empty()) return;
            if (ga) t.grad_mut(ia).add_(g);
            if (gb) t.grad_mut(ib).add_(g);
        };
    }
    return r;
}

Var Tape::sub(Var a, Var b) {
    const Tensor& va = val(a);
    const Tensor& vb = val(b);
    if (!va.same_shape(vb)) throw ShapeMismatch("tape sub");
    Tensor out = va;
    out.sub_(vb);
    bool ng = needs_grad(a) || needs_grad(b);
    Var r = push(std::move(out), ng, nullptr);
    if (ng) {
        int ia = a.id, ib = b.id, io = r.id;
        bool ga = needs_grad(a), gb = needs_grad(b);
        node(io).back = [ia, ib, io, ga, gb](Tape& t) {
            const Tensor& g = t.node(io).grad;
            if (g.empty()) return;
            if (ga) t.grad_mut(ia).add_(g);
            if (gb) t.grad_mut(ib).sub_(g);
        };
    }
    return r;
}

Var Tape::mul(Var a, Var b) {
    const Tensor& va = val(a);
    const Tensor& vb = val(b);
    if (!va.same_shape(vb)) throw ShapeMismatch("tape mul");
    Tensor out = va;
    for (int64_t i = 0; i < out.size(); ++i) out[i] *= vb[i];
    bool ng = needs_grad(a) || needs_grad(b);
    Var r = push(std::move(out), ng, nullptr);
    if (ng) {
        int ia = a.id, ib = b.id, io = r.id;
        bool ga = needs_grad(a), gb = needs_grad(b);
        node(io).back = [ia, ib, io, ga, gb](Tape& t) {
            const Tensor& g = t.node(io).grad;
            if (g.empty()) return;
            const Tensor& va2 = t.node(ia).value;
            const Tensor& vb2 = t.node(ib).value;
            if (ga) {
                Tensor& da = t.grad_mut(ia);
                for (int64_t i = 0; i < g.size(); ++i) da[i] += g[i] * vb2[i];
            }
            if (gb) {
                Tensor& db = t.grad_mut(ib);
                for (int64_t i = 0; i < g.size(); ++i) db[i] += g[i] * va2[i];
            }
        };
    }
    return r;
}

Var Tape::scale(Var a, double s) {
    Tensor out = val(a);
    out.scale_(s);
    bool ng = needs_grad(a);
    Var r = push(std::move(out), ng, nullptr);
    if (ng) {
        int ia = a.id, io = r.id;
        node(io).back = [ia, io, s](Tape& t) {
            const Tensor& g = t.node(io).grad;
            if (g.empty()) return;
            t.grad_mut(ia).axpy_(s, g);
        };
    }
    return r;
}

Var Tape::silu(Var a) {
    const Tensor& va = val(a);
    Tensor out(va.shape());
    for (int64_t i = 0; i < va.size(); ++i) out[i] = va[i] * sigmoid(va[i]);
    bool ng = needs_grad(a);
    Var r = push(std::move(out), ng, nullptr);
    if (ng) {
        int ia = a.id, io = r.id;
        node(io).back = [ia, io](Tape& t) {
            const Tensor& g = t.node(io).grad;
            if (g.empty()) return;
            const Tensor& x = t.node(ia).value;
            Tensor& da = t.grad_mut(ia);
            for (int64_t i = 0; i < x.size(); ++i) {
                double s = sigmoid(x[i]);
                da[i] += g[i] * s * (1.0 + x[i] * (1.0 - s));
            }
        };
    }
    return r;
}

Var Tape::add_rowvec(Var m, Var v) {
    const Tensor& vm = val(m);
    const Tensor& vv = val(v);
    if (vm.rank() != 2 || vv.rank() != 1 || vm.dim(1) != vv.dim(0)) throw ShapeMismatch("tape add_rowvec");
    Tensor out = vm;
    int rows = vm.dim(0), cols = vm.dim(1);
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) out.at(i, j) += vv[j];
    bool ng = needs_grad(m) || needs_grad(v);
    Var r = push(std::move(out), ng, nullptr);
    if (ng) {
        int im = m.id, iv = v.id, io = r.id;
        bool gm = needs_grad(m), gv = needs_grad(v);
        node(io).back = [im, iv, io, gm, gv, rows, cols](Tape& t) {
            const Tensor& g = t.node(io).grad;
            if (g.empty()) return;
            if (gm) t.grad_mut(im).add_(g);
            if (gv) {
                Tensor& dv = t.grad_mut(iv);
                for (int i = 0; i < rows; ++i)
                    for (int j = 0; j < cols; ++j) dv[j] += g.at(i, j);
            }
        };
    }
    return r;
}

Var Tape::matmul(Var a, Var b) {
    const Tensor& va = val(a);
    const Tensor& vb = val(b);
    if (va.rank() != 2 || vb.rank() != 2 || va.dim(1) != vb.dim(0)) throw ShapeMismatch("tape matmul");
    int m = va.dim(0), k = va.dim(1), n = vb.dim(1);
    Tensor out({m, n});
    for (int i = 0; i < m; ++i)
        for (int p = 0; p < k; ++p) {
            double av = va.at(i, p);
            if (av == 0.0) continue;
            for (int j = 0; j < n; ++j) out.at(i, j) += av * vb.at(p, j);
        }
    bool ng = needs_grad(a) || needs_grad(b);
    Var r = push(std::move(out), ng, nullptr);
    if (ng) {
        int ia = a.id, ib = b.id, io = r.id;
        bool ga = needs_grad(a), gb = needs_grad(b);
        node(io).back = [ia, ib, io, ga, gb, m, k, n](Tape& t) {
            const Tensor& g = t.node(io).grad;
            if (g.empty()) return;
            const Tensor& va2 = t.node(ia).value;
            const Tensor& vb2 = t.node(ib).value;
            if (ga) {  // dA = G * B^T
                Tensor& da = t.grad_mut(ia);
                for (int i = 0; i < m; ++i)
                    for (int p = 0; p < k; ++p) {
                        double s = 0.0;
                        for (int j = 0; j < n; ++j) s += g.at(i, j) * vb2.at(p, j);
                        da.at(i, p) += s;
                    }
            }
            if (gb) {  // dB = A^T * G
                Tensor& db = t.grad_mut(ib);
                for (int p = 0; p < k; ++p)
                    for (int j = 0; j < n; ++j) {
                        double s = 0.0;
                        for (int i = 0; i < m; ++i) s += va2.at(i, p) * g.at(i, j);
                        db.at(p, j) += s;
                    }
            }
        };
    }
    return r;
}

Var Tape::matmul_nt(Var a, Var b) {
    const Tensor& va = val(a);
    const Tensor& vb = val(b);
    if (va.rank() != 2 || vb.rank() != 2 || va.dim(1) != vb.dim(1)) throw ShapeMismatch("tape matmul_nt");
    int m = va.dim(0), k = va.dim(1), n = vb.dim(0);
    Tensor out({m, n});
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) {
            double s = 0.0;
            for (int p = 0; p < k; ++p) s += va.at(i, p) * vb.at(j, p);
            out.at(i, j) = s;
        }
    bool ng = needs_grad(a) || needs_grad(b);
    Var r = push(std::move(out), ng, nullptr);
    if (ng) {
        int ia = a.id, ib = b.id, io = r.id;
        bool ga = needs_grad(a), gb = needs_grad(b);
        node(io).back = [ia, ib, io, ga, gb, m, k, n](Tape& t) {
            const Tensor& g = t.node(io).grad;
            if (g.empty()) return;
            const Tensor& va2 = t.node(ia).value;
            const Tensor& vb2 = t.node(ib).value;
            if (ga) {  // dA = G * B
                Tensor& da = t.grad_mut(ia);
                for (int i = 0; i < m; ++i)
                    for (int p = 0; p < k; ++p) {
                        double s = 0.0;
                        for (int j = 0; j < n; ++j) s += g.at(i, j) * vb2.at(j, p);
                        da.at(i, p) += s;
                    }
            }
            if (gb) {  // dB = G^T * A
                Tensor& db = t.grad_mut(ib);
                for (int j = 0; j < n; ++j)
                    for (int p = 0; p < k; ++p) {
                        double s = 0.0;
                        for (int i = 0; i < m; ++i) s += g.at(i, j) * va2.at(i, p);
                        db.at(j, p) += s;
                    }
            }
        };
    }
    return r;
}

Var Tape::matmul_tn(Var a, Var b) {
    const Tensor& va = val(a);
    const Tensor& vb = val(b);
    if (va.rank() != 2 || vb.rank() != 2 || va.dim(0) != vb.dim(0)) throw ShapeMismatch("tape matmul_tn");
    int m = va.dim(0), k = va.dim(1), n = vb.dim(1);
    Tensor out({k, n});
    for (int p = 0; p < k; ++p)
        for (int j = 0; j < n; ++j) {
            double s = 0.0;
            for (int i = 0; i < m; ++i) s += va.at(i, p) * vb.at(i, j);
            out.at(p, j) = s;
        }
    bool ng = needs_grad(a) || needs_grad(b);
    Var r = push(std::move(out), ng, nullptr);
    if (ng) {
        int ia = a.id, ib = b.id, io = r.id;
        bool ga = needs_grad(a), gb = needs_grad(b);
        node(io).back = [ia, ib, io, ga, gb, m, k, n](Tape& t) {
            const Tensor& g = t.node(io).grad;  // (k,n)
            if (g.empty()) return;
            const Tensor& va2 = t.node(ia).value;  // (m,k)
            const Tensor& vb2 = t.node(ib).value;  // (m,n)
            if (ga) {  // dA = B * G^T
                Tensor& da = t.grad_mut(ia);
                for (int i = 0; i < m; ++i)
                    for (int p = 0; p < k; ++p) {
                        double s = 0.0;
                        for (int j = 0; j < n; ++j) s += vb2.at(i, j) * g.at(p, j);
                        da.at(i, p) += s;
                    }
            }
            if (gb) {  // dB = A * G
                Tensor& db = t.grad_mut(ib);
                for (int i = 0; i < m; ++i)
                    for (int j = 0; j < n; ++j) {
                        double s = 0.0;
                        for (int p = 0; p < k; ++p) s += va2.at(i, p) * g.at(p, j);
                        db.at(i, j) += s;
                    }
            }
        };
    }
    return r;
}

Var Tape::softmax_rows(Var a) {
    const Tensor& va = val(a);
    if (va.rank() != 2) throw ShapeMismatch("tape softmax_rows");
    int rows = va.dim(0), cols = va.dim(1);
    Tensor out(va.shape());
    for (int i = 0; i < rows; ++i) {
        double mx = va.at(i, 0);
        for (int j = 1; j < cols; ++j) mx = std::max(mx, va.at(i, j));
        double z = 0.0;
        for (int j = 0; j < cols; ++j) {
            double e = std::exp(va.at(i, j) - mx);
            out.at(i, j) = e;
            z += e;
        }
        for (int j = 0; j < cols; ++j) out.at(i, j) /= z;
    }
    bool ng = needs_grad(a);
    Var r = push(std::move(out), ng, nullptr);
    if (ng) {
        int ia = a.id, io = r.id;
        node(io).back = [ia, io, rows, cols](Tape& t) {
            const Tensor& g = t.node(io).grad;
            if (g.empty()) return;
            const Tensor& y = t.node(io).value;
            Tensor& da = t.grad_mut(ia);
            for (int i = 0; i < rows; ++i) {
                double dy_dot_y = 0.0;
                for (int j = 0; j < cols; ++j) dy_dot_y += g.at(i, j) * y.at(i, j);
                for (int j = 0; j < cols; ++j) da.at(i, j) += y.at(i, j) * (g.at(i, j) - dy_dot_y);
            }
        };
    }
    return r;
}

Var Tape::layer_norm(Var x, Var gamma, Var beta, double eps) {
    const Tensor& vx = val(x);
    if (vx.rank() != 2) throw ShapeMismatch("tape layer_norm");
    int rows = vx.dim(0), cols = vx.dim(1);
    const Tensor& vg = val(gamma);
    const Tensor& vb = val(beta);
    if (vg.size() != cols || vb.size() != cols) throw ShapeMismatch("tape layer_norm params");
    Tensor out(vx.shape());
    Tensor xhat(vx.shape());
    Tensor inv_sigma({rows});
    for (int i = 0; i < rows; ++i) {
        double mean = 0.0;
        for (int j = 0; j < cols; ++j) mean += vx.at(i, j);
        mean /= cols;
        double var = 0.0;
        for (int j = 0; j < cols; ++j) {
            double d = vx.at(i, j) - mean;
            var += d * d;
        }
        var /= cols;
        double is = 1.0 / std::sqrt(var + eps);
        inv_sigma[i] = is;
        for (int j = 0; j < cols; ++j) {
            double h = (vx.at(i, j) - mean) * is;
            xhat.at(i, j) = h;
            out.at(i, j) = h * vg[j] + vb[j];
        }
    }
    bool ng = needs_grad(x) || needs_grad(gamma) || needs_grad(beta);
    Var r = push(std::move(out), ng, nullptr);
    if (ng) {
        int ix = x.id, ig = gamma.id, ib = beta.id, io = r.id;
        bool gx = needs_grad(x), gg = needs_grad(gamma), gb = needs_grad(beta);
        auto xh = std::make_shared<Tensor>(std::move(xhat));
        auto is = std::make_shared<Tensor>(std::move(inv_sigma));
        node(io).back = [ix, ig, ib, io, gx, gg, gb, rows, cols, xh, is](Tape& t) {
            const Tensor& g = t.node(io).grad;
            if (g.empty()) return;
            const Tensor& vg2 = t.node(ig).value;
            if (gg) {
                Tensor& dg = t.grad_mut(ig);
                for (int i = 0; i < rows; ++i)
                    for (int j = 0; j < cols; ++j) dg[j] += g.at(i, j) * xh->at(i, j);
            }
            if (gb) {
                Tensor& db = t.grad_mut(ib);
                for (int i = 0; i < rows; ++i)
                    for (int j = 0; j < cols; ++j) db[j] += g.at(i, j);
            }
            if (gx) {
                Tensor& dx = t.grad_mut(ix);
                for (int i = 0; i < rows; ++i) {
                    // dxhat = g * gamma; dx = (dxhat - mean(dxhat) - xhat*mean(dxhat*xhat)) / sigma
                    double m1 = 0.0, m2 = 0.0;
                    for (int j = 0; j < cols; ++j) {
                        double dxh = g.at(i, j) * vg2[j];
                        m1 += dxh;
                        m2 += dxh * xh->at(i, j);
                    }
                    m1 /= cols;
                    m2 /= cols;
                    for (int j = 0; j < cols; ++j) {
                        double dxh = g.at(i, j) * vg2[j];
                        dx.at(i, j) += (dxh - m1 - xh->at(i, j) * m2) * (*is)[i];
                    }
                }
            }
        };
    }
    return r;
}

Var Tape::gather_rows(Var table, const std::vector<int>& ids) {
    const Tensor& vt = val(table);
    if (vt.rank() != 2) throw ShapeMismatch("tape gather_rows");
    int cols = vt.dim(1);
    Tensor out({static_cast<int>(ids.size()), cols});
    for (size_t i = 0; i < ids.size(); ++i)
        for (int j = 0; j < cols; ++j) out.at(static_cast<int>(i), j) = vt.at(ids[i], j);
    bool ng = needs_grad(table);
    Var r = push(std::move(out), ng, nullptr);
    if (ng) {
        int it = table.id, io = r.id;
        node(io).back = [it, io, ids, cols](Tape& t) {
            const Tensor& g = t.node(io).grad;
            if (g.empty()) return;
            Tensor& dt = t.grad_mut(it);
            for (size_t i = 0; i < ids.size(); ++i)
                for (int j = 0; j < cols; ++j) dt.at(ids[i], j) += g.at(static_cast<int>(i), j);
        };
    }
    return r;
}

Var Tape::row(Var m, int rr) {
    const Tensor& vm = val(m);
    if (vm.rank() != 2) throw ShapeMismatch("tape row");
    int cols = vm.dim(1);
    Tensor out({cols});
    for (int j = 0; j < cols; ++j) out[j] = vm.at(rr, j);
    bool ng = needs_grad(m);
    Var r = push(std::move(out), ng, nullptr);
    if (ng) {
        int im = m.id, io = r.id;
        node(io).back = [im, io, rr, cols](Tape& t) {
            const Tensor& g = t.node(io).grad;
            if (g.empty()) return;
            Tensor& dm = t.grad_mut(im);
            for (int j = 0; j < cols; ++j) dm.at(rr, j) += g[j];
        };
    }
    return r;
}

Var Tape::scatter_rows(Var base, Var rows, const std::vector<int>& positions) {
    const Tensor& vb = val(base);
    const Tensor& vr = val(rows);
    if (vb.rank() != 2 || vr.rank() != 2 || vb.dim(1) != vr.dim(1)) throw ShapeMismatch("tape scatter_rows");
    if (static_cast<int>(positions.size()) != vr.dim(0)) throw ShapeMismatch("tape scatter_rows positions");
    int cols = vb.dim(1);
    Tensor out = vb;
    for (size_t i = 0; i < positions.size(); ++i)
        for (int j = 0; j < cols; ++j) out.at(positions[i], j) = vr.at(static_cast<int>(i), j);
    bool ng = needs_grad(base) || needs_grad(rows);
    Var r = push(std::move(out), ng, nullptr);
    if (ng) {
        int ib = base.id, ir = rows.id, io = r.id;
        bool gb = needs_grad(base), gr = needs_grad(rows);
        node(io).back = [ib, ir, io, gb, gr, positions, cols](Tape& t) {
            const Tensor& g = t.node(io).grad;
            if (g.empty()) return;
            if (gr) {
                Tensor& dr = t.grad_mut(ir);
                for (size_t i = 0; i < positions.size(); ++i)
                    for (int j = 0; j < cols; ++j) dr.at(static_cast<int>(i), j) += g.at(positions[i], j);
            }
            if (gb) {
                Tensor masked = g;
                for (int p : positions)
                    for (int j = 0; j < cols; ++j) masked.at(p, j) = 0.0;
                t.grad_mut(ib).add_(masked);
            }
        };
    }
    return r;
}

Var Tape::stack_rows(const std::vector<Var>& rows) {
    if (rows.empty()) throw ShapeMismatch("tape stack_rows: empty");
    int cols = static_cast<int>(val(rows[0]).size());
    Tensor out({static_cast<int>(rows.size()), cols});
    bool ng = false;
    for (size_t i = 0; i < rows.size(); ++i) {
        const Tensor& v = val(rows[i]);
        if (v.size() != cols) throw ShapeMismatch("tape stack_rows: ragged");
        for (int j = 0; j < cols; ++j) out.at(static_cast<int>(i), j) = v[j];
        ng = ng || needs_grad(rows[i]);
    }
    Var r = push(std::move(out), ng, nullptr);
    if (ng) {
        std::vector<int> ids;
        std::vector<bool> gs;
        for (Var v : rows) {
            ids.push_back(v.id);
            gs.push_back(needs_grad(v));
        }
        int io = r.id;
        node(io).back = [ids, gs, io, cols](Tape& t) {
            const Tensor& g = t.node(io).grad;
            if (g.empty()) return;
            for (size_t i = 0; i < ids.size(); ++i) {
                if (!gs[i]) continue;
                Tensor& dv = t.grad_mut(ids[i]);
                for (int j = 0; j < cols; ++j) dv[j] += g.at(static_cast<int>(i), j);
            }
        };
    }
    return r;
}

Var Tape::l2_normalize(Var v) {
    const Tensor& vv = val(v);
    double n = norm2(vv);
    if (n < 1e-12) throw ZeroVector("l2_normalize");
    Tensor out = vv;
    out.scale_(1.0 / n);
    bool ng = needs_grad(v);
    Var r = push(std::move(out), ng, nullptr);
    if (ng) {
        int iv = v.id, io = r.id;
        node(io).back = [iv, io, n](Tape& t) {
            const Tensor& g = t.node(io).grad;
            if (g.empty()) return;
            const Tensor& y = t.node(io).value;
            double ydotg = dot_flat(y, g);
            Tensor& dv = t.grad_mut(iv);
            for (int64_t i = 0; i < g.size(); ++i) dv[i] += (g[i] - y[i] * ydotg) / n;
        };
    }
    return r;
}

Var Tape::dot(Var a, Var b) {
    const Tensor& va = val(a);
    const Tensor& vb = val(b);
    if (va.size() != vb.size()) throw ShapeMismatch("tape dot");
    Tensor out({1});
    out[0] = dot_flat(va, vb);
    bool ng = needs_grad(a) || needs_grad(b);
    Var r = push(std::move(out), ng, nullptr);
    if (ng) {
        int ia = a.id, ib = b.id, io = r.id;
        bool ga = needs_grad(a), gb = needs_grad(b);
        node(io).back = [ia, ib, io, ga, gb](Tape& t) {
            const Tensor& g = t.node(io).grad;
            if (g.empty()) return;
            double gs = g[0];
            if (ga) t.grad_mut(ia).axpy_(gs, t.node(ib).value);
            if (gb) t.grad_mut(ib).axpy_(gs, t.node(ia).value);
        };
    }
    return r;
}

Var Tape::sum(Var a) {
    const Tensor& va = val(a);
    Tensor out({1});
    double s = 0.0;
    for (int64_t i = 0; i < va.size(); ++i) s += va[i];
    out[0] = s;
    bool ng = needs_grad(a);
    Var r = push(std::move(out), ng, nullptr);
    if (ng) {
        int ia = a.id, io = r.id;
        node(io).back = [ia, io](Tape& t) {
            const Tensor& g = t.node(io).grad;
            if (g.empty()) return;
            Tensor& da = t.grad_mut(ia);
            for (int64_t i = 0; i < da.size(); ++i) da[i] += g[0];
        };
    }
    return r;
}

Var Tape::sq_norm(Var a) {
    const Tensor& va = val(a);
    Tensor out({1});
    out[0] = sum_squares(va);
    bool ng = needs_grad(a);
    Var r = push(std::move(out), ng, nullptr);
    if (ng) {
        int ia = a.id, io = r.id;
        node(io).back = [ia, io](Tape& t) {
            const Tensor& g = t.node(io).grad;
            if (g.empty()) return;
            t.grad_mut(ia).axpy_(2.0 * g[0], t.node(ia).value);
        };
    }
    return r;
}

Var Tape::mse_sum(Var a, Var b) {
    const Tensor& va = val(a);
    const Tensor& vb = val(b);
    if (!va.same_shape(vb)) throw ShapeMismatch("tape mse_sum");
    Tensor out({1});
    double s = 0.0;
    for (int64_t i = 0; i < va.size(); ++i) {
        double d = va[i] - vb[i];
        s += d * d;
    }
    out[0] = s;
    bool ng = needs_grad(a) || needs_grad(b);
    Var r = push(std::move(out), ng, nullptr);
    if (ng) {
        int ia = a.id, ib = b.id, io = r.id;
        bool ga = needs_grad(a), gb = needs_grad(b);
        node(io).back = [ia, ib, io, ga, gb](Tape& t) {
            const Tensor& g = t.node(io).grad;
            if (g.empty()) return;
            const Tensor& va2 = t.node(ia).value;
            const Tensor& vb2 = t.node(ib).value;
            double gs = 2.0 * g[0];
            if (ga) {
                Tensor& da = t.grad_mut(ia);
                for (int64_t i = 0; i < va2.size(); ++i) da[i] += gs * (va2[i] - vb2[i]);
            }
            if (gb) {
                Tensor& db = t.grad_mut(ib);
                for (int64_t i = 0; i < va2.size(); ++i) db[i] -= gs * (va2[i] - vb2[i]);
            }
        };
    }
    return r;
}

Var Tape::div_scalar(Var a, Var b) {
    const Tensor& va = val(a);
    const Tensor& vb = val(b);
    if (va.size() != 1 || vb.size() != 1) throw ShapeMismatch("tape div_scalar");
    Tensor out({1});
    out[0] = va[0] / vb[0];
    bool ng = needs_grad(a) || needs_grad(b);
    Var r = push(std::move(out), ng, nullptr);
    if (ng) {
        int ia = a.id, ib = b.id, io = r.id;
        bool ga = needs_grad(a), gb = needs_grad(b);
        node(io).back = [ia, ib, io, ga, gb](Tape& t) {
            const Tensor& g = t.node(io).grad;
            if (g.empty()) return;
            double av = t.node(ia).value[0];
            double bv = t.node(ib).value[0];
            if (ga) t.grad_mut(ia)[0] += g[0] / bv;
            if (gb) t.grad_mut(ib)[0] -= g[0] * av / (bv * bv);
        };
    }
    return r;
}

Var Tape::add_scalars(std::vector<Var> terms, std::vector<double> weights) {
    if (terms.size() != weights.size() || terms.empty()) throw ShapeMismatch("tape add_scalars");
    Tensor out({1});
    bool ng = false;
    for (size_t i = 0; i < terms.size(); ++i) {
        out[0] += weights[i] * val(terms[i])[0];
        ng = ng || needs_grad(terms[i]);
    }
    Var r = push(std::move(out), ng, nullptr);
    if (ng) {
        std::vector<int> ids;
        std::vector<bool> gs;
        for (Var v : terms) {
            ids.push_back(v.id);
            gs.push_back(needs_grad(v));
        }
        int io = r.id;
        node(io).back = [ids, gs, weights, io](Tape& t) {
            const Tensor& g = t.node(io).grad;
            if (g.empty()) return;
            for (size_t i = 0; i < ids.size(); ++i)
                if (gs[i]) t.grad_mut(ids[i])[0] += weights[i] * g[0];
        };
    }
    return r;
}

Var Tape::mul_scalar(Var a, Var s) {
    const Tensor& va = val(a);
    const Tensor& vs = val(s);
    if (vs.size() != 1) throw ShapeMismatch("tape mul_scalar");
    Tensor out = va;
    out.scale_(vs[0]);
    bool ng = needs_grad(a) || needs_grad(s);
    Var r = push(std::move(out), ng, nullptr);
    if (ng) {
        int ia = a.id, is = s.id, io = r.id;
        bool ga = needs_grad(a), gs = needs_grad(s);
        node(io).back = [ia, is, io, ga, gs](Tape& t) {
            const Tensor& g = t.node(io).grad;
            if (g.empty()) return;
            if (ga) t.grad_mut(ia).axpy_(t.node(is).value[0], g);
            if (gs) t.grad_mut(is)[0] += dot_flat(g, t.node(ia).value);
        };
    }
    return r;
}

Var Tape::conv2d_3x3(Var x, Var w, Var b) {
    const Tensor& vx = val(x);
    const Tensor& vw = val(w);
    const Tensor& vb = val(b);
    if (vx.rank() != 3 || vw.rank() != 4 || vw.dim(2) != 3 || vw.dim(3) != 3) throw ShapeMismatch("tape conv2d");
    int cin = vx.dim(0), h = vx.dim(1), ww = vx.dim(2);
    int cout = vw.dim(0);
    if (vw.dim(1) != cin || vb.size() != cout) throw ShapeMismatch("tape conv2d params");
    Tensor out({cout, h, ww});
    auto widx = [cin](int co, int ci, int dy, int dx) {
        return ((static_cast<int64_t>(co) * cin + ci) * 3 + dy) * 3 + dx;
    };
    for (int co = 0; co < cout; ++co)
        for (int y = 0; y < h; ++y)
            for (int xx = 0; xx < ww; ++xx) {
                double s = vb[co];
                for (int ci = 0; ci < cin; ++ci)
                    for (int dy = 0; dy < 3; ++dy) {
                        int iy = y + dy - 1;
                        if (iy < 0 || iy >= h) continue;
                        for (int dx = 0; dx < 3; ++dx) {
                            int ix = xx + dx - 1;
                            if (ix < 0 || ix >= ww) continue;
                            s += vw[widx(co, ci, dy, dx)] * vx.at3(ci, iy, ix);
                        }
                    }
                out.at3(co, y, xx) = s;
            }
    bool ng = needs_grad(x) || needs_grad(w) || needs_grad(b);
    Var r = push(std::move(out), ng, nullptr);
    if (ng) {
        int ix0 = x.id, iw0 = w.id, ib0 = b.id, io = r.id;
        bool gx = needs_grad(x), gw = needs_grad(w), gb = needs_grad(b);
        node(io).back = [ix0, iw0, ib0, io, gx, gw, gb, cin, cout, h, ww, widx](Tape& t) {
            const Tensor& g = t.node(io).grad;
            if (g.empty()) return;
            const Tensor& vx2 = t.node(ix0).value;
            const Tensor& vw2 = t.node(iw0).value;
            Tensor* dx = gx ? &t.grad_mut(ix0) : nullptr;
            Tensor* dw = gw ? &t.grad_mut(iw0) : nullptr;
            Tensor* db = gb ? &t.grad_mut(ib0) : nullptr;
            for (int co = 0; co < cout; ++co)
                for (int y = 0; y < h; ++y)
                    for (int xx = 0; xx < ww; ++xx) {
                        double go = g.at3(co, y, xx);
                        if (db) (*db)[co] += go;
                        for (int ci = 0; ci < cin; ++ci)
                            for (int dy = 0; dy < 3; ++dy) {
                                int iy = y + dy - 1;
                                if (iy < 0 || iy >= h) continue;
                                for (int dx2 = 0; dx2 < 3; ++dx2) {
                                    int ixx = xx + dx2 - 1;
                                    if (ixx < 0 || ixx >= ww) continue;
                                    if (dw) (*dw)[widx(co, ci, dy, dx2)] += go * vx2.at3(ci, iy, ixx);
                                    if (dx) dx->at3(ci, iy, ixx) += go * vw2[widx(co, ci, dy, dx2)];
                                }
                            }
                    }
        };
    }
    return r;
}

Var Tape::chw_to_nc(Var x) {
    const Tensor& vx = val(x);
    if (vx.rank() != 3) throw ShapeMismatch("tape chw_to_nc");
    int c = vx.dim(0), h = vx.dim(1), w = vx.dim(2);
    Tensor out({h * w, c});
    for (int ci = 0; ci < c; ++ci)
        for (int y = 0; y < h; ++y)
            for (int xx = 0; xx < w; ++xx) out.at(y * w + xx, ci) = vx.at3(ci, y, xx);
    bool ng = needs_grad(x);
    Var r = push(std::move(out), ng, nullptr);
    if (ng) {
        int ix = x.id, io = r.id;
        node(io).back = [ix, io, c, h, w](Tape& t) {
            const Tensor& g = t.node(io).grad;
            if (g.empty()) return;
            Tensor& dx = t.grad_mut(ix);
            for (int ci = 0; ci < c; ++ci)
                for (int y = 0; y < h; ++y)
                    for (int xx = 0; xx < w; ++xx) dx.at3(ci, y, xx) += g.at(y * w + xx, ci);
        };
    }
    return r;
}

Var Tape::nc_to_chw(Var x, int c, int h, int w) {
    const Tensor& vx = val(x);
    if (vx.rank() != 2 || vx.dim(0) != h * w || vx.dim(1) != c) throw ShapeMismatch("tape nc_to_chw");
    Tensor out({c, h, w});
    for (int ci = 0; ci < c; ++ci)
        for (int y = 0; y < h; ++y)
            for (int xx = 0; xx < w; ++xx) out.at3(ci, y, xx) = vx.at(y * w + xx, ci);
    bool ng = needs_grad(x);
    Var r = push(std::move(out), ng, nullptr);
    if (ng) {
        int ix = x.id, io = r.id;
        node(io).back = [ix, io, c, h, w](Tape& t) {
            const Tensor& g = t.node(io).grad;
            if (g.empty()) return;
            Tensor& dx = t.grad_mut(ix);
            for (int ci = 0; ci < c; ++ci)
                for (int y = 0; y < h; ++y)
                    for (int xx = 0; xx < w; ++xx) dx.at(y * w + xx, ci) += g.at3(ci, y, xx);
        };
    }
    return r;
}

Var Tape::film(Var x, Var g0, Var b0) {
    const Tensor& vx = val(x);
    const Tensor& vg = val(g0);
    const Tensor& vb = val(b0);
    if (vx.rank() != 3 || vg.size() != vx.dim(0) || vb.size() != vx.dim(0)) throw ShapeMismatch("tape film");
    int c = vx.dim(0), h = vx.dim(1), w = vx.dim(2);
    Tensor out(vx.shape());
    for (int ci = 0; ci < c; ++ci) {
        double s = 1.0 + vg[ci];
        for (int y = 0; y < h; ++y)
            for (int xx = 0; xx < w; ++xx) out.at3(ci, y, xx) = vx.at3(ci, y, xx) * s + vb[ci];
    }
    bool ng = needs_grad(x) || needs_grad(g0) || needs_grad(b0);
    Var r = push(std::move(out), ng, nullptr);
    if (ng) {
        int ix = x.id, ig = g0.id, ib = b0.id, io = r.id;
        bool gx = needs_grad(x), gg = needs_grad(g0), gb = needs_grad(b0);
        node(io).back = [ix, ig, ib, io, gx, gg, gb, c, h, w](Tape& t) {
            const Tensor& g = t.node(io).grad;
            if (g.empty()) return;
            const Tensor& vx2 = t.node(ix).value;
            const Tensor& vg2 = t.node(ig).value;
            for (int ci = 0; ci < c; ++ci) {
                double sum_g = 0.0, sum_gx = 0.0;
                for (int y = 0; y < h; ++y)
                    for (int xx = 0; xx < w; ++xx) {
                        double go = g.at3(ci, y, xx);
                        sum_g += go;
                        sum_gx += go * vx2.at3(ci, y, xx);
                        if (gx) t.grad_mut(ix).at3(ci, y, xx) += go * (1.0 + vg2[ci]);
                    }
                if (gg) t.grad_mut(ig)[ci] += sum_gx;
                if (gb) t.grad_mut(ib)[ci] += sum_g;
            }
        };
    }
    return r;
}

void Tape::backward(Var loss) {
    const Tensor& lv = val(loss);
    if (lv.size() != 1) throw ShapeMismatch("backward expects a scalar loss");
    grad_mut(loss.id)[0] = 1.0;
    for (int i = loss.id; i >= 0; --i) {
        Node& n = node(i);
        if (!n.needs_grad || !n.back || n.grad.empty()) continue;
        n.back(*this);
    }
}

}  // namespace celab
