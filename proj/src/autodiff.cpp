#include "mvaf/autodiff.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <unordered_set>

namespace mvaf::ad {

namespace {

std::atomic<long long> g_next_id{1};

std::shared_ptr<Node> new_node(Tensor value, std::vector<std::shared_ptr<Node>> parents,
                               std::function<void(Node&)> fn) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    n->grad = Tensor(n->value.shape);
    n->id = g_next_id.fetch_add(1);
    n->parents = std::move(parents);
    n->backward_fn = std::move(fn);
    return n;
}

}  // namespace

Var make_leaf(Tensor value) { return Var(new_node(std::move(value), {}, nullptr)); }

void backward(const Var& root) {
    std::vector<Node*> order;
    std::unordered_set<Node*> seen;
    std::vector<Node*> stack{root.node().get()};
    while (!stack.empty()) {
        Node* n = stack.back();
        stack.pop_back();
        if (!seen.insert(n).second) continue;
        order.push_back(n);
        for (auto& p : n->parents) stack.push_back(p.get());
    }
    std::sort(order.begin(), order.end(), [](Node* a, Node* b) { return a->id > b->id; });
    std::fill(root.node()->grad.data.begin(), root.node()->grad.data.end(), 1.0);
    for (Node* n : order)
        if (n->backward_fn) n->backward_fn(*n);
}

// ---- elementwise ----

Var add(const Var& a, const Var& b) {
    require_same_shape(a.value(), b.value(), "add");
    Tensor out = a.value();
    for (int i = 0; i < out.size(); ++i) out[i] += b.value()[i];
    return Var(new_node(std::move(out), {a.node(), b.node()}, [](Node& n) {
        for (int i = 0; i < n.grad.size(); ++i) {
            n.parents[0]->grad[i] += n.grad[i];
            n.parents[1]->grad[i] += n.grad[i];
        }
    }));
}

Var sub(const Var& a, const Var& b) {
    require_same_shape(a.value(), b.value(), "sub");
    Tensor out = a.value();
    for (int i = 0; i < out.size(); ++i) out[i] -= b.value()[i];
    return Var(new_node(std::move(out), {a.node(), b.node()}, [](Node& n) {
        for (int i = 0; i < n.grad.size(); ++i) {
            n.parents[0]->grad[i] += n.grad[i];
            n.parents[1]->grad[i] -= n.grad[i];
        }
    }));
}

Var mul(const Var& a, const Var& b) {
    require_same_shape(a.value(), b.value(), "mul");
    Tensor out = a.value();
    for (int i = 0; i < out.size(); ++i) out[i] *= b.value()[i];
    return Var(new_node(std::move(out), {a.node(), b.node()}, [](Node& n) {
        const Tensor& av = n.parents[0]->value;
        const Tensor& bv = n.parents[1]->value;
        for (int i = 0; i < n.grad.size(); ++i) {
            n.parents[0]->grad[i] += n.grad[i] * bv[i];
            n.parents[1]->grad[i] += n.grad[i] * av[i];
        }
    }));
}

Var scale(const Var& a, double s) {
    Tensor out = a.value();
    for (double& v : out.data) v *= s;
    return Var(new_node(std::move(out), {a.node()}, [s](Node& n) {
        for (int i = 0; i < n.grad.size(); ++i) n.parents[0]->grad[i] += n.grad[i] * s;
    }));
}

Var add_scalar(const Var& a, double s) {
    Tensor out = a.value();
    for (double& v : out.data) v += s;
    return Var(new_node(std::move(out), {a.node()}, [](Node& n) {
        for (int i = 0; i < n.grad.size(); ++i) n.parents[0]->grad[i] += n.grad[i];
    }));
}

Var matmul(const Var& a, const Var& b) {
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    if (av.ndim() != 2 || bv.ndim() != 2 || av.dim(1) != bv.dim(0))
        throw ShapeError("matmul: incompatible shapes " + av.shape_str() + " x " + bv.shape_str());
    int N = av.dim(0), K = av.dim(1), M = bv.dim(1);
    Tensor out({N, M});
    for (int i = 0; i < N; ++i)
        for (int k = 0; k < K; ++k) {
            double aik = av.at(i, k);
            if (aik == 0.0) continue;
            for (int j = 0; j < M; ++j) out.at(i, j) += aik * bv.at(k, j);
        }
    return Var(new_node(std::move(out), {a.node(), b.node()}, [N, K, M](Node& n) {
        const Tensor& av2 = n.parents[0]->value;
        const Tensor& bv2 = n.parents[1]->value;
        Tensor& ga = n.parents[0]->grad;
        Tensor& gb = n.parents[1]->grad;
        for (int i = 0; i < N; ++i)
            for (int j = 0; j < M; ++j) {
                double g = n.grad.at(i, j);
                if (g == 0.0) continue;
                for (int k = 0; k < K; ++k) {
                    ga.at(i, k) += g * bv2.at(k, j);
                    gb.at(k, j) += g * av2.at(i, k);
                }
            }
    }));
}

Var add_row_vector(const Var& a, const Var& bias) {
    const Tensor& av = a.value();
    const Tensor& bv = bias.value();
    if (av.ndim() != 2 || bv.ndim() != 1 || av.dim(1) != bv.dim(0))
        throw ShapeError("add_row_vector: shape mismatch " + av.shape_str() + " + " +
                         bv.shape_str());
    Tensor out = av;
    int N = av.dim(0), M = av.dim(1);
    for (int i = 0; i < N; ++i)
        for (int j = 0; j < M; ++j) out.at(i, j) += bv[j];
    return Var(new_node(std::move(out), {a.node(), bias.node()}, [N, M](Node& n) {
        for (int i = 0; i < N; ++i)
            for (int j = 0; j < M; ++j) {
                double g = n.grad.at(i, j);
                n.parents[0]->grad.at(i, j) += g;
                n.parents[1]->grad[j] += g;
            }
    }));
}

Var linear(const Var& x, const Var& w, const Var& b) { return add_row_vector(matmul(x, w), b); }

Var relu(const Var& x) {
    Tensor out = x.value();
    for (double& v : out.data)
        if (v < 0) v = 0;
    return Var(new_node(std::move(out), {x.node()}, [](Node& n) {
        const Tensor& xv = n.parents[0]->value;
        for (int i = 0; i < n.grad.size(); ++i)
            if (xv[i] > 0) n.parents[0]->grad[i] += n.grad[i];
    }));
}

Var leaky_relu(const Var& x, double slope) {
    Tensor out = x.value();
    for (double& v : out.data)
        if (v < 0) v *= slope;
    return Var(new_node(std::move(out), {x.node()}, [slope](Node& n) {
        const Tensor& xv = n.parents[0]->value;
        for (int i = 0; i < n.grad.size(); ++i)
            n.parents[0]->grad[i] += n.grad[i] * (xv[i] > 0 ? 1.0 : slope);
    }));
}

Var sigmoid(const Var& x) {
    Tensor out = x.value();
    for (double& v : out.data) v = 1.0 / (1.0 + std::exp(-v));
    return Var(new_node(std::move(out), {x.node()}, [](Node& n) {
        for (int i = 0; i < n.grad.size(); ++i) {
            double y = n.value[i];
            n.parents[0]->grad[i] += n.grad[i] * y * (1.0 - y);
        }
    }));
}

Var softmax_rows(const Var& x) {
    const Tensor& xv = x.value();
    if (xv.ndim() != 2) throw ShapeError("softmax_rows expects 2D, got " + xv.shape_str());
    int N = xv.dim(0), K = xv.dim(1);
    Tensor out({N, K});
    for (int i = 0; i < N; ++i) {
        double m = xv.at(i, 0);
        for (int k = 1; k < K; ++k) m = std::max(m, xv.at(i, k));
        double s = 0;
        for (int k = 0; k < K; ++k) s += (out.at(i, k) = std::exp(xv.at(i, k) - m));
        for (int k = 0; k < K; ++k) out.at(i, k) /= s;
    }
    return Var(new_node(std::move(out), {x.node()}, [N, K](Node& n) {
        for (int i = 0; i < N; ++i) {
            double dot = 0;
            for (int k = 0; k < K; ++k) dot += n.grad.at(i, k) * n.value.at(i, k);
            for (int k = 0; k < K; ++k)
                n.parents[0]->grad.at(i, k) += n.value.at(i, k) * (n.grad.at(i, k) - dot);
        }
    }));
}

Var sum(const Var& x) {
    double s = 0;
    for (double v : x.value().data) s += v;
    return Var(new_node(Tensor::scalar(s), {x.node()}, [](Node& n) {
        double g = n.grad[0];
        for (double& v : n.parents[0]->grad.data) v += g;
    }));
}

Var mean(const Var& x) { return scale(sum(x), 1.0 / std::max(1, x.value().size())); }

Var concat_cols(const std::vector<Var>& xs) {
    if (xs.empty()) throw ShapeError("concat_cols: empty input");
    int N = xs[0].value().dim(0), C = 0;
    for (const Var& v : xs) {
        if (v.value().ndim() != 2 || v.value().dim(0) != N)
            throw ShapeError("concat_cols: row mismatch " + v.value().shape_str());
        C += v.value().dim(1);
    }
    Tensor out({N, C});
    std::vector<std::shared_ptr<Node>> parents;
    std::vector<int> offsets;
    int off = 0;
    for (const Var& v : xs) {
        int c = v.value().dim(1);
        for (int i = 0; i < N; ++i)
            for (int j = 0; j < c; ++j) out.at(i, off + j) = v.value().at(i, j);
        parents.push_back(v.node());
        offsets.push_back(off);
        off += c;
    }
    return Var(new_node(std::move(out), std::move(parents), [N, offsets](Node& n) {
        for (size_t p = 0; p < n.parents.size(); ++p) {
            int c = n.parents[p]->value.dim(1);
            for (int i = 0; i < N; ++i)
                for (int j = 0; j < c; ++j)
                    n.parents[p]->grad.at(i, j) += n.grad.at(i, offsets[p] + j);
        }
    }));
}

Var slice_cols(const Var& x, int c0, int c1) {
    const Tensor& xv = x.value();
    if (xv.ndim() != 2 || c0 < 0 || c1 > xv.dim(1) || c0 >= c1)
        throw ShapeError("slice_cols: bad range on " + xv.shape_str());
    int N = xv.dim(0), C = c1 - c0;
    Tensor out({N, C});
    for (int i = 0; i < N; ++i)
        for (int j = 0; j < C; ++j) out.at(i, j) = xv.at(i, c0 + j);
    return Var(new_node(std::move(out), {x.node()}, [N, C, c0](Node& n) {
        for (int i = 0; i < N; ++i)
            for (int j = 0; j < C; ++j) n.parents[0]->grad.at(i, c0 + j) += n.grad.at(i, j);
    }));
}

Var concat_channels(const std::vector<Var>& xs) {
    if (xs.empty()) throw ShapeError("concat_channels: empty input");
    int H = xs[0].value().dim(1), W = xs[0].value().dim(2), C = 0;
    for (const Var& v : xs) {
        if (v.value().ndim() != 3 || v.value().dim(1) != H || v.value().dim(2) != W)
            throw ShapeError("concat_channels: spatial mismatch " + v.value().shape_str());
        C += v.value().dim(0);
    }
    Tensor out({C, H, W});
    std::vector<std::shared_ptr<Node>> parents;
    int off = 0;
    std::vector<int> offsets;
    for (const Var& v : xs) {
        int c = v.value().dim(0);
        std::copy(v.value().data.begin(), v.value().data.end(),
                  out.data.begin() + static_cast<long>(off) * H * W);
        parents.push_back(v.node());
        offsets.push_back(off);
        off += c;
    }
    return Var(new_node(std::move(out), std::move(parents), [H, W, offsets](Node& n) {
        for (size_t p = 0; p < n.parents.size(); ++p) {
            int c = n.parents[p]->value.dim(0);
            long base = static_cast<long>(offsets[p]) * H * W;
            for (long i = 0; i < static_cast<long>(c) * H * W; ++i)
                n.parents[p]->grad.data[static_cast<size_t>(i)] +=
                    n.grad.data[static_cast<size_t>(base + i)];
        }
    }));
}

Var reshape(const Var& x, std::vector<int> shape) {
    if (Tensor::count(shape) != x.value().size())
        throw ShapeError("reshape: element count mismatch for " + x.value().shape_str());
    Tensor out(std::move(shape), x.value().data);
    return Var(new_node(std::move(out), {x.node()}, [](Node& n) {
        for (int i = 0; i < n.grad.size(); ++i) n.parents[0]->grad[i] += n.grad[i];
    }));
}

Var row_scale(const Var& x, const Var& s) {
    const Tensor& xv = x.value();
    const Tensor& sv = s.value();
    if (xv.ndim() != 2 || sv.dim(0) != xv.dim(0) || sv.size() != xv.dim(0))
        throw ShapeError("row_scale: shape mismatch " + xv.shape_str() + " vs " + sv.shape_str());
    int N = xv.dim(0), C = xv.dim(1);
    Tensor out({N, C});
    for (int i = 0; i < N; ++i)
        for (int j = 0; j < C; ++j) out.at(i, j) = xv.at(i, j) * sv[i];
    return Var(new_node(std::move(out), {x.node(), s.node()}, [N, C](Node& n) {
        const Tensor& xv2 = n.parents[0]->value;
        const Tensor& sv2 = n.parents[1]->value;
        for (int i = 0; i < N; ++i)
            for (int j = 0; j < C; ++j) {
                double g = n.grad.at(i, j);
                n.parents[0]->grad.at(i, j) += g * sv2[i];
                n.parents[1]->grad[i] += g * xv2.at(i, j);
            }
    }));
}

// ---- conv stack ----

Var conv2d(const Var& x, const Var& w, const Var& b, int stride, int pad) {
    const Tensor& xv = x.value();
    const Tensor& wv = w.value();
    if (xv.ndim() != 3 || wv.ndim() != 4 || wv.dim(1) != xv.dim(0))
        throw ShapeError("conv2d: shape mismatch x" + xv.shape_str() + " w" + wv.shape_str());
    int Cin = xv.dim(0), H = xv.dim(1), W = xv.dim(2);
    int Cout = wv.dim(0), k = wv.dim(2);
    int Ho = (H + 2 * pad - k) / stride + 1;
    int Wo = (W + 2 * pad - k) / stride + 1;
    if (Ho <= 0 || Wo <= 0)
        throw ShapeError("conv2d: output would be empty for input " + xv.shape_str());
    Tensor out({Cout, Ho, Wo});
    const Tensor& bv = b.value();
    for (int oc = 0; oc < Cout; ++oc)
        for (int oy = 0; oy < Ho; ++oy)
            for (int ox = 0; ox < Wo; ++ox) {
                double acc = bv[oc];
                int y0 = oy * stride - pad, x0 = ox * stride - pad;
                for (int ic = 0; ic < Cin; ++ic)
                    for (int ky = 0; ky < k; ++ky) {
                        int iy = y0 + ky;
                        if (iy < 0 || iy >= H) continue;
                        for (int kx = 0; kx < k; ++kx) {
                            int ix = x0 + kx;
                            if (ix < 0 || ix >= W) continue;
                            acc += xv.at(ic, iy, ix) * wv.data[((static_cast<size_t>(oc) * Cin + ic) * k + ky) * k + kx];
                        }
                    }
                out.at(oc, oy, ox) = acc;
            }
    return Var(new_node(std::move(out), {x.node(), w.node(), b.node()},
                        [Cin, H, W, Cout, k, Ho, Wo, stride, pad](Node& n) {
        const Tensor& xv2 = n.parents[0]->value;
        const Tensor& wv2 = n.parents[1]->value;
        Tensor& gx = n.parents[0]->grad;
        Tensor& gw = n.parents[1]->grad;
        Tensor& gb = n.parents[2]->grad;
        for (int oc = 0; oc < Cout; ++oc)
            for (int oy = 0; oy < Ho; ++oy)
                for (int ox = 0; ox < Wo; ++ox) {
                    double g = n.grad.at(oc, oy, ox);
                    if (g == 0.0) continue;
                    gb[oc] += g;
                    int y0 = oy * stride - pad, x0 = ox * stride - pad;
                    for (int ic = 0; ic < Cin; ++ic)
                        for (int ky = 0; ky < k; ++ky) {
                            int iy = y0 + ky;
                            if (iy < 0 || iy >= H) continue;
                            for (int kx = 0; kx < k; ++kx) {
                                int ix = x0 + kx;
                                if (ix < 0 || ix >= W) continue;
                                size_t wi = ((static_cast<size_t>(oc) * Cin + ic) * k + ky) * k + kx;
                                gx.at(ic, iy, ix) += g * wv2.data[wi];
                                gw.data[wi] += g * xv2.at(ic, iy, ix);
                            }
                        }
                }
    }));
}

Var transposed_conv2d(const Var& x, const Var& w, const Var& b, int stride) {
    const Tensor& xv = x.value();
    const Tensor& wv = w.value();
    if (xv.ndim() != 3 || wv.ndim() != 4 || wv.dim(0) != xv.dim(0))
        throw ShapeError("transposed_conv2d: shape mismatch x" + xv.shape_str() + " w" +
                         wv.shape_str());
    int Cin = xv.dim(0), H = xv.dim(1), W = xv.dim(2);
    int Cout = wv.dim(1), k = wv.dim(2);
    int Ho = (H - 1) * stride + k;
    int Wo = (W - 1) * stride + k;
    Tensor out({Cout, Ho, Wo});
    const Tensor& bv = b.value();
    for (int oc = 0; oc < Cout; ++oc)
        for (int i = 0; i < Ho * Wo; ++i) out.data[static_cast<size_t>(oc) * Ho * Wo + i] = bv[oc];
    for (int ic = 0; ic < Cin; ++ic)
        for (int iy = 0; iy < H; ++iy)
            for (int ix = 0; ix < W; ++ix) {
                double v = xv.at(ic, iy, ix);
                if (v == 0.0) continue;
                for (int oc = 0; oc < Cout; ++oc)
                    for (int ky = 0; ky < k; ++ky)
                        for (int kx = 0; kx < k; ++kx)
                            out.at(oc, iy * stride + ky, ix * stride + kx) +=
                                v * wv.data[((static_cast<size_t>(ic) * Cout + oc) * k + ky) * k + kx];
            }
    return Var(new_node(std::move(out), {x.node(), w.node(), b.node()},
                        [Cin, H, W, Cout, k, stride](Node& n) {
        const Tensor& xv2 = n.parents[0]->value;
        const Tensor& wv2 = n.parents[1]->value;
        Tensor& gx = n.parents[0]->grad;
        Tensor& gw = n.parents[1]->grad;
        Tensor& gb = n.parents[2]->grad;
        int Ho = n.value.dim(1), Wo = n.value.dim(2);
        for (int oc = 0; oc < Cout; ++oc)
            for (int i = 0; i < Ho * Wo; ++i)
                gb[oc] += n.grad.data[static_cast<size_t>(oc) * Ho * Wo + i];
        for (int ic = 0; ic < Cin; ++ic)
            for (int iy = 0; iy < H; ++iy)
                for (int ix = 0; ix < W; ++ix) {
                    double xval = xv2.at(ic, iy, ix);
                    double gacc = 0;
                    for (int oc = 0; oc < Cout; ++oc)
                        for (int ky = 0; ky < k; ++ky)
                            for (int kx = 0; kx < k; ++kx) {
                                double g = n.grad.at(oc, iy * stride + ky, ix * stride + kx);
                                size_t wi = ((static_cast<size_t>(ic) * Cout + oc) * k + ky) * k + kx;
                                gacc += g * wv2.data[wi];
                                gw.data[wi] += g * xval;
                            }
                    gx.at(ic, iy, ix) += gacc;
                }
    }));
}

namespace {

// channel layout helper: 3D (C,H,W) -> per-channel contiguous blocks of H*W;
// 2D (N,C) -> strided columns
struct ChannelView {
    int channels;
    int per_channel;
    bool contiguous;  // true for (C,H,W)
    int row_stride;   // for (N,C)
};

ChannelView channel_view(const Tensor& t) {
    if (t.ndim() == 3) return {t.dim(0), t.dim(1) * t.dim(2), true, 0};
    if (t.ndim() == 2) return {t.dim(1), t.dim(0), false, t.dim(1)};
    throw ShapeError("norm: expected 2D or 3D input, got " + t.shape_str());
}

inline double ch_get(const Tensor& t, const ChannelView& v, int c, int i) {
    return v.contiguous ? t.data[static_cast<size_t>(c) * v.per_channel + i]
                        : t.data[static_cast<size_t>(i) * v.row_stride + c];
}
inline void ch_add(Tensor& t, const ChannelView& v, int c, int i, double g) {
    if (v.contiguous)
        t.data[static_cast<size_t>(c) * v.per_channel + i] += g;
    else
        t.data[static_cast<size_t>(i) * v.row_stride + c] += g;
}

}  // namespace

Var batch_norm(const Var& x, const Var& gamma, const Var& beta, NormState* state, bool training,
               double eps) {
    const Tensor& xv = x.value();
    ChannelView cv = channel_view(xv);
    if (gamma.value().size() != cv.channels || beta.value().size() != cv.channels)
        throw ShapeError("batch_norm: affine params do not match channels of " + xv.shape_str());
    std::vector<double> mu(cv.channels), var(cv.channels);
    if (training || state == nullptr) {
        for (int c = 0; c < cv.channels; ++c) {
            double m = 0;
            for (int i = 0; i < cv.per_channel; ++i) m += ch_get(xv, cv, c, i);
            m /= cv.per_channel;
            double v = 0;
            for (int i = 0; i < cv.per_channel; ++i) {
                double d = ch_get(xv, cv, c, i) - m;
                v += d * d;
            }
            mu[c] = m;
            var[c] = v / cv.per_channel;
        }
        if (state != nullptr) {
            if (state->running_mean.size() != cv.channels) {
                state->running_mean = Tensor({cv.channels});
                state->running_var = Tensor::full({cv.channels}, 1.0);
            }
            double m0 = state->steps == 0 ? 0.0 : state->momentum;
            for (int c = 0; c < cv.channels; ++c) {
                state->running_mean[c] = m0 * state->running_mean[c] + (1 - m0) * mu[c];
                state->running_var[c] = m0 * state->running_var[c] + (1 - m0) * var[c];
            }
            ++state->steps;
        }
    } else {
        if (state->running_mean.size() != cv.channels) {
            state->running_mean = Tensor({cv.channels});
            state->running_var = Tensor::full({cv.channels}, 1.0);
        }
        for (int c = 0; c < cv.channels; ++c) {
            mu[c] = state->running_mean[c];
            var[c] = state->running_var[c];
        }
    }
    Tensor out(xv.shape);
    const Tensor& gv = gamma.value();
    const Tensor& bv = beta.value();
    for (int c = 0; c < cv.channels; ++c) {
        double inv = 1.0 / std::sqrt(var[c] + eps);
        for (int i = 0; i < cv.per_channel; ++i) {
            double xhat = (ch_get(xv, cv, c, i) - mu[c]) * inv;
            ch_add(out, cv, c, i, gv[c] * xhat + bv[c]);
        }
    }
    bool use_batch_stats = training || state == nullptr;
    return Var(new_node(std::move(out), {x.node(), gamma.node(), beta.node()},
                        [cv, mu, var, eps, use_batch_stats](Node& n) {
        const Tensor& xv2 = n.parents[0]->value;
        const Tensor& gv2 = n.parents[1]->value;
        Tensor& gx = n.parents[0]->grad;
        Tensor& gg = n.parents[1]->grad;
        Tensor& gb = n.parents[2]->grad;
        int m = cv.per_channel;
        for (int c = 0; c < cv.channels; ++c) {
            double inv = 1.0 / std::sqrt(var[c] + eps);
            double sum_dy = 0, sum_dy_xhat = 0;
            for (int i = 0; i < m; ++i) {
                double dy = ch_get(n.grad, cv, c, i);
                double xhat = (ch_get(xv2, cv, c, i) - mu[c]) * inv;
                sum_dy += dy;
                sum_dy_xhat += dy * xhat;
                gg[c] += dy * xhat;
                gb[c] += dy;
            }
            if (use_batch_stats) {
                for (int i = 0; i < m; ++i) {
                    double dy = ch_get(n.grad, cv, c, i);
                    double xhat = (ch_get(xv2, cv, c, i) - mu[c]) * inv;
                    ch_add(gx, cv, c, i,
                           gv2[c] * inv * (dy - sum_dy / m - xhat * sum_dy_xhat / m));
                }
            } else {
                for (int i = 0; i < m; ++i)
                    ch_add(gx, cv, c, i, ch_get(n.grad, cv, c, i) * gv2[c] * inv);
            }
        }
    }));
}

Var channel_affine(const Var& x, const Var& gamma, const Var& beta) {
    const Tensor& xv = x.value();
    ChannelView cv = channel_view(xv);
    if (gamma.value().size() != cv.channels || beta.value().size() != cv.channels)
        throw ShapeError("channel_affine: params do not match channels of " + xv.shape_str());
    Tensor out(xv.shape);
    for (int c = 0; c < cv.channels; ++c)
        for (int i = 0; i < cv.per_channel; ++i)
            ch_add(out, cv, c, i, gamma.value()[c] * ch_get(xv, cv, c, i) + beta.value()[c]);
    return Var(new_node(std::move(out), {x.node(), gamma.node(), beta.node()}, [cv](Node& n) {
        const Tensor& xv2 = n.parents[0]->value;
        const Tensor& gv2 = n.parents[1]->value;
        for (int c = 0; c < cv.channels; ++c)
            for (int i = 0; i < cv.per_channel; ++i) {
                double g = ch_get(n.grad, cv, c, i);
                ch_add(n.parents[0]->grad, cv, c, i, g * gv2[c]);
                n.parents[1]->grad[c] += g * ch_get(xv2, cv, c, i);
                n.parents[2]->grad[c] += g;
            }
    }));
}

// ---- gather / scatter ----

Var bilinear_gather(const Var& map, const GatherCoords& coords) {
    const Tensor& mv = map.value();
    if (mv.ndim() != 3) throw ShapeError("bilinear_gather: map must be (C,H,W)");
    int C = mv.dim(0), H = mv.dim(1), W = mv.dim(2);
    int N = static_cast<int>(coords.size());
    Tensor out({N, C});
    // flattened (cell index, weight) pairs per point, at most 4 each
    std::vector<std::vector<std::pair<int, double>>> taps(static_cast<size_t>(N));
    for (int p = 0; p < N; ++p) {
        if (!coords[static_cast<size_t>(p)].has_value()) continue;
        auto [r, c] = *coords[static_cast<size_t>(p)];
        int r0 = static_cast<int>(std::floor(r)), c0 = static_cast<int>(std::floor(c));
        double fr = r - r0, fc = c - c0;
        const std::pair<int, double> corners[4] = {
            {0, (1 - fr) * (1 - fc)}, {1, (1 - fr) * fc}, {2, fr * (1 - fc)}, {3, fr * fc}};
        for (auto [q, wgt] : corners) {
            int rr = r0 + (q >> 1), cc = c0 + (q & 1);
            if (rr < 0 || rr >= H || cc < 0 || cc >= W || wgt == 0.0) continue;
            taps[static_cast<size_t>(p)].push_back({rr * W + cc, wgt});
        }
    }
    for (int p = 0; p < N; ++p)
        for (auto [cell, wgt] : taps[static_cast<size_t>(p)])
            for (int ch = 0; ch < C; ++ch)
                out.at(p, ch) += wgt * mv.data[static_cast<size_t>(ch) * H * W + cell];
    return Var(new_node(std::move(out), {map.node()}, [taps = std::move(taps), C, H, W](Node& n) {
        Tensor& gm = n.parents[0]->grad;
        int N2 = n.value.dim(0);
        for (int p = 0; p < N2; ++p)
            for (auto [cell, wgt] : taps[static_cast<size_t>(p)])
                for (int ch = 0; ch < C; ++ch)
                    gm.data[static_cast<size_t>(ch) * H * W + cell] += wgt * n.grad.at(p, ch);
    }));
}

Var grouped_max(const Var& x, const std::vector<std::vector<int>>& groups) {
    const Tensor& xv = x.value();
    if (xv.ndim() != 2) throw ShapeError("grouped_max: expected (N,C)");
    int C = xv.dim(1);
    int P = static_cast<int>(groups.size());
    Tensor out({P, C});
    std::vector<int> argmax(static_cast<size_t>(P) * C);
    for (int g = 0; g < P; ++g) {
        if (groups[static_cast<size_t>(g)].empty())
            throw ShapeError("grouped_max: empty group " + std::to_string(g));
        for (int ch = 0; ch < C; ++ch) {
            int best = groups[static_cast<size_t>(g)][0];
            double bv = xv.at(best, ch);
            for (size_t k = 1; k < groups[static_cast<size_t>(g)].size(); ++k) {
                int row = groups[static_cast<size_t>(g)][k];
                if (xv.at(row, ch) > bv) {  // strict: first maximal row wins
                    bv = xv.at(row, ch);
                    best = row;
                }
            }
            out.at(g, ch) = bv;
            argmax[static_cast<size_t>(g) * C + ch] = best;
        }
    }
    return Var(new_node(std::move(out), {x.node()}, [argmax = std::move(argmax), C](Node& n) {
        int P2 = n.value.dim(0);
        for (int g = 0; g < P2; ++g)
            for (int ch = 0; ch < C; ++ch)
                n.parents[0]->grad.at(argmax[static_cast<size_t>(g) * C + ch], ch) +=
                    n.grad.at(g, ch);
    }));
}

Var scatter_rows(const Var& x, const std::vector<std::pair<int, int>>& cells, int rows, int cols) {
    const Tensor& xv = x.value();
    if (xv.ndim() != 2 || static_cast<int>(cells.size()) != xv.dim(0))
        throw ShapeError("scatter_rows: cells/rows mismatch for " + xv.shape_str());
    int P = xv.dim(0), C = xv.dim(1);
    Tensor out({C, rows, cols});
    for (int p = 0; p < P; ++p) {
        auto [r, c] = cells[static_cast<size_t>(p)];
        if (r < 0 || r >= rows || c < 0 || c >= cols)
            throw ShapeError("scatter_rows: cell out of grid");
        for (int ch = 0; ch < C; ++ch) out.at(ch, r, c) = xv.at(p, ch);
    }
    return Var(new_node(std::move(out), {x.node()}, [cells, rows, cols, C](Node& n) {
        for (size_t p = 0; p < cells.size(); ++p)
            for (int ch = 0; ch < C; ++ch)
                n.parents[0]->grad.at(static_cast<int>(p), ch) +=
                    n.grad.at(ch, cells[p].first, cells[p].second);
    }));
}

Var head_reshape(const Var& x, int A, int K) {
    const Tensor& xv = x.value();
    if (xv.ndim() != 3 || xv.dim(0) != A * K)
        throw ShapeError("head_reshape: expected (" + std::to_string(A * K) + ",H,W), got " +
                         xv.shape_str());
    int H = xv.dim(1), W = xv.dim(2);
    Tensor out({H * W * A, K});
    for (int h = 0; h < H; ++h)
        for (int w = 0; w < W; ++w)
            for (int a = 0; a < A; ++a)
                for (int k = 0; k < K; ++k) out.at((h * W + w) * A + a, k) = xv.at(a * K + k, h, w);
    return Var(new_node(std::move(out), {x.node()}, [A, K, H, W](Node& n) {
        for (int h = 0; h < H; ++h)
            for (int w = 0; w < W; ++w)
                for (int a = 0; a < A; ++a)
                    for (int k = 0; k < K; ++k)
                        n.parents[0]->grad.at(a * K + k, h, w) += n.grad.at((h * W + w) * A + a, k);
    }));
}

// ---- loss kernels ----

namespace {
constexpr double kProbLo = 1e-7;
constexpr double kProbHi = 1.0 - 1e-7;
}  // namespace

Var focal_loss(const Var& p, const std::vector<double>& targets, const std::vector<double>& weights,
               double alpha, double gamma, double normalizer) {
    const Tensor& pv = p.value();
    int N = pv.size();
    if (static_cast<int>(targets.size()) != N || static_cast<int>(weights.size()) != N)
        throw ShapeError("focal_loss: target/mask length mismatch");
    double loss = 0;
    for (int i = 0; i < N; ++i) {
        if (weights[static_cast<size_t>(i)] == 0.0) continue;
        double pc = std::min(kProbHi, std::max(kProbLo, pv[i]));
        if (targets[static_cast<size_t>(i)] > 0.5)
            loss += -alpha * std::pow(1 - pc, gamma) * std::log(pc);
        else
            loss += -(1 - alpha) * std::pow(pc, gamma) * std::log(1 - pc);
    }
    loss /= normalizer;
    return Var(new_node(Tensor::scalar(loss), {p.node()},
                        [targets, weights, alpha, gamma, normalizer](Node& n) {
        const Tensor& pv2 = n.parents[0]->value;
        double gout = n.grad[0] / normalizer;
        for (int i = 0; i < pv2.size(); ++i) {
            if (weights[static_cast<size_t>(i)] == 0.0) continue;
            double praw = pv2[i];
            if (praw <= kProbLo || praw >= kProbHi) continue;  // clamped region: zero slope
            double d;
            if (targets[static_cast<size_t>(i)] > 0.5)
                d = alpha * (gamma * std::pow(1 - praw, gamma - 1) * std::log(praw) -
                             std::pow(1 - praw, gamma) / praw);
            else
                d = (1 - alpha) * (-gamma * std::pow(praw, gamma - 1) * std::log(1 - praw) +
                                   std::pow(praw, gamma) / (1 - praw));
            n.parents[0]->grad[i] += gout * d;
        }
    }));
}

Var smooth_l1(const Var& pred, const Tensor& target, const std::vector<double>& weights,
              double normalizer, double delta) {
    const Tensor& pv = pred.value();
    require_same_shape(pv, target, "smooth_l1");
    if (static_cast<int>(weights.size()) != pv.size())
        throw ShapeError("smooth_l1: mask length mismatch");
    double loss = 0;
    for (int i = 0; i < pv.size(); ++i) {
        double w = weights[static_cast<size_t>(i)];
        if (w == 0.0) continue;
        double r = pv[i] - target[i];
        loss += w * (std::abs(r) < delta ? 0.5 * r * r / delta : std::abs(r) - 0.5 * delta);
    }
    loss /= normalizer;
    return Var(new_node(Tensor::scalar(loss), {pred.node()},
                        [target, weights, normalizer, delta](Node& n) {
        const Tensor& pv2 = n.parents[0]->value;
        double gout = n.grad[0] / normalizer;
        for (int i = 0; i < pv2.size(); ++i) {
            double w = weights[static_cast<size_t>(i)];
            if (w == 0.0) continue;
            double r = pv2[i] - target[i];
            n.parents[0]->grad[i] +=
                gout * w * (std::abs(r) < delta ? r / delta : (r > 0 ? 1.0 : -1.0));
        }
    }));
}

Var softmax_cross_entropy(const Var& logits, const std::vector<int>& targets,
                          const std::vector<double>& row_weights, double normalizer) {
    const Tensor& lv = logits.value();
    if (lv.ndim() != 2) throw ShapeError("softmax_cross_entropy: expected (N,K)");
    int N = lv.dim(0), K = lv.dim(1);
    if (static_cast<int>(targets.size()) != N || static_cast<int>(row_weights.size()) != N)
        throw ShapeError("softmax_cross_entropy: target length mismatch");
    Tensor probs({N, K});
    double loss = 0;
    for (int i = 0; i < N; ++i) {
        double m = lv.at(i, 0);
        for (int k = 1; k < K; ++k) m = std::max(m, lv.at(i, k));
        double s = 0;
        for (int k = 0; k < K; ++k) s += (probs.at(i, k) = std::exp(lv.at(i, k) - m));
        for (int k = 0; k < K; ++k) probs.at(i, k) /= s;
        if (row_weights[static_cast<size_t>(i)] != 0.0)
            loss -= row_weights[static_cast<size_t>(i)] *
                    std::log(std::max(1e-300, probs.at(i, targets[static_cast<size_t>(i)])));
    }
    loss /= normalizer;
    return Var(new_node(Tensor::scalar(loss), {logits.node()},
                        [probs = std::move(probs), targets, row_weights, normalizer, N, K](Node& n) {
        double gout = n.grad[0] / normalizer;
        for (int i = 0; i < N; ++i) {
            double w = row_weights[static_cast<size_t>(i)];
            if (w == 0.0) continue;
            for (int k = 0; k < K; ++k) {
                double d = probs.at(i, k) - (k == targets[static_cast<size_t>(i)] ? 1.0 : 0.0);
                n.parents[0]->grad.at(i, k) += gout * w * d;
            }
        }
    }));
}

}  // namespace mvaf::ad
