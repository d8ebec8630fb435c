#include "gebd/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "gebd/error.hpp"
#include "gemm.hpp"

namespace gebd {

namespace {

std::span<float> grad_if(const Tensor& t) {
    if (!t.requires_grad()) return {};
    return t.impl()->grad_buffer();
}

std::size_t norm_axis(int axis, std::size_t rank, const char* op) {
    const int r = static_cast<int>(rank);
    const int a = axis < 0 ? axis + r : axis;
    if (a < 0 || a >= r) {
        throw ShapeError(std::string(op) + ": axis " + std::to_string(axis) + " invalid for rank " +
                         std::to_string(rank));
    }
    return static_cast<std::size_t>(a);
}

bool is_suffix(const Shape& small, const Shape& big) {
    if (small.size() > big.size()) return false;
    return std::equal(small.rbegin(), small.rend(), big.rbegin());
}

// Elementwise binary op where b is broadcast over a's leading axes.
template <typename Fwd, typename Da, typename Db>
Tensor broadcast_binary(const char* name, const Tensor& a, const Tensor& b, Fwd fwd, Da da, Db db) {
    if (!is_suffix(b.shape(), a.shape())) {
        throw ShapeError(std::string(name) + ": shapes " + shape_str(a.shape()) + " and " +
                         shape_str(b.shape()) + " are not broadcast-compatible");
    }
    const auto av = a.data();
    const auto bv = b.data();
    const std::size_t n = av.size();
    const std::size_t nb = std::max<std::size_t>(bv.size(), 1);
    std::vector<float> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = fwd(av[i], bv[i % nb]);
    return record_op(name, a.shape(), std::move(out), {&a, &b}, [a, b, da, db, nb](const TensorImpl& o) {
        const auto av = a.data();
        const auto bv = b.data();
        auto ga = grad_if(a);
        auto gb = grad_if(b);
        for (std::size_t i = 0; i < o.grad.size(); ++i) {
            const float g = o.grad[i];
            if (!ga.empty()) ga[i] += g * da(av[i], bv[i % nb]);
            if (!gb.empty()) gb[i % nb] += g * db(av[i], bv[i % nb]);
        }
    });
}

template <typename Fwd, typename Deriv>
Tensor unary(const char* name, const Tensor& x, Fwd fwd, Deriv deriv) {
    const auto xv = x.data();
    std::vector<float> out(xv.size());
    for (std::size_t i = 0; i < xv.size(); ++i) out[i] = fwd(xv[i]);
    return record_op(name, x.shape(), std::move(out), {&x}, [x, deriv](const TensorImpl& o) {
        auto gx = grad_if(x);
        const auto xv = x.data();
        const auto& yv = *o.data;
        for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += o.grad[i] * deriv(xv[i], yv[i]);
    });
}

std::vector<std::size_t> strides_of(const Shape& s) {
    std::vector<std::size_t> st(s.size(), 1);
    for (std::size_t i = s.size(); i-- > 1;) st[i - 1] = st[i] * s[i];
    return st;
}

} // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape() && is_suffix(a.shape(), b.shape())) return add(b, a);
    return broadcast_binary(
        "add", a, b, [](float x, float y) { return x + y; }, [](float, float) { return 1.0f; },
        [](float, float) { return 1.0f; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    return broadcast_binary(
        "sub", a, b, [](float x, float y) { return x - y; }, [](float, float) { return 1.0f; },
        [](float, float) { return -1.0f; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape() && is_suffix(a.shape(), b.shape())) return mul(b, a);
    return broadcast_binary(
        "mul", a, b, [](float x, float y) { return x * y; }, [](float, float y) { return y; },
        [](float x, float) { return x; });
}

Tensor scale(const Tensor& x, float factor) {
    return unary(
        "scale", x, [factor](float v) { return v * factor; },
        [factor](float, float) { return factor; });
}

Tensor relu(const Tensor& x) {
    return unary(
        "relu", x, [](float v) { return v > 0.0f ? v : 0.0f; },
        [](float v, float) { return v > 0.0f ? 1.0f : 0.0f; });
}

Tensor sigmoid(const Tensor& x) {
    return unary(
        "sigmoid", x,
        [](float v) {
            if (v >= 0.0f) return 1.0f / (1.0f + std::exp(-v));
            const float e = std::exp(v);
            return e / (1.0f + e);
        },
        [](float, float y) { return y * (1.0f - y); });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    const auto& as = a.shape();
    const auto& bs = b.shape();
    auto fail = [&] {
        throw ShapeError("matmul: cannot multiply " + shape_str(as) + " by " + shape_str(bs));
    };
    if (as.size() < 2 || bs.size() < 2) fail();
    const std::size_t m = as[as.size() - 2], k = as.back(), p = bs.back();
    if (bs[bs.size() - 2] != k) fail();

    // Broadcast the leading (batch) axes, numpy style.
    const std::size_t ab = as.size() - 2, bb = bs.size() - 2;
    const std::size_t nb = std::max(ab, bb);
    Shape batch(nb);
    for (std::size_t i = 0; i < nb; ++i) {
        const std::size_t da = i + ab >= nb ? as[i + ab - nb] : 1;
        const std::size_t db = i + bb >= nb ? bs[i + bb - nb] : 1;
        if (da != db && da != 1 && db != 1) fail();
        batch[i] = std::max(da, db);
    }
    const std::size_t count = shape_numel(batch);
    std::vector<std::size_t> aoff(count), boff(count);
    {
        std::vector<std::size_t> idx(nb, 0);
        for (std::size_t c = 0; c < count; ++c) {
            std::size_t oa = 0, ob = 0;
            for (std::size_t i = 0; i < nb; ++i) {
                if (i + ab >= nb) {
                    const std::size_t d = as[i + ab - nb];
                    oa = oa * d + (d == 1 ? 0 : idx[i]);
                }
                if (i + bb >= nb) {
                    const std::size_t d = bs[i + bb - nb];
                    ob = ob * d + (d == 1 ? 0 : idx[i]);
                }
            }
            aoff[c] = oa * m * k;
            boff[c] = ob * k * p;
            for (std::size_t i = nb; i-- > 0;) {
                if (++idx[i] < batch[i]) break;
                idx[i] = 0;
            }
        }
    }

    Shape out_shape = batch;
    out_shape.push_back(m);
    out_shape.push_back(p);
    std::vector<float> out(count * m * p);
    const float* ad = a.data().data();
    const float* bd = b.data().data();
    for (std::size_t c = 0; c < count; ++c) {
        detail::gemm(false, false, static_cast<long>(m), static_cast<long>(p), static_cast<long>(k),
                     ad + aoff[c], bd + boff[c], out.data() + c * m * p, false);
    }
    return record_op("matmul", std::move(out_shape), std::move(out), {&a, &b},
                     [a, b, aoff, boff, m, k, p](const TensorImpl& o) {
                         auto ga = grad_if(a);
                         auto gb = grad_if(b);
                         const float* ad = a.data().data();
                         const float* bd = b.data().data();
                         for (std::size_t c = 0; c < aoff.size(); ++c) {
                             const float* g = o.grad.data() + c * m * p;
                             if (!ga.empty()) {
                                 detail::gemm(false, true, static_cast<long>(m), static_cast<long>(k),
                                              static_cast<long>(p), g, bd + boff[c],
                                              ga.data() + aoff[c], true);
                             }
                             if (!gb.empty()) {
                                 detail::gemm(true, false, static_cast<long>(k), static_cast<long>(p),
                                              static_cast<long>(m), ad + aoff[c], g,
                                              gb.data() + boff[c], true);
                             }
                         }
                     });
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& bias) {
    const auto& xs = x.shape();
    const auto& ws = w.shape();
    if (xs.empty() || ws.size() != 2 || xs.back() != ws[0]) {
        throw ShapeError("linear: input " + shape_str(xs) + " incompatible with weight " + shape_str(ws));
    }
    const std::size_t in = ws[0], outc = ws[1];
    if (bias.defined() && bias.shape() != Shape{outc}) {
        throw ShapeError("linear: bias " + shape_str(bias.shape()) + " expected [" +
                         std::to_string(outc) + "]");
    }
    const std::size_t rows = x.numel() / in;
    std::vector<float> out(rows * outc);
    detail::gemm(false, false, static_cast<long>(rows), static_cast<long>(outc), static_cast<long>(in),
                 x.data().data(), w.data().data(), out.data(), false);
    if (bias.defined()) {
        const auto bv = bias.data();
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < outc; ++c) out[r * outc + c] += bv[c];
    }
    Shape os = xs;
    os.back() = outc;
    std::vector<const Tensor*> ins{&x, &w};
    if (bias.defined()) ins.push_back(&bias);
    std::vector<Tensor> inputs;
    for (auto* t : ins) inputs.push_back(*t);
    return record_op("linear", std::move(os), std::move(out), inputs,
                     [x, w, bias, rows, in, outc](const TensorImpl& o) {
                         auto gx = grad_if(x);
                         auto gw = grad_if(w);
                         const float* g = o.grad.data();
                         if (!gx.empty()) {
                             detail::gemm(false, true, static_cast<long>(rows), static_cast<long>(in),
                                          static_cast<long>(outc), g, w.data().data(), gx.data(), true);
                         }
                         if (!gw.empty()) {
                             detail::gemm(true, false, static_cast<long>(in), static_cast<long>(outc),
                                          static_cast<long>(rows), x.data().data(), g, gw.data(), true);
                         }
                         if (bias.defined()) {
                             auto gb = grad_if(bias);
                             if (!gb.empty()) {
                                 for (std::size_t r = 0; r < rows; ++r)
                                     for (std::size_t c = 0; c < outc; ++c) gb[c] += g[r * outc + c];
                             }
                         }
                     });
}

Tensor softmax(const Tensor& x, int axis) {
    const auto& s = x.shape();
    const std::size_t ax = norm_axis(axis, s.size(), "softmax");
    std::size_t outer = 1, inner = 1;
    for (std::size_t i = 0; i < ax; ++i) outer *= s[i];
    for (std::size_t i = ax + 1; i < s.size(); ++i) inner *= s[i];
    const std::size_t n = s[ax];
    const auto xv = x.data();
    std::vector<float> out(xv.size());
    for (std::size_t o = 0; o < outer; ++o) {
        for (std::size_t in = 0; in < inner; ++in) {
            const std::size_t base = o * n * inner + in;
            float mx = -INFINITY;
            for (std::size_t j = 0; j < n; ++j) mx = std::max(mx, xv[base + j * inner]);
            double total = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                const float e = std::exp(xv[base + j * inner] - mx);
                out[base + j * inner] = e;
                total += e;
            }
            const float inv = static_cast<float>(1.0 / total);
            for (std::size_t j = 0; j < n; ++j) out[base + j * inner] *= inv;
        }
    }
    return record_op("softmax", s, std::move(out), {&x}, [x, outer, inner, n](const TensorImpl& o) {
        auto gx = grad_if(x);
        if (gx.empty()) return;
        const auto& y = *o.data;
        for (std::size_t oo = 0; oo < outer; ++oo) {
            for (std::size_t in = 0; in < inner; ++in) {
                const std::size_t base = oo * n * inner + in;
                float dot = 0.0f;
                for (std::size_t j = 0; j < n; ++j) dot += o.grad[base + j * inner] * y[base + j * inner];
                for (std::size_t j = 0; j < n; ++j) {
                    const std::size_t i = base + j * inner;
                    gx[i] += y[i] * (o.grad[i] - dot);
                }
            }
        }
    });
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, float eps) {
    if (eps <= 0.0f) throw ConfigError("layer_norm: eps must be positive");
    const auto& s = x.shape();
    if (s.empty()) throw ShapeError("layer_norm: scalar input");
    const std::size_t c = s.back();
    if (gain.shape() != Shape{c} || bias.shape() != Shape{c}) {
        throw ShapeError("layer_norm: gain/bias " + shape_str(gain.shape()) + "/" +
                         shape_str(bias.shape()) + " do not match input " + shape_str(s));
    }
    const std::size_t rows = x.numel() / c;
    const auto xv = x.data();
    const auto gv = gain.data();
    const auto bv = bias.data();
    std::vector<float> xhat(xv.size()), rstd(rows), out(xv.size());
    for (std::size_t r = 0; r < rows; ++r) {
        const float* row = xv.data() + r * c;
        double m = 0.0;
        for (std::size_t j = 0; j < c; ++j) m += row[j];
        m /= static_cast<double>(c);
        double var = 0.0;
        for (std::size_t j = 0; j < c; ++j) var += (row[j] - m) * (row[j] - m);
        var /= static_cast<double>(c);
        const float rs = static_cast<float>(1.0 / std::sqrt(var + eps));
        rstd[r] = rs;
        for (std::size_t j = 0; j < c; ++j) {
            const float h = static_cast<float>(row[j] - m) * rs;
            xhat[r * c + j] = h;
            out[r * c + j] = h * gv[j] + bv[j];
        }
    }
    return record_op("layer_norm", s, std::move(out), {&x, &gain, &bias},
                     [x, gain, bias, xhat = std::move(xhat), rstd = std::move(rstd), rows,
                      c](const TensorImpl& o) {
                         auto gx = grad_if(x);
                         auto gg = grad_if(gain);
                         auto gb = grad_if(bias);
                         const auto gv = gain.data();
                         std::vector<float> dh(c);
                         for (std::size_t r = 0; r < rows; ++r) {
                             const float* g = o.grad.data() + r * c;
                             const float* h = xhat.data() + r * c;
                             float mean_dh = 0.0f, mean_dh_h = 0.0f;
                             for (std::size_t j = 0; j < c; ++j) {
                                 if (!gg.empty()) gg[j] += g[j] * h[j];
                                 if (!gb.empty()) gb[j] += g[j];
                                 dh[j] = g[j] * gv[j];
                                 mean_dh += dh[j];
                                 mean_dh_h += dh[j] * h[j];
                             }
                             if (gx.empty()) continue;
                             mean_dh /= static_cast<float>(c);
                             mean_dh_h /= static_cast<float>(c);
                             for (std::size_t j = 0; j < c; ++j) {
                                 gx[r * c + j] += rstd[r] * (dh[j] - mean_dh - h[j] * mean_dh_h);
                             }
                         }
                     });
}

Tensor sum(const Tensor& x) {
    double total = 0.0;
    for (float v : x.data()) total += v;
    return record_op("sum", {}, {static_cast<float>(total)}, {&x}, [x](const TensorImpl& o) {
        auto gx = grad_if(x);
        for (auto& g : gx) g += o.grad[0];
    });
}

Tensor mean(const Tensor& x) {
    const float n = static_cast<float>(std::max<std::size_t>(x.numel(), 1));
    return scale(sum(x), 1.0f / n);
}

Tensor mean(const Tensor& x, std::vector<int> axes) {
    const auto& s = x.shape();
    std::vector<bool> reduced(s.size(), false);
    for (int a : axes) reduced[norm_axis(a, s.size(), "mean")] = true;
    Shape os;
    std::size_t count = 1;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (reduced[i]) count *= s[i];
        else os.push_back(s[i]);
    }
    // Output offset for every input axis (0 stride on reduced axes).
    std::vector<std::size_t> ostride(s.size(), 0);
    {
        std::size_t st = 1;
        for (std::size_t i = s.size(); i-- > 0;) {
            if (!reduced[i]) {
                ostride[i] = st;
                st *= s[i];
            }
        }
    }
    const float inv = 1.0f / static_cast<float>(std::max<std::size_t>(count, 1));
    auto for_each = [s, ostride](auto&& fn) {
        const std::size_t n = shape_numel(s);
        // Trailing reduced block: contiguous inner loop.
        std::size_t inner = 1, lead = s.size();
        while (lead > 0 && ostride[lead - 1] == 0) inner *= s[--lead];
        std::vector<std::size_t> idx(lead, 0);
        for (std::size_t base = 0; base < n; base += inner) {
            std::size_t off = 0;
            for (std::size_t i = 0; i < lead; ++i) off += idx[i] * ostride[i];
            for (std::size_t j = 0; j < inner; ++j) fn(base + j, off);
            for (std::size_t i = lead; i-- > 0;) {
                if (++idx[i] < s[i]) break;
                idx[i] = 0;
            }
        }
    };
    std::vector<float> out(shape_numel(os), 0.0f);
    const auto xv = x.data();
    for_each([&](std::size_t i, std::size_t o) { out[o] += xv[i]; });
    for (auto& v : out) v *= inv;
    return record_op("mean", std::move(os), std::move(out), {&x}, [x, for_each, inv](const TensorImpl& o) {
        auto gx = grad_if(x);
        if (gx.empty()) return;
        for_each([&](std::size_t i, std::size_t oo) { gx[i] += o.grad[oo] * inv; });
    });
}

Tensor reshape(const Tensor& x, Shape shape) {
    if (shape_numel(shape) != x.numel()) {
        throw ShapeError("reshape: cannot view " + shape_str(x.shape()) + " as " + shape_str(shape));
    }
    auto impl = std::make_shared<TensorImpl>();
    impl->shape = std::move(shape);
    impl->data = x.impl()->data;
    Tensor out(impl);
    if (x.requires_grad() && grad_enabled()) {
        out.set_requires_grad(true);
        GradTape::current().push({"reshape", impl, [x](const TensorImpl& o) {
                                      auto gx = grad_if(x);
                                      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += o.grad[i];
                                  }});
    }
    return out;
}

Tensor permute(const Tensor& x, std::vector<std::size_t> order) {
    const auto& s = x.shape();
    if (order.size() != s.size()) throw ShapeError("permute: order rank mismatch for " + shape_str(s));
    {
        auto sorted = order;
        std::sort(sorted.begin(), sorted.end());
        for (std::size_t i = 0; i < sorted.size(); ++i)
            if (sorted[i] != i) throw ShapeError("permute: order is not a permutation");
    }
    const auto in_strides = strides_of(s);
    Shape os(s.size());
    std::vector<std::size_t> src_stride(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
        os[i] = s[order[i]];
        src_stride[i] = in_strides[order[i]];
    }
    // Source offset of every output element.
    const std::size_t n = x.numel();
    std::vector<std::size_t> src(n);
    {
        std::vector<std::size_t> idx(os.size(), 0);
        std::size_t off = 0;
        for (std::size_t i = 0; i < n; ++i) {
            src[i] = off;
            for (std::size_t d = os.size(); d-- > 0;) {
                off += src_stride[d];
                if (++idx[d] < os[d]) break;
                off -= src_stride[d] * os[d];
                idx[d] = 0;
            }
        }
    }
    const auto xv = x.data();
    std::vector<float> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = xv[src[i]];
    return record_op("permute", std::move(os), std::move(out), {&x},
                     [x, src = std::move(src)](const TensorImpl& o) {
                         auto gx = grad_if(x);
                         if (gx.empty()) return;
                         for (std::size_t i = 0; i < src.size(); ++i) gx[src[i]] += o.grad[i];
                     });
}

Tensor transpose(const Tensor& x, int axis_a, int axis_b) {
    std::vector<std::size_t> order(x.rank());
    std::iota(order.begin(), order.end(), 0);
    std::swap(order[norm_axis(axis_a, x.rank(), "transpose")], order[norm_axis(axis_b, x.rank(), "transpose")]);
    return permute(x, std::move(order));
}

Tensor concat(const std::vector<Tensor>& parts, int axis) {
    if (parts.empty()) throw ShapeError("concat: no inputs");
    const Shape& s0 = parts[0].shape();
    const std::size_t ax = norm_axis(axis, s0.size(), "concat");
    Shape os = s0;
    os[ax] = 0;
    for (const auto& p : parts) {
        const auto& ps = p.shape();
        bool ok = ps.size() == s0.size();
        for (std::size_t i = 0; ok && i < ps.size(); ++i) ok = i == ax || ps[i] == s0[i];
        if (!ok) {
            throw ShapeError("concat: " + shape_str(ps) + " incompatible with " + shape_str(s0) +
                             " along axis " + std::to_string(axis));
        }
        os[ax] += ps[ax];
    }
    std::size_t outer = 1, inner = 1;
    for (std::size_t i = 0; i < ax; ++i) outer *= s0[i];
    for (std::size_t i = ax + 1; i < s0.size(); ++i) inner *= s0[i];
    const std::size_t out_row = os[ax] * inner;
    std::vector<float> out(shape_numel(os));
    std::vector<std::size_t> offsets;
    std::size_t at = 0;
    for (const auto& p : parts) {
        const std::size_t chunk = p.dim(static_cast<int>(ax)) * inner;
        const auto pv = p.data();
        for (std::size_t o = 0; o < outer; ++o)
            std::copy_n(pv.data() + o * chunk, chunk, out.data() + o * out_row + at);
        offsets.push_back(at);
        at += chunk;
    }
    return record_op("concat", std::move(os), std::move(out), parts,
                     [parts, offsets, outer, inner, out_row, ax](const TensorImpl& o) {
                         for (std::size_t k = 0; k < parts.size(); ++k) {
                             auto gp = grad_if(parts[k]);
                             if (gp.empty()) continue;
                             const std::size_t chunk = parts[k].dim(static_cast<int>(ax)) * inner;
                             for (std::size_t oo = 0; oo < outer; ++oo) {
                                 const float* g = o.grad.data() + oo * out_row + offsets[k];
                                 float* d = gp.data() + oo * chunk;
                                 for (std::size_t j = 0; j < chunk; ++j) d[j] += g[j];
                             }
                         }
                     });
}

Tensor narrow(const Tensor& x, int axis, std::size_t start, std::size_t length) {
    const auto& s = x.shape();
    const std::size_t ax = norm_axis(axis, s.size(), "narrow");
    if (start + length > s[ax]) {
        throw ShapeError("narrow: range [" + std::to_string(start) + ", " + std::to_string(start + length) +
                         ") exceeds axis of size " + std::to_string(s[ax]));
    }
    std::size_t outer = 1, inner = 1;
    for (std::size_t i = 0; i < ax; ++i) outer *= s[i];
    for (std::size_t i = ax + 1; i < s.size(); ++i) inner *= s[i];
    const std::size_t in_row = s[ax] * inner, chunk = length * inner, off = start * inner;
    Shape os = s;
    os[ax] = length;
    const auto xv = x.data();
    std::vector<float> out(outer * chunk);
    for (std::size_t o = 0; o < outer; ++o)
        std::copy_n(xv.data() + o * in_row + off, chunk, out.data() + o * chunk);
    return record_op("narrow", std::move(os), std::move(out), {&x},
                     [x, outer, in_row, chunk, off](const TensorImpl& o) {
                         auto gx = grad_if(x);
                         if (gx.empty()) return;
                         for (std::size_t oo = 0; oo < outer; ++oo) {
                             float* d = gx.data() + oo * in_row + off;
                             const float* g = o.grad.data() + oo * chunk;
                             for (std::size_t j = 0; j < chunk; ++j) d[j] += g[j];
                         }
                     });
}

} // namespace gebd
