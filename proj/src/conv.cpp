// Same-padded, stride-1 convolutions lowered to im2col + GEMM.

#include <algorithm>

#include "gebd/error.hpp"
#include "gebd/ops.hpp"
#include "gemm.hpp"

namespace gebd {

namespace {

struct ConvGeom {
    std::size_t batch, cin, h, w, cout, kh, kw;
    std::size_t hw() const { return h * w; }
    std::size_t patch() const { return cin * kh * kw; }
};

void im2col(const ConvGeom& g, const float* x, float* col) {
    const long ph = static_cast<long>(g.kh / 2), pw = static_cast<long>(g.kw / 2);
    const long H = static_cast<long>(g.h), W = static_cast<long>(g.w);
    std::size_t row = 0;
    for (std::size_t c = 0; c < g.cin; ++c) {
        const float* xc = x + c * g.hw();
        for (std::size_t ki = 0; ki < g.kh; ++ki) {
            for (std::size_t kj = 0; kj < g.kw; ++kj, ++row) {
                float* dst = col + row * g.hw();
                const long dy = static_cast<long>(ki) - ph, dx = static_cast<long>(kj) - pw;
                const long x0 = std::max(0L, -dx), x1 = std::min(W, W - dx);
                for (long y = 0; y < H; ++y) {
                    float* d = dst + y * W;
                    const long sy = y + dy;
                    if (sy < 0 || sy >= H || x0 >= x1) {
                        std::fill_n(d, W, 0.0f);
                        continue;
                    }
                    std::fill_n(d, x0, 0.0f);
                    std::copy(xc + sy * W + x0 + dx, xc + sy * W + x1 + dx, d + x0);
                    std::fill(d + x1, d + W, 0.0f);
                }
            }
        }
    }
}

void col2im_add(const ConvGeom& g, const float* col, float* x) {
    const long ph = static_cast<long>(g.kh / 2), pw = static_cast<long>(g.kw / 2);
    const long H = static_cast<long>(g.h), W = static_cast<long>(g.w);
    std::size_t row = 0;
    for (std::size_t c = 0; c < g.cin; ++c) {
        float* xc = x + c * g.hw();
        for (std::size_t ki = 0; ki < g.kh; ++ki) {
            for (std::size_t kj = 0; kj < g.kw; ++kj, ++row) {
                const float* src = col + row * g.hw();
                const long dy = static_cast<long>(ki) - ph, dx = static_cast<long>(kj) - pw;
                const long x0 = std::max(0L, -dx), x1 = std::min(W, W - dx);
                for (long y = 0; y < H; ++y) {
                    const long sy = y + dy;
                    if (sy < 0 || sy >= H) continue;
                    const float* s = src + y * W;
                    float* d = xc + sy * W + dx;
                    for (long xx = x0; xx < x1; ++xx) d[xx] += s[xx];
                }
            }
        }
    }
}

Tensor conv_core(const char* name, const Tensor& x, const Tensor& w, const Tensor& bias, ConvGeom g,
                 Shape out_shape) {
    if (bias.defined() && bias.shape() != Shape{g.cout}) {
        throw ShapeError(std::string(name) + ": bias " + shape_str(bias.shape()) + " expected [" +
                         std::to_string(g.cout) + "]");
    }
    const bool unit = g.kh == 1 && g.kw == 1;
    const std::size_t hw = g.hw(), patch = g.patch();
    std::vector<float> out(g.batch * g.cout * hw);
    std::vector<float> col(unit ? 0 : patch * hw);
    const float* xd = x.data().data();
    const float* wd = w.data().data();
    for (std::size_t b = 0; b < g.batch; ++b) {
        const float* xb = xd + b * g.cin * hw;
        const float* cb = xb;
        if (!unit) {
            im2col(g, xb, col.data());
            cb = col.data();
        }
        float* ob = out.data() + b * g.cout * hw;
        detail::gemm(false, false, static_cast<long>(g.cout), static_cast<long>(hw), static_cast<long>(patch),
                     wd, cb, ob, false);
        if (bias.defined()) {
            const auto bv = bias.data();
            for (std::size_t c = 0; c < g.cout; ++c)
                for (std::size_t i = 0; i < hw; ++i) ob[c * hw + i] += bv[c];
        }
    }
    std::vector<Tensor> inputs{x, w};
    if (bias.defined()) inputs.push_back(bias);
    return record_op(name, std::move(out_shape), std::move(out), inputs, [x, w, bias, g, unit](const TensorImpl& o) {
        const std::size_t hw = g.hw(), patch = g.patch();
        std::span<float> gx, gw, gb;
        if (x.requires_grad()) gx = x.impl()->grad_buffer();
        if (w.requires_grad()) gw = w.impl()->grad_buffer();
        if (bias.defined() && bias.requires_grad()) gb = bias.impl()->grad_buffer();
        std::vector<float> col(unit ? 0 : patch * hw);
        std::vector<float> dcol(unit || gx.empty() ? 0 : patch * hw);
        const float* xd = x.data().data();
        const float* wd = w.data().data();
        for (std::size_t b = 0; b < g.batch; ++b) {
            const float* gy = o.grad.data() + b * g.cout * hw;
            if (!gb.empty()) {
                for (std::size_t c = 0; c < g.cout; ++c) {
                    float s = 0.0f;
                    for (std::size_t i = 0; i < hw; ++i) s += gy[c * hw + i];
                    gb[c] += s;
                }
            }
            const float* xb = xd + b * g.cin * hw;
            if (!gw.empty()) {
                const float* cb = xb;
                if (!unit) {
                    im2col(g, xb, col.data());
                    cb = col.data();
                }
                detail::gemm(false, true, static_cast<long>(g.cout), static_cast<long>(patch),
                             static_cast<long>(hw), gy, cb, gw.data(), true);
            }
            if (!gx.empty()) {
                float* gxb = gx.data() + b * g.cin * hw;
                if (unit) {
                    detail::gemm(true, false, static_cast<long>(patch), static_cast<long>(hw),
                                 static_cast<long>(g.cout), wd, gy, gxb, true);
                } else {
                    detail::gemm(true, false, static_cast<long>(patch), static_cast<long>(hw),
                                 static_cast<long>(g.cout), wd, gy, dcol.data(), false);
                    col2im_add(g, dcol.data(), gxb);
                }
            }
        }
    });
}

} // namespace

Tensor conv1d(const Tensor& x, const Tensor& w, const Tensor& bias) {
    const auto& xs = x.shape();
    const auto& ws = w.shape();
    if (xs.size() != 3 || ws.size() != 3 || xs[1] != ws[1]) {
        throw ShapeError("conv1d: input " + shape_str(xs) + " incompatible with weight " + shape_str(ws));
    }
    if (ws[2] % 2 == 0) throw ConfigError("conv1d: kernel size " + std::to_string(ws[2]) + " must be odd");
    ConvGeom g{xs[0], xs[1], 1, xs[2], ws[0], 1, ws[2]};
    return conv_core("conv1d", x, w, bias, g, {xs[0], ws[0], xs[2]});
}

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& bias) {
    const auto& xs = x.shape();
    const auto& ws = w.shape();
    if (xs.size() != 4 || ws.size() != 4 || xs[1] != ws[1]) {
        throw ShapeError("conv2d: input " + shape_str(xs) + " incompatible with weight " + shape_str(ws));
    }
    if (ws[2] % 2 == 0 || ws[3] % 2 == 0) {
        throw ConfigError("conv2d: kernel " + std::to_string(ws[2]) + "x" + std::to_string(ws[3]) +
                          " must have odd sides");
    }
    ConvGeom g{xs[0], xs[1], xs[2], xs[3], ws[0], ws[2], ws[3]};
    return conv_core("conv2d", x, w, bias, g, {xs[0], ws[0], xs[2], xs[3]});
}

} // namespace gebd
