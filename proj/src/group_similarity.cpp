#include "gebd/group_similarity.hpp"

#include <algorithm>
#include <cmath>

#include "gebd/error.hpp"
#include "gebd/ops.hpp"

namespace gebd {

SimilarityKind parse_similarity(std::string_view name) {
    if (name == "cosine") return SimilarityKind::cosine;
    if (name == "euclidean") return SimilarityKind::euclidean;
    if (name == "manhattan") return SimilarityKind::manhattan;
    if (name == "chebyshev") return SimilarityKind::chebyshev;
    throw ConfigError("unknown similarity kind '" + std::string(name) +
                      "' (expected cosine|euclidean|manhattan|chebyshev)");
}

std::string_view to_string(SimilarityKind kind) {
    switch (kind) {
    case SimilarityKind::cosine: return "cosine";
    case SimilarityKind::euclidean: return "euclidean";
    case SimilarityKind::manhattan: return "manhattan";
    case SimilarityKind::chebyshev: return "chebyshev";
    }
    return "?";
}

GroupedFeature split_groups(const Tensor& x, std::size_t groups) {
    if (x.rank() != 3) throw ShapeError("split_groups: expected [N, L, C], got " + shape_str(x.shape()));
    const std::size_t c = x.dim(2);
    if (groups == 0 || c % groups != 0) {
        throw ConfigError("channels C=" + std::to_string(c) + " not divisible by groups G=" + std::to_string(groups));
    }
    return {reshape(x, {x.dim(0), x.dim(1), groups, c / groups}), groups};
}

namespace {

float sgn(float v) { return v > 0.0f ? 1.0f : (v < 0.0f ? -1.0f : 0.0f); }

} // namespace

Tensor pairwise_similarity(const Tensor& x, SimilarityKind kind) {
    if (x.rank() != 3) throw ShapeError("pairwise_similarity: expected [B, L, D], got " + shape_str(x.shape()));
    const std::size_t nb = x.dim(0), l = x.dim(1), d = x.dim(2);
    const auto xv = x.data();
    std::vector<float> out(nb * l * l);
    std::vector<float> norms(kind == SimilarityKind::cosine ? nb * l : 0);
    if (kind == SimilarityKind::cosine) {
        for (std::size_t r = 0; r < nb * l; ++r) {
            double s = 0.0;
            for (std::size_t c = 0; c < d; ++c) s += double(xv[r * d + c]) * xv[r * d + c];
            norms[r] = static_cast<float>(std::sqrt(s));
        }
    }
    for (std::size_t b = 0; b < nb; ++b) {
        for (std::size_t i = 0; i < l; ++i) {
            const float* xi = xv.data() + (b * l + i) * d;
            for (std::size_t j = i; j < l; ++j) {
                const float* xj = xv.data() + (b * l + j) * d;
                float v = 0.0f;
                switch (kind) {
                case SimilarityKind::cosine: {
                    double dot = 0.0;
                    for (std::size_t c = 0; c < d; ++c) dot += double(xi[c]) * xj[c];
                    v = static_cast<float>(dot / (double(norms[b * l + i]) * norms[b * l + j] + kCosineEps));
                    break;
                }
                case SimilarityKind::euclidean: {
                    double s = 0.0;
                    for (std::size_t c = 0; c < d; ++c) s += double(xi[c] - xj[c]) * (xi[c] - xj[c]);
                    v = -static_cast<float>(std::sqrt(s));
                    break;
                }
                case SimilarityKind::manhattan: {
                    double s = 0.0;
                    for (std::size_t c = 0; c < d; ++c) s += std::fabs(xi[c] - xj[c]);
                    v = -static_cast<float>(s);
                    break;
                }
                case SimilarityKind::chebyshev: {
                    float m = 0.0f;
                    for (std::size_t c = 0; c < d; ++c) m = std::max(m, std::fabs(xi[c] - xj[c]));
                    v = -m;
                    break;
                }
                }
                out[(b * l + i) * l + j] = v;
                out[(b * l + j) * l + i] = v;
            }
        }
    }
    return record_op(
        "pairwise_similarity", {nb, l, l}, std::move(out), {&x},
        [x, kind, norms = std::move(norms), nb, l, d](const TensorImpl& o) {
            if (!x.requires_grad()) return;
            auto gx = x.impl()->grad_buffer();
            const auto xv = x.data();
            for (std::size_t b = 0; b < nb; ++b) {
                for (std::size_t i = 0; i < l; ++i) {
                    const std::size_t ri = b * l + i;
                    const float* xi = xv.data() + ri * d;
                    float* gi = gx.data() + ri * d;
                    for (std::size_t j = 0; j < l; ++j) {
                        const std::size_t rj = b * l + j;
                        const float g = o.grad[ri * l + j];
                        if (g == 0.0f) continue;
                        const float* xj = xv.data() + rj * d;
                        float* gj = gx.data() + rj * d;
                        switch (kind) {
                        case SimilarityKind::cosine: {
                            const float ni = norms[ri], nj = norms[rj];
                            const float den = ni * nj + kCosineEps;
                            float dot = 0.0f;
                            for (std::size_t c = 0; c < d; ++c) dot += xi[c] * xj[c];
                            const float coef = dot / (den * den);
                            const float ci = ni > 0.0f ? coef * nj / ni : 0.0f;
                            const float cj = nj > 0.0f ? coef * ni / nj : 0.0f;
                            for (std::size_t c = 0; c < d; ++c) {
                                gi[c] += g * (xj[c] / den - ci * xi[c]);
                                gj[c] += g * (xi[c] / den - cj * xj[c]);
                            }
                            break;
                        }
                        case SimilarityKind::euclidean: {
                            double s = 0.0;
                            for (std::size_t c = 0; c < d; ++c) s += double(xi[c] - xj[c]) * (xi[c] - xj[c]);
                            const float dist = static_cast<float>(std::sqrt(s));
                            if (dist == 0.0f) break;
                            for (std::size_t c = 0; c < d; ++c) {
                                const float u = g * (xi[c] - xj[c]) / dist;
                                gi[c] -= u;
                                gj[c] += u;
                            }
                            break;
                        }
                        case SimilarityKind::manhattan: {
                            for (std::size_t c = 0; c < d; ++c) {
                                const float u = g * sgn(xi[c] - xj[c]);
                                gi[c] -= u;
                                gj[c] += u;
                            }
                            break;
                        }
                        case SimilarityKind::chebyshev: {
                            std::size_t arg = 0;
                            float m = -1.0f;
                            for (std::size_t c = 0; c < d; ++c) {
                                const float a = std::fabs(xi[c] - xj[c]);
                                if (a > m) {
                                    m = a;
                                    arg = c;
                                }
                            }
                            const float u = g * sgn(xi[arg] - xj[arg]);
                            gi[arg] -= u;
                            gj[arg] += u;
                            break;
                        }
                        }
                    }
                }
            }
        });
}

GroupSimilarityMap similarity(const GroupedFeature& grouped, SimilarityKind kind) {
    const Tensor& v = grouped.values;
    const std::size_t n = v.dim(0), l = v.dim(1), g = v.dim(2), cg = v.dim(3);
    const Tensor per_group = reshape(permute(v, {0, 2, 1, 3}), {n * g, l, cg});
    return {reshape(pairwise_similarity(per_group, kind), {n, g, l, l}), kind};
}

FcnWeights FcnWeights::create(std::size_t groups, std::size_t channels, ParamSet& params, Rng& rng,
                              const std::string& prefix) {
    if (channels < 4 || channels % 4 != 0) {
        throw ConfigError("FCN width C=" + std::to_string(channels) + " must be a positive multiple of 4");
    }
    const std::size_t widths[5] = {groups, channels / 4, channels / 2, channels, channels};
    FcnWeights f;
    for (int i = 0; i < 4; ++i) {
        const std::string p = prefix + "conv" + std::to_string(i) + ".";
        f.w[i] = params.add(p + "weight", he_uniform({widths[i + 1], widths[i], 3, 3}, widths[i] * 9, rng));
        f.b[i] = params.add(p + "bias", Tensor::zeros({widths[i + 1]}));
    }
    return f;
}

PooledRepresentation read_patterns(const GroupSimilarityMap& maps, const FcnWeights& fcn) {
    const Tensor& m = maps.maps;
    if (m.rank() != 4) throw ShapeError("read_patterns: expected [N, G, L, L], got " + shape_str(m.shape()));
    if (m.dim(1) != fcn.in_channels()) {
        throw ConfigError("read_patterns: map has " + std::to_string(m.dim(1)) + " groups, FCN expects " +
                          std::to_string(fcn.in_channels()));
    }
    Tensor s = m;
    for (int i = 0; i < 4; ++i) {
        s = conv2d(s, fcn.w[i], fcn.b[i]);
        if (i < 3) s = relu(s);
    }
    return {mean(s, {2, 3})};
}

} // namespace gebd
