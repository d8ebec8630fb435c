#pragma once

// Grouped pairwise similarity maps over encoded windows and the small FCN
// that reads them into one vector per candidate frame.

#include <string>
#include <string_view>

#include "gebd/checkpoint.hpp"
#include "gebd/init.hpp"

namespace gebd {

/// Distance kinds are returned negated, so larger always means more similar.
enum class SimilarityKind { cosine, euclidean, manhattan, chebyshev };

SimilarityKind parse_similarity(std::string_view name);
std::string_view to_string(SimilarityKind kind);

inline constexpr float kCosineEps = 1e-8f;

struct GroupedFeature {
    Tensor values;  // [N, L, G, C/G]; view of the encoded windows
    std::size_t groups = 1;
};

struct GroupSimilarityMap {
    Tensor maps;  // [N, G, L, L]
    SimilarityKind kind = SimilarityKind::cosine;
};

/// x: [N, L, C]. Channel c of group g is original channel g * C/G + c.
GroupedFeature split_groups(const Tensor& x, std::size_t groups);

/// Pairwise similarity within each row set: x[B, L, D] -> [B, L, L].
Tensor pairwise_similarity(const Tensor& x, SimilarityKind kind);

GroupSimilarityMap similarity(const GroupedFeature& grouped, SimilarityKind kind);

/// Four 3x3 conv layers G -> C/4 -> C/2 -> C -> C with ReLU between.
struct FcnWeights {
    Tensor w[4];
    Tensor b[4];

    static FcnWeights create(std::size_t groups, std::size_t channels, ParamSet& params, Rng& rng,
                             const std::string& prefix = "fcn.");
    std::size_t in_channels() const { return w[0].dim(1); }
    std::size_t out_channels() const { return w[3].dim(0); }
};

struct PooledRepresentation {
    Tensor h;  // [N, C]
};

/// maps [N, G, L, L] -> s [N, C, L, L] -> spatial mean [N, C].
PooledRepresentation read_patterns(const GroupSimilarityMap& maps, const FcnWeights& fcn);

} // namespace gebd
