#pragma once

#include <cmath>
#include <random>

#include "gebd/tensor.hpp"

namespace gebd {

using Rng = std::mt19937_64;

/// U(-sqrt(6/fan_in), sqrt(6/fan_in)).
inline Tensor he_uniform(Shape shape, std::size_t fan_in, Rng& rng) {
    const float bound = std::sqrt(6.0f / static_cast<float>(fan_in));
    std::uniform_real_distribution<float> dist(-bound, bound);
    Tensor t = Tensor::zeros(std::move(shape));
    for (auto& v : t.mutable_data()) v = dist(rng);
    return t;
}

inline Tensor normal_init(Shape shape, float stddev, Rng& rng) {
    std::normal_distribution<float> dist(0.0f, stddev);
    Tensor t = Tensor::zeros(std::move(shape));
    for (auto& v : t.mutable_data()) v = dist(rng);
    return t;
}

} // namespace gebd
