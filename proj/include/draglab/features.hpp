#pragma once

#include <draglab/denoiser.hpp>
#include <draglab/repr.hpp>
#include <draglab/schedule.hpp>

#include <span>
#include <vector>

namespace draglab {

/// Average of a [H, W, C] (or [1, H, W, C]) feature map over the
/// foreground pixels of `mask`. Throws InvalidEntityError on an empty mask.
EntityEmbedding pool_features(const Tensor& features, const EntityMask& mask);

/// Noises the image to x_{t*} with a seeded draw, runs one single-frame
/// denoiser pass and returns the final decoder block output, [H, W, C].
/// `image` holds [0, 1] pixels, [H, W, 3].
Tensor extract_feature_map(const Tensor& image, const Denoiser& denoiser, int t_star, const NoiseSchedule& schedule,
                           std::uint64_t seed);

/// One embedding per mask, pooled from a single feature map.
std::vector<EntityEmbedding> extract_entity_features(const Tensor& image, std::span<const EntityMask> masks,
                                                     const Denoiser& denoiser, int t_star,
                                                     const NoiseSchedule& schedule, std::uint64_t seed);

}  // namespace draglab
