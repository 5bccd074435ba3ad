#include <draglab/features.hpp>

namespace draglab {

EntityEmbedding pool_features(const Tensor& features, const EntityMask& mask) {
    const bool batched = features.rank() == 4 && features.dim(0) == 1;
    if (features.rank() != 3 && !batched) {
        throw ArgumentError("pool_features: expected [H, W, C], got " + shape_string(features.shape()));
    }
    const std::size_t o = batched ? 1 : 0;
    const int h = features.dim(o), w = features.dim(o + 1), c = features.dim(o + 2);
    if (mask.height != h || mask.width != w) {
        throw ArgumentError("pool_features: mask " + std::to_string(mask.height) + "x" + std::to_string(mask.width) +
                            " does not match feature map " + shape_string(features.shape()));
    }
    const std::size_t count = mask.foreground_count();
    if (count == 0) throw InvalidEntityError("entity '" + mask.entity_id + "' has an empty mask");
    std::vector<double> acc(static_cast<std::size_t>(c), 0.0);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            if (!mask.at(y, x)) continue;
            const real* f = features.data() + (static_cast<std::size_t>(y) * w + x) * c;
            for (int k = 0; k < c; ++k) acc[k] += f[k];
        }
    EntityEmbedding out(static_cast<std::size_t>(c));
    for (int k = 0; k < c; ++k) out[k] = static_cast<real>(acc[k] / static_cast<double>(count));
    return out;
}

Tensor extract_feature_map(const Tensor& image, const Denoiser& denoiser, int t_star, const NoiseSchedule& schedule,
                           std::uint64_t seed) {
    if (image.rank() != 3 || image.dim(2) != 3) {
        throw ArgumentError("extract_feature_map: image must be [H, W, 3], got " + shape_string(image.shape()));
    }
    Tensor x0 = pixels_to_latent(image);
    x0.reshape({1, image.dim(0), image.dim(1), 3});
    Rng rng(seed);
    const Tensor noise = standard_normal(x0.shape(), rng);
    const Tensor x_t = forward_noise(x0, t_star, noise, schedule);
    nn::Tape tape(false);
    const int timesteps[] = {t_star};
    const nn::Var input = tape.constant(concatenate_first_frame(x_t, x0, 1));
    Tensor features = denoiser.forward(tape, input, timesteps, 1).features.value();
    features.reshape({image.dim(0), image.dim(1), features.dim(3)});
    return features;
}

std::vector<EntityEmbedding> extract_entity_features(const Tensor& image, std::span<const EntityMask> masks,
                                                     const Denoiser& denoiser, int t_star,
                                                     const NoiseSchedule& schedule, std::uint64_t seed) {
    for (const auto& m : masks)
        if (m.foreground_count() == 0) throw InvalidEntityError("entity '" + m.entity_id + "' has an empty mask");
    std::vector<EntityEmbedding> out;
    if (masks.empty()) return out;
    const Tensor features = extract_feature_map(image, denoiser, t_star, schedule, seed);
    for (const auto& m : masks) out.push_back(pool_features(features, m));
    return out;
}

}  // namespace draglab
