#pragma once

#include <draglab/layers.hpp>

#include <array>
#include <string>

namespace draglab {

/// Encoder output at 1/8 resolution, shape [L, ceil(H/8), ceil(W/8), c_g].
struct GuidanceLatent {
    Tensor values;
    /// Input size after zero padding up to a multiple of 8.
    int padded_height = 0;
    int padded_width = 0;
};

/// Four convolution blocks (conv, SiLU, conv). The first block keeps the
/// resolution and the other three halve it, so the output sits at 1/8. The
/// last convolution starts at zero so a fresh encoder emits zeros.
class GuidanceEncoder {
public:
    static constexpr int kDownsample = 8;

    GuidanceEncoder() = default;
    GuidanceEncoder(nn::ParameterStore& store, const std::string& prefix, int in_channels,
                    const std::array<int, 4>& widths, int out_channels, Rng& rng);

    /// x: [N, H, W, in_channels]; pads H and W up to multiples of 8.
    nn::Var operator()(nn::Tape& tape, const nn::Var& x) const;
    GuidanceLatent encode(const Tensor& sequence) const;

    int in_channels() const noexcept { return in_channels_; }
    int out_channels() const noexcept { return out_channels_; }

private:
    int in_channels_ = 0;
    int out_channels_ = 0;
    std::array<nn::Conv2dLayer, 4> first_;
    std::array<nn::Conv2dLayer, 4> second_;
};

/// R = E(entity) + E(gaussian) + Z, elementwise.
Tensor combine_guidance(const Tensor& entity_latent, const Tensor& gaussian_latent, const Tensor& noise_latent);
nn::Var combine_guidance(const nn::Var& entity_latent, const nn::Var& gaussian_latent, const nn::Var& noise_latent);

}  // namespace draglab
