#pragma once

#include <draglab/layers.hpp>

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace draglab {

enum class InjectionSite { encoder, decoder };

/// A small factorized space-time U-Net. Full-resolution stem stages bring
/// the input down to 1/8 (the base latent resolution); the U-Net levels
/// then run at 1/8, 1/16, 1/32 and a bottleneck.
struct DenoiserConfig {
    int image_channels = 3;
    /// Channels of the stem stages at 1, 1/2 and 1/4 resolution.
    std::vector<int> stem_channels{16, 32, 32};
    /// Base latent channel count c_g at 1/8 resolution.
    int base_channels = 32;
    std::vector<int> channel_mults{1, 2, 4};
    /// 1 disables temporal convolutions entirely.
    int temporal_kernel = 3;
    int time_dim = 64;
    int groups = 8;
    InjectionSite injection_site = InjectionSite::encoder;
    /// Adds a learned 1x1 projection of x_t to the predicted noise, initialized to the identity.
    bool input_skip = true;

    int levels() const { return static_cast<int>(channel_mults.size()); }
    int level_channels(int level) const { return base_channels * channel_mults.at(static_cast<std::size_t>(level)); }
    /// Channel width of the final decoder block (the feature layer).
    int feature_channels() const { return stem_channels.front(); }
    int input_channels() const { return 2 * image_channels; }
    /// Resolution factor between the input and the base latent.
    int latent_factor() const { return 1 << static_cast<int>(stem_channels.size()); }
    void validate() const;
};

/// Four features: one per U-Net level plus the bottleneck.
struct GuidancePyramid {
    std::vector<Tensor> features;
};

/// Spatial shapes of the encoder stages that guidance is added to.
std::vector<Shape> pyramid_shapes(const DenoiserConfig& config, int frames, int height, int width);

/// Channel concatenation of x_t with the first frame broadcast over the clip.
/// x_t: [B*L, H, W, c]; first_frames: [B, H, W, 3].
Tensor concatenate_first_frame(const Tensor& x_t, const Tensor& first_frames, int clip_length);

class Denoiser {
public:
    struct Output {
        nn::Var noise;
        /// Output of the final decoder block, [N, H, W, feature_channels].
        nn::Var features;
    };

    Denoiser() = default;
    Denoiser(nn::ParameterStore& store, const std::string& prefix, const DenoiserConfig& config, Rng& rng);

    /// `input` is concatenate_first_frame(x_t, ...); one timestep per clip.
    /// When `pyramid` is given its features are added at the configured site.
    Output forward(nn::Tape& tape, const nn::Var& input, std::span<const int> timesteps, int clip_length,
                   const std::vector<nn::Var>* pyramid = nullptr) const;

    const DenoiserConfig& config() const noexcept { return config_; }

private:
    DenoiserConfig config_;
    nn::LinearLayer time1_, time2_;
    nn::Conv2dLayer conv_in_;
    std::vector<nn::ResBlock> stem_blocks_;
    std::vector<nn::Conv2dLayer> stem_down_;
    std::vector<nn::ResBlock> levels_;
    std::vector<nn::Conv2dLayer> level_down_;
    nn::ResBlock bottleneck_;
    std::vector<nn::ResBlock> level_up_;
    std::vector<nn::ResBlock> stem_up_;
    nn::GroupNormLayer out_norm_;
    nn::Conv2dLayer conv_out_;
    nn::Conv2dLayer input_skip_;
};

/// Trainable copy of the denoiser's encoder levels that turns the combined
/// guidance R into the pyramid, through zero-initialized 1x1 injections.
class ControlBranch {
public:
    ControlBranch() = default;
    ControlBranch(nn::ParameterStore& store, const std::string& prefix, const DenoiserConfig& config, Rng& rng);

    /// Latent noise Z: the denoiser input folded to 1/8 resolution
    /// (space-to-depth) and projected to base_channels.
    nn::Var latent_noise(nn::Tape& tape, const nn::Var& input) const;
    std::vector<nn::Var> build_pyramid(nn::Tape& tape, const nn::Var& combined, std::span<const int> timesteps,
                                       int clip_length) const;
    GuidancePyramid build_pyramid(const Tensor& combined, std::span<const int> timesteps, int clip_length) const;

private:
    DenoiserConfig config_;
    nn::Conv2dLayer latent_proj_;
    nn::LinearLayer time1_, time2_;
    std::vector<nn::ResBlock> levels_;
    std::vector<nn::Conv2dLayer> level_down_;
    nn::ResBlock bottleneck_;
    std::vector<nn::Conv2dLayer> inject_;
};

}  // namespace draglab
