#pragma once

#include <draglab/denoiser.hpp>
#include <draglab/guidance.hpp>
#include <draglab/schedule.hpp>

#include <nlohmann/json.hpp>

#include <array>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace draglab {

struct FeatureConfig {
    /// Noise level of the single extraction pass; 0 means T/2.
    int t_star = 0;
    std::uint64_t seed = 7;
    /// Only "final_decoder" is supported.
    std::string layer = "final_decoder";
};

struct ModelConfig {
    int frames = 8;
    int height = 32;
    int width = 32;
    DenoiserConfig denoiser;
    std::array<int, 4> guidance_widths{16, 32, 32, 32};
    int schedule_steps = 1000;
    FeatureConfig feature;
    std::uint64_t init_seed = 1;

    int entity_channels() const { return denoiser.feature_channels(); }
    int t_star() const { return feature.t_star > 0 ? feature.t_star : schedule_steps / 2; }
    void validate() const;
};

nlohmann::json to_json(const ModelConfig& config);
ModelConfig model_config_from_json(const nlohmann::json& doc);

/// Batched model inputs. Clips are stacked frame-major, so tensors with a
/// leading B*L axis hold clip b at rows [b*L, (b+1)*L).
struct ModelInputs {
    /// Noisy latent video, [B*L, H, W, 3].
    const Tensor* x_t = nullptr;
    /// First frame in latent range, [B, H, W, 3].
    const Tensor* first_frames = nullptr;
    /// Entity representation maps, [B*L, H, W, C]; may be null when unused.
    const Tensor* entity_rep = nullptr;
    /// Gaussian maps, [B*L, H, W, 1]; may be null when unused.
    const Tensor* gaussian_rep = nullptr;
    std::vector<int> timesteps;
    bool use_control = true;
    bool use_entity = true;
    bool use_gaussian = true;
};

/// Denoiser plus the guidance branch, and a frozen randomly initialized copy
/// of the denoiser architecture used as the entity feature extractor.
class DragModel {
public:
    explicit DragModel(const ModelConfig& config);
    DragModel(const DragModel&) = delete;
    DragModel& operator=(const DragModel&) = delete;

    const ModelConfig& config() const noexcept { return config_; }
    const NoiseSchedule& schedule() const noexcept { return schedule_; }
    nn::ParameterStore& parameters() noexcept { return store_; }
    const nn::ParameterStore& parameters() const noexcept { return store_; }

    /// Freezes or unfreezes every parameter of the base denoiser.
    void set_base_trainable(bool trainable);

    nn::Var predict_noise(nn::Tape& tape, const ModelInputs& inputs) const;
    Tensor predict_noise(const ModelInputs& inputs) const;

    const Denoiser& denoiser() const noexcept { return denoiser_; }
    const ControlBranch& control() const noexcept { return control_; }
    const GuidanceEncoder& entity_encoder() const noexcept { return entity_encoder_; }
    const GuidanceEncoder& gaussian_encoder() const noexcept { return gaussian_encoder_; }
    const Denoiser& feature_extractor() const noexcept { return extractor_; }

private:
    ModelConfig config_;
    NoiseSchedule schedule_;
    nn::ParameterStore store_;
    nn::ParameterStore extractor_store_;
    Denoiser denoiser_;
    ControlBranch control_;
    GuidanceEncoder entity_encoder_;
    GuidanceEncoder gaussian_encoder_;
    Denoiser extractor_;
};

}  // namespace draglab
