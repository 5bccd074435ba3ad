#pragma once

#include <draglab/adamw.hpp>
#include <draglab/checkpoint.hpp>
#include <draglab/corpus.hpp>
#include <draglab/model.hpp>

#include <nlohmann/json.hpp>

#include <filesystem>
#include <functional>
#include <optional>
#include <vector>

namespace draglab {

/// Raised in strict mode when the loss mask has no foreground at all.
class DegenerateBatchError : public TrainingError {
public:
    using TrainingError::TrainingError;
};

enum class MaskMode { strict, lenient };

/// sum(M * (eps - eps_hat)^2) divided by the masked element count (at least 1).
/// A single-channel M is broadcast over channels. Accumulates in double.
double masked_mse_loss(const Tensor& eps, const Tensor& eps_hat, const Tensor& mask,
                       MaskMode mode = MaskMode::lenient);
nn::Var masked_mse_loss(const Tensor& eps, const nn::Var& eps_hat, const Tensor& mask,
                        MaskMode mode = MaskMode::lenient);

struct TrainConfig {
    int steps = 5000;
    double learning_rate = 1e-4;
    int batch_size = 4;
    std::uint64_t seed = 0;
    bool use_entity = true;
    bool use_gaussian = true;
    bool use_loss_mask = true;
    /// Leading steps that train the bare denoiser with plain MSE and no guidance.
    int foundation_steps = 2000;
    /// Keep the denoiser fixed once guidance training starts.
    bool freeze_base = true;
    double weight_decay = 0.01;
    double grad_clip = 1.0;
    /// Checkpoint every N steps into checkpoint_dir; 0 disables.
    int checkpoint_every = 0;
    std::string checkpoint_dir;

    void validate() const;
};

nlohmann::json to_json(const TrainConfig& config);
TrainConfig train_config_from_json(const nlohmann::json& doc);

/// Everything the trainer needs from one clip, precomputed once.
struct PreparedClip {
    std::string name;
    /// Video in latent range, [L, H, W, 3].
    Tensor latent;
    /// Frame 0 in latent range, [1, H, W, 3].
    Tensor first_frame;
    Tensor entity_rep;
    Tensor gaussian_rep;
    Tensor loss_mask;
    TrainingSample sample;
};

/// Extracts entity embeddings with the model's feature extractor and builds
/// the training sample for one annotated clip.
PreparedClip prepare_clip(const DragModel& model, const CorpusClip& clip);

struct StepRecord {
    long long step = 0;
    double loss = 0.0;
    double grad_norm = 0.0;
    bool foundation = false;
};

class Trainer {
public:
    Trainer(const TrainConfig& config, const ModelConfig& model_config, const Corpus& corpus);
    Trainer(const TrainConfig& config, const Checkpoint& resume, const Corpus& corpus);

    /// One AdamW update. Throws TrainingError on a non-finite loss or gradient.
    StepRecord step();
    long long current_step() const noexcept { return step_; }
    bool finished() const noexcept { return step_ >= config_.steps; }

    Checkpoint checkpoint() const;
    DragModel& model() noexcept { return *model_; }
    const std::vector<PreparedClip>& clips() const noexcept { return clips_; }
    const TrainConfig& config() const noexcept { return config_; }

    /// Guidance-phase objective averaged over fixed seeded draws of (clip, t,
    /// noise); independent of the training stream.
    double evaluate_loss(int draws, std::uint64_t seed) const;

private:
    void configure_phase();

    TrainConfig config_;
    std::unique_ptr<DragModel> model_;
    std::unique_ptr<nn::AdamW> optimizer_;
    std::vector<PreparedClip> clips_;
    Rng rng_;
    long long step_ = 0;
};

struct TrainingResult {
    std::vector<StepRecord> history;
    Checkpoint checkpoint;
};

/// Runs until config.steps, writing periodic checkpoints when configured.
/// `resume` continues a previous run exactly.
TrainingResult run_training(const TrainConfig& config, const ModelConfig& model_config, const Corpus& corpus,
                            const std::optional<Checkpoint>& resume = std::nullopt,
                            const std::function<void(const StepRecord&)>& on_step = {});

}  // namespace draglab
