#pragma once

#include <draglab/annotation.hpp>
#include <draglab/checkpoint.hpp>
#include <draglab/model.hpp>
#include <draglab/synth.hpp>

#include <nlohmann/json.hpp>

#include <filesystem>
#include <vector>

namespace draglab {

struct GenerationEntity {
    EntityMask mask;
    Trajectory trajectory;
};

struct GenerationRequest {
    /// First frame in [0, 1], [H, W, 3].
    Tensor first_frame;
    std::vector<GenerationEntity> entities;
    /// Reverse steps; 0 runs every step of the training schedule.
    int steps = 0;
    std::uint64_t seed = 0;
};

/// Which guidance streams the sampler feeds the model. These follow the
/// flags the checkpoint was trained with.
struct GuidanceFlags {
    bool use_entity = true;
    bool use_gaussian = true;
};

GuidanceFlags guidance_flags(const Checkpoint& checkpoint);

struct GenerationResult {
    VideoClip video;
    /// Requested trajectories after re-anchoring to each incircle center.
    std::vector<Trajectory> trajectories;
    std::vector<double> radii;
};

/// Evenly spaced timesteps from T down to 1, `steps` of them, ending at 1.
std::vector<int> sampling_timesteps(int total, int steps);

/// Ancestral DDPM sampling from pure noise, conditioned on the first frame
/// and the entity/Gaussian representations built from the request.
GenerationResult sample_video(const DragModel& model, const GenerationRequest& request,
                              const GuidanceFlags& flags = {});

/// Request document: the annotation format plus optional "steps", "seed" and
/// "first_frame" (a PNG path resolved against `base_dir`).
GenerationRequest request_from_json(const nlohmann::json& doc, const std::filesystem::path& base_dir);
GenerationRequest request_from_annotation(const Annotation& annotation, Tensor first_frame);

}  // namespace draglab
