#pragma once

#include <draglab/repr.hpp>
#include <draglab/synth.hpp>

#include <nlohmann/json.hpp>

#include <span>
#include <string>
#include <vector>

namespace draglab {

inline constexpr double kDefaultColorTolerance = 0.25;

/// Follows an entity by color: per frame, the centroid of pixels whose RGB
/// distance to the entity's mean color is within `tolerance`. The reference
/// color is averaged over `reference` on `reference_frame` ([H, W, 3]), or on
/// the video's first frame when none is given. A frame with no matching
/// pixel repeats the previous point.
Trajectory track_centroid(const VideoClip& video, const EntityMask& reference,
                          double tolerance = kDefaultColorTolerance, const Tensor* reference_frame = nullptr);

struct EntityScore {
    std::string entity_id;
    double objmc = 0.0;
    std::vector<double> frame_errors;
};

struct EvalReport {
    std::vector<EntityScore> entities;
    /// Mean of the per-entity values; 0 when there are no entities.
    double mean_objmc = 0.0;
    nlohmann::json config = nlohmann::json::object();
};

/// Per entity, the mean over frames of the Euclidean distance between the
/// predicted and ground-truth points. Entities are matched by id; the
/// report follows the order of `gt`.
EvalReport objmc(std::span<const Trajectory> pred, std::span<const Trajectory> gt);

nlohmann::json to_json(const EvalReport& report);

}  // namespace draglab
