#pragma once

#include <draglab/repr.hpp>
#include <draglab/rng.hpp>
#include <draglab/tensor.hpp>

#include <array>
#include <cstdint>
#include <vector>

namespace draglab {

using Color = std::array<double, 3>;

/// Video frames, shape [L, H, W, 3], values in [0, 1].
struct VideoClip {
    Tensor frames;

    int length() const { return frames.dim(0); }
    int height() const { return frames.dim(1); }
    int width() const { return frames.dim(2); }
    /// Frame i as a [H, W, 3] tensor.
    Tensor frame(int i) const;
};

enum class ShapeKind { disk, square };
enum class MotionKind { linear, sinusoidal };

/// p(i) = start + velocity * i + amplitude * (sin(2 pi i / period + phase) - sin(phase)).
struct Motion {
    MotionKind kind = MotionKind::linear;
    Point2D start;
    Point2D velocity;
    Point2D amplitude;
    double period = 8.0;
    double phase = 0.0;

    Point2D at(int frame) const;
};

struct ShapeSpec {
    ShapeKind kind = ShapeKind::disk;
    Color color{1.0, 0.0, 0.0};
    /// Disk radius or square side length, in pixels.
    double size = 4.0;
    Motion motion;
};

struct SceneSpec {
    int frames = 8;
    int height = 32;
    int width = 32;
    std::vector<ShapeSpec> shapes;
    Color background{0.08, 0.08, 0.1};
    /// Amplitude of the per-pixel background texture; 0 gives a flat background.
    double texture = 0.0;
    std::uint64_t seed = 0;
};

struct SyntheticClip {
    VideoClip video;
    /// frame_masks[k][i]: analytic region of shape k in frame i.
    std::vector<std::vector<EntityMask>> frame_masks;
    /// Analytic shape centers per frame.
    std::vector<Trajectory> trajectories;

    std::vector<EntityMask> first_frame_masks() const;
};

/// Renders the scene. Deterministic for a fixed spec. Throws SpecError when a
/// shape leaves the frame or moves more than H/4 pixels between frames.
SyntheticClip generate_clip(const SceneSpec& spec);

struct SceneSampler {
    int frames = 8;
    int height = 32;
    int width = 32;
    int min_shapes = 1;
    int max_shapes = 2;
    /// Per-frame speed range in pixels.
    double min_speed = 0.5;
    double max_speed = 2.0;
};

/// Random scene with non-overlapping shapes that stay inside the frame.
SceneSpec random_scene(const SceneSampler& sampler, std::uint64_t seed);

const std::vector<Color>& shape_palette();
const std::vector<Color>& background_palette();

struct TrainingSample {
    VideoClip clip;
    std::vector<EntityMask> first_frame_masks;
    /// Trajectories re-anchored so frame 0 sits on the incircle center.
    std::vector<Trajectory> gt_trajectories;
    std::vector<double> radii;
    EntityRepSequence entity_rep;
    GaussianMapSequence gaussian_rep;
    /// Union of the per-frame entity regions, shape [L, H, W, 1].
    Tensor loss_mask;
};

/// Composes incircle extraction, trajectory re-anchoring and representation
/// building. When `frame_masks` is empty the loss mask is the first-frame
/// mask shifted along each trajectory. `channels` fixes the embedding width
/// for clips without entities; 0 infers it from `embeddings`.
TrainingSample make_training_sample(const VideoClip& clip, std::span<const EntityMask> first_frame_masks,
                                    std::span<const Trajectory> trajectories,
                                    std::span<const EntityEmbedding> embeddings,
                                    std::span<const std::vector<EntityMask>> frame_masks = {}, int channels = 0);

/// Shifts a mask by a rounded offset; pixels leaving the frame are dropped.
EntityMask translate_mask(const EntityMask& mask, int dx, int dy);

}  // namespace draglab
