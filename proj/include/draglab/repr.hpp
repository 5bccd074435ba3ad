#pragma once

#include <draglab/common.hpp>
#include <draglab/tensor.hpp>

#include <span>
#include <string>
#include <utility>
#include <vector>

namespace draglab {

/// Pixel coordinates: x is the column, y the row. Pixel centers sit on integers.
struct Point2D {
    double x = 0.0;
    double y = 0.0;

    friend bool operator==(const Point2D&, const Point2D&) = default;
};

struct Trajectory {
    std::string entity_id;
    std::vector<Point2D> points;

    std::size_t length() const noexcept { return points.size(); }
    friend bool operator==(const Trajectory&, const Trajectory&) = default;
};

/// Binary first-frame region of one entity, row-major.
struct EntityMask {
    std::string entity_id;
    int height = 0;
    int width = 0;
    std::vector<std::uint8_t> grid;

    EntityMask() = default;
    EntityMask(std::string id, int h, int w);

    std::uint8_t& at(int row, int col) { return grid[static_cast<std::size_t>(row) * width + col]; }
    std::uint8_t at(int row, int col) const { return grid[static_cast<std::size_t>(row) * width + col]; }
    std::size_t foreground_count() const;

    friend bool operator==(const EntityMask&, const EntityMask&) = default;
};

struct Incircle {
    Point2D center;
    double radius = 0.0;
};

using EntityEmbedding = std::vector<real>;

/// Per-frame entity representation maps, shape [L, H, W, C].
struct EntityRepSequence {
    Tensor maps;
};

/// Per-frame Gaussian heatmaps, shape [L, H, W, 1].
struct GaussianMapSequence {
    Tensor maps;
};

/// Largest inscribed circle of the mask under the Euclidean distance
/// transform, with everything outside the image treated as background.
/// Ties go to the smallest (row, col).
Incircle compute_incircle(const EntityMask& mask);

/// Squared Euclidean distance from every pixel to the nearest background
/// pixel (out-of-image counts as background). Zero on background pixels.
std::vector<std::int64_t> squared_distance_transform(const EntityMask& mask);

/// Moves a point onto the closed frame rectangle [0, W-1] x [0, H-1].
Point2D clamp_to_frame(Point2D p, int height, int width);

/// Standard deviation of the Gaussian bump for a given incircle radius.
constexpr double gaussian_sigma(double radius) { return radius / 3.0; }

/// Single-frame heatmap exp(-|p - c|^2 / (2 sigma^2)), sigma = radius / 3,
/// shape [H, W]. The center is clamped to the frame first.
Tensor rasterize_gaussian(Point2D center, double radius, int height, int width);

/// Writes `embedding` into every pixel within `radius` of the (clamped)
/// center. `canvas` has shape [H, W, C].
void insert_entity_embedding(Tensor& canvas, std::span<const real> embedding, Point2D center, double radius);

struct EntityCondition {
    EntityEmbedding embedding;
    Trajectory trajectory;
    double radius = 1.0;
};

/// Builds the entity-representation and Gaussian-map sequences for all
/// entities. Later entities overwrite earlier ones where disks overlap;
/// Gaussian maps combine by pixelwise maximum.
std::pair<EntityRepSequence, GaussianMapSequence> build_representation_sequences(
    std::span<const EntityCondition> entities, int frames, int height, int width, int channels);

/// Translates the trajectory so its first point lands on `anchor`.
Trajectory reanchor_trajectory(const Trajectory& trajectory, Point2D anchor);

}  // namespace draglab
