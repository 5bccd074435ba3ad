#include <draglab/synth.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>

namespace draglab {

Tensor VideoClip::frame(int i) const {
    const int h = height(), w = width();
    const std::size_t n = static_cast<std::size_t>(h) * w * 3;
    Tensor out({h, w, 3});
    std::copy_n(frames.data() + static_cast<std::size_t>(i) * n, n, out.data());
    return out;
}

Point2D Motion::at(int frame) const {
    Point2D p{start.x + velocity.x * frame, start.y + velocity.y * frame};
    if (kind == MotionKind::sinusoidal) {
        const double w = 2.0 * std::numbers::pi / period;
        const double s = std::sin(w * frame + phase) - std::sin(phase);
        p.x += amplitude.x * s;
        p.y += amplitude.y * s;
    }
    return p;
}

std::vector<EntityMask> SyntheticClip::first_frame_masks() const {
    std::vector<EntityMask> out;
    for (const auto& per_frame : frame_masks) out.push_back(per_frame.front());
    return out;
}

const std::vector<Color>& shape_palette() {
    static const std::vector<Color> palette{
        {0.92, 0.16, 0.16}, {0.15, 0.85, 0.22}, {0.20, 0.32, 0.96}, {0.96, 0.90, 0.15},
        {0.90, 0.20, 0.86}, {0.15, 0.86, 0.90}, {1.00, 0.56, 0.10}, {0.96, 0.96, 0.96},
    };
    return palette;
}

const std::vector<Color>& background_palette() {
    static const std::vector<Color> palette{{0.06, 0.06, 0.08}, {0.40, 0.40, 0.42}};
    return palette;
}

namespace {

double shape_extent(const ShapeSpec& s) { return s.kind == ShapeKind::disk ? s.size : s.size / 2.0; }

bool inside(const ShapeSpec& s, Point2D c, int x, int y) {
    const double dx = x - c.x, dy = y - c.y;
    if (s.kind == ShapeKind::disk) return dx * dx + dy * dy <= s.size * s.size;
    const double half = s.size / 2.0;
    return std::abs(dx) <= half && std::abs(dy) <= half;
}

bool fits(const ShapeSpec& s, Point2D c, int height, int width) {
    const double e = shape_extent(s);
    return c.x - e >= 0.0 && c.y - e >= 0.0 && c.x + e <= width - 1 && c.y + e <= height - 1;
}

void validate_shape(const ShapeSpec& s, std::size_t index, const SceneSpec& spec) {
    const std::string name = "shape " + std::to_string(index);
    if (!(s.size >= 2.0)) throw SpecError(name + ": size must be at least 2 px");
    if (s.motion.kind == MotionKind::sinusoidal && !(s.motion.period > 0.0)) {
        throw SpecError(name + ": sinusoidal period must be positive");
    }
    for (double c : s.color)
        if (!(c >= 0.0 && c <= 1.0)) throw SpecError(name + ": color channels must lie in [0, 1]");
    const double max_step = spec.height / 4.0;
    for (int i = 0; i < spec.frames; ++i) {
        const Point2D p = s.motion.at(i);
        if (!fits(s, p, spec.height, spec.width)) {
            throw SpecError(name + " is out of bounds at frame " + std::to_string(i));
        }
        if (i > 0) {
            const Point2D q = s.motion.at(i - 1);
            if (std::hypot(p.x - q.x, p.y - q.y) > max_step) {
                throw SpecError(name + " moves more than H/4 pixels between frames " + std::to_string(i - 1) +
                                " and " + std::to_string(i));
            }
        }
    }
}

}  // namespace

SyntheticClip generate_clip(const SceneSpec& spec) {
    if (spec.frames <= 0 || spec.height <= 0 || spec.width <= 0) throw SpecError("scene dimensions must be positive");
    for (std::size_t k = 0; k < spec.shapes.size(); ++k) validate_shape(spec.shapes[k], k, spec);

    const int L = spec.frames, H = spec.height, W = spec.width;
    SyntheticClip clip;
    clip.video.frames = Tensor({L, H, W, 3});

    Tensor background({H, W, 3});
    Rng rng(spec.seed);
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            const double jitter = spec.texture > 0.0 ? spec.texture * (rng.uniform() - 0.5) : 0.0;
            for (int c = 0; c < 3; ++c) {
                background[(static_cast<std::size_t>(y) * W + x) * 3 + c] =
                    static_cast<real>(std::clamp(spec.background[c] + jitter, 0.0, 1.0));
            }
        }

    clip.frame_masks.resize(spec.shapes.size());
    for (std::size_t k = 0; k < spec.shapes.size(); ++k) {
        Trajectory t;
        t.entity_id = std::to_string(k);
        for (int i = 0; i < L; ++i) t.points.push_back(spec.shapes[k].motion.at(i));
        clip.trajectories.push_back(std::move(t));
    }

    const std::size_t frame_size = static_cast<std::size_t>(H) * W * 3;
    for (int i = 0; i < L; ++i) {
        real* frame = clip.video.frames.data() + i * frame_size;
        std::copy_n(background.data(), frame_size, frame);
        for (std::size_t k = 0; k < spec.shapes.size(); ++k) {
            const auto& shape = spec.shapes[k];
            const Point2D c = clip.trajectories[k].points[static_cast<std::size_t>(i)];
            EntityMask mask(std::to_string(k), H, W);
            const double e = shape_extent(shape);
            const int y0 = std::max(0, static_cast<int>(std::floor(c.y - e)));
            const int y1 = std::min(H - 1, static_cast<int>(std::ceil(c.y + e)));
            const int x0 = std::max(0, static_cast<int>(std::floor(c.x - e)));
            const int x1 = std::min(W - 1, static_cast<int>(std::ceil(c.x + e)));
            for (int y = y0; y <= y1; ++y)
                for (int x = x0; x <= x1; ++x) {
                    if (!inside(shape, c, x, y)) continue;
                    mask.at(y, x) = 1;
                    real* px = frame + (static_cast<std::size_t>(y) * W + x) * 3;
                    for (int ch = 0; ch < 3; ++ch) px[ch] = static_cast<real>(shape.color[ch]);
                }
            clip.frame_masks[k].push_back(std::move(mask));
        }
    }
    return clip;
}

SceneSpec random_scene(const SceneSampler& sampler, std::uint64_t seed) {
    if (sampler.min_shapes < 0 || sampler.max_shapes < sampler.min_shapes) {
        throw ConfigError("invalid shape count range");
    }
    Rng rng(seed);
    SceneSpec spec;
    spec.frames = sampler.frames;
    spec.height = sampler.height;
    spec.width = sampler.width;
    spec.seed = seed;
    const auto& backgrounds = background_palette();
    spec.background = backgrounds[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(backgrounds.size()) - 1))];

    std::vector<Color> colors = shape_palette();
    const int count = static_cast<int>(rng.uniform_int(sampler.min_shapes, sampler.max_shapes));
    const double dim = std::min(sampler.height, sampler.width);

    int misses = 0;
    for (int attempt = 0; attempt < 50000 && static_cast<int>(spec.shapes.size()) < count; ++attempt) {
        if (misses > 300) {
            spec.shapes.clear();
            colors = shape_palette();
            misses = 0;
        }
        ShapeSpec s;
        s.kind = rng.uniform() < 0.5 ? ShapeKind::disk : ShapeKind::square;
        s.size = s.kind == ShapeKind::disk ? rng.uniform(dim / 10.0, dim / 6.5) : rng.uniform(dim / 5.0, dim / 3.2);
        s.size = std::max(s.size, 2.0);
        const double speed = rng.uniform(sampler.min_speed, sampler.max_speed);
        const double angle = rng.uniform(0.0, 2.0 * std::numbers::pi);
        s.motion.velocity = {speed * std::cos(angle), speed * std::sin(angle)};
        if (rng.uniform() < 0.5) {
            s.motion.kind = MotionKind::sinusoidal;
            const double amp = rng.uniform(1.0, dim / 10.0);
            // Oscillate perpendicular to the drift direction.
            s.motion.amplitude = {-std::sin(angle) * amp, std::cos(angle) * amp};
            s.motion.period = rng.uniform(4.0, 12.0);
            s.motion.phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
        }
        const double e = shape_extent(s);
        s.motion.start = {rng.uniform(e, sampler.width - 1 - e), rng.uniform(e, sampler.height - 1 - e)};

        bool ok = true;
        for (int i = 0; i < spec.frames && ok; ++i) {
            const Point2D p = s.motion.at(i);
            if (!fits(s, p, spec.height, spec.width)) ok = false;
            if (i > 0) {
                const Point2D q = s.motion.at(i - 1);
                if (std::hypot(p.x - q.x, p.y - q.y) > spec.height / 4.0) ok = false;
            }
            for (const auto& other : spec.shapes) {
                if (!ok) break;
                const Point2D o = other.motion.at(i);
                // Bounding-circle separation with a two pixel gap.
                const double reach = e * std::numbers::sqrt2 + shape_extent(other) * std::numbers::sqrt2 + 2.0;
                if (std::hypot(p.x - o.x, p.y - o.y) < reach) ok = false;
            }
        }
        if (!ok) {
            ++misses;
            continue;
        }
        misses = 0;
        const std::size_t pick = static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(colors.size()) - 1));
        s.color = colors[pick];
        colors.erase(colors.begin() + static_cast<std::ptrdiff_t>(pick));
        spec.shapes.push_back(s);
    }
    if (static_cast<int>(spec.shapes.size()) < count) {
        throw SpecError("could not place " + std::to_string(count) + " non-overlapping shapes");
    }
    return spec;
}

EntityMask translate_mask(const EntityMask& mask, int dx, int dy) {
    EntityMask out(mask.entity_id, mask.height, mask.width);
    for (int y = 0; y < mask.height; ++y)
        for (int x = 0; x < mask.width; ++x) {
            if (!mask.at(y, x)) continue;
            const int nx = x + dx, ny = y + dy;
            if (nx >= 0 && ny >= 0 && nx < mask.width && ny < mask.height) out.at(ny, nx) = 1;
        }
    return out;
}

TrainingSample make_training_sample(const VideoClip& clip, std::span<const EntityMask> first_frame_masks,
                                    std::span<const Trajectory> trajectories,
                                    std::span<const EntityEmbedding> embeddings,
                                    std::span<const std::vector<EntityMask>> frame_masks, int channels) {
    if (clip.frames.rank() != 4 || clip.frames.dim(3) != 3) throw ArgumentError("clip must have shape [L, H, W, 3]");
    const int L = clip.length(), H = clip.height(), W = clip.width();
    const std::size_t n = first_frame_masks.size();
    if (trajectories.size() != n || embeddings.size() != n) {
        throw ArgumentError("masks, trajectories and embeddings must have one entry per entity");
    }
    if (!frame_masks.empty() && frame_masks.size() != n) {
        throw ArgumentError("frame masks must have one entry per entity");
    }
    if (channels <= 0) channels = n > 0 ? static_cast<int>(embeddings[0].size()) : 1;

    TrainingSample sample;
    sample.clip = clip;
    sample.first_frame_masks.assign(first_frame_masks.begin(), first_frame_masks.end());
    std::vector<EntityCondition> conditions;
    for (std::size_t k = 0; k < n; ++k) {
        const auto& mask = first_frame_masks[k];
        if (mask.height != H || mask.width != W) throw ArgumentError("mask size does not match the clip");
        if (static_cast<int>(trajectories[k].length()) != L) {
            throw ArgumentError("trajectory " + std::to_string(k) + " length does not match the clip");
        }
        const Incircle circle = compute_incircle(mask);
        Trajectory anchored = reanchor_trajectory(trajectories[k], circle.center);
        sample.radii.push_back(circle.radius);
        sample.gt_trajectories.push_back(anchored);
        conditions.push_back(EntityCondition{embeddings[k], std::move(anchored), circle.radius});
    }
    auto [rep, gauss] = build_representation_sequences(conditions, L, H, W, channels);
    sample.entity_rep = std::move(rep);
    sample.gaussian_rep = std::move(gauss);

    sample.loss_mask = Tensor({L, H, W, 1});
    const std::size_t frame_px = static_cast<std::size_t>(H) * W;
    for (std::size_t k = 0; k < n; ++k) {
        for (int i = 0; i < L; ++i) {
            EntityMask region;
            if (!frame_masks.empty()) {
                region = frame_masks[k].at(static_cast<std::size_t>(i));
            } else {
                const auto& t = trajectories[k].points;
                region = translate_mask(first_frame_masks[k], static_cast<int>(std::lround(t[i].x - t[0].x)),
                                        static_cast<int>(std::lround(t[i].y - t[0].y)));
            }
            real* m = sample.loss_mask.data() + static_cast<std::size_t>(i) * frame_px;
            for (std::size_t p = 0; p < frame_px; ++p)
                if (region.grid[p]) m[p] = 1;
        }
    }
    return sample;
}

}  // namespace draglab
