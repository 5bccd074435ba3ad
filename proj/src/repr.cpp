#include <draglab/repr.hpp>

#include <algorithm>
#include <cmath>
#include <limits>

namespace draglab {

EntityMask::EntityMask(std::string id, int h, int w)
    : entity_id(std::move(id)), height(h), width(w), grid(static_cast<std::size_t>(h) * w, 0) {
    if (h <= 0 || w <= 0) throw ArgumentError("mask dimensions must be positive");
}

std::size_t EntityMask::foreground_count() const {
    return static_cast<std::size_t>(std::count_if(grid.begin(), grid.end(), [](std::uint8_t v) { return v != 0; }));
}

namespace {

// 1D squared distance transform of sampled function f: the lower envelope
// of parabolas (Felzenszwalb and Huttenlocher). All f values are finite.
void edt_1d(const std::vector<std::int64_t>& f, std::vector<std::int64_t>& out, std::vector<int>& v,
            std::vector<double>& z) {
    const int n = static_cast<int>(f.size());
    v.assign(n, 0);
    z.assign(n + 1, 0.0);
    const auto intersect = [&](int q, int p) {
        return (static_cast<double>(f[q] + static_cast<std::int64_t>(q) * q) -
                static_cast<double>(f[p] + static_cast<std::int64_t>(p) * p)) /
               (2.0 * (q - p));
    };
    int k = 0;
    z[0] = -std::numeric_limits<double>::infinity();
    z[1] = std::numeric_limits<double>::infinity();
    for (int q = 1; q < n; ++q) {
        double s = intersect(q, v[k]);
        while (s <= z[k]) {
            --k;
            s = intersect(q, v[k]);
        }
        ++k;
        v[k] = q;
        z[k] = s;
        z[k + 1] = std::numeric_limits<double>::infinity();
    }
    out.resize(n);
    k = 0;
    for (int q = 0; q < n; ++q) {
        while (z[k + 1] < q) ++k;
        const std::int64_t d = q - v[k];
        out[q] = d * d + f[v[k]];
    }
}

}  // namespace

std::vector<std::int64_t> squared_distance_transform(const EntityMask& mask) {
    const int h = mask.height + 2;
    const int w = mask.width + 2;
    // Exceeds any squared distance inside the padded grid.
    const std::int64_t far = static_cast<std::int64_t>(h + w) * (h + w) + 1;
    std::vector<std::int64_t> grid(static_cast<std::size_t>(h) * w, 0);
    for (int r = 0; r < mask.height; ++r)
        for (int c = 0; c < mask.width; ++c)
            if (mask.at(r, c)) grid[static_cast<std::size_t>(r + 1) * w + c + 1] = far;

    std::vector<std::int64_t> f, out;
    std::vector<int> v;
    std::vector<double> z;
    f.resize(h);
    for (int c = 0; c < w; ++c) {
        for (int r = 0; r < h; ++r) f[r] = grid[static_cast<std::size_t>(r) * w + c];
        edt_1d(f, out, v, z);
        for (int r = 0; r < h; ++r) grid[static_cast<std::size_t>(r) * w + c] = out[r];
    }
    f.resize(w);
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) f[c] = grid[static_cast<std::size_t>(r) * w + c];
        edt_1d(f, out, v, z);
        for (int c = 0; c < w; ++c) grid[static_cast<std::size_t>(r) * w + c] = out[c];
    }

    std::vector<std::int64_t> result(static_cast<std::size_t>(mask.height) * mask.width);
    for (int r = 0; r < mask.height; ++r)
        for (int c = 0; c < mask.width; ++c)
            result[static_cast<std::size_t>(r) * mask.width + c] = grid[static_cast<std::size_t>(r + 1) * w + c + 1];
    return result;
}

Incircle compute_incircle(const EntityMask& mask) {
    if (mask.grid.size() != static_cast<std::size_t>(mask.height) * mask.width) {
        throw ArgumentError("mask grid size does not match its dimensions");
    }
    if (mask.foreground_count() == 0) {
        throw InvalidEntityError("entity '" + mask.entity_id + "' has an empty mask");
    }
    const auto dist = squared_distance_transform(mask);
    std::int64_t best = -1;
    int best_row = 0, best_col = 0;
    for (int r = 0; r < mask.height; ++r) {
        for (int c = 0; c < mask.width; ++c) {
            if (!mask.at(r, c)) continue;
            const auto d = dist[static_cast<std::size_t>(r) * mask.width + c];
            if (d > best) {
                best = d;
                best_row = r;
                best_col = c;
            }
        }
    }
    return Incircle{Point2D{static_cast<double>(best_col), static_cast<double>(best_row)},
                    std::sqrt(static_cast<double>(best))};
}

Point2D clamp_to_frame(Point2D p, int height, int width) {
    return Point2D{std::clamp(p.x, 0.0, static_cast<double>(width - 1)),
                   std::clamp(p.y, 0.0, static_cast<double>(height - 1))};
}

Tensor rasterize_gaussian(Point2D center, double radius, int height, int width) {
    if (!(radius > 0.0) || !std::isfinite(radius)) throw ArgumentError("gaussian radius must be positive");
    if (height <= 0 || width <= 0) throw ArgumentError("gaussian frame size must be positive");
    if (!std::isfinite(center.x) || !std::isfinite(center.y)) throw ArgumentError("gaussian center must be finite");
    const Point2D c = clamp_to_frame(center, height, width);
    const double sigma = gaussian_sigma(radius);
    const double inv = 1.0 / (2.0 * sigma * sigma);
    Tensor map({height, width});
    for (int y = 0; y < height; ++y) {
        const double dy = y - c.y;
        for (int x = 0; x < width; ++x) {
            const double dx = x - c.x;
            map[static_cast<std::size_t>(y) * width + x] = static_cast<real>(std::exp(-(dx * dx + dy * dy) * inv));
        }
    }
    return map;
}

void insert_entity_embedding(Tensor& canvas, std::span<const real> embedding, Point2D center, double radius) {
    if (canvas.rank() != 3) throw ArgumentError("entity canvas must have shape [H, W, C]");
    const int height = canvas.dim(0), width = canvas.dim(1), channels = canvas.dim(2);
    if (static_cast<int>(embedding.size()) != channels) {
        throw ArgumentError("embedding has " + std::to_string(embedding.size()) + " channels, canvas has " +
                            std::to_string(channels));
    }
    if (!(radius > 0.0)) throw ArgumentError("embedding radius must be positive");
    const Point2D c = clamp_to_frame(center, height, width);
    const double r2 = radius * radius;
    const int y0 = std::max(0, static_cast<int>(std::floor(c.y - radius)));
    const int y1 = std::min(height - 1, static_cast<int>(std::ceil(c.y + radius)));
    const int x0 = std::max(0, static_cast<int>(std::floor(c.x - radius)));
    const int x1 = std::min(width - 1, static_cast<int>(std::ceil(c.x + radius)));
    for (int y = y0; y <= y1; ++y) {
        for (int x = x0; x <= x1; ++x) {
            const double dx = x - c.x, dy = y - c.y;
            if (dx * dx + dy * dy > r2) continue;
            real* px = canvas.data() + (static_cast<std::size_t>(y) * width + x) * channels;
            std::copy(embedding.begin(), embedding.end(), px);
        }
    }
}

std::pair<EntityRepSequence, GaussianMapSequence> build_representation_sequences(
    std::span<const EntityCondition> entities, int frames, int height, int width, int channels) {
    if (frames <= 0 || height <= 0 || width <= 0 || channels <= 0) {
        throw ArgumentError("representation sequence dimensions must be positive");
    }
    for (const auto& e : entities) {
        if (static_cast<int>(e.trajectory.length()) != frames) {
            throw ArgumentError("trajectory of entity '" + e.trajectory.entity_id + "' has length " +
                                std::to_string(e.trajectory.length()) + ", expected " + std::to_string(frames));
        }
        if (static_cast<int>(e.embedding.size()) != channels) {
            throw ArgumentError("embedding of entity '" + e.trajectory.entity_id + "' has wrong channel count");
        }
    }
    EntityRepSequence rep{Tensor({frames, height, width, channels})};
    GaussianMapSequence gauss{Tensor({frames, height, width, 1})};
    const std::size_t frame_rep = static_cast<std::size_t>(height) * width * channels;
    const std::size_t frame_px = static_cast<std::size_t>(height) * width;
    Tensor canvas({height, width, channels});
    for (int i = 0; i < frames; ++i) {
        canvas.fill(0);
        real* g = gauss.maps.data() + i * frame_px;
        for (const auto& e : entities) {
            const Point2D p = e.trajectory.points[static_cast<std::size_t>(i)];
            insert_entity_embedding(canvas, e.embedding, p, e.radius);
            const Tensor bump = rasterize_gaussian(p, e.radius, height, width);
            for (std::size_t k = 0; k < frame_px; ++k) g[k] = std::max(g[k], bump[k]);
        }
        std::copy(canvas.data(), canvas.data() + frame_rep, rep.maps.data() + i * frame_rep);
    }
    return {std::move(rep), std::move(gauss)};
}

Trajectory reanchor_trajectory(const Trajectory& trajectory, Point2D anchor) {
    Trajectory out = trajectory;
    if (out.points.empty()) return out;
    const double dx = anchor.x - trajectory.points.front().x;
    const double dy = anchor.y - trajectory.points.front().y;
    for (auto& p : out.points) {
        p.x += dx;
        p.y += dy;
    }
    out.points.front() = anchor;
    return out;
}

}  // namespace draglab
