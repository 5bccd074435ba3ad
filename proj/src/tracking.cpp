#include <draglab/tracking.hpp>

#include <cmath>
#include <map>

namespace draglab {

Trajectory track_centroid(const VideoClip& video, const EntityMask& reference, double tolerance,
                          const Tensor* reference_frame) {
    const int L = video.length(), H = video.height(), W = video.width();
    if (reference.height != H || reference.width != W) {
        throw ArgumentError("track_centroid: reference mask does not match the video size");
    }
    const std::size_t count = reference.foreground_count();
    if (count == 0) throw InvalidEntityError("entity '" + reference.entity_id + "' has an empty mask");
    const Tensor first = reference_frame ? *reference_frame : video.frame(0);
    if (first.shape() != Shape{H, W, 3}) throw ArgumentError("track_centroid: reference frame has the wrong shape");

    double color[3] = {0, 0, 0};
    double mx = 0, my = 0;
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            if (!reference.at(y, x)) continue;
            for (int c = 0; c < 3; ++c) color[c] += first[(static_cast<std::size_t>(y) * W + x) * 3 + c];
            mx += x;
            my += y;
        }
    for (double& c : color) c /= static_cast<double>(count);
    Point2D previous{mx / static_cast<double>(count), my / static_cast<double>(count)};

    const double tol2 = tolerance * tolerance;
    Trajectory out;
    out.entity_id = reference.entity_id;
    for (int i = 0; i < L; ++i) {
        const real* f = video.frames.data() + static_cast<std::size_t>(i) * H * W * 3;
        double sx = 0, sy = 0;
        std::size_t n = 0;
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x) {
                const real* p = f + (static_cast<std::size_t>(y) * W + x) * 3;
                double d2 = 0;
                for (int c = 0; c < 3; ++c) d2 += (p[c] - color[c]) * (p[c] - color[c]);
                if (d2 <= tol2) {
                    sx += x;
                    sy += y;
                    ++n;
                }
            }
        if (n > 0) previous = {sx / static_cast<double>(n), sy / static_cast<double>(n)};
        out.points.push_back(previous);
    }
    return out;
}

EvalReport objmc(std::span<const Trajectory> pred, std::span<const Trajectory> gt) {
    if (pred.size() != gt.size()) {
        throw ArgumentError("objmc: " + std::to_string(pred.size()) + " predicted vs " + std::to_string(gt.size()) +
                            " ground-truth trajectories");
    }
    std::map<std::string, const Trajectory*> by_id;
    for (const auto& p : pred) {
        if (!by_id.emplace(p.entity_id, &p).second) throw ArgumentError("objmc: duplicate id '" + p.entity_id + "'");
    }
    EvalReport report;
    double total = 0.0;
    for (const auto& g : gt) {
        auto it = by_id.find(g.entity_id);
        if (it == by_id.end()) throw ArgumentError("objmc: no prediction for entity '" + g.entity_id + "'");
        const Trajectory& p = *it->second;
        if (p.length() != g.length() || g.length() == 0) {
            throw ArgumentError("objmc: entity '" + g.entity_id + "' has mismatched or empty trajectories");
        }
        EntityScore s;
        s.entity_id = g.entity_id;
        double sum = 0.0;
        for (std::size_t i = 0; i < g.length(); ++i) {
            const double e = std::hypot(p.points[i].x - g.points[i].x, p.points[i].y - g.points[i].y);
            s.frame_errors.push_back(e);
            sum += e;
        }
        s.objmc = sum / static_cast<double>(g.length());
        total += s.objmc;
        report.entities.push_back(std::move(s));
    }
    report.mean_objmc = report.entities.empty() ? 0.0 : total / static_cast<double>(report.entities.size());
    return report;
}

nlohmann::json to_json(const EvalReport& report) {
    nlohmann::json entities = nlohmann::json::array();
    for (const auto& e : report.entities) {
        entities.push_back({{"id", e.entity_id}, {"objmc", e.objmc}, {"frame_errors", e.frame_errors}});
    }
    return {{"entities", entities}, {"mean_objmc", report.mean_objmc}, {"config", report.config}};
}

}  // namespace draglab
