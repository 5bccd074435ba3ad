#include <draglab/features.hpp>
#include <draglab/image_io.hpp>
#include <draglab/sampling.hpp>

#include <algorithm>
#include <cmath>

namespace draglab {

GuidanceFlags guidance_flags(const Checkpoint& checkpoint) {
    GuidanceFlags f;
    const auto& t = checkpoint.train_config;
    if (t.is_object()) {
        f.use_entity = t.value("use_entity", true);
        f.use_gaussian = t.value("use_gaussian", true);
    }
    return f;
}

std::vector<int> sampling_timesteps(int total, int steps) {
    if (total < 1) throw ArgumentError("sampling_timesteps: schedule is empty");
    if (steps <= 0 || steps > total) steps = total;
    std::vector<int> out;
    for (int k = 0; k < steps; ++k) {
        const double frac = steps == 1 ? 0.0 : static_cast<double>(k) / (steps - 1);
        out.push_back(total - static_cast<int>(std::lround(frac * (total - 1))));
    }
    return out;
}

GenerationResult sample_video(const DragModel& model, const GenerationRequest& request, const GuidanceFlags& flags) {
    const auto& mc = model.config();
    const int L = mc.frames, H = mc.height, W = mc.width;
    if (request.first_frame.shape() != Shape{H, W, 3}) {
        throw ArgumentError("first frame must be [" + std::to_string(H) + ", " + std::to_string(W) + ", 3], got " +
                            shape_string(request.first_frame.shape()));
    }
    std::vector<EntityMask> masks;
    for (const auto& e : request.entities) {
        if (e.mask.height != H || e.mask.width != W) {
            throw ArgumentError("mask of entity '" + e.mask.entity_id + "' does not match the frame size");
        }
        if (e.trajectory.length() != static_cast<std::size_t>(L)) {
            throw ArgumentError("trajectory of entity '" + e.trajectory.entity_id + "' has " +
                                std::to_string(e.trajectory.length()) + " points, expected " + std::to_string(L));
        }
        masks.push_back(e.mask);
    }
    const auto embeddings = extract_entity_features(request.first_frame, masks, model.feature_extractor(),
                                                    mc.t_star(), model.schedule(), mc.feature.seed);
    GenerationResult result;
    std::vector<EntityCondition> conditions;
    for (std::size_t k = 0; k < request.entities.size(); ++k) {
        const Incircle c = compute_incircle(request.entities[k].mask);
        EntityCondition cond;
        cond.embedding = embeddings[k];
        cond.trajectory = reanchor_trajectory(request.entities[k].trajectory, c.center);
        cond.radius = c.radius;
        result.trajectories.push_back(cond.trajectory);
        result.radii.push_back(c.radius);
        conditions.push_back(std::move(cond));
    }
    const auto [entity_rep, gaussian_rep] = build_representation_sequences(conditions, L, H, W, mc.entity_channels());

    Tensor first = pixels_to_latent(request.first_frame);
    first.reshape({1, H, W, 3});
    const NoiseSchedule& s = model.schedule();
    Rng rng(request.seed);
    Tensor x = standard_normal({L, H, W, 3}, rng);
    const std::vector<int> ts = sampling_timesteps(s.steps, request.steps);
    for (std::size_t k = 0; k < ts.size(); ++k) {
        const int t = ts[k];
        const int t_prev = k + 1 < ts.size() ? ts[k + 1] : 0;
        ModelInputs in;
        in.x_t = &x;
        in.first_frames = &first;
        in.entity_rep = &entity_rep.maps;
        in.gaussian_rep = &gaussian_rep.maps;
        in.timesteps = {t};
        in.use_entity = flags.use_entity;
        in.use_gaussian = flags.use_gaussian;
        const Tensor eps = model.predict_noise(in);

        const double ab = s.alpha_bar(t), ab_prev = s.alpha_bar(t_prev);
        const double beta = 1.0 - ab / ab_prev;
        const double c0 = std::sqrt(ab_prev) * beta / (1.0 - ab);
        const double ct = std::sqrt(1.0 - beta) * (1.0 - ab_prev) / (1.0 - ab);
        const double sigma = t_prev > 0 ? std::sqrt(beta * (1.0 - ab_prev) / (1.0 - ab)) : 0.0;
        Tensor z = t_prev > 0 ? standard_normal(x.shape(), rng) : Tensor(x.shape());
        for (std::size_t i = 0; i < x.size(); ++i) {
            double x0 = (x[i] - std::sqrt(1.0 - ab) * eps[i]) / std::sqrt(ab);
            x0 = std::clamp(x0, -1.0, 1.0);
            x[i] = static_cast<real>(c0 * x0 + ct * x[i] + sigma * z[i]);
        }
    }
    result.video.frames = latent_to_pixels(x);
    for (real& v : result.video.frames.values()) v = std::clamp(v, real(0), real(1));
    return result;
}

GenerationRequest request_from_annotation(const Annotation& annotation, Tensor first_frame) {
    GenerationRequest r;
    r.first_frame = std::move(first_frame);
    for (const auto& e : annotation.entities) r.entities.push_back({e.mask, e.trajectory});
    return r;
}

GenerationRequest request_from_json(const nlohmann::json& doc, const std::filesystem::path& base_dir) {
    const Annotation a = annotation_from_json(doc);
    Tensor first;
    if (doc.contains("first_frame")) {
        if (!doc["first_frame"].is_string()) throw ValidationError("first_frame", "expected a PNG path");
        std::filesystem::path p = doc["first_frame"].get<std::string>();
        if (p.is_relative()) p = base_dir / p;
        first = read_png(p);
        if (first.dim(0) != a.height || first.dim(1) != a.width) first = resize_image(first, a.height, a.width);
    } else {
        first = Tensor({a.height, a.width, 3});
    }
    GenerationRequest r = request_from_annotation(a, std::move(first));
    if (doc.contains("steps")) {
        if (!doc["steps"].is_number_integer() || doc["steps"].get<int>() < 0) {
            throw ValidationError("steps", "expected a non-negative integer");
        }
        r.steps = doc["steps"].get<int>();
    }
    if (doc.contains("seed")) {
        if (!doc["seed"].is_number_unsigned() && !doc["seed"].is_number_integer()) {
            throw ValidationError("seed", "expected an integer");
        }
        r.seed = doc["seed"].get<std::uint64_t>();
    }
    return r;
}

}  // namespace draglab
