#include <draglab/annotation.hpp>

#include <cmath>

namespace draglab {

using nlohmann::json;

std::vector<std::uint32_t> encode_rle(const EntityMask& mask) {
    std::vector<std::uint32_t> runs;
    std::uint8_t current = 0;
    std::uint32_t count = 0;
    for (std::uint8_t v : mask.grid) {
        const std::uint8_t bit = v ? 1 : 0;
        if (bit != current) {
            runs.push_back(count);
            current = bit;
            count = 0;
        }
        ++count;
    }
    runs.push_back(count);
    return runs;
}

EntityMask decode_rle(std::span<const std::uint32_t> runs, int height, int width, std::string entity_id) {
    EntityMask mask(std::move(entity_id), height, width);
    const std::size_t total = mask.grid.size();
    std::size_t pos = 0;
    std::uint8_t value = 0;
    for (std::uint32_t run : runs) {
        if (pos + run > total) {
            throw ArgumentError("run lengths exceed the " + std::to_string(height) + "x" + std::to_string(width) +
                                " grid");
        }
        std::fill_n(mask.grid.begin() + static_cast<std::ptrdiff_t>(pos), run, value);
        pos += run;
        value ^= 1;
    }
    if (pos != total) {
        throw ArgumentError("run lengths cover " + std::to_string(pos) + " pixels, expected " + std::to_string(total));
    }
    return mask;
}

namespace {

json trajectory_to_json(const Trajectory& t) {
    json pts = json::array();
    for (const auto& p : t.points) pts.push_back(json::array({p.x, p.y}));
    return pts;
}

int positive_int(const json& doc, const char* key) {
    if (!doc.contains(key)) throw ValidationError(key, "missing");
    const auto& v = doc.at(key);
    if (!v.is_number_integer() || v.get<long long>() <= 0 || v.get<long long>() > 1 << 20) {
        throw ValidationError(key, "must be a positive integer");
    }
    return v.get<int>();
}

EntityMask mask_from_json(const json& runs_doc, const std::string& field, int height, int width,
                          const std::string& id) {
    if (!runs_doc.is_array()) throw ValidationError(field, "must be an array of run lengths");
    std::vector<std::uint32_t> runs;
    runs.reserve(runs_doc.size());
    for (const auto& r : runs_doc) {
        if (!r.is_number_integer() || r.get<long long>() < 0 ||
            r.get<long long>() > static_cast<long long>(height) * width) {
            throw ValidationError(field, "run lengths must be non-negative integers");
        }
        runs.push_back(r.get<std::uint32_t>());
    }
    try {
        return decode_rle(runs, height, width, id);
    } catch (const ArgumentError& e) {
        throw ValidationError(field, e.what());
    }
}

}  // namespace

json annotation_to_json(const Annotation& a) {
    json entities = json::array();
    for (const auto& e : a.entities) {
        json ent = {{"id", e.id}, {"mask_rle", encode_rle(e.mask)}, {"trajectory", trajectory_to_json(e.trajectory)}};
        if (!e.frame_masks.empty()) {
            json frames = json::array();
            for (const auto& m : e.frame_masks) frames.push_back(encode_rle(m));
            ent["frame_masks_rle"] = std::move(frames);
        }
        entities.push_back(std::move(ent));
    }
    return json{{"width", a.width}, {"height", a.height}, {"frames", a.frames}, {"entities", std::move(entities)}};
}

Annotation annotation_from_json(const json& doc) {
    if (!doc.is_object()) throw ValidationError("$", "annotation must be a JSON object");
    Annotation a;
    a.width = positive_int(doc, "width");
    a.height = positive_int(doc, "height");
    a.frames = positive_int(doc, "frames");
    if (!doc.contains("entities") || !doc.at("entities").is_array()) {
        throw ValidationError("entities", "must be an array");
    }
    const auto& entities = doc.at("entities");
    for (std::size_t k = 0; k < entities.size(); ++k) {
        const std::string base = "entities[" + std::to_string(k) + "]";
        const auto& ent = entities[k];
        if (!ent.is_object()) throw ValidationError(base, "must be an object");
        AnnotatedEntity e;
        if (!ent.contains("id")) throw ValidationError(base + ".id", "missing");
        const auto& id = ent.at("id");
        if (id.is_string()) {
            e.id = id.get<std::string>();
        } else if (id.is_number_integer()) {
            e.id = id.dump();
        } else {
            throw ValidationError(base + ".id", "must be a string or integer");
        }
        for (const auto& other : a.entities) {
            if (other.id == e.id) throw ValidationError(base + ".id", "duplicate entity id '" + e.id + "'");
        }
        if (!ent.contains("mask_rle")) throw ValidationError(base + ".mask_rle", "missing");
        e.mask = mask_from_json(ent.at("mask_rle"), base + ".mask_rle", a.height, a.width, e.id);
        if (e.mask.foreground_count() == 0) {
            throw ValidationError(base + ".mask_rle", "entity mask has no foreground pixels");
        }
        if (!ent.contains("trajectory") || !ent.at("trajectory").is_array()) {
            throw ValidationError(base + ".trajectory", "must be an array of [x, y] points");
        }
        const auto& traj = ent.at("trajectory");
        if (static_cast<int>(traj.size()) != a.frames) {
            throw ValidationError(base + ".trajectory", "has " + std::to_string(traj.size()) +
                                                            " points, expected frames = " + std::to_string(a.frames));
        }
        e.trajectory.entity_id = e.id;
        for (std::size_t i = 0; i < traj.size(); ++i) {
            const auto& p = traj[i];
            if (!p.is_array() || p.size() != 2 || !p[0].is_number() || !p[1].is_number()) {
                throw ValidationError(base + ".trajectory[" + std::to_string(i) + "]", "must be [x, y]");
            }
            const Point2D pt{p[0].get<double>(), p[1].get<double>()};
            if (!std::isfinite(pt.x) || !std::isfinite(pt.y)) {
                throw ValidationError(base + ".trajectory[" + std::to_string(i) + "]", "must be finite");
            }
            e.trajectory.points.push_back(pt);
        }
        if (ent.contains("frame_masks_rle")) {
            const auto& fm = ent.at("frame_masks_rle");
            if (!fm.is_array() || static_cast<int>(fm.size()) != a.frames) {
                throw ValidationError(base + ".frame_masks_rle", "must hold one RLE mask per frame");
            }
            for (std::size_t i = 0; i < fm.size(); ++i) {
                e.frame_masks.push_back(mask_from_json(fm[i], base + ".frame_masks_rle[" + std::to_string(i) + "]",
                                                       a.height, a.width, e.id));
            }
        }
        a.entities.push_back(std::move(e));
    }
    return a;
}

json parse_json(std::string_view text) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("malformed JSON: ") + e.what(), e.byte);
    }
}

Annotation parse_annotation(std::string_view text) { return annotation_from_json(parse_json(text)); }

}  // namespace draglab
