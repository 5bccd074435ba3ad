#pragma once

#include <draglab/repr.hpp>

#include <nlohmann/json.hpp>

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace draglab {

/// Schema violation in an annotation document. `field` is a JSON path such as
/// "entities[1].trajectory".
class ValidationError : public ArgumentError {
public:
    ValidationError(std::string field, const std::string& what)
        : ArgumentError(field + ": " + what), field_(std::move(field)) {}
    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

/// Row-major run lengths of a binary grid, alternating runs of 0 and 1 and
/// always starting with the count of zeros (possibly 0).
std::vector<std::uint32_t> encode_rle(const EntityMask& mask);
EntityMask decode_rle(std::span<const std::uint32_t> runs, int height, int width, std::string entity_id = {});

struct AnnotatedEntity {
    std::string id;
    EntityMask mask;
    Trajectory trajectory;
    /// Optional per-frame analytic regions; empty when not provided.
    std::vector<EntityMask> frame_masks;

    friend bool operator==(const AnnotatedEntity&, const AnnotatedEntity&) = default;
};

/// The interchange document shared by the corpus, the CLI and the HTTP API:
/// {"width", "height", "frames", "entities": [{"id", "mask_rle", "trajectory"}]}.
struct Annotation {
    int width = 0;
    int height = 0;
    int frames = 0;
    std::vector<AnnotatedEntity> entities;

    friend bool operator==(const Annotation&, const Annotation&) = default;
};

nlohmann::json annotation_to_json(const Annotation& annotation);
/// Validates and converts. Throws ValidationError naming the offending field.
Annotation annotation_from_json(const nlohmann::json& doc);
/// Parses text; malformed JSON raises ParseError carrying the byte offset.
Annotation parse_annotation(std::string_view text);
nlohmann::json parse_json(std::string_view text);

}  // namespace draglab
