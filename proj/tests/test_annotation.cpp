#include "oracles.hpp"

#include <draglab/annotation.hpp>

#include <doctest.h>

using namespace draglab;
using nlohmann::json;

namespace {

json sample_doc() {
    return json::parse(R"({
        "width": 4, "height": 3, "frames": 2,
        "entities": [
            {"id": "cat", "mask_rle": [5, 2, 5], "trajectory": [[1.5, 1.0], [2.25, 1.0]]},
            {"id": 7, "mask_rle": [0, 1, 11], "trajectory": [[0, 0], [0.1, 0.2]]}
        ]})");
}

}  // namespace

TEST_CASE("rle starts with zeros and round-trips") {
    EntityMask m("a", 2, 3);
    m.grid = {1, 1, 0, 0, 0, 1};
    const auto runs = encode_rle(m);
    CHECK(runs == std::vector<std::uint32_t>{0, 2, 3, 1});
    CHECK(decode_rle(runs, 2, 3, "a") == m);
    Rng rng(2);
    for (int i = 0; i < 50; ++i) {
        EntityMask r = oracle::random_mask(rng, 9, 13);
        r.entity_id = "x";
        CHECK(decode_rle(encode_rle(r), 9, 13, "x") == r);
    }
}

TEST_CASE("rle coverage errors") {
    const std::vector<std::uint32_t> short_runs{3, 2};
    CHECK_THROWS_AS(decode_rle(short_runs, 2, 3), ArgumentError);
    const std::vector<std::uint32_t> long_runs{3, 4};
    CHECK_THROWS_AS(decode_rle(long_runs, 2, 3), ArgumentError);
}

TEST_CASE("annotation parses and round-trips") {
    const Annotation a = annotation_from_json(sample_doc());
    REQUIRE(a.entities.size() == 2);
    CHECK(a.entities[0].id == "cat");
    CHECK(a.entities[1].id == "7");
    CHECK(a.entities[0].mask.foreground_count() == 2);
    CHECK(a.entities[0].mask.at(1, 1) == 1);
    CHECK(a.entities[0].trajectory.points[1] == Point2D{2.25, 1.0});
    CHECK(annotation_from_json(annotation_to_json(a)) == a);
}

TEST_CASE("annotation validation names the field") {
    auto expect_field = [](const json& doc, const std::string& field) {
        try {
            annotation_from_json(doc);
            FAIL("expected a validation error for " << field);
        } catch (const ValidationError& e) {
            CHECK(e.field() == field);
        }
    };
    json d = sample_doc();
    d["entities"][1]["trajectory"] = json::array({json::array({0, 0})});
    expect_field(d, "entities[1].trajectory");
    d = sample_doc();
    d["entities"][0]["mask_rle"] = json::array({12});
    expect_field(d, "entities[0].mask_rle");
    d = sample_doc();
    d["entities"][1]["id"] = "cat";
    expect_field(d, "entities[1].id");
    d = sample_doc();
    d.erase("frames");
    expect_field(d, "frames");
    d = sample_doc();
    d["entities"][0]["trajectory"][1] = json::array({1});
    expect_field(d, "entities[0].trajectory[1]");
}

TEST_CASE("malformed annotation JSON reports a byte offset") {
    try {
        parse_annotation(R"({"width": 4, "height": )");
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(e.offset() > 10);
    }
}
