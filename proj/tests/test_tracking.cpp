#include <draglab/tracking.hpp>

#include <doctest.h>

#include <cmath>

using namespace draglab;

namespace {

Trajectory line(const std::string& id, int n, double x0, double y0, double dx, double dy) {
    Trajectory t{id, {}};
    for (int i = 0; i < n; ++i) t.points.push_back({x0 + dx * i, y0 + dy * i});
    return t;
}

Trajectory shifted(Trajectory t, double a, double b) {
    for (auto& p : t.points) {
        p.x += a;
        p.y += b;
    }
    return t;
}

}  // namespace

TEST_CASE("tracker follows analytic motion on oracle clips") {
    SceneSampler s;
    s.max_shapes = 3;
    double worst = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const SyntheticClip clip = generate_clip(random_scene(s, seed));
        const auto masks = clip.first_frame_masks();
        for (std::size_t k = 0; k < masks.size(); ++k) {
            const Trajectory t = track_centroid(clip.video, masks[k]);
            REQUIRE(t.length() == clip.trajectories[k].length());
            for (std::size_t i = 0; i < t.length(); ++i)
                worst = std::max(worst, std::hypot(t.points[i].x - clip.trajectories[k].points[i].x,
                                                   t.points[i].y - clip.trajectories[k].points[i].y));
        }
    }
    CHECK(worst <= 1.0);
}

TEST_CASE("static clip gives a constant trajectory") {
    SceneSpec spec;
    ShapeSpec sh;
    sh.kind = ShapeKind::square;
    sh.size = 6;
    sh.motion.start = {12, 14};
    spec.shapes.push_back(sh);
    const SyntheticClip clip = generate_clip(spec);
    const Trajectory t = track_centroid(clip.video, clip.first_frame_masks()[0]);
    for (const auto& p : t.points) CHECK(p == t.points[0]);
}

TEST_CASE("absent entity carries the previous point forward") {
    Tensor frames({3, 8, 8, 3});
    for (int y = 2; y < 4; ++y)
        for (int x = 2; x < 4; ++x)
            for (int c = 0; c < 3; ++c) frames.at(0, y, x, c) = c == 0 ? 1 : 0;
    EntityMask m("r", 8, 8);
    for (int y = 2; y < 4; ++y)
        for (int x = 2; x < 4; ++x) m.at(y, x) = 1;
    const Trajectory t = track_centroid(VideoClip{frames}, m);
    for (const auto& p : t.points) CHECK(p == Point2D{2.5, 2.5});
}

TEST_CASE("reference frame overrides the video's first frame") {
    Tensor frames({2, 8, 8, 3});
    frames.at(1, 5, 6, 1) = 1;
    Tensor ref({8, 8, 3});
    ref[(1 * 8 + 1) * 3 + 1] = 1;
    EntityMask m("g", 8, 8);
    m.at(1, 1) = 1;
    const Trajectory t = track_centroid(VideoClip{frames}, m, kDefaultColorTolerance, &ref);
    CHECK(t.points[0] == Point2D{1, 1});
    CHECK(t.points[1] == Point2D{6, 5});
}

TEST_CASE("tracker errors") {
    const VideoClip v{Tensor({2, 8, 8, 3})};
    CHECK_THROWS_AS(track_centroid(v, EntityMask("e", 8, 8)), InvalidEntityError);
    CHECK_THROWS_AS(track_centroid(v, EntityMask("e", 4, 8)), ArgumentError);
}

TEST_CASE("objmc examples") {
    const Trajectory a = line("a", 8, 3, 4, 1.5, -0.5);
    const Trajectory gt[] = {a};
    const Trajectory same[] = {a};
    CHECK(objmc(same, gt).mean_objmc == 0.0);
    const Trajectory off[] = {shifted(a, 3, 4)};
    const EvalReport r = objmc(off, gt);
    CHECK(r.mean_objmc == 5.0);
    REQUIRE(r.entities.size() == 1);
    for (double e : r.entities[0].frame_errors) CHECK(e == 5.0);

    const Trajectory b = line("b", 8, 10, 10, 0, 1);
    const Trajectory gt2[] = {a, b};
    const Trajectory pred2[] = {shifted(b, 0, 4), shifted(a, 2, 0)};
    const EvalReport r2 = objmc(pred2, gt2);
    CHECK(r2.entities[0].entity_id == "a");
    CHECK(r2.entities[0].objmc == 2.0);
    CHECK(r2.entities[1].objmc == 4.0);
    CHECK(r2.mean_objmc == 3.0);
    CHECK(objmc(std::span<const Trajectory>{}, std::span<const Trajectory>{}).mean_objmc == 0.0);

    const nlohmann::json j = to_json(r2);
    CHECK(j["mean_objmc"] == 3.0);
    CHECK(j["entities"].size() == 2);
}

TEST_CASE("objmc is translation consistent") {
    Rng rng(9);
    for (int trial = 0; trial < 100; ++trial) {
        Trajectory g{"e", {}}, p{"e", {}};
        for (int i = 0; i < 8; ++i) {
            g.points.push_back({rng.uniform(0, 32), rng.uniform(0, 32)});
            p.points.push_back({rng.uniform(0, 32), rng.uniform(0, 32)});
        }
        const double a = rng.uniform(-10, 10), b = rng.uniform(-10, 10);
        const Trajectory gs[] = {g}, ps[] = {p}, gt_t[] = {shifted(g, a, b)}, p_t[] = {shifted(p, a, b)};
        CHECK(objmc(p_t, gt_t).mean_objmc == doctest::Approx(objmc(ps, gs).mean_objmc).epsilon(1e-12));
        const Trajectory g_only[] = {shifted(g, a, b)};
        CHECK(objmc(g_only, gs).mean_objmc == doctest::Approx(std::sqrt(a * a + b * b)).epsilon(1e-12));
    }
}

TEST_CASE("objmc rejects mismatched inputs") {
    const Trajectory a = line("a", 4, 0, 0, 1, 1);
    const Trajectory gt[] = {a};
    const Trajectory wrong_id[] = {line("b", 4, 0, 0, 1, 1)};
    const Trajectory wrong_len[] = {line("a", 3, 0, 0, 1, 1)};
    const Trajectory two[] = {a, line("b", 4, 0, 0, 1, 1)};
    CHECK_THROWS_AS(objmc(wrong_id, gt), ArgumentError);
    CHECK_THROWS_AS(objmc(wrong_len, gt), ArgumentError);
    CHECK_THROWS_AS(objmc(two, gt), ArgumentError);
}
