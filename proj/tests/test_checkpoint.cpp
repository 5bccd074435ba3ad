#include <draglab/checkpoint.hpp>
#include <draglab/training.hpp>

#include <doctest.h>

#include <cstring>
#include <filesystem>

using namespace draglab;

namespace {

Checkpoint trained_checkpoint() {
    SceneSampler s;
    s.frames = 2;
    ModelConfig mc;
    mc.frames = 2;
    TrainConfig tc;
    tc.steps = 2;
    tc.foundation_steps = 1;
    tc.batch_size = 1;
    Trainer t(tc, mc, generate_corpus(s, 1, 3));
    t.step();
    t.step();
    return t.checkpoint();
}

}  // namespace

TEST_CASE("checkpoint round trip is bit exact") {
    const Checkpoint a = trained_checkpoint();
    const auto path = std::filesystem::temp_directory_path() / "draglab_ck_test.ckpt";
    save_checkpoint(path, a);
    const Checkpoint b = load_checkpoint(path);
    std::filesystem::remove(path);
    CHECK(b.step == a.step);
    CHECK(b.rng_state == a.rng_state);
    CHECK(b.optimizer_steps == a.optimizer_steps);
    CHECK(b.train_config == a.train_config);
    CHECK(to_json(b.model) == to_json(a.model));
    REQUIRE(b.parameters.size() == a.parameters.size());
    for (std::size_t i = 0; i < a.parameters.size(); ++i) {
        CHECK(b.parameters[i].name == a.parameters[i].name);
        CHECK(b.parameters[i].value.shape() == a.parameters[i].value.shape());
        CHECK(std::memcmp(b.parameters[i].value.data(), a.parameters[i].value.data(),
                          a.parameters[i].value.size() * sizeof(real)) == 0);
    }
    REQUIRE(b.first_moments.size() == a.first_moments.size());
    for (std::size_t i = 0; i < a.first_moments.size(); ++i) {
        CHECK(b.first_moments[i].storage() == a.first_moments[i].storage());
        CHECK(b.second_moments[i].storage() == a.second_moments[i].storage());
    }
    CHECK(encode_checkpoint(b) == encode_checkpoint(a));
}

TEST_CASE("loaded model gives identical forward outputs") {
    const Checkpoint ck = trained_checkpoint();
    const auto a = model_from_checkpoint(ck);
    const auto b = model_from_checkpoint(decode_checkpoint(encode_checkpoint(ck)));
    Rng rng(4);
    Tensor x({2, 32, 32, 3}), first({1, 32, 32, 3}), e({2, 32, 32, ck.model.entity_channels()}), g({2, 32, 32, 1});
    for (Tensor* t : {&x, &first, &e, &g})
        for (auto& v : t->values()) v = static_cast<real>(rng.uniform(-1, 1));
    ModelInputs in;
    in.x_t = &x;
    in.first_frames = &first;
    in.entity_rep = &e;
    in.gaussian_rep = &g;
    in.timesteps = {77};
    CHECK(a->predict_noise(in).storage() == b->predict_noise(in).storage());
}

TEST_CASE("malformed checkpoints raise load errors") {
    const std::string bytes = encode_checkpoint(trained_checkpoint());
    std::string bad = bytes;
    bad[0] = 'X';
    CHECK_THROWS_AS(decode_checkpoint(bad), LoadError);
    bad = bytes;
    bad[4] = 9;
    CHECK_THROWS_WITH_AS(decode_checkpoint(bad), doctest::Contains("unsupported checkpoint version"), LoadError);
    CHECK_THROWS_AS(decode_checkpoint(bytes.substr(0, bytes.size() - 3)), LoadError);
    CHECK_THROWS_AS(decode_checkpoint(bytes.substr(0, 10)), LoadError);
    CHECK_THROWS_AS(decode_checkpoint(bytes + "x"), LoadError);
    CHECK_THROWS_AS(load_checkpoint("/nonexistent/draglab.ckpt"), LoadError);
}

TEST_CASE("restoring into a mismatched model fails") {
    Checkpoint ck = trained_checkpoint();
    DragModel model(ck.model);
    ck.parameters.front().name = "nope";
    CHECK_THROWS_AS(restore_parameters(model, ck), LoadError);
    ck = trained_checkpoint();
    ck.parameters.back().value = Tensor({1});
    CHECK_THROWS_AS(restore_parameters(model, ck), LoadError);
    ck.parameters.pop_back();
    CHECK_THROWS_AS(restore_parameters(model, ck), LoadError);
}

TEST_CASE("config hash") {
    const nlohmann::json a{{"x", 1}, {"y", {1, 2}}};
    CHECK(config_hash(a) == config_hash(nlohmann::json::parse(a.dump())));
    CHECK(config_hash(a) != config_hash(nlohmann::json{{"x", 2}, {"y", {1, 2}}}));
    CHECK(config_hash(a).size() == 16);
}
