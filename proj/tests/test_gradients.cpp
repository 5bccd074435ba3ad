// Finite-difference checks of every differentiable op, built in double precision.

#include <draglab/guidance.hpp>
#include <draglab/model.hpp>
#include <draglab/training.hpp>

#include <doctest.h>

#include <cmath>
#include <functional>

using namespace draglab;
using namespace draglab::nn;

static_assert(sizeof(real) == sizeof(double), "gradient tests need the double-precision build");

namespace {

Tensor random_tensor(const Shape& s, Rng& rng, double scale = 1.0) {
    Tensor t(s);
    for (auto& v : t.values()) v = rng.uniform(-scale, scale);
    return t;
}

using Fn = std::function<Var(Tape&, const std::vector<Var>&)>;

/// Compares autodiff gradients of sum(f(inputs) * R) against central
/// differences at up to `probes` random coordinates of every input.
void check_gradients(const Fn& f, std::vector<Tensor> inputs, std::uint64_t seed, int probes = 24,
                     double tol = 1e-6) {
    Rng rng(seed);
    Tensor weights;
    {
        Tape probe(false);
        std::vector<Var> vars;
        for (const auto& t : inputs) vars.push_back(probe.constant(t));
        weights = random_tensor(f(probe, vars).shape(), rng);
    }
    auto loss_at = [&](const std::vector<Tensor>& xs) {
        Tape tape(false);
        std::vector<Var> vars;
        for (const auto& t : xs) vars.push_back(tape.constant(t));
        return weighted_sum(f(tape, vars), weights).value()[0];
    };
    Tape tape;
    std::vector<Var> vars;
    for (const auto& t : inputs) vars.push_back(tape.variable(t));
    tape.backward(weighted_sum(f(tape, vars), weights));

    const double h = 1e-6;
    for (std::size_t k = 0; k < inputs.size(); ++k) {
        const Tensor grad = vars[k].grad().empty() ? Tensor(inputs[k].shape()) : vars[k].grad();
        for (int p = 0; p < probes; ++p) {
            const auto i = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(inputs[k].size()) - 1));
            std::vector<Tensor> plus = inputs, minus = inputs;
            plus[k][i] += h;
            minus[k][i] -= h;
            const double numeric = (loss_at(plus) - loss_at(minus)) / (2 * h);
            const double analytic = grad[i];
            INFO("input " << k << " index " << i);
            CHECK(std::abs(numeric - analytic) <= tol + 1e-5 * std::max(std::abs(numeric), std::abs(analytic)));
        }
    }
}

}  // namespace

TEST_CASE("conv2d gradients") {
    Rng rng(1);
    for (int stride : {1, 2})
        for (int k : {1, 3}) {
            check_gradients([stride](Tape&, const std::vector<Var>& v) { return conv2d(v[0], v[1], v[2], stride); },
                            {random_tensor({2, 5, 6, 3}, rng), random_tensor({k, k, 3, 4}, rng), random_tensor({4}, rng)},
                            10 + stride * 3 + k);
        }
}

TEST_CASE("conv2d gradients on tiny and odd maps") {
    Rng rng(11);
    for (int size : {1, 2, 3})
        for (int stride : {1, 2})
            check_gradients([stride](Tape&, const std::vector<Var>& v) { return conv2d(v[0], v[1], v[2], stride); },
                            {random_tensor({2, size, size, 3}, rng), random_tensor({3, 3, 3, 2}, rng),
                             random_tensor({2}, rng)},
                            100 + size * 2 + stride);
}

TEST_CASE("group norm gradients on single-pixel maps") {
    Rng rng(12);
    check_gradients([](Tape&, const std::vector<Var>& v) { return group_norm(v[0], v[1], v[2], 2); },
                    {random_tensor({3, 1, 1, 8}, rng, 2.0), random_tensor({8}, rng), random_tensor({8}, rng)}, 41, 40,
                    1e-5);
    check_gradients([](Tape&, const std::vector<Var>& v) { return upsample_nearest(v[0], 2, 2); },
                    {random_tensor({2, 1, 1, 3}, rng)}, 42);
}

TEST_CASE("gradients accumulate over shared inputs") {
    Rng rng(13);
    const Shape xs{4, 2, 2, 4};
    using V = const std::vector<Var>&;
    const std::vector<std::pair<const char*, Fn>> cases{
        {"concat", [](Tape&, V v) { return concat_channels(v[0], v[0]); }},
        {"add", [](Tape&, V v) { return add(v[0], silu(v[0])); }},
        {"conv", [](Tape&, V v) { return add(conv2d(v[0], v[1], v[2], 1), v[0]); }},
        {"norm", [](Tape&, V v) { return add(group_norm(v[0], v[2], v[2], 2), v[0]); }},
        {"temporal", [](Tape&, V v) { return add(temporal_conv(v[0], v[3], v[2], 2, 1), v[0]); }},
        {"upsample", [](Tape&, V v) { return add(upsample_nearest(v[0], 2, 2), v[0]); }},
        {"clip_bias", [](Tape&, V v) { return add(add_clip_bias(v[0], v[4], 2), v[0]); }},
        {"linear", [](Tape&, V v) { return add(silu(linear(v[4], v[5], v[2])), linear(v[4], v[5], v[2])); }},
    };
    for (const auto& [name, fn] : cases) {
        INFO(name);
        check_gradients(fn,
                        {random_tensor(xs, rng), random_tensor({3, 3, 4, 4}, rng), random_tensor({4}, rng),
                         random_tensor({3, 4, 4}, rng), random_tensor({2, 4}, rng), random_tensor({4, 4}, rng)},
                        200, 30, 1e-5);
    }
}

TEST_CASE("temporal conv gradients") {
    Rng rng(2);
    for (int dilation : {1, 2, 4})
        check_gradients(
            [dilation](Tape&, const std::vector<Var>& v) { return temporal_conv(v[0], v[1], v[2], 4, dilation); },
            {random_tensor({8, 2, 3, 3}, rng), random_tensor({3, 3, 2}, rng), random_tensor({2}, rng)}, 20 + dilation);
}

TEST_CASE("linear, silu, add and scale gradients") {
    Rng rng(3);
    check_gradients([](Tape&, const std::vector<Var>& v) { return silu(linear(v[0], v[1], v[2])); },
                    {random_tensor({3, 5}, rng), random_tensor({5, 4}, rng), random_tensor({4}, rng)}, 30);
    check_gradients([](Tape&, const std::vector<Var>& v) { return scale(add(v[0], silu(v[1])), 0.7); },
                    {random_tensor({2, 3, 3, 2}, rng, 3.0), random_tensor({2, 3, 3, 2}, rng, 3.0)}, 31);
}

TEST_CASE("group norm gradients") {
    Rng rng(4);
    check_gradients([](Tape&, const std::vector<Var>& v) { return group_norm(v[0], v[1], v[2], 3); },
                    {random_tensor({2, 3, 4, 6}, rng, 2.0), random_tensor({6}, rng), random_tensor({6}, rng)}, 40, 40,
                    1e-5);
}

TEST_CASE("layout op gradients") {
    Rng rng(5);
    check_gradients([](Tape&, const std::vector<Var>& v) { return add_clip_bias(v[0], v[1], 3); },
                    {random_tensor({6, 2, 2, 3}, rng), random_tensor({2, 3}, rng)}, 50);
    check_gradients([](Tape&, const std::vector<Var>& v) { return concat_channels(v[0], v[1]); },
                    {random_tensor({2, 3, 3, 2}, rng), random_tensor({2, 3, 3, 3}, rng)}, 51);
    check_gradients([](Tape&, const std::vector<Var>& v) { return upsample_nearest(v[0], 5, 7); },
                    {random_tensor({2, 2, 3, 2}, rng)}, 52);
    check_gradients([](Tape&, const std::vector<Var>& v) { return pixel_unshuffle(v[0], 2); },
                    {random_tensor({2, 4, 6, 2}, rng)}, 53);
    check_gradients([](Tape&, const std::vector<Var>& v) { return pad_spatial(v[0], 5, 6); },
                    {random_tensor({1, 3, 4, 2}, rng)}, 54);
}

TEST_CASE("residual block gradients, with and without temporal mixing") {
    for (int tk : {1, 3}) {
        ParameterStore store;
        Rng rng(6);
        ResBlock block(store, "b", {4, 6, 8, 2, tk, 2}, rng);
        check_gradients(
            [&](Tape& tape, const std::vector<Var>& v) { return block(tape, v[0], silu(v[1]), 4); },
            {random_tensor({8, 3, 3, 4}, rng), random_tensor({2, 8}, rng)}, 60 + tk, 30, 1e-5);
    }
}

TEST_CASE("guidance encoder gradients") {
    ParameterStore store;
    Rng rng(7);
    GuidanceEncoder enc(store, "g", 2, {3, 4, 4, 4}, 4, rng);
    // The zero-initialized last convolution blocks input gradients; give it weights.
    for (auto& p : store.params())
        for (auto& v : p->value.values())
            if (v == 0) v = rng.uniform(-0.3, 0.3);
    check_gradients([&](Tape& tape, const std::vector<Var>& v) { return enc(tape, v[0]); },
                    {random_tensor({2, 12, 10, 2}, rng)}, 70, 30, 1e-5);
}

TEST_CASE("masked loss gradients vanish outside the mask") {
    Rng rng(8);
    const Tensor eps = random_tensor({2, 4, 4, 3}, rng);
    Tensor mask({2, 4, 4, 1});
    for (auto& m : mask.values()) m = rng.uniform() < 0.4 ? 1 : 0;
    check_gradients([&](Tape&, const std::vector<Var>& v) { return masked_mse_loss(eps, v[0], mask); },
                    {random_tensor({2, 4, 4, 3}, rng)}, 80, 60);
    Tape tape;
    const Var pred = tape.variable(random_tensor({2, 4, 4, 3}, rng));
    tape.backward(masked_mse_loss(eps, pred, mask));
    for (std::size_t i = 0; i < pred.grad().size(); ++i)
        if (mask[i / 3] == 0) CHECK(pred.grad()[i] == 0.0);
}

namespace {

ModelConfig tiny_model() {
    ModelConfig c;
    c.frames = 3;
    c.height = c.width = 16;
    c.denoiser.stem_channels = {4, 4, 8};
    c.denoiser.base_channels = 8;
    c.denoiser.channel_mults = {1, 2};
    c.denoiser.time_dim = 8;
    c.denoiser.groups = 2;
    c.guidance_widths = {4, 4, 4, 4};
    c.schedule_steps = 50;
    return c;
}

}  // namespace

TEST_CASE("denoiser gradient with respect to pyramid elements") {
    const ModelConfig mc = tiny_model();
    DragModel model(mc);
    Rng rng(9);
    const auto shapes = pyramid_shapes(mc.denoiser, mc.frames, mc.height, mc.width);
    std::vector<Tensor> inputs;
    for (const auto& s : shapes) inputs.push_back(random_tensor(s, rng, 0.5));
    const Tensor x = random_tensor({3, 16, 16, 6}, rng);
    const std::vector<int> ts{17};
    check_gradients(
        [&](Tape& tape, const std::vector<Var>& pyr) {
            return model.denoiser().forward(tape, tape.constant(x), ts, 3, &pyr).noise;
        },
        inputs, 90, 12, 1e-5);
}

TEST_CASE("end-to-end parameter gradients of the masked objective") {
    const ModelConfig mc = tiny_model();
    DragModel model(mc);
    Rng rng(10);
    // Give the zero-initialized injections weights so every branch carries gradient.
    for (auto& p : model.parameters().params())
        if (p->name.find("inject") != std::string::npos || p->name.find("block3.conv_b") != std::string::npos)
            for (auto& v : p->value.values()) v = rng.uniform(-0.2, 0.2);
    const Tensor x = random_tensor({3, 16, 16, 3}, rng), first = random_tensor({1, 16, 16, 3}, rng);
    const Tensor ent = random_tensor({3, 16, 16, mc.entity_channels()}, rng), gau = random_tensor({3, 16, 16, 1}, rng);
    const Tensor eps = random_tensor({3, 16, 16, 3}, rng);
    Tensor mask({3, 16, 16, 1});
    for (auto& m : mask.values()) m = rng.uniform() < 0.3 ? 1 : 0;
    ModelInputs in;
    in.x_t = &x;
    in.first_frames = &first;
    in.entity_rep = &ent;
    in.gaussian_rep = &gau;
    in.timesteps = {23};
    auto loss_value = [&] { return masked_mse_loss(eps, model.predict_noise(in), mask); };

    Tape tape;
    model.parameters().zero_grad();
    tape.backward(masked_mse_loss(eps, model.predict_noise(tape, in), mask));
    for (const char* name : {"denoiser.conv_in.weight", "denoiser.level1.block.conv1.weight", "control.latent_proj.weight",
                             "control.level0.inject.weight", "guidance.entity.block0.conv_a.weight",
                             "guidance.gaussian.block3.conv_b.weight", "denoiser.time1.weight"}) {
        Parameter* p = model.parameters().find(name);
        REQUIRE_MESSAGE(p, name);
        for (int probe = 0; probe < 4; ++probe) {
            const auto i = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(p->value.size()) - 1));
            const double keep = p->value[i], h = 1e-6;
            p->value[i] = keep + h;
            const double up = loss_value();
            p->value[i] = keep - h;
            const double down = loss_value();
            p->value[i] = keep;
            const double numeric = (up - down) / (2 * h), analytic = p->grad[i];
            INFO(name << "[" << i << "]");
            CHECK(std::abs(numeric - analytic) <= 1e-6 + 1e-4 * std::max(std::abs(numeric), std::abs(analytic)));
        }
    }
}
