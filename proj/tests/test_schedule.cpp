#include <draglab/schedule.hpp>

#include <doctest.h>

#include <cmath>

using namespace draglab;

TEST_CASE("linear schedule endpoints and monotone alpha-bar") {
    const NoiseSchedule s = make_schedule(1000);
    CHECK(s.beta(1) == doctest::Approx(1e-4).epsilon(1e-12));
    CHECK(s.beta(1000) == doctest::Approx(2e-2).epsilon(1e-12));
    CHECK(s.alpha_bar(0) == 1.0);
    for (int t = 1; t <= 1000; ++t) CHECK(s.alpha_bar(t) < s.alpha_bar(t - 1));
    CHECK(make_schedule(1).steps == 1);
    CHECK_THROWS_AS(make_schedule(0), ArgumentError);
}

TEST_CASE("forward noising") {
    const NoiseSchedule s = make_schedule(1000);
    Rng rng(1);
    Tensor x0({4, 8, 8, 3});
    for (auto& v : x0.values()) v = static_cast<real>(rng.uniform(-1, 1));
    const Tensor noise = standard_normal(x0.shape(), rng);
    const Tensor x1 = forward_noise(x0, 1, noise, s);
    const double ab1 = s.alpha_bar(1);
    for (std::size_t i = 0; i < x0.size(); ++i) {
        const double bound = std::sqrt(1 - ab1) * std::abs(noise[i]) + (1 - std::sqrt(ab1)) * std::abs(x0[i]) + 1e-6;
        CHECK(std::abs(double(x1[i]) - x0[i]) <= bound);
    }

    const Tensor zero(x0.shape());
    const Tensor xt = forward_noise(zero, 500, noise, s);
    for (std::size_t i = 0; i < xt.size(); ++i)
        CHECK(xt[i] == static_cast<real>(std::sqrt(1.0 - s.alpha_bar(500)) * noise[i]));

    CHECK_THROWS_AS(forward_noise(x0, 0, noise, s), ArgumentError);
    CHECK_THROWS_AS(forward_noise(x0, 1001, noise, s), ArgumentError);
    CHECK_THROWS_AS(forward_noise(x0, 5, Tensor({1, 2}), s), ArgumentError);
}

TEST_CASE("forward noising is linear in x0 and noise") {
    const NoiseSchedule s = make_schedule(100);
    Rng rng(4);
    const Tensor x0 = standard_normal({64}, rng), n = standard_normal({64}, rng);
    for (int t : {1, 37, 100}) {
        const Tensor xt = forward_noise(x0, t, n, s);
        const double a = std::sqrt(s.alpha_bar(t)), b = std::sqrt(1 - s.alpha_bar(t));
        for (std::size_t i = 0; i < 64; ++i) CHECK(xt[i] == doctest::Approx(a * x0[i] + b * n[i]).epsilon(1e-6));
    }
}

TEST_CASE("latent mapping") {
    Tensor p({3}, std::vector<real>{0, real(0.5), 1});
    const Tensor l = pixels_to_latent(p);
    CHECK(l[0] == -1);
    CHECK(l[1] == 0);
    CHECK(l[2] == 1);
    CHECK(latent_to_pixels(l).storage() == p.storage());
}
