#include <draglab/schedule.hpp>

#include <algorithm>
#include <cmath>

namespace draglab {

NoiseSchedule make_schedule(int steps, ScheduleKind kind) {
    if (steps < 1) throw ArgumentError("schedule needs at least one step");
    if (kind != ScheduleKind::linear) throw ArgumentError("unknown schedule kind");
    constexpr double beta_start = 1e-4, beta_end = 2e-2;
    NoiseSchedule s;
    s.steps = steps;
    double prod = 1.0;
    for (int t = 1; t <= steps; ++t) {
        const double frac = steps == 1 ? 0.0 : static_cast<double>(t - 1) / (steps - 1);
        const double beta = beta_start + (beta_end - beta_start) * frac;
        s.betas.push_back(beta);
        s.alphas.push_back(1.0 - beta);
        prod *= 1.0 - beta;
        s.alpha_bars.push_back(prod);
    }
    return s;
}

Tensor forward_noise(const Tensor& x0, int t, const Tensor& noise, const NoiseSchedule& schedule) {
    if (t < 1 || t > schedule.steps) {
        throw ArgumentError("timestep " + std::to_string(t) + " outside [1, " + std::to_string(schedule.steps) + "]");
    }
    if (!x0.same_shape(noise)) {
        throw ArgumentError("noise shape " + shape_string(noise.shape()) + " differs from " + shape_string(x0.shape()));
    }
    const double ab = schedule.alpha_bar(t);
    const double a = std::sqrt(ab), b = std::sqrt(1.0 - ab);
    Tensor xt(x0.shape());
    for (std::size_t i = 0; i < xt.size(); ++i) xt[i] = static_cast<real>(a * x0[i] + b * noise[i]);
    return xt;
}

Tensor standard_normal(const Shape& shape, Rng& rng) {
    Tensor t(shape);
    for (auto& v : t.values()) v = static_cast<real>(rng.normal());
    return t;
}

Tensor pixels_to_latent(const Tensor& pixels) {
    Tensor out(pixels.shape());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = pixels[i] * real(2) - real(1);
    return out;
}

Tensor latent_to_pixels(const Tensor& latent) {
    Tensor out(latent.shape());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::clamp((latent[i] + real(1)) * real(0.5), real(0), real(1));
    return out;
}

}  // namespace draglab
