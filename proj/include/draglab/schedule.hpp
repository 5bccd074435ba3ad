#pragma once

#include <draglab/rng.hpp>
#include <draglab/tensor.hpp>

#include <vector>

namespace draglab {

enum class ScheduleKind { linear };

/// Discrete DDPM noise schedule with timesteps 1..T.
struct NoiseSchedule {
    int steps = 0;
    std::vector<double> betas;       // betas[t-1]
    std::vector<double> alphas;      // 1 - beta
    std::vector<double> alpha_bars;  // cumulative product

    double beta(int t) const { return betas.at(static_cast<std::size_t>(t - 1)); }
    /// alpha-bar at step t; alpha_bar(0) = 1.
    double alpha_bar(int t) const { return t == 0 ? 1.0 : alpha_bars.at(static_cast<std::size_t>(t - 1)); }
};

/// Linear betas from 1e-4 to 2e-2.
NoiseSchedule make_schedule(int steps, ScheduleKind kind = ScheduleKind::linear);

/// x_t = sqrt(alpha_bar_t) x0 + sqrt(1 - alpha_bar_t) noise.
Tensor forward_noise(const Tensor& x0, int t, const Tensor& noise, const NoiseSchedule& schedule);

Tensor standard_normal(const Shape& shape, Rng& rng);

/// Maps [0, 1] pixels to the model's [-1, 1] latent range and back.
Tensor pixels_to_latent(const Tensor& pixels);
Tensor latent_to_pixels(const Tensor& latent);

}  // namespace draglab
