#pragma once

#include <draglab/autograd.hpp>

#include <vector>

namespace draglab::nn {

struct AdamWConfig {
    double learning_rate = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.01;
    /// Global gradient-norm clip; 0 disables.
    double grad_clip = 1.0;
};

/// AdamW with decoupled weight decay over every parameter in a store.
class AdamW {
public:
    AdamW(ParameterStore& store, AdamWConfig config);

    /// Applies one update from the accumulated gradients. Returns the
    /// pre-clip global gradient norm.
    double step();

    long long steps() const noexcept { return t_; }
    const AdamWConfig& config() const noexcept { return config_; }

    // Moment buffers in parameter-registration order, for checkpointing.
    std::vector<Tensor>& first_moments() noexcept { return m_; }
    std::vector<Tensor>& second_moments() noexcept { return v_; }
    void set_steps(long long t) noexcept { t_ = t; }
    /// Zeroes the moments and the step counter.
    void reset();

private:
    ParameterStore& store_;
    AdamWConfig config_;
    std::vector<Tensor> m_, v_;
    long long t_ = 0;
};

}  // namespace draglab::nn
