#pragma once

#include <draglab/autograd.hpp>
#include <draglab/rng.hpp>

#include <string>

namespace draglab::nn {

/// `identity` needs a 1x1 kernel and copies input channel k to output channel k.
enum class Init { normal, zero, identity };

/// Registers parameters under `prefix` and draws weights N(0, 1/fan_in).
class Conv2dLayer {
public:
    Conv2dLayer() = default;
    Conv2dLayer(ParameterStore& store, const std::string& prefix, int kernel, int in_channels, int out_channels,
                int stride, Rng& rng, Init init = Init::normal);
    Var operator()(Tape& tape, const Var& x) const;
    int out_channels() const { return out_channels_; }

private:
    Parameter* weight_ = nullptr;
    Parameter* bias_ = nullptr;
    int stride_ = 1;
    int out_channels_ = 0;
};

class TemporalConvLayer {
public:
    TemporalConvLayer() = default;
    TemporalConvLayer(ParameterStore& store, const std::string& prefix, int kernel, int channels, int dilation,
                      Rng& rng);
    Var operator()(Tape& tape, const Var& x, int clip_length) const;

private:
    Parameter* weight_ = nullptr;
    Parameter* bias_ = nullptr;
    int dilation_ = 1;
};

class LinearLayer {
public:
    LinearLayer() = default;
    LinearLayer(ParameterStore& store, const std::string& prefix, int in_features, int out_features, Rng& rng);
    Var operator()(Tape& tape, const Var& x) const;

private:
    Parameter* weight_ = nullptr;
    Parameter* bias_ = nullptr;
};

class GroupNormLayer {
public:
    GroupNormLayer() = default;
    GroupNormLayer(ParameterStore& store, const std::string& prefix, int channels, int groups);
    Var operator()(Tape& tape, const Var& x) const;

private:
    Parameter* gamma_ = nullptr;
    Parameter* beta_ = nullptr;
    int groups_ = 1;
};

/// Largest divisor of `channels` not exceeding `preferred`.
int group_count(int channels, int preferred);

/// GN-SiLU-conv3x3, timestep bias, GN-SiLU-conv3x3, residual; then an
/// optional residual temporal convolution (factorized space/time block).
class ResBlock {
public:
    struct Options {
        int in_channels = 0;
        int out_channels = 0;
        int time_dim = 0;
        int groups = 8;
        int temporal_kernel = 3;
        int dilation = 1;
    };

    ResBlock() = default;
    ResBlock(ParameterStore& store, const std::string& prefix, const Options& options, Rng& rng);
    /// `time_act` is silu(time embedding), shape [clips, time_dim].
    Var operator()(Tape& tape, const Var& x, const Var& time_act, int clip_length) const;

private:
    GroupNormLayer norm1_, norm2_, norm3_;
    Conv2dLayer conv1_, conv2_, skip_;
    LinearLayer time_proj_;
    TemporalConvLayer temporal_;
    bool has_skip_ = false;
    bool has_temporal_ = false;
};

/// Sinusoidal embedding of integer timesteps, shape [timesteps.size(), dim].
Tensor timestep_embedding(std::span<const int> timesteps, int dim);

}  // namespace draglab::nn
