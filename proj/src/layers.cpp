#include <draglab/layers.hpp>

#include <algorithm>
#include <cmath>

namespace draglab::nn {

namespace {

void init_normal(Tensor& t, double stddev, Rng& rng) {
    for (auto& v : t.values()) v = static_cast<real>(rng.normal() * stddev);
}

}  // namespace

Conv2dLayer::Conv2dLayer(ParameterStore& store, const std::string& prefix, int kernel, int in_channels,
                         int out_channels, int stride, Rng& rng, Init init)
    : stride_(stride), out_channels_(out_channels) {
    weight_ = &store.add(prefix + ".weight", {kernel, kernel, in_channels, out_channels});
    bias_ = &store.add(prefix + ".bias", {out_channels});
    if (init == Init::normal) init_normal(weight_->value, 1.0 / std::sqrt(double(kernel * kernel * in_channels)), rng);
    if (init == Init::identity) {
        if (kernel != 1) throw ConfigError(prefix + ": identity init needs a 1x1 kernel");
        for (int k = 0; k < std::min(in_channels, out_channels); ++k)
            weight_->value[static_cast<std::size_t>(k) * out_channels + k] = 1;
    }
}

Var Conv2dLayer::operator()(Tape& tape, const Var& x) const {
    return conv2d(x, tape.param(*weight_), tape.param(*bias_), stride_);
}

TemporalConvLayer::TemporalConvLayer(ParameterStore& store, const std::string& prefix, int kernel, int channels,
                                     int dilation, Rng& rng)
    : dilation_(dilation) {
    weight_ = &store.add(prefix + ".weight", {kernel, channels, channels});
    bias_ = &store.add(prefix + ".bias", {channels});
    init_normal(weight_->value, 1.0 / std::sqrt(double(kernel * channels)), rng);
}

Var TemporalConvLayer::operator()(Tape& tape, const Var& x, int clip_length) const {
    return temporal_conv(x, tape.param(*weight_), tape.param(*bias_), clip_length, dilation_);
}

LinearLayer::LinearLayer(ParameterStore& store, const std::string& prefix, int in_features, int out_features,
                         Rng& rng) {
    weight_ = &store.add(prefix + ".weight", {in_features, out_features});
    bias_ = &store.add(prefix + ".bias", {out_features});
    init_normal(weight_->value, 1.0 / std::sqrt(double(in_features)), rng);
}

Var LinearLayer::operator()(Tape& tape, const Var& x) const {
    return linear(x, tape.param(*weight_), tape.param(*bias_));
}

GroupNormLayer::GroupNormLayer(ParameterStore& store, const std::string& prefix, int channels, int groups)
    : groups_(group_count(channels, groups)) {
    gamma_ = &store.add(prefix + ".gamma", {channels});
    beta_ = &store.add(prefix + ".beta", {channels});
    gamma_->value.fill(1);
}

Var GroupNormLayer::operator()(Tape& tape, const Var& x) const {
    return group_norm(x, tape.param(*gamma_), tape.param(*beta_), groups_);
}

int group_count(int channels, int preferred) {
    for (int g = std::min(channels, preferred); g > 1; --g)
        if (channels % g == 0) return g;
    return 1;
}

ResBlock::ResBlock(ParameterStore& store, const std::string& prefix, const Options& o, Rng& rng) {
    norm1_ = GroupNormLayer(store, prefix + ".norm1", o.in_channels, o.groups);
    conv1_ = Conv2dLayer(store, prefix + ".conv1", 3, o.in_channels, o.out_channels, 1, rng);
    time_proj_ = LinearLayer(store, prefix + ".time_proj", o.time_dim, o.out_channels, rng);
    norm2_ = GroupNormLayer(store, prefix + ".norm2", o.out_channels, o.groups);
    conv2_ = Conv2dLayer(store, prefix + ".conv2", 3, o.out_channels, o.out_channels, 1, rng);
    has_skip_ = o.in_channels != o.out_channels;
    if (has_skip_) skip_ = Conv2dLayer(store, prefix + ".skip", 1, o.in_channels, o.out_channels, 1, rng);
    has_temporal_ = o.temporal_kernel > 1;
    if (has_temporal_) {
        norm3_ = GroupNormLayer(store, prefix + ".norm_t", o.out_channels, o.groups);
        temporal_ = TemporalConvLayer(store, prefix + ".temporal", o.temporal_kernel, o.out_channels, o.dilation, rng);
    }
}

Var ResBlock::operator()(Tape& tape, const Var& x, const Var& time_act, int clip_length) const {
    Var h = conv1_(tape, silu(norm1_(tape, x)));
    h = add_clip_bias(h, time_proj_(tape, time_act), clip_length);
    h = conv2_(tape, silu(norm2_(tape, h)));
    h = add(h, has_skip_ ? skip_(tape, x) : x);
    if (has_temporal_) h = add(h, temporal_(tape, silu(norm3_(tape, h)), clip_length));
    return h;
}

Tensor timestep_embedding(std::span<const int> timesteps, int dim) {
    if (dim < 2 || dim % 2) throw ArgumentError("timestep embedding dimension must be even");
    const int half = dim / 2;
    Tensor out({static_cast<int>(timesteps.size()), dim});
    for (std::size_t b = 0; b < timesteps.size(); ++b)
        for (int i = 0; i < half; ++i) {
            const double freq = std::exp(-std::log(10000.0) * i / half);
            const double arg = timesteps[b] * freq;
            out[b * dim + i] = static_cast<real>(std::cos(arg));
            out[b * dim + half + i] = static_cast<real>(std::sin(arg));
        }
    return out;
}

}  // namespace draglab::nn
