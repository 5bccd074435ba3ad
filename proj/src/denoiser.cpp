#include <draglab/denoiser.hpp>

#include <cstring>

namespace draglab {

using namespace nn;

void DenoiserConfig::validate() const {
    if (image_channels <= 0 || base_channels <= 0 || time_dim < 2 || time_dim % 2 || groups <= 0) {
        throw ConfigError("denoiser: channel counts must be positive and time_dim even");
    }
    if (stem_channels.empty()) throw ConfigError("denoiser: at least one stem stage is required");
    for (int c : stem_channels)
        if (c <= 0) throw ConfigError("denoiser: stem channels must be positive");
    if (channel_mults.size() < 2) throw ConfigError("denoiser: at least two levels are required");
    for (int m : channel_mults)
        if (m < 1) throw ConfigError("denoiser: channel multipliers must be >= 1");
    if (temporal_kernel < 1 || temporal_kernel % 2 == 0) throw ConfigError("denoiser: temporal kernel must be odd");
}

std::vector<Shape> pyramid_shapes(const DenoiserConfig& config, int frames, int height, int width) {
    std::vector<Shape> shapes;
    int h = height / config.latent_factor(), w = width / config.latent_factor();
    for (int l = 0; l < config.levels(); ++l) {
        if (l > 0) {
            h = (h + 1) / 2;
            w = (w + 1) / 2;
        }
        shapes.push_back({frames, h, w, config.level_channels(l)});
    }
    shapes.push_back(shapes.back());
    return shapes;
}

Tensor concatenate_first_frame(const Tensor& x_t, const Tensor& first_frames, int clip_length) {
    if (x_t.rank() != 4 || first_frames.rank() != 4 || clip_length <= 0 ||
        x_t.dim(0) != first_frames.dim(0) * clip_length || x_t.dim(1) != first_frames.dim(1) ||
        x_t.dim(2) != first_frames.dim(2)) {
        throw ArgumentError("concatenate_first_frame: x_t " + shape_string(x_t.shape()) + " and first frames " +
                            shape_string(first_frames.shape()) + " do not match for clip length " +
                            std::to_string(clip_length));
    }
    const int n = x_t.dim(0), c = x_t.dim(3), cf = first_frames.dim(3);
    const std::size_t px = static_cast<std::size_t>(x_t.dim(1)) * x_t.dim(2);
    Tensor out({n, x_t.dim(1), x_t.dim(2), c + cf});
    for (int s = 0; s < n; ++s) {
        const real* xs = x_t.data() + s * px * c;
        const real* fs = first_frames.data() + static_cast<std::size_t>(s / clip_length) * px * cf;
        real* os = out.data() + s * px * (c + cf);
        for (std::size_t p = 0; p < px; ++p) {
            std::memcpy(os + p * (c + cf), xs + p * c, sizeof(real) * c);
            std::memcpy(os + p * (c + cf) + c, fs + p * cf, sizeof(real) * cf);
        }
    }
    return out;
}

namespace {

ResBlock::Options block_options(const DenoiserConfig& c, int in, int out, int dilation) {
    return ResBlock::Options{in, out, c.time_dim, c.groups, c.temporal_kernel, dilation};
}

Var time_activation(Tape& tape, const LinearLayer& l1, const LinearLayer& l2, std::span<const int> timesteps,
                    int dim) {
    Var emb = tape.constant(timestep_embedding(timesteps, dim));
    return silu(l2(tape, silu(l1(tape, emb))));
}

void check_input(const DenoiserConfig& c, const Var& input, std::span<const int> timesteps, int clip_length) {
    if (input.value().rank() != 4 || input.dim(3) != c.input_channels()) {
        throw ArgumentError("denoiser input must be [N, H, W, " + std::to_string(c.input_channels()) + "], got " +
                            shape_string(input.shape()));
    }
    if (input.dim(1) % c.latent_factor() || input.dim(2) % c.latent_factor()) {
        throw ArgumentError("denoiser input size must be a multiple of " + std::to_string(c.latent_factor()));
    }
    if (clip_length <= 0 || input.dim(0) != static_cast<int>(timesteps.size()) * clip_length) {
        throw ArgumentError("denoiser: " + std::to_string(input.dim(0)) + " frames do not match " +
                            std::to_string(timesteps.size()) + " clips of length " + std::to_string(clip_length));
    }
}

}  // namespace

Denoiser::Denoiser(ParameterStore& store, const std::string& prefix, const DenoiserConfig& c, Rng& rng) : config_(c) {
    c.validate();
    time1_ = LinearLayer(store, prefix + ".time1", c.time_dim, c.time_dim, rng);
    time2_ = LinearLayer(store, prefix + ".time2", c.time_dim, c.time_dim, rng);
    conv_in_ = Conv2dLayer(store, prefix + ".conv_in", 3, c.input_channels(), c.stem_channels[0], 1, rng);
    const int stems = static_cast<int>(c.stem_channels.size());
    for (int i = 0; i < stems; ++i) {
        const int ch = c.stem_channels[i];
        const int next = i + 1 < stems ? c.stem_channels[i + 1] : c.base_channels;
        const std::string name = prefix + ".stem" + std::to_string(i);
        stem_blocks_.emplace_back(store, name + ".block", block_options(c, ch, ch, 1), rng);
        stem_down_.emplace_back(store, name + ".down", 3, ch, next, 2, rng);
    }
    int ch = c.base_channels;
    for (int l = 0; l < c.levels(); ++l) {
        const std::string name = prefix + ".level" + std::to_string(l);
        if (l > 0) level_down_.emplace_back(store, name + ".down", 3, ch, ch, 2, rng);
        levels_.emplace_back(store, name + ".block", block_options(c, ch, c.level_channels(l), 1 << l), rng);
        ch = c.level_channels(l);
    }
    bottleneck_ = ResBlock(store, prefix + ".bottleneck", block_options(c, ch, ch, 1), rng);
    level_up_.resize(static_cast<std::size_t>(c.levels()));
    for (int l = c.levels() - 1; l >= 0; --l) {
        const int below = l + 1 < c.levels() ? c.level_channels(l + 1) : c.level_channels(l);
        level_up_[l] = ResBlock(store, prefix + ".up_level" + std::to_string(l),
                                block_options(c, below + c.level_channels(l), c.level_channels(l), 1), rng);
    }
    stem_up_.resize(static_cast<std::size_t>(stems));
    for (int i = stems - 1; i >= 0; --i) {
        const int below = i + 1 < stems ? c.stem_channels[i + 1] : c.base_channels;
        stem_up_[i] = ResBlock(store, prefix + ".up_stem" + std::to_string(i),
                               block_options(c, below + c.stem_channels[i], c.stem_channels[i], 1), rng);
    }
    out_norm_ = GroupNormLayer(store, prefix + ".out_norm", c.stem_channels[0], c.groups);
    conv_out_ = Conv2dLayer(store, prefix + ".conv_out", 3, c.stem_channels[0], c.image_channels, 1, rng);
    if (c.input_skip)
        input_skip_ = Conv2dLayer(store, prefix + ".input_skip", 1, c.input_channels(), c.image_channels, 1, rng,
                                  Init::identity);
}

Denoiser::Output Denoiser::forward(Tape& tape, const Var& input, std::span<const int> timesteps, int clip_length,
                                   const std::vector<Var>* pyramid) const {
    const auto& c = config_;
    check_input(c, input, timesteps, clip_length);
    if (pyramid && static_cast<int>(pyramid->size()) != c.levels() + 1) {
        throw ArgumentError("guidance pyramid must have " + std::to_string(c.levels() + 1) + " features");
    }
    const Var t = time_activation(tape, time1_, time2_, timesteps, c.time_dim);

    Var h = conv_in_(tape, input);
    std::vector<Var> stem_skips;
    for (std::size_t i = 0; i < stem_blocks_.size(); ++i) {
        h = stem_blocks_[i](tape, h, t, clip_length);
        stem_skips.push_back(h);
        h = stem_down_[i](tape, h);
    }
    std::vector<Var> level_skips;
    for (int l = 0; l < c.levels(); ++l) {
        if (l > 0) h = level_down_[l - 1](tape, h);
        h = levels_[l](tape, h, t, clip_length);
        Var skip = h;
        if (pyramid) {
            const Var& g = (*pyramid)[l];
            if (c.injection_site == InjectionSite::encoder) {
                h = add(h, g);
                skip = h;
            } else {
                skip = add(h, g);
            }
        }
        level_skips.push_back(skip);
    }
    h = bottleneck_(tape, h, t, clip_length);
    if (pyramid) h = add(h, pyramid->back());

    for (int l = c.levels() - 1; l >= 0; --l) {
        h = level_up_[l](tape, concat_channels(h, level_skips[l]), t, clip_length);
        if (l > 0) h = upsample_nearest(h, level_skips[l - 1].dim(1), level_skips[l - 1].dim(2));
    }
    for (int i = static_cast<int>(stem_up_.size()) - 1; i >= 0; --i) {
        h = upsample_nearest(h, stem_skips[i].dim(1), stem_skips[i].dim(2));
        h = stem_up_[i](tape, concat_channels(h, stem_skips[i]), t, clip_length);
    }
    Output out;
    out.features = h;
    out.noise = conv_out_(tape, silu(out_norm_(tape, h)));
    if (c.input_skip) out.noise = add(out.noise, input_skip_(tape, input));
    return out;
}

ControlBranch::ControlBranch(ParameterStore& store, const std::string& prefix, const DenoiserConfig& c, Rng& rng)
    : config_(c) {
    c.validate();
    const int f = c.latent_factor();
    latent_proj_ = Conv2dLayer(store, prefix + ".latent_proj", 1, c.input_channels() * f * f, c.base_channels, 1, rng);
    time1_ = LinearLayer(store, prefix + ".time1", c.time_dim, c.time_dim, rng);
    time2_ = LinearLayer(store, prefix + ".time2", c.time_dim, c.time_dim, rng);
    int ch = c.base_channels;
    for (int l = 0; l < c.levels(); ++l) {
        const std::string name = prefix + ".level" + std::to_string(l);
        if (l > 0) level_down_.emplace_back(store, name + ".down", 3, ch, ch, 2, rng);
        levels_.emplace_back(store, name + ".block", block_options(c, ch, c.level_channels(l), 1 << l), rng);
        ch = c.level_channels(l);
        inject_.emplace_back(store, name + ".inject", 1, ch, ch, 1, rng, Init::zero);
    }
    bottleneck_ = ResBlock(store, prefix + ".bottleneck", block_options(c, ch, ch, 1), rng);
    inject_.emplace_back(store, prefix + ".bottleneck.inject", 1, ch, ch, 1, rng, Init::zero);
}

Var ControlBranch::latent_noise(Tape& tape, const Var& input) const {
    return latent_proj_(tape, pixel_unshuffle(input, config_.latent_factor()));
}

std::vector<Var> ControlBranch::build_pyramid(Tape& tape, const Var& combined, std::span<const int> timesteps,
                                              int clip_length) const {
    if (combined.value().rank() != 4 || combined.dim(3) != config_.base_channels) {
        throw ArgumentError("combined guidance must have " + std::to_string(config_.base_channels) +
                            " channels, got " + shape_string(combined.shape()));
    }
    if (clip_length <= 0 || combined.dim(0) != static_cast<int>(timesteps.size()) * clip_length) {
        throw ArgumentError("combined guidance frame count does not match the timesteps");
    }
    const Var t = time_activation(tape, time1_, time2_, timesteps, config_.time_dim);
    std::vector<Var> out;
    Var h = combined;
    for (int l = 0; l < config_.levels(); ++l) {
        if (l > 0) h = level_down_[l - 1](tape, h);
        h = levels_[l](tape, h, t, clip_length);
        out.push_back(inject_[l](tape, h));
    }
    h = bottleneck_(tape, h, t, clip_length);
    out.push_back(inject_.back()(tape, h));
    return out;
}

GuidancePyramid ControlBranch::build_pyramid(const Tensor& combined, std::span<const int> timesteps,
                                             int clip_length) const {
    Tape tape(false);
    GuidancePyramid pyramid;
    for (const Var& v : build_pyramid(tape, tape.constant(combined), timesteps, clip_length)) {
        pyramid.features.push_back(v.value());
    }
    return pyramid;
}

}  // namespace draglab
