#include <draglab/guidance.hpp>

namespace draglab {

using namespace nn;

GuidanceEncoder::GuidanceEncoder(ParameterStore& store, const std::string& prefix, int in_channels,
                                 const std::array<int, 4>& widths, int out_channels, Rng& rng)
    : in_channels_(in_channels), out_channels_(out_channels) {
    int ch = in_channels;
    for (int b = 0; b < 4; ++b) {
        const std::string name = prefix + ".block" + std::to_string(b);
        const int stride = b == 0 ? 1 : 2;
        first_[b] = Conv2dLayer(store, name + ".conv_a", 3, ch, widths[b], stride, rng);
        const bool last = b == 3;
        second_[b] = Conv2dLayer(store, name + ".conv_b", 3, widths[b], last ? out_channels : widths[b], 1, rng,
                                 last ? Init::zero : Init::normal);
        ch = widths[b];
    }
}

Var GuidanceEncoder::operator()(Tape& tape, const Var& x) const {
    if (x.value().rank() != 4 || x.dim(3) != in_channels_) {
        throw ArgumentError("guidance encoder expects " + std::to_string(in_channels_) + " input channels, got " +
                            shape_string(x.shape()));
    }
    const int h = (x.dim(1) + kDownsample - 1) / kDownsample * kDownsample;
    const int w = (x.dim(2) + kDownsample - 1) / kDownsample * kDownsample;
    Var y = pad_spatial(x, h, w);
    for (int b = 0; b < 4; ++b) y = second_[b](tape, silu(first_[b](tape, y)));
    return y;
}

GuidanceLatent GuidanceEncoder::encode(const Tensor& sequence) const {
    Tape tape(false);
    Var y = (*this)(tape, tape.constant(sequence));
    GuidanceLatent out;
    out.values = y.value();
    out.padded_height = (sequence.dim(1) + kDownsample - 1) / kDownsample * kDownsample;
    out.padded_width = (sequence.dim(2) + kDownsample - 1) / kDownsample * kDownsample;
    return out;
}

Tensor combine_guidance(const Tensor& entity_latent, const Tensor& gaussian_latent, const Tensor& noise_latent) {
    if (!entity_latent.same_shape(gaussian_latent) || !entity_latent.same_shape(noise_latent)) {
        throw ArgumentError("combine_guidance: shapes " + shape_string(entity_latent.shape()) + ", " +
                            shape_string(gaussian_latent.shape()) + ", " + shape_string(noise_latent.shape()) +
                            " differ");
    }
    Tensor r = entity_latent;
    r += gaussian_latent;
    r += noise_latent;
    return r;
}

Var combine_guidance(const Var& entity_latent, const Var& gaussian_latent, const Var& noise_latent) {
    return add(add(entity_latent, gaussian_latent), noise_latent);
}

}  // namespace draglab
