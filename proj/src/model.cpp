#include <draglab/model.hpp>

namespace draglab {

using namespace nn;
using nlohmann::json;

void ModelConfig::validate() const {
    if (frames < 1 || height < 1 || width < 1) throw ConfigError("model: frames, height and width must be positive");
    denoiser.validate();
    if (height % denoiser.latent_factor() || width % denoiser.latent_factor()) {
        throw ConfigError("model: height and width must be multiples of " + std::to_string(denoiser.latent_factor()));
    }
    if (denoiser.latent_factor() != GuidanceEncoder::kDownsample) {
        throw ConfigError("model: the stem must reduce resolution by exactly 8");
    }
    if (denoiser.image_channels != 3) throw ConfigError("model: image_channels must be 3");
    for (int w : guidance_widths)
        if (w <= 0) throw ConfigError("model: guidance widths must be positive");
    if (schedule_steps < 1) throw ConfigError("model: schedule.T must be >= 1");
    if (t_star() < 1 || t_star() > schedule_steps) throw ConfigError("feature.t_star must lie in [1, T]");
    if (feature.layer != "final_decoder") throw ConfigError("feature.layer: unsupported layer '" + feature.layer + "'");
}

json to_json(const ModelConfig& c) {
    const auto& d = c.denoiser;
    return json{
        {"frames", c.frames},
        {"height", c.height},
        {"width", c.width},
        {"denoiser",
         {{"image_channels", d.image_channels},
          {"stem_channels", d.stem_channels},
          {"base_channels", d.base_channels},
          {"channel_mults", d.channel_mults},
          {"temporal_kernel", d.temporal_kernel},
          {"time_dim", d.time_dim},
          {"groups", d.groups},
          {"injection_site", d.injection_site == InjectionSite::encoder ? "encoder" : "decoder"},
          {"input_skip", d.input_skip}}},
        {"guidance_widths", c.guidance_widths},
        {"schedule", {{"T", c.schedule_steps}}},
        {"feature", {{"t_star", c.t_star()}, {"seed", c.feature.seed}, {"layer", c.feature.layer}}},
        {"init_seed", c.init_seed},
    };
}

namespace {

template <typename T>
void read_field(const json& doc, const char* key, T& out, const std::string& path) {
    if (!doc.contains(key)) return;
    try {
        out = doc.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(path + key + ": " + e.what());
    }
}

}  // namespace

ModelConfig model_config_from_json(const json& doc) {
    if (!doc.is_object()) throw ConfigError("model config must be a JSON object");
    ModelConfig c;
    read_field(doc, "frames", c.frames, "model.");
    read_field(doc, "height", c.height, "model.");
    read_field(doc, "width", c.width, "model.");
    read_field(doc, "guidance_widths", c.guidance_widths, "model.");
    read_field(doc, "init_seed", c.init_seed, "model.");
    if (doc.contains("denoiser")) {
        const json& d = doc["denoiser"];
        auto& o = c.denoiser;
        read_field(d, "image_channels", o.image_channels, "denoiser.");
        read_field(d, "stem_channels", o.stem_channels, "denoiser.");
        read_field(d, "base_channels", o.base_channels, "denoiser.");
        read_field(d, "channel_mults", o.channel_mults, "denoiser.");
        read_field(d, "temporal_kernel", o.temporal_kernel, "denoiser.");
        read_field(d, "time_dim", o.time_dim, "denoiser.");
        read_field(d, "groups", o.groups, "denoiser.");
        std::string site = "encoder";
        read_field(d, "injection_site", site, "denoiser.");
        if (site == "encoder") o.injection_site = InjectionSite::encoder;
        else if (site == "decoder") o.injection_site = InjectionSite::decoder;
        else throw ConfigError("denoiser.injection_site: expected 'encoder' or 'decoder'");
        read_field(d, "input_skip", o.input_skip, "denoiser.");
    }
    if (doc.contains("schedule")) read_field(doc["schedule"], "T", c.schedule_steps, "schedule.");
    if (doc.contains("feature")) {
        const json& f = doc["feature"];
        read_field(f, "t_star", c.feature.t_star, "feature.");
        read_field(f, "seed", c.feature.seed, "feature.");
        read_field(f, "layer", c.feature.layer, "feature.");
    }
    c.validate();
    return c;
}

DragModel::DragModel(const ModelConfig& config) : config_(config) {
    config_.validate();
    schedule_ = make_schedule(config_.schedule_steps);
    Rng rng(config_.init_seed);
    const int cg = config_.denoiser.base_channels;
    denoiser_ = Denoiser(store_, "denoiser", config_.denoiser, rng);
    control_ = ControlBranch(store_, "control", config_.denoiser, rng);
    entity_encoder_ = GuidanceEncoder(store_, "guidance.entity", config_.entity_channels(), config_.guidance_widths,
                                      cg, rng);
    gaussian_encoder_ = GuidanceEncoder(store_, "guidance.gaussian", 1, config_.guidance_widths, cg, rng);
    Rng feature_rng(config_.feature.seed);
    extractor_ = Denoiser(extractor_store_, "extractor", config_.denoiser, feature_rng);
    for (auto& p : extractor_store_.params()) p->trainable = false;
}

void DragModel::set_base_trainable(bool trainable) {
    for (auto& p : store_.params())
        if (p->name.rfind("denoiser.", 0) == 0) p->trainable = trainable;
}

Var DragModel::predict_noise(Tape& tape, const ModelInputs& in) const {
    if (!in.x_t || !in.first_frames) throw ArgumentError("predict_noise: x_t and first_frames are required");
    const int clips = static_cast<int>(in.timesteps.size());
    if (clips == 0 || in.x_t->dim(0) % clips) throw ArgumentError("predict_noise: timesteps do not match the batch");
    const int length = in.x_t->dim(0) / clips;
    for (int t : in.timesteps)
        if (t < 1 || t > schedule_.steps) throw ArgumentError("predict_noise: timestep out of range");
    Var input = tape.constant(concatenate_first_frame(*in.x_t, *in.first_frames, length));
    if (!in.use_control) return denoiser_.forward(tape, input, in.timesteps, length).noise;

    Var r = control_.latent_noise(tape, input);
    if (in.use_entity) {
        if (!in.entity_rep) throw ArgumentError("predict_noise: entity representation missing");
        r = add(entity_encoder_(tape, tape.constant(*in.entity_rep)), r);
    }
    if (in.use_gaussian) {
        if (!in.gaussian_rep) throw ArgumentError("predict_noise: gaussian representation missing");
        r = add(gaussian_encoder_(tape, tape.constant(*in.gaussian_rep)), r);
    }
    const std::vector<Var> pyramid = control_.build_pyramid(tape, r, in.timesteps, length);
    return denoiser_.forward(tape, input, in.timesteps, length, &pyramid).noise;
}

Tensor DragModel::predict_noise(const ModelInputs& inputs) const {
    Tape tape(false);
    return predict_noise(tape, inputs).value();
}

}  // namespace draglab
