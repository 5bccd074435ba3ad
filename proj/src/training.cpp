#include <draglab/features.hpp>
#include <draglab/training.hpp>

#include <cmath>
#include <cstring>
#include <sstream>

namespace draglab {

using namespace nn;
using nlohmann::json;

namespace {

struct MaskLayout {
    std::size_t pixels = 0;
    int channels = 0;
    bool broadcast = false;
    double weight_sum = 0.0;
};

MaskLayout check_mask(const Tensor& eps, const Shape& pred_shape, const Tensor& mask, MaskMode mode) {
    if (eps.shape() != pred_shape) {
        throw ArgumentError("masked_mse_loss: eps " + shape_string(eps.shape()) + " vs prediction " +
                            shape_string(pred_shape));
    }
    MaskLayout layout;
    layout.channels = eps.rank() > 0 ? eps.shape().back() : 1;
    layout.pixels = layout.channels ? eps.size() / static_cast<std::size_t>(layout.channels) : 0;
    if (mask.shape() == eps.shape()) {
        layout.broadcast = false;
    } else {
        Shape expected = eps.shape();
        if (!expected.empty()) expected.back() = 1;
        if (mask.shape() != expected && mask.size() != layout.pixels) {
            throw ArgumentError("masked_mse_loss: mask " + shape_string(mask.shape()) + " does not match " +
                                shape_string(eps.shape()));
        }
        layout.broadcast = true;
    }
    double sum = 0.0;
    for (real m : mask.values()) sum += m;
    layout.weight_sum = layout.broadcast ? sum * layout.channels : sum;
    if (sum == 0.0 && mode == MaskMode::strict) throw DegenerateBatchError("loss mask has no foreground pixels");
    return layout;
}

template <typename F>
void for_each_weighted(const MaskLayout& l, const Tensor& mask, std::size_t size, F fn) {
    for (std::size_t i = 0; i < size; ++i) {
        const real m = l.broadcast ? mask[i / static_cast<std::size_t>(l.channels)] : mask[i];
        fn(i, m);
    }
}

}  // namespace

double masked_mse_loss(const Tensor& eps, const Tensor& eps_hat, const Tensor& mask, MaskMode mode) {
    const MaskLayout l = check_mask(eps, eps_hat.shape(), mask, mode);
    double acc = 0.0;
    for_each_weighted(l, mask, eps.size(), [&](std::size_t i, real m) {
        if (m == 0) return;
        const double d = static_cast<double>(eps[i]) - eps_hat[i];
        acc += m * d * d;
    });
    return acc / std::max(1.0, l.weight_sum);
}

Var masked_mse_loss(const Tensor& eps, const Var& eps_hat, const Tensor& mask, MaskMode mode) {
    const MaskLayout l = check_mask(eps, eps_hat.shape(), mask, mode);
    const double loss = masked_mse_loss(eps, eps_hat.value(), mask, mode);
    const double norm = std::max(1.0, l.weight_sum);
    Node* pn = eps_hat.node();
    auto eps_copy = std::make_shared<Tensor>(eps);
    auto mask_copy = std::make_shared<Tensor>(mask);
    return eps_hat.tape().make(Tensor({1}, std::vector<real>{static_cast<real>(loss)}), eps_hat.requires_grad(),
                               [=](Node& self) {
                                   real* dp = pn->grad_buffer().data();
                                   const Tensor& p = pn->val();
                                   const double g = self.grad[0];
                                   for_each_weighted(l, *mask_copy, p.size(), [&](std::size_t i, real m) {
                                       if (m == 0) return;
                                       const double d = static_cast<double>(p[i]) - (*eps_copy)[i];
                                       dp[i] += static_cast<real>(2.0 * m * d * g / norm);
                                   });
                               });
}

void TrainConfig::validate() const {
    if (steps < 1) throw ConfigError("train.steps must be >= 1");
    if (batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw ConfigError("train.learning_rate must be > 0");
    if (foundation_steps < 0) throw ConfigError("train.foundation_steps must be >= 0");
    if (weight_decay < 0.0) throw ConfigError("train.weight_decay must be >= 0");
    if (grad_clip < 0.0) throw ConfigError("train.grad_clip must be >= 0");
    if (checkpoint_every < 0) throw ConfigError("train.checkpoint_every must be >= 0");
    if (checkpoint_every > 0 && checkpoint_dir.empty()) {
        throw ConfigError("train.checkpoint_dir is required when checkpoint_every > 0");
    }
}

json to_json(const TrainConfig& c) {
    return json{
        {"steps", c.steps},
        {"learning_rate", c.learning_rate},
        {"batch_size", c.batch_size},
        {"seed", c.seed},
        {"use_entity", c.use_entity},
        {"use_gaussian", c.use_gaussian},
        {"use_loss_mask", c.use_loss_mask},
        {"foundation_steps", c.foundation_steps},
        {"freeze_base", c.freeze_base},
        {"weight_decay", c.weight_decay},
        {"grad_clip", c.grad_clip},
        {"checkpoint_every", c.checkpoint_every},
        {"checkpoint_dir", c.checkpoint_dir},
    };
}

TrainConfig train_config_from_json(const json& doc) {
    if (!doc.is_object()) throw ConfigError("train config must be a JSON object");
    TrainConfig c;
    auto read = [&](const char* key, auto& out) {
        if (!doc.contains(key)) return;
        try {
            out = doc.at(key).get<std::decay_t<decltype(out)>>();
        } catch (const json::exception& e) {
            throw ConfigError(std::string("train.") + key + ": " + e.what());
        }
    };
    read("steps", c.steps);
    read("learning_rate", c.learning_rate);
    read("batch_size", c.batch_size);
    read("seed", c.seed);
    read("use_entity", c.use_entity);
    read("use_gaussian", c.use_gaussian);
    read("use_loss_mask", c.use_loss_mask);
    read("foundation_steps", c.foundation_steps);
    read("freeze_base", c.freeze_base);
    read("weight_decay", c.weight_decay);
    read("grad_clip", c.grad_clip);
    read("checkpoint_every", c.checkpoint_every);
    read("checkpoint_dir", c.checkpoint_dir);
    c.validate();
    return c;
}

PreparedClip prepare_clip(const DragModel& model, const CorpusClip& clip) {
    const auto& mc = model.config();
    const Tensor& frames = clip.video.frames;
    if (frames.rank() != 4 || frames.dim(0) != mc.frames || frames.dim(1) != mc.height ||
        frames.dim(2) != mc.width || frames.dim(3) != 3) {
        throw ConfigError("clip '" + clip.name + "' has shape " + shape_string(frames.shape()) +
                          ", model expects [" + std::to_string(mc.frames) + ", " + std::to_string(mc.height) + ", " +
                          std::to_string(mc.width) + ", 3]");
    }
    std::vector<EntityMask> masks;
    std::vector<Trajectory> trajectories;
    std::vector<std::vector<EntityMask>> frame_masks;
    bool all_frame_masks = true;
    for (const auto& e : clip.annotation.entities) {
        masks.push_back(e.mask);
        trajectories.push_back(e.trajectory);
        frame_masks.push_back(e.frame_masks);
        all_frame_masks = all_frame_masks && !e.frame_masks.empty();
    }
    if (!all_frame_masks) frame_masks.clear();
    const Tensor first = clip.video.frame(0);
    const auto embeddings =
        extract_entity_features(first, masks, model.feature_extractor(), mc.t_star(), model.schedule(), mc.feature.seed);

    PreparedClip p;
    p.name = clip.name;
    p.sample = make_training_sample(clip.video, masks, trajectories, embeddings, frame_masks, mc.entity_channels());
    p.latent = pixels_to_latent(frames);
    p.first_frame = pixels_to_latent(first);
    p.first_frame.reshape({1, mc.height, mc.width, 3});
    p.entity_rep = p.sample.entity_rep.maps;
    p.gaussian_rep = p.sample.gaussian_rep.maps;
    p.loss_mask = p.sample.loss_mask;
    return p;
}

namespace {

struct Batch {
    Tensor x_t, eps, first, entity, gaussian, mask;
    std::vector<int> timesteps;
    std::vector<int> clips;
};

Tensor stack(const std::vector<const Tensor*>& parts) {
    Shape shape = parts.front()->shape();
    shape[0] = 0;
    for (const Tensor* t : parts) shape[0] += t->dim(0);
    Tensor out(shape);
    std::size_t offset = 0;
    for (const Tensor* t : parts) {
        std::memcpy(out.data() + offset, t->data(), sizeof(real) * t->size());
        offset += t->size();
    }
    return out;
}

Batch assemble(const std::vector<PreparedClip>& clips, const std::vector<int>& picks, const std::vector<int>& ts,
               const Tensor& noise, const NoiseSchedule& schedule) {
    Batch b;
    b.clips = picks;
    b.timesteps = ts;
    b.eps = noise;
    std::vector<const Tensor*> x0, first, ent, gau, mask;
    for (int i : picks) {
        const auto& c = clips[static_cast<std::size_t>(i)];
        x0.push_back(&c.latent);
        first.push_back(&c.first_frame);
        ent.push_back(&c.entity_rep);
        gau.push_back(&c.gaussian_rep);
        mask.push_back(&c.loss_mask);
    }
    b.first = stack(first);
    b.entity = stack(ent);
    b.gaussian = stack(gau);
    b.mask = stack(mask);
    b.x_t = Tensor(noise.shape());
    const std::size_t per_clip = noise.size() / picks.size();
    for (std::size_t k = 0; k < picks.size(); ++k) {
        const double a = std::sqrt(schedule.alpha_bar(ts[k]));
        const double s = std::sqrt(1.0 - schedule.alpha_bar(ts[k]));
        const real* x = x0[k]->data();
        const real* e = noise.data() + k * per_clip;
        real* out = b.x_t.data() + k * per_clip;
        for (std::size_t i = 0; i < per_clip; ++i) out[i] = static_cast<real>(a * x[i] + s * e[i]);
    }
    return b;
}

std::vector<PreparedClip> prepare_corpus(const DragModel& model, const Corpus& corpus) {
    if (corpus.empty()) throw ConfigError("training corpus is empty");
    std::vector<PreparedClip> out;
    out.reserve(corpus.size());
    for (const auto& c : corpus) out.push_back(prepare_clip(model, c));
    return out;
}

AdamWConfig optimizer_config(const TrainConfig& c) {
    AdamWConfig o;
    o.learning_rate = c.learning_rate;
    o.weight_decay = c.weight_decay;
    o.grad_clip = c.grad_clip;
    return o;
}

}  // namespace

Trainer::Trainer(const TrainConfig& config, const ModelConfig& model_config, const Corpus& corpus)
    : config_(config), rng_(config.seed) {
    config_.validate();
    model_ = std::make_unique<DragModel>(model_config);
    optimizer_ = std::make_unique<AdamW>(model_->parameters(), optimizer_config(config_));
    clips_ = prepare_corpus(*model_, corpus);
    configure_phase();
}

Trainer::Trainer(const TrainConfig& config, const Checkpoint& resume, const Corpus& corpus)
    : config_(config), rng_(config.seed) {
    config_.validate();
    model_ = model_from_checkpoint(resume);
    optimizer_ = std::make_unique<AdamW>(model_->parameters(), optimizer_config(config_));
    auto& m = optimizer_->first_moments();
    auto& v = optimizer_->second_moments();
    if (resume.first_moments.size() != m.size() || resume.second_moments.size() != v.size()) {
        throw LoadError("checkpoint optimizer state does not match the model");
    }
    for (std::size_t i = 0; i < m.size(); ++i) {
        if (!m[i].same_shape(resume.first_moments[i]) || !v[i].same_shape(resume.second_moments[i])) {
            throw LoadError("checkpoint optimizer moment " + std::to_string(i) + " has the wrong shape");
        }
        m[i] = resume.first_moments[i];
        v[i] = resume.second_moments[i];
    }
    optimizer_->set_steps(resume.optimizer_steps);
    rng_.set_state(resume.rng_state);
    step_ = resume.step;
    clips_ = prepare_corpus(*model_, corpus);
    configure_phase();
}

void Trainer::configure_phase() {
    const bool foundation = step_ < config_.foundation_steps;
    for (auto& p : model_->parameters().params()) {
        const bool base = p->name.rfind("denoiser.", 0) == 0;
        p->trainable = foundation ? base : (!base || !config_.freeze_base);
        if (!config_.use_entity && p->name.rfind("guidance.entity.", 0) == 0) p->trainable = false;
        if (!config_.use_gaussian && p->name.rfind("guidance.gaussian.", 0) == 0) p->trainable = false;
    }
}

StepRecord Trainer::step() {
    if (step_ == config_.foundation_steps && config_.foundation_steps > 0) optimizer_->reset();
    configure_phase();
    const bool foundation = step_ < config_.foundation_steps;
    const auto& mc = model_->config();
    const int n = static_cast<int>(clips_.size());

    std::vector<int> picks, ts;
    for (int k = 0; k < config_.batch_size; ++k) picks.push_back(static_cast<int>(rng_.uniform_int(0, n - 1)));
    for (int k = 0; k < config_.batch_size; ++k)
        ts.push_back(static_cast<int>(rng_.uniform_int(1, model_->schedule().steps)));
    const Tensor noise = standard_normal({config_.batch_size * mc.frames, mc.height, mc.width, 3}, rng_);
    Batch b = assemble(clips_, picks, ts, noise, model_->schedule());

    ModelInputs in;
    in.x_t = &b.x_t;
    in.first_frames = &b.first;
    in.entity_rep = &b.entity;
    in.gaussian_rep = &b.gaussian;
    in.timesteps = b.timesteps;
    in.use_control = !foundation;
    in.use_entity = config_.use_entity;
    in.use_gaussian = config_.use_gaussian;

    Tape tape;
    const Var pred = model_->predict_noise(tape, in);
    const bool masked = !foundation && config_.use_loss_mask;
    const Tensor ones(b.mask.shape(), real(1));
    const Var loss = masked_mse_loss(b.eps, pred, masked ? b.mask : ones, MaskMode::lenient);

    StepRecord rec;
    rec.step = step_ + 1;
    rec.loss = loss.value()[0];
    rec.foundation = foundation;
    auto diagnostics = [&] {
        std::ostringstream out;
        out << "step " << rec.step << (foundation ? " (foundation)" : " (guidance)") << ", clips [";
        for (std::size_t k = 0; k < picks.size(); ++k) out << (k ? ", " : "") << clips_[picks[k]].name;
        out << "], timesteps [";
        for (std::size_t k = 0; k < ts.size(); ++k) out << (k ? ", " : "") << ts[k];
        out << "]";
        return out.str();
    };
    if (!std::isfinite(rec.loss)) throw TrainingError("non-finite loss at " + diagnostics());

    model_->parameters().zero_grad();
    tape.backward(loss);
    rec.grad_norm = optimizer_->step();
    if (!std::isfinite(rec.grad_norm)) throw TrainingError("non-finite gradient norm at " + diagnostics());
    ++step_;
    return rec;
}

Checkpoint Trainer::checkpoint() const {
    Checkpoint c = snapshot_model(*model_);
    c.train_config = to_json(config_);
    c.step = step_;
    c.rng_state = rng_.state();
    c.optimizer_steps = optimizer_->steps();
    c.first_moments = optimizer_->first_moments();
    c.second_moments = optimizer_->second_moments();
    return c;
}

double Trainer::evaluate_loss(int draws, std::uint64_t seed) const {
    Rng rng(seed);
    const auto& mc = model_->config();
    const int n = static_cast<int>(clips_.size());
    double total = 0.0;
    for (int d = 0; d < draws; ++d) {
        const std::vector<int> picks{static_cast<int>(rng.uniform_int(0, n - 1))};
        const std::vector<int> ts{static_cast<int>(rng.uniform_int(1, model_->schedule().steps))};
        const Tensor noise = standard_normal({mc.frames, mc.height, mc.width, 3}, rng);
        Batch b = assemble(clips_, picks, ts, noise, model_->schedule());
        ModelInputs in;
        in.x_t = &b.x_t;
        in.first_frames = &b.first;
        in.entity_rep = &b.entity;
        in.gaussian_rep = &b.gaussian;
        in.timesteps = b.timesteps;
        in.use_entity = config_.use_entity;
        in.use_gaussian = config_.use_gaussian;
        const Tensor pred = model_->predict_noise(in);
        const Tensor ones(b.mask.shape(), real(1));
        total += masked_mse_loss(b.eps, pred, config_.use_loss_mask ? b.mask : ones);
    }
    return total / std::max(1, draws);
}

TrainingResult run_training(const TrainConfig& config, const ModelConfig& model_config, const Corpus& corpus,
                            const std::optional<Checkpoint>& resume,
                            const std::function<void(const StepRecord&)>& on_step) {
    Trainer trainer = resume ? Trainer(config, *resume, corpus) : Trainer(config, model_config, corpus);
    TrainingResult result;
    while (!trainer.finished()) {
        StepRecord rec = trainer.step();
        result.history.push_back(rec);
        if (on_step) on_step(rec);
        if (config.checkpoint_every > 0 && rec.step % config.checkpoint_every == 0) {
            std::filesystem::create_directories(config.checkpoint_dir);
            char name[32];
            std::snprintf(name, sizeof(name), "step_%07lld.ckpt", rec.step);
            save_checkpoint(std::filesystem::path(config.checkpoint_dir) / name, trainer.checkpoint());
        }
    }
    result.checkpoint = trainer.checkpoint();
    return result;
}

}  // namespace draglab
