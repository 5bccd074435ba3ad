#include <draglab/evaluate.hpp>

namespace draglab {

EvalSummary evaluate(const Checkpoint& checkpoint, const Corpus& corpus, const EvalOptions& options) {
    const auto model = model_from_checkpoint(checkpoint);
    return evaluate(*model, checkpoint, corpus, options);
}

EvalSummary evaluate(const DragModel& model, const Checkpoint& metadata, const Corpus& corpus,
                     const EvalOptions& options) {
    EvalSummary summary;
    summary.flags = guidance_flags(metadata);
    summary.checkpoint_step = metadata.step;
    summary.config_hash = config_hash({{"model", to_json(model.config())}, {"train", metadata.train_config}});
    double total = 0.0;
    int counted = 0;
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        const CorpusClip& clip = corpus[i];
        const Tensor first = clip.video.frame(0);
        GenerationRequest request = request_from_annotation(clip.annotation, first);
        request.steps = options.sampler_steps;
        request.seed = derive_seed(options.seed, i);
        const GenerationResult result = sample_video(model, request, summary.flags);

        ClipEvaluation ce;
        ce.clip = clip.name;
        ce.requested = result.trajectories;
        for (const auto& e : clip.annotation.entities) {
            ce.tracked.push_back(track_centroid(result.video, e.mask, options.tolerance, &first));
        }
        ce.report = objmc(ce.tracked, ce.requested);
        ce.report.config = {{"sampler_steps", options.sampler_steps}, {"seed", request.seed}};
        if (!ce.report.entities.empty()) {
            total += ce.report.mean_objmc;
            ++counted;
        }
        summary.clips.push_back(std::move(ce));
    }
    summary.mean_objmc = counted ? total / counted : 0.0;
    return summary;
}

nlohmann::json to_json(const EvalSummary& s) {
    nlohmann::json clips = nlohmann::json::array();
    for (const auto& c : s.clips) {
        nlohmann::json j = to_json(c.report);
        j["clip"] = c.clip;
        clips.push_back(std::move(j));
    }
    return {
        {"config_hash", s.config_hash},
        {"checkpoint_step", s.checkpoint_step},
        {"use_entity", s.flags.use_entity},
        {"use_gaussian", s.flags.use_gaussian},
        {"mean_objmc", s.mean_objmc},
        {"clips", clips},
    };
}

}  // namespace draglab
