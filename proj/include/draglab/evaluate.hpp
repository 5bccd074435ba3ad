#pragma once

#include <draglab/checkpoint.hpp>
#include <draglab/corpus.hpp>
#include <draglab/sampling.hpp>
#include <draglab/tracking.hpp>

#include <nlohmann/json.hpp>

#include <string>
#include <vector>

namespace draglab {

struct EvalOptions {
    /// Sampler steps per clip; 0 runs the full schedule.
    int sampler_steps = 50;
    std::uint64_t seed = 0;
    double tolerance = kDefaultColorTolerance;
};

struct ClipEvaluation {
    std::string clip;
    EvalReport report;
    std::vector<Trajectory> tracked;
    std::vector<Trajectory> requested;
};

struct EvalSummary {
    std::vector<ClipEvaluation> clips;
    /// Mean over clips that have at least one entity.
    double mean_objmc = 0.0;
    std::string config_hash;
    long long checkpoint_step = 0;
    GuidanceFlags flags;
};

/// Generates every clip from its first frame and annotated trajectories,
/// tracks each entity and scores the tracks against the requests.
EvalSummary evaluate(const Checkpoint& checkpoint, const Corpus& corpus, const EvalOptions& options = {});
EvalSummary evaluate(const DragModel& model, const Checkpoint& metadata, const Corpus& corpus,
                     const EvalOptions& options = {});

nlohmann::json to_json(const EvalSummary& summary);

}  // namespace draglab
