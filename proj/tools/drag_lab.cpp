// drag-lab: corpus generation, training, sampling, evaluation and serving.

#include <draglab/corpus.hpp>
#include <draglab/evaluate.hpp>
#include <draglab/image_io.hpp>
#include <draglab/sampling.hpp>
#include <draglab/service.hpp>
#include <draglab/training.hpp>

#include <CLI11.hpp>
#include <httplib.h>

#include <chrono>
#include <cstdio>
#include <iostream>

namespace fs = std::filesystem;
using namespace draglab;
using nlohmann::json;

namespace {

SceneSampler sampler_from_json(const json& doc) {
    SceneSampler s;
    s.frames = doc.value("frames", s.frames);
    s.height = doc.value("height", s.height);
    s.width = doc.value("width", s.width);
    s.min_shapes = doc.value("min_shapes", s.min_shapes);
    s.max_shapes = doc.value("max_shapes", s.max_shapes);
    s.min_speed = doc.value("min_speed", s.min_speed);
    s.max_speed = doc.value("max_speed", s.max_speed);
    return s;
}

Corpus corpus_from_config(const json& doc, const fs::path& base) {
    if (!doc.is_object()) throw ConfigError("corpus: expected an object");
    if (doc.contains("path")) {
        fs::path p = doc["path"].get<std::string>();
        return dataset_read(p.is_relative() ? base / p : p);
    }
    if (doc.contains("generate")) {
        const json& g = doc["generate"];
        return generate_corpus(sampler_from_json(g), g.value("count", 16), g.value("seed", std::uint64_t{0}));
    }
    throw ConfigError("corpus: expected 'path' or 'generate'");
}

int gen_corpus(const fs::path& out, int count, std::uint64_t seed, const SceneSampler& sampler) {
    const Corpus corpus = generate_corpus(sampler, count, seed);
    dataset_write(out, corpus);
    std::cout << "wrote " << corpus.size() << " clips to " << out << "\n";
    return 0;
}

int train(const fs::path& config_path, const std::string& resume_path) {
    const json doc = parse_json(read_file(config_path));
    const fs::path base = config_path.parent_path();
    const ModelConfig model = model_config_from_json(doc.value("model", json::object()));
    const TrainConfig train = train_config_from_json(doc.value("train", json::object()));
    const Corpus corpus = corpus_from_config(doc.value("corpus", json::object()), base);
    fs::path output = doc.value("output", std::string("model.ckpt"));
    if (output.is_relative()) output = base / output;

    std::optional<Checkpoint> resume;
    if (!resume_path.empty()) resume = load_checkpoint(resume_path);
    const int log_every = doc.value("log_every", 50);
    const auto start = std::chrono::steady_clock::now();
    const TrainingResult result = run_training(train, model, corpus, resume, [&](const StepRecord& r) {
        if (log_every > 0 && (r.step % log_every == 0 || r.step == train.steps)) {
            const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
            std::printf("step %6lld  %s  loss %.5f  grad %.3f  %.0fs\n", r.step, r.foundation ? "base" : "ctrl", r.loss,
                        r.grad_norm, secs);
            std::fflush(stdout);
        }
    });
    save_checkpoint(output, result.checkpoint);
    std::cout << "saved " << output << " at step " << result.checkpoint.step << "\n";
    return 0;
}

int sample(const fs::path& checkpoint_path, const fs::path& request_path, const fs::path& out,
           const std::string& frames_dir) {
    const Checkpoint ckpt = load_checkpoint(checkpoint_path);
    const auto model = model_from_checkpoint(ckpt);
    const GenerationRequest request = request_from_json(parse_json(read_file(request_path)), request_path.parent_path());
    const GenerationResult result = sample_video(*model, request, guidance_flags(ckpt));
    write_clip_file(out, result.video.frames);
    if (!frames_dir.empty()) {
        fs::create_directories(frames_dir);
        for (int i = 0; i < result.video.length(); ++i) {
            char name[32];
            std::snprintf(name, sizeof(name), "frame_%03d.png", i);
            write_png(fs::path(frames_dir) / name, result.video.frame(i));
        }
    }
    std::cout << "wrote " << out << "\n";
    return 0;
}

int eval(const fs::path& checkpoint_path, const fs::path& corpus_dir, const fs::path& report_path,
         const EvalOptions& options) {
    const Checkpoint ckpt = load_checkpoint(checkpoint_path);
    const Corpus corpus = dataset_read(corpus_dir);
    const EvalSummary summary = evaluate(ckpt, corpus, options);
    write_file_atomic(report_path, to_json(summary).dump(2));
    std::printf("mean ObjMC %.4f px over %zu clips (checkpoint step %lld, config %s)\n", summary.mean_objmc,
                summary.clips.size(), summary.checkpoint_step, summary.config_hash.c_str());
    return 0;
}

int serve(const std::string& host, int port, const std::string& checkpoint_path, const ServiceConfig& config) {
    std::optional<Checkpoint> ckpt;
    if (!checkpoint_path.empty()) ckpt = load_checkpoint(checkpoint_path);
    else ckpt = checkpoint_from_environment();
    if (!ckpt) std::cerr << "drag-lab: no checkpoint loaded; service is degraded\n";
    GenerationService service(config, std::move(ckpt));
    httplib::Server server;
    service.mount(server);
    std::cout << "listening on " << host << ":" << port << "\n";
    if (!server.listen(host, port)) {
        std::cerr << "drag-lab: could not listen on " << host << ":" << port << "\n";
        return 1;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"drag-lab: trajectory-controlled video diffusion at desk scale"};
    app.require_subcommand(1);

    auto* gen = app.add_subcommand("gen-corpus", "Generate a synthetic moving-shapes corpus");
    std::string gen_out;
    int gen_count = 16;
    std::uint64_t gen_seed = 0;
    SceneSampler sampler;
    gen->add_option("--out", gen_out, "Output directory")->required();
    gen->add_option("--count", gen_count, "Number of clips");
    gen->add_option("--seed", gen_seed, "Base seed");
    gen->add_option("--frames", sampler.frames);
    gen->add_option("--height", sampler.height);
    gen->add_option("--width", sampler.width);
    gen->add_option("--min-shapes", sampler.min_shapes);
    gen->add_option("--max-shapes", sampler.max_shapes);

    auto* tr = app.add_subcommand("train", "Train a model from a JSON config");
    std::string train_config, train_resume;
    tr->add_option("--config", train_config, "Training config (JSON)")->required()->check(CLI::ExistingFile);
    tr->add_option("--resume", train_resume, "Checkpoint to continue from")->check(CLI::ExistingFile);

    auto* sm = app.add_subcommand("sample", "Generate a clip for a request");
    std::string sm_ckpt, sm_request, sm_out, sm_frames;
    sm->add_option("--checkpoint", sm_ckpt)->required()->check(CLI::ExistingFile);
    sm->add_option("--request", sm_request, "Request JSON")->required()->check(CLI::ExistingFile);
    sm->add_option("--out", sm_out, "Output clip (.drgl)")->required();
    sm->add_option("--frames-dir", sm_frames, "Also write PNG frames here");

    auto* ev = app.add_subcommand("eval", "Score a checkpoint on a corpus with ObjMC");
    std::string ev_ckpt, ev_corpus, ev_report;
    EvalOptions ev_options;
    ev->add_option("--checkpoint", ev_ckpt)->required()->check(CLI::ExistingFile);
    ev->add_option("--corpus", ev_corpus)->required()->check(CLI::ExistingDirectory);
    ev->add_option("--report", ev_report, "Report JSON")->required();
    ev->add_option("--steps", ev_options.sampler_steps, "Sampler steps (0 = full schedule)");
    ev->add_option("--seed", ev_options.seed);
    ev->add_option("--tolerance", ev_options.tolerance, "Tracker color tolerance");

    auto* sv = app.add_subcommand("serve", "Run the HTTP generation service");
    std::string sv_host = "127.0.0.1", sv_ckpt, sv_results = "drag-lab-results";
    int sv_port = 8080;
    int sv_ttl = 3600;
    ServiceConfig sv_config;
    sv->add_option("--port", sv_port);
    sv->add_option("--host", sv_host);
    sv->add_option("--checkpoint", sv_ckpt, "Overrides DRAG_LAB_CHECKPOINT");
    sv->add_option("--results-dir", sv_results);
    sv->add_option("--ttl", sv_ttl, "Seconds to keep finished jobs");
    sv->add_option("--steps", sv_config.default_steps, "Default sampler steps");

    CLI11_PARSE(app, argc, argv);
    try {
        if (*gen) return gen_corpus(gen_out, gen_count, gen_seed, sampler);
        if (*tr) return train(train_config, train_resume);
        if (*sm) return sample(sm_ckpt, sm_request, sm_out, sm_frames);
        if (*ev) return eval(ev_ckpt, ev_corpus, ev_report, ev_options);
        if (*sv) {
            sv_config.results_dir = sv_results;
            sv_config.result_ttl = std::chrono::seconds(sv_ttl);
            return serve(sv_host, sv_port, sv_ckpt, sv_config);
        }
    } catch (const std::exception& e) {
        std::cerr << "drag-lab: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
