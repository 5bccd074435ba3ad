#include <draglab/corpus.hpp>
#include <draglab/image_io.hpp>
#include <draglab/service.hpp>

#include <httplib.h>

#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <random>

namespace draglab {

using nlohmann::json;

const char* to_string(JobStatus status) {
    switch (status) {
        case JobStatus::queued: return "queued";
        case JobStatus::running: return "running";
        case JobStatus::done: return "done";
        case JobStatus::failed: return "failed";
    }
    return "unknown";
}

namespace {

HttpReply json_reply(int status, const json& body) { return {status, body.dump(), "application/json"}; }

HttpReply error_reply(int status, const std::string& message, const std::string& field = {}) {
    json body{{"error", message}};
    if (!field.empty()) body["field"] = field;
    return json_reply(status, body);
}

json trajectories_json(const std::vector<Trajectory>& ts) {
    json out = json::array();
    for (const auto& t : ts) {
        json points = json::array();
        for (const auto& p : t.points) points.push_back({p.x, p.y});
        out.push_back({{"id", t.entity_id}, {"points", points}});
    }
    return out;
}

std::filesystem::path frame_path(const std::filesystem::path& dir, const std::string& id, int index) {
    char name[32];
    std::snprintf(name, sizeof(name), "frame_%03d.png", index);
    return dir / id / name;
}

}  // namespace

GenerationService::GenerationService(ServiceConfig config, std::optional<Checkpoint> checkpoint)
    : config_(std::move(config)), checkpoint_(std::move(checkpoint)) {
    if (checkpoint_) {
        model_ = model_from_checkpoint(*checkpoint_);
        flags_ = guidance_flags(*checkpoint_);
        model_config_ = checkpoint_->model;
    }
    paused_ = config_.start_paused;
    id_salt_ = std::random_device{}();
    id_salt_ = (id_salt_ << 32) ^ static_cast<std::uint64_t>(std::chrono::steady_clock::now().time_since_epoch().count());
    worker_ = std::thread([this] { worker_loop(); });
}

GenerationService::~GenerationService() {
    {
        std::lock_guard lock(mutex_);
        stopping_ = true;
    }
    wake_.notify_all();
    if (worker_.joinable()) worker_.join();
}

HttpReply GenerationService::submit(std::string_view image_png, std::string_view annotation_json) {
    if (!model_) return error_reply(503, "no checkpoint loaded");
    if (image_png.size() + annotation_json.size() > config_.max_upload_bytes) {
        return error_reply(413, "upload exceeds " + std::to_string(config_.max_upload_bytes) + " bytes");
    }
    const auto& mc = model_config_;
    GenerationRequest request;
    std::string warning;
    try {
        const json doc = parse_json(annotation_json);
        if (!doc.is_object()) throw ValidationError("$", "annotation must be a JSON object");
        if (doc.contains("frames") && doc["frames"].is_number_integer() && doc["frames"].get<int>() != mc.frames) {
            throw ValidationError("frames", "must equal the clip length " + std::to_string(mc.frames));
        }
        if (doc.contains("width") && doc["width"].is_number_integer() && doc["width"].get<int>() != mc.width) {
            throw ValidationError("width", "must equal the model width " + std::to_string(mc.width));
        }
        if (doc.contains("height") && doc["height"].is_number_integer() && doc["height"].get<int>() != mc.height) {
            throw ValidationError("height", "must equal the model height " + std::to_string(mc.height));
        }
        const Annotation annotation = annotation_from_json(doc);
        Tensor image;
        try {
            image = decode_png(image_png);
        } catch (const ParseError& e) {
            throw ValidationError("image", e.what());
        }
        if (image.dim(0) != mc.height || image.dim(1) != mc.width) {
            warning = "image resized from " + std::to_string(image.dim(1)) + "x" + std::to_string(image.dim(0)) +
                      " to " + std::to_string(mc.width) + "x" + std::to_string(mc.height);
            image = resize_image(image, mc.height, mc.width);
        }
        request = request_from_annotation(annotation, std::move(image));
        request.steps = config_.default_steps;
        if (doc.contains("steps")) {
            if (!doc["steps"].is_number_integer() || doc["steps"].get<long long>() < 0) {
                throw ValidationError("steps", "expected a non-negative integer");
            }
            request.steps = doc["steps"].get<int>();
        }
        if (doc.contains("seed")) {
            if (!doc["seed"].is_number_integer()) throw ValidationError("seed", "expected an integer");
            request.seed = doc["seed"].get<std::uint64_t>();
        }
    } catch (const ValidationError& e) {
        return error_reply(400, e.what(), e.field());
    } catch (const ParseError& e) {
        return error_reply(400, e.what(), "annotation");
    } catch (const Error& e) {
        return error_reply(400, e.what(), "annotation");
    }

    auto job = std::make_shared<Job>();
    job->request = std::move(request);
    job->annotation_text = std::string(annotation_json);
    job->warning = warning;
    {
        std::lock_guard lock(mutex_);
        if (queue_.size() >= config_.queue_capacity) return error_reply(503, "job queue is full");
        char id[24];
        std::snprintf(id, sizeof(id), "%016llx",
                      static_cast<unsigned long long>(derive_seed(id_salt_, next_id_++)));
        job->id = id;
        jobs_[job->id] = job;
        queue_.push_back(job);
    }
    wake_.notify_all();
    json body{{"job_id", job->id}, {"status", "queued"}};
    if (!warning.empty()) body["warning"] = warning;
    return json_reply(202, body);
}

HttpReply GenerationService::job(const std::string& id) const {
    std::lock_guard lock(mutex_);
    auto it = jobs_.find(id);
    if (it == jobs_.end()) return error_reply(404, "unknown job '" + id + "'");
    const Job& j = *it->second;
    json body{{"id", j.id}, {"status", to_string(j.status)}};
    if (!j.warning.empty()) body["warning"] = j.warning;
    if (j.status == JobStatus::failed) body["error"] = j.error;
    if (j.status == JobStatus::done) {
        json frames = json::array();
        for (int i = 0; i < j.frame_count; ++i) {
            frames.push_back("/api/jobs/" + j.id + "/frames/" + std::to_string(i) + ".png");
        }
        body["frames"] = frames;
        body["requested"] = trajectories_json(j.requested);
        body["tracked"] = trajectories_json(j.tracked);
        json per = json::array();
        for (const auto& e : j.report.entities) per.push_back({{"id", e.entity_id}, {"objmc", e.objmc}});
        body["objmc"] = {{"mean", j.report.mean_objmc}, {"entities", per}};
    }
    // The annotation is spliced in verbatim so submitted coordinates come back byte for byte.
    std::string text = body.dump();
    text.pop_back();
    text += ",\"annotation\":";
    text += j.annotation_text;
    text += "}";
    return {200, std::move(text), "application/json"};
}

HttpReply GenerationService::frame(const std::string& id, int index) const {
    {
        std::lock_guard lock(mutex_);
        auto it = jobs_.find(id);
        if (it == jobs_.end()) return error_reply(404, "unknown job '" + id + "'");
        if (it->second->status != JobStatus::done) return error_reply(404, "job '" + id + "' has no frames");
        if (index < 0 || index >= it->second->frame_count) return error_reply(404, "frame index out of range");
    }
    try {
        return {200, read_file(frame_path(config_.results_dir, id, index)), "image/png"};
    } catch (const Error&) {
        return error_reply(404, "frame file missing");
    }
}

HttpReply GenerationService::config() const {
    const ModelConfig& mc = model_config_;
    return json_reply(200, {{"frames", mc.frames},
                            {"height", mc.height},
                            {"width", mc.width},
                            {"sampler_steps", config_.default_steps},
                            {"schedule_steps", mc.schedule_steps},
                            {"queue_capacity", config_.queue_capacity},
                            {"max_upload_bytes", config_.max_upload_bytes},
                            {"use_entity", flags_.use_entity},
                            {"use_gaussian", flags_.use_gaussian}});
}

HttpReply GenerationService::health() const {
    if (!checkpoint_) return json_reply(200, {{"status", "degraded"}, {"checkpoint_step", nullptr}});
    return json_reply(200, {{"status", "ok"}, {"checkpoint_step", checkpoint_->step}});
}

void GenerationService::mount(httplib::Server& server) {
    auto send = [](httplib::Response& res, const HttpReply& r) {
        res.status = r.status;
        res.set_content(r.body, r.content_type);
    };
    server.set_payload_max_length(config_.max_upload_bytes);
    server.Post("/api/generate", [this, send](const httplib::Request& req, httplib::Response& res) {
        if (!req.is_multipart_form_data()) return send(res, error_reply(400, "expected multipart/form-data"));
        if (!req.has_file("image")) return send(res, error_reply(400, "missing part", "image"));
        if (!req.has_file("annotation")) return send(res, error_reply(400, "missing part", "annotation"));
        send(res, submit(req.get_file_value("image").content, req.get_file_value("annotation").content));
    });
    server.Get(R"(/api/jobs/([0-9a-f]+))", [this, send](const httplib::Request& req, httplib::Response& res) {
        send(res, job(req.matches[1]));
    });
    server.Get(R"(/api/jobs/([0-9a-f]+)/frames/(\d+)\.png)",
               [this, send](const httplib::Request& req, httplib::Response& res) {
                   send(res, frame(req.matches[1], std::stoi(req.matches[2])));
               });
    server.Get("/api/config", [this, send](const httplib::Request&, httplib::Response& res) { send(res, config()); });
    server.Get("/api/health", [this, send](const httplib::Request&, httplib::Response& res) { send(res, health()); });
}

void GenerationService::pause() {
    std::lock_guard lock(mutex_);
    paused_ = true;
}

void GenerationService::resume() {
    {
        std::lock_guard lock(mutex_);
        paused_ = false;
    }
    wake_.notify_all();
}

void GenerationService::wait_idle() {
    std::unique_lock lock(mutex_);
    idle_.wait(lock, [this] { return (queue_.empty() || paused_) && !running_job_; });
}

std::size_t GenerationService::collect_garbage(std::chrono::steady_clock::time_point now) {
    std::vector<std::string> removed;
    {
        std::lock_guard lock(mutex_);
        for (auto it = jobs_.begin(); it != jobs_.end();) {
            const Job& j = *it->second;
            const bool finished = j.status == JobStatus::done || j.status == JobStatus::failed;
            if (finished && now - j.finished_at >= config_.result_ttl) {
                removed.push_back(it->first);
                it = jobs_.erase(it);
            } else {
                ++it;
            }
        }
    }
    for (const auto& id : removed) {
        std::error_code ec;
        std::filesystem::remove_all(config_.results_dir / id, ec);
    }
    return removed.size();
}

void GenerationService::worker_loop() {
    for (;;) {
        std::shared_ptr<Job> job;
        {
            std::unique_lock lock(mutex_);
            wake_.wait_for(lock, std::chrono::seconds(1),
                           [this] { return stopping_ || (!paused_ && !queue_.empty()); });
            if (stopping_) return;
            if (!paused_ && !queue_.empty()) {
                job = queue_.front();
                queue_.pop_front();
                job->status = JobStatus::running;
                running_job_ = true;
            }
        }
        if (job) {
            run_job(job);
            {
                std::lock_guard lock(mutex_);
                running_job_ = false;
            }
            idle_.notify_all();
        }
        collect_garbage();
    }
}

void GenerationService::run_job(const std::shared_ptr<Job>& job) {
    Job result;
    try {
        const GenerationResult out = sample_video(*model_, job->request, flags_);
        const std::filesystem::path dir = config_.results_dir / job->id;
        std::filesystem::create_directories(dir);
        for (int i = 0; i < out.video.length(); ++i) write_png(frame_path(config_.results_dir, job->id, i), out.video.frame(i));
        result.frame_count = out.video.length();
        result.requested = out.trajectories;
        for (const auto& e : job->request.entities) {
            result.tracked.push_back(track_centroid(out.video, e.mask, kDefaultColorTolerance, &job->request.first_frame));
        }
        result.report = objmc(result.tracked, result.requested);
        result.status = JobStatus::done;
    } catch (const std::exception& e) {
        result.status = JobStatus::failed;
        result.error = e.what();
    }
    std::lock_guard lock(mutex_);
    job->status = result.status;
    job->error = result.error;
    job->frame_count = result.status == JobStatus::done ? result.frame_count : 0;
    job->requested = std::move(result.requested);
    job->tracked = std::move(result.tracked);
    job->report = std::move(result.report);
    job->finished_at = std::chrono::steady_clock::now();
}

std::optional<Checkpoint> checkpoint_from_environment() {
    const char* path = std::getenv("DRAG_LAB_CHECKPOINT");
    if (!path || !*path) return std::nullopt;
    try {
        return load_checkpoint(path);
    } catch (const Error& e) {
        std::cerr << "drag-lab: could not load checkpoint " << path << ": " << e.what() << "\n";
        return std::nullopt;
    }
}

}  // namespace draglab
