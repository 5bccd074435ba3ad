#pragma once

#include <draglab/checkpoint.hpp>
#include <draglab/sampling.hpp>
#include <draglab/tracking.hpp>

#include <chrono>
#include <condition_variable>
#include <deque>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>

namespace httplib {
class Server;
}

namespace draglab {

struct ServiceConfig {
    std::size_t queue_capacity = 8;
    std::chrono::seconds result_ttl{3600};
    std::filesystem::path results_dir = "drag-lab-results";
    std::size_t max_upload_bytes = 8u << 20;
    /// Sampler steps used when a request does not set "steps".
    int default_steps = 50;
    /// Start with the worker paused (jobs stay queued until resume()).
    bool start_paused = false;
};

enum class JobStatus { queued, running, done, failed };
const char* to_string(JobStatus status);

struct Job {
    std::string id;
    JobStatus status = JobStatus::queued;
    GenerationRequest request;
    /// Annotation text exactly as submitted.
    std::string annotation_text;
    std::string warning;
    std::string error;
    int frame_count = 0;
    std::vector<Trajectory> requested;
    std::vector<Trajectory> tracked;
    EvalReport report;
    std::chrono::steady_clock::time_point finished_at;
};

struct HttpReply {
    int status = 200;
    std::string body;
    std::string content_type = "application/json";
};

/// Job queue plus a single worker that owns the model. Handlers are plain
/// functions so they can be exercised without sockets; mount() wires them
/// onto an httplib server.
class GenerationService {
public:
    GenerationService(ServiceConfig config, std::optional<Checkpoint> checkpoint);
    ~GenerationService();
    GenerationService(const GenerationService&) = delete;
    GenerationService& operator=(const GenerationService&) = delete;

    HttpReply submit(std::string_view image_png, std::string_view annotation_json);
    HttpReply job(const std::string& id) const;
    HttpReply frame(const std::string& id, int index) const;
    HttpReply config() const;
    HttpReply health() const;

    void mount(httplib::Server& server);

    void pause();
    void resume();
    /// Blocks until no job is queued or running.
    void wait_idle();
    /// Drops finished jobs older than the TTL; returns how many were removed.
    std::size_t collect_garbage(std::chrono::steady_clock::time_point now = std::chrono::steady_clock::now());

private:
    void worker_loop();
    void run_job(const std::shared_ptr<Job>& job);

    ServiceConfig config_;
    std::optional<Checkpoint> checkpoint_;
    std::unique_ptr<DragModel> model_;
    GuidanceFlags flags_;
    ModelConfig model_config_;

    mutable std::mutex mutex_;
    std::condition_variable wake_;
    std::condition_variable idle_;
    std::map<std::string, std::shared_ptr<Job>> jobs_;
    std::deque<std::shared_ptr<Job>> queue_;
    bool running_job_ = false;
    bool paused_ = false;
    bool stopping_ = false;
    std::uint64_t next_id_ = 0;
    std::uint64_t id_salt_ = 0;
    std::thread worker_;
};

/// Reads DRAG_LAB_CHECKPOINT if set. Load failures are reported on stderr
/// and leave the service degraded.
std::optional<Checkpoint> checkpoint_from_environment();

}  // namespace draglab
