#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>

#include <json.hpp>

#include "taskalloc/errors.hpp"
#include "taskalloc/service/feedback.hpp"
#include "taskalloc/service/registry.hpp"

namespace httplib {
class Server;
}

namespace taskalloc::service {

struct ServiceConfig {
    std::string host = "127.0.0.1";
    int port = 8080;
    std::filesystem::path registry_dir = "registry";
    std::filesystem::path feedback_log = "feedback.ndjson";
    std::size_t default_k = 3;
    /// Seed for training jobs whose hyperparameters do not name one.
    std::uint64_t seed = 42;

    /// Overrides fields from TASKALLOC_HOST, TASKALLOC_PORT,
    /// TASKALLOC_REGISTRY, TASKALLOC_FEEDBACK_LOG and TASKALLOC_DEFAULT_K.
    void apply_environment();
};

struct ApiResponse {
    int status = 200;
    /// Null for 204.
    nlohmann::json body;
};

enum class JobState { Queued, Running, Succeeded, Failed };

std::string_view job_state_name(JobState s) noexcept;

struct TrainingJob {
    std::string id;
    JobState state = JobState::Queued;
    std::string kind;
    std::string model_name;
    std::string created_at;
    std::string finished_at;
    nlohmann::json metrics = nlohmann::json::object();
    nlohmann::json error;

    nlohmann::json to_json() const;
};

/// The HTTP API. Handlers are plain functions over JSON so they can be
/// exercised without sockets; install() binds them to an httplib server.
class Service {
public:
    explicit Service(ServiceConfig config);
    ~Service();
    Service(const Service&) = delete;
    Service& operator=(const Service&) = delete;

    ApiResponse recommend(const std::string& body) const;
    ApiResponse feedback(const std::string& body);
    ApiResponse train(const std::string& body);
    ApiResponse job_status(const std::string& job_id) const;
    ApiResponse list_models() const;
    ApiResponse activate(const std::string& name);
    ApiResponse health() const;

    /// Blocks until the current training job (if any) has finished.
    void wait_for_training();

    void install(httplib::Server& server);

    ModelRegistry& registry() noexcept { return registry_; }
    FeedbackLog& feedback_log() noexcept { return feedback_; }
    const ServiceConfig& config() const noexcept { return config_; }

private:
    void run_job(std::string id, nlohmann::json request);

    ServiceConfig config_;
    ModelRegistry registry_;
    FeedbackLog feedback_;

    mutable std::mutex jobs_mutex_;
    std::map<std::string, TrainingJob> jobs_;
    std::size_t next_job_ = 1;
    bool job_active_ = false;
    std::thread worker_;
};

/// {code, message} body for an error.
nlohmann::json error_body(std::string_view code, const std::string& message);
/// HTTP status for a library error code.
int http_status(ErrorCode code) noexcept;

/// Runs the service until the process is stopped. Returns false when the
/// address cannot be bound.
bool serve(const ServiceConfig& config);

}  // namespace taskalloc::service
