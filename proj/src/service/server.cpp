#include "taskalloc/service/server.hpp"

#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <sstream>
#include <variant>

#include <httplib.h>

#include "taskalloc/corpus.hpp"
#include "taskalloc/eval.hpp"
#include "taskalloc/models/persistence.hpp"
#include "taskalloc/recommender.hpp"

namespace taskalloc::service {

namespace {

std::optional<std::string> env(const char* name) {
    const char* v = std::getenv(name);
    if (!v || !*v) return std::nullopt;
    return std::string(v);
}

ApiResponse fail(ErrorCode code, const std::string& message) {
    return {http_status(code), error_body(error_code_name(code), message)};
}

ApiResponse fail(const Error& e) { return fail(e.code(), e.detail()); }

/// Parses a request body as a JSON object or returns a 400 response.
std::variant<nlohmann::json, ApiResponse> parse_object(const std::string& body) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(body);
    } catch (const nlohmann::json::exception& e) {
        return fail(ErrorCode::MalformedRequest, std::string("body is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) return fail(ErrorCode::MalformedRequest, "body must be a JSON object");
    return j;
}

std::string corpus_digest(const corpus::Corpus& c) {
    std::ostringstream out;
    corpus::write_csv(out, c);
    return hex64(models::fnv1a64(out.str()));
}

}  // namespace

nlohmann::json error_body(std::string_view code, const std::string& message) {
    return {{"code", std::string(code)}, {"message", message}};
}

int http_status(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::NoActiveModel: return 503;
        case ErrorCode::EmptyTitleAfterCleaning: return 422;
        case ErrorCode::TrainingBusy:
        case ErrorCode::DuplicateModel: return 409;
        case ErrorCode::UnknownModel:
        case ErrorCode::UnknownJob: return 404;
        case ErrorCode::MalformedRequest:
        case ErrorCode::InvalidArgument:
        case ErrorCode::UnknownRole:
        case ErrorCode::EmptyProjectRoles: return 400;
        default: return 500;
    }
}

namespace {

std::uint64_t env_number(const char* name, const std::string& text, std::uint64_t lo, std::uint64_t hi) {
    std::uint64_t v = 0;
    const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc{} || end != text.data() + text.size() || v < lo || v > hi) {
        throw Error(ErrorCode::InvalidArgument, std::string(name) + " must be an integer in [" + std::to_string(lo) +
                                                    ", " + std::to_string(hi) + "], got '" + text + "'");
    }
    return v;
}

}  // namespace

void ServiceConfig::apply_environment() {
    if (auto v = env("TASKALLOC_HOST")) host = *v;
    if (auto v = env("TASKALLOC_PORT")) port = static_cast<int>(env_number("TASKALLOC_PORT", *v, 0, 65535));
    if (auto v = env("TASKALLOC_REGISTRY")) registry_dir = *v;
    if (auto v = env("TASKALLOC_FEEDBACK_LOG")) feedback_log = *v;
    if (auto v = env("TASKALLOC_DEFAULT_K")) default_k = env_number("TASKALLOC_DEFAULT_K", *v, 1, kRoleCount);
}

std::string_view job_state_name(JobState s) noexcept {
    switch (s) {
        case JobState::Queued: return "queued";
        case JobState::Running: return "running";
        case JobState::Succeeded: return "succeeded";
        case JobState::Failed: return "failed";
    }
    return "?";
}

nlohmann::json TrainingJob::to_json() const {
    nlohmann::json j = {{"job_id", id},
                        {"status", std::string(job_state_name(state))},
                        {"kind", kind},
                        {"model_name", model_name},
                        {"created_at", created_at},
                        {"metrics", metrics}};
    if (!finished_at.empty()) j["finished_at"] = finished_at;
    if (!error.is_null()) j["error"] = error;
    return j;
}

Service::Service(ServiceConfig config)
    : config_(std::move(config)), registry_(config_.registry_dir), feedback_(config_.feedback_log) {}

Service::~Service() { wait_for_training(); }

void Service::wait_for_training() {
    std::thread t;
    {
        std::lock_guard lock(jobs_mutex_);
        t = std::move(worker_);
    }
    if (t.joinable()) t.join();
}

ApiResponse Service::recommend(const std::string& body) const {
    auto parsed = parse_object(body);
    if (auto* r = std::get_if<ApiResponse>(&parsed)) return *r;
    const auto& j = std::get<nlohmann::json>(parsed);

    if (!j.contains("project_id") || !j["project_id"].is_string()) {
        return fail(ErrorCode::MalformedRequest, "'project_id' must be a string");
    }
    if (!j.contains("title") || !j["title"].is_string() || j["title"].get<std::string>().empty()) {
        return fail(ErrorCode::MalformedRequest, "'title' must be a non-empty string");
    }
    std::size_t k = config_.default_k;
    if (j.contains("k") && !j["k"].is_null()) {
        if (!j["k"].is_number_integer() || j["k"].get<std::int64_t>() < 1) {
            return fail(ErrorCode::MalformedRequest, "'k' must be a positive integer");
        }
        k = j["k"].get<std::size_t>();
    }

    const auto active = registry_.active();
    if (!active) return fail(ErrorCode::NoActiveModel, "no model has been trained or activated yet");

    const auto project_id = j["project_id"].get<std::string>();
    const auto& known = active->model.project_roles();
    const auto it = known.find(project_id);
    const bool unknown_project = it == known.end();
    const RoleSet roles = unknown_project ? RoleSet::all() : it->second;

    try {
        const auto rec = recommender::recommend_top_k(active->model, j["title"].get<std::string>(), roles, k);
        auto alternatives = nlohmann::json::array();
        for (const auto& r : rec.ranked) {
            alternatives.push_back({{"role", std::string(role_name(r.role))}, {"confidence", r.confidence}});
        }
        return {200,
                {{"project_id", project_id},
                 {"chosen", std::string(role_name(rec.chosen))},
                 {"fallback_applied", rec.fallback_applied},
                 {"alternatives", alternatives},
                 {"model_version", active->info.version()},
                 {"model_kind", std::string(models::kind_name(rec.model_kind))},
                 {"unknown_project", unknown_project}}};
    } catch (const Error& e) {
        return fail(e);
    }
}

ApiResponse Service::feedback(const std::string& body) {
    auto parsed = parse_object(body);
    if (auto* r = std::get_if<ApiResponse>(&parsed)) return *r;
    try {
        auto event = FeedbackEvent::from_json(std::get<nlohmann::json>(parsed));
        if (event.timestamp.empty()) event.timestamp = utc_timestamp();
        feedback_.append(event);
        return {204, nullptr};
    } catch (const Error& e) {
        return fail(e);
    }
}

ApiResponse Service::train(const std::string& body) {
    auto parsed = parse_object(body);
    if (auto* r = std::get_if<ApiResponse>(&parsed)) return *r;
    auto j = std::get<nlohmann::json>(parsed);

    if (!j.contains("corpus") || !j["corpus"].is_string()) {
        return fail(ErrorCode::MalformedRequest, "'corpus' must be a path string");
    }
    if (!std::filesystem::exists(j["corpus"].get<std::string>())) {
        return fail(ErrorCode::InvalidArgument, "corpus '" + j["corpus"].get<std::string>() + "' does not exist");
    }
    if (!j.contains("kind") || !j["kind"].is_string() || !models::parse_kind(j["kind"].get<std::string>())) {
        return fail(ErrorCode::InvalidArgument, "'kind' must be one of mnb, lr, svc, cs, rf, lstm, cnn");
    }
    try {
        const auto hp = models::Hyperparameters::from_json(j.value("hyperparameters", nlohmann::json::object()));
        hp.validate();
    } catch (const Error& e) {
        return fail(e);
    }
    if (j.contains("name") && !j["name"].is_string()) return fail(ErrorCode::MalformedRequest, "'name' must be a string");
    if (j.contains("name") && registry_.contains(j["name"].get<std::string>())) {
        return fail(ErrorCode::DuplicateModel, "model '" + j["name"].get<std::string>() + "' already exists");
    }
    if (j.contains("train_fraction")) {
        const auto& f = j["train_fraction"];
        if (!f.is_number() || !(f.get<double>() > 0.0 && f.get<double>() < 1.0)) {
            return fail(ErrorCode::MalformedRequest, "'train_fraction' must be a number in (0, 1)");
        }
    }

    std::lock_guard lock(jobs_mutex_);
    if (job_active_) return fail(ErrorCode::TrainingBusy, "a training job is already running");
    if (worker_.joinable()) worker_.join();

    TrainingJob job;
    job.id = "job-" + std::to_string(next_job_++);
    job.kind = std::string(models::kind_name(*models::parse_kind(j["kind"].get<std::string>())));
    job.created_at = utc_timestamp();
    if (j.contains("name")) {
        job.model_name = j["name"].get<std::string>();
    } else {
        job.model_name = job.kind + "-" + job.id;
        for (int suffix = 2; registry_.contains(job.model_name); ++suffix) {
            job.model_name = job.kind + "-" + job.id + "-" + std::to_string(suffix);
        }
    }
    jobs_[job.id] = job;
    job_active_ = true;
    worker_ = std::thread(&Service::run_job, this, job.id, std::move(j));
    return {202, job.to_json()};
}

void Service::run_job(std::string id, nlohmann::json request) {
    const auto update = [&](auto&& fn) {
        std::lock_guard lock(jobs_mutex_);
        fn(jobs_.at(id));
    };
    update([](TrainingJob& job) { job.state = JobState::Running; });
    std::string model_name;
    update([&](TrainingJob& job) { model_name = job.model_name; });

    try {
        const auto kind = *models::parse_kind(request["kind"].get<std::string>());
        auto hp_json = request.value("hyperparameters", nlohmann::json::object());
        if (!hp_json.contains("seed")) hp_json["seed"] = config_.seed;
        const auto hp = models::Hyperparameters::from_json(hp_json);
        const double fraction = request.value("train_fraction", 0.67);
        std::optional<std::filesystem::path> embeddings;
        if (request.contains("embeddings") && request["embeddings"].is_string()) {
            embeddings = request["embeddings"].get<std::string>();
        }

        const auto all = corpus::load_corpus(request["corpus"].get<std::string>());
        const auto [train, validation] = corpus::split_train_validation(all, fraction, hp.seed);
        auto model = models::train_model(kind, train, hp, embeddings);
        // Project role sets come from the whole corpus so no project loses roles to the split.
        model.set_project_roles(corpus::all_project_roles(all));

        nlohmann::json metrics = {{"train_size", train.size()}, {"validation_size", validation.size()}};
        if (!validation.empty()) {
            const auto result = eval::evaluate_holdout(model, validation);
            metrics["validation_accuracy"] = result.accuracy;
            if (result.loss) metrics["validation_loss"] = *result.loss;
        }
        metrics["epochs"] = model.history().size();
        registry_.add(model_name, model, corpus_digest(all), metrics, request.value("activate", true));
        update([&](TrainingJob& job) {
            job.state = JobState::Succeeded;
            job.metrics = metrics;
        });
    } catch (const Error& e) {
        update([&](TrainingJob& job) {
            job.state = JobState::Failed;
            job.error = error_body(error_code_name(e.code()), e.detail());
        });
    } catch (const std::exception& e) {
        update([&](TrainingJob& job) {
            job.state = JobState::Failed;
            job.error = error_body("Internal", e.what());
        });
    }
    std::lock_guard lock(jobs_mutex_);
    jobs_.at(id).finished_at = utc_timestamp();
    job_active_ = false;
}

ApiResponse Service::job_status(const std::string& job_id) const {
    std::lock_guard lock(jobs_mutex_);
    const auto it = jobs_.find(job_id);
    if (it == jobs_.end()) return fail(ErrorCode::UnknownJob, "no training job '" + job_id + "'");
    return {200, it->second.to_json()};
}

ApiResponse Service::list_models() const {
    auto arr = nlohmann::json::array();
    for (const auto& info : registry_.list()) arr.push_back(info.to_json());
    const auto active = registry_.active_name();
    return {200, {{"active", active ? nlohmann::json(*active) : nlohmann::json(nullptr)}, {"models", arr}}};
}

ApiResponse Service::activate(const std::string& name) {
    try {
        registry_.activate(name);
        const auto active = registry_.active();
        return {200, {{"active", active->info.name}, {"model_version", active->info.version()}}};
    } catch (const Error& e) {
        return fail(e);
    }
}

ApiResponse Service::health() const {
    const auto active = registry_.active();
    bool training = false;
    {
        std::lock_guard lock(jobs_mutex_);
        training = job_active_;
    }
    return {200,
            {{"status", "ok"},
             {"active_model", active ? nlohmann::json(active->info.name) : nlohmann::json(nullptr)},
             {"model_version", active ? nlohmann::json(active->info.version()) : nlohmann::json(nullptr)},
             {"training", training},
             {"feedback", feedback_.counters().to_json()}}};
}

void Service::install(httplib::Server& server) {
    const auto reply = [](httplib::Response& res, const ApiResponse& r) {
        res.status = r.status;
        if (r.status != 204) res.set_content(r.body.dump(), "application/json");
    };
    server.set_default_headers({{"Access-Control-Allow-Origin", "*"}});
    server.Options(R"(/api/.*)", [](const httplib::Request&, httplib::Response& res) {
        res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
        res.set_header("Access-Control-Allow-Headers", "Content-Type");
        res.status = 204;
    });
    server.Post("/api/recommend",
                [this, reply](const httplib::Request& req, httplib::Response& res) { reply(res, recommend(req.body)); });
    server.Post("/api/feedback",
                [this, reply](const httplib::Request& req, httplib::Response& res) { reply(res, feedback(req.body)); });
    server.Post("/api/train",
                [this, reply](const httplib::Request& req, httplib::Response& res) { reply(res, train(req.body)); });
    server.Get(R"(/api/train/([^/]+))", [this, reply](const httplib::Request& req, httplib::Response& res) {
        reply(res, job_status(req.matches[1]));
    });
    server.Get("/api/models",
               [this, reply](const httplib::Request&, httplib::Response& res) { reply(res, list_models()); });
    server.Post(R"(/api/models/([^/]+)/activate)", [this, reply](const httplib::Request& req, httplib::Response& res) {
        reply(res, activate(req.matches[1]));
    });
    server.Get("/api/health", [this, reply](const httplib::Request&, httplib::Response& res) { reply(res, health()); });
    server.set_exception_handler([reply](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
        std::string what = "unexpected server error";
        try {
            std::rethrow_exception(ep);
        } catch (const std::exception& e) {
            what = e.what();
        } catch (...) {
        }
        reply(res, {500, error_body("Internal", what)});
    });
}

bool serve(const ServiceConfig& config) {
    Service service(config);
    httplib::Server server;
    service.install(server);
    int port = config.port;
    if (port == 0) {
        port = server.bind_to_any_port(config.host);
    } else if (!server.bind_to_port(config.host, port)) {
        return false;
    }
    if (port < 0) return false;
    std::printf("listening on http://%s:%d\n", config.host.c_str(), port);
    std::fflush(stdout);
    return server.listen_after_bind();
}

}  // namespace taskalloc::service
