#include <doctest.h>

#include <httplib.h>

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <set>
#include <thread>

#include "fixtures.hpp"
#include "taskalloc/errors.hpp"
#include "taskalloc/models/model.hpp"
#include "taskalloc/service/feedback.hpp"
#include "taskalloc/service/registry.hpp"
#include "taskalloc/service/server.hpp"

using namespace taskalloc;
using namespace taskalloc::service;
using nlohmann::json;

namespace {

// Every request and response body seen here is also written out for the
// schema check that runs after this binary.
const std::filesystem::path& sample_dir() {
    static const std::filesystem::path dir = [] {
        const std::filesystem::path d = TASKALLOC_WIRE_SAMPLES;
        std::filesystem::remove_all(d);
        std::filesystem::create_directories(d / "invalid");
        return d;
    }();
    return dir;
}

void capture(const std::string& schema, const std::string& tag, const json& body) {
    std::ofstream(sample_dir() / (schema + "--" + tag + ".json")) << body.dump(2);
}

// Bodies the schema must reject.
void capture_invalid(const std::string& schema, const std::string& tag, const json& body) {
    std::ofstream(sample_dir() / "invalid" / (schema + "--" + tag + ".json")) << body.dump(2);
}

const models::TrainedModel& fixture_model(models::ModelKind kind = models::ModelKind::MNB) {
    static std::map<models::ModelKind, models::TrainedModel> cache;
    auto it = cache.find(kind);
    if (it == cache.end()) {
        models::Hyperparameters hp;
        hp.trees = 10;
        it = cache.emplace(kind, models::train_model(kind, testing::fixture_corpus(), hp)).first;
    }
    return it->second;
}

struct Env {
    testing::TempDir dir{"service"};
    ServiceConfig config() const {
        ServiceConfig c;
        c.registry_dir = dir / "registry";
        c.feedback_log = dir / "feedback.ndjson";
        c.port = 0;
        return c;
    }
};

std::size_t line_count(const std::filesystem::path& p) {
    std::ifstream in(p);
    std::size_t n = 0;
    std::string line;
    while (std::getline(in, line)) n += !line.empty();
    return n;
}

ApiResponse wait_for_job(Service& s, const std::string& id) {
    s.wait_for_training();
    return s.job_status(id);
}

json recommend_body(const std::string& project, const std::string& title, std::optional<int> k = {}) {
    json j = {{"project_id", project}, {"title", title}};
    if (k) j["k"] = *k;
    return j;
}

}  // namespace

TEST_CASE("error codes map to HTTP statuses") {
    CHECK(http_status(ErrorCode::NoActiveModel) == 503);
    CHECK(http_status(ErrorCode::EmptyTitleAfterCleaning) == 422);
    CHECK(http_status(ErrorCode::TrainingBusy) == 409);
    CHECK(http_status(ErrorCode::DuplicateModel) == 409);
    CHECK(http_status(ErrorCode::UnknownModel) == 404);
    CHECK(http_status(ErrorCode::UnknownJob) == 404);
    CHECK(http_status(ErrorCode::MalformedRequest) == 400);
    CHECK(http_status(ErrorCode::InvalidArgument) == 400);
    CHECK(http_status(ErrorCode::CorruptContainer) == 500);
    CHECK(error_body("X", "y") == json{{"code", "X"}, {"message", "y"}});
}

TEST_CASE("configuration reads the environment") {
    ::setenv("TASKALLOC_PORT", "9123", 1);
    ::setenv("TASKALLOC_DEFAULT_K", "5", 1);
    ::setenv("TASKALLOC_REGISTRY", "/tmp/somewhere", 1);
    ServiceConfig c;
    c.apply_environment();
    CHECK(c.port == 9123);
    CHECK(c.default_k == 5);
    CHECK(c.registry_dir == "/tmp/somewhere");
    ::unsetenv("TASKALLOC_PORT");
    ::unsetenv("TASKALLOC_DEFAULT_K");
    ::unsetenv("TASKALLOC_REGISTRY");
    ::setenv("TASKALLOC_PORT", "not-a-port", 1);
    ServiceConfig bad;
    CHECK_THROWS_AS(bad.apply_environment(), Error);
    ::unsetenv("TASKALLOC_PORT");
}

TEST_CASE("recommend before any model is 503") {
    Env env;
    Service s(env.config());
    const auto body = recommend_body("221277", "Fix login css");
    capture("recommend_request", "basic", body);
    const auto r = s.recommend(body.dump());
    CHECK(r.status == 503);
    CHECK(r.body["code"] == "NoActiveModel");
    capture("error", "no-model", r.body);

    const auto h = s.health();
    CHECK(h.body["active_model"].is_null());
    capture("health", "empty", h.body);
    capture("models", "empty", s.list_models().body);
}

TEST_CASE("recommend against an active model") {
    Env env;
    Service s(env.config());
    s.registry().add("mnb-1", fixture_model(), "digest", json::object(), true);

    const auto r = s.recommend(recommend_body("221277", "Fix login css").dump());
    REQUIRE(r.status == 200);
    capture("recommend_response", "default-k", r.body);
    CHECK(r.body["alternatives"].size() == 3);
    CHECK(r.body["alternatives"][0]["role"] == r.body["chosen"]);
    CHECK(r.body["unknown_project"] == false);
    CHECK(r.body["model_kind"] == "mnb");
    CHECK(r.body["model_version"] == s.registry().active()->info.version());

    const auto k1 = recommend_body("221277", "Write the release announcement", 1);
    capture("recommend_request", "k1", k1);
    CHECK(s.recommend(k1.dump()).body["alternatives"].size() == 1);

    const auto narrow = s.recommend(recommend_body("66937", "Fix login css", 7).dump());
    REQUIRE(narrow.status == 200);
    capture("recommend_response", "narrow-project", narrow.body);
    CHECK(narrow.body["alternatives"].size() == 4);
    const std::set<std::string> allowed{"BackEndDeveloper", "Developer", "ProductOwner", "TeamCatalyst"};
    CHECK(allowed.count(narrow.body["chosen"].get<std::string>()) == 1);

    const auto unknown = s.recommend(recommend_body("nope", "Fix login css", 7).dump());
    REQUIRE(unknown.status == 200);
    capture("recommend_response", "unknown-project", unknown.body);
    CHECK(unknown.body["unknown_project"] == true);
    CHECK(unknown.body["alternatives"].size() == 7);
    CHECK(unknown.body["fallback_applied"] == false);
}

TEST_CASE("recommend rejects bad input") {
    Env env;
    Service s(env.config());
    s.registry().add("mnb-1", fixture_model(), "digest", json::object(), true);

    const auto empty = s.recommend(recommend_body("221277", "the of and !!").dump());
    CHECK(empty.status == 422);
    CHECK(empty.body["code"] == "EmptyTitleAfterCleaning");
    capture("error", "empty-title", empty.body);

    for (const std::string bad : {"not json", "[]", R"({"title":"x"})", R"({"project_id":"1","title":""})",
                                  R"({"project_id":"1","title":"x","k":0})", R"({"project_id":1,"title":"x"})"}) {
        CAPTURE(bad);
        const auto r = s.recommend(bad);
        CHECK(r.status == 400);
        CHECK(r.body["code"] == "MalformedRequest");
    }
    capture("error", "malformed", s.recommend("not json").body);
    capture_invalid("recommend_request", "zero-k", json{{"project_id", "1"}, {"title", "x"}, {"k", 0}});
    auto wrong = s.recommend(recommend_body("221277", "Fix login css").dump()).body;
    wrong["chosen"] = "Wizard";
    capture_invalid("recommend_response", "unknown-role", wrong);
}

TEST_CASE("feedback is logged, validated and replayed") {
    Env env;
    const auto cfg = env.config();
    FeedbackCounters before_restart;
    {
        Service s(cfg);
        const json accept = {{"project_id", "221277"},     {"title", "Fix login css"},
                             {"recommended_role", "FrontEndDeveloper"}, {"accepted", true},
                             {"model_version", "mnb-1@0011223344556677"}};
        capture("feedback_request", "accept", accept);
        CHECK(s.feedback(accept.dump()).status == 204);
        CHECK(line_count(cfg.feedback_log) == 1);

        json override_event = accept;
        override_event["accepted"] = false;
        override_event["override_role"] = "Developer";
        override_event["timestamp"] = "2026-01-02T03:04:05Z";
        capture("feedback_request", "override", override_event);
        CHECK(s.feedback(override_event.dump()).status == 204);
        CHECK(line_count(cfg.feedback_log) == 2);

        json contradictory = accept;
        contradictory["override_role"] = "Developer";
        capture_invalid("feedback_request", "contradiction", contradictory);
        const auto r = s.feedback(contradictory.dump());
        CHECK(r.status == 400);
        capture("error", "feedback-contradiction", r.body);
        json missing = override_event;
        missing.erase("override_role");
        capture_invalid("feedback_request", "missing-override", missing);
        CHECK(s.feedback(missing.dump()).status == 400);
        json bad_role = accept;
        bad_role["recommended_role"] = "Wizard";
        CHECK(s.feedback(bad_role.dump()).status == 400);
        CHECK(line_count(cfg.feedback_log) == 2);

        const auto counters = s.feedback_log().counters();
        CHECK(counters.total == 2);
        CHECK(counters.accepted == 1);
        CHECK(counters.overridden == 1);
        CHECK(counters.corrections.at("FrontEndDeveloper->Developer") == 1);
        CHECK(FeedbackLog::replay(cfg.feedback_log) == counters);
        before_restart = counters;
        capture("health", "with-feedback", s.health().body);
    }
    Service again(cfg);
    CHECK(again.feedback_log().counters() == before_restart);
}

TEST_CASE("feedback appends are serialized under concurrency") {
    Env env;
    const auto cfg = env.config();
    Service s(cfg);
    std::vector<std::thread> threads;
    for (int t = 0; t < 8; ++t) {
        threads.emplace_back([&, t] {
            for (int i = 0; i < 25; ++i) {
                const json e = {{"project_id", "p"},
                                {"title", "task " + std::to_string(t) + "-" + std::to_string(i)},
                                {"recommended_role", "Developer"},
                                {"accepted", i % 2 == 0},
                                {"model_version", "v"}};
                json body = e;
                if (i % 2) body["override_role"] = "Content";
                s.feedback(body.dump());
            }
        });
    }
    for (auto& t : threads) t.join();
    CHECK(line_count(cfg.feedback_log) == 200);
    CHECK(FeedbackLog::replay(cfg.feedback_log) == s.feedback_log().counters());
    CHECK(s.feedback_log().counters().overridden == 96);
    CHECK(s.feedback_log().counters().accepted == 104);
}

TEST_CASE("training jobs") {
    Env env;
    Service s(env.config());
    const auto corpus = testing::data_path("fixture_tasks.csv").string();

    json req = {{"corpus", corpus}, {"kind", "mnb"}, {"name", "first"}};
    capture("train_request", "mnb", req);
    const auto accepted = s.train(req.dump());
    REQUIRE(accepted.status == 202);
    capture("job", "accepted", accepted.body);
    const auto id = accepted.body["job_id"].get<std::string>();

    const auto done = wait_for_job(s, id);
    REQUIRE(done.status == 200);
    capture("job", "succeeded", done.body);
    CHECK(done.body["status"] == "succeeded");
    CHECK(done.body["metrics"]["train_size"] == 101);
    CHECK(done.body["metrics"]["validation_size"] == 49);
    const double acc = done.body["metrics"]["validation_accuracy"];
    CHECK(acc >= 0.0);
    CHECK(acc <= 1.0);
    CHECK(s.registry().active_name() == "first");
    CHECK(s.recommend(recommend_body("221277", "Fix login css").dump()).status == 200);

    CHECK(s.train(req.dump()).status == 409);

    json bad_kind = {{"corpus", corpus}, {"kind", "use"}};
    CHECK(s.train(bad_kind.dump()).status == 400);
    CHECK(s.train(json{{"corpus", "/no/such/file.csv"}, {"kind", "mnb"}}.dump()).status == 400);
    CHECK(s.train(json{{"corpus", corpus}, {"kind", "mnb"}, {"train_fraction", 1.5}}.dump()).status == 400);
    CHECK(s.train(json{{"corpus", corpus}, {"kind", "lstm"}, {"hyperparameters", {{"dropout_rate", 2.0}}}}.dump())
              .status == 400);

    const auto missing = s.job_status("job-999");
    CHECK(missing.status == 404);
    capture("error", "unknown-job", missing.body);

    // A long neural job makes the single-job policy observable.
    json slow = {{"corpus", corpus}, {"kind", "lstm"}, {"activate", false},
                 {"hyperparameters", {{"epochs", 30}, {"early_stop_patience", 0}}}};
    capture("train_request", "lstm", slow);
    const auto running = s.train(slow.dump());
    REQUIRE(running.status == 202);
    const auto busy = s.train(json{{"corpus", corpus}, {"kind", "mnb"}}.dump());
    CHECK(busy.status == 409);
    CHECK(busy.body["code"] == "TrainingBusy");
    capture("error", "busy", busy.body);
    capture("health", "training", s.health().body);
    const auto slow_done = wait_for_job(s, running.body["job_id"]);
    CHECK(slow_done.body["status"] == "succeeded");
    CHECK(slow_done.body["metrics"].contains("validation_loss"));
    CHECK(slow_done.body["metrics"]["epochs"] == 30);
    capture("job", "neural", slow_done.body);
    CHECK(s.registry().active_name() == "first");
    CHECK(s.registry().list().size() == 2);

    // A corpus that fails to parse ends in a failed job, not a crash.
    const auto broken = env.dir / "broken.csv";
    testing::write_file(broken, "ProjectId,ProjectName,Title,Description,Role\n1,P,T,,Astrologer\n");
    const auto failing = s.train(json{{"corpus", broken.string()}, {"kind", "mnb"}}.dump());
    REQUIRE(failing.status == 202);
    const auto failed = wait_for_job(s, failing.body["job_id"]);
    CHECK(failed.body["status"] == "failed");
    CHECK(failed.body["error"]["code"] == "UnknownRole");
    capture("job", "failed", failed.body);
}

TEST_CASE("model listing and activation") {
    Env env;
    Service s(env.config());
    s.registry().add("a", fixture_model(), "d1", json{{"validation_accuracy", 0.5}}, true);
    s.registry().add("b", fixture_model(models::ModelKind::CS), "d1", json::object(), false);

    const auto list = s.list_models();
    capture("models", "two", list.body);
    CHECK(list.body["active"] == "a");
    CHECK(list.body["models"].size() == 2);

    const auto act = s.activate("b");
    REQUIRE(act.status == 200);
    capture("activate_response", "b", act.body);
    CHECK(s.registry().active()->model.kind() == models::ModelKind::CS);
    const auto r = s.activate("zzz");
    CHECK(r.status == 404);
    capture("error", "unknown-model", r.body);

    CHECK_THROWS_AS(s.registry().add("a", fixture_model(), "", json::object(), false), Error);
    CHECK_THROWS_AS(s.registry().add("bad name", fixture_model(), "", json::object(), false), Error);

    // The index survives a restart.
    ModelRegistry reopened(env.dir / "registry");
    CHECK(reopened.active_name() == "b");
    CHECK(reopened.active()->info.version() == s.registry().active()->info.version());
    CHECK(reopened.list().size() == 2);
}

TEST_CASE("a request observes exactly one model version") {
    Env env;
    Service s(env.config());
    const auto a = s.registry().add("a", fixture_model(), "d", json::object(), true);
    const auto b = s.registry().add("b", fixture_model(models::ModelKind::CS), "d", json::object(), false);
    const std::map<std::string, std::string> kind_of{{a.version(), "mnb"}, {b.version(), "cs"}};

    std::atomic<bool> stop{false};
    std::thread flipper([&] {
        for (int i = 0; i < 200; ++i) s.activate(i % 2 ? "a" : "b");
        stop = true;
    });
    std::atomic<int> mismatches{0};
    std::atomic<int> served{0};
    std::vector<std::thread> readers;
    for (int t = 0; t < 4; ++t) {
        readers.emplace_back([&] {
            while (!stop) {
                const auto r = s.recommend(recommend_body("221277", "Fix login css").dump());
                if (r.status != 200) {
                    ++mismatches;
                    continue;
                }
                const auto it = kind_of.find(r.body["model_version"].get<std::string>());
                if (it == kind_of.end() || it->second != r.body["model_kind"]) ++mismatches;
                ++served;
            }
        });
    }
    flipper.join();
    for (auto& t : readers) t.join();
    CHECK(mismatches == 0);
    CHECK(served > 0);
}

TEST_CASE("HTTP routes over a real socket") {
    Env env;
    Service s(env.config());
    s.registry().add("mnb-1", fixture_model(), "digest", json::object(), true);
    httplib::Server server;
    s.install(server);
    const int port = server.bind_to_any_port("127.0.0.1");
    REQUIRE(port > 0);
    std::thread listener([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    httplib::Client client("127.0.0.1", port);
    auto health = client.Get("/api/health");
    REQUIRE(health);
    CHECK(health->status == 200);
    CHECK(health->get_header_value("Access-Control-Allow-Origin") == "*");
    capture("health", "http", json::parse(health->body));

    auto rec = client.Post("/api/recommend", recommend_body("289231", "Add REST endpoint for payments", 2).dump(),
                           "application/json");
    REQUIRE(rec);
    CHECK(rec->status == 200);
    const auto body = json::parse(rec->body);
    capture("recommend_response", "http", body);
    CHECK(body["alternatives"].size() == 2);

    const json fb = {{"project_id", "289231"},
                     {"title", "Add REST endpoint for payments"},
                     {"recommended_role", body["chosen"]},
                     {"accepted", true},
                     {"model_version", body["model_version"]}};
    auto fres = client.Post("/api/feedback", fb.dump(), "application/json");
    REQUIRE(fres);
    CHECK(fres->status == 204);
    CHECK(fres->body.empty());

    auto bad = client.Post("/api/recommend", "{", "application/json");
    REQUIRE(bad);
    CHECK(bad->status == 400);
    CHECK(json::parse(bad->body)["code"] == "MalformedRequest");

    auto models = client.Get("/api/models");
    REQUIRE(models);
    CHECK(json::parse(models->body)["active"] == "mnb-1");

    auto activate = client.Post("/api/models/mnb-1/activate", "", "application/json");
    REQUIRE(activate);
    CHECK(activate->status == 200);
    auto missing = client.Post("/api/models/ghost/activate", "", "application/json");
    REQUIRE(missing);
    CHECK(missing->status == 404);
    auto job = client.Get("/api/train/job-42");
    REQUIRE(job);
    CHECK(job->status == 404);

    auto preflight = client.Options("/api/recommend");
    REQUIRE(preflight);
    CHECK(preflight->status == 204);
    CHECK(preflight->get_header_value("Access-Control-Allow-Methods").find("POST") != std::string::npos);

    server.stop();
    listener.join();
}
