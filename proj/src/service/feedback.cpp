#include "taskalloc/service/feedback.hpp"

#include "taskalloc/errors.hpp"

namespace taskalloc::service {

namespace {

[[noreturn]] void bad(const std::string& what) { throw Error(ErrorCode::MalformedRequest, what); }

Role role_field(const nlohmann::json& j, const char* key) {
    if (!j.contains(key) || !j[key].is_string()) bad(std::string("'") + key + "' must be a role name string");
    const auto r = parse_role_name(j[key].get<std::string>());
    if (!r) bad(std::string("'") + key + "' is not a known role: " + j[key].get<std::string>());
    return *r;
}

std::string string_field(const nlohmann::json& j, const char* key, bool required) {
    if (!j.contains(key)) {
        if (required) bad(std::string("missing field '") + key + "'");
        return {};
    }
    if (!j[key].is_string()) bad(std::string("'") + key + "' must be a string");
    return j[key].get<std::string>();
}

}  // namespace

nlohmann::json FeedbackEvent::to_json() const {
    nlohmann::json j = {{"timestamp", timestamp},
                        {"project_id", project_id},
                        {"title", title},
                        {"recommended_role", std::string(role_name(recommended_role))},
                        {"accepted", accepted},
                        {"model_version", model_version}};
    if (override_role) j["override_role"] = std::string(role_name(*override_role));
    return j;
}

FeedbackEvent FeedbackEvent::from_json(const nlohmann::json& j) {
    if (!j.is_object()) bad("feedback event must be a JSON object");
    FeedbackEvent e;
    e.timestamp = string_field(j, "timestamp", false);
    e.project_id = string_field(j, "project_id", true);
    e.title = string_field(j, "title", true);
    if (e.title.empty()) bad("'title' must not be empty");
    e.recommended_role = role_field(j, "recommended_role");
    if (!j.contains("accepted") || !j["accepted"].is_boolean()) bad("'accepted' must be a boolean");
    e.accepted = j["accepted"].get<bool>();
    if (j.contains("override_role") && !j["override_role"].is_null()) e.override_role = role_field(j, "override_role");
    if (e.accepted && e.override_role) bad("an accepted recommendation cannot carry an override_role");
    if (!e.accepted && !e.override_role) bad("a rejected recommendation needs an override_role");
    e.model_version = string_field(j, "model_version", true);
    return e;
}

void FeedbackCounters::record(const FeedbackEvent& e) {
    ++total;
    const std::string rec(role_name(e.recommended_role));
    if (e.accepted) {
        ++accepted;
        ++accepted_by_role[rec];
    } else {
        ++overridden;
        ++overridden_by_role[rec];
        ++corrections[rec + "->" + std::string(role_name(*e.override_role))];
    }
}

nlohmann::json FeedbackCounters::to_json() const {
    return {{"total", total},
            {"accepted", accepted},
            {"overridden", overridden},
            {"accepted_by_role", accepted_by_role},
            {"overridden_by_role", overridden_by_role},
            {"corrections", corrections}};
}

FeedbackCounters FeedbackLog::replay(const std::filesystem::path& path) {
    FeedbackCounters c;
    std::ifstream in(path);
    if (!in) return c;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            c.record(FeedbackEvent::from_json(nlohmann::json::parse(line)));
        } catch (const nlohmann::json::exception& e) {
            bad(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
        } catch (const Error& e) {
            bad(path.string() + ":" + std::to_string(line_no) + ": " + e.detail());
        }
    }
    return c;
}

FeedbackLog::FeedbackLog(std::filesystem::path path) : path_(std::move(path)), counters_(replay(path_)) {
    if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
    out_.open(path_, std::ios::app);
    if (!out_) throw Error(ErrorCode::Io, "cannot open feedback log " + path_.string());
}

void FeedbackLog::append(const FeedbackEvent& event) {
    const auto line = event.to_json().dump() + "\n";
    std::lock_guard lock(mutex_);
    out_ << line;
    out_.flush();
    if (!out_) throw Error(ErrorCode::Io, "write to feedback log " + path_.string() + " failed");
    counters_.record(event);
}

FeedbackCounters FeedbackLog::counters() const {
    std::lock_guard lock(mutex_);
    return counters_;
}

}  // namespace taskalloc::service
