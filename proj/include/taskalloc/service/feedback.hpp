#pragma once

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <string>

#include <json.hpp>

#include "taskalloc/roles.hpp"

namespace taskalloc::service {

struct FeedbackEvent {
    std::string timestamp;
    std::string project_id;
    std::string title;
    Role recommended_role = Role::Developer;
    bool accepted = false;
    /// Present exactly when accepted is false.
    std::optional<Role> override_role;
    std::string model_version;

    nlohmann::json to_json() const;
    /// Throws Error(MalformedRequest) on missing or mistyped fields, unknown
    /// role names, or an override that contradicts `accepted`. A missing
    /// timestamp is left empty.
    static FeedbackEvent from_json(const nlohmann::json& j);

    friend bool operator==(const FeedbackEvent&, const FeedbackEvent&) = default;
};

struct FeedbackCounters {
    std::size_t total = 0;
    std::size_t accepted = 0;
    std::size_t overridden = 0;
    /// recommended role name -> accepted count / overridden count.
    std::map<std::string, std::size_t> accepted_by_role;
    std::map<std::string, std::size_t> overridden_by_role;
    /// "recommended->override" -> count.
    std::map<std::string, std::size_t> corrections;

    void record(const FeedbackEvent& e);
    nlohmann::json to_json() const;

    friend bool operator==(const FeedbackCounters&, const FeedbackCounters&) = default;
};

/// Append-only newline-delimited JSON log. Appends are serialized and
/// flushed before append() returns.
class FeedbackLog {
public:
    /// Replays an existing log to rebuild the counters.
    explicit FeedbackLog(std::filesystem::path path);

    void append(const FeedbackEvent& event);
    FeedbackCounters counters() const;
    const std::filesystem::path& path() const noexcept { return path_; }

    /// Counters rebuilt from the log file. Throws Error(MalformedRequest) on
    /// an unparseable line, naming it.
    static FeedbackCounters replay(const std::filesystem::path& path);

private:
    std::filesystem::path path_;
    mutable std::mutex mutex_;
    std::ofstream out_;
    FeedbackCounters counters_;
};

}  // namespace taskalloc::service
