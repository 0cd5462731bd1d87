#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "taskalloc/models/model.hpp"

namespace taskalloc::service {

struct ModelInfo {
    std::string name;
    models::ModelKind kind = models::ModelKind::MNB;
    std::string created_at;
    std::string corpus_digest;
    /// Container digest; with the name it forms the model version.
    std::string digest;
    nlohmann::json metrics = nlohmann::json::object();

    std::string version() const { return name + "@" + digest; }
    nlohmann::json to_json() const;
    static ModelInfo from_json(const nlohmann::json& j);
};

/// A loaded model and its registry entry. Immutable once published.
struct ActiveModel {
    ModelInfo info;
    models::TrainedModel model;
};

/// Named model containers in one directory plus an index file
/// (registry.json) recording metadata and the active name. The active model
/// is published through an atomic shared_ptr swap, so a reader holding the
/// pointer keeps one consistent model for the whole request.
class ModelRegistry {
public:
    /// Creates the directory if needed and loads the index and active model.
    explicit ModelRegistry(std::filesystem::path directory);

    /// Saves the container and index entry. Throws Error(DuplicateModel) for
    /// a taken name and Error(InvalidArgument) for names other than
    /// [A-Za-z0-9._-]+.
    ModelInfo add(const std::string& name, const models::TrainedModel& model, std::string corpus_digest,
                  nlohmann::json metrics, bool activate);
    /// Throws Error(UnknownModel).
    void activate(const std::string& name);

    /// Null when no model is active.
    std::shared_ptr<const ActiveModel> active() const;
    std::vector<ModelInfo> list() const;
    std::optional<std::string> active_name() const;
    bool contains(const std::string& name) const;

    const std::filesystem::path& directory() const noexcept { return dir_; }

private:
    std::filesystem::path container_path(const std::string& name) const;
    void write_index() const;

    std::filesystem::path dir_;
    mutable std::mutex mutex_;
    std::map<std::string, ModelInfo> entries_;
    std::vector<std::string> order_;
    std::optional<std::string> active_name_;
    std::shared_ptr<const ActiveModel> active_;
};

/// UTC "YYYY-MM-DDTHH:MM:SSZ" for the current time.
std::string utc_timestamp();
/// 16 hex digits.
std::string hex64(std::uint64_t v);

}  // namespace taskalloc::service
