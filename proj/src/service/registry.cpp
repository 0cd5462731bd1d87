#include "taskalloc/service/registry.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <sstream>

#include "taskalloc/errors.hpp"
#include "taskalloc/models/persistence.hpp"

namespace taskalloc::service {

namespace fs = std::filesystem;

std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

nlohmann::json ModelInfo::to_json() const {
    return {{"name", name},
            {"kind", std::string(models::kind_name(kind))},
            {"created_at", created_at},
            {"corpus_digest", corpus_digest},
            {"digest", digest},
            {"version", version()},
            {"metrics", metrics}};
}

ModelInfo ModelInfo::from_json(const nlohmann::json& j) {
    ModelInfo info;
    info.name = j.at("name").get<std::string>();
    const auto kind = models::parse_kind(j.at("kind").get<std::string>());
    if (!kind) throw Error(ErrorCode::CorruptContainer, "registry entry '" + info.name + "' has an unknown kind");
    info.kind = *kind;
    info.created_at = j.at("created_at").get<std::string>();
    info.corpus_digest = j.at("corpus_digest").get<std::string>();
    info.digest = j.at("digest").get<std::string>();
    info.metrics = j.value("metrics", nlohmann::json::object());
    return info;
}

namespace {

bool valid_name(const std::string& name) {
    return !name.empty() && name.size() <= 128 && name != "." && name != ".." &&
           std::all_of(name.begin(), name.end(), [](char c) {
               return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '.' ||
                      c == '_' || c == '-';
           });
}

void write_atomically(const fs::path& path, const std::string& bytes) {
    const auto tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(ErrorCode::Io, "cannot write " + tmp);
        out << bytes;
        if (!out) throw Error(ErrorCode::Io, "short write to " + tmp);
    }
    fs::rename(tmp, path);
}

}  // namespace

ModelRegistry::ModelRegistry(fs::path directory) : dir_(std::move(directory)) {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec) throw Error(ErrorCode::Io, "cannot create registry directory " + dir_.string() + ": " + ec.message());
    const auto index = dir_ / "registry.json";
    if (!fs::exists(index)) return;

    std::ifstream in(index);
    if (!in) throw Error(ErrorCode::Io, "cannot read " + index.string());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
        for (const auto& e : j.at("models")) {
            auto info = ModelInfo::from_json(e);
            order_.push_back(info.name);
            entries_.emplace(info.name, std::move(info));
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::CorruptContainer, "registry index " + index.string() + ": " + e.what());
    }
    if (j.contains("active") && j["active"].is_string()) activate(j["active"].get<std::string>());
}

fs::path ModelRegistry::container_path(const std::string& name) const { return dir_ / (name + ".talm"); }

void ModelRegistry::write_index() const {
    auto arr = nlohmann::json::array();
    for (const auto& name : order_) arr.push_back(entries_.at(name).to_json());
    const nlohmann::json j = {{"active", active_name_ ? nlohmann::json(*active_name_) : nlohmann::json(nullptr)},
                              {"models", arr}};
    write_atomically(dir_ / "registry.json", j.dump(2) + "\n");
}

ModelInfo ModelRegistry::add(const std::string& name, const models::TrainedModel& model, std::string corpus_digest,
                             nlohmann::json metrics, bool activate_now) {
    if (!valid_name(name)) {
        throw Error(ErrorCode::InvalidArgument, "model name '" + name + "' must match [A-Za-z0-9._-]+");
    }
    const auto bytes = models::serialize_model(model);
    ModelInfo info;
    info.name = name;
    info.kind = model.kind();
    info.created_at = utc_timestamp();
    info.corpus_digest = std::move(corpus_digest);
    info.digest = hex64(models::fnv1a64(bytes));
    info.metrics = std::move(metrics);

    std::lock_guard lock(mutex_);
    if (entries_.contains(name)) throw Error(ErrorCode::DuplicateModel, "model '" + name + "' already exists");
    write_atomically(container_path(name), bytes);
    entries_.emplace(name, info);
    order_.push_back(name);
    if (activate_now) {
        active_name_ = name;
        std::atomic_store(&active_, std::shared_ptr<const ActiveModel>(std::make_shared<ActiveModel>(ActiveModel{info, model})));
    }
    write_index();
    return info;
}

void ModelRegistry::activate(const std::string& name) {
    ModelInfo info;
    {
        std::lock_guard lock(mutex_);
        const auto it = entries_.find(name);
        if (it == entries_.end()) throw Error(ErrorCode::UnknownModel, "no model named '" + name + "'");
        info = it->second;
    }
    // Load outside the lock; recommendation traffic keeps using the old model meanwhile.
    auto model = models::load_model(container_path(name));
    auto next = std::make_shared<const ActiveModel>(ActiveModel{std::move(info), std::move(model)});
    std::lock_guard lock(mutex_);
    active_name_ = name;
    std::atomic_store(&active_, std::shared_ptr<const ActiveModel>(std::move(next)));
    write_index();
}

std::shared_ptr<const ActiveModel> ModelRegistry::active() const { return std::atomic_load(&active_); }

std::vector<ModelInfo> ModelRegistry::list() const {
    std::lock_guard lock(mutex_);
    std::vector<ModelInfo> out;
    for (const auto& name : order_) out.push_back(entries_.at(name));
    return out;
}

std::optional<std::string> ModelRegistry::active_name() const {
    std::lock_guard lock(mutex_);
    return active_name_;
}

bool ModelRegistry::contains(const std::string& name) const {
    std::lock_guard lock(mutex_);
    return entries_.contains(name);
}

}  // namespace taskalloc::service
