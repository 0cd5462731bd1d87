#include "taskalloc/models/persistence.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "taskalloc/errors.hpp"
#include "taskalloc/models/cnn.hpp"
#include "taskalloc/models/cosine.hpp"
#include "taskalloc/models/linear_svc.hpp"
#include "taskalloc/models/logistic.hpp"
#include "taskalloc/models/lstm.hpp"
#include "taskalloc/models/naive_bayes.hpp"
#include "taskalloc/models/random_forest.hpp"

namespace taskalloc::models {

namespace {

constexpr std::string_view kMagic = "TALMODEL";

template <typename T>
void put_le(std::string& out, T value) {
    using U = std::make_unsigned_t<T>;
    auto u = static_cast<U>(value);
    for (std::size_t i = 0; i < sizeof(T); ++i) {
        out.push_back(static_cast<char>(u & 0xFF));
        u = static_cast<U>(u >> 8);
    }
}

void put_f64(std::string& out, double v) { put_le(out, std::bit_cast<std::uint64_t>(v)); }

class Reader {
public:
    explicit Reader(std::string_view bytes) : bytes_(bytes) {}

    template <typename T>
    T le() {
        need(sizeof(T));
        std::make_unsigned_t<T> u = 0;
        for (std::size_t i = 0; i < sizeof(T); ++i) {
            u |= static_cast<std::make_unsigned_t<T>>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
        }
        pos_ += sizeof(T);
        return static_cast<T>(u);
    }
    double f64() { return std::bit_cast<double>(le<std::uint64_t>()); }
    std::string_view take(std::uint64_t n) {
        need(n);
        const auto out = bytes_.substr(pos_, n);
        pos_ += n;
        return out;
    }
    std::size_t position() const noexcept { return pos_; }
    std::size_t remaining() const noexcept { return bytes_.size() - pos_; }

private:
    void need(std::uint64_t n) const {
        if (n > bytes_.size() - pos_) throw Error(ErrorCode::CorruptContainer, "container is truncated");
    }
    std::string_view bytes_;
    std::size_t pos_ = 0;
};

nlohmann::json roles_to_json(RoleSet set) {
    auto arr = nlohmann::json::array();
    for (Role r : set.members()) arr.push_back(std::string(role_name(r)));
    return arr;
}

RoleSet roles_from_json(const nlohmann::json& arr) {
    RoleSet set;
    for (const auto& v : arr) {
        const auto r = parse_role_name(v.get<std::string>());
        if (!r) throw Error(ErrorCode::CorruptContainer, "unknown role name in container");
        set.insert(*r);
    }
    return set;
}

std::shared_ptr<const Classifier> load_classifier(ModelKind kind, const ParameterArchive& a) {
    switch (kind) {
        case ModelKind::MNB: return std::make_shared<NaiveBayes>(NaiveBayes::load(a));
        case ModelKind::LR: return std::make_shared<LogisticRegression>(LogisticRegression::load(a));
        case ModelKind::SVC: return std::make_shared<LinearSvc>(LinearSvc::load(a));
        case ModelKind::CS: return std::make_shared<CosineCentroid>(CosineCentroid::load(a));
        case ModelKind::RF: return std::make_shared<RandomForest>(RandomForest::load(a));
        case ModelKind::LSTM: return std::make_shared<LstmClassifier>(LstmClassifier::load(a));
        case ModelKind::CNN: return std::make_shared<CnnClassifier>(CnnClassifier::load(a));
    }
    throw Error(ErrorCode::CorruptContainer, "unknown model kind");
}

}  // namespace

std::uint64_t fnv1a64(std::string_view bytes) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string serialize_model(const TrainedModel& model) {
    ParameterArchive clf;
    model.classifier().save(clf);

    const auto& fz = model.featurizer();
    nlohmann::json featurizer = {
        {"family", fz.family() == textprep::FeatureFamily::Sequence ? "sequence" : "bag"},
        {"weighting", fz.weighting() == textprep::BagWeighting::Counts ? "counts" : "tfidf"},
        {"vocabulary", fz.vocabulary().tokens()},
        {"max_len", fz.max_len()},
        {"idf_terms", fz.idf_table().terms()},
        {"document_count", fz.idf_table().document_count()},
    };
    auto role_order = nlohmann::json::array();
    for (Role r : kAllRoles) role_order.push_back(std::string(role_name(r)));
    auto project_roles = nlohmann::json::object();
    for (const auto& [id, set] : model.project_roles()) project_roles[id] = roles_to_json(set);

    const nlohmann::json meta = {
        {"format", "taskalloc-model"},
        {"kind", std::string(kind_name(model.kind()))},
        {"hyperparameters", model.hyperparameters().to_json()},
        {"pretrained", model.pretrained()},
        {"role_order", role_order},
        {"featurizer", featurizer},
        {"project_roles", project_roles},
        {"classifier", clf.meta},
    };

    std::map<std::string, std::vector<double>> tensors;
    tensors["featurizer.idf"] = fz.idf_table().idf();
    std::vector<double> loss, acc;
    for (const auto& e : model.history()) {
        loss.push_back(e.loss);
        acc.push_back(e.accuracy);
    }
    tensors["history.loss"] = loss;
    tensors["history.accuracy"] = acc;
    for (auto& [name, t] : clf.tensors) tensors["classifier." + name] = std::move(t);

    std::string out(kMagic);
    put_le<std::uint32_t>(out, kContainerVersion);
    const std::string meta_text = meta.dump();
    put_le<std::uint64_t>(out, meta_text.size());
    out += meta_text;
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(tensors.size()));
    for (const auto& [name, t] : tensors) {
        put_le<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
        out += name;
        put_le<std::uint64_t>(out, t.size());
        for (double v : t) put_f64(out, v);
    }
    put_le<std::uint64_t>(out, fnv1a64(out));
    return out;
}

TrainedModel deserialize_model(std::string_view bytes) {
    if (bytes.size() < kMagic.size() + 4 || bytes.substr(0, kMagic.size()) != kMagic) {
        throw Error(ErrorCode::CorruptContainer, "not a model container");
    }
    Reader header(bytes.substr(kMagic.size()));
    const auto version = header.le<std::uint32_t>();
    if (version != kContainerVersion) {
        throw Error(ErrorCode::VersionMismatch, "container version " + std::to_string(version) +
                                                    ", this build reads version " + std::to_string(kContainerVersion));
    }
    if (bytes.size() < kMagic.size() + 4 + 8) throw Error(ErrorCode::CorruptContainer, "container is truncated");
    const auto body = bytes.substr(0, bytes.size() - 8);
    Reader tail(bytes.substr(bytes.size() - 8));
    if (tail.le<std::uint64_t>() != fnv1a64(body)) {
        throw Error(ErrorCode::CorruptContainer, "digest mismatch (truncated or modified container)");
    }

    Reader r(body.substr(kMagic.size() + 4));
    nlohmann::json meta;
    std::map<std::string, std::vector<double>> tensors;
    try {
        meta = nlohmann::json::parse(r.take(r.le<std::uint64_t>()));
        const auto count = r.le<std::uint32_t>();
        for (std::uint32_t i = 0; i < count; ++i) {
            std::string name(r.take(r.le<std::uint32_t>()));
            const auto n = r.le<std::uint64_t>();
            if (n > r.remaining() / 8) throw Error(ErrorCode::CorruptContainer, "tensor length exceeds container");
            std::vector<double> t(n);
            for (auto& v : t) v = r.f64();
            tensors.emplace(std::move(name), std::move(t));
        }
        if (r.remaining() != 0) throw Error(ErrorCode::CorruptContainer, "trailing bytes in container");

        if (meta.at("format") != "taskalloc-model") throw Error(ErrorCode::CorruptContainer, "unexpected format tag");
        const auto kind = parse_kind(meta.at("kind").get<std::string>());
        if (!kind) throw Error(ErrorCode::CorruptContainer, "unknown model kind");
        const auto& order = meta.at("role_order");
        if (order.size() != kRoleCount) throw Error(ErrorCode::CorruptContainer, "role order has wrong length");
        for (std::size_t i = 0; i < kRoleCount; ++i) {
            if (order[i].get<std::string>() != role_name(kAllRoles[i])) {
                throw Error(ErrorCode::CorruptContainer, "role order differs from this build");
            }
        }

        const auto hp = Hyperparameters::from_json(meta.at("hyperparameters"));
        const auto& fz = meta.at("featurizer");
        textprep::Featurizer featurizer;
        if (fz.at("family") == "sequence") {
            featurizer = textprep::Featurizer::from_sequence(
                textprep::Vocabulary(fz.at("vocabulary").get<std::vector<std::string>>()),
                fz.at("max_len").get<std::size_t>());
        } else {
            const auto weighting =
                fz.at("weighting") == "counts" ? textprep::BagWeighting::Counts : textprep::BagWeighting::TfIdf;
            const auto it = tensors.find("featurizer.idf");
            if (it == tensors.end()) throw Error(ErrorCode::CorruptContainer, "missing idf tensor");
            featurizer = textprep::Featurizer::from_bag(
                textprep::IdfTable(fz.at("idf_terms").get<std::vector<std::string>>(), it->second,
                                   fz.at("document_count").get<std::size_t>()),
                weighting);
        }

        TrainingHistory history;
        const auto& loss = tensors.at("history.loss");
        const auto& acc = tensors.at("history.accuracy");
        if (loss.size() != acc.size()) throw Error(ErrorCode::CorruptContainer, "history tensors differ in length");
        for (std::size_t i = 0; i < loss.size(); ++i) history.push_back({loss[i], acc[i]});

        ParameterArchive clf;
        clf.meta = meta.at("classifier");
        const std::string prefix = "classifier.";
        for (auto& [name, t] : tensors) {
            if (name.starts_with(prefix)) clf.tensors.emplace(name.substr(prefix.size()), std::move(t));
        }

        TrainedModel model(*kind, hp, std::move(featurizer), load_classifier(*kind, clf), std::move(history),
                           meta.at("pretrained").get<bool>());
        std::map<std::string, RoleSet> project_roles;
        for (const auto& [id, arr] : meta.at("project_roles").items()) project_roles[id] = roles_from_json(arr);
        model.set_project_roles(std::move(project_roles));
        return model;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::CorruptContainer, std::string("bad container metadata: ") + e.what());
    } catch (const std::out_of_range& e) {
        throw Error(ErrorCode::CorruptContainer, std::string("inconsistent container: ") + e.what());
    } catch (const Error& e) {
        if (e.code() == ErrorCode::VersionMismatch || e.code() == ErrorCode::CorruptContainer) throw;
        throw Error(ErrorCode::CorruptContainer, e.what());
    }
}

void save_model(const TrainedModel& model, const std::filesystem::path& path) {
    const auto bytes = serialize_model(model);
    const auto tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(ErrorCode::Io, "cannot write " + tmp);
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw Error(ErrorCode::Io, "short write to " + tmp);
    }
    std::filesystem::rename(tmp, path);
}

TrainedModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, "cannot open model " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return deserialize_model(buf.str());
}

}  // namespace taskalloc::models
