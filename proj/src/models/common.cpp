#include "taskalloc/models/common.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>

#include "taskalloc/errors.hpp"

namespace taskalloc::models {

std::string_view kind_name(ModelKind kind) noexcept {
    switch (kind) {
        case ModelKind::MNB: return "mnb";
        case ModelKind::LR: return "lr";
        case ModelKind::SVC: return "svc";
        case ModelKind::CS: return "cs";
        case ModelKind::RF: return "rf";
        case ModelKind::LSTM: return "lstm";
        case ModelKind::CNN: return "cnn";
    }
    return "?";
}

std::string_view kind_label(ModelKind kind) noexcept {
    switch (kind) {
        case ModelKind::MNB: return "MNB";
        case ModelKind::LR: return "LR";
        case ModelKind::SVC: return "Linear SVC";
        case ModelKind::CS: return "CS";
        case ModelKind::RF: return "RF";
        case ModelKind::LSTM: return "LSTM";
        case ModelKind::CNN: return "CNN";
    }
    return "?";
}

std::optional<ModelKind> parse_kind(std::string_view text) noexcept {
    std::string lower;
    for (char c : text) lower.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    for (auto k : kAllKinds) {
        std::string label;
        for (char c : kind_label(k)) label.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
        if (lower == kind_name(k) || lower == label) return k;
    }
    return std::nullopt;
}

textprep::FeatureFamily feature_family(ModelKind kind) noexcept {
    return is_neural(kind) ? textprep::FeatureFamily::Sequence : textprep::FeatureFamily::Bag;
}

std::vector<double> softmax(std::span<const double> scores) {
    std::vector<double> out(scores.size());
    if (scores.empty()) return out;
    const double m = *std::max_element(scores.begin(), scores.end());
    double sum = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        out[i] = std::exp(scores[i] - m);
        sum += out[i];
    }
    for (double& v : out) v /= sum;
    return out;
}

ProbabilityVector softmax(const std::array<double, kRoleCount>& scores) {
    const auto v = softmax(std::span<const double>(scores));
    ProbabilityVector p{};
    std::copy(v.begin(), v.end(), p.begin());
    return p;
}

double categorical_cross_entropy(std::span<const double> y_true, std::span<const double> y_hat) {
    if (y_true.size() != y_hat.size()) {
        throw Error(ErrorCode::LengthMismatch, "label length " + std::to_string(y_true.size()) +
                                                   " vs prediction length " + std::to_string(y_hat.size()));
    }
    double loss = 0.0;
    for (std::size_t c = 0; c < y_true.size(); ++c) {
        if (y_true[c] == 0.0) continue;
        loss -= y_true[c] * std::log(std::clamp(y_hat[c], 1e-12, 1.0));
    }
    // -0.0 for a perfect prediction reads badly in reports.
    return loss == 0.0 ? 0.0 : loss;
}

Role argmax_role(const ProbabilityVector& p) noexcept {
    return static_cast<Role>(std::max_element(p.begin(), p.end()) - p.begin());
}

// ---------------------------------------------------------------------------

void Hyperparameters::validate() const {
    const auto fail = [](const std::string& what) { throw Error(ErrorCode::InvalidArgument, what); };
    if (embedding_dim == 0) fail("embedding_dim must be positive");
    if (hidden_units == 0) fail("hidden_units must be positive");
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) fail("dropout_rate must lie in [0, 1)");
    if (epochs == 0) fail("epochs must be positive");
    if (batch_size == 0) fail("batch_size must be positive");
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) fail("learning_rate must be positive");
    if (!(linear_learning_rate > 0.0) || !std::isfinite(linear_learning_rate)) {
        fail("linear_learning_rate must be positive");
    }
    if (!(l2_lambda >= 0.0) || !std::isfinite(l2_lambda)) fail("l2_lambda must be non-negative");
    if (trees == 0) fail("trees must be positive");
    if (!(laplace_alpha > 0.0)) fail("laplace_alpha must be positive");
    if (!(svc_c > 0.0)) fail("svc_c must be positive");
    if (cnn_filters == 0 || cnn_width == 0) fail("cnn_filters and cnn_width must be positive");
    if (max_vocab == 0) fail("max_vocab must be positive");
    if (threads == 0) fail("threads must be positive");
}

namespace {

template <typename T>
T parse_number(std::string_view key, std::string_view value) {
    T out{};
    const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
    if (ec != std::errc{} || ptr != value.data() + value.size()) {
        throw Error(ErrorCode::InvalidArgument,
                    "invalid value '" + std::string(value) + "' for hyperparameter " + std::string(key));
    }
    return out;
}

bool parse_bool(std::string_view key, std::string_view value) {
    if (value == "true" || value == "1") return true;
    if (value == "false" || value == "0") return false;
    throw Error(ErrorCode::InvalidArgument, "invalid boolean '" + std::string(value) + "' for " + std::string(key));
}

}  // namespace

void Hyperparameters::set(std::string_view key, std::string_view value) {
    if (key == "embedding_dim") embedding_dim = parse_number<std::size_t>(key, value);
    else if (key == "hidden_units") hidden_units = parse_number<std::size_t>(key, value);
    else if (key == "dropout_rate") dropout_rate = parse_number<double>(key, value);
    else if (key == "epochs") epochs = parse_number<std::size_t>(key, value);
    else if (key == "batch_size") batch_size = parse_number<std::size_t>(key, value);
    else if (key == "learning_rate") learning_rate = parse_number<double>(key, value);
    else if (key == "linear_learning_rate") linear_learning_rate = parse_number<double>(key, value);
    else if (key == "early_stop_patience") early_stop_patience = parse_number<std::size_t>(key, value);
    else if (key == "early_stop_warmup") early_stop_warmup = parse_number<std::size_t>(key, value);
    else if (key == "seed") seed = parse_number<std::uint64_t>(key, value);
    else if (key == "l2_lambda") l2_lambda = parse_number<double>(key, value);
    else if (key == "trees") trees = parse_number<std::size_t>(key, value);
    else if (key == "laplace_alpha") laplace_alpha = parse_number<double>(key, value);
    else if (key == "svc_c") svc_c = parse_number<double>(key, value);
    else if (key == "cnn_filters") cnn_filters = parse_number<std::size_t>(key, value);
    else if (key == "cnn_width") cnn_width = parse_number<std::size_t>(key, value);
    else if (key == "max_vocab") max_vocab = parse_number<std::size_t>(key, value);
    else if (key == "max_len") max_len = parse_number<std::size_t>(key, value);
    else if (key == "mnb_tfidf") mnb_tfidf = parse_bool(key, value);
    else if (key == "threads") threads = parse_number<std::size_t>(key, value);
    else throw Error(ErrorCode::InvalidArgument, "unknown hyperparameter '" + std::string(key) + "'");
}

nlohmann::json Hyperparameters::to_json() const {
    return {
        {"embedding_dim", embedding_dim},
        {"hidden_units", hidden_units},
        {"dropout_rate", dropout_rate},
        {"epochs", epochs},
        {"batch_size", batch_size},
        {"learning_rate", learning_rate},
        {"linear_learning_rate", linear_learning_rate},
        {"early_stop_patience", early_stop_patience},
        {"early_stop_warmup", early_stop_warmup},
        {"seed", seed},
        {"l2_lambda", l2_lambda},
        {"trees", trees},
        {"laplace_alpha", laplace_alpha},
        {"svc_c", svc_c},
        {"cnn_filters", cnn_filters},
        {"cnn_width", cnn_width},
        {"max_vocab", max_vocab},
        {"max_len", max_len},
        {"mnb_tfidf", mnb_tfidf},
        {"threads", threads},
    };
}

Hyperparameters Hyperparameters::from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw Error(ErrorCode::InvalidArgument, "hyperparameters must be a JSON object");
    Hyperparameters hp;
    for (const auto& [key, value] : j.items()) {
        if (value.is_boolean()) {
            hp.set(key, value.get<bool>() ? "true" : "false");
        } else if (value.is_number_unsigned() || value.is_number_integer()) {
            hp.set(key, std::to_string(value.get<std::int64_t>()));
        } else if (value.is_number_float()) {
            // Round-trip exact text for doubles.
            char buf[64];
            const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value.get<double>());
            hp.set(key, std::string_view(buf, static_cast<std::size_t>(ptr - buf)));
        } else if (value.is_string()) {
            hp.set(key, value.get<std::string>());
        } else {
            throw Error(ErrorCode::InvalidArgument, "hyperparameter '" + key + "' has an unsupported JSON type");
        }
    }
    return hp;
}

const std::vector<double>& ParameterArchive::tensor(const std::string& name) const {
    const auto it = tensors.find(name);
    if (it == tensors.end()) throw Error(ErrorCode::CorruptContainer, "missing tensor '" + name + "'");
    return it->second;
}

}  // namespace taskalloc::models
