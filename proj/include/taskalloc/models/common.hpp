#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "taskalloc/roles.hpp"
#include "taskalloc/textprep.hpp"

namespace taskalloc::models {

enum class ModelKind : std::uint8_t { MNB, LR, SVC, CS, RF, LSTM, CNN };

inline constexpr std::array<ModelKind, 7> kAllKinds = {ModelKind::LSTM, ModelKind::CNN, ModelKind::MNB, ModelKind::SVC,
                                                       ModelKind::LR,   ModelKind::CS,  ModelKind::RF};

/// Lowercase identifier used on the command line and the wire ("mnb", "lstm", ...).
std::string_view kind_name(ModelKind kind) noexcept;
/// Report label ("MNB", "Linear SVC", ...).
std::string_view kind_label(ModelKind kind) noexcept;
/// Case-insensitive; accepts the identifier or the report label.
std::optional<ModelKind> parse_kind(std::string_view text) noexcept;

constexpr bool is_neural(ModelKind kind) noexcept { return kind == ModelKind::LSTM || kind == ModelKind::CNN; }
textprep::FeatureFamily feature_family(ModelKind kind) noexcept;

using ProbabilityVector = std::array<double, kRoleCount>;

/// Max-subtracted exponential normalization.
std::vector<double> softmax(std::span<const double> scores);
ProbabilityVector softmax(const std::array<double, kRoleCount>& scores);

/// -sum_c y_c log(clip(yhat_c, 1e-12, 1)). Throws Error(LengthMismatch).
double categorical_cross_entropy(std::span<const double> y_true, std::span<const double> y_hat);

/// Index of the highest probability, lowest role index on ties.
Role argmax_role(const ProbabilityVector& p) noexcept;

struct Hyperparameters {
    std::size_t embedding_dim = 100;
    std::size_t hidden_units = 100;
    double dropout_rate = 0.2;
    std::size_t epochs = 30;
    std::size_t batch_size = 32;
    /// Neural kinds.
    double learning_rate = 1e-3;
    /// Logistic regression; the neural rate is far too small for a
    /// linear model over l2-normalized TF-IDF rows.
    double linear_learning_rate = 0.05;
    std::size_t early_stop_patience = 3;
    /// Early stopping ignores the first epochs; the training accuracy of the
    /// recurrent model typically plateaus briefly before it locks onto keywords.
    std::size_t early_stop_warmup = 10;
    std::uint64_t seed = 42;
    double l2_lambda = 1e-4;
    std::size_t trees = 100;
    double laplace_alpha = 1.0;
    double svc_c = 1.0;
    std::size_t cnn_filters = 64;
    std::size_t cnn_width = 3;
    std::size_t max_vocab = textprep::kDefaultVocabularyCap;
    /// 0 selects the percentile rule.
    std::size_t max_len = 0;
    /// MNB reads TF-IDF weights instead of raw term counts.
    bool mnb_tfidf = false;
    /// Worker threads for random forest training; results do not depend on it.
    std::size_t threads = 1;

    /// Throws Error(InvalidArgument) on out-of-range values.
    void validate() const;
    /// Sets one field from its textual name and value (e.g. "learning_rate", "0.01").
    void set(std::string_view key, std::string_view value);
    /// Trainable-parameter-free summary used in reports and containers.
    nlohmann::json to_json() const;
    static Hyperparameters from_json(const nlohmann::json& j);

    friend bool operator==(const Hyperparameters&, const Hyperparameters&) = default;
};

/// Bag-of-words training data; labels are role indices.
struct BagBatch {
    std::vector<textprep::SparseVector> features;
    std::vector<Role> labels;
    /// Number of feature columns.
    std::size_t dimension = 0;
};

struct SequenceBatch {
    std::vector<textprep::TokenSequence> sequences;
    std::vector<Role> labels;
    /// Embedding rows (vocabulary size + 2).
    std::size_t vocab_rows = 0;
};

struct EpochStats {
    double loss = 0.0;
    double accuracy = 0.0;
};

using TrainingHistory = std::vector<EpochStats>;

/// Named parameter tensors plus free-form metadata; the persistence layer
/// turns this into the on-disk container.
struct ParameterArchive {
    nlohmann::json meta = nlohmann::json::object();
    std::map<std::string, std::vector<double>> tensors;

    const std::vector<double>& tensor(const std::string& name) const;
};

class Classifier {
public:
    virtual ~Classifier() = default;

    virtual ModelKind kind() const noexcept = 0;
    virtual ProbabilityVector predict_proba(const textprep::Feature& feature) const = 0;
    virtual std::size_t parameter_count() const noexcept = 0;
    virtual void save(ParameterArchive& archive) const = 0;
};

}  // namespace taskalloc::models
