#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>

#include "taskalloc/corpus.hpp"
#include "taskalloc/models/common.hpp"

namespace taskalloc::models {

/// A fitted classifier bundled with the featurization it was trained with.
/// Copies share the immutable classifier.
class TrainedModel {
public:
    TrainedModel(ModelKind kind, Hyperparameters hp, textprep::Featurizer featurizer,
                 std::shared_ptr<const Classifier> classifier, TrainingHistory history = {}, bool pretrained = false);

    ModelKind kind() const noexcept { return kind_; }
    const Hyperparameters& hyperparameters() const noexcept { return hp_; }
    const textprep::Featurizer& featurizer() const noexcept { return featurizer_; }
    const Classifier& classifier() const noexcept { return *classifier_; }
    const TrainingHistory& history() const noexcept { return history_; }
    bool pretrained() const noexcept { return pretrained_; }
    std::size_t parameter_count() const noexcept { return classifier_->parameter_count(); }

    /// Roles observed per project in the training corpus.
    const std::map<std::string, RoleSet>& project_roles() const noexcept { return project_roles_; }
    void set_project_roles(std::map<std::string, RoleSet> roles) { project_roles_ = std::move(roles); }

    /// Throws Error(FeatureKindMismatch) when the feature family does not
    /// match the model kind.
    ProbabilityVector predict_proba(const textprep::Feature& feature) const;
    ProbabilityVector predict_text(std::string_view raw_title) const;
    Role predict(std::string_view raw_title) const { return argmax_role(predict_text(raw_title)); }

private:
    ModelKind kind_;
    Hyperparameters hp_;
    textprep::Featurizer featurizer_;
    std::shared_ptr<const Classifier> classifier_;
    TrainingHistory history_;
    bool pretrained_;
    std::map<std::string, RoleSet> project_roles_;
};

inline ProbabilityVector predict_proba(const TrainedModel& model, const textprep::Feature& feature) {
    return model.predict_proba(feature);
}

/// Builds the featurizer from the training titles, converts them and fits the
/// requested kind. `embeddings` (word2vec text) applies to neural kinds only.
TrainedModel train_model(ModelKind kind, const std::vector<std::string>& titles, const std::vector<Role>& labels,
                         const Hyperparameters& hp, const std::optional<std::filesystem::path>& embeddings = {});

/// As above on a corpus' titles; also records its per-project role sets.
TrainedModel train_model(ModelKind kind, const corpus::Corpus& train, const Hyperparameters& hp,
                         const std::optional<std::filesystem::path>& embeddings = {});

BagBatch make_bag_batch(const textprep::Featurizer& featurizer, const std::vector<std::string>& titles,
                        const std::vector<Role>& labels);
SequenceBatch make_sequence_batch(const textprep::Featurizer& featurizer, const std::vector<std::string>& titles,
                                  const std::vector<Role>& labels);

}  // namespace taskalloc::models
