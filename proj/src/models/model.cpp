#include "taskalloc/models/model.hpp"

#include "taskalloc/errors.hpp"
#include "taskalloc/models/cnn.hpp"
#include "taskalloc/models/cosine.hpp"
#include "taskalloc/models/linear_svc.hpp"
#include "taskalloc/models/logistic.hpp"
#include "taskalloc/models/lstm.hpp"
#include "taskalloc/models/naive_bayes.hpp"
#include "taskalloc/models/random_forest.hpp"

namespace taskalloc::models {

TrainedModel::TrainedModel(ModelKind kind, Hyperparameters hp, textprep::Featurizer featurizer,
                           std::shared_ptr<const Classifier> classifier, TrainingHistory history, bool pretrained)
    : kind_(kind),
      hp_(std::move(hp)),
      featurizer_(std::move(featurizer)),
      classifier_(std::move(classifier)),
      history_(std::move(history)),
      pretrained_(pretrained) {
    if (!classifier_ || classifier_->kind() != kind_) {
        throw Error(ErrorCode::InvalidArgument, "classifier does not match model kind");
    }
    if (featurizer_.family() != feature_family(kind_)) {
        throw Error(ErrorCode::FeatureKindMismatch, "featurizer family does not match model kind");
    }
}

ProbabilityVector TrainedModel::predict_proba(const textprep::Feature& feature) const {
    if (textprep::family_of(feature) != feature_family(kind_)) {
        throw Error(ErrorCode::FeatureKindMismatch,
                    std::string(kind_label(kind_)) + " cannot score a " +
                        (textprep::family_of(feature) == textprep::FeatureFamily::Sequence ? "token sequence"
                                                                                           : "bag-of-words vector"));
    }
    return classifier_->predict_proba(feature);
}

ProbabilityVector TrainedModel::predict_text(std::string_view raw_title) const {
    return classifier_->predict_proba(featurizer_.transform(raw_title));
}

BagBatch make_bag_batch(const textprep::Featurizer& featurizer, const std::vector<std::string>& titles,
                        const std::vector<Role>& labels) {
    BagBatch b;
    b.dimension = featurizer.dimension();
    b.labels = labels;
    b.features.reserve(titles.size());
    for (const auto& t : titles) b.features.push_back(std::get<textprep::SparseVector>(featurizer.transform(t)));
    return b;
}

SequenceBatch make_sequence_batch(const textprep::Featurizer& featurizer, const std::vector<std::string>& titles,
                                  const std::vector<Role>& labels) {
    SequenceBatch b;
    b.vocab_rows = featurizer.dimension();
    b.labels = labels;
    b.sequences.reserve(titles.size());
    for (const auto& t : titles) b.sequences.push_back(std::get<textprep::TokenSequence>(featurizer.transform(t)));
    return b;
}

TrainedModel train_model(ModelKind kind, const std::vector<std::string>& titles, const std::vector<Role>& labels,
                         const Hyperparameters& hp, const std::optional<std::filesystem::path>& embeddings) {
    hp.validate();
    if (titles.empty()) throw Error(ErrorCode::EmptyBatch, "no training titles");
    if (titles.size() != labels.size()) throw Error(ErrorCode::LengthMismatch, "titles and labels differ in length");

    if (is_neural(kind)) {
        auto featurizer = textprep::Featurizer::fit_sequence(
            titles, hp.max_vocab, hp.max_len == 0 ? std::nullopt : std::optional<std::size_t>(hp.max_len));
        const auto batch = make_sequence_batch(featurizer, titles, labels);
        std::optional<textprep::EmbeddingMatrix> pretrained;
        if (embeddings) pretrained = textprep::load_embeddings(*embeddings, featurizer.vocabulary());
        const auto* pre = pretrained ? &*pretrained : nullptr;
        if (kind == ModelKind::LSTM) {
            auto [net, history] = LstmClassifier::fit(batch, hp, pre);
            return TrainedModel(kind, hp, std::move(featurizer), std::make_shared<LstmClassifier>(std::move(net)),
                                std::move(history), pre != nullptr);
        }
        auto [net, history] = CnnClassifier::fit(batch, hp, pre);
        return TrainedModel(kind, hp, std::move(featurizer), std::make_shared<CnnClassifier>(std::move(net)),
                            std::move(history), pre != nullptr);
    }

    const auto weighting = (kind == ModelKind::MNB && !hp.mnb_tfidf) ? textprep::BagWeighting::Counts
                                                                      : textprep::BagWeighting::TfIdf;
    auto featurizer = textprep::Featurizer::fit_bag(titles, weighting);
    const auto batch = make_bag_batch(featurizer, titles, labels);
    std::shared_ptr<const Classifier> clf;
    switch (kind) {
        case ModelKind::MNB: clf = std::make_shared<NaiveBayes>(NaiveBayes::fit(batch, hp.laplace_alpha)); break;
        case ModelKind::LR: clf = std::make_shared<LogisticRegression>(LogisticRegression::fit(batch, hp)); break;
        case ModelKind::SVC: clf = std::make_shared<LinearSvc>(LinearSvc::fit(batch, hp)); break;
        case ModelKind::CS: clf = std::make_shared<CosineCentroid>(CosineCentroid::fit(batch)); break;
        case ModelKind::RF: clf = std::make_shared<RandomForest>(RandomForest::fit(batch, hp)); break;
        default: break;
    }
    return TrainedModel(kind, hp, std::move(featurizer), std::move(clf));
}

TrainedModel train_model(ModelKind kind, const corpus::Corpus& train, const Hyperparameters& hp,
                         const std::optional<std::filesystem::path>& embeddings) {
    auto model = train_model(kind, train.titles(), train.roles(), hp, embeddings);
    model.set_project_roles(corpus::all_project_roles(train));
    return model;
}

}  // namespace taskalloc::models
