#pragma once

#include "taskalloc/models/common.hpp"

namespace taskalloc::models {

/// Multinomial (softmax) logistic regression on bag-of-words features.
/// Parameters are laid out as W (kRoleCount x dimension, row-major) then b.
class LogisticRegression final : public Classifier {
public:
    /// Mini-batch Adam on mean cross-entropy + (l2_lambda / 2) * ||W||^2.
    static LogisticRegression fit(const BagBatch& batch, const Hyperparameters& hp);
    static LogisticRegression load(const ParameterArchive& archive);
    LogisticRegression(std::size_t dimension, std::vector<double> params);

    /// Objective on `rows` of the batch. When `grad` is non-null it receives
    /// the gradient (overwritten). Returns the mean data loss plus the penalty.
    static double objective(const BagBatch& batch, std::span<const std::size_t> rows, std::span<const double> params,
                            double l2_lambda, std::vector<double>* grad, std::size_t* correct = nullptr);

    static std::size_t parameter_size(std::size_t dimension) noexcept { return kRoleCount * (dimension + 1); }

    ModelKind kind() const noexcept override { return ModelKind::LR; }
    ProbabilityVector predict_proba(const textprep::Feature& feature) const override;
    std::size_t parameter_count() const noexcept override { return params_.size(); }
    void save(ParameterArchive& archive) const override;

    const std::vector<double>& parameters() const noexcept { return params_; }

private:
    std::size_t dimension_;
    std::vector<double> params_;
};

}  // namespace taskalloc::models
