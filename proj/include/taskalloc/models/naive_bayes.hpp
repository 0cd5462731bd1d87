#pragma once

#include "taskalloc/models/common.hpp"

namespace taskalloc::models {

/// Multinomial naive Bayes over non-negative bag-of-words features.
///
/// Priors are class frequencies; token likelihoods use additive (Laplace)
/// smoothing, p(t|c) = (N_tc + alpha) / (N_c + alpha * F). A class missing
/// from the training data gets prior 0 and therefore posterior 0.
class NaiveBayes final : public Classifier {
public:
    static NaiveBayes fit(const BagBatch& batch, double alpha);
    static NaiveBayes load(const ParameterArchive& archive);

    ModelKind kind() const noexcept override { return ModelKind::MNB; }
    ProbabilityVector predict_proba(const textprep::Feature& feature) const override;
    std::size_t parameter_count() const noexcept override { return log_likelihood_.size() + kRoleCount; }
    void save(ParameterArchive& archive) const override;

    ProbabilityVector posterior(const textprep::SparseVector& x) const;

    std::size_t dimension() const noexcept { return dimension_; }
    /// log p(c); -inf for classes absent from training.
    const std::array<double, kRoleCount>& log_prior() const noexcept { return log_prior_; }
    /// Row-major kRoleCount x dimension, log p(t|c).
    const std::vector<double>& log_likelihood() const noexcept { return log_likelihood_; }

private:
    std::size_t dimension_ = 0;
    std::array<double, kRoleCount> log_prior_{};
    std::vector<double> log_likelihood_;
};

}  // namespace taskalloc::models
