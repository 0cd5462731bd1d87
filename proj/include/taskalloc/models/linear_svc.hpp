#pragma once

#include "taskalloc/models/common.hpp"

namespace taskalloc::models {

/// One-vs-rest linear SVM trained with Pegasos-style sub-gradient descent on
/// the L2-regularized hinge loss, lambda = 1 / (C * n). The bias is an
/// augmented constant feature. Probabilities are a softmax over margins and
/// only their argmax carries meaning.
class LinearSvc final : public Classifier {
public:
    static LinearSvc fit(const BagBatch& batch, const Hyperparameters& hp);
    static LinearSvc load(const ParameterArchive& archive);
    LinearSvc(std::size_t dimension, std::vector<double> weights, std::array<bool, kRoleCount> trained);

    ModelKind kind() const noexcept override { return ModelKind::SVC; }
    ProbabilityVector predict_proba(const textprep::Feature& feature) const override;
    std::size_t parameter_count() const noexcept override { return weights_.size(); }
    void save(ParameterArchive& archive) const override;

    /// Per-class decision values w_c . x + b_c. Classes never seen in
    /// training get -inf so they cannot win.
    std::array<double, kRoleCount> margins(const textprep::SparseVector& x) const;

    /// softmax over finite margins; argmax is the class decision.
    static ProbabilityVector margins_to_proba(const std::array<double, kRoleCount>& margins);

private:
    std::size_t dimension_;
    /// kRoleCount rows of (dimension + 1), the last entry being the bias.
    std::vector<double> weights_;
    std::array<bool, kRoleCount> trained_{};
};

}  // namespace taskalloc::models
