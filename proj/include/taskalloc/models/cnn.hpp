#pragma once

#include <utility>

#include "taskalloc/models/common.hpp"
#include "taskalloc/random.hpp"

namespace taskalloc::models {

/// Embedding -> Conv1D (valid, ReLU) -> global max pooling -> dense softmax.
/// Sequences shorter than the filter width are zero-extended to one window.
struct CnnShape {
    std::size_t vocab_rows = 0;
    std::size_t embedding_dim = 0;
    std::size_t filters = 0;
    std::size_t width = 0;

    std::size_t embedding_offset() const noexcept { return 0; }
    std::size_t kernel_offset() const noexcept { return vocab_rows * embedding_dim; }
    std::size_t kernel_bias_offset() const noexcept { return kernel_offset() + filters * width * embedding_dim; }
    std::size_t dense_offset() const noexcept { return kernel_bias_offset() + filters; }
    std::size_t dense_bias_offset() const noexcept { return dense_offset() + kRoleCount * filters; }
    std::size_t parameter_size() const noexcept { return dense_bias_offset() + kRoleCount; }
};

class CnnClassifier final : public Classifier {
public:
    static std::pair<CnnClassifier, TrainingHistory> fit(const SequenceBatch& batch, const Hyperparameters& hp,
                                                         const textprep::EmbeddingMatrix* pretrained = nullptr);
    static CnnClassifier load(const ParameterArchive& archive);

    CnnClassifier(CnnShape shape, std::vector<double> params);

    static std::vector<double> initial_parameters(const CnnShape& shape, Rng& rng,
                                                  const textprep::EmbeddingMatrix* pretrained);

    /// Mean cross-entropy over `rows`, gradient into `grad` when non-null.
    static double objective(const CnnShape& shape, std::span<const double> params, const SequenceBatch& batch,
                            std::span<const std::size_t> rows, std::vector<double>* grad,
                            std::size_t* correct = nullptr);

    ModelKind kind() const noexcept override { return ModelKind::CNN; }
    ProbabilityVector predict_proba(const textprep::Feature& feature) const override;
    std::size_t parameter_count() const noexcept override { return params_.size(); }
    void save(ParameterArchive& archive) const override;

    const CnnShape& shape() const noexcept { return shape_; }
    const std::vector<double>& parameters() const noexcept { return params_; }

private:
    CnnShape shape_;
    std::vector<double> params_;
};

}  // namespace taskalloc::models
