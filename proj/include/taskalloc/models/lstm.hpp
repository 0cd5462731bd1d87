#pragma once

#include <utility>

#include "taskalloc/models/common.hpp"
#include "taskalloc/random.hpp"

namespace taskalloc::models {

/// Read-only view of one LSTM layer's weights. Gate blocks are ordered
/// input, forget, candidate, output; kernel is (4H x input_dim) and
/// recurrent is (4H x H), both row-major.
struct LstmCellWeights {
    std::size_t input_dim = 0;
    std::size_t hidden = 0;
    std::span<const double> kernel;
    std::span<const double> recurrent;
    std::span<const double> bias;
};

struct LstmCellState {
    std::vector<double> h;
    std::vector<double> c;
};

/// c_t = f * c_prev + i * g, h_t = o * tanh(c_t). Throws Error(DimensionMismatch).
LstmCellState lstm_cell_step(std::span<const double> x, std::span<const double> h_prev,
                             std::span<const double> c_prev, const LstmCellWeights& weights);

/// Embedding -> spatial dropout -> LSTM (last hidden state) -> dense softmax.
struct LstmShape {
    std::size_t vocab_rows = 0;
    std::size_t embedding_dim = 0;
    std::size_t hidden_units = 0;

    std::size_t embedding_offset() const noexcept { return 0; }
    std::size_t kernel_offset() const noexcept { return vocab_rows * embedding_dim; }
    std::size_t recurrent_offset() const noexcept { return kernel_offset() + 4 * hidden_units * embedding_dim; }
    std::size_t bias_offset() const noexcept { return recurrent_offset() + 4 * hidden_units * hidden_units; }
    std::size_t dense_offset() const noexcept { return bias_offset() + 4 * hidden_units; }
    std::size_t dense_bias_offset() const noexcept { return dense_offset() + kRoleCount * hidden_units; }
    std::size_t parameter_size() const noexcept { return dense_bias_offset() + kRoleCount; }
};

class LstmClassifier final : public Classifier {
public:
    /// Embedding rows come from `pretrained` when given (its dim overrides
    /// hp.embedding_dim), otherwise U(-0.05, 0.05). Trained with Adam on
    /// cross-entropy, early stopping on training accuracy.
    static std::pair<LstmClassifier, TrainingHistory> fit(const SequenceBatch& batch, const Hyperparameters& hp,
                                                          const textprep::EmbeddingMatrix* pretrained = nullptr);
    static LstmClassifier load(const ParameterArchive& archive);

    LstmClassifier(LstmShape shape, std::vector<double> params);

    /// Initial parameters: Glorot-uniform kernels, zero biases except a
    /// forget-gate bias of 1, padding row zero.
    static std::vector<double> initial_parameters(const LstmShape& shape, Rng& rng,
                                                  const textprep::EmbeddingMatrix* pretrained);

    /// Mean cross-entropy over `rows`; full BPTT gradient into `grad` when
    /// non-null. Spatial dropout is active only when `dropout_rng` is non-null
    /// and `dropout_rate` > 0. Padding (index 0) feeds a zero vector.
    static double objective(const LstmShape& shape, std::span<const double> params, const SequenceBatch& batch,
                            std::span<const std::size_t> rows, std::vector<double>* grad, Rng* dropout_rng,
                            double dropout_rate, std::size_t* correct = nullptr);

    ModelKind kind() const noexcept override { return ModelKind::LSTM; }
    ProbabilityVector predict_proba(const textprep::Feature& feature) const override;
    std::size_t parameter_count() const noexcept override { return params_.size(); }
    void save(ParameterArchive& archive) const override;

    const LstmShape& shape() const noexcept { return shape_; }
    const std::vector<double>& parameters() const noexcept { return params_; }

private:
    LstmShape shape_;
    std::vector<double> params_;
};

}  // namespace taskalloc::models
