#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string_view>
#include <vector>

#include "taskalloc/models/common.hpp"
#include "taskalloc/random.hpp"

namespace taskalloc::models {

/// Adam with bias correction.
class Adam {
public:
    explicit Adam(std::size_t size, double learning_rate, double beta1 = 0.9, double beta2 = 0.999,
                  double epsilon = 1e-7);

    void step(std::span<double> params, std::span<const double> grad);

private:
    double lr_, beta1_, beta2_, eps_;
    double beta1_pow_ = 1.0, beta2_pow_ = 1.0;
    std::vector<double> m_, v_;
};

struct BatchResult {
    /// Sum of per-sample data losses (no regularizer).
    double loss_sum = 0.0;
    std::size_t correct = 0;
};

/// Computes the mean-gradient of the objective over `rows` into `grad`
/// (already zeroed, same size as the parameters). `rng` drives any
/// training-time noise such as dropout.
using BatchObjective = std::function<BatchResult(std::span<const std::size_t> rows, std::span<const double> params,
                                                 std::vector<double>& grad, Rng& rng)>;

struct TrainingLoopOptions {
    std::size_t epochs = 30;
    std::size_t batch_size = 32;
    double learning_rate = 1e-3;
    /// 0 disables early stopping. Otherwise training stops once the epoch
    /// training accuracy has not improved for this many epochs.
    std::size_t patience = 0;
    /// Epochs run before accuracy is monitored at all.
    std::size_t warmup = 0;
    std::string_view model_name = "model";
};

/// Shuffled mini-batch Adam loop; records per-epoch mean loss and accuracy.
/// Throws Error(Divergence) when a batch loss or gradient is non-finite.
TrainingHistory run_training_loop(std::vector<double>& params, std::size_t n_samples,
                                  const TrainingLoopOptions& options, Rng& rng, const BatchObjective& objective);

}  // namespace taskalloc::models
