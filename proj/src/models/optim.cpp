#include "taskalloc/models/optim.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "taskalloc/errors.hpp"

namespace taskalloc::models {

Adam::Adam(std::size_t size, double learning_rate, double beta1, double beta2, double epsilon)
    : lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(epsilon), m_(size, 0.0), v_(size, 0.0) {}

void Adam::step(std::span<double> params, std::span<const double> grad) {
    beta1_pow_ *= beta1_;
    beta2_pow_ *= beta2_;
    const double step = lr_ * std::sqrt(1.0 - beta2_pow_) / (1.0 - beta1_pow_);
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double g = grad[i];
        if (g == 0.0 && m_[i] == 0.0 && v_[i] == 0.0) continue;
        m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * g;
        v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * g * g;
        params[i] -= step * m_[i] / (std::sqrt(v_[i]) + eps_);
    }
}

TrainingHistory run_training_loop(std::vector<double>& params, std::size_t n_samples,
                                  const TrainingLoopOptions& options, Rng& rng, const BatchObjective& objective) {
    if (n_samples == 0) throw Error(ErrorCode::EmptyBatch, std::string(options.model_name) + ": no training samples");
    Adam adam(params.size(), options.learning_rate);
    std::vector<double> grad(params.size());
    std::vector<std::size_t> order(n_samples);
    TrainingHistory history;
    double best_accuracy = -1.0;
    std::size_t stale = 0;

    for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        rng.shuffle(std::span<std::size_t>(order));
        double loss_sum = 0.0;
        std::size_t correct = 0;
        for (std::size_t start = 0; start < n_samples; start += options.batch_size) {
            const std::size_t end = std::min(n_samples, start + options.batch_size);
            const std::span<const std::size_t> rows(order.data() + start, end - start);
            std::fill(grad.begin(), grad.end(), 0.0);
            const auto r = objective(rows, params, grad, rng);
            const bool finite = std::isfinite(r.loss_sum) &&
                                std::all_of(grad.begin(), grad.end(), [](double g) { return std::isfinite(g); });
            if (!finite) {
                throw Error(ErrorCode::Divergence, std::string(options.model_name) + ": non-finite loss or gradient at epoch " +
                                                       std::to_string(epoch + 1) + ", batch starting at sample " +
                                                       std::to_string(start) + " (learning rate " +
                                                       std::to_string(options.learning_rate) + ")");
            }
            loss_sum += r.loss_sum;
            correct += r.correct;
            adam.step(params, grad);
        }
        const EpochStats stats{loss_sum / static_cast<double>(n_samples),
                               static_cast<double>(correct) / static_cast<double>(n_samples)};
        history.push_back(stats);
        if (options.patience > 0 && epoch + 1 >= options.warmup) {
            if (stats.accuracy > best_accuracy) {
                best_accuracy = stats.accuracy;
                stale = 0;
            } else if (++stale >= options.patience) {
                break;
            }
        }
    }
    return history;
}

}  // namespace taskalloc::models
