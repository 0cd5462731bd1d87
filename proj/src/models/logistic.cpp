#include "taskalloc/models/logistic.hpp"

#include <cmath>
#include <numeric>

#include "taskalloc/errors.hpp"
#include "taskalloc/models/optim.hpp"
#include "taskalloc/random.hpp"

namespace taskalloc::models {

namespace {

std::array<double, kRoleCount> scores(std::span<const double> params, std::size_t F, const textprep::SparseVector& x) {
    std::array<double, kRoleCount> z{};
    const double* bias = params.data() + kRoleCount * F;
    for (std::size_t c = 0; c < kRoleCount; ++c) {
        double s = bias[c];
        const double* w = params.data() + c * F;
        for (std::size_t k = 0; k < x.indices.size(); ++k) {
            if (x.indices[k] < F) s += w[x.indices[k]] * x.values[k];
        }
        z[c] = s;
    }
    return z;
}

}  // namespace

LogisticRegression::LogisticRegression(std::size_t dimension, std::vector<double> params)
    : dimension_(dimension), params_(std::move(params)) {
    if (params_.size() != parameter_size(dimension_)) {
        throw Error(ErrorCode::DimensionMismatch, "logistic regression parameter size does not match dimension");
    }
}

double LogisticRegression::objective(const BagBatch& batch, std::span<const std::size_t> rows,
                                     std::span<const double> params, double l2_lambda, std::vector<double>* grad,
                                     std::size_t* correct) {
    const std::size_t F = batch.dimension;
    if (grad) grad->assign(params.size(), 0.0);
    const double inv_n = 1.0 / static_cast<double>(rows.size());
    double loss = 0.0;
    std::size_t hits = 0;
    for (auto s : rows) {
        const auto& x = batch.features[s];
        const auto p = softmax(scores(params, F, x));
        const auto y = role_index(batch.labels[s]);
        loss -= std::log(std::max(p[y], 1e-12));
        if (role_index(argmax_role(p)) == y) ++hits;
        if (!grad) continue;
        for (std::size_t c = 0; c < kRoleCount; ++c) {
            const double dz = (p[c] - (c == y ? 1.0 : 0.0)) * inv_n;
            double* gw = grad->data() + c * F;
            for (std::size_t k = 0; k < x.indices.size(); ++k) {
                if (x.indices[k] < F) gw[x.indices[k]] += dz * x.values[k];
            }
            (*grad)[kRoleCount * F + c] += dz;
        }
    }
    loss *= inv_n;
    double sq = 0.0;
    for (std::size_t i = 0; i < kRoleCount * F; ++i) {
        sq += params[i] * params[i];
        if (grad) (*grad)[i] += l2_lambda * params[i];
    }
    if (correct) *correct = hits;
    return loss + 0.5 * l2_lambda * sq;
}

LogisticRegression LogisticRegression::fit(const BagBatch& batch, const Hyperparameters& hp) {
    if (batch.features.empty()) throw Error(ErrorCode::EmptyBatch, "logistic regression needs at least one sample");
    if (batch.features.size() != batch.labels.size()) {
        throw Error(ErrorCode::LengthMismatch, "features and labels differ in length");
    }
    const std::size_t F = batch.dimension;
    std::vector<double> params(parameter_size(F), 0.0);
    Rng rng(derive_seed(hp.seed, "lr-shuffle"));
    TrainingLoopOptions opts;
    opts.epochs = hp.epochs;
    opts.batch_size = hp.batch_size;
    opts.learning_rate = hp.linear_learning_rate;
    opts.model_name = "logistic regression";
    std::vector<double> local;
    run_training_loop(params, batch.features.size(), opts, rng,
                      [&](std::span<const std::size_t> rows, std::span<const double> p, std::vector<double>& grad, Rng&) {
                          std::size_t correct = 0;
                          const double loss = objective(batch, rows, p, hp.l2_lambda, &local, &correct);
                          grad = local;
                          return BatchResult{loss * static_cast<double>(rows.size()), correct};
                      });
    return LogisticRegression(F, std::move(params));
}

ProbabilityVector LogisticRegression::predict_proba(const textprep::Feature& feature) const {
    const auto* x = std::get_if<textprep::SparseVector>(&feature);
    if (!x) throw Error(ErrorCode::FeatureKindMismatch, "logistic regression expects a bag-of-words feature");
    return softmax(scores(params_, dimension_, *x));
}

void LogisticRegression::save(ParameterArchive& archive) const {
    archive.meta["dimension"] = dimension_;
    archive.tensors["params"] = params_;
}

LogisticRegression LogisticRegression::load(const ParameterArchive& archive) {
    return LogisticRegression(archive.meta.at("dimension").get<std::size_t>(), archive.tensor("params"));
}

}  // namespace taskalloc::models
