#include "taskalloc/models/naive_bayes.hpp"

#include <cmath>
#include <limits>

#include "taskalloc/errors.hpp"

namespace taskalloc::models {

NaiveBayes NaiveBayes::fit(const BagBatch& batch, double alpha) {
    if (batch.features.empty()) throw Error(ErrorCode::EmptyBatch, "naive Bayes needs at least one sample");
    if (batch.features.size() != batch.labels.size()) {
        throw Error(ErrorCode::LengthMismatch, "features and labels differ in length");
    }
    if (!(alpha > 0.0)) throw Error(ErrorCode::InvalidArgument, "alpha must be positive");

    const std::size_t F = batch.dimension;
    NaiveBayes nb;
    nb.dimension_ = F;
    std::array<double, kRoleCount> class_count{};
    std::array<double, kRoleCount> class_total{};
    std::vector<double> counts(kRoleCount * F, 0.0);
    for (std::size_t s = 0; s < batch.features.size(); ++s) {
        const auto c = role_index(batch.labels[s]);
        class_count[c] += 1.0;
        const auto& x = batch.features[s];
        for (std::size_t k = 0; k < x.indices.size(); ++k) {
            if (x.values[k] < 0.0) throw Error(ErrorCode::InvalidArgument, "naive Bayes features must be non-negative");
            if (x.indices[k] >= F) throw Error(ErrorCode::DimensionMismatch, "feature index beyond dimension");
            counts[c * F + x.indices[k]] += x.values[k];
            class_total[c] += x.values[k];
        }
    }
    const auto n = static_cast<double>(batch.features.size());
    nb.log_likelihood_.resize(kRoleCount * F);
    for (std::size_t c = 0; c < kRoleCount; ++c) {
        nb.log_prior_[c] = class_count[c] > 0.0 ? std::log(class_count[c] / n)
                                                : -std::numeric_limits<double>::infinity();
        const double denom = class_total[c] + alpha * static_cast<double>(F);
        for (std::size_t t = 0; t < F; ++t) {
            nb.log_likelihood_[c * F + t] = std::log((counts[c * F + t] + alpha) / denom);
        }
    }
    return nb;
}

ProbabilityVector NaiveBayes::posterior(const textprep::SparseVector& x) const {
    std::array<double, kRoleCount> log_joint{};
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < kRoleCount; ++c) {
        double lj = log_prior_[c];
        if (std::isfinite(lj)) {
            for (std::size_t k = 0; k < x.indices.size(); ++k) {
                if (x.indices[k] < dimension_) lj += x.values[k] * log_likelihood_[c * dimension_ + x.indices[k]];
            }
        }
        log_joint[c] = lj;
        best = std::max(best, lj);
    }
    ProbabilityVector p{};
    double sum = 0.0;
    for (std::size_t c = 0; c < kRoleCount; ++c) {
        p[c] = std::isfinite(log_joint[c]) ? std::exp(log_joint[c] - best) : 0.0;
        sum += p[c];
    }
    for (double& v : p) v /= sum;
    return p;
}

ProbabilityVector NaiveBayes::predict_proba(const textprep::Feature& feature) const {
    const auto* x = std::get_if<textprep::SparseVector>(&feature);
    if (!x) throw Error(ErrorCode::FeatureKindMismatch, "naive Bayes expects a bag-of-words feature");
    return posterior(*x);
}

void NaiveBayes::save(ParameterArchive& archive) const {
    archive.meta["dimension"] = dimension_;
    std::vector<double> present(kRoleCount), prior(kRoleCount);
    for (std::size_t c = 0; c < kRoleCount; ++c) {
        present[c] = std::isfinite(log_prior_[c]) ? 1.0 : 0.0;
        prior[c] = std::isfinite(log_prior_[c]) ? log_prior_[c] : 0.0;
    }
    archive.tensors["class_present"] = present;
    archive.tensors["log_prior"] = prior;
    archive.tensors["log_likelihood"] = log_likelihood_;
}

NaiveBayes NaiveBayes::load(const ParameterArchive& archive) {
    NaiveBayes nb;
    nb.dimension_ = archive.meta.at("dimension").get<std::size_t>();
    const auto& present = archive.tensor("class_present");
    const auto& prior = archive.tensor("log_prior");
    nb.log_likelihood_ = archive.tensor("log_likelihood");
    if (present.size() != kRoleCount || prior.size() != kRoleCount ||
        nb.log_likelihood_.size() != kRoleCount * nb.dimension_) {
        throw Error(ErrorCode::CorruptContainer, "naive Bayes tensor shapes do not match");
    }
    for (std::size_t c = 0; c < kRoleCount; ++c) {
        nb.log_prior_[c] = present[c] != 0.0 ? prior[c] : -std::numeric_limits<double>::infinity();
    }
    return nb;
}

}  // namespace taskalloc::models
