#include "taskalloc/models/cosine.hpp"

#include <algorithm>
#include <cmath>

#include "taskalloc/errors.hpp"

namespace taskalloc::models {

CosineCentroid::CosineCentroid(std::size_t dimension, std::vector<double> centroids)
    : dimension_(dimension), centroids_(std::move(centroids)) {
    if (centroids_.size() != kRoleCount * dimension_) {
        throw Error(ErrorCode::DimensionMismatch, "centroid size does not match dimension");
    }
    for (std::size_t c = 0; c < kRoleCount; ++c) {
        double s = 0.0;
        for (std::size_t t = 0; t < dimension_; ++t) s += centroids_[c * dimension_ + t] * centroids_[c * dimension_ + t];
        norms_[c] = std::sqrt(s);
    }
}

CosineCentroid CosineCentroid::fit(const BagBatch& batch) {
    if (batch.features.empty()) throw Error(ErrorCode::EmptyBatch, "cosine classifier needs at least one sample");
    if (batch.features.size() != batch.labels.size()) {
        throw Error(ErrorCode::LengthMismatch, "features and labels differ in length");
    }
    const std::size_t F = batch.dimension;
    std::vector<double> sums(kRoleCount * F, 0.0);
    std::array<double, kRoleCount> counts{};
    for (std::size_t s = 0; s < batch.features.size(); ++s) {
        const auto& x = batch.features[s];
        const auto c = role_index(batch.labels[s]);
        counts[c] += 1.0;
        const double n = x.norm();
        if (n == 0.0) continue;
        for (std::size_t k = 0; k < x.indices.size(); ++k) {
            if (x.indices[k] < F) sums[c * F + x.indices[k]] += x.values[k] / n;
        }
    }
    for (std::size_t c = 0; c < kRoleCount; ++c) {
        if (counts[c] == 0.0) continue;
        for (std::size_t t = 0; t < F; ++t) sums[c * F + t] /= counts[c];
    }
    return CosineCentroid(F, std::move(sums));
}

std::array<double, kRoleCount> CosineCentroid::similarities(const textprep::SparseVector& x) const {
    std::array<double, kRoleCount> s{};
    const double qn = x.norm();
    if (qn == 0.0) return s;
    for (std::size_t c = 0; c < kRoleCount; ++c) {
        if (norms_[c] == 0.0) continue;
        double d = 0.0;
        for (std::size_t k = 0; k < x.indices.size(); ++k) {
            if (x.indices[k] < dimension_) d += x.values[k] * centroids_[c * dimension_ + x.indices[k]];
        }
        s[c] = d / (qn * norms_[c]);
    }
    return s;
}

ProbabilityVector CosineCentroid::scores_to_proba(const std::array<double, kRoleCount>& scores) {
    const double lo = std::min(0.0, *std::min_element(scores.begin(), scores.end()));
    ProbabilityVector p{};
    double sum = 0.0;
    for (std::size_t c = 0; c < kRoleCount; ++c) {
        p[c] = scores[c] - lo;
        sum += p[c];
    }
    if (sum <= 0.0) {
        p.fill(1.0 / static_cast<double>(kRoleCount));
        return p;
    }
    for (double& v : p) v /= sum;
    return p;
}

ProbabilityVector CosineCentroid::predict_proba(const textprep::Feature& feature) const {
    const auto* x = std::get_if<textprep::SparseVector>(&feature);
    if (!x) throw Error(ErrorCode::FeatureKindMismatch, "cosine classifier expects a bag-of-words feature");
    return scores_to_proba(similarities(*x));
}

void CosineCentroid::save(ParameterArchive& archive) const {
    archive.meta["dimension"] = dimension_;
    archive.tensors["centroids"] = centroids_;
}

CosineCentroid CosineCentroid::load(const ParameterArchive& archive) {
    return CosineCentroid(archive.meta.at("dimension").get<std::size_t>(), archive.tensor("centroids"));
}

}  // namespace taskalloc::models
