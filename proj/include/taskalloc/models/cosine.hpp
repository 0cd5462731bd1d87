#pragma once

#include "taskalloc/models/common.hpp"

namespace taskalloc::models {

/// Nearest-centroid classifier under cosine similarity. Each class centroid is
/// the mean of its l2-normalized training vectors.
class CosineCentroid final : public Classifier {
public:
    static CosineCentroid fit(const BagBatch& batch);
    static CosineCentroid load(const ParameterArchive& archive);
    CosineCentroid(std::size_t dimension, std::vector<double> centroids);

    ModelKind kind() const noexcept override { return ModelKind::CS; }
    ProbabilityVector predict_proba(const textprep::Feature& feature) const override;
    std::size_t parameter_count() const noexcept override { return centroids_.size(); }
    void save(ParameterArchive& archive) const override;

    /// cos(query, centroid_c); 0 for empty query or empty centroid.
    std::array<double, kRoleCount> similarities(const textprep::SparseVector& x) const;

    /// Shifts scores so the minimum is >= 0 and normalizes; all-zero scores
    /// give the uniform distribution.
    static ProbabilityVector scores_to_proba(const std::array<double, kRoleCount>& scores);

private:
    std::size_t dimension_;
    std::vector<double> centroids_;
    std::array<double, kRoleCount> norms_{};
};

}  // namespace taskalloc::models
