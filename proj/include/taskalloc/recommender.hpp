#pragma once

#include <cstddef>
#include <string_view>
#include <vector>

#include "taskalloc/models/model.hpp"

namespace taskalloc::recommender {

struct RankedRole {
    Role role = Role::Developer;
    double confidence = 0.0;

    friend bool operator==(const RankedRole&, const RankedRole&) = default;
};

struct Recommendation {
    /// Descending confidence, lower role index first on ties.
    std::vector<RankedRole> ranked;
    Role chosen = Role::Developer;
    bool fallback_applied = false;
    models::ModelKind model_kind = models::ModelKind::MNB;

    friend bool operator==(const Recommendation&, const Recommendation&) = default;
};

/// All roles ranked by confidence.
std::vector<RankedRole> rank(const models::ProbabilityVector& proba);

/// Picks the best-ranked role present in `project_roles`; fallback_applied
/// is set when that is not the global best. `ranked` holds all seven roles.
/// Throws Error(EmptyProjectRoles).
Recommendation choose(const models::ProbabilityVector& proba, RoleSet project_roles,
                      models::ModelKind kind = models::ModelKind::MNB);

/// Runs the model's own preprocessing on `title`, then choose().
/// Throws Error(EmptyTitleAfterCleaning) when no token survives cleaning and
/// stop-word removal, and Error(EmptyProjectRoles).
Recommendation recommend(const models::TrainedModel& model, std::string_view title, RoleSet project_roles);

/// As recommend(), with `ranked` restricted to project roles and cut to k
/// entries. Throws Error(InvalidArgument) for k = 0.
Recommendation recommend_top_k(const models::TrainedModel& model, std::string_view title, RoleSet project_roles,
                               std::size_t k);

}  // namespace taskalloc::recommender
