#include "taskalloc/recommender.hpp"

#include <algorithm>

#include "taskalloc/errors.hpp"

namespace taskalloc::recommender {

std::vector<RankedRole> rank(const models::ProbabilityVector& proba) {
    std::vector<RankedRole> out;
    out.reserve(kRoleCount);
    for (Role r : kAllRoles) out.push_back({r, proba[role_index(r)]});
    std::stable_sort(out.begin(), out.end(),
                     [](const RankedRole& a, const RankedRole& b) { return a.confidence > b.confidence; });
    return out;
}

Recommendation choose(const models::ProbabilityVector& proba, RoleSet project_roles, models::ModelKind kind) {
    if (project_roles.empty()) throw Error(ErrorCode::EmptyProjectRoles, "project has no roles to recommend from");
    Recommendation rec;
    rec.model_kind = kind;
    rec.ranked = rank(proba);
    const auto it = std::find_if(rec.ranked.begin(), rec.ranked.end(),
                                 [&](const RankedRole& r) { return project_roles.contains(r.role); });
    rec.chosen = it->role;
    rec.fallback_applied = it != rec.ranked.begin();
    return rec;
}

Recommendation recommend(const models::TrainedModel& model, std::string_view title, RoleSet project_roles) {
    if (project_roles.empty()) throw Error(ErrorCode::EmptyProjectRoles, "project has no roles to recommend from");
    if (model.featurizer().tokens(title).empty()) {
        throw Error(ErrorCode::EmptyTitleAfterCleaning, "title has no content words after cleaning");
    }
    return choose(model.predict_text(title), project_roles, model.kind());
}

Recommendation recommend_top_k(const models::TrainedModel& model, std::string_view title, RoleSet project_roles,
                               std::size_t k) {
    if (k == 0) throw Error(ErrorCode::InvalidArgument, "k must be at least 1");
    auto rec = recommend(model, title, project_roles);
    std::erase_if(rec.ranked, [&](const RankedRole& r) { return !project_roles.contains(r.role); });
    if (rec.ranked.size() > k) rec.ranked.resize(k);
    return rec;
}

}  // namespace taskalloc::recommender
