#include <doctest.h>

#include <algorithm>

#include "fixtures.hpp"
#include "taskalloc/errors.hpp"
#include "taskalloc/models/model.hpp"
#include "taskalloc/random.hpp"
#include "taskalloc/recommender.hpp"

using namespace taskalloc;
using namespace taskalloc::recommender;
using models::ProbabilityVector;

namespace {

ProbabilityVector random_proba(Rng& rng) {
    ProbabilityVector p{};
    double sum = 0;
    for (auto& v : p) {
        // Coarse values so ties actually occur.
        v = static_cast<double>(rng.below(6));
        sum += v;
    }
    if (sum == 0) {
        p.fill(1.0 / kRoleCount);
        return p;
    }
    for (auto& v : p) v /= sum;
    return p;
}

RoleSet random_roles(Rng& rng) {
    RoleSet s;
    while (s.empty())
        for (Role r : kAllRoles)
            if (rng.bernoulli(0.4)) s.insert(r);
    return s;
}

const models::TrainedModel& fixture_model() {
    static const auto model = models::train_model(models::ModelKind::MNB, testing::fixture_corpus(), {});
    return model;
}

}  // namespace

TEST_CASE("argmax inside the project is chosen directly") {
    ProbabilityVector p{0.1, 0.6, 0.1, 0.05, 0.05, 0.05, 0.05};
    const auto r = choose(p, RoleSet{Role::BackEndDeveloper, Role::Content});
    CHECK(r.chosen == Role::BackEndDeveloper);
    CHECK_FALSE(r.fallback_applied);
    CHECK(r.ranked.size() == 7);
    CHECK(r.ranked.front() == RankedRole{Role::BackEndDeveloper, 0.6});
}

TEST_CASE("fallback picks the best in-project role") {
    ProbabilityVector p{};
    p[role_index(Role::BackEndDeveloper)] = 0.5;
    p[role_index(Role::FrontEndDeveloper)] = 0.3;
    p[role_index(Role::Content)] = 0.2;
    const auto r = choose(p, RoleSet{Role::FrontEndDeveloper, Role::Content}, models::ModelKind::LSTM);
    CHECK(r.chosen == Role::FrontEndDeveloper);
    CHECK(r.fallback_applied);
    CHECK(r.model_kind == models::ModelKind::LSTM);
    CHECK_THROWS_AS(choose(p, RoleSet{}), Error);
}

TEST_CASE("rank orders by confidence with lower index on ties") {
    const auto r = rank({0.1, 0.3, 0.3, 0.0, 0.2, 0.1, 0.0});
    std::vector<Role> order;
    for (const auto& e : r) order.push_back(e.role);
    CHECK(order == std::vector<Role>{Role::BackEndDeveloper, Role::Developer, Role::TeamCatalyst,
                                     Role::FrontEndDeveloper, Role::Content, Role::ProductOwner, Role::Stakeholder});
}

TEST_CASE("recommendation properties over random inputs") {
    Rng rng(2024);
    for (int trial = 0; trial < 1000; ++trial) {
        const auto p = random_proba(rng);
        const auto roles = random_roles(rng);
        const auto r = choose(p, roles);
        CHECK(roles.contains(r.chosen));
        const Role global = models::argmax_role(p);
        CHECK(r.fallback_applied == !roles.contains(global));
        // chosen is the first ranked entry inside the project
        const auto first = std::find_if(r.ranked.begin(), r.ranked.end(),
                                        [&](const RankedRole& e) { return roles.contains(e.role); });
        CHECK(first->role == r.chosen);
        for (std::size_t i = 1; i < r.ranked.size(); ++i) {
            CHECK(r.ranked[i - 1].confidence >= r.ranked[i].confidence);
            if (r.ranked[i - 1].confidence == r.ranked[i].confidence)
                CHECK(role_index(r.ranked[i - 1].role) < role_index(r.ranked[i].role));
        }
        CHECK(choose(p, RoleSet::all()).fallback_applied == false);

        // Boosting the chosen role and renormalizing keeps it chosen.
        auto boosted = p;
        boosted[role_index(r.chosen)] += rng.uniform(0.0, 1.0);
        double sum = 0;
        for (double v : boosted) sum += v;
        for (auto& v : boosted) v /= sum;
        CHECK(choose(boosted, roles).chosen == r.chosen);
    }
}

TEST_CASE("recommend runs the model's preprocessing") {
    const auto& model = fixture_model();
    const auto r = recommend(model, "Implement REST endpoint for orders", RoleSet::all());
    CHECK(r.ranked.size() == 7);
    CHECK(r.chosen == models::argmax_role(model.predict_text("Implement REST endpoint for orders")));
    CHECK(recommend(model, "Implement REST endpoint for orders", RoleSet::all()) == r);
    CHECK(r.model_kind == models::ModelKind::MNB);

    try {
        recommend(model, "<p>the and of</p> !!", RoleSet::all());
        FAIL("expected EmptyTitleAfterCleaning");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::EmptyTitleAfterCleaning);
    }
    CHECK_THROWS_AS(recommend(model, "api", RoleSet{}), Error);
}

TEST_CASE("recommend_top_k truncates in-project entries") {
    const auto& model = fixture_model();
    const std::string title = "Design the checkout page layout";
    const RoleSet some{Role::BackEndDeveloper, Role::Developer, Role::ProductOwner};
    const auto full = recommend(model, title, some);

    const auto one = recommend_top_k(model, title, some, 1);
    REQUIRE(one.ranked.size() == 1);
    CHECK(one.ranked[0].role == full.chosen);
    CHECK(one.chosen == full.chosen);

    CHECK(recommend_top_k(model, title, some, 7).ranked.size() == 3);

    const auto all = recommend_top_k(model, title, RoleSet::all(), 7);
    CHECK(all.ranked == recommend(model, title, RoleSet::all()).ranked);
    for (const auto& e : recommend_top_k(model, title, some, 5).ranked) CHECK(some.contains(e.role));
    CHECK_THROWS_AS(recommend_top_k(model, title, some, 0), Error);
}
