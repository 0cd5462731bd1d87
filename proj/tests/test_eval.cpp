#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

#include "fixtures.hpp"
#include "synthetic.hpp"
#include "taskalloc/errors.hpp"
#include "taskalloc/eval.hpp"
#include "taskalloc/models/model.hpp"
#include "taskalloc/random.hpp"

using namespace taskalloc;
using namespace taskalloc::eval;
using models::Hyperparameters;
using models::ModelKind;

namespace {

using Roles = std::vector<Role>;

ErrorCode code_of(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected an Error");
    return ErrorCode::Io;
}

Roles random_roles(Rng& rng, std::size_t n, std::size_t classes = kRoleCount) {
    Roles out;
    for (std::size_t i = 0; i < n; ++i) out.push_back(role_from_index(rng.below(classes)));
    return out;
}

Hyperparameters quick_neural() {
    Hyperparameters hp;
    hp.embedding_dim = 8;
    hp.hidden_units = 8;
    hp.cnn_filters = 8;
    hp.epochs = 4;
    return hp;
}

}  // namespace

TEST_CASE("accuracy examples") {
    const Roles a{Role::Developer, Role::Content, Role::Stakeholder};
    CHECK(accuracy(a, a) == 1.0);
    CHECK(accuracy(a, Roles{Role::Content, Role::Stakeholder, Role::Developer}) == 0.0);
    CHECK(accuracy(a, Roles{Role::Developer, Role::Content, Role::Developer}) == doctest::Approx(2.0 / 3.0).epsilon(1e-9));
    CHECK(code_of([&] { accuracy(a, Roles{Role::Developer}); }) == ErrorCode::LengthMismatch);
    CHECK(code_of([] { accuracy(Roles{}, Roles{}); }) == ErrorCode::EmptyInput);
}

TEST_CASE("uniform random predictions sit at chance level") {
    Rng rng(12);
    Roles truths;
    for (std::size_t i = 0; i < 1001; ++i) truths.push_back(role_from_index(i % kRoleCount));
    const auto preds = random_roles(rng, truths.size());
    CHECK(std::abs(accuracy(preds, truths) - 1.0 / 7.0) <= 0.05);
}

TEST_CASE("confusion matrix identities") {
    Rng rng(1);
    for (int trial = 0; trial < 100; ++trial) {
        const auto n = 1 + rng.below(200);
        const auto preds = random_roles(rng, n);
        const auto truths = random_roles(rng, n);
        const ConfusionMatrix m(preds, truths);
        CHECK(m.total() == n);
        std::size_t trace = 0;
        double summed = 0;
        for (Role x : kAllRoles) {
            trace += m.true_positives(x);
            CHECK(m.true_positives(x) + m.false_negatives(x) == m.row_sum(x));
            CHECK(m.true_positives(x) + m.false_positives(x) + m.true_negatives(x) + m.false_negatives(x) == n);
            summed += m.per_class_accuracy(x);
        }
        CHECK(m.accuracy() == doctest::Approx(accuracy(preds, truths)).epsilon(1e-12));
        CHECK(m.accuracy() == doctest::Approx(static_cast<double>(trace) / static_cast<double>(n)));
        CHECK(m.summed_per_class_accuracy() == doctest::Approx(summed));
        CHECK(m.summed_per_class_accuracy() > 1.0);
    }
    ConfusionMatrix empty;
    CHECK(empty.accuracy() == 0.0);

    const ConfusionMatrix small(Roles{Role::Developer, Role::Developer}, Roles{Role::Developer, Role::Content});
    CHECK(small.count(Role::Content, Role::Developer) == 1);
    CHECK(small.false_positives(Role::Developer) == 1);
    CHECK(small.false_negatives(Role::Content) == 1);
    CHECK(small.true_negatives(Role::Stakeholder) == 2);
    CHECK(small.to_json()["total"] == 2);
}

TEST_CASE("kfold_split examples") {
    Roles balanced;
    for (std::size_t i = 0; i < 10; ++i) balanced.push_back(i % 2 ? Role::Content : Role::Developer);
    const auto five = kfold_split(10, 5, balanced, 42);
    REQUIRE(five.size() == 5);
    for (const auto& f : five) CHECK(f.size() == 2);

    const Roles seven(7, Role::Developer);
    const auto three = kfold_split(7, 3, seven, 1);
    std::multiset<std::size_t> sizes;
    for (const auto& f : three) sizes.insert(f.size());
    CHECK(sizes == std::multiset<std::size_t>{3, 2, 2});

    CHECK(kfold_split(10, 5, balanced, 42) == five);
    CHECK(code_of([&] { kfold_split(7, 8, Roles(7, Role::Developer), 1); }) == ErrorCode::KTooLarge);
    CHECK(code_of([&] { kfold_split(7, 1, seven, 1); }) == ErrorCode::InvalidArgument);
    CHECK(code_of([&] { kfold_split(6, 2, seven, 1); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("kfold_split invariants over random instances") {
    Rng rng(77);
    for (int trial = 0; trial < 300; ++trial) {
        const std::size_t n = 2 + rng.below(150);
        const std::size_t k = 2 + rng.below(std::min<std::size_t>(n - 1, 12));
        const auto labels = random_roles(rng, n, 1 + rng.below(kRoleCount));
        const auto seed = rng.next();
        const auto folds = kfold_split(n, k, labels, seed);
        REQUIRE(folds.size() == k);

        std::vector<int> seen(n, 0);
        std::size_t lo = n, hi = 0;
        for (const auto& f : folds) {
            CHECK(std::is_sorted(f.begin(), f.end()));
            lo = std::min(lo, f.size());
            hi = std::max(hi, f.size());
            for (auto p : f) ++seen[p];
        }
        CHECK(hi - lo <= 1);
        CHECK(std::all_of(seen.begin(), seen.end(), [](int s) { return s == 1; }));

        for (Role r : kAllRoles) {
            const auto total = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), r));
            if (total < k) continue;
            std::size_t clo = n, chi = 0;
            for (const auto& f : folds) {
                const auto c = static_cast<std::size_t>(
                    std::count_if(f.begin(), f.end(), [&](std::size_t p) { return labels[p] == r; }));
                clo = std::min(clo, c);
                chi = std::max(chi, c);
            }
            CHECK(chi - clo <= 1);
        }
        CHECK(kfold_split(n, k, labels, seed) == folds);
    }
}

TEST_CASE("cross_validate structure and degenerate corpus") {
    const auto c = testing::synthetic_corpus(4, 3);
    const auto report = cross_validate(ModelKind::MNB, c, {Hyperparameters{}}, {5, 42, 1, {}});
    REQUIRE(report.grid.size() == 1);
    CHECK(report.grid[0].fold_accuracy.size() == 5);
    CHECK(report.k == 5);
    CHECK(report.best().mean >= 0.0);
    CHECK(report.best().mean <= 1.0);
    CHECK(report.to_json()["grid"].size() == 1);

    std::vector<corpus::TaskRecord> recs;
    for (int i = 0; i < 12; ++i)
        recs.push_back({"p", "P", "ticket number " + std::to_string(i) + " words", "", Role::Content});
    const corpus::Corpus single(recs);
    const auto one = cross_validate(ModelKind::MNB, single, {Hyperparameters{}}, {4, 1, 1, {}});
    for (double a : one.best().fold_accuracy) CHECK(a == 1.0);
    CHECK(one.best().stddev == 0.0);

    CHECK(code_of([&] { cross_validate(ModelKind::MNB, single, {Hyperparameters{}}, {13, 1, 1, {}}); }) ==
          ErrorCode::KTooLarge);
    CHECK(code_of([&] { cross_validate(ModelKind::MNB, single, {}, {4, 1, 1, {}}); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("cross_validate annotates training errors with the fold") {
    const auto c = testing::synthetic_corpus(3, 1);
    Hyperparameters hp = quick_neural();
    hp.learning_rate = 1e300;
    try {
        cross_validate(ModelKind::CNN, c, {hp}, {3, 1, 1, {}});
        FAIL("expected divergence");
    } catch (const Error& e) {
        CHECK(std::string(e.detail()).rfind("fold 0: ", 0) == 0);
    }
}

TEST_CASE("cross_validate winner matches an independent re-run of each grid point") {
    const auto c = testing::synthetic_corpus(6, 9);
    Hyperparameters slow;
    slow.linear_learning_rate = 1e-5;
    slow.epochs = 2;
    Hyperparameters fast;
    fast.linear_learning_rate = 0.05;
    const std::vector<Hyperparameters> grid{slow, fast};
    const CvOptions opts{4, 5, 1, {}};
    const auto report = cross_validate(ModelKind::LR, c, grid, opts);

    const auto folds = kfold_split(c.size(), 4, c.roles(), derive_seed(5, "cv-split"));
    std::vector<double> means;
    for (std::size_t g = 0; g < grid.size(); ++g) {
        double sum = 0;
        for (std::size_t f = 0; f < 4; ++f) {
            std::vector<std::size_t> train;
            for (std::size_t h = 0; h < 4; ++h)
                if (h != f) train.insert(train.end(), folds[h].begin(), folds[h].end());
            std::sort(train.begin(), train.end());
            auto hp = grid[g];
            hp.seed = derive_seed(5, "cv-fold", f);
            const auto model = models::train_model(ModelKind::LR, c.subset(train), hp);
            const auto held = c.subset(folds[f]);
            std::size_t ok = 0;
            for (const auto& r : held.records()) ok += model.predict(r.title) == r.role;
            const double acc = static_cast<double>(ok) / static_cast<double>(held.size());
            CHECK(report.grid[g].fold_accuracy[f] == doctest::Approx(acc).epsilon(1e-12));
            sum += acc;
        }
        means.push_back(sum / 4.0);
    }
    const std::size_t expected = means[1] > means[0] ? 1 : 0;
    CHECK(report.winner == expected);
    CHECK(report.winner == 1);

    CvOptions threaded = opts;
    threaded.threads = 3;
    const auto again = cross_validate(ModelKind::LR, c, grid, threaded);
    CHECK(again.to_json() == report.to_json());
}

TEST_CASE("cross_validate ties go to fewer parameters, then grid order") {
    std::vector<corpus::TaskRecord> recs;
    for (int i = 0; i < 8; ++i) recs.push_back({"p", "P", "word" + std::to_string(i) + " shared", "", Role::Developer});
    const corpus::Corpus single(recs);
    Hyperparameters big;
    big.trees = 6;
    Hyperparameters small;
    small.trees = 2;
    const auto report = cross_validate(ModelKind::RF, single, {big, small, small}, {2, 3, 1, {}});
    CHECK(report.grid[0].parameter_count > report.grid[1].parameter_count);
    CHECK(report.grid[0].mean == report.grid[1].mean);
    CHECK(report.winner == 1);
}

TEST_CASE("evaluate_holdout") {
    const auto c = testing::synthetic_corpus(10, 4);
    const auto mnb = models::train_model(ModelKind::MNB, c, Hyperparameters{});
    const auto own = evaluate_holdout(mnb, c);
    CHECK(own.accuracy == 1.0);
    CHECK_FALSE(own.loss.has_value());
    CHECK(own.confusion.total() == c.size());
    CHECK(own.predictions.size() == c.size());
    CHECK(code_of([&] { evaluate_holdout(mnb, corpus::Corpus{}); }) == ErrorCode::EmptyValidation);

    const auto lstm = models::train_model(ModelKind::LSTM, c, quick_neural());
    const auto r = evaluate_holdout(lstm, c);
    REQUIRE(r.loss.has_value());
    double sum = 0;
    for (const auto& rec : c.records()) {
        const auto p = lstm.predict_text(rec.title);
        sum += -std::log(std::max(p[role_index(rec.role)], 1e-12));
    }
    CHECK(*r.loss == doctest::Approx(sum / static_cast<double>(c.size())).epsilon(1e-9));
}

TEST_CASE("training_curves") {
    const auto c = testing::synthetic_corpus(15, 6);
    auto hp = quick_neural();
    hp.early_stop_patience = 0;
    hp.epochs = 30;
    hp.learning_rate = 1e-2;
    const auto m = models::train_model(ModelKind::CNN, c, hp);
    const auto& h = training_curves(m);
    CHECK(h.size() == 30);
    CHECK(h.back().accuracy >= h.front().accuracy);
    const auto text = format_curves(h);
    CHECK(text.rfind("epoch\tloss\taccuracy\n1\t", 0) == 0);
    CHECK(std::count(text.begin(), text.end(), '\n') == 31);

    hp.early_stop_patience = 1;
    hp.early_stop_warmup = 0;
    const auto stopped = models::train_model(ModelKind::CNN, c, hp);
    CHECK(training_curves(stopped).size() < 30);

    const auto mnb = models::train_model(ModelKind::MNB, c, Hyperparameters{});
    CHECK(code_of([&] { training_curves(mnb); }) == ErrorCode::NoHistory);
}

TEST_CASE("benchmark rows, reproducibility and per-project table") {
    const auto c = testing::synthetic_corpus(30, 2);
    BenchmarkOptions opts;
    opts.kinds = {ModelKind::MNB, ModelKind::CS, ModelKind::CNN};
    opts.hyperparameters = quick_neural();
    const auto a = benchmark(c, opts);
    const auto b = benchmark(c, opts);
    CHECK(a.to_tsv() == b.to_tsv());
    CHECK(a.project_table_tsv() == b.project_table_tsv());
    CHECK(a.to_json() == b.to_json());

    REQUIRE(a.rows.size() == 4);
    CHECK(a.train_size == 141);
    CHECK(a.validation_size == 69);
    CHECK(a.rows[0].kind == ModelKind::MNB);
    CHECK_FALSE(a.rows[0].loss.has_value());
    CHECK(*a.rows[0].accuracy >= 0.95);
    CHECK(*a.rows[1].accuracy >= 0.95);
    CHECK(a.rows[2].pretrained);
    CHECK_FALSE(a.rows[2].accuracy.has_value());
    CHECK(a.rows[2].note.find("unavailable") == 0);
    CHECK(a.rows[3].loss.has_value());

    CHECK(a.projects == std::vector<std::string>{"syn0", "syn1", "syn2"});
    std::size_t total = 0;
    for (const auto& [p, n] : a.project_validation_size) total += n;
    CHECK(total == a.validation_size);
    const auto tsv = a.to_tsv();
    CHECK(tsv.rfind("kind\tpretrained\tloss\taccuracy\tnote\n", 0) == 0);
    CHECK(tsv.find("N/A") != std::string::npos);
    CHECK(a.curves_tsv().find("# CNN !P") != std::string::npos);
}

TEST_CASE("benchmark keeps going when one row fails") {
    const auto c = testing::synthetic_corpus(5, 2);
    BenchmarkOptions opts;
    opts.kinds = {ModelKind::CNN, ModelKind::MNB};
    opts.hyperparameters = quick_neural();
    opts.hyperparameters.learning_rate = 1e300;
    const auto r = benchmark(c, opts);
    REQUIRE(r.rows.size() == 3);
    CHECK(r.rows[1].note.find("failed") == 0);
    CHECK(r.rows[2].accuracy.has_value());
}
