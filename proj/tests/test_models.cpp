#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

#include "fixtures.hpp"
#include "synthetic.hpp"
#include "taskalloc/errors.hpp"
#include "taskalloc/models/cnn.hpp"
#include "taskalloc/models/cosine.hpp"
#include "taskalloc/models/linear_svc.hpp"
#include "taskalloc/models/logistic.hpp"
#include "taskalloc/models/lstm.hpp"
#include "taskalloc/models/model.hpp"
#include "taskalloc/models/naive_bayes.hpp"
#include "taskalloc/models/random_forest.hpp"
#include "taskalloc/random.hpp"

using namespace taskalloc;
using namespace taskalloc::models;
using textprep::SparseVector;

namespace {

using Strings = std::vector<std::string>;

void check_distribution(const ProbabilityVector& p) {
    double sum = 0.0;
    for (double v : p) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
        sum += v;
    }
    CHECK(std::abs(sum - 1.0) <= 1e-6);
}

struct Split {
    Strings train_titles, test_titles;
    std::vector<Role> train_labels, test_labels;
};

Split synthetic_split(std::size_t per_class, std::uint64_t seed) {
    const auto c = testing::synthetic_corpus(per_class, seed);
    const auto [train, test] = corpus::split_train_validation(c, 0.67, seed);
    return {train.titles(), test.titles(), train.roles(), test.roles()};
}

double accuracy_of(const TrainedModel& m, const Strings& titles, const std::vector<Role>& labels) {
    std::size_t ok = 0;
    for (std::size_t i = 0; i < titles.size(); ++i) ok += m.predict(titles[i]) == labels[i];
    return static_cast<double>(ok) / static_cast<double>(titles.size());
}

Hyperparameters small_neural() {
    Hyperparameters hp;
    hp.embedding_dim = 16;
    hp.hidden_units = 16;
    hp.cnn_filters = 16;
    hp.learning_rate = 1e-2;
    return hp;
}

}  // namespace

TEST_CASE("categorical cross-entropy examples") {
    const std::vector<double> y0{1, 0, 0, 0, 0, 0, 0};
    CHECK(categorical_cross_entropy(y0, y0) == doctest::Approx(0.0));
    const std::vector<double> uniform(7, 1.0 / 7.0);
    CHECK(categorical_cross_entropy(y0, uniform) == doctest::Approx(std::log(7.0)).epsilon(1e-12));
    CHECK(categorical_cross_entropy(std::vector<double>{0, 1, 0, 0, 0, 0, 0},
                                    std::vector<double>{0.5, 0.5, 0, 0, 0, 0, 0}) ==
          doctest::Approx(std::log(2.0)).epsilon(1e-12));
    CHECK(std::isfinite(categorical_cross_entropy(y0, std::vector<double>{0, 1, 0, 0, 0, 0, 0})));
    CHECK_THROWS_AS(categorical_cross_entropy(y0, std::vector<double>{1.0}), Error);

    Rng rng(3);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<double> s(7);
        for (auto& v : s) v = rng.uniform(-5, 5);
        const auto p = softmax(s);
        std::vector<double> y(7, 0.0);
        y[rng.below(7)] = 1.0;
        CHECK(categorical_cross_entropy(y, p) >= 0.0);
    }
}

TEST_CASE("softmax examples") {
    for (double v : softmax(std::vector<double>(7, 0.0))) CHECK(v == doctest::Approx(1.0 / 7.0));
    const auto big = softmax(std::vector<double>{1000, 0, 0, 0, 0, 0, 0});
    CHECK(big[0] == doctest::Approx(1.0));
    CHECK(std::isfinite(big[1]));
    const auto two = softmax(std::vector<double>{std::log(2.0), 0.0});
    CHECK(two[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    CHECK(two[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("kind names round trip") {
    for (auto k : kAllKinds) {
        CHECK(parse_kind(kind_name(k)) == k);
        CHECK(parse_kind(kind_label(k)) == k);
    }
    CHECK_FALSE(parse_kind("use").has_value());
    CHECK(is_neural(ModelKind::LSTM));
    CHECK_FALSE(is_neural(ModelKind::RF));
}

TEST_CASE("hyperparameters validate and parse") {
    Hyperparameters hp;
    hp.set("learning_rate", "0.01");
    hp.set("epochs", "5");
    CHECK(hp.learning_rate == 0.01);
    CHECK(hp.epochs == 5);
    CHECK_THROWS_AS(hp.set("nonsense", "1"), Error);
    CHECK_THROWS_AS(hp.set("epochs", "abc"), Error);
    hp.dropout_rate = 1.0;
    CHECK_THROWS_AS(hp.validate(), Error);
    CHECK(Hyperparameters::from_json(Hyperparameters{}.to_json()) == Hyperparameters{});
}

TEST_CASE("naive Bayes matches a brute-force Bayes oracle") {
    const Strings titles = {"buy pizza", "eat pizza", "fix bug", "fix login"};
    const std::vector<Role> labels = {Role::FrontEndDeveloper, Role::FrontEndDeveloper, Role::BackEndDeveloper,
                                      Role::BackEndDeveloper};
    Hyperparameters hp;
    const auto model = train_model(ModelKind::MNB, titles, labels, hp);

    for (const std::string query : {"fix pizza", "buy buy login", "eat", "unseen words"}) {
        // Enumerate the formula directly over strings.
        std::set<std::string> vocab;
        for (const auto& t : titles)
            for (const auto& w : textprep::split_tokens(t)) vocab.insert(w);
        const double F = static_cast<double>(vocab.size());
        std::array<double, kRoleCount> log_joint;
        log_joint.fill(-INFINITY);
        for (Role c : {Role::FrontEndDeveloper, Role::BackEndDeveloper}) {
            std::map<std::string, double> counts;
            double total = 0;
            double docs = 0;
            for (std::size_t i = 0; i < titles.size(); ++i) {
                if (labels[i] != c) continue;
                ++docs;
                for (const auto& w : textprep::split_tokens(titles[i])) {
                    ++counts[w];
                    ++total;
                }
            }
            double lj = std::log(docs / static_cast<double>(titles.size()));
            for (const auto& w : textprep::split_tokens(query)) {
                if (!vocab.count(w)) continue;
                lj += std::log((counts[w] + 1.0) / (total + F));
            }
            log_joint[role_index(c)] = lj;
        }
        const double mx = *std::max_element(log_joint.begin(), log_joint.end());
        double z = 0;
        for (double v : log_joint) z += std::exp(v - mx);
        const auto p = model.predict_text(query);
        for (std::size_t c = 0; c < kRoleCount; ++c) {
            const double expected = std::exp(log_joint[c] - mx) / z;
            CHECK(std::abs(p[c] - expected) <= 1e-9);
        }
    }
}

TEST_CASE("naive Bayes degenerate and smoothing cases") {
    const auto one_class = train_model(ModelKind::MNB, {"alpha beta", "gamma"},
                                       {Role::Content, Role::Content}, Hyperparameters{});
    for (const std::string q : {"alpha", "gamma beta", "zzz"}) {
        const auto p = one_class.predict_text(q);
        CHECK(p[role_index(Role::Content)] == doctest::Approx(1.0));
    }

    const auto featurizer = textprep::Featurizer::fit_bag({"buy pizza", "fix bug"}, textprep::BagWeighting::Counts);
    const auto batch = make_bag_batch(featurizer, {"buy pizza", "fix bug"}, {Role::Content, Role::Developer});
    const auto nb = NaiveBayes::fit(batch, 1.0);
    const auto bug = *featurizer.idf_table().column("bug");
    CHECK(std::isfinite(nb.log_likelihood()[role_index(Role::Content) * nb.dimension() + bug]));
}

TEST_CASE("naive Bayes is training-order invariant") {
    const auto c = testing::fixture_corpus();
    auto titles = c.titles();
    auto labels = c.roles();
    const auto a = train_model(ModelKind::MNB, titles, labels, Hyperparameters{});
    std::vector<std::size_t> perm(titles.size());
    std::iota(perm.begin(), perm.end(), 0);
    Rng rng(11);
    rng.shuffle(std::span<std::size_t>(perm));
    // Keep the column order fixed by reusing the first model's featurizer.
    Strings t2;
    std::vector<Role> l2;
    for (auto i : perm) {
        t2.push_back(titles[i]);
        l2.push_back(labels[i]);
    }
    const auto nb1 = NaiveBayes::fit(make_bag_batch(a.featurizer(), titles, labels), 1.0);
    const auto nb2 = NaiveBayes::fit(make_bag_batch(a.featurizer(), t2, l2), 1.0);
    CHECK(nb1.log_prior() == nb2.log_prior());
    CHECK(nb1.log_likelihood() == nb2.log_likelihood());
}

TEST_CASE("every kind separates the synthetic corpus and emits distributions") {
    const auto s = synthetic_split(20, 42);
    for (auto kind : kAllKinds) {
        CAPTURE(kind_name(kind));
        auto hp = is_neural(kind) ? small_neural() : Hyperparameters{};
        if (kind == ModelKind::CNN) hp.cnn_width = 1;
        if (kind == ModelKind::RF) hp.trees = 30;
        const auto m = train_model(kind, s.train_titles, s.train_labels, hp);
        CHECK(accuracy_of(m, s.train_titles, s.train_labels) >= 0.9);
        for (const auto& t : s.test_titles) check_distribution(m.predict_text(t));
        check_distribution(m.predict_text("zzz qqq"));
        CHECK(m.parameter_count() > 0);
        CHECK_EQ(is_neural(kind), !m.history().empty());
    }
}

TEST_CASE("feature family mismatch is rejected") {
    const auto s = synthetic_split(5, 1);
    const auto mnb = train_model(ModelKind::MNB, s.train_titles, s.train_labels, Hyperparameters{});
    auto hp = small_neural();
    hp.epochs = 1;
    const auto lstm = train_model(ModelKind::LSTM, s.train_titles, s.train_labels, hp);
    CHECK_THROWS_AS(mnb.predict_proba(textprep::TokenSequence{{0, 1}}), Error);
    CHECK_THROWS_AS(lstm.predict_proba(SparseVector{}), Error);
}

TEST_CASE("fits are deterministic for a fixed seed") {
    const auto s = synthetic_split(8, 5);
    for (auto kind : kAllKinds) {
        CAPTURE(kind_name(kind));
        auto hp = is_neural(kind) ? small_neural() : Hyperparameters{};
        hp.epochs = 5;
        hp.trees = 10;
        const auto a = train_model(kind, s.train_titles, s.train_labels, hp);
        const auto b = train_model(kind, s.train_titles, s.train_labels, hp);
        for (const auto& t : s.test_titles) CHECK(a.predict_text(t) == b.predict_text(t));
        CHECK(a.history().size() == b.history().size());
        for (std::size_t e = 0; e < a.history().size(); ++e) {
            CHECK(a.history()[e].loss == b.history()[e].loss);
            CHECK(a.history()[e].accuracy == b.history()[e].accuracy);
        }
    }
}

TEST_CASE("logistic regression regularization limit") {
    const auto s = synthetic_split(10, 2);
    Hyperparameters hp;
    hp.l2_lambda = 1e4;
    const auto m = train_model(ModelKind::LR, s.train_titles, s.train_labels, hp);
    const auto& lr = dynamic_cast<const LogisticRegression&>(m.classifier());
    const std::size_t weights = kRoleCount * m.featurizer().dimension();
    double max_w = 0;
    for (std::size_t i = 0; i < weights; ++i) max_w = std::max(max_w, std::abs(lr.parameters()[i]));
    CHECK(max_w < 1e-2);
    const auto p = m.predict_text(s.test_titles.front());
    for (double v : p) CHECK(std::abs(v - 1.0 / 7.0) < 0.05);
}

TEST_CASE("logistic regression separates a two-class set") {
    const Strings titles = {"red apple", "red cherry", "blue sky", "blue ocean"};
    const std::vector<Role> labels = {Role::Content, Role::Content, Role::Stakeholder, Role::Stakeholder};
    Hyperparameters hp;
    hp.epochs = 200;
    const auto m = train_model(ModelKind::LR, titles, labels, hp);
    CHECK(accuracy_of(m, titles, labels) == 1.0);
}

TEST_CASE("linear SVC decision rule and scale invariance") {
    std::array<double, kRoleCount> margins{2, -1, 0, -3, -INFINITY, 0.5, 1};
    auto p = LinearSvc::margins_to_proba(margins);
    check_distribution(p);
    CHECK(argmax_role(p) == Role::FrontEndDeveloper);
    CHECK(p[4] == 0.0);

    Rng rng(4);
    for (int trial = 0; trial < 200; ++trial) {
        std::array<double, kRoleCount> m{};
        for (auto& v : m) v = rng.uniform(-3, 3);
        const double scale = rng.uniform(0.01, 50);
        auto scaled = m;
        for (auto& v : scaled) v *= scale;
        CHECK(argmax_role(LinearSvc::margins_to_proba(m)) == argmax_role(LinearSvc::margins_to_proba(scaled)));
        CHECK(argmax_role(CosineCentroid::scores_to_proba(m)) ==
              argmax_role(CosineCentroid::scores_to_proba(scaled)));
    }

    const Strings titles = {"red apple", "red cherry", "blue sky", "blue ocean"};
    const std::vector<Role> labels = {Role::Content, Role::Content, Role::Stakeholder, Role::Stakeholder};
    const auto m = train_model(ModelKind::SVC, titles, labels, Hyperparameters{});
    CHECK(accuracy_of(m, titles, labels) == 1.0);
}

TEST_CASE("cosine centroid identity, orthogonality and hand table") {
    const Strings titles = {"alpha", "beta gamma", "gamma delta", "delta"};
    const std::vector<Role> labels = {Role::FrontEndDeveloper, Role::BackEndDeveloper, Role::BackEndDeveloper,
                                      Role::Developer};
    const auto featurizer = textprep::Featurizer::fit_bag(titles, textprep::BagWeighting::TfIdf);
    const auto batch = make_bag_batch(featurizer, titles, labels);
    const auto cs = CosineCentroid::fit(batch);

    const auto& alpha = batch.features[0];
    const auto sims = cs.similarities(alpha);
    CHECK(sims[0] == doctest::Approx(1.0));
    CHECK(argmax_role(cs.predict_proba(textprep::Feature{alpha})) == Role::FrontEndDeveloper);

    const auto orth = cs.similarities(SparseVector{});
    for (double v : orth) CHECK(v == 0.0);
    for (double v : CosineCentroid::scores_to_proba(orth)) CHECK(v == doctest::Approx(1.0 / 7.0));

    // Hand table: centroid = mean of the class' normalized vectors, score =
    // dot(query, centroid) / (|query| |centroid|).
    const auto& table = featurizer.idf_table();
    std::array<std::vector<double>, kRoleCount> centroid;
    std::array<double, kRoleCount> n{};
    for (auto& v : centroid) v.assign(table.size(), 0.0);
    for (std::size_t i = 0; i < titles.size(); ++i) {
        const auto x = table.transform(titles[i]);
        const auto c = role_index(labels[i]);
        for (std::size_t k = 0; k < x.nnz(); ++k) centroid[c][x.indices[k]] += x.values[k];
        ++n[c];
    }
    const auto q = table.transform("gamma alpha");
    for (std::size_t c = 0; c < kRoleCount; ++c) {
        double expected = 0;
        if (n[c] > 0) {
            for (auto& v : centroid[c]) v /= n[c];
            const double norm = std::sqrt(std::inner_product(centroid[c].begin(), centroid[c].end(),
                                                             centroid[c].begin(), 0.0));
            expected = textprep::dot(q, centroid[c]) / (q.norm() * norm);
        }
        CHECK(cs.similarities(q)[c] == doctest::Approx(expected).epsilon(1e-12));
    }
}

TEST_CASE("random forest degenerate cases, determinism and thread independence") {
    const auto one = train_model(ModelKind::RF, {"a b", "c d"}, {Role::Stakeholder, Role::Stakeholder},
                                 Hyperparameters{});
    CHECK(one.predict_text("a")[role_index(Role::Stakeholder)] == 1.0);

    const auto featurizer = textprep::Featurizer::fit_bag({"red apple", "blue sky"}, textprep::BagWeighting::TfIdf);
    const auto batch = make_bag_batch(featurizer, {"red apple", "blue sky"}, {Role::Content, Role::Developer});
    const std::vector<std::size_t> rows{0, 1};
    const auto tree = DecisionTree::grow(batch, rows, 4, 1);
    CHECK(tree.predict(batch.features[0]) == Role::Content);
    CHECK(tree.predict(batch.features[1]) == Role::Developer);

    const auto c = testing::fixture_corpus();
    const auto bag = textprep::Featurizer::fit_bag(c.titles(), textprep::BagWeighting::TfIdf);
    const auto full = make_bag_batch(bag, c.titles(), c.roles());
    Hyperparameters hp;
    hp.trees = 24;
    const auto serial = RandomForest::fit(full, hp);
    hp.threads = 4;
    const auto parallel = RandomForest::fit(full, hp);
    CHECK(serial.trees() == parallel.trees());
    CHECK(RandomForest::fit(full, hp).trees() == serial.trees());
}

TEST_CASE("LSTM cell step fixed point and gate saturation") {
    const std::size_t H = 3, D = 2;
    std::vector<double> kernel(4 * H * D, 0.0), recurrent(4 * H * H, 0.0), bias(4 * H, 0.0);
    LstmCellWeights w{D, H, kernel, recurrent, bias};
    const std::vector<double> x(D, 0.0), h0(H, 0.0), c0(H, 0.0);
    const auto s = lstm_cell_step(x, h0, c0, w);
    for (double v : s.h) CHECK(v == 0.0);
    for (double v : s.c) CHECK(v == 0.0);

    // Forget gate saturated open, input gate saturated shut.
    for (std::size_t j = 0; j < H; ++j) {
        bias[j] = -1e3;
        bias[H + j] = 1e3;
    }
    const std::vector<double> c_prev{0.3, -0.7, 1.5};
    const std::vector<double> x1{0.4, -0.2};
    const auto t = lstm_cell_step(x1, std::vector<double>{0.1, 0.2, 0.3}, c_prev, w);
    for (std::size_t j = 0; j < H; ++j) CHECK(t.c[j] == doctest::Approx(c_prev[j]).epsilon(1e-12));

    CHECK_THROWS_AS(lstm_cell_step(std::vector<double>(3, 0.0), h0, c0, w), Error);
}

TEST_CASE("LSTM on an all-padding sequence returns a distribution") {
    const auto s = synthetic_split(5, 8);
    auto hp = small_neural();
    hp.epochs = 2;
    const auto m = train_model(ModelKind::LSTM, s.train_titles, s.train_labels, hp);
    const textprep::TokenSequence pad{std::vector<std::uint32_t>(m.featurizer().max_len(), 0)};
    check_distribution(m.predict_proba(pad));
    check_distribution(m.predict_text("the and of"));
}

TEST_CASE("neural training with dropout 0 is reproducible and loss falls") {
    const auto s = synthetic_split(15, 3);
    for (auto kind : {ModelKind::LSTM, ModelKind::CNN}) {
        CAPTURE(kind_name(kind));
        auto hp = small_neural();
        hp.learning_rate = Hyperparameters{}.learning_rate;
        hp.dropout_rate = 0.0;
        hp.early_stop_patience = 0;
        hp.epochs = 12;
        const auto a = train_model(kind, s.train_titles, s.train_labels, hp);
        const auto b = train_model(kind, s.train_titles, s.train_labels, hp);
        REQUIRE(a.history().size() == 12);
        for (std::size_t e = 0; e < 12; ++e) CHECK(a.history()[e].loss == b.history()[e].loss);
        for (std::size_t e = 1; e < 12; ++e) CHECK(a.history()[e].loss <= a.history()[e - 1].loss);
        CHECK(a.history().back().accuracy >= a.history().front().accuracy);
    }
}

TEST_CASE("early stopping shortens the history") {
    const auto s = synthetic_split(10, 4);
    auto hp = small_neural();
    hp.cnn_width = 1;
    hp.early_stop_patience = 1;
    hp.early_stop_warmup = 0;
    hp.epochs = 30;
    const auto m = train_model(ModelKind::CNN, s.train_titles, s.train_labels, hp);
    CHECK(m.history().size() < 30);
    hp.early_stop_patience = 0;
    CHECK(train_model(ModelKind::CNN, s.train_titles, s.train_labels, hp).history().size() == 30);
}

TEST_CASE("pretrained embeddings seed the embedding rows") {
    const auto s = synthetic_split(5, 9);
    testing::TempDir dir("emb");
    testing::write_file(dir / "vec.txt", "2 4\nstylesheet 1 0 0 0\nendpoint 0 1 0 0\n");
    auto hp = small_neural();
    hp.epochs = 1;
    const auto m = train_model(ModelKind::LSTM, s.train_titles, s.train_labels, hp, dir / "vec.txt");
    CHECK(m.pretrained());
    const auto& lstm = dynamic_cast<const LstmClassifier&>(m.classifier());
    CHECK(lstm.shape().embedding_dim == 4);
}
