#include "taskalloc/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <future>
#include <numeric>
#include <sstream>

#include "taskalloc/errors.hpp"
#include "taskalloc/random.hpp"

namespace taskalloc::eval {

namespace {

void check_lengths(std::span<const Role> predictions, std::span<const Role> truths) {
    if (predictions.size() != truths.size()) {
        throw Error(ErrorCode::LengthMismatch, std::to_string(predictions.size()) + " predictions vs " +
                                                   std::to_string(truths.size()) + " truths");
    }
    if (predictions.empty()) throw Error(ErrorCode::EmptyInput, "accuracy of zero predictions is undefined");
}

std::string fixed(double v, int digits = 4) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

std::string row_label(const BenchmarkRow& row) {
    return std::string(models::kind_label(row.kind)) + (models::is_neural(row.kind) ? (row.pretrained ? " P" : " !P") : "");
}

}  // namespace

double accuracy(std::span<const Role> predictions, std::span<const Role> truths) {
    check_lengths(predictions, truths);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < truths.size(); ++i) hits += predictions[i] == truths[i];
    return static_cast<double>(hits) / static_cast<double>(truths.size());
}

// ---------------------------------------------------------------------------

ConfusionMatrix::ConfusionMatrix(std::span<const Role> predictions, std::span<const Role> truths) {
    check_lengths(predictions, truths);
    for (std::size_t i = 0; i < truths.size(); ++i) add(truths[i], predictions[i]);
}

void ConfusionMatrix::add(Role truth, Role predicted) noexcept {
    ++counts_[role_index(truth)][role_index(predicted)];
    ++total_;
}

std::size_t ConfusionMatrix::row_sum(Role truth) const noexcept {
    const auto& row = counts_[role_index(truth)];
    return std::accumulate(row.begin(), row.end(), std::size_t{0});
}

std::size_t ConfusionMatrix::column_sum(Role predicted) const noexcept {
    std::size_t s = 0;
    for (const auto& row : counts_) s += row[role_index(predicted)];
    return s;
}

std::size_t ConfusionMatrix::true_negatives(Role x) const noexcept {
    return total_ - true_positives(x) - false_negatives(x) - false_positives(x);
}

double ConfusionMatrix::accuracy() const noexcept {
    if (total_ == 0) return 0.0;
    std::size_t trace = 0;
    for (Role r : kAllRoles) trace += count(r, r);
    return static_cast<double>(trace) / static_cast<double>(total_);
}

double ConfusionMatrix::per_class_accuracy(Role x) const noexcept {
    if (total_ == 0) return 0.0;
    return static_cast<double>(true_positives(x) + true_negatives(x)) / static_cast<double>(total_);
}

double ConfusionMatrix::summed_per_class_accuracy() const noexcept {
    double s = 0.0;
    for (Role r : kAllRoles) s += per_class_accuracy(r);
    return s;
}

nlohmann::json ConfusionMatrix::to_json() const {
    auto matrix = nlohmann::json::array();
    for (const auto& row : counts_) matrix.push_back(row);
    auto per_class = nlohmann::json::object();
    for (Role r : kAllRoles) {
        per_class[std::string(role_name(r))] = {
            {"tp", true_positives(r)}, {"tn", true_negatives(r)},       {"fp", false_positives(r)},
            {"fn", false_negatives(r)}, {"accuracy", per_class_accuracy(r)},
        };
    }
    return {{"total", total_}, {"matrix", matrix}, {"per_class", per_class}, {"accuracy", accuracy()}};
}

// ---------------------------------------------------------------------------

FoldSplit kfold_split(std::size_t n, std::size_t k, std::span<const Role> labels, std::uint64_t seed) {
    if (k < 2) throw Error(ErrorCode::InvalidArgument, "K must be at least 2, got " + std::to_string(k));
    if (k > n) {
        throw Error(ErrorCode::KTooLarge, "K=" + std::to_string(k) + " exceeds the " + std::to_string(n) + " samples");
    }
    if (labels.size() != n) {
        throw Error(ErrorCode::InvalidArgument, std::to_string(labels.size()) + " labels for " + std::to_string(n) +
                                                    " samples");
    }
    std::array<std::vector<std::size_t>, kRoleCount> by_class;
    for (std::size_t i = 0; i < n; ++i) by_class[role_index(labels[i])].push_back(i);

    Rng rng(derive_seed(seed, "kfold"));
    FoldSplit folds(k);
    std::size_t next = 0;
    for (auto& members : by_class) {
        rng.shuffle(std::span<std::size_t>(members));
        for (std::size_t pos : members) folds[next++ % k].push_back(pos);
    }
    for (auto& f : folds) std::sort(f.begin(), f.end());
    return folds;
}

CvReport cross_validate(models::ModelKind kind, const corpus::Corpus& corpus,
                        const std::vector<models::Hyperparameters>& grid, const CvOptions& options) {
    if (grid.empty()) throw Error(ErrorCode::InvalidArgument, "hyperparameter grid is empty");
    const auto labels = corpus.roles();
    const auto folds = kfold_split(corpus.size(), options.k, labels, derive_seed(options.seed, "cv-split"));

    CvReport report;
    report.kind = kind;
    report.k = options.k;
    report.seed = options.seed;

    for (const auto& base : grid) {
        GridPointResult result;
        result.hyperparameters = base;
        result.fold_accuracy.assign(options.k, 0.0);
        std::vector<std::size_t> params(options.k, 0);

        const auto run_fold = [&](std::size_t f) {
            std::vector<std::size_t> train_pos;
            for (std::size_t g = 0; g < options.k; ++g) {
                if (g != f) train_pos.insert(train_pos.end(), folds[g].begin(), folds[g].end());
            }
            std::sort(train_pos.begin(), train_pos.end());
            auto hp = base;
            hp.seed = derive_seed(options.seed, "cv-fold", f);
            try {
                const auto model = models::train_model(kind, corpus.subset(train_pos), hp, options.embeddings);
                result.fold_accuracy[f] = evaluate_holdout(model, corpus.subset(folds[f])).accuracy;
                params[f] = model.parameter_count();
            } catch (const Error& e) {
                throw Error(e.code(), "fold " + std::to_string(f) + ": " + e.detail());
            }
        };

        if (options.threads <= 1) {
            for (std::size_t f = 0; f < options.k; ++f) run_fold(f);
        } else {
            std::size_t next = 0;
            while (next < options.k) {
                std::vector<std::future<void>> batch;
                for (std::size_t t = 0; t < options.threads && next < options.k; ++t, ++next) {
                    batch.push_back(std::async(std::launch::async, run_fold, next));
                }
                std::exception_ptr first;
                for (auto& fut : batch) {
                    try {
                        fut.get();
                    } catch (...) {
                        if (!first) first = std::current_exception();
                    }
                }
                if (first) std::rethrow_exception(first);
            }
        }

        const double k = static_cast<double>(options.k);
        result.mean = std::accumulate(result.fold_accuracy.begin(), result.fold_accuracy.end(), 0.0) / k;
        double var = 0.0;
        for (double a : result.fold_accuracy) var += (a - result.mean) * (a - result.mean);
        result.stddev = std::sqrt(var / k);
        result.parameter_count = params[0];
        report.grid.push_back(std::move(result));
    }

    for (std::size_t i = 1; i < report.grid.size(); ++i) {
        const auto& cand = report.grid[i];
        const auto& best = report.grid[report.winner];
        if (cand.mean > best.mean || (cand.mean == best.mean && cand.parameter_count < best.parameter_count)) {
            report.winner = i;
        }
    }
    return report;
}

nlohmann::json CvReport::to_json() const {
    auto points = nlohmann::json::array();
    for (const auto& g : grid) {
        points.push_back({{"hyperparameters", g.hyperparameters.to_json()},
                          {"fold_accuracy", g.fold_accuracy},
                          {"mean", g.mean},
                          {"stddev", g.stddev},
                          {"parameter_count", g.parameter_count}});
    }
    return {{"kind", std::string(models::kind_name(kind))},
            {"k", k},
            {"seed", seed},
            {"grid", points},
            {"winner", winner}};
}

std::string CvReport::to_tsv() const {
    std::ostringstream out;
    out << "grid_point\tmean\tstddev\tparameters\tfold_accuracy\twinner\n";
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const auto& g = grid[i];
        out << i << '\t' << fixed(g.mean) << '\t' << fixed(g.stddev) << '\t' << g.parameter_count << '\t';
        for (std::size_t f = 0; f < g.fold_accuracy.size(); ++f) out << (f ? "," : "") << fixed(g.fold_accuracy[f]);
        out << '\t' << (i == winner ? "*" : "") << '\n';
    }
    return out.str();
}

// ---------------------------------------------------------------------------

HoldoutResult evaluate_holdout(const models::TrainedModel& model, const corpus::Corpus& validation) {
    if (validation.empty()) throw Error(ErrorCode::EmptyValidation, "validation corpus is empty");
    HoldoutResult result;
    double loss = 0.0;
    for (const auto& rec : validation.records()) {
        const auto p = model.predict_text(rec.title);
        const auto predicted = models::argmax_role(p);
        result.predictions.push_back(predicted);
        result.confusion.add(rec.role, predicted);
        if (models::is_neural(model.kind())) {
            const auto y = textprep::one_hot(rec.role);
            loss += models::categorical_cross_entropy(y, p);
        }
    }
    result.accuracy = result.confusion.accuracy();
    if (models::is_neural(model.kind())) result.loss = loss / static_cast<double>(validation.size());
    return result;
}

const models::TrainingHistory& training_curves(const models::TrainedModel& model) {
    if (!models::is_neural(model.kind()) || model.history().empty()) {
        throw Error(ErrorCode::NoHistory,
                    std::string(models::kind_label(model.kind())) + " model has no per-epoch training history");
    }
    return model.history();
}

std::string format_curves(const models::TrainingHistory& history) {
    std::string out = "epoch\tloss\taccuracy\n";
    for (std::size_t i = 0; i < history.size(); ++i) {
        out += std::to_string(i + 1) + '\t' + fixed(history[i].loss, 6) + '\t' + fixed(history[i].accuracy, 6) + '\n';
    }
    return out;
}

// ---------------------------------------------------------------------------

BenchmarkReport benchmark(const corpus::Corpus& corpus, const BenchmarkOptions& options) {
    const auto& hp = options.hyperparameters;
    const auto [train, validation] = corpus::split_train_validation(corpus, options.train_fraction, hp.seed);
    if (validation.empty()) throw Error(ErrorCode::EmptyValidation, "split left no validation records");

    BenchmarkReport report;
    report.seed = hp.seed;
    report.train_fraction = options.train_fraction;
    report.train_size = train.size();
    report.validation_size = validation.size();
    report.hyperparameters = hp;
    for (const auto& [id, positions] : validation.project_index()) report.project_validation_size[id] = positions.size();
    // Corpus order, not validation order, so the table lists projects as the input does.
    std::vector<std::string> ordered;
    for (const auto& id : corpus.project_ids()) {
        if (validation.has_project(id)) ordered.push_back(id);
    }
    report.projects = std::move(ordered);

    const auto run = [&](models::ModelKind kind, bool pretrained) {
        BenchmarkRow row;
        row.kind = kind;
        row.pretrained = pretrained;
        if (pretrained && !options.embeddings) {
            row.note = "unavailable: no pretrained embeddings supplied";
            return row;
        }
        try {
            const auto model =
                models::train_model(kind, train, hp, pretrained ? options.embeddings : std::nullopt);
            const auto result = evaluate_holdout(model, validation);
            row.loss = result.loss;
            row.accuracy = result.accuracy;
            row.history = model.history();
            for (const auto& [id, positions] : validation.project_index()) {
                std::size_t hits = 0;
                for (auto pos : positions) hits += result.predictions[pos] == validation[pos].role;
                row.project_accuracy[id] = static_cast<double>(hits) / static_cast<double>(positions.size());
            }
        } catch (const Error& e) {
            row.note = std::string("failed: ") + e.what();
        }
        return row;
    };

    for (auto kind : options.kinds) {
        if (models::is_neural(kind)) report.rows.push_back(run(kind, true));
        report.rows.push_back(run(kind, false));
    }
    return report;
}

std::string BenchmarkReport::to_tsv() const {
    std::ostringstream out;
    out << "kind\tpretrained\tloss\taccuracy\tnote\n";
    for (const auto& row : rows) {
        out << models::kind_label(row.kind) << '\t' << (row.pretrained ? "P" : "!P") << '\t'
            << (row.loss ? fixed(*row.loss) : "N/A") << '\t' << (row.accuracy ? fixed(*row.accuracy) : "N/A") << '\t'
            << row.note << '\n';
    }
    return out.str();
}

std::string BenchmarkReport::project_table_tsv() const {
    std::ostringstream out;
    out << "project_id\tvalidation_records";
    for (const auto& row : rows) out << '\t' << row_label(row);
    out << '\n';
    for (const auto& id : projects) {
        out << id << '\t' << project_validation_size.at(id);
        for (const auto& row : rows) {
            const auto it = row.project_accuracy.find(id);
            out << '\t' << (it == row.project_accuracy.end() ? "N/A" : fixed(it->second));
        }
        out << '\n';
    }
    return out.str();
}

std::string BenchmarkReport::curves_tsv() const {
    std::string out;
    for (const auto& row : rows) {
        if (!models::is_neural(row.kind) || row.history.empty()) continue;
        out += "# " + row_label(row) + '\n' + format_curves(row.history);
    }
    return out;
}

nlohmann::json BenchmarkReport::to_json() const {
    auto jrows = nlohmann::json::array();
    for (const auto& row : rows) {
        nlohmann::json j = {{"kind", std::string(models::kind_name(row.kind))},
                            {"label", std::string(models::kind_label(row.kind))},
                            {"pretrained", row.pretrained},
                            {"loss", row.loss ? nlohmann::json(*row.loss) : nlohmann::json(nullptr)},
                            {"accuracy", row.accuracy ? nlohmann::json(*row.accuracy) : nlohmann::json(nullptr)},
                            {"epochs", row.history.size()},
                            {"project_accuracy", row.project_accuracy}};
        if (!row.note.empty()) j["note"] = row.note;
        jrows.push_back(std::move(j));
    }
    auto project_rows = nlohmann::json::array();
    for (const auto& id : projects) {
        project_rows.push_back({{"project_id", id}, {"validation_records", project_validation_size.at(id)}});
    }
    return {{"seed", seed},
            {"train_fraction", train_fraction},
            {"train_size", train_size},
            {"validation_size", validation_size},
            {"hyperparameters", hyperparameters.to_json()},
            {"rows", jrows},
            {"projects", project_rows}};
}

}  // namespace taskalloc::eval
