#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "taskalloc/corpus.hpp"
#include "taskalloc/models/model.hpp"

namespace taskalloc::eval {

/// correct / total. Throws Error(LengthMismatch) or Error(EmptyInput).
double accuracy(std::span<const Role> predictions, std::span<const Role> truths);

/// 7x7 counts indexed [truth][prediction].
class ConfusionMatrix {
public:
    ConfusionMatrix() = default;
    /// Throws as accuracy().
    ConfusionMatrix(std::span<const Role> predictions, std::span<const Role> truths);

    void add(Role truth, Role predicted) noexcept;

    std::size_t count(Role truth, Role predicted) const noexcept {
        return counts_[role_index(truth)][role_index(predicted)];
    }
    std::size_t total() const noexcept { return total_; }
    std::size_t row_sum(Role truth) const noexcept;
    std::size_t column_sum(Role predicted) const noexcept;

    std::size_t true_positives(Role x) const noexcept { return count(x, x); }
    std::size_t false_negatives(Role x) const noexcept { return row_sum(x) - count(x, x); }
    std::size_t false_positives(Role x) const noexcept { return column_sum(x) - count(x, x); }
    std::size_t true_negatives(Role x) const noexcept;

    /// trace / total; 0 for an empty matrix.
    double accuracy() const noexcept;
    /// One-vs-rest (TP_x + TN_x) / total for class x.
    double per_class_accuracy(Role x) const noexcept;
    /// The per-class accuracies summed over all classes, as the formula is
    /// printed; exceeds 1 for any non-empty matrix.
    double summed_per_class_accuracy() const noexcept;

    nlohmann::json to_json() const;

private:
    std::array<std::array<std::size_t, kRoleCount>, kRoleCount> counts_{};
    std::size_t total_ = 0;
};

/// K sets of sample positions, each ascending.
using FoldSplit = std::vector<std::vector<std::size_t>>;

/// Stratified, seeded split of positions 0..n-1 into K folds: positions are
/// shuffled within each class, the classes are concatenated in role order,
/// and position i of that list goes to fold i mod K. Fold sizes and every
/// per-class count differ by at most one across folds.
/// Throws Error(InvalidArgument) for K < 2 or a label count other than n,
/// Error(KTooLarge) for K > n.
FoldSplit kfold_split(std::size_t n, std::size_t k, std::span<const Role> labels, std::uint64_t seed);

struct GridPointResult {
    models::Hyperparameters hyperparameters;
    std::vector<double> fold_accuracy;
    double mean = 0.0;
    /// Population standard deviation of the fold accuracies.
    double stddev = 0.0;
    /// Trainable parameters of the fold-0 model.
    std::size_t parameter_count = 0;
};

struct CvReport {
    models::ModelKind kind = models::ModelKind::MNB;
    std::size_t k = 0;
    std::uint64_t seed = 0;
    std::vector<GridPointResult> grid;
    std::size_t winner = 0;

    const GridPointResult& best() const { return grid.at(winner); }
    nlohmann::json to_json() const;
    /// Tab-separated, one line per grid point.
    std::string to_tsv() const;
};

struct CvOptions {
    std::size_t k = 10;
    /// Master seed; the split and every fold's training seed derive from it.
    std::uint64_t seed = 42;
    /// Folds trained concurrently; the report does not depend on it.
    std::size_t threads = 1;
    std::optional<std::filesystem::path> embeddings;
};

/// Trains every grid point on each K-1 fold union and scores the held fold.
/// The winner has the highest mean accuracy; ties go to fewer parameters,
/// then to the earlier grid point. Training errors are rethrown with the
/// fold index prepended. Throws Error(KTooLarge) when the corpus has fewer
/// than K records and Error(InvalidArgument) for an empty grid.
CvReport cross_validate(models::ModelKind kind, const corpus::Corpus& corpus,
                        const std::vector<models::Hyperparameters>& grid, const CvOptions& options = {});

struct HoldoutResult {
    /// Mean categorical cross-entropy, neural kinds only.
    std::optional<double> loss;
    double accuracy = 0.0;
    ConfusionMatrix confusion;
    std::vector<Role> predictions;
};

/// Throws Error(EmptyValidation).
HoldoutResult evaluate_holdout(const models::TrainedModel& model, const corpus::Corpus& validation);

/// Per-epoch (loss, accuracy). Throws Error(NoHistory) for non-neural kinds
/// or an empty history.
const models::TrainingHistory& training_curves(const models::TrainedModel& model);
/// "epoch\tloss\taccuracy" header and one line per epoch, epochs from 1.
std::string format_curves(const models::TrainingHistory& history);

struct BenchmarkRow {
    models::ModelKind kind = models::ModelKind::MNB;
    bool pretrained = false;
    std::optional<double> loss;
    std::optional<double> accuracy;
    /// Set when the row has no numbers (missing embeddings, training failure).
    std::string note;
    models::TrainingHistory history;
    /// project id -> accuracy over that project's validation records.
    std::map<std::string, double> project_accuracy;
};

struct BenchmarkReport {
    std::uint64_t seed = 0;
    double train_fraction = 0.0;
    std::size_t train_size = 0;
    std::size_t validation_size = 0;
    models::Hyperparameters hyperparameters;
    std::vector<BenchmarkRow> rows;
    /// Projects with validation records, in corpus order, and their counts.
    std::vector<std::string> projects;
    std::map<std::string, std::size_t> project_validation_size;

    /// Header plus one line per row: kind, pretrained (P or !P), loss, accuracy, note.
    std::string to_tsv() const;
    /// One line per project, one column per row.
    std::string project_table_tsv() const;
    /// Training curves of every neural row, each block headed by "# <kind> <P|!P>".
    std::string curves_tsv() const;
    nlohmann::json to_json() const;
};

struct BenchmarkOptions {
    std::vector<models::ModelKind> kinds{models::kAllKinds.begin(), models::kAllKinds.end()};
    models::Hyperparameters hyperparameters;
    double train_fraction = 0.67;
    /// word2vec text file for the pretrained neural rows.
    std::optional<std::filesystem::path> embeddings;
};

/// One shared seeded split (seed = hyperparameters.seed); each kind trains
/// on the same train part and is scored on the same validation part. Neural
/// kinds get a pretrained and a non-pretrained row. A failing row carries
/// its error text in `note` and does not stop the others.
BenchmarkReport benchmark(const corpus::Corpus& corpus, const BenchmarkOptions& options = {});

}  // namespace taskalloc::eval
