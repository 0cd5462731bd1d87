#pragma once

#include <cstdint>

#include "taskalloc/models/common.hpp"

namespace taskalloc::models {

struct TreeNode {
    /// -1 marks a leaf.
    std::int32_t feature = -1;
    double threshold = 0.0;
    std::uint32_t left = 0;
    std::uint32_t right = 0;
    Role label = Role::FrontEndDeveloper;
};

class DecisionTree {
public:
    DecisionTree() = default;
    explicit DecisionTree(std::vector<TreeNode> nodes) : nodes_(std::move(nodes)) {}

    /// Gini CART on the given (possibly repeated) sample rows. At each split
    /// `features_per_split` candidates are drawn from the features that are
    /// not constant within the node.
    static DecisionTree grow(const BagBatch& batch, std::span<const std::size_t> rows, std::size_t features_per_split,
                             std::uint64_t seed);

    Role predict(const textprep::SparseVector& x) const;
    const std::vector<TreeNode>& nodes() const noexcept { return nodes_; }

    friend bool operator==(const DecisionTree& a, const DecisionTree& b);

private:
    std::vector<TreeNode> nodes_;
};

/// Bagged Gini trees with sqrt(F) features per split; the output is the
/// normalized vote count. Tree t is seeded from (seed, t), so the forest is
/// the same whether trees are grown serially or on several threads.
class RandomForest final : public Classifier {
public:
    static RandomForest fit(const BagBatch& batch, const Hyperparameters& hp);
    static RandomForest load(const ParameterArchive& archive);
    explicit RandomForest(std::vector<DecisionTree> trees) : trees_(std::move(trees)) {}

    ModelKind kind() const noexcept override { return ModelKind::RF; }
    ProbabilityVector predict_proba(const textprep::Feature& feature) const override;
    std::size_t parameter_count() const noexcept override;
    void save(ParameterArchive& archive) const override;

    const std::vector<DecisionTree>& trees() const noexcept { return trees_; }

private:
    std::vector<DecisionTree> trees_;
};

}  // namespace taskalloc::models
