#include "taskalloc/models/random_forest.hpp"

#include <algorithm>
#include <cmath>
#include <thread>
#include <unordered_map>

#include "taskalloc/errors.hpp"
#include "taskalloc/random.hpp"

namespace taskalloc::models {

namespace {

using Counts = std::array<double, kRoleCount>;

double gini(const Counts& counts, double total) {
    if (total <= 0.0) return 0.0;
    double s = 0.0;
    for (double c : counts) s += (c / total) * (c / total);
    return 1.0 - s;
}

Role majority(const Counts& counts) {
    return static_cast<Role>(std::max_element(counts.begin(), counts.end()) - counts.begin());
}

struct Split {
    std::int32_t feature = -1;
    double threshold = 0.0;
    double impurity = 0.0;
};

struct ValueLabel {
    double value;
    std::size_t label;
};

// Best threshold on one feature. `nonzero` holds the samples with a stored
// value; every other sample in the node is an implicit 0.
Split best_split_on(std::uint32_t feature, std::vector<ValueLabel>& nonzero, const Counts& node_counts,
                    double node_total) {
    std::sort(nonzero.begin(), nonzero.end(), [](const ValueLabel& a, const ValueLabel& b) {
        return a.value < b.value || (a.value == b.value && a.label < b.label);
    });
    Counts zero_counts = node_counts;
    for (const auto& e : nonzero) zero_counts[e.label] -= 1.0;
    const double zero_total = node_total - static_cast<double>(nonzero.size());

    // Walk distinct values in order, with the implicit zeros merged in.
    struct Group {
        double value;
        Counts counts;
        double total;
    };
    std::vector<Group> groups;
    bool zeros_placed = zero_total <= 0.0;
    const auto push = [&](double v, const Counts& c, double n) {
        if (!groups.empty() && groups.back().value == v) {
            for (std::size_t k = 0; k < kRoleCount; ++k) groups.back().counts[k] += c[k];
            groups.back().total += n;
        } else {
            groups.push_back({v, c, n});
        }
    };
    for (const auto& e : nonzero) {
        if (!zeros_placed && e.value > 0.0) {
            push(0.0, zero_counts, zero_total);
            zeros_placed = true;
        }
        Counts one{};
        one[e.label] = 1.0;
        push(e.value, one, 1.0);
    }
    if (!zeros_placed) push(0.0, zero_counts, zero_total);

    Split best;
    best.impurity = std::numeric_limits<double>::infinity();
    Counts left{};
    double left_total = 0.0;
    for (std::size_t g = 0; g + 1 < groups.size(); ++g) {
        for (std::size_t k = 0; k < kRoleCount; ++k) left[k] += groups[g].counts[k];
        left_total += groups[g].total;
        Counts right{};
        for (std::size_t k = 0; k < kRoleCount; ++k) right[k] = node_counts[k] - left[k];
        const double right_total = node_total - left_total;
        const double imp = (left_total * gini(left, left_total) + right_total * gini(right, right_total)) / node_total;
        if (imp < best.impurity) {
            best.impurity = imp;
            best.feature = static_cast<std::int32_t>(feature);
            best.threshold = 0.5 * (groups[g].value + groups[g + 1].value);
        }
    }
    return best;
}

}  // namespace

DecisionTree DecisionTree::grow(const BagBatch& batch, std::span<const std::size_t> rows,
                                std::size_t features_per_split, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<TreeNode> nodes;
    struct Pending {
        std::uint32_t node;
        std::vector<std::size_t> rows;
    };
    std::vector<Pending> stack;
    nodes.emplace_back();
    stack.push_back({0, std::vector<std::size_t>(rows.begin(), rows.end())});

    while (!stack.empty()) {
        Pending job = std::move(stack.back());
        stack.pop_back();

        Counts counts{};
        for (auto s : job.rows) counts[role_index(batch.labels[s])] += 1.0;
        const double total = static_cast<double>(job.rows.size());
        nodes[job.node].label = majority(counts);
        const double parent = gini(counts, total);
        if (job.rows.size() < 2 || parent == 0.0) continue;

        // Features with a stored value somewhere in the node, grouped per feature.
        std::unordered_map<std::uint32_t, std::vector<ValueLabel>> by_feature;
        for (auto s : job.rows) {
            const auto& x = batch.features[s];
            const auto label = role_index(batch.labels[s]);
            for (std::size_t k = 0; k < x.indices.size(); ++k) {
                if (x.values[k] != 0.0) by_feature[x.indices[k]].push_back({x.values[k], label});
            }
        }
        std::vector<std::uint32_t> candidates;
        for (const auto& [f, entries] : by_feature) {
            bool constant = entries.size() == job.rows.size();
            if (constant) {
                for (const auto& e : entries) {
                    if (e.value != entries.front().value) {
                        constant = false;
                        break;
                    }
                }
            }
            if (!constant) candidates.push_back(f);
        }
        if (candidates.empty()) continue;
        std::sort(candidates.begin(), candidates.end());

        const std::size_t draw = std::min(features_per_split, candidates.size());
        Split best;
        best.impurity = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < draw; ++i) {
            const auto j = i + static_cast<std::size_t>(rng.below(candidates.size() - i));
            std::swap(candidates[i], candidates[j]);
            auto& entries = by_feature[candidates[i]];
            const auto split = best_split_on(candidates[i], entries, counts, total);
            if (split.impurity < best.impurity) best = split;
        }
        if (best.feature < 0 || !(best.impurity < parent - 1e-12)) continue;

        std::vector<std::size_t> left_rows, right_rows;
        for (auto s : job.rows) {
            const double v = batch.features[s].get(static_cast<std::uint32_t>(best.feature));
            (v <= best.threshold ? left_rows : right_rows).push_back(s);
        }
        const auto left_id = static_cast<std::uint32_t>(nodes.size());
        nodes.emplace_back();
        const auto right_id = static_cast<std::uint32_t>(nodes.size());
        nodes.emplace_back();
        nodes[job.node].feature = best.feature;
        nodes[job.node].threshold = best.threshold;
        nodes[job.node].left = left_id;
        nodes[job.node].right = right_id;
        // Right first so the left subtree is expanded next (depth-first, stable ids).
        stack.push_back({right_id, std::move(right_rows)});
        stack.push_back({left_id, std::move(left_rows)});
    }
    return DecisionTree(std::move(nodes));
}

Role DecisionTree::predict(const textprep::SparseVector& x) const {
    std::uint32_t n = 0;
    while (nodes_[n].feature >= 0) {
        const double v = x.get(static_cast<std::uint32_t>(nodes_[n].feature));
        n = v <= nodes_[n].threshold ? nodes_[n].left : nodes_[n].right;
    }
    return nodes_[n].label;
}

bool operator==(const DecisionTree& a, const DecisionTree& b) {
    if (a.nodes_.size() != b.nodes_.size()) return false;
    for (std::size_t i = 0; i < a.nodes_.size(); ++i) {
        const auto& x = a.nodes_[i];
        const auto& y = b.nodes_[i];
        if (x.feature != y.feature || x.threshold != y.threshold || x.left != y.left || x.right != y.right ||
            x.label != y.label) {
            return false;
        }
    }
    return true;
}

RandomForest RandomForest::fit(const BagBatch& batch, const Hyperparameters& hp) {
    if (batch.features.empty()) throw Error(ErrorCode::EmptyBatch, "random forest needs at least one sample");
    if (batch.features.size() != batch.labels.size()) {
        throw Error(ErrorCode::LengthMismatch, "features and labels differ in length");
    }
    const std::size_t n = batch.features.size();
    const std::size_t mtry =
        std::max<std::size_t>(1, static_cast<std::size_t>(std::sqrt(static_cast<double>(batch.dimension))));
    std::vector<DecisionTree> trees(hp.trees);

    const auto grow_one = [&](std::size_t t) {
        Rng boot(derive_seed(hp.seed, "rf-bootstrap", t));
        std::vector<std::size_t> rows(n);
        for (auto& r : rows) r = static_cast<std::size_t>(boot.below(n));
        std::sort(rows.begin(), rows.end());
        trees[t] = DecisionTree::grow(batch, rows, mtry, derive_seed(hp.seed, "rf-split", t));
    };

    const std::size_t workers = std::min(hp.threads, hp.trees);
    if (workers <= 1) {
        for (std::size_t t = 0; t < hp.trees; ++t) grow_one(t);
    } else {
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&, w] {
                for (std::size_t t = w; t < hp.trees; t += workers) grow_one(t);
            });
        }
        for (auto& th : pool) th.join();
    }
    return RandomForest(std::move(trees));
}

ProbabilityVector RandomForest::predict_proba(const textprep::Feature& feature) const {
    const auto* x = std::get_if<textprep::SparseVector>(&feature);
    if (!x) throw Error(ErrorCode::FeatureKindMismatch, "random forest expects a bag-of-words feature");
    ProbabilityVector p{};
    for (const auto& tree : trees_) p[role_index(tree.predict(*x))] += 1.0;
    for (double& v : p) v /= static_cast<double>(trees_.size());
    return p;
}

std::size_t RandomForest::parameter_count() const noexcept {
    std::size_t n = 0;
    for (const auto& t : trees_) n += t.nodes().size();
    return n;
}

void RandomForest::save(ParameterArchive& archive) const {
    archive.meta["trees"] = trees_.size();
    std::vector<double> sizes, feature, threshold, left, right, label;
    for (const auto& tree : trees_) {
        sizes.push_back(static_cast<double>(tree.nodes().size()));
        for (const auto& node : tree.nodes()) {
            feature.push_back(node.feature);
            threshold.push_back(node.threshold);
            left.push_back(node.left);
            right.push_back(node.right);
            label.push_back(static_cast<double>(role_index(node.label)));
        }
    }
    archive.tensors["tree_sizes"] = sizes;
    archive.tensors["node_feature"] = feature;
    archive.tensors["node_threshold"] = threshold;
    archive.tensors["node_left"] = left;
    archive.tensors["node_right"] = right;
    archive.tensors["node_label"] = label;
}

RandomForest RandomForest::load(const ParameterArchive& archive) {
    const auto& sizes = archive.tensor("tree_sizes");
    const auto& feature = archive.tensor("node_feature");
    const auto& threshold = archive.tensor("node_threshold");
    const auto& left = archive.tensor("node_left");
    const auto& right = archive.tensor("node_right");
    const auto& label = archive.tensor("node_label");
    const std::size_t total = feature.size();
    if (threshold.size() != total || left.size() != total || right.size() != total || label.size() != total) {
        throw Error(ErrorCode::CorruptContainer, "random forest node tensors differ in length");
    }
    std::vector<DecisionTree> trees;
    std::size_t offset = 0;
    for (double sz : sizes) {
        const auto count = static_cast<std::size_t>(sz);
        if (count == 0 || offset + count > total) throw Error(ErrorCode::CorruptContainer, "bad tree size");
        std::vector<TreeNode> nodes(count);
        for (std::size_t i = 0; i < count; ++i) {
            auto& node = nodes[i];
            node.feature = static_cast<std::int32_t>(feature[offset + i]);
            node.threshold = threshold[offset + i];
            node.left = static_cast<std::uint32_t>(left[offset + i]);
            node.right = static_cast<std::uint32_t>(right[offset + i]);
            node.label = role_from_index(static_cast<std::size_t>(label[offset + i]));
            if (node.feature >= 0 && (node.left >= count || node.right >= count)) {
                throw Error(ErrorCode::CorruptContainer, "tree child index out of range");
            }
        }
        trees.emplace_back(std::move(nodes));
        offset += count;
    }
    if (offset != total || trees.empty()) throw Error(ErrorCode::CorruptContainer, "tree node count mismatch");
    return RandomForest(std::move(trees));
}

}  // namespace taskalloc::models
