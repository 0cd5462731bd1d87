#include "taskalloc/models/linear_svc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "taskalloc/errors.hpp"
#include "taskalloc/random.hpp"

namespace taskalloc::models {

LinearSvc::LinearSvc(std::size_t dimension, std::vector<double> weights, std::array<bool, kRoleCount> trained)
    : dimension_(dimension), weights_(std::move(weights)), trained_(trained) {
    if (weights_.size() != kRoleCount * (dimension_ + 1)) {
        throw Error(ErrorCode::DimensionMismatch, "SVC weight size does not match dimension");
    }
}

LinearSvc LinearSvc::fit(const BagBatch& batch, const Hyperparameters& hp) {
    if (batch.features.empty()) throw Error(ErrorCode::EmptyBatch, "SVC needs at least one sample");
    if (batch.features.size() != batch.labels.size()) {
        throw Error(ErrorCode::LengthMismatch, "features and labels differ in length");
    }
    std::array<bool, kRoleCount> present{};
    for (Role r : batch.labels) present[role_index(r)] = true;
    if (std::count(present.begin(), present.end(), true) < 2) {
        throw Error(ErrorCode::SingleClassBatch, "SVC needs at least two classes");
    }

    const std::size_t F = batch.dimension;
    const std::size_t stride = F + 1;
    const std::size_t n = batch.features.size();
    const double lambda = 1.0 / (hp.svc_c * static_cast<double>(n));

    // w_c = scale_c * v_c keeps the shrink step O(1) for sparse inputs.
    std::vector<double> v(kRoleCount * stride, 0.0);
    std::array<double, kRoleCount> scale;
    scale.fill(1.0);

    Rng rng(derive_seed(hp.seed, "svc-shuffle"));
    std::vector<std::size_t> order(n);
    std::uint64_t t = 0;
    for (std::size_t epoch = 0; epoch < hp.epochs; ++epoch) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        rng.shuffle(std::span<std::size_t>(order));
        for (auto s : order) {
            ++t;
            const double eta = 1.0 / (lambda * static_cast<double>(t));
            const auto& x = batch.features[s];
            const auto label = role_index(batch.labels[s]);
            for (std::size_t c = 0; c < kRoleCount; ++c) {
                if (!present[c]) continue;
                double* vc = v.data() + c * stride;
                double m = vc[F];
                for (std::size_t k = 0; k < x.indices.size(); ++k) {
                    if (x.indices[k] < F) m += vc[x.indices[k]] * x.values[k];
                }
                m *= scale[c];
                const double y = c == label ? 1.0 : -1.0;
                const double shrink = 1.0 - eta * lambda;
                if (shrink <= 0.0) {
                    std::fill(vc, vc + stride, 0.0);
                    scale[c] = 1.0;
                } else {
                    scale[c] *= shrink;
                }
                if (y * m < 1.0) {
                    const double step = eta * y / scale[c];
                    for (std::size_t k = 0; k < x.indices.size(); ++k) {
                        if (x.indices[k] < F) vc[x.indices[k]] += step * x.values[k];
                    }
                    vc[F] += step;
                }
                if (scale[c] < 1e-9) {
                    for (std::size_t i = 0; i < stride; ++i) vc[i] *= scale[c];
                    scale[c] = 1.0;
                }
            }
        }
    }
    for (std::size_t c = 0; c < kRoleCount; ++c) {
        for (std::size_t i = 0; i < stride; ++i) v[c * stride + i] *= scale[c];
    }
    return LinearSvc(F, std::move(v), present);
}

std::array<double, kRoleCount> LinearSvc::margins(const textprep::SparseVector& x) const {
    std::array<double, kRoleCount> m{};
    const std::size_t stride = dimension_ + 1;
    for (std::size_t c = 0; c < kRoleCount; ++c) {
        if (!trained_[c]) {
            m[c] = -std::numeric_limits<double>::infinity();
            continue;
        }
        const double* w = weights_.data() + c * stride;
        double s = w[dimension_];
        for (std::size_t k = 0; k < x.indices.size(); ++k) {
            if (x.indices[k] < dimension_) s += w[x.indices[k]] * x.values[k];
        }
        m[c] = s;
    }
    return m;
}

ProbabilityVector LinearSvc::margins_to_proba(const std::array<double, kRoleCount>& margins) {
    double best = -std::numeric_limits<double>::infinity();
    for (double m : margins) best = std::max(best, m);
    ProbabilityVector p{};
    if (!std::isfinite(best)) {
        p.fill(1.0 / static_cast<double>(kRoleCount));
        return p;
    }
    double sum = 0.0;
    for (std::size_t c = 0; c < kRoleCount; ++c) {
        p[c] = std::isfinite(margins[c]) ? std::exp(margins[c] - best) : 0.0;
        sum += p[c];
    }
    for (double& v : p) v /= sum;
    return p;
}

ProbabilityVector LinearSvc::predict_proba(const textprep::Feature& feature) const {
    const auto* x = std::get_if<textprep::SparseVector>(&feature);
    if (!x) throw Error(ErrorCode::FeatureKindMismatch, "SVC expects a bag-of-words feature");
    return margins_to_proba(margins(*x));
}

void LinearSvc::save(ParameterArchive& archive) const {
    archive.meta["dimension"] = dimension_;
    std::vector<double> trained(kRoleCount);
    for (std::size_t c = 0; c < kRoleCount; ++c) trained[c] = trained_[c] ? 1.0 : 0.0;
    archive.tensors["trained"] = trained;
    archive.tensors["weights"] = weights_;
}

LinearSvc LinearSvc::load(const ParameterArchive& archive) {
    const auto& t = archive.tensor("trained");
    if (t.size() != kRoleCount) throw Error(ErrorCode::CorruptContainer, "SVC class mask has wrong size");
    std::array<bool, kRoleCount> trained{};
    for (std::size_t c = 0; c < kRoleCount; ++c) trained[c] = t[c] != 0.0;
    return LinearSvc(archive.meta.at("dimension").get<std::size_t>(), archive.tensor("weights"), trained);
}

}  // namespace taskalloc::models
