#include "taskalloc/models/cnn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "taskalloc/errors.hpp"
#include "taskalloc/models/optim.hpp"

namespace taskalloc::models {

namespace {

struct Pooled {
    std::vector<double> value;       // per filter, after ReLU
    std::vector<std::size_t> where;  // window start of the max
    std::vector<bool> active;        // pre-activation at the max was > 0
};

// Embeds the sequence into xs (L x D, zero rows for padding) and runs the
// convolution + max pooling.
Pooled conv_forward(const CnnShape& shape, const double* params, const std::vector<std::uint32_t>& seq,
                    std::vector<double>& xs) {
    const std::size_t V = shape.vocab_rows, D = shape.embedding_dim, F = shape.filters, w = shape.width;
    const std::size_t L = seq.size();
    const double* E = params + shape.embedding_offset();
    const double* K = params + shape.kernel_offset();
    const double* kb = params + shape.kernel_bias_offset();
    xs.assign(L * D, 0.0);
    for (std::size_t t = 0; t < L; ++t) {
        const std::size_t idx = std::min<std::size_t>(seq[t], V - 1);
        if (idx != 0) std::copy(E + idx * D, E + (idx + 1) * D, xs.begin() + static_cast<std::ptrdiff_t>(t * D));
    }
    const std::size_t windows = L >= w ? L - w + 1 : 1;
    Pooled out{std::vector<double>(F, 0.0), std::vector<std::size_t>(F, 0), std::vector<bool>(F, false)};
    for (std::size_t f = 0; f < F; ++f) {
        double best = -std::numeric_limits<double>::infinity();
        std::size_t best_p = 0;
        for (std::size_t p = 0; p < windows; ++p) {
            double z = kb[f];
            for (std::size_t j = 0; j < w && p + j < L; ++j) {
                const double* kr = K + (f * w + j) * D;
                const double* x = xs.data() + (p + j) * D;
                for (std::size_t d = 0; d < D; ++d) z += kr[d] * x[d];
            }
            if (z > best) {
                best = z;
                best_p = p;
            }
        }
        out.active[f] = best > 0.0;
        out.value[f] = best > 0.0 ? best : 0.0;
        out.where[f] = best_p;
    }
    return out;
}

std::array<double, kRoleCount> dense_forward(const CnnShape& shape, const double* params, const Pooled& pooled) {
    const double* Wo = params + shape.dense_offset();
    const double* bo = params + shape.dense_bias_offset();
    std::array<double, kRoleCount> z{};
    for (std::size_t c = 0; c < kRoleCount; ++c) {
        double v = bo[c];
        for (std::size_t f = 0; f < shape.filters; ++f) v += Wo[c * shape.filters + f] * pooled.value[f];
        z[c] = v;
    }
    return z;
}

}  // namespace

CnnClassifier::CnnClassifier(CnnShape shape, std::vector<double> params) : shape_(shape), params_(std::move(params)) {
    if (params_.size() != shape_.parameter_size()) {
        throw Error(ErrorCode::DimensionMismatch, "CNN parameter vector does not match its shape");
    }
}

std::vector<double> CnnClassifier::initial_parameters(const CnnShape& shape, Rng& rng,
                                                      const textprep::EmbeddingMatrix* pretrained) {
    const std::size_t V = shape.vocab_rows, D = shape.embedding_dim, F = shape.filters, w = shape.width;
    std::vector<double> p(shape.parameter_size(), 0.0);
    if (pretrained) {
        if (pretrained->rows != V || pretrained->dim != D) {
            throw Error(ErrorCode::DimensionMismatch, "pretrained embedding shape does not match the vocabulary");
        }
        std::copy(pretrained->data.begin(), pretrained->data.end(), p.begin());
    } else {
        for (std::size_t i = D; i < V * D; ++i) p[i] = rng.uniform(-0.05, 0.05);
    }
    std::fill(p.begin(), p.begin() + static_cast<std::ptrdiff_t>(D), 0.0);
    const double kernel_limit = std::sqrt(6.0 / static_cast<double>(w * D + w * F));
    for (std::size_t i = 0; i < F * w * D; ++i) p[shape.kernel_offset() + i] = rng.uniform(-kernel_limit, kernel_limit);
    const double dense_limit = std::sqrt(6.0 / static_cast<double>(F + kRoleCount));
    for (std::size_t i = 0; i < kRoleCount * F; ++i) p[shape.dense_offset() + i] = rng.uniform(-dense_limit, dense_limit);
    return p;
}

double CnnClassifier::objective(const CnnShape& shape, std::span<const double> params, const SequenceBatch& batch,
                                std::span<const std::size_t> rows, std::vector<double>* grad, std::size_t* correct) {
    const std::size_t V = shape.vocab_rows, D = shape.embedding_dim, F = shape.filters, w = shape.width;
    const double* K = params.data() + shape.kernel_offset();
    const double* Wo = params.data() + shape.dense_offset();
    if (grad) grad->assign(params.size(), 0.0);
    const double inv_n = 1.0 / static_cast<double>(rows.size());
    std::vector<double> xs, dxs, dpool(F);
    double loss = 0.0;
    std::size_t hits = 0;

    for (auto s : rows) {
        const auto& seq = batch.sequences[s].indices;
        const std::size_t L = seq.size();
        const auto pooled = conv_forward(shape, params.data(), seq, xs);
        const auto p = softmax(dense_forward(shape, params.data(), pooled));
        const auto y = role_index(batch.labels[s]);
        loss -= std::log(std::max(p[y], 1e-12));
        if (role_index(argmax_role(p)) == y) ++hits;
        if (!grad) continue;

        double* g = grad->data();
        std::fill(dpool.begin(), dpool.end(), 0.0);
        for (std::size_t c = 0; c < kRoleCount; ++c) {
            const double dz = (p[c] - (c == y ? 1.0 : 0.0)) * inv_n;
            g[shape.dense_bias_offset() + c] += dz;
            for (std::size_t f = 0; f < F; ++f) {
                g[shape.dense_offset() + c * F + f] += dz * pooled.value[f];
                dpool[f] += Wo[c * F + f] * dz;
            }
        }
        dxs.assign(L * D, 0.0);
        for (std::size_t f = 0; f < F; ++f) {
            if (!pooled.active[f]) continue;
            const double df = dpool[f];
            g[shape.kernel_bias_offset() + f] += df;
            const std::size_t p0 = pooled.where[f];
            for (std::size_t j = 0; j < w && p0 + j < L; ++j) {
                const double* kr = K + (f * w + j) * D;
                double* gk = g + shape.kernel_offset() + (f * w + j) * D;
                const double* x = xs.data() + (p0 + j) * D;
                double* dx = dxs.data() + (p0 + j) * D;
                for (std::size_t d = 0; d < D; ++d) {
                    gk[d] += df * x[d];
                    dx[d] += df * kr[d];
                }
            }
        }
        for (std::size_t t = 0; t < L; ++t) {
            const std::size_t idx = std::min<std::size_t>(seq[t], V - 1);
            if (idx == 0) continue;
            double* ge = g + shape.embedding_offset() + idx * D;
            for (std::size_t d = 0; d < D; ++d) ge[d] += dxs[t * D + d];
        }
    }
    if (correct) *correct = hits;
    return loss * inv_n;
}

std::pair<CnnClassifier, TrainingHistory> CnnClassifier::fit(const SequenceBatch& batch, const Hyperparameters& hp,
                                                             const textprep::EmbeddingMatrix* pretrained) {
    if (batch.sequences.empty()) throw Error(ErrorCode::EmptyBatch, "CNN needs at least one sample");
    if (batch.sequences.size() != batch.labels.size()) {
        throw Error(ErrorCode::LengthMismatch, "sequences and labels differ in length");
    }
    CnnShape shape{batch.vocab_rows, pretrained ? pretrained->dim : hp.embedding_dim, hp.cnn_filters, hp.cnn_width};
    Rng init(derive_seed(hp.seed, "cnn-init"));
    auto params = initial_parameters(shape, init, pretrained);

    Rng rng(derive_seed(hp.seed, "cnn-train"));
    TrainingLoopOptions opts;
    opts.epochs = hp.epochs;
    opts.batch_size = hp.batch_size;
    opts.learning_rate = hp.learning_rate;
    opts.patience = hp.early_stop_patience;
    opts.warmup = hp.early_stop_warmup;
    opts.model_name = "CNN";
    std::vector<double> local;
    auto history = run_training_loop(
        params, batch.sequences.size(), opts, rng,
        [&](std::span<const std::size_t> rows, std::span<const double> p, std::vector<double>& grad, Rng&) {
            std::size_t correct = 0;
            const double loss = objective(shape, p, batch, rows, &local, &correct);
            grad.swap(local);
            return BatchResult{loss * static_cast<double>(rows.size()), correct};
        });
    return {CnnClassifier(shape, std::move(params)), std::move(history)};
}

ProbabilityVector CnnClassifier::predict_proba(const textprep::Feature& feature) const {
    const auto* seq = std::get_if<textprep::TokenSequence>(&feature);
    if (!seq) throw Error(ErrorCode::FeatureKindMismatch, "CNN expects a token sequence");
    std::vector<double> xs;
    const auto pooled = conv_forward(shape_, params_.data(), seq->indices, xs);
    return softmax(dense_forward(shape_, params_.data(), pooled));
}

void CnnClassifier::save(ParameterArchive& archive) const {
    archive.meta["vocab_rows"] = shape_.vocab_rows;
    archive.meta["embedding_dim"] = shape_.embedding_dim;
    archive.meta["filters"] = shape_.filters;
    archive.meta["width"] = shape_.width;
    archive.tensors["params"] = params_;
}

CnnClassifier CnnClassifier::load(const ParameterArchive& archive) {
    CnnShape shape{archive.meta.at("vocab_rows").get<std::size_t>(), archive.meta.at("embedding_dim").get<std::size_t>(),
                   archive.meta.at("filters").get<std::size_t>(), archive.meta.at("width").get<std::size_t>()};
    return CnnClassifier(shape, archive.tensor("params"));
}

}  // namespace taskalloc::models
