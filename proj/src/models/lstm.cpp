#include "taskalloc/models/lstm.hpp"

#include <algorithm>
#include <cmath>

#include "taskalloc/errors.hpp"
#include "taskalloc/models/optim.hpp"

namespace taskalloc::models {

namespace {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Pre-activations a = b + W x + U h for all 4H gate rows, then activations in place.
void gates_forward(std::size_t D, std::size_t H, const double* W, const double* U, const double* b, const double* x,
                   const double* h_prev, double* gates) {
    for (std::size_t r = 0; r < 4 * H; ++r) {
        double a = b[r];
        const double* wr = W + r * D;
        for (std::size_t d = 0; d < D; ++d) a += wr[d] * x[d];
        const double* ur = U + r * H;
        for (std::size_t k = 0; k < H; ++k) a += ur[k] * h_prev[k];
        gates[r] = (r >= 2 * H && r < 3 * H) ? std::tanh(a) : sigmoid(a);
    }
}

}  // namespace

LstmCellState lstm_cell_step(std::span<const double> x, std::span<const double> h_prev,
                             std::span<const double> c_prev, const LstmCellWeights& w) {
    const std::size_t D = w.input_dim, H = w.hidden;
    if (x.size() != D || h_prev.size() != H || c_prev.size() != H || w.kernel.size() != 4 * H * D ||
        w.recurrent.size() != 4 * H * H || w.bias.size() != 4 * H) {
        throw Error(ErrorCode::DimensionMismatch, "LSTM cell inputs do not match input_dim/hidden");
    }
    std::vector<double> gates(4 * H);
    gates_forward(D, H, w.kernel.data(), w.recurrent.data(), w.bias.data(), x.data(), h_prev.data(), gates.data());
    LstmCellState out{std::vector<double>(H), std::vector<double>(H)};
    for (std::size_t j = 0; j < H; ++j) {
        const double i = gates[j], f = gates[H + j], g = gates[2 * H + j], o = gates[3 * H + j];
        out.c[j] = f * c_prev[j] + i * g;
        out.h[j] = o * std::tanh(out.c[j]);
    }
    return out;
}

LstmClassifier::LstmClassifier(LstmShape shape, std::vector<double> params)
    : shape_(shape), params_(std::move(params)) {
    if (params_.size() != shape_.parameter_size()) {
        throw Error(ErrorCode::DimensionMismatch, "LSTM parameter vector does not match its shape");
    }
}

std::vector<double> LstmClassifier::initial_parameters(const LstmShape& shape, Rng& rng,
                                                       const textprep::EmbeddingMatrix* pretrained) {
    const std::size_t V = shape.vocab_rows, D = shape.embedding_dim, H = shape.hidden_units;
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

    const double kernel_limit = std::sqrt(6.0 / static_cast<double>(D + 4 * H));
    for (std::size_t i = 0; i < 4 * H * D; ++i) p[shape.kernel_offset() + i] = rng.uniform(-kernel_limit, kernel_limit);
    const double rec_limit = std::sqrt(6.0 / static_cast<double>(H + 4 * H));
    for (std::size_t i = 0; i < 4 * H * H; ++i) p[shape.recurrent_offset() + i] = rng.uniform(-rec_limit, rec_limit);
    for (std::size_t j = 0; j < H; ++j) p[shape.bias_offset() + H + j] = 1.0;
    const double dense_limit = std::sqrt(6.0 / static_cast<double>(H + kRoleCount));
    for (std::size_t i = 0; i < kRoleCount * H; ++i) p[shape.dense_offset() + i] = rng.uniform(-dense_limit, dense_limit);
    return p;
}

double LstmClassifier::objective(const LstmShape& shape, std::span<const double> params, const SequenceBatch& batch,
                                 std::span<const std::size_t> rows, std::vector<double>* grad, Rng* dropout_rng,
                                 double dropout_rate, std::size_t* correct) {
    const std::size_t V = shape.vocab_rows, D = shape.embedding_dim, H = shape.hidden_units, C = kRoleCount;
    const double* E = params.data() + shape.embedding_offset();
    const double* W = params.data() + shape.kernel_offset();
    const double* U = params.data() + shape.recurrent_offset();
    const double* b = params.data() + shape.bias_offset();
    const double* Wo = params.data() + shape.dense_offset();
    const double* bo = params.data() + shape.dense_bias_offset();
    if (grad) grad->assign(params.size(), 0.0);
    double* gE = grad ? grad->data() + shape.embedding_offset() : nullptr;
    double* gW = grad ? grad->data() + shape.kernel_offset() : nullptr;
    double* gU = grad ? grad->data() + shape.recurrent_offset() : nullptr;
    double* gb = grad ? grad->data() + shape.bias_offset() : nullptr;
    double* gWo = grad ? grad->data() + shape.dense_offset() : nullptr;
    double* gbo = grad ? grad->data() + shape.dense_bias_offset() : nullptr;

    const double inv_n = 1.0 / static_cast<double>(rows.size());
    std::vector<double> mask(D), xs, gates, cs, hs;
    std::vector<double> dh(H), dc(H), da(4 * H), dx(D), dh_prev(H);
    double loss = 0.0;
    std::size_t hits = 0;

    for (auto s : rows) {
        const auto& seq = batch.sequences[s].indices;
        const std::size_t L = seq.size();
        xs.assign(L * D, 0.0);
        gates.assign(L * 4 * H, 0.0);
        cs.assign((L + 1) * H, 0.0);
        hs.assign((L + 1) * H, 0.0);

        if (dropout_rng && dropout_rate > 0.0) {
            const double keep = 1.0 - dropout_rate;
            for (auto& m : mask) m = dropout_rng->bernoulli(keep) ? 1.0 / keep : 0.0;
        } else {
            std::fill(mask.begin(), mask.end(), 1.0);
        }

        for (std::size_t t = 0; t < L; ++t) {
            const std::size_t idx = std::min<std::size_t>(seq[t], V - 1);
            double* x = xs.data() + t * D;
            if (idx != 0) {
                for (std::size_t d = 0; d < D; ++d) x[d] = E[idx * D + d] * mask[d];
            }
            double* g = gates.data() + t * 4 * H;
            gates_forward(D, H, W, U, b, x, hs.data() + t * H, g);
            const double* c_prev = cs.data() + t * H;
            double* c = cs.data() + (t + 1) * H;
            double* h = hs.data() + (t + 1) * H;
            for (std::size_t j = 0; j < H; ++j) {
                c[j] = g[H + j] * c_prev[j] + g[j] * g[2 * H + j];
                h[j] = g[3 * H + j] * std::tanh(c[j]);
            }
        }

        const double* hL = hs.data() + L * H;
        std::array<double, kRoleCount> z{};
        for (std::size_t c = 0; c < C; ++c) {
            double v = bo[c];
            for (std::size_t j = 0; j < H; ++j) v += Wo[c * H + j] * hL[j];
            z[c] = v;
        }
        const auto p = softmax(z);
        const auto y = role_index(batch.labels[s]);
        loss -= std::log(std::max(p[y], 1e-12));
        if (role_index(argmax_role(p)) == y) ++hits;
        if (!grad) continue;

        // Backward through the dense layer.
        std::fill(dh.begin(), dh.end(), 0.0);
        std::fill(dc.begin(), dc.end(), 0.0);
        for (std::size_t c = 0; c < C; ++c) {
            const double dz = (p[c] - (c == y ? 1.0 : 0.0)) * inv_n;
            gbo[c] += dz;
            for (std::size_t j = 0; j < H; ++j) {
                gWo[c * H + j] += dz * hL[j];
                dh[j] += Wo[c * H + j] * dz;
            }
        }

        // Backpropagation through time.
        for (std::size_t t = L; t-- > 0;) {
            const double* g = gates.data() + t * 4 * H;
            const double* c = cs.data() + (t + 1) * H;
            const double* c_prev = cs.data() + t * H;
            const double* h_prev = hs.data() + t * H;
            const double* x = xs.data() + t * D;
            for (std::size_t j = 0; j < H; ++j) {
                const double i = g[j], f = g[H + j], gg = g[2 * H + j], o = g[3 * H + j];
                const double tc = std::tanh(c[j]);
                dc[j] += dh[j] * o * (1.0 - tc * tc);
                da[j] = dc[j] * gg * i * (1.0 - i);
                da[H + j] = dc[j] * c_prev[j] * f * (1.0 - f);
                da[2 * H + j] = dc[j] * i * (1.0 - gg * gg);
                da[3 * H + j] = dh[j] * tc * o * (1.0 - o);
                dc[j] *= f;
            }
            std::fill(dx.begin(), dx.end(), 0.0);
            std::fill(dh_prev.begin(), dh_prev.end(), 0.0);
            for (std::size_t r = 0; r < 4 * H; ++r) {
                const double a = da[r];
                gb[r] += a;
                const double* wr = W + r * D;
                double* gwr = gW + r * D;
                for (std::size_t d = 0; d < D; ++d) {
                    gwr[d] += a * x[d];
                    dx[d] += wr[d] * a;
                }
                const double* ur = U + r * H;
                double* gur = gU + r * H;
                for (std::size_t k = 0; k < H; ++k) {
                    gur[k] += a * h_prev[k];
                    dh_prev[k] += ur[k] * a;
                }
            }
            const std::size_t idx = std::min<std::size_t>(seq[t], V - 1);
            if (idx != 0) {
                for (std::size_t d = 0; d < D; ++d) gE[idx * D + d] += dx[d] * mask[d];
            }
            std::swap(dh, dh_prev);
        }
    }
    if (correct) *correct = hits;
    return loss * inv_n;
}

std::pair<LstmClassifier, TrainingHistory> LstmClassifier::fit(const SequenceBatch& batch, const Hyperparameters& hp,
                                                               const textprep::EmbeddingMatrix* pretrained) {
    if (batch.sequences.empty()) throw Error(ErrorCode::EmptyBatch, "LSTM needs at least one sample");
    if (batch.sequences.size() != batch.labels.size()) {
        throw Error(ErrorCode::LengthMismatch, "sequences and labels differ in length");
    }
    LstmShape shape{batch.vocab_rows, pretrained ? pretrained->dim : hp.embedding_dim, hp.hidden_units};
    Rng init(derive_seed(hp.seed, "lstm-init"));
    auto params = initial_parameters(shape, init, pretrained);

    Rng rng(derive_seed(hp.seed, "lstm-train"));
    TrainingLoopOptions opts;
    opts.epochs = hp.epochs;
    opts.batch_size = hp.batch_size;
    opts.learning_rate = hp.learning_rate;
    opts.patience = hp.early_stop_patience;
    opts.warmup = hp.early_stop_warmup;
    opts.model_name = "LSTM";
    std::vector<double> local;
    auto history = run_training_loop(
        params, batch.sequences.size(), opts, rng,
        [&](std::span<const std::size_t> rows, std::span<const double> p, std::vector<double>& grad, Rng& r) {
            std::size_t correct = 0;
            const double loss = objective(shape, p, batch, rows, &local, &r, hp.dropout_rate, &correct);
            grad.swap(local);
            return BatchResult{loss * static_cast<double>(rows.size()), correct};
        });
    return {LstmClassifier(shape, std::move(params)), std::move(history)};
}

ProbabilityVector LstmClassifier::predict_proba(const textprep::Feature& feature) const {
    const auto* seq = std::get_if<textprep::TokenSequence>(&feature);
    if (!seq) throw Error(ErrorCode::FeatureKindMismatch, "LSTM expects a token sequence");
    const std::size_t V = shape_.vocab_rows, D = shape_.embedding_dim, H = shape_.hidden_units;
    const double* E = params_.data() + shape_.embedding_offset();
    const double* W = params_.data() + shape_.kernel_offset();
    const double* U = params_.data() + shape_.recurrent_offset();
    const double* b = params_.data() + shape_.bias_offset();
    const double* Wo = params_.data() + shape_.dense_offset();
    const double* bo = params_.data() + shape_.dense_bias_offset();
    std::vector<double> x(D), gates(4 * H), h(H, 0.0), c(H, 0.0);
    for (auto token : seq->indices) {
        const std::size_t idx = std::min<std::size_t>(token, V - 1);
        if (idx == 0) {
            std::fill(x.begin(), x.end(), 0.0);
        } else {
            std::copy(E + idx * D, E + (idx + 1) * D, x.begin());
        }
        gates_forward(D, H, W, U, b, x.data(), h.data(), gates.data());
        for (std::size_t j = 0; j < H; ++j) {
            c[j] = gates[H + j] * c[j] + gates[j] * gates[2 * H + j];
            h[j] = gates[3 * H + j] * std::tanh(c[j]);
        }
    }
    std::array<double, kRoleCount> z{};
    for (std::size_t k = 0; k < kRoleCount; ++k) {
        double v = bo[k];
        for (std::size_t j = 0; j < H; ++j) v += Wo[k * H + j] * h[j];
        z[k] = v;
    }
    return softmax(z);
}

void LstmClassifier::save(ParameterArchive& archive) const {
    archive.meta["vocab_rows"] = shape_.vocab_rows;
    archive.meta["embedding_dim"] = shape_.embedding_dim;
    archive.meta["hidden_units"] = shape_.hidden_units;
    archive.tensors["params"] = params_;
}

LstmClassifier LstmClassifier::load(const ParameterArchive& archive) {
    LstmShape shape{archive.meta.at("vocab_rows").get<std::size_t>(), archive.meta.at("embedding_dim").get<std::size_t>(),
                    archive.meta.at("hidden_units").get<std::size_t>()};
    return LstmClassifier(shape, archive.tensor("params"));
}

}  // namespace taskalloc::models
