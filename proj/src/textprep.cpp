#include "taskalloc/textprep.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "stopwords_data.hpp"
#include "taskalloc/errors.hpp"

namespace taskalloc::textprep {

std::string clean_text(std::string_view raw) {
    std::string out;
    out.reserve(raw.size());
    bool pending_space = false;
    const auto emit_space = [&] { pending_space = !out.empty(); };
    for (std::size_t i = 0; i < raw.size(); ++i) {
        char c = raw[i];
        if (c == '<') {
            const auto close = raw.find('>', i + 1);
            if (close != std::string_view::npos) {
                i = close;
                emit_space();
                continue;
            }
        }
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
        if ((c >= 'a' && c <= 'z') || (c >= '0' && c <= '9')) {
            if (pending_space) out.push_back(' ');
            pending_space = false;
            out.push_back(c);
        } else {
            emit_space();
        }
    }
    return out;
}

std::vector<std::string> split_tokens(std::string_view cleaned) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start < cleaned.size()) {
        auto end = cleaned.find(' ', start);
        if (end == std::string_view::npos) end = cleaned.size();
        if (end > start) out.emplace_back(cleaned.substr(start, end - start));
        start = end + 1;
    }
    return out;
}

StopWords::StopWords(std::vector<std::string> words) : words_(words.begin(), words.end()) {}

const StopWords& StopWords::english() {
    static const StopWords list = [] {
        std::vector<std::string> words(detail::kBuiltinStopwords.begin(), detail::kBuiltinStopwords.end());
        return StopWords(std::move(words));
    }();
    return list;
}

StopWords StopWords::from_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::Io, "cannot open stop-word list " + path.string());
    std::vector<std::string> words;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty()) words.push_back(line);
    }
    return StopWords(std::move(words));
}

std::vector<std::string> remove_stopwords(const std::vector<std::string>& tokens, const StopWords& stopwords) {
    std::vector<std::string> out;
    out.reserve(tokens.size());
    for (const auto& t : tokens) {
        if (!stopwords.contains(t)) out.push_back(t);
    }
    return out;
}

std::vector<std::string> preprocess(std::string_view raw, const StopWords& stopwords) {
    return remove_stopwords(split_tokens(clean_text(raw)), stopwords);
}

std::string preprocess_joined(std::string_view raw, const StopWords& stopwords) {
    std::string out;
    for (const auto& t : preprocess(raw, stopwords)) {
        if (!out.empty()) out.push_back(' ');
        out += t;
    }
    return out;
}

// ---------------------------------------------------------------------------

Vocabulary::Vocabulary(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
    for (std::size_t i = 0; i < tokens_.size(); ++i) {
        const auto [it, inserted] = index_.emplace(tokens_[i], static_cast<std::uint32_t>(i + 1));
        if (!inserted) throw Error(ErrorCode::InvalidArgument, "duplicate vocabulary token '" + tokens_[i] + "'");
    }
}

std::optional<std::uint32_t> Vocabulary::find(std::string_view token) const {
    const auto it = index_.find(std::string(token));
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

std::uint32_t Vocabulary::index_of(std::string_view token) const { return find(token).value_or(oov_index()); }

Vocabulary build_vocabulary(const std::vector<std::string>& texts, std::optional<std::size_t> max_size) {
    struct Entry {
        std::string token;
        std::size_t count;
    };
    std::vector<Entry> entries;
    std::unordered_map<std::string, std::size_t> position;
    for (const auto& text : texts) {
        for (auto& tok : split_tokens(text)) {
            const auto [it, inserted] = position.emplace(tok, entries.size());
            if (inserted) {
                entries.push_back({std::move(tok), 1});
            } else {
                ++entries[it->second].count;
            }
        }
    }
    // Stable sort keeps first-occurrence order among equal counts.
    std::stable_sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) { return a.count > b.count; });
    if (max_size && entries.size() > *max_size) entries.resize(*max_size);
    std::vector<std::string> tokens;
    tokens.reserve(entries.size());
    for (auto& e : entries) tokens.push_back(std::move(e.token));
    return Vocabulary(std::move(tokens));
}

TokenSequence encode_sequence(const Vocabulary& vocab, std::string_view text, std::size_t max_len) {
    if (max_len == 0) throw Error(ErrorCode::InvalidArgument, "max_len must be >= 1");
    const auto tokens = split_tokens(text);
    TokenSequence seq;
    seq.indices.assign(max_len, 0);
    const std::size_t keep = std::min(max_len, tokens.size());
    const std::size_t first = tokens.size() - keep;
    for (std::size_t i = 0; i < keep; ++i) {
        seq.indices[max_len - keep + i] = vocab.index_of(tokens[first + i]);
    }
    return seq;
}

std::size_t default_max_len(const std::vector<std::size_t>& token_counts) {
    if (token_counts.empty()) return 8;
    auto sorted = token_counts;
    std::sort(sorted.begin(), sorted.end());
    const auto rank = static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(sorted.size())));
    const auto p95 = sorted[std::max<std::size_t>(rank, 1) - 1];
    return std::clamp<std::size_t>(p95, 8, 50);
}

// ---------------------------------------------------------------------------

double SparseVector::norm() const noexcept {
    double s = 0.0;
    for (double v : values) s += v * v;
    return std::sqrt(s);
}

double SparseVector::get(std::uint32_t index) const noexcept {
    const auto it = std::lower_bound(indices.begin(), indices.end(), index);
    if (it == indices.end() || *it != index) return 0.0;
    return values[static_cast<std::size_t>(it - indices.begin())];
}

double dot(const SparseVector& a, const SparseVector& b) noexcept {
    double s = 0.0;
    std::size_t i = 0, j = 0;
    while (i < a.indices.size() && j < b.indices.size()) {
        if (a.indices[i] == b.indices[j]) {
            s += a.values[i++] * b.values[j++];
        } else if (a.indices[i] < b.indices[j]) {
            ++i;
        } else {
            ++j;
        }
    }
    return s;
}

double dot(const SparseVector& a, const std::vector<double>& dense) noexcept {
    double s = 0.0;
    for (std::size_t k = 0; k < a.indices.size(); ++k) {
        if (a.indices[k] < dense.size()) s += a.values[k] * dense[a.indices[k]];
    }
    return s;
}

IdfTable::IdfTable(std::vector<std::string> terms, std::vector<double> idf, std::size_t document_count)
    : terms_(std::move(terms)), idf_(std::move(idf)), document_count_(document_count) {
    if (terms_.size() != idf_.size()) throw Error(ErrorCode::LengthMismatch, "idf table terms/weights differ");
    for (std::size_t i = 0; i < terms_.size(); ++i) column_.emplace(terms_[i], static_cast<std::uint32_t>(i));
}

std::optional<std::uint32_t> IdfTable::column(std::string_view term) const {
    const auto it = column_.find(std::string(term));
    if (it == column_.end()) return std::nullopt;
    return it->second;
}

SparseVector IdfTable::term_counts(std::string_view text) const {
    std::vector<std::pair<std::uint32_t, double>> entries;
    for (const auto& tok : split_tokens(text)) {
        if (const auto col = column(tok)) entries.emplace_back(*col, 1.0);
    }
    std::sort(entries.begin(), entries.end());
    SparseVector out;
    for (const auto& [col, v] : entries) {
        if (!out.indices.empty() && out.indices.back() == col) {
            out.values.back() += v;
        } else {
            out.indices.push_back(col);
            out.values.push_back(v);
        }
    }
    return out;
}

SparseVector IdfTable::transform(std::string_view text) const {
    auto v = term_counts(text);
    for (std::size_t k = 0; k < v.indices.size(); ++k) v.values[k] *= idf_[v.indices[k]];
    const double n = v.norm();
    if (n > 0.0) {
        for (double& x : v.values) x /= n;
    }
    return v;
}

IdfTable tfidf_fit(const std::vector<std::string>& texts) {
    if (texts.empty()) throw Error(ErrorCode::EmptyTrainingSet, "cannot fit TF-IDF on zero documents");
    std::vector<std::string> terms;
    std::vector<std::size_t> df;
    std::unordered_map<std::string, std::size_t> column;
    for (const auto& text : texts) {
        std::unordered_set<std::string> seen;
        for (auto& tok : split_tokens(text)) {
            if (!seen.insert(tok).second) continue;
            const auto [it, inserted] = column.emplace(tok, terms.size());
            if (inserted) {
                terms.push_back(tok);
                df.push_back(1);
            } else {
                ++df[it->second];
            }
        }
    }
    const auto n = static_cast<double>(texts.size());
    std::vector<double> idf(terms.size());
    for (std::size_t i = 0; i < terms.size(); ++i) {
        idf[i] = std::log((1.0 + n) / (1.0 + static_cast<double>(df[i]))) + 1.0;
    }
    return IdfTable(std::move(terms), std::move(idf), texts.size());
}

// ---------------------------------------------------------------------------

LabelVector one_hot(Role role) noexcept {
    LabelVector v{};
    v[role_index(role)] = 1.0;
    return v;
}

std::size_t argmax(const LabelVector& v) noexcept {
    return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

EmbeddingMatrix parse_embeddings(std::istream& in, const Vocabulary& vocab, std::string_view source) {
    std::string line;
    if (!std::getline(in, line)) throw Error(ErrorCode::MalformedHeader, std::string(source) + ": empty file");
    std::size_t count = 0, dim = 0;
    {
        std::istringstream header(line);
        std::string extra;
        if (!(header >> count >> dim) || (header >> extra) || dim == 0) {
            throw Error(ErrorCode::MalformedHeader, std::string(source) + ": expected 'count dim', got '" + line + "'");
        }
    }
    EmbeddingMatrix m;
    m.rows = vocab.size() + 2;
    m.dim = dim;
    m.data.assign(m.rows * dim, 0.0);
    std::vector<bool> filled(m.rows, false);
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::istringstream fields(line);
        std::string token;
        fields >> token;
        std::vector<double> values;
        values.reserve(dim);
        std::string v;
        while (fields >> v) {
            char* end = nullptr;
            const double x = std::strtod(v.c_str(), &end);
            if (end != v.c_str() + v.size()) {
                throw Error(ErrorCode::DimensionMismatch,
                            std::string(source) + ":" + std::to_string(lineno) + ": non-numeric value '" + v + "'");
            }
            values.push_back(x);
        }
        if (values.size() != dim) {
            throw Error(ErrorCode::DimensionMismatch, std::string(source) + ":" + std::to_string(lineno) + ": expected " +
                                                          std::to_string(dim) + " values, got " +
                                                          std::to_string(values.size()));
        }
        const auto idx = vocab.find(token);
        if (!idx || filled[*idx]) continue;
        filled[*idx] = true;
        std::copy(values.begin(), values.end(), m.data.begin() + static_cast<std::ptrdiff_t>(*idx * dim));
        ++m.matched;
    }
    if (m.matched == 0) m.warning = "no vocabulary token found in " + std::string(source);
    return m;
}

EmbeddingMatrix load_embeddings(const std::filesystem::path& path, const Vocabulary& vocab) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::Io, "cannot open embeddings " + path.string());
    return parse_embeddings(in, vocab, path.string());
}

// ---------------------------------------------------------------------------

FeatureFamily family_of(const Feature& f) noexcept {
    return std::holds_alternative<TokenSequence>(f) ? FeatureFamily::Sequence : FeatureFamily::Bag;
}

Featurizer Featurizer::fit_sequence(const std::vector<std::string>& raw_texts, std::optional<std::size_t> max_vocab,
                                    std::optional<std::size_t> max_len) {
    std::vector<std::string> cleaned;
    std::vector<std::size_t> lengths;
    cleaned.reserve(raw_texts.size());
    for (const auto& t : raw_texts) {
        auto tokens = preprocess(t);
        lengths.push_back(tokens.size());
        std::string joined;
        for (const auto& tok : tokens) {
            if (!joined.empty()) joined.push_back(' ');
            joined += tok;
        }
        cleaned.push_back(std::move(joined));
    }
    return from_sequence(build_vocabulary(cleaned, max_vocab), max_len.value_or(default_max_len(lengths)));
}

Featurizer Featurizer::fit_bag(const std::vector<std::string>& raw_texts, BagWeighting weighting) {
    std::vector<std::string> cleaned;
    cleaned.reserve(raw_texts.size());
    for (const auto& t : raw_texts) cleaned.push_back(preprocess_joined(t));
    return from_bag(tfidf_fit(cleaned), weighting);
}

Featurizer Featurizer::from_sequence(Vocabulary vocab, std::size_t max_len) {
    if (max_len == 0) throw Error(ErrorCode::InvalidArgument, "max_len must be >= 1");
    Featurizer f;
    f.family_ = FeatureFamily::Sequence;
    f.vocab_ = std::move(vocab);
    f.max_len_ = max_len;
    return f;
}

Featurizer Featurizer::from_bag(IdfTable table, BagWeighting weighting) {
    Featurizer f;
    f.family_ = FeatureFamily::Bag;
    f.weighting_ = weighting;
    f.idf_ = std::move(table);
    return f;
}

std::size_t Featurizer::dimension() const noexcept {
    return family_ == FeatureFamily::Sequence ? vocab_.size() + 2 : idf_.size();
}

Feature Featurizer::transform(std::string_view raw) const {
    const auto text = preprocess_joined(raw);
    if (family_ == FeatureFamily::Sequence) return encode_sequence(vocab_, text, max_len_);
    if (weighting_ == BagWeighting::Counts) return idf_.term_counts(text);
    return idf_.transform(text);
}

}  // namespace taskalloc::textprep
