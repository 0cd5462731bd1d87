#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <variant>
#include <vector>

#include "taskalloc/roles.hpp"

namespace taskalloc::textprep {

// ---------------------------------------------------------------------------
// Cleaning and tokenization

/// Strips <...> tags, lowercases, maps every character outside [a-z0-9] to a
/// space, collapses space runs and trims.
std::string clean_text(std::string_view raw);

/// Splits a cleaned string on single spaces.
std::vector<std::string> split_tokens(std::string_view cleaned);

class StopWords {
public:
    /// The bundled English list (179 entries).
    static const StopWords& english();
    /// One token per line, UTF-8.
    static StopWords from_file(const std::filesystem::path& path);

    explicit StopWords(std::vector<std::string> words);

    bool contains(std::string_view token) const { return words_.count(std::string(token)) != 0; }
    std::size_t size() const noexcept { return words_.size(); }

private:
    std::unordered_set<std::string> words_;
};

std::vector<std::string> remove_stopwords(const std::vector<std::string>& tokens,
                                          const StopWords& stopwords = StopWords::english());

/// clean_text -> split -> stop-word removal.
std::vector<std::string> preprocess(std::string_view raw, const StopWords& stopwords = StopWords::english());

/// preprocess joined back with single spaces.
std::string preprocess_joined(std::string_view raw, const StopWords& stopwords = StopWords::english());

// ---------------------------------------------------------------------------
// Integer sequences

/// Frequency-ranked token index. Index 0 is padding, 1..size() are tokens,
/// size()+1 is the shared out-of-vocabulary index.
class Vocabulary {
public:
    Vocabulary() = default;

    /// Tokens in index order (token i+1 is tokens[i]).
    explicit Vocabulary(std::vector<std::string> tokens);

    std::size_t size() const noexcept { return tokens_.size(); }
    std::uint32_t oov_index() const noexcept { return static_cast<std::uint32_t>(tokens_.size() + 1); }

    std::optional<std::uint32_t> find(std::string_view token) const;
    /// Known index or oov_index().
    std::uint32_t index_of(std::string_view token) const;
    /// Token for an index in 1..size().
    const std::string& token_at(std::uint32_t index) const { return tokens_.at(index - 1); }
    const std::vector<std::string>& tokens() const noexcept { return tokens_; }

    friend bool operator==(const Vocabulary& a, const Vocabulary& b) { return a.tokens_ == b.tokens_; }

private:
    std::vector<std::string> tokens_;
    std::unordered_map<std::string, std::uint32_t> index_;
};

inline constexpr std::size_t kDefaultVocabularyCap = 5000;

/// texts are already cleaned and stop-word-filtered, tokens separated by spaces.
/// Descending frequency, ties by first occurrence, truncated to max_size.
Vocabulary build_vocabulary(const std::vector<std::string>& texts, std::optional<std::size_t> max_size = std::nullopt);

struct TokenSequence {
    std::vector<std::uint32_t> indices;

    friend bool operator==(const TokenSequence&, const TokenSequence&) = default;
};

/// Left-pads with 0 to max_len; longer inputs keep their last max_len tokens.
TokenSequence encode_sequence(const Vocabulary& vocab, std::string_view text, std::size_t max_len);

/// 95th percentile (nearest rank) of the token counts, clamped to [8, 50].
std::size_t default_max_len(const std::vector<std::size_t>& token_counts);

// ---------------------------------------------------------------------------
// Bag of words

/// Sparse non-negative vector with strictly increasing indices.
struct SparseVector {
    std::vector<std::uint32_t> indices;
    std::vector<double> values;

    std::size_t nnz() const noexcept { return indices.size(); }
    bool empty() const noexcept { return indices.empty(); }
    double norm() const noexcept;
    double get(std::uint32_t index) const noexcept;

    friend bool operator==(const SparseVector&, const SparseVector&) = default;
};

double dot(const SparseVector& a, const SparseVector& b) noexcept;
double dot(const SparseVector& a, const std::vector<double>& dense) noexcept;

/// Smoothed inverse document frequencies, idf(t) = ln((1 + n) / (1 + df(t))) + 1.
/// Columns are assigned in first-occurrence order over the fitting texts.
class IdfTable {
public:
    IdfTable() = default;
    IdfTable(std::vector<std::string> terms, std::vector<double> idf, std::size_t document_count);

    std::size_t size() const noexcept { return terms_.size(); }
    std::size_t document_count() const noexcept { return document_count_; }
    const std::vector<std::string>& terms() const noexcept { return terms_; }
    const std::vector<double>& idf() const noexcept { return idf_; }
    std::optional<std::uint32_t> column(std::string_view term) const;

    /// Raw term counts over known columns.
    SparseVector term_counts(std::string_view text) const;
    /// tf * idf, l2-normalized; zero vector when no known term occurs.
    SparseVector transform(std::string_view text) const;

private:
    std::vector<std::string> terms_;
    std::vector<double> idf_;
    std::size_t document_count_ = 0;
    std::unordered_map<std::string, std::uint32_t> column_;
};

/// Throws Error(EmptyTrainingSet) for zero documents.
IdfTable tfidf_fit(const std::vector<std::string>& texts);
inline SparseVector tfidf_transform(const IdfTable& table, std::string_view text) { return table.transform(text); }

// ---------------------------------------------------------------------------
// Labels and embeddings

using LabelVector = std::array<double, kRoleCount>;

LabelVector one_hot(Role role) noexcept;
/// Index of the largest entry, lowest index on ties.
std::size_t argmax(const LabelVector& v) noexcept;

/// Row-major (vocab.size() + 2) x dim; padding and OOV rows are zero.
struct EmbeddingMatrix {
    std::size_t rows = 0;
    std::size_t dim = 0;
    std::vector<double> data;
    std::size_t matched = 0;
    /// Set when no vocabulary token was found in the file.
    std::optional<std::string> warning;

    const double* row(std::size_t r) const { return data.data() + r * dim; }
};

/// word2vec text format: "count dim" header then "token v1 ... vdim" per line.
EmbeddingMatrix load_embeddings(const std::filesystem::path& path, const Vocabulary& vocab);
EmbeddingMatrix parse_embeddings(std::istream& in, const Vocabulary& vocab, std::string_view source = "<stream>");

// ---------------------------------------------------------------------------
// Featurization state carried by trained models

enum class FeatureFamily : std::uint8_t { Sequence, Bag };
enum class BagWeighting : std::uint8_t { Counts, TfIdf };

using Feature = std::variant<TokenSequence, SparseVector>;

FeatureFamily family_of(const Feature& f) noexcept;

/// Training-time preprocessing frozen into one object so inference cannot
/// drift from what the model saw.
class Featurizer {
public:
    Featurizer() = default;

    static Featurizer fit_sequence(const std::vector<std::string>& raw_texts,
                                   std::optional<std::size_t> max_vocab = kDefaultVocabularyCap,
                                   std::optional<std::size_t> max_len = std::nullopt);
    static Featurizer fit_bag(const std::vector<std::string>& raw_texts, BagWeighting weighting);

    static Featurizer from_sequence(Vocabulary vocab, std::size_t max_len);
    static Featurizer from_bag(IdfTable table, BagWeighting weighting);

    FeatureFamily family() const noexcept { return family_; }
    BagWeighting weighting() const noexcept { return weighting_; }
    const Vocabulary& vocabulary() const noexcept { return vocab_; }
    std::size_t max_len() const noexcept { return max_len_; }
    const IdfTable& idf_table() const noexcept { return idf_; }

    /// Feature dimension: embedding rows for sequences, column count for bags.
    std::size_t dimension() const noexcept;

    /// Cleaned, stop-word-filtered tokens of a raw title.
    std::vector<std::string> tokens(std::string_view raw) const { return preprocess(raw); }
    Feature transform(std::string_view raw) const;

private:
    FeatureFamily family_ = FeatureFamily::Bag;
    BagWeighting weighting_ = BagWeighting::TfIdf;
    Vocabulary vocab_;
    std::size_t max_len_ = 0;
    IdfTable idf_;
};

}  // namespace taskalloc::textprep
