#pragma once

#include <cstddef>
#include <istream>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "cefr/level.hpp"

namespace cefr {

// Raised for malformed or invalid input data. The CLI maps it to exit code 2.
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class Source { NewselaAuto, WikiAuto, Score, Other };

std::string_view source_name(Source source);
Source parse_source(std::string_view name);

struct TokenAnnotation {
    std::string surface;
    std::string lemma;
    std::string pos;                 // universal POS tag
    std::optional<std::string> ner;  // entity type, possibly with a B-/I-/E-/S- prefix
    bool is_content = false;

    bool operator==(const TokenAnnotation&) const = default;
};

// True for universal POS tags that never count as content words.
bool is_function_pos(std::string_view pos);

struct LabeledSentence {
    std::string id;
    std::string text;
    LevelSet labels;
    Source source = Source::Other;
    bool paragraph_initial = false;
    bool first_paragraph = false;

    bool operator==(const LabeledSentence&) const = default;
};

struct EmbeddingRecord {
    std::string id;
    std::vector<double> vector;  // empty when the record carries no embedding
    std::optional<std::vector<TokenAnnotation>> tokens;

    bool operator==(const EmbeddingRecord&) const = default;
};

class Dataset {
public:
    std::vector<LabeledSentence> sentences;
    std::unordered_map<std::string, EmbeddingRecord> records;
    std::size_t dimension = 0;  // 0 when no vectors are present

    bool has_vectors() const { return dimension > 0; }
    std::size_t size() const { return sentences.size(); }

    const EmbeddingRecord& record(const std::string& id) const;
    const std::vector<double>& vector(const std::string& id) const;

    // Per-level label counts; two-label sentences count once per label.
    std::vector<long> label_counts(int levels = kNumLevels) const;

    // Subset preserving order, by sentence index.
    Dataset subset(const std::vector<std::size_t>& indices) const;

    // Appends a sentence, checking the invariants parse_dataset enforces.
    void add(LabeledSentence sentence, EmbeddingRecord record);
};

// Embedding plus gold set, the unit consumed by the classifiers.
struct LabeledVector {
    std::vector<double> vector;
    LevelSet gold;
};

std::vector<LabeledVector> labeled_vectors(const Dataset& data);

struct ParseOptions {
    // Sentence ids dropped before validation (e.g. trial-session sentences).
    std::unordered_set<std::string> exclude_ids;
    // When false, lines without "labels" are rejected.
    bool labels_optional = false;
};

// Reads NDJSON, one sentence per line. Throws DataError naming the line number.
Dataset parse_dataset(std::istream& in, const ParseOptions& options = {});
Dataset load_dataset(const std::string& path, const ParseOptions& options = {});

void write_dataset(std::ostream& out, const Dataset& data);
void save_dataset(const std::string& path, const Dataset& data);

}  // namespace cefr
