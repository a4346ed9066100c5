#pragma once

#include <array>
#include <map>
#include <set>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "cefr/dataset.hpp"
#include "cefr/level.hpp"
#include "json.hpp"

namespace cefr {

// ---- splitting ---------------------------------------------------------------

struct SplitQuotas {
    std::array<long, kNumLevels> test{};
    std::array<long, kNumLevels> valid{};
};

struct SplitResult {
    // Sentence indices into the input dataset, in assignment (walk) order.
    std::vector<std::size_t> test, valid, train;
    std::vector<double> mean_distance;  // per input sentence
};

// Mean cosine distance of each vector to every other vector.
std::vector<double> mean_cosine_distances(const Dataset& data);

// Walks sentences by descending mean cosine distance (ties: input order), filling the
// test quota of each sentence's higher gold level first, then the validation quota,
// and sends the rest to train.
SplitResult split_corpus(const Dataset& data, const SplitQuotas& quotas);

nlohmann::json split_manifest(const Dataset& data, const SplitQuotas& quotas, const SplitResult& split);

// ---- stand-alone sentence selection -----------------------------------------

struct SelectionRules {
    bool require_paragraph_initial = true;
    bool exclude_first_paragraph = true;
    bool check_length = true;
    int min_words = 5;
    int max_words = 30;
    bool forbid_quotes_and_brackets = true;
    bool restrict_entities = true;
    std::set<std::string> allowed_entity_types = {"DATE",    "TIME",    "PERCENT", "MONEY",
                                                  "QUANTITY", "ORDINAL", "CARDINAL"};
    std::set<std::string> name_allowlist;
};

enum class RejectReason { NotParagraphInitial, FirstParagraph, Length, QuotesOrBrackets, NamedEntity };

std::string_view reject_reason_name(RejectReason reason);

struct SelectionResult {
    std::vector<std::size_t> kept;  // indices into the candidate dataset
    std::map<RejectReason, long> rejected;
};

// Whitespace-separated words containing at least one letter or digit.
int word_count(std::string_view text);

// Applies the enabled rules in declaration order; a rejected sentence is counted
// under the first rule it fails.
SelectionResult select_sentences(const Dataset& candidates, const SelectionRules& rules);

// One name per line; blank lines and '#' comments ignored.
std::set<std::string> load_name_allowlist(const std::string& path);

// ---- lexical profiling -------------------------------------------------------

struct Wordlist {
    std::map<std::pair<std::string, std::string>, Level> entries;  // (lemma, lower-case pos)

    std::optional<Level> lookup(const std::string& lemma, const std::string& pos) const;
};

Wordlist parse_wordlist(std::istream& in);
Wordlist load_wordlist(const std::string& path);

struct LexicalProfileRow {
    Level level;
    long sentences = 0;
    double mean_length = 0.0;
    long content_words = 0;
    std::array<double, 4> percent{};  // A1, A2, B1, B2
};

// Rows for every sentence level; two-label sentences count once per label.
std::vector<LexicalProfileRow> lexical_profile(const Dataset& data, const Wordlist& wordlist);

std::string format_profile_tsv(const std::vector<LexicalProfileRow>& rows);

// ---- level cross-tabulation --------------------------------------------------

struct Crosstab {
    std::vector<std::string> columns;  // external labels, natural order
    std::vector<std::vector<long>> counts;  // kNumLevels rows
};

Crosstab level_crosstab(const Dataset& data, const std::unordered_map<std::string, std::string>& external);

// "id<TAB>label" per line.
std::unordered_map<std::string, std::string> load_external_labels(const std::string& path);

std::string format_crosstab_tsv(const Crosstab& table);

}  // namespace cefr
