#include "cefr/corpus_tools.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <Eigen/Dense>

namespace cefr {

// ---- splitting ---------------------------------------------------------------

std::vector<double> mean_cosine_distances(const Dataset& data) {
    if (!data.has_vectors()) throw DataError("split: dataset carries no embedding vectors");
    const auto n = static_cast<Eigen::Index>(data.size());
    const auto dim = static_cast<Eigen::Index>(data.dimension);
    Eigen::MatrixXd unit(n, dim);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& v = data.vector(data.sentences[static_cast<std::size_t>(i)].id);
        unit.row(i) = Eigen::Map<const Eigen::RowVectorXd>(v.data(), dim).normalized();
    }
    std::vector<double> out(static_cast<std::size_t>(n), 0.0);
    if (n < 2) return out;
    // Each pair is evaluated once and credited to both ends.
    // Blocks write separate partial sums that are reduced in block order.
    constexpr Eigen::Index kBlock = 256;
    const Eigen::Index blocks = (n + kBlock - 1) / kBlock;
    std::vector<std::vector<double>> partial(static_cast<std::size_t>(blocks));
    std::atomic<Eigen::Index> next{0};
    auto worker = [&] {
        for (Eigen::Index blk = next++; blk < blocks; blk = next++) {
            const Eigen::Index b = blk * kBlock;
            const Eigen::Index rows = std::min(kBlock, n - b);
            const Eigen::MatrixXd cos = unit.middleRows(b, rows) * unit.bottomRows(n - b).transpose();
            auto& acc = partial[static_cast<std::size_t>(blk)];
            acc.assign(static_cast<std::size_t>(n), 0.0);
            for (Eigen::Index r = 0; r < rows; ++r) {
                const Eigen::Index i = b + r;
                for (Eigen::Index j = i + 1; j < n; ++j) {
                    const double d = 1.0 - cos(r, j - b);
                    acc[static_cast<std::size_t>(i)] += d;
                    acc[static_cast<std::size_t>(j)] += d;
                }
            }
        }
    };
    const auto threads = std::min<Eigen::Index>(blocks, std::max(1u, std::thread::hardware_concurrency()));
    std::vector<std::thread> pool;
    for (Eigen::Index t = 1; t < threads; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    for (const auto& acc : partial)
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += acc[i];
    for (auto& v : out) v /= static_cast<double>(n - 1);
    return out;
}

SplitResult split_corpus(const Dataset& data, const SplitQuotas& quotas) {
    std::array<long, kNumLevels> available{};
    for (const auto& s : data.sentences) {
        if (s.labels.empty()) throw DataError("split: sentence '" + s.id + "' has no gold label");
        ++available[static_cast<std::size_t>(s.labels.highest().index())];
    }
    for (std::size_t l = 0; l < kNumLevels; ++l) {
        if (quotas.test[l] < 0 || quotas.valid[l] < 0) throw std::invalid_argument("split: negative quota");
        if (quotas.test[l] + quotas.valid[l] > available[l]) {
            throw std::invalid_argument("split: infeasible quotas for level " + std::string(kLevelLabels[l]) +
                                        ": test " + std::to_string(quotas.test[l]) + " + valid " +
                                        std::to_string(quotas.valid[l]) + " > available " +
                                        std::to_string(available[l]));
        }
    }

    SplitResult result;
    result.mean_distance = mean_cosine_distances(data);
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return result.mean_distance[a] > result.mean_distance[b];
    });

    std::array<long, kNumLevels> test_fill{}, valid_fill{};
    for (std::size_t i : order) {
        const auto level = static_cast<std::size_t>(data.sentences[i].labels.highest().index());
        if (test_fill[level] < quotas.test[level]) {
            ++test_fill[level];
            result.test.push_back(i);
        } else if (valid_fill[level] < quotas.valid[level]) {
            ++valid_fill[level];
            result.valid.push_back(i);
        } else {
            result.train.push_back(i);
        }
    }
    return result;
}

nlohmann::json split_manifest(const Dataset& data, const SplitQuotas& quotas, const SplitResult& split) {
    auto per_level = [&](const std::vector<std::size_t>& idx) {
        std::vector<long> counts(kNumLevels, 0);
        for (std::size_t i : idx) ++counts[static_cast<std::size_t>(data.sentences[i].labels.highest().index())];
        return counts;
    };
    nlohmann::json m;
    m["levels"] = std::vector<std::string>(kLevelLabels.begin(), kLevelLabels.end());
    m["split_level_rule"] = "higher-level";
    m["quotas"] = {{"test", quotas.test}, {"valid", quotas.valid}};
    m["counts"] = {{"test", per_level(split.test)}, {"valid", per_level(split.valid)}, {"train", per_level(split.train)}};
    m["sizes"] = {{"test", split.test.size()}, {"valid", split.valid.size()}, {"train", split.train.size()}};
    return m;
}

// ---- selection ---------------------------------------------------------------

std::string_view reject_reason_name(RejectReason reason) {
    switch (reason) {
        case RejectReason::NotParagraphInitial: return "not_paragraph_initial";
        case RejectReason::FirstParagraph: return "first_paragraph";
        case RejectReason::Length: return "length";
        case RejectReason::QuotesOrBrackets: return "quotes_or_brackets";
        case RejectReason::NamedEntity: return "named_entity";
    }
    return "unknown";
}

int word_count(std::string_view text) {
    int count = 0;
    bool in_word = false;
    bool has_alnum = false;
    for (std::size_t i = 0; i <= text.size(); ++i) {
        const bool end = i == text.size() || std::isspace(static_cast<unsigned char>(text[i]));
        if (end) {
            if (in_word && has_alnum) ++count;
            in_word = false;
            has_alnum = false;
        } else {
            in_word = true;
            const auto c = static_cast<unsigned char>(text[i]);
            // Bytes >= 0x80 belong to non-ASCII letters in UTF-8 text.
            if (std::isalnum(c) || c >= 0x80) has_alnum = true;
        }
    }
    return count;
}

namespace {

bool has_quotes_or_brackets(std::string_view text) {
    static constexpr std::string_view kMarks[] = {"\"", "(", ")", "[", "]", "{", "}",
                                                  "“", "”", "‘", "«", "»"};
    for (auto m : kMarks) {
        if (text.find(m) != std::string_view::npos) return true;
    }
    // A single quote opening a word is a quotation mark; elsewhere it is an apostrophe.
    for (std::string_view q : {std::string_view("'"), std::string_view("’")}) {
        for (auto pos = text.find(q); pos != std::string_view::npos; pos = text.find(q, pos + 1)) {
            if (pos == 0 || std::isspace(static_cast<unsigned char>(text[pos - 1]))) return true;
        }
    }
    return false;
}

struct EntitySpan {
    std::string type;
    std::string phrase;
};

std::vector<EntitySpan> entity_spans(const std::vector<TokenAnnotation>& tokens) {
    std::vector<EntitySpan> spans;
    bool open = false;
    for (const auto& t : tokens) {
        if (!t.ner || t.ner->empty() || *t.ner == "O") {
            open = false;
            continue;
        }
        std::string tag = *t.ner;
        char prefix = 0;
        if (tag.size() > 2 && tag[1] == '-' && std::string_view("BIES").find(tag[0]) != std::string_view::npos) {
            prefix = tag[0];
            tag = tag.substr(2);
        }
        const bool continues = open && (prefix == 'I' || prefix == 'E') && spans.back().type == tag;
        if (continues) {
            spans.back().phrase += " " + t.surface;
        } else {
            spans.push_back({tag, t.surface});
        }
        open = prefix == 'B' || prefix == 'I';
    }
    return spans;
}

}  // namespace

SelectionResult select_sentences(const Dataset& candidates, const SelectionRules& rules) {
    SelectionResult result;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        const auto& s = candidates.sentences[i];
        std::optional<RejectReason> reason;
        if (rules.require_paragraph_initial && !s.paragraph_initial) {
            reason = RejectReason::NotParagraphInitial;
        } else if (rules.exclude_first_paragraph && s.first_paragraph) {
            reason = RejectReason::FirstParagraph;
        } else if (rules.check_length) {
            const int words = word_count(s.text);
            if (words < rules.min_words || words > rules.max_words) reason = RejectReason::Length;
        }
        if (!reason && rules.forbid_quotes_and_brackets && has_quotes_or_brackets(s.text)) {
            reason = RejectReason::QuotesOrBrackets;
        }
        if (!reason && rules.restrict_entities) {
            const auto& rec = candidates.record(s.id);
            if (!rec.tokens) {
                throw DataError("select: sentence '" + s.id + "' lacks token annotations needed by the entity rule");
            }
            for (const auto& span : entity_spans(*rec.tokens)) {
                if (rules.allowed_entity_types.count(span.type) == 0 && rules.name_allowlist.count(span.phrase) == 0) {
                    reason = RejectReason::NamedEntity;
                    break;
                }
            }
        }
        if (reason) {
            ++result.rejected[*reason];
        } else {
            result.kept.push_back(i);
        }
    }
    return result;
}

std::set<std::string> load_name_allowlist(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open allowlist '" + path + "'");
    std::set<std::string> names;
    std::string line;
    while (std::getline(in, line)) {
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        const auto b = line.find_first_not_of(" \t\r");
        if (b == std::string::npos) continue;
        const auto e = line.find_last_not_of(" \t\r");
        names.insert(line.substr(b, e - b + 1));
    }
    return names;
}

// ---- lexical profiling -------------------------------------------------------

namespace {

std::string lower(std::string s) {
    for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

}  // namespace

std::optional<Level> Wordlist::lookup(const std::string& lemma, const std::string& pos) const {
    auto it = entries.find({lemma, lower(pos)});
    if (it == entries.end()) return std::nullopt;
    return it->second;
}

Wordlist parse_wordlist(std::istream& in) {
    Wordlist wl;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        std::vector<std::string> fields;
        std::stringstream ss(line);
        std::string f;
        while (std::getline(ss, f, '\t')) fields.push_back(f);
        if (line_no == 1 && !fields.empty() && lower(fields[0]) == "lemma") continue;
        if (fields.size() != 3) {
            throw DataError("wordlist line " + std::to_string(line_no) + ": expected lemma<TAB>pos<TAB>level");
        }
        const auto level = Level::try_from_label(fields[2]);
        if (!level || level->index() > 3) {
            throw DataError("wordlist line " + std::to_string(line_no) + ": level must be one of A1, A2, B1, B2");
        }
        const auto key = std::make_pair(fields[0], lower(fields[1]));
        auto [it, inserted] = wl.entries.emplace(key, *level);
        if (!inserted && it->second != *level) {
            throw DataError("wordlist line " + std::to_string(line_no) + ": conflicting level for (" + fields[0] +
                            ", " + fields[1] + ")");
        }
    }
    return wl;
}

Wordlist load_wordlist(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open wordlist '" + path + "'");
    return parse_wordlist(in);
}

std::vector<LexicalProfileRow> lexical_profile(const Dataset& data, const Wordlist& wordlist) {
    std::vector<LexicalProfileRow> rows(kNumLevels);
    std::vector<long> total_words(kNumLevels, 0);
    std::vector<std::array<long, 4>> lexical(kNumLevels, std::array<long, 4>{});
    for (int j = 0; j < kNumLevels; ++j) rows[static_cast<std::size_t>(j)].level = Level(j);

    for (const auto& s : data.sentences) {
        const auto& rec = data.record(s.id);
        if (!rec.tokens) throw DataError("profile: sentence '" + s.id + "' lacks token annotations");
        long words = 0, content = 0;
        std::array<long, 4> hits{};
        for (const auto& t : *rec.tokens) {
            if (t.pos != "PUNCT") ++words;
            if (!t.is_content) continue;
            ++content;
            if (auto l = wordlist.lookup(t.lemma, t.pos)) ++hits[static_cast<std::size_t>(l->index())];
        }
        for (Level l : s.labels.levels()) {
            const auto j = static_cast<std::size_t>(l.index());
            ++rows[j].sentences;
            total_words[j] += words;
            rows[j].content_words += content;
            for (std::size_t k = 0; k < 4; ++k) lexical[j][k] += hits[k];
        }
    }
    for (std::size_t j = 0; j < rows.size(); ++j) {
        auto& r = rows[j];
        if (r.sentences > 0) r.mean_length = static_cast<double>(total_words[j]) / static_cast<double>(r.sentences);
        for (std::size_t k = 0; k < 4; ++k) {
            r.percent[k] = r.content_words > 0
                               ? 100.0 * static_cast<double>(lexical[j][k]) / static_cast<double>(r.content_words)
                               : 0.0;
        }
    }
    return rows;
}

std::string format_profile_tsv(const std::vector<LexicalProfileRow>& rows) {
    std::ostringstream out;
    out << "level\tsentences\tmean_length\tcontent_words\tA1_pct\tA2_pct\tB1_pct\tB2_pct\n";
    char buf[64];
    for (const auto& r : rows) {
        out << r.level.label() << '\t' << r.sentences << '\t';
        std::snprintf(buf, sizeof buf, "%.1f", r.mean_length);
        out << buf << '\t' << r.content_words;
        for (double p : r.percent) {
            std::snprintf(buf, sizeof buf, "\t%.1f", p);
            out << buf;
        }
        out << '\n';
    }
    return out.str();
}

// ---- crosstab ----------------------------------------------------------------

namespace {

bool natural_less(const std::string& a, const std::string& b) {
    char* end_a = nullptr;
    char* end_b = nullptr;
    const double na = std::strtod(a.c_str(), &end_a);
    const double nb = std::strtod(b.c_str(), &end_b);
    const bool num_a = !a.empty() && *end_a == '\0';
    const bool num_b = !b.empty() && *end_b == '\0';
    if (num_a && num_b) return na < nb || (na == nb && a < b);
    if (num_a != num_b) return num_a;
    return a < b;
}

}  // namespace

Crosstab level_crosstab(const Dataset& data, const std::unordered_map<std::string, std::string>& external) {
    std::vector<std::pair<const LabeledSentence*, std::string>> shared;
    std::set<std::string> labels;
    for (const auto& s : data.sentences) {
        auto it = external.find(s.id);
        if (it == external.end()) continue;
        shared.emplace_back(&s, it->second);
        labels.insert(it->second);
    }
    if (shared.empty()) throw DataError("crosstab: no sentence ids shared with the external labelling");
    Crosstab table;
    table.columns.assign(labels.begin(), labels.end());
    std::sort(table.columns.begin(), table.columns.end(), natural_less);
    std::map<std::string, std::size_t> column_of;
    for (std::size_t i = 0; i < table.columns.size(); ++i) column_of[table.columns[i]] = i;
    table.counts.assign(kNumLevels, std::vector<long>(table.columns.size(), 0));
    for (const auto& [s, ext] : shared) {
        for (Level l : s->labels.levels()) ++table.counts[static_cast<std::size_t>(l.index())][column_of[ext]];
    }
    return table;
}

std::unordered_map<std::string, std::string> load_external_labels(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open external label file '" + path + "'");
    std::unordered_map<std::string, std::string> out;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        const auto tab = line.find('\t');
        if (tab == std::string::npos) {
            throw DataError(path + ":" + std::to_string(line_no) + ": expected id<TAB>label");
        }
        out[line.substr(0, tab)] = line.substr(tab + 1);
    }
    return out;
}

std::string format_crosstab_tsv(const Crosstab& table) {
    std::ostringstream out;
    out << "cefr";
    for (const auto& c : table.columns) out << '\t' << c;
    out << '\n';
    for (std::size_t j = 0; j < table.counts.size(); ++j) {
        out << kLevelLabels[j];
        for (long v : table.counts[j]) out << '\t' << v;
        out << '\n';
    }
    return out.str();
}

}  // namespace cefr
