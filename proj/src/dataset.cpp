#include "cefr/dataset.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace cefr {

using nlohmann::json;

namespace {

constexpr double kMinNorm = 1e-12;

[[noreturn]] void fail_line(std::size_t line_no, const std::string& message) {
    throw DataError("line " + std::to_string(line_no) + ": " + message);
}

const json& require_field(const json& obj, const char* name, std::size_t line_no) {
    auto it = obj.find(name);
    if (it == obj.end()) fail_line(line_no, std::string("missing field \"") + name + "\"");
    return *it;
}

TokenAnnotation parse_token(const json& t, std::size_t line_no) {
    if (!t.is_object()) fail_line(line_no, "token entry is not an object");
    TokenAnnotation tok;
    try {
        tok.surface = t.value("surface", std::string{});
        tok.lemma = t.value("lemma", std::string{});
        tok.pos = t.value("pos", std::string{});
        if (auto it = t.find("ner"); it != t.end() && !it->is_null()) {
            tok.ner = it->get<std::string>();
        }
        tok.is_content = t.value("is_content", false);
    } catch (const json::exception& e) {
        fail_line(line_no, std::string("bad token field: ") + e.what());
    }
    if (tok.is_content && is_function_pos(tok.pos)) {
        fail_line(line_no, "token '" + tok.surface + "' with function POS " + tok.pos +
                               " is flagged as a content word");
    }
    return tok;
}

json token_to_json(const TokenAnnotation& tok) {
    json t = {{"surface", tok.surface},
              {"lemma", tok.lemma},
              {"pos", tok.pos},
              {"is_content", tok.is_content}};
    t["ner"] = tok.ner ? json(*tok.ner) : json(nullptr);
    return t;
}

}  // namespace

std::string_view source_name(Source source) {
    switch (source) {
        case Source::NewselaAuto: return "newsela-auto";
        case Source::WikiAuto: return "wiki-auto";
        case Source::Score: return "score";
        case Source::Other: return "other";
    }
    return "other";
}

Source parse_source(std::string_view name) {
    if (name == "newsela-auto") return Source::NewselaAuto;
    if (name == "wiki-auto") return Source::WikiAuto;
    if (name == "score") return Source::Score;
    if (name == "other") return Source::Other;
    throw std::invalid_argument("unknown source '" + std::string(name) + "'");
}

bool is_function_pos(std::string_view pos) {
    static constexpr std::string_view kFunction[] = {"DET",  "ADP",  "CCONJ", "SCONJ",
                                                     "PART", "PRON", "AUX",   "PUNCT"};
    for (auto f : kFunction) {
        if (pos == f) return true;
    }
    return false;
}

const EmbeddingRecord& Dataset::record(const std::string& id) const {
    auto it = records.find(id);
    if (it == records.end()) throw DataError("no embedding record for id '" + id + "'");
    return it->second;
}

const std::vector<double>& Dataset::vector(const std::string& id) const {
    const auto& rec = record(id);
    if (rec.vector.empty()) throw DataError("record '" + id + "' has no vector");
    return rec.vector;
}

std::vector<long> Dataset::label_counts(int levels) const {
    std::vector<long> counts(static_cast<std::size_t>(levels), 0);
    for (const auto& s : sentences) {
        for (Level l : s.labels.levels()) {
            if (l.index() < levels) ++counts[static_cast<std::size_t>(l.index())];
        }
    }
    return counts;
}

Dataset Dataset::subset(const std::vector<std::size_t>& indices) const {
    Dataset out;
    out.dimension = dimension;
    out.sentences.reserve(indices.size());
    for (std::size_t i : indices) {
        const auto& s = sentences.at(i);
        out.sentences.push_back(s);
        if (auto it = records.find(s.id); it != records.end()) out.records.emplace(s.id, it->second);
    }
    return out;
}

void Dataset::add(LabeledSentence sentence, EmbeddingRecord record) {
    if (sentence.text.empty()) throw DataError("sentence '" + sentence.id + "' has empty text");
    if (sentence.labels.size() > 2) throw DataError("sentence '" + sentence.id + "' has more than two labels");
    if (sentence.labels.size() == 2 &&
        sentence.labels.highest().index() - sentence.labels.lowest().index() != 1) {
        throw DataError("sentence '" + sentence.id + "' has labels differing by more than one grade");
    }
    if (records.count(sentence.id) != 0) throw DataError("duplicate id '" + sentence.id + "'");
    if (!record.vector.empty()) {
        if (dimension == 0 && sentences.empty()) {
            dimension = record.vector.size();
        } else if (dimension == 0) {
            throw DataError("sentence '" + sentence.id + "' has a vector but earlier records do not");
        } else if (record.vector.size() != dimension) {
            throw DataError("sentence '" + sentence.id + "': vector dimension " +
                            std::to_string(record.vector.size()) + " differs from dataset dimension " +
                            std::to_string(dimension));
        }
        double sq = 0.0;
        for (double v : record.vector) {
            if (!std::isfinite(v)) throw DataError("sentence '" + sentence.id + "': non-finite vector element");
            sq += v * v;
        }
        if (std::sqrt(sq) <= kMinNorm) throw DataError("sentence '" + sentence.id + "': zero-norm vector");
    } else if (dimension != 0) {
        throw DataError("sentence '" + sentence.id + "' is missing a vector");
    }
    record.id = sentence.id;
    records.emplace(sentence.id, std::move(record));
    sentences.push_back(std::move(sentence));
}

std::vector<LabeledVector> labeled_vectors(const Dataset& data) {
    if (!data.has_vectors()) throw DataError("dataset carries no embedding vectors");
    std::vector<LabeledVector> out;
    out.reserve(data.size());
    for (const auto& s : data.sentences) {
        out.push_back({data.vector(s.id), s.labels});
    }
    return out;
}

Dataset parse_dataset(std::istream& in, const ParseOptions& options) {
    Dataset data;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json obj;
        try {
            obj = json::parse(line);
        } catch (const json::parse_error& e) {
            fail_line(line_no, std::string("malformed JSON: ") + e.what());
        }
        if (!obj.is_object()) fail_line(line_no, "expected a JSON object");

        LabeledSentence sentence;
        EmbeddingRecord record;
        try {
            sentence.id = require_field(obj, "id", line_no).get<std::string>();
            if (options.exclude_ids.count(sentence.id) != 0) continue;
            sentence.text = require_field(obj, "text", line_no).get<std::string>();
            if (auto it = obj.find("labels"); it != obj.end()) {
                for (const auto& l : *it) {
                    auto level = Level::try_from_label(l.get<std::string>());
                    if (!level) fail_line(line_no, "unknown label '" + l.get<std::string>() + "'");
                    sentence.labels.insert(*level);
                }
                if (sentence.labels.empty()) fail_line(line_no, "empty label list");
            } else if (!options.labels_optional) {
                fail_line(line_no, "missing field \"labels\"");
            }
            if (auto it = obj.find("source"); it != obj.end() && !it->is_null()) {
                sentence.source = parse_source(it->get<std::string>());
            }
            sentence.paragraph_initial = obj.value("paragraph_initial", false);
            sentence.first_paragraph = obj.value("first_paragraph", false);
            if (auto it = obj.find("vector"); it != obj.end() && !it->is_null()) {
                record.vector = it->get<std::vector<double>>();
                if (record.vector.empty()) fail_line(line_no, "empty vector");
            }
            if (auto it = obj.find("tokens"); it != obj.end() && !it->is_null()) {
                std::vector<TokenAnnotation> tokens;
                for (const auto& t : *it) tokens.push_back(parse_token(t, line_no));
                record.tokens = std::move(tokens);
            }
        } catch (const json::exception& e) {
            fail_line(line_no, std::string("bad field type: ") + e.what());
        } catch (const std::invalid_argument& e) {
            fail_line(line_no, e.what());
        }

        try {
            data.add(std::move(sentence), std::move(record));
        } catch (const DataError& e) {
            fail_line(line_no, e.what());
        }
    }
    return data;
}

Dataset load_dataset(const std::string& path, const ParseOptions& options) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open dataset file '" + path + "'");
    try {
        return parse_dataset(in, options);
    } catch (const DataError& e) {
        throw DataError(path + ": " + e.what());
    }
}

void write_dataset(std::ostream& out, const Dataset& data) {
    for (const auto& s : data.sentences) {
        json obj;
        obj["id"] = s.id;
        obj["text"] = s.text;
        json labels = json::array();
        for (Level l : s.labels.levels()) labels.push_back(std::string(l.label()));
        obj["labels"] = labels;
        obj["source"] = std::string(source_name(s.source));
        if (s.paragraph_initial) obj["paragraph_initial"] = true;
        if (s.first_paragraph) obj["first_paragraph"] = true;
        if (auto it = data.records.find(s.id); it != data.records.end()) {
            const auto& rec = it->second;
            if (!rec.vector.empty()) obj["vector"] = rec.vector;
            if (rec.tokens) {
                json tokens = json::array();
                for (const auto& t : *rec.tokens) tokens.push_back(token_to_json(t));
                obj["tokens"] = tokens;
            }
        }
        out << obj.dump() << '\n';
    }
}

void save_dataset(const std::string& path, const Dataset& data) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write dataset file '" + path + "'");
    write_dataset(out, data);
}

}  // namespace cefr
