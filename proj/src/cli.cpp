#include "cefr/cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <unordered_map>

#include "CLI11.hpp"
#include "cefr/baselines.hpp"
#include "cefr/corpus_tools.hpp"
#include "cefr/dataset.hpp"
#include "cefr/evaluation.hpp"
#include "cefr/metric_head.hpp"
#include "cefr/model_io.hpp"
#include "cefr/training.hpp"
#include "json.hpp"

namespace cefr::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kDataDirEnv = "CEFR_DATA_DIR";

// Relative input paths that do not exist locally are looked up under $CEFR_DATA_DIR.
std::string resolve_input(const std::string& path) {
    if (path.empty() || fs::path(path).is_absolute() || fs::exists(path)) return path;
    if (const char* dir = std::getenv(kDataDirEnv); dir != nullptr && *dir != '\0') {
        const fs::path candidate = fs::path(dir) / path;
        if (fs::exists(candidate)) return candidate.string();
    }
    return path;
}

std::unordered_set<std::string> load_id_list(const std::string& path) {
    std::unordered_set<std::string> ids;
    if (path.empty()) return ids;
    std::ifstream in(resolve_input(path));
    if (!in) throw DataError("cannot open id list '" + path + "'");
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty() && line[0] != '#') ids.insert(line);
    }
    return ids;
}

Dataset read_data(const std::string& path, bool labels_optional = false, const std::string& exclude = {}) {
    ParseOptions opts;
    opts.labels_optional = labels_optional;
    opts.exclude_ids = load_id_list(exclude);
    return load_dataset(resolve_input(path), opts);
}

// Writes to the named file, or to `fallback` when the path is empty.
class Output {
public:
    Output(const std::string& path, std::ostream& fallback) {
        if (path.empty()) {
            stream_ = &fallback;
        } else {
            file_.open(path, std::ios::binary);
            if (!file_) throw DataError("cannot write '" + path + "'");
            stream_ = &file_;
        }
    }
    std::ostream& operator*() { return *stream_; }

private:
    std::ofstream file_;
    std::ostream* stream_;
};

std::array<long, kNumLevels> parse_quota(const std::string& text) {
    std::array<long, kNumLevels> q{};
    if (text.empty()) return q;
    std::stringstream ss(text);
    std::string item;
    std::size_t i = 0;
    while (std::getline(ss, item, ',')) {
        if (i >= q.size()) throw std::invalid_argument("quota list has more than 6 entries");
        q[i++] = std::stol(item);
    }
    if (i != q.size()) throw std::invalid_argument("quota list needs 6 comma-separated counts (A1..C2)");
    return q;
}

std::string with_run_suffix(const std::string& path, int run) {
    char buf[16];
    std::snprintf(buf, sizeof buf, ".run%02d", run);
    const fs::path p(path);
    return (p.parent_path() / (p.stem().string() + buf + p.extension().string())).string();
}

void write_predictions(std::ostream& out, const Dataset& data, const PrototypeModel& model) {
    for (const auto& s : data.sentences) {
        const auto pred = predict_full(data.vector(s.id), model);
        json j;
        j["id"] = s.id;
        j["level"] = std::string(pred.level.label());
        j["probabilities"] = std::vector<double>(pred.probabilities.data(), pred.probabilities.data() + pred.probabilities.size());
        j["similarities"] = std::vector<double>(pred.similarities.data(), pred.similarities.data() + pred.similarities.size());
        out << j.dump() << '\n';
    }
}

void write_level_predictions(std::ostream& out, const Dataset& data, const std::vector<Level>& preds) {
    for (std::size_t i = 0; i < preds.size(); ++i) {
        out << json{{"id", data.sentences[i].id}, {"level", std::string(preds[i].label())}}.dump() << '\n';
    }
}

std::unordered_map<std::string, Level> read_predictions(const std::string& path) {
    std::ifstream in(resolve_input(path));
    if (!in) throw DataError("cannot open predictions '" + path + "'");
    std::unordered_map<std::string, Level> preds;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            const auto j = json::parse(line);
            preds[j.at("id").get<std::string>()] = Level::from_label(j.at("level").get<std::string>());
        } catch (const std::exception& e) {
            throw DataError(path + ": line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return preds;
}

EvalReport evaluate_against(const Dataset& gold, const std::vector<Level>& preds) {
    std::vector<LevelSet> golds;
    for (const auto& s : gold.sentences) golds.push_back(s.labels);
    return evaluate(preds, golds);
}

std::vector<Level> predict_dataset(const Dataset& data, const PrototypeModel& model) {
    std::vector<Level> preds;
    for (const auto& s : data.sentences) preds.push_back(predict(data.vector(s.id), model));
    return preds;
}

// ---- subcommands ---------------------------------------------------------------

struct TrainArgs {
    std::string data, valid, test, out, config, log, json_mirror, report, exclude;
    std::optional<int> k, batch_size, patience, max_epochs;
    std::optional<double> alpha, lr, min_delta, weight_decay, noise;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> target_rule, weight_mode;
    bool no_adapter = false, no_loss_weights = false, no_init = false;
    int runs = 1;
};

int cmd_train(const TrainArgs& a, std::ostream& out) {
    TrainConfig cfg;
    cfg.per_level = 3;
    if (!a.config.empty()) apply_config_file(resolve_input(a.config), cfg);
    if (a.k) cfg.per_level = *a.k;
    if (a.alpha) cfg.alpha = *a.alpha;
    if (a.lr) cfg.learning_rate = *a.lr;
    if (a.batch_size) cfg.batch_size = *a.batch_size;
    if (a.patience) cfg.patience = *a.patience;
    if (a.min_delta) cfg.min_delta = *a.min_delta;
    if (a.max_epochs) cfg.max_epochs = *a.max_epochs;
    if (a.weight_decay) cfg.weight_decay = *a.weight_decay;
    if (a.noise) cfg.noise_fraction = *a.noise;
    if (a.seed) cfg.seed = *a.seed;
    if (a.no_adapter) cfg.adapter_enabled = false;
    if (a.no_loss_weights) cfg.loss_weighting = false;
    if (a.no_init) cfg.init_from_means = false;
    if (a.target_rule) {
        std::istringstream s("target_rule = " + *a.target_rule);
        apply_config_stream(s, cfg, "--target-rule");
    }
    if (a.weight_mode) {
        std::istringstream s("weight_mode = " + *a.weight_mode);
        apply_config_stream(s, cfg, "--weight-mode");
    }
    cfg.validate();
    if (a.runs < 1) throw std::invalid_argument("--runs must be >= 1");

    const Dataset train_set = read_data(a.data, false, a.exclude);
    const Dataset valid_set = read_data(a.valid, false, a.exclude);
    std::optional<Dataset> test_set;
    if (!a.test.empty()) test_set = read_data(a.test, false, a.exclude);

    std::vector<std::uint64_t> seeds{cfg.seed};
    if (a.runs > 1) {
        seeds.clear();
        std::mt19937_64 seeder(cfg.seed);
        for (int r = 0; r < a.runs; ++r) seeds.push_back(seeder() >> 32);
    }

    std::vector<EvalReport> reports;
    for (int r = 0; r < a.runs; ++r) {
        TrainConfig run_cfg = cfg;
        run_cfg.seed = seeds[static_cast<std::size_t>(r)];
        const auto result = train(train_set, valid_set, run_cfg);
        const std::string model_path = a.runs > 1 ? with_run_suffix(a.out, r + 1) : a.out;
        save_model(model_path, result.model);
        const std::string log_path = a.log.empty() ? model_path + ".trainlog.ndjson"
                                                   : (a.runs > 1 ? with_run_suffix(a.log, r + 1) : a.log);
        {
            Output log_out(log_path, out);
            write_train_log(*log_out, result.log);
        }
        if (!a.json_mirror.empty()) {
            Output mirror(a.runs > 1 ? with_run_suffix(a.json_mirror, r + 1) : a.json_mirror, out);
            *mirror << model_to_json(result.model).dump(2) << '\n';
        }
        out << "run " << (r + 1) << "/" << a.runs << " seed " << run_cfg.seed << ": best epoch "
            << result.log.best_epoch << ", valid macro-F1 " << result.log.best_valid_macro_f1 << " -> "
            << model_path << '\n';
        if (test_set) reports.push_back(evaluate_against(*test_set, predict_dataset(*test_set, result.model)));
    }

    if (test_set) {
        out << (a.runs >= 3 ? format_multi_run_table("proposed", reports)
                            : format_report_table("proposed", reports.back()));
        if (!a.report.empty()) {
            json j;
            j["runs"] = json::array();
            std::vector<double> f1s, kappas;
            for (std::size_t i = 0; i < reports.size(); ++i) {
                j["runs"].push_back({{"seed", seeds[i]}, {"report", report_to_json(reports[i])}});
                f1s.push_back(reports[i].macro_f1);
                kappas.push_back(reports[i].weighted_kappa);
            }
            if (reports.size() >= 3) {
                j["macro_f1"] = summary_to_json(multi_run_summary(f1s));
                j["weighted_kappa"] = summary_to_json(multi_run_summary(kappas));
            }
            Output rep(a.report, out);
            *rep << j.dump(2) << '\n';
        }
    }
    return kExitOk;
}

int cmd_predict(const std::string& model_path, const std::string& data, const std::string& out_path,
                std::ostream& out) {
    const auto model = load_model(resolve_input(model_path));
    const Dataset ds = read_data(data, true);
    Output o(out_path, out);
    write_predictions(*o, ds, model);
    return kExitOk;
}

int cmd_evaluate(const std::string& preds_path, const std::string& gold_path, const std::string& json_path,
                 const std::string& name, std::ostream& out) {
    const auto preds = read_predictions(preds_path);
    const Dataset gold = read_data(gold_path);
    std::vector<Level> ordered;
    for (const auto& s : gold.sentences) {
        auto it = preds.find(s.id);
        if (it == preds.end()) throw DataError("no prediction for gold sentence '" + s.id + "'");
        ordered.push_back(it->second);
    }
    const auto report = evaluate_against(gold, ordered);
    out << format_report_table(name, report);
    if (!json_path.empty()) {
        Output o(json_path, out);
        *o << report_to_json(report).dump(2) << '\n';
    }
    return kExitOk;
}

struct KnnArgs {
    std::string train, data, out, save_index, index;
    int k = 6;
    bool weighted = false;
};

int cmd_knn(const KnnArgs& a, std::ostream& out) {
    KnnIndex index;
    if (!a.index.empty()) {
        index = knn_index_from_container(load_container(resolve_input(a.index)));
    } else {
        if (a.train.empty()) throw std::invalid_argument("knn needs --train or --index");
        const auto samples = labeled_vectors(read_data(a.train));
        index = build_knn_index(samples, a.k, a.weighted);
    }
    if (!a.save_index.empty()) save_container(a.save_index, to_container(index));
    if (!a.data.empty()) {
        const Dataset ds = read_data(a.data, true);
        std::vector<Level> preds;
        for (const auto& s : ds.sentences) preds.push_back(knn_predict(ds.vector(s.id), index));
        Output o(a.out, out);
        write_level_predictions(*o, ds, preds);
    }
    return kExitOk;
}

struct BowArgs {
    std::string train, data, out, save_model, model;
    std::optional<double> gamma;
    double alpha = 0.3;
    bool no_loss_weights = false;
    std::string weight_mode = "frequency-ratio";
    int epochs = 50;
    std::uint64_t seed = 0;
};

int cmd_bow(const BowArgs& a, std::ostream& out) {
    BowModel model;
    if (!a.model.empty()) {
        model = bow_model_from_container(load_container(resolve_input(a.model)));
    } else {
        if (a.train.empty()) throw std::invalid_argument("bow needs --train or --model");
        const Dataset train_set = read_data(a.train);
        std::vector<double> weights;
        if (!a.no_loss_weights) {
            TrainConfig wc;
            wc.alpha = a.alpha;
            std::istringstream mode("weight_mode = " + a.weight_mode);
            apply_config_stream(mode, wc, "--weight-mode");
            weights = effective_class_weights(train_set.label_counts(), wc);
            // Direct weights sum to 1; rescale so an average sample keeps unit weight.
            if (wc.weight_mode == WeightMode::Direct)
                for (double& w : weights) w *= static_cast<double>(weights.size());
        }
        BowOptions opts;
        opts.gamma = a.gamma.value_or(a.no_loss_weights ? 4.6 : 0.7);
        opts.epochs = a.epochs;
        opts.seed = a.seed;
        model = bow_train(train_set, weights, opts);
    }
    if (!a.save_model.empty()) save_container(a.save_model, to_container(model));
    if (!a.data.empty()) {
        const Dataset ds = read_data(a.data, true);
        std::vector<Level> preds;
        for (const auto& s : ds.sentences) {
            const auto& rec = ds.record(s.id);
            if (!rec.tokens) throw DataError("sentence '" + s.id + "' lacks token annotations needed for BoW");
            preds.push_back(bow_predict(bow_featurize(*rec.tokens, model.vocabulary), model));
        }
        Output o(a.out, out);
        write_level_predictions(*o, ds, preds);
    }
    return kExitOk;
}

int cmd_split(const std::string& data, const std::string& test_quota, const std::string& valid_quota,
              const std::string& out_dir, std::ostream& out) {
    const Dataset ds = read_data(data);
    SplitQuotas quotas;
    quotas.test = parse_quota(test_quota);
    quotas.valid = parse_quota(valid_quota);
    const auto split = split_corpus(ds, quotas);
    fs::create_directories(out_dir);
    save_dataset((fs::path(out_dir) / "test.ndjson").string(), ds.subset(split.test));
    save_dataset((fs::path(out_dir) / "valid.ndjson").string(), ds.subset(split.valid));
    save_dataset((fs::path(out_dir) / "train.ndjson").string(), ds.subset(split.train));
    const auto manifest = split_manifest(ds, quotas, split);
    std::ofstream m(fs::path(out_dir) / "manifest.json");
    if (!m) throw DataError("cannot write manifest in '" + out_dir + "'");
    m << manifest.dump(2) << '\n';
    out << "test " << split.test.size() << ", valid " << split.valid.size() << ", train " << split.train.size()
        << " -> " << out_dir << '\n';
    return kExitOk;
}

int cmd_profile(const std::string& data, const std::string& wordlist, const std::string& out_path,
                std::ostream& out) {
    const auto rows = lexical_profile(read_data(data), load_wordlist(resolve_input(wordlist)));
    Output o(out_path, out);
    *o << format_profile_tsv(rows);
    return kExitOk;
}

int cmd_crosstab(const std::string& data, const std::string& external, const std::string& out_path,
                 std::ostream& out) {
    const auto table = level_crosstab(read_data(data), load_external_labels(resolve_input(external)));
    Output o(out_path, out);
    *o << format_crosstab_tsv(table);
    return kExitOk;
}

int cmd_init(const std::string& data, int k, double noise, std::uint64_t seed, bool adapter,
             const std::string& out_path, const std::string& json_path, std::ostream& out) {
    InitOptions opts;
    opts.per_level = k;
    opts.noise_fraction = noise;
    opts.seed = seed;
    opts.with_adapter = adapter;
    const auto model = init_prototypes(read_data(data), opts);
    if (!out_path.empty()) save_model(out_path, model);
    if (!json_path.empty() || out_path.empty()) {
        Output o(json_path, out);
        *o << model_to_json(model).dump(2) << '\n';
    }
    return kExitOk;
}

int cmd_agreement(const std::string& pairs_path, const std::string& out_path, std::ostream& out) {
    std::ifstream in(resolve_input(pairs_path));
    if (!in) throw DataError("cannot open '" + pairs_path + "'");
    std::vector<double> a, b;
    std::ostringstream reconciled;
    long exact = 0, adjacent = 0, rejected = 0;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        std::vector<std::string> f;
        std::stringstream ss(line);
        std::string field;
        while (std::getline(ss, field, '\t')) f.push_back(field);
        if (f.size() != 3) throw DataError(pairs_path + ":" + std::to_string(line_no) + ": expected id<TAB>level<TAB>level");
        const auto la = Level::try_from_label(f[1]);
        const auto lb = Level::try_from_label(f[2]);
        if (!la || !lb) throw DataError(pairs_path + ":" + std::to_string(line_no) + ": unknown CEFR label");
        a.push_back(la->index());
        b.push_back(lb->index());
        const auto set = reconcile_annotations(*la, *lb);
        if (!set) {
            ++rejected;
            continue;
        }
        (set->size() == 1 ? exact : adjacent)++;
        reconciled << f[0];
        for (Level l : set->levels()) reconciled << '\t' << l.label();
        reconciled << '\n';
    }
    json j = {{"pairs", a.size()}, {"identical", exact}, {"adjacent", adjacent}, {"rejected", rejected}};
    j["pearson"] = pearson(a, b);
    out << j.dump() << '\n';
    if (!out_path.empty()) {
        Output o(out_path, out);
        *o << reconciled.str();
    }
    return kExitOk;
}

struct SelectArgs {
    std::string data, allowlist, out;
    int min_words = 5, max_words = 30;
    bool keep_non_initial = false, keep_first_paragraph = false, allow_quotes = false, allow_entities = false;
};

int cmd_select(const SelectArgs& a, std::ostream& out) {
    const Dataset ds = read_data(a.data, true);
    SelectionRules rules;
    rules.min_words = a.min_words;
    rules.max_words = a.max_words;
    rules.require_paragraph_initial = !a.keep_non_initial;
    rules.exclude_first_paragraph = !a.keep_first_paragraph;
    rules.forbid_quotes_and_brackets = !a.allow_quotes;
    rules.restrict_entities = !a.allow_entities;
    if (!a.allowlist.empty()) rules.name_allowlist = load_name_allowlist(resolve_input(a.allowlist));
    const auto result = select_sentences(ds, rules);
    json summary = {{"candidates", ds.size()}, {"kept", result.kept.size()}};
    json rejected = json::object();
    for (const auto& [reason, count] : result.rejected) rejected[std::string(reject_reason_name(reason))] = count;
    summary["rejected"] = rejected;
    if (!a.out.empty()) {
        save_dataset(a.out, ds.subset(result.kept));
        out << summary.dump() << '\n';
    } else {
        write_dataset(out, ds.subset(result.kept));
    }
    return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"CEFR sentence-level assessment toolkit", "cefr"};
    app.require_subcommand(1, 1);

    TrainArgs train_args;
    auto* train_cmd = app.add_subcommand("train", "Train the prototype head");
    train_cmd->add_option("--data", train_args.data, "Training NDJSON")->required();
    train_cmd->add_option("--valid", train_args.valid, "Validation NDJSON")->required();
    train_cmd->add_option("--out", train_args.out, "Model file")->required();
    train_cmd->add_option("--test", train_args.test, "Test NDJSON evaluated after training");
    train_cmd->add_option("--config", train_args.config, "key = value config file; flags override it");
    train_cmd->add_option("--log", train_args.log, "TrainLog NDJSON (default <out>.trainlog.ndjson)");
    train_cmd->add_option("--json", train_args.json_mirror, "JSON mirror of the model");
    train_cmd->add_option("--report", train_args.report, "JSON evaluation report (with --test)");
    train_cmd->add_option("--exclude", train_args.exclude, "File of sentence ids to drop");
    train_cmd->add_option("--k", train_args.k, "Prototypes per level");
    train_cmd->add_option("--alpha", train_args.alpha, "Loss weighting exponent");
    train_cmd->add_option("--lr", train_args.lr, "Learning rate");
    train_cmd->add_option("--batch-size", train_args.batch_size);
    train_cmd->add_option("--patience", train_args.patience);
    train_cmd->add_option("--min-delta", train_args.min_delta);
    train_cmd->add_option("--max-epochs", train_args.max_epochs);
    train_cmd->add_option("--weight-decay", train_args.weight_decay);
    train_cmd->add_option("--noise", train_args.noise, "Initialisation noise fraction");
    train_cmd->add_option("--seed", train_args.seed);
    train_cmd->add_option("--target-rule", train_args.target_rule, "most-probable | higher-level");
    train_cmd->add_option("--weight-mode", train_args.weight_mode, "frequency-ratio (default) | direct");
    train_cmd->add_flag("--no-adapter", train_args.no_adapter, "Train prototypes only");
    train_cmd->add_flag("--no-loss-weights", train_args.no_loss_weights);
    train_cmd->add_flag("--no-init", train_args.no_init, "Random prototype initialisation");
    train_cmd->add_option("--runs", train_args.runs, "Independent runs with derived seeds");

    std::string pred_model, pred_data, pred_out;
    auto* predict_cmd = app.add_subcommand("predict", "Predict levels with a trained model");
    predict_cmd->add_option("--model", pred_model)->required();
    predict_cmd->add_option("--data", pred_data)->required();
    predict_cmd->add_option("--out", pred_out, "Predictions NDJSON (default stdout)");

    std::string ev_preds, ev_gold, ev_json, ev_name = "model";
    auto* eval_cmd = app.add_subcommand("evaluate", "Score predictions against gold labels");
    eval_cmd->add_option("--preds", ev_preds)->required();
    eval_cmd->add_option("--gold", ev_gold)->required();
    eval_cmd->add_option("--json", ev_json, "Write the EvalReport as JSON");
    eval_cmd->add_option("--name", ev_name, "Row label in the table");

    KnnArgs knn_args;
    auto* knn_cmd = app.add_subcommand("knn", "k-nearest-neighbour baseline (cosine distance)");
    knn_cmd->add_option("--train", knn_args.train);
    knn_cmd->add_option("--index", knn_args.index, "Load a saved index instead of --train");
    knn_cmd->add_option("--data", knn_args.data);
    knn_cmd->add_option("--out", knn_args.out);
    knn_cmd->add_option("--save-index", knn_args.save_index);
    knn_cmd->add_option("--k", knn_args.k);
    knn_cmd->add_flag("--distance-weighted", knn_args.weighted);
    knn_cmd->add_option("--seed", [](const CLI::results_t&) { return true; }, "Accepted for uniformity; unused");

    BowArgs bow_args;
    auto* bow_cmd = app.add_subcommand("bow", "Linear bag-of-words SVM baseline");
    bow_cmd->add_option("--train", bow_args.train);
    bow_cmd->add_option("--model", bow_args.model, "Load a saved model instead of --train");
    bow_cmd->add_option("--data", bow_args.data);
    bow_cmd->add_option("--out", bow_args.out);
    bow_cmd->add_option("--save-model", bow_args.save_model);
    bow_cmd->add_option("--gamma", bow_args.gamma, "Default 0.7 with loss weights, 4.6 without");
    bow_cmd->add_option("--alpha", bow_args.alpha);
    bow_cmd->add_flag("--no-loss-weights", bow_args.no_loss_weights);
    bow_cmd->add_option("--weight-mode", bow_args.weight_mode, "frequency-ratio | direct");
    bow_cmd->add_option("--epochs", bow_args.epochs);
    bow_cmd->add_option("--seed", bow_args.seed);

    std::string split_data, split_test, split_valid, split_dir;
    auto* split_cmd = app.add_subcommand("split", "Similarity-aware train/valid/test split");
    split_cmd->add_option("--data", split_data)->required();
    split_cmd->add_option("--test-quota", split_test, "Six counts A1..C2, comma separated")->required();
    split_cmd->add_option("--valid-quota", split_valid, "Six counts A1..C2, comma separated")->required();
    split_cmd->add_option("--out-dir", split_dir)->required();
    split_cmd->add_option("--seed", [](const CLI::results_t&) { return true; }, "Accepted for uniformity; unused");

    std::string prof_data, prof_wordlist, prof_out;
    auto* profile_cmd = app.add_subcommand("profile", "Sentence length and lexical level profile");
    profile_cmd->add_option("--data", prof_data)->required();
    profile_cmd->add_option("--wordlist", prof_wordlist, "lemma<TAB>pos<TAB>level")->required();
    profile_cmd->add_option("--out", prof_out);

    std::string ct_data, ct_external, ct_out;
    auto* crosstab_cmd = app.add_subcommand("crosstab", "Contingency table against another labelling");
    crosstab_cmd->add_option("--data", ct_data)->required();
    crosstab_cmd->add_option("--external", ct_external, "id<TAB>label")->required();
    crosstab_cmd->add_option("--out", ct_out);

    std::string init_data, init_out, init_json;
    int init_k = 3;
    double init_noise = 0.05;
    std::uint64_t init_seed = 0;
    bool init_adapter = false;
    auto* init_cmd = app.add_subcommand("init-prototypes", "Class-mean prototype initialisation only");
    init_cmd->add_option("--data", init_data)->required();
    init_cmd->add_option("--k", init_k);
    init_cmd->add_option("--noise", init_noise);
    init_cmd->add_option("--seed", init_seed);
    init_cmd->add_flag("--adapter", init_adapter);
    init_cmd->add_option("--out", init_out);
    init_cmd->add_option("--json", init_json);

    std::string agr_pairs, agr_out;
    auto* agreement_cmd = app.add_subcommand("agreement", "Annotator agreement and label reconciliation");
    agreement_cmd->add_option("--pairs", agr_pairs, "id<TAB>levelA<TAB>levelB")->required();
    agreement_cmd->add_option("--out", agr_out, "Reconciled labels TSV");

    SelectArgs sel_args;
    auto* select_cmd = app.add_subcommand("select", "Stand-alone sentence selection");
    select_cmd->add_option("--data", sel_args.data)->required();
    select_cmd->add_option("--allowlist", sel_args.allowlist, "Permitted entity names, one per line");
    select_cmd->add_option("--out", sel_args.out);
    select_cmd->add_option("--min-words", sel_args.min_words);
    select_cmd->add_option("--max-words", sel_args.max_words);
    select_cmd->add_flag("--keep-non-initial", sel_args.keep_non_initial);
    select_cmd->add_flag("--keep-first-paragraph", sel_args.keep_first_paragraph);
    select_cmd->add_flag("--allow-quotes", sel_args.allow_quotes);
    select_cmd->add_flag("--allow-entities", sel_args.allow_entities);

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (*train_cmd) return cmd_train(train_args, out);
        if (*predict_cmd) return cmd_predict(pred_model, pred_data, pred_out, out);
        if (*eval_cmd) return cmd_evaluate(ev_preds, ev_gold, ev_json, ev_name, out);
        if (*knn_cmd) return cmd_knn(knn_args, out);
        if (*bow_cmd) return cmd_bow(bow_args, out);
        if (*split_cmd) return cmd_split(split_data, split_test, split_valid, split_dir, out);
        if (*profile_cmd) return cmd_profile(prof_data, prof_wordlist, prof_out, out);
        if (*crosstab_cmd) return cmd_crosstab(ct_data, ct_external, ct_out, out);
        if (*init_cmd) return cmd_init(init_data, init_k, init_noise, init_seed, init_adapter, init_out, init_json, out);
        if (*agreement_cmd) return cmd_agreement(agr_pairs, agr_out, out);
        if (*select_cmd) return cmd_select(sel_args, out);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitData;
    }
    return kExitUsage;
}

}  // namespace cefr::cli
