#include "cefr/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

#include <boost/math/distributions/students_t.hpp>

namespace cefr {

Level resolve_gold(Level pred, const LevelSet& gold) {
    if (gold.empty()) throw std::invalid_argument("resolve_gold: empty gold set");
    if (gold.contains(pred)) return pred;
    Level best = gold.lowest();
    int best_gap = std::abs(best.index() - pred.index());
    for (Level g : gold.levels()) {
        const int gap = std::abs(g.index() - pred.index());
        if (gap < best_gap) {
            best = g;
            best_gap = gap;
        }
    }
    return best;
}

namespace {

void check_inputs(std::span<const Level> preds, std::span<const LevelSet> golds, int levels) {
    if (preds.size() != golds.size()) {
        throw std::invalid_argument("prediction/gold length mismatch: " + std::to_string(preds.size()) +
                                    " vs " + std::to_string(golds.size()));
    }
    if (preds.empty()) throw std::invalid_argument("no predictions to evaluate");
    for (Level p : preds) {
        if (p.index() < 0 || p.index() >= levels) throw std::invalid_argument("prediction outside level range");
    }
}

Eigen::MatrixXi build_confusion(std::span<const Level> preds, std::span<const LevelSet> golds, int levels) {
    Eigen::MatrixXi confusion = Eigen::MatrixXi::Zero(levels, levels);
    for (std::size_t i = 0; i < preds.size(); ++i) {
        const Level g = resolve_gold(preds[i], golds[i]);
        if (g.index() >= levels) throw std::invalid_argument("gold level outside level range");
        ++confusion(g.index(), preds[i].index());
    }
    return confusion;
}

double kappa_from_confusion(const Eigen::MatrixXi& confusion) {
    const int levels = static_cast<int>(confusion.rows());
    const double n = confusion.sum();
    const Eigen::MatrixXd observed = confusion.cast<double>() / n;
    const Eigen::VectorXd gold_marginal = observed.rowwise().sum();
    const Eigen::RowVectorXd pred_marginal = observed.colwise().sum();
    const Eigen::MatrixXd expected = gold_marginal * pred_marginal;
    const double denom_scale = levels > 1 ? static_cast<double>((levels - 1) * (levels - 1)) : 1.0;
    double num = 0.0;
    double den = 0.0;
    for (int i = 0; i < levels; ++i) {
        for (int j = 0; j < levels; ++j) {
            const double w = static_cast<double>((i - j) * (i - j)) / denom_scale;
            num += w * observed(i, j);
            den += w * expected(i, j);
        }
    }
    if (den == 0.0) {
        if ((observed - expected).cwiseAbs().maxCoeff() <= 1e-12) return 1.0;
        throw std::domain_error("quadratic weighted kappa undefined: zero expected disagreement");
    }
    return 1.0 - num / den;
}

}  // namespace

EvalReport confusion_and_f1(std::span<const Level> preds, std::span<const LevelSet> golds, int levels) {
    check_inputs(preds, golds, levels);
    EvalReport report;
    report.levels = levels;
    report.n = static_cast<long>(preds.size());
    report.confusion = build_confusion(preds, golds, levels);
    report.per_level_f1.assign(static_cast<std::size_t>(levels), 0.0);
    for (int j = 0; j < levels; ++j) {
        const double tp = report.confusion(j, j);
        const double predicted = report.confusion.col(j).sum();
        const double actual = report.confusion.row(j).sum();
        // 2PR/(P+R) == 2TP/(predicted+actual); zero denominator gives 0.
        const double denom = predicted + actual;
        report.per_level_f1[static_cast<std::size_t>(j)] = denom > 0.0 ? 2.0 * tp / denom : 0.0;
    }
    double sum = 0.0;
    for (double f : report.per_level_f1) sum += f;
    report.macro_f1 = sum / levels;
    return report;
}

double quadratic_weighted_kappa(std::span<const Level> preds, std::span<const LevelSet> golds, int levels) {
    check_inputs(preds, golds, levels);
    return kappa_from_confusion(build_confusion(preds, golds, levels));
}

EvalReport evaluate(std::span<const Level> preds, std::span<const LevelSet> golds, int levels) {
    EvalReport report = confusion_and_f1(preds, golds, levels);
    report.weighted_kappa = kappa_from_confusion(report.confusion);
    return report;
}

double macro_f1(std::span<const Level> preds, std::span<const LevelSet> golds, int levels) {
    return confusion_and_f1(preds, golds, levels).macro_f1;
}

MultiRunSummary multi_run_summary(std::span<const double> scores) {
    if (scores.size() < 3) {
        throw std::invalid_argument("multi_run_summary needs at least 3 scores, got " +
                                    std::to_string(scores.size()));
    }
    MultiRunSummary s;
    s.raw_scores.assign(scores.begin(), scores.end());
    const auto max_it = std::max_element(scores.begin(), scores.end());
    const auto min_it = std::min_element(scores.begin(), scores.end());
    auto max_idx = static_cast<std::size_t>(max_it - scores.begin());
    auto min_idx = static_cast<std::size_t>(min_it - scores.begin());
    if (max_idx == min_idx) min_idx = (max_idx + 1) % scores.size();  // all equal
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (i != max_idx && i != min_idx) s.retained.push_back(scores[i]);
    }
    const double m = static_cast<double>(s.retained.size());
    double sum = 0.0;
    for (double v : s.retained) sum += v;
    s.mean = sum / m;
    if (s.retained.size() >= 2) {
        double sq = 0.0;
        for (double v : s.retained) sq += (v - s.mean) * (v - s.mean);
        const double sd = std::sqrt(sq / (m - 1.0));
        const boost::math::students_t dist(m - 1.0);
        s.ci95 = boost::math::quantile(dist, 0.975) * sd / std::sqrt(m);
    }
    return s;
}

double pearson(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw std::invalid_argument("pearson: length mismatch");
    if (a.size() < 2) throw std::invalid_argument("pearson: need at least two observations");
    const double n = static_cast<double>(a.size());
    double ma = 0.0, mb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= n;
    mb /= n;
    double cov = 0.0, va = 0.0, vb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        cov += (a[i] - ma) * (b[i] - mb);
        va += (a[i] - ma) * (a[i] - ma);
        vb += (b[i] - mb) * (b[i] - mb);
    }
    if (va == 0.0 || vb == 0.0) throw std::invalid_argument("pearson: constant input");
    return std::clamp(cov / std::sqrt(va * vb), -1.0, 1.0);
}

nlohmann::json report_to_json(const EvalReport& report) {
    nlohmann::json j;
    j["n"] = report.n;
    j["levels"] = report.levels;
    std::vector<std::vector<int>> conf;
    for (Eigen::Index r = 0; r < report.confusion.rows(); ++r) {
        std::vector<int> row;
        for (Eigen::Index c = 0; c < report.confusion.cols(); ++c) row.push_back(report.confusion(r, c));
        conf.push_back(row);
    }
    j["confusion"] = conf;
    j["per_level_f1"] = report.per_level_f1;
    j["macro_f1"] = report.macro_f1;
    j["weighted_kappa"] = report.weighted_kappa;
    return j;
}

nlohmann::json summary_to_json(const MultiRunSummary& summary) {
    return {{"raw_scores", summary.raw_scores},
            {"retained", summary.retained},
            {"mean", summary.mean},
            {"ci95", summary.ci95}};
}

namespace {

std::string header_line(int levels) {
    std::ostringstream out;
    char buf[32];
    std::snprintf(buf, sizeof buf, "%-16s", "");
    out << buf;
    for (int j = 0; j < levels; ++j) {
        std::snprintf(buf, sizeof buf, "%14s", std::string(Level(j).label()).c_str());
        out << buf;
    }
    std::snprintf(buf, sizeof buf, "%14s%16s", "Avg", "kappa");
    out << buf << '\n';
    return out.str();
}

}  // namespace

std::string format_report_table(const std::string& row_name, const EvalReport& report) {
    std::ostringstream out;
    out << header_line(report.levels);
    char buf[64];
    std::snprintf(buf, sizeof buf, "%-16s", row_name.c_str());
    out << buf;
    for (double f : report.per_level_f1) {
        std::snprintf(buf, sizeof buf, "%14.1f", 100.0 * f);
        out << buf;
    }
    std::snprintf(buf, sizeof buf, "%14.1f%16.3f", 100.0 * report.macro_f1, report.weighted_kappa);
    out << buf << '\n';
    return out.str();
}

std::string format_multi_run_table(const std::string& row_name, std::span<const EvalReport> runs) {
    if (runs.empty()) throw std::invalid_argument("no runs to format");
    const int levels = runs.front().levels;
    auto cell = [&](auto&& extract, double scale, const char* fmt) {
        std::vector<double> values;
        for (const auto& r : runs) values.push_back(scale * extract(r));
        char buf[64];
        if (values.size() >= 3) {
            const auto s = multi_run_summary(values);
            std::snprintf(buf, sizeof buf, fmt, s.mean, s.ci95);
        } else {
            double mean = 0.0;
            for (double v : values) mean += v;
            std::snprintf(buf, sizeof buf, fmt, mean / static_cast<double>(values.size()), 0.0);
        }
        return std::string(buf);
    };
    std::ostringstream out;
    out << header_line(levels);
    char buf[64];
    std::snprintf(buf, sizeof buf, "%-16s", row_name.c_str());
    out << buf;
    for (int j = 0; j < levels; ++j) {
        out << cell([j](const EvalReport& r) { return r.per_level_f1[static_cast<std::size_t>(j)]; }, 100.0,
                    "%8.1f±%4.1f");
    }
    out << cell([](const EvalReport& r) { return r.macro_f1; }, 100.0, "%8.1f±%4.1f");
    out << cell([](const EvalReport& r) { return r.weighted_kappa; }, 1.0, "%9.3f±%5.3f");
    out << '\n';
    return out.str();
}

}  // namespace cefr
