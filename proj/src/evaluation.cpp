#include "tweetrec/evaluation.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <stdexcept>
#include <unordered_set>

#include <json.hpp>

namespace tweetrec {

namespace {

constexpr std::array<std::string_view, 5> kMetricNames = {"P@1", "P@5", "R@100", "R@1000", "MRR"};

double precision_at(const std::vector<std::size_t>& relevant_ranks, std::size_t k) {
    std::size_t hits = 0;
    for (std::size_t r : relevant_ranks)
        if (r <= k) ++hits;
    return static_cast<double>(hits) / static_cast<double>(k);
}

double recall_at(const std::vector<std::size_t>& relevant_ranks, std::size_t k, std::size_t num_relevant) {
    std::size_t hits = 0;
    for (std::size_t r : relevant_ranks)
        if (r <= k) ++hits;
    return static_cast<double>(hits) / static_cast<double>(num_relevant);
}

// Continued fraction for the incomplete beta function (modified Lentz).
double beta_continued_fraction(double a, double b, double x) {
    constexpr int kMaxIterations = 1000;
    constexpr double kEps = 1e-16;
    constexpr double kTiny = 1e-300;
    const double qab = a + b;
    const double qap = a + 1.0;
    const double qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::fabs(d) < kTiny) d = kTiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIterations; ++m) {
        const double m2 = 2.0 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < kEps) return h;
    }
    return h;
}

} // namespace

std::string_view metric_name(Metric m) { return kMetricNames[static_cast<std::size_t>(m)]; }

Metric parse_metric(std::string_view name) {
    for (Metric m : kAllMetrics)
        if (metric_name(m) == name) return m;
    std::string lowered(name);
    for (char& c : lowered) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    for (Metric m : kAllMetrics) {
        std::string candidate(metric_name(m));
        for (char& c : candidate) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        if (candidate == lowered) return m;
    }
    throw InvalidInput("unknown metric: " + std::string(name));
}

std::vector<double> MetricReport::values(Metric m) const {
    std::vector<double> out;
    out.reserve(per_query.size());
    for (const auto& q : per_query) out.push_back(q.get(m));
    return out;
}

MetricReport compute_metrics(std::span<const RankedList> runs, const Qrels& qrels) {
    MetricReport report;
    std::unordered_set<std::string> seen;
    for (const auto& run : runs) {
        if (!seen.insert(run.query_id).second) throw InvalidInput("duplicate query in run: " + run.query_id);
        auto it = qrels.find(run.query_id);
        if (it == qrels.end()) throw InvalidInput("query missing from qrels: " + run.query_id);
        const auto& relevant = it->second;
        if (relevant.empty()) throw InvalidInput("query has no relevant items: " + run.query_id);

        std::vector<std::size_t> ranks;
        std::unordered_set<std::string> counted;
        for (std::size_t i = 0; i < run.items.size(); ++i) {
            const auto& id = run.items[i].id;
            if (relevant.contains(id) && counted.insert(id).second) ranks.push_back(i + 1);
        }
        QueryMetrics q;
        q.query_id = run.query_id;
        q.values[static_cast<std::size_t>(Metric::P1)] = precision_at(ranks, 1);
        q.values[static_cast<std::size_t>(Metric::P5)] = precision_at(ranks, 5);
        q.values[static_cast<std::size_t>(Metric::R100)] = recall_at(ranks, 100, relevant.size());
        q.values[static_cast<std::size_t>(Metric::R1000)] = recall_at(ranks, 1000, relevant.size());
        q.values[static_cast<std::size_t>(Metric::MRR)] =
            ranks.empty() ? 0.0 : 1.0 / static_cast<double>(ranks.front());
        report.per_query.push_back(std::move(q));
    }
    if (!report.per_query.empty()) {
        for (std::size_t m = 0; m < report.means.size(); ++m) {
            double sum = 0.0;
            for (const auto& q : report.per_query) sum += q.values[m];
            report.means[m] = sum / static_cast<double>(report.per_query.size());
        }
    }
    return report;
}

double regularized_incomplete_beta(double a, double b, double x) {
    if (!(a > 0.0) || !(b > 0.0)) throw InvalidInput("incomplete beta: a and b must be positive");
    if (!(x >= 0.0 && x <= 1.0)) throw InvalidInput("incomplete beta: x outside [0, 1]");
    if (x == 0.0) return 0.0;
    if (x == 1.0) return 1.0;
    const double log_front =
        std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
    const double front = std::exp(log_front);
    if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_continued_fraction(a, b, x) / a;
    return 1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b;
}

double student_t_two_tailed_p(double t, double df) {
    if (!(df > 0.0)) throw InvalidInput("student t: df must be positive");
    if (std::isnan(t)) throw InvalidInput("student t: t is NaN");
    if (std::isinf(t)) return 0.0;
    const double x = df / (df + t * t);
    return std::clamp(regularized_incomplete_beta(0.5 * df, 0.5, x), 0.0, 1.0);
}

TTestResult paired_t_test(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw InvalidInput("paired_t_test: samples differ in length");
    const std::size_t n = a.size();
    if (n < 2) throw InvalidInput("paired_t_test: need at least two pairs");
    std::vector<double> d(n);
    for (std::size_t i = 0; i < n; ++i) {
        d[i] = a[i] - b[i];
        if (!std::isfinite(d[i])) throw InvalidInput("paired_t_test: non-finite sample");
    }
    double mean = 0.0;
    for (double v : d) mean += v;
    mean /= static_cast<double>(n);
    double ss = 0.0;
    for (double v : d) ss += (v - mean) * (v - mean);
    const double sd = std::sqrt(ss / static_cast<double>(n - 1));

    TTestResult r;
    r.degrees_of_freedom = n - 1;
    const bool all_zero = std::all_of(d.begin(), d.end(), [](double v) { return v == 0.0; });
    if (all_zero) {
        r.t_statistic = 0.0;
        r.p_value = 1.0;
    } else if (sd == 0.0) {
        r.t_statistic = mean > 0.0 ? std::numeric_limits<double>::infinity()
                                   : -std::numeric_limits<double>::infinity();
        r.p_value = 0.0;
    } else {
        r.t_statistic = mean / (sd / std::sqrt(static_cast<double>(n)));
        r.p_value = student_t_two_tailed_p(r.t_statistic, static_cast<double>(r.degrees_of_freedom));
    }
    r.significant = r.p_value < kSignificanceLevel;
    return r;
}

std::vector<double> default_alpha_grid() {
    std::vector<double> grid;
    for (int i = 0; i <= 20; ++i) grid.push_back(i / 20.0);
    return grid;
}

GridSearchResult grid_search_late_weight(const std::function<MetricReport(double)>& dev_eval,
                                         std::span<const double> grid) {
    if (grid.empty()) throw InvalidInput("grid_search_late_weight: empty grid");
    for (double alpha : grid)
        if (!(alpha >= 0.0 && alpha <= 1.0)) throw InvalidInput("grid_search_late_weight: alpha outside [0, 1]");
    GridSearchResult result;
    bool first = true;
    for (double alpha : grid) {
        const double mrr = dev_eval(alpha).mean(Metric::MRR);
        result.curve.emplace_back(alpha, mrr);
        if (first || mrr > result.best_mrr || (mrr == result.best_mrr && alpha < result.best_alpha)) {
            result.best_alpha = alpha;
            result.best_mrr = mrr;
            first = false;
        }
    }
    return result;
}

const AblationRow& AblationReport::row(std::string_view label) const {
    for (const auto& r : rows)
        if (r.label == label) return r;
    throw std::out_of_range("no ablation row " + std::string(label));
}

AblationReport run_ablation(std::span<const Attribute> attributes, const AblationTrainFn& train_fn,
                            const AblationLossFn& eval_loss_fn) {
    const AttributeSet all(attributes.begin(), attributes.end());
    if (all.size() != attributes.size()) throw InvalidInput("run_ablation: repeated attribute");

    std::vector<std::pair<std::string, AttributeSet>> configs;
    configs.emplace_back("none", all);
    for (Attribute a : attributes) {
        AttributeSet without = all;
        without.erase(a);
        configs.emplace_back(std::string(attribute_name(a)), std::move(without));
    }
    configs.emplace_back("all-excluded", AttributeSet{});

    AblationReport report;
    for (auto& [label, included] : configs) {
        AblationRow row{label, included, 0.0, false, {}};
        try {
            const RetrievalModel model = train_fn(included);
            row.loss = eval_loss_fn(model, included);
            if (!std::isfinite(row.loss)) {
                row.diverged = true;
                row.error = "non-finite evaluation loss";
            }
        } catch (const TrainingError& e) {
            row.diverged = true;
            row.error = e.what();
        }
        if (row.diverged) row.loss = std::numeric_limits<double>::infinity();
        report.rows.push_back(std::move(row));
    }
    return report;
}

std::string emit_run_file(std::span<const RankedList> runs, std::string_view tag) {
    std::string out;
    char score[64];
    for (const auto& run : runs) {
        for (std::size_t i = 0; i < run.items.size(); ++i) {
            std::snprintf(score, sizeof score, "%.6f", run.items[i].score);
            out += run.query_id;
            out += " Q0 ";
            out += run.items[i].id;
            out += ' ';
            out += std::to_string(i + 1);
            out += ' ';
            out += score;
            out += ' ';
            out += tag;
            out += '\n';
        }
    }
    return out;
}

std::vector<RankedList> parse_run_file(std::string_view text) {
    std::vector<RankedList> runs;
    std::map<std::string, std::size_t> position;
    std::vector<std::vector<std::pair<std::size_t, ScoredItem>>> ranked;
    for_each_line(text, [&](std::string_view line, std::size_t line_no) {
        std::vector<std::string> fields;
        std::size_t i = 0;
        while (i < line.size()) {
            while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
            std::size_t j = i;
            while (j < line.size() && line[j] != ' ' && line[j] != '\t') ++j;
            if (j > i) fields.emplace_back(line.substr(i, j - i));
            i = j;
        }
        if (fields.size() != 6)
            throw InvalidInput("run file line " + std::to_string(line_no) + ": expected 6 columns");
        std::size_t rank = 0;
        double score = 0.0;
        try {
            std::size_t used = 0;
            rank = std::stoul(fields[3], &used);
            if (used != fields[3].size() || rank == 0) throw std::invalid_argument("rank");
            score = std::stod(fields[4], &used);
            if (used != fields[4].size()) throw std::invalid_argument("score");
        } catch (const std::exception&) {
            throw InvalidInput("run file line " + std::to_string(line_no) + ": bad rank or score");
        }
        auto [it, inserted] = position.emplace(fields[0], runs.size());
        if (inserted) {
            runs.push_back(RankedList{fields[0], {}, 0});
            ranked.emplace_back();
        }
        ranked[it->second].emplace_back(rank, ScoredItem{fields[2], score});
    });
    for (std::size_t q = 0; q < runs.size(); ++q) {
        auto& items = ranked[q];
        std::sort(items.begin(), items.end(),
                  [](const auto& a, const auto& b) { return a.first < b.first; });
        for (std::size_t i = 1; i < items.size(); ++i)
            if (items[i].first == items[i - 1].first)
                throw InvalidInput("run file: duplicate rank for query " + runs[q].query_id);
        for (auto& [_, item] : items) runs[q].items.push_back(std::move(item));
        runs[q].k = runs[q].items.size();
    }
    return runs;
}

RunComparison compare_runs(std::span<const RankedList> run_a, std::span<const RankedList> run_b,
                           const Qrels& qrels, Metric metric) {
    std::map<std::string, const RankedList*> b_by_query;
    for (const auto& r : run_b)
        if (!b_by_query.emplace(r.query_id, &r).second)
            throw InvalidInput("compare_runs: duplicate query " + r.query_id);
    if (b_by_query.size() != run_a.size()) throw InvalidInput("compare_runs: query sets differ");
    std::vector<RankedList> aligned_b;
    aligned_b.reserve(run_a.size());
    for (const auto& r : run_a) {
        auto it = b_by_query.find(r.query_id);
        if (it == b_by_query.end()) throw InvalidInput("compare_runs: query sets differ");
        aligned_b.push_back(*it->second);
    }
    RunComparison cmp;
    cmp.metric = metric;
    cmp.a = compute_metrics(run_a, qrels);
    cmp.b = compute_metrics(aligned_b, qrels);
    for (std::size_t m = 0; m < cmp.deltas.size(); ++m) cmp.deltas[m] = cmp.a.means[m] - cmp.b.means[m];
    const auto va = cmp.a.values(metric);
    const auto vb = cmp.b.values(metric);
    cmp.test = paired_t_test(va, vb);
    return cmp;
}

std::string metric_report_to_json(const MetricReport& report) {
    nlohmann::ordered_json j;
    nlohmann::ordered_json means;
    for (Metric m : kAllMetrics) means[std::string(metric_name(m))] = report.mean(m);
    j["num_queries"] = report.per_query.size();
    j["means"] = means;
    nlohmann::ordered_json per_query;
    std::vector<std::string> ids;
    for (const auto& q : report.per_query) ids.push_back(q.query_id);
    per_query["query_id"] = ids;
    for (Metric m : kAllMetrics) per_query[std::string(metric_name(m))] = report.values(m);
    j["per_query"] = per_query;
    return j.dump(2) + "\n";
}

std::string ablation_report_to_json(const AblationReport& report) {
    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    for (const auto& r : report.rows) {
        nlohmann::ordered_json row;
        row["label"] = r.label;
        std::vector<std::string> included;
        for (Attribute a : r.included) included.emplace_back(attribute_name(a));
        row["included"] = included;
        if (r.diverged)
            row["loss"] = nullptr;
        else
            row["loss"] = r.loss;
        row["diverged"] = r.diverged;
        if (!r.error.empty()) row["error"] = r.error;
        rows.push_back(row);
    }
    nlohmann::ordered_json j;
    j["rows"] = rows;
    return j.dump(2) + "\n";
}

} // namespace tweetrec
