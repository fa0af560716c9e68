#pragma once

#include <array>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tweetrec/io.hpp"
#include "tweetrec/model.hpp"
#include "tweetrec/retrieval.hpp"
#include "tweetrec/training.hpp"

namespace tweetrec {

enum class Metric : std::uint8_t { P1, P5, R100, R1000, MRR };

inline constexpr std::array<Metric, 5> kAllMetrics = {Metric::P1, Metric::P5, Metric::R100,
                                                      Metric::R1000, Metric::MRR};

/// "P@1", "P@5", "R@100", "R@1000", "MRR".
std::string_view metric_name(Metric m);
Metric parse_metric(std::string_view name);

struct QueryMetrics {
    std::string query_id;
    std::array<double, 5> values{};

    double get(Metric m) const { return values[static_cast<std::size_t>(m)]; }
};

struct MetricReport {
    std::vector<QueryMetrics> per_query;
    std::array<double, 5> means{};

    double mean(Metric m) const { return means[static_cast<std::size_t>(m)]; }
    /// Per-query values of m in per_query order.
    std::vector<double> values(Metric m) const;
};

/// Binary relevance from qrels. Queries are taken in run order; each must be
/// present in qrels with at least one relevant id.
MetricReport compute_metrics(std::span<const RankedList> runs, const Qrels& qrels);

struct TTestResult {
    double t_statistic = 0.0;
    std::size_t degrees_of_freedom = 0;
    double p_value = 1.0;
    bool significant = false;
};

inline constexpr double kSignificanceLevel = 0.05;

/// Regularized incomplete beta function I_x(a, b).
double regularized_incomplete_beta(double a, double b, double x);

/// Two-tailed P(|T| >= |t|) for Student's t with df degrees of freedom.
double student_t_two_tailed_p(double t, double df);

/// Paired two-tailed t-test on d = a - b.
TTestResult paired_t_test(std::span<const double> a, std::span<const double> b);

/// {0.00, 0.05, ..., 1.00}.
std::vector<double> default_alpha_grid();

struct GridSearchResult {
    double best_alpha = 0.0;
    double best_mrr = 0.0;
    std::vector<std::pair<double, double>> curve;  // (alpha, mean dev MRR) in grid order
};

/// Argmax of mean dev MRR over grid; ties go to the smaller alpha.
GridSearchResult grid_search_late_weight(const std::function<MetricReport(double)>& dev_eval,
                                         std::span<const double> grid);

struct AblationRow {
    std::string label;  // "none", an attribute name, or "all-excluded"
    AttributeSet included;
    double loss = 0.0;
    bool diverged = false;
    std::string error;
};

struct AblationReport {
    std::vector<AblationRow> rows;

    /// Throws std::out_of_range for an unknown label.
    const AblationRow& row(std::string_view label) const;
};

using AblationTrainFn = std::function<RetrievalModel(const AttributeSet& included)>;
using AblationLossFn = std::function<double(const RetrievalModel& model, const AttributeSet& included)>;

/// Trains and evaluates with all attributes, with each one left out in
/// turn, and with none. Training failures become diverged rows with an
/// infinite loss.
AblationReport run_ablation(std::span<const Attribute> attributes, const AblationTrainFn& train_fn,
                            const AblationLossFn& eval_loss_fn);

/// "query Q0 item rank score tag" lines, score with six decimals.
std::string emit_run_file(std::span<const RankedList> runs, std::string_view tag);

/// Inverse of emit_run_file; queries in first-appearance order, items by rank.
std::vector<RankedList> parse_run_file(std::string_view text);

struct RunComparison {
    MetricReport a;
    MetricReport b;
    std::array<double, 5> deltas{};  // mean(a) - mean(b)
    Metric metric = Metric::MRR;
    TTestResult test;
};

/// Paired comparison of two runs over the same query set.
RunComparison compare_runs(std::span<const RankedList> run_a, std::span<const RankedList> run_b,
                           const Qrels& qrels, Metric metric);

std::string metric_report_to_json(const MetricReport& report);
std::string ablation_report_to_json(const AblationReport& report);

} // namespace tweetrec
