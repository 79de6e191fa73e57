#pragma once

// Audit orchestration and report generation: per-run metrics, seed
// aggregates, boxplot summaries and their JSON/CSV forms.

#include "prunebias/data_model.hpp"
#include "prunebias/metrics.hpp"

#include <json.hpp>

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace prunebias {

struct BoxplotSummary {
    double median = 0.0;
    double q25 = 0.0;
    double q75 = 0.0;
    double mean = 0.0;
    std::vector<double> outliers;
};

/// Linear-interpolated quartile (numpy's default) of sorted values.
double quantile_sorted(std::span<const double> sorted, double q);

/// Quartiles by linear interpolation; a point is an outlier when it lies more
/// than 2.5 times the mean-to-quartile distance beyond the mean.
BoxplotSummary boxplot_stats(std::span<const double> values);

struct Aggregate {
    double mean = 0.0;
    std::optional<double> std;  // sample std, present for two or more values
};

Aggregate aggregate(std::span<const double> values);

/// Rounds to 10 significant digits; every number in a report passes through this.
double report_round(double value);

inline const std::vector<std::string>& audit_metrics() {
    static const std::vector<std::string> names{"accuracy", "auc", "ece", "uncertainty", "tcb", "interdependence"};
    return names;
}

/// One metric value or a reasoned skip.
struct MetricCell {
    std::string metric;
    std::string attribute;
    std::string category;  // empty unless the metric is per category
    std::optional<double> value;
    std::string status = "ok";
};

struct RunReport {
    RunDescriptor run;
    std::vector<MetricCell> cells;
};

struct GroupKey {
    Method method = Method::dense;
    double sparsity = 0.0;
    std::optional<NMPattern> nm;
    Split split = Split::test;

    friend bool operator==(const GroupKey&, const GroupKey&) = default;
};

struct AggregateCell {
    GroupKey group;
    std::string metric;
    std::string attribute;
    std::string category;
    std::vector<std::int64_t> seeds;
    std::vector<double> values;  // per seed, aligned with `seeds`
    double mean = 0.0;
    std::optional<double> std;
    std::size_t skipped = 0;
    std::string status = "ok";
};

struct BoxplotGroup {
    GroupKey group;
    std::string metric;
    std::string category;
    std::size_t count = 0;
    BoxplotSummary summary;
};

struct MetricReport {
    double threshold = kDefaultThreshold;
    std::vector<std::string> categories;
    std::vector<RunReport> runs;
    std::vector<AggregateCell> aggregates;
    std::vector<BoxplotGroup> boxplots;
};

struct AuditOptions {
    double threshold = kDefaultThreshold;
    std::vector<std::string> categories;  // overrides the manifest when nonempty
    unsigned jobs = 0;                    // 0 = hardware concurrency
};

/// Seed aggregates per (group, metric, attribute, category) over runs.
std::vector<AggregateCell> aggregate_runs(std::span<const RunReport> runs);

/// Boxplots across attributes of the per-attribute seed means.
std::vector<BoxplotGroup> compute_boxplots(std::span<const AggregateCell> aggregates);

MetricReport run_audit(const std::filesystem::path& manifest_path, const AuditOptions& options = {});

nlohmann::json report_to_json(const MetricReport& report);
std::string report_json_text(const MetricReport& report);
std::string report_csv_text(const MetricReport& report);

/// Writes report.json and report.csv into `out_dir`.
void write_report(const MetricReport& report, const std::filesystem::path& out_dir);

std::vector<AggregateCell> aggregates_from_json(const nlohmann::json& doc);
std::string boxplots_csv_text(std::span<const BoxplotGroup> boxplots);

} // namespace prunebias
