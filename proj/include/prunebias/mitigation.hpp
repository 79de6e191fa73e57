#pragma once

// Bias mitigation: per-attribute threshold calibration on a validation split
// and uncertainty-prioritised label overrides.

#include "prunebias/bias_amplification.hpp"
#include "prunebias/data_model.hpp"

#include <json.hpp>

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace prunebias {

struct Threshold {
    std::size_t k = 0;  // predicted positives on the calibration split
    double cut = 0.0;   // classify positive when score >= cut
};

/// Cut used when no sample may be positive; above every valid score.
double no_positive_cut();

using ThresholdMap = std::map<std::string, Threshold, std::less<>>;

/// Picks the cut so the top-k scores are positive, with k the number of
/// positive validation labels. Scores tied with the cut are all included.
Threshold calibrate_threshold(std::span<const double> val_scores, std::span<const std::uint8_t> val_labels);

/// Calibrates every attribute of `val_run` against its own label column only.
ThresholdMap calibrate_thresholds(const PredictionRun& val_run, const AttributeTable& val_labels);

AttributeTable apply_thresholds(const PredictionRun& run, const ThresholdMap& map);

/// Hard labels for every attribute at a single threshold.
AttributeTable threshold_labels(const PredictionRun& run, double threshold = kDefaultThreshold);

/// Sample indices ordered most-uncertain first (ascending |score - 0.5|,
/// ties by index).
std::vector<std::size_t> rank_by_uncertainty(std::span<const double> dense_scores);

enum class OverrideSource { truth, dense };

std::string_view to_string(OverrideSource source);
OverrideSource parse_override_source(std::string_view text);

struct AttributeOverride {
    std::string attribute;
    bool eligible = false;
    std::optional<double> dense_ba;
    std::vector<std::size_t> order;
};

struct OverridePlan {
    OverrideSource source = OverrideSource::truth;
    double fraction = 0.0;
    std::string category;
    std::vector<AttributeOverride> attributes;
};

/// An attribute is eligible when the dense model's BA for `category` is
/// positive. The uncertainty order comes from the dense scores.
OverridePlan make_override_plan(const PredictionRun& dense_run, const AttributeTable& train,
                                const AttributeTable& test, std::string_view category, OverrideSource source,
                                double fraction, double threshold = kDefaultThreshold);

/// Replaces the first floor(fraction * n) samples of each eligible attribute's
/// order with the source label. Inputs are not modified.
AttributeTable apply_overrides(const AttributeTable& sparse_labels, const OverridePlan& plan,
                               const AttributeTable& truth, const AttributeTable& dense_labels);

struct MitigationComparison {
    BAResult before;
    BAResult after;
};

/// BA for every (attribute, category) pair before and after mitigation.
std::vector<MitigationComparison> evaluate_mitigation(const AttributeTable& before, const AttributeTable& after,
                                                      const AttributeTable& test,
                                                      std::span<const std::string> categories,
                                                      const AttributeTable& train);

/// Element-wise mean of several runs over the same split and layout.
PredictionRun mean_run(std::span<const PredictionRun> runs, std::string run_id);

nlohmann::json to_json(const ThresholdMap& map);
ThresholdMap threshold_map_from_json(const nlohmann::json& doc);
nlohmann::json to_json(const OverridePlan& plan);
OverridePlan override_plan_from_json(const nlohmann::json& doc);

} // namespace prunebias
