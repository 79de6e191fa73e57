#pragma once

// Category bias: correlation direction, eligibility, bias and bias
// amplification for (attribute, identity category) pairs.

#include "prunebias/data_model.hpp"
#include "prunebias/metrics.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace prunebias {

/// Chi-square critical value for p < 0.05 at one degree of freedom.
inline constexpr double kChiSquareCritical = 3.841;

/// Minimum count for every (predicted attribute, identity) test cell.
inline constexpr std::int64_t kMinCellCount = 10;

enum class Sign { positive, negative, none };

std::string_view to_string(Sign sign);

struct CorrelationSign {
    Sign sign = Sign::none;
    double phi = 0.0;
    double chi_square = 0.0;
    bool significant = false;
};

/// Phi coefficient of the 2x2 table and a chi-square independence test
/// (statistic n * phi^2). A zero marginal yields sign none.
CorrelationSign correlation_sign(const ContingencyCounts& train_counts,
                                 double critical_value = kChiSquareCritical);

/// Share of attribute-positive samples that sit on the correlated side of
/// the identity category.
double bias(const ContingencyCounts& counts, const CorrelationSign& direction);

enum class Eligibility { ok, no_significant_correlation, sparse_cell, no_true_positives };

std::string_view to_string(Eligibility reason);

struct BAResult {
    std::string attribute;
    std::string category;
    bool eligible = false;
    Eligibility reason = Eligibility::ok;
    CorrelationSign direction;
    ContingencyCounts predicted_counts;
    ContingencyCounts true_counts;
    std::optional<double> b_pred;
    std::optional<double> b_true;
    std::optional<double> ba;
};

struct BAOptions {
    double critical_value = kChiSquareCritical;
    std::int64_t min_cell_count = kMinCellCount;
};

/// Column-level entry point shared by every BA computation. `predicted` holds
/// hard labels for the test split.
BAResult bias_amplification(std::span<const std::uint8_t> train_attribute,
                            std::span<const std::uint8_t> train_identity,
                            std::span<const std::uint8_t> test_attribute,
                            std::span<const std::uint8_t> test_identity,
                            std::span<const std::uint8_t> predicted, std::string attribute,
                            std::string category, const BAOptions& options = {});

/// BA of a scored run, thresholding scores at `threshold`.
BAResult bias_amplification(const AttributeTable& train, const AttributeTable& test, const PredictionRun& run,
                            std::string_view attribute, std::string_view category,
                            double threshold = kDefaultThreshold, const BAOptions& options = {});

/// BA of hard labels (for example after calibration or overrides).
BAResult bias_amplification(const AttributeTable& train, const AttributeTable& test,
                            const AttributeTable& predicted, std::string_view attribute,
                            std::string_view category, const BAOptions& options = {});

/// Largest BA among eligible results; absent when none are eligible.
std::optional<double> worst_case_ba(std::span<const BAResult> results);

/// BA where the identity category is a backdoor flag column. Direction comes
/// from the backdoored training assignment.
BAResult ba_with_backdoor_identity(const AttributeTable& train, std::span<const std::uint8_t> train_flags,
                                   const AttributeTable& test, std::span<const std::uint8_t> test_flags,
                                   const PredictionRun& run, std::string_view attribute,
                                   double threshold = kDefaultThreshold, const BAOptions& options = {});

/// Hard labels (score >= threshold) for one scored column.
std::vector<std::uint8_t> threshold_column(std::span<const double> scores, double threshold);

} // namespace prunebias
