#pragma once

// Per-attribute scalar metrics over one prediction run.

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace prunebias {

inline constexpr double kDefaultThreshold = 0.5;
inline constexpr double kUncertainLow = 0.1;
inline constexpr double kUncertainHigh = 0.9;
inline constexpr int kCalibrationBuckets = 10;

/// Fraction of samples where (score >= threshold) equals the label.
double accuracy(std::span<const double> scores, std::span<const std::uint8_t> labels,
                double threshold = kDefaultThreshold);

/// Rank-based ROC AUC; tied scores get their average rank so each
/// positive/negative tie contributes one half.
double auc(std::span<const double> scores, std::span<const std::uint8_t> labels);

struct CalibrationBucket {
    double lower = 0.0;
    double upper = 0.0;
    std::size_t count = 0;
    double mean_score = 0.0;
    double positive_rate = 0.0;
};

struct CalibrationBuckets {
    std::array<double, kCalibrationBuckets + 1> edges{};
    std::array<CalibrationBucket, kCalibrationBuckets> buckets{};
    std::size_t total = 0;
};

/// Bucket index for a score: an interior edge value belongs to the higher
/// bucket and 1.0 belongs to the top bucket.
int calibration_bucket(double score);

CalibrationBuckets calibration_buckets(std::span<const double> scores, std::span<const std::uint8_t> labels);

/// Expected calibration error over ten equal-width buckets, comparing mean
/// score against the empirical positive rate in each bucket.
double ece(std::span<const double> scores, std::span<const std::uint8_t> labels);

/// Fraction of scores strictly inside (low, high).
double uncertainty_fraction(std::span<const double> scores, double low = kUncertainLow,
                            double high = kUncertainHigh);

/// Threshold calibration bias: predicted over true count of the attribute's
/// rarer value, where rarity is decided by the training mean.
double tcb(std::span<const double> scores, std::span<const std::uint8_t> test_labels, double train_mean,
           double threshold = kDefaultThreshold);

// --- multiclass -------------------------------------------------------------

struct MulticlassRun {
    std::vector<std::string> sample_ids;
    std::size_t classes = 0;
    std::vector<double> logits;  // rows = samples, cols = classes
    std::vector<int> labels;

    MulticlassRun() = default;
    MulticlassRun(std::vector<std::string> sample_ids, std::size_t classes, std::vector<double> logits,
                  std::vector<int> labels);

    std::size_t rows() const { return labels.size(); }
    std::span<const double> row(std::size_t i) const { return {logits.data() + i * classes, classes}; }
};

struct MacroScores {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

/// Class-balanced precision/recall/F1 of argmax predictions, averaged over
/// classes present in the ground truth.
MacroScores macro_prf(const MulticlassRun& run);

/// Softmax entropy (natural log) of one logit row.
double softmax_entropy(std::span<const double> logits);

/// Mean over true classes of the per-class mean softmax entropy.
double macro_entropy(const MulticlassRun& run);

} // namespace prunebias
