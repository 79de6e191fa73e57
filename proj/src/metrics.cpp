#include "prunebias/metrics.hpp"

#include "prunebias/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace prunebias {

namespace {

void check_aligned(std::size_t a, std::size_t b, const char* op) {
    if (a != b) throw AlignmentError(std::string(op) + ": score and label columns differ in length");
    if (a == 0) throw EmptyInputError(std::string(op) + ": empty input");
}

constexpr std::array<double, kCalibrationBuckets + 1> make_edges() {
    std::array<double, kCalibrationBuckets + 1> e{};
    for (int i = 0; i <= kCalibrationBuckets; ++i) e[i] = static_cast<double>(i) / kCalibrationBuckets;
    return e;
}

constexpr auto kEdges = make_edges();

} // namespace

double accuracy(std::span<const double> scores, std::span<const std::uint8_t> labels, double threshold) {
    check_aligned(scores.size(), labels.size(), "accuracy");
    std::size_t correct = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        correct += static_cast<std::uint8_t>(scores[i] >= threshold) == (labels[i] != 0);
    }
    return static_cast<double>(correct) / static_cast<double>(scores.size());
}

double auc(std::span<const double> scores, std::span<const std::uint8_t> labels) {
    check_aligned(scores.size(), labels.size(), "auc");
    const std::size_t n = scores.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    // Twice the average rank keeps the sum integral.
    double rank_sum_x2 = 0.0;
    std::size_t positives = 0;
    for (std::size_t start = 0; start < n;) {
        std::size_t end = start + 1;
        while (end < n && scores[order[end]] == scores[order[start]]) ++end;
        const double rank_x2 = static_cast<double>(start + 1 + end);
        for (std::size_t k = start; k < end; ++k) {
            if (labels[order[k]]) {
                rank_sum_x2 += rank_x2;
                ++positives;
            }
        }
        start = end;
    }
    const std::size_t negatives = n - positives;
    if (positives == 0 || negatives == 0) {
        throw DegenerateInputError("auc: labels contain a single class");
    }
    const double p = static_cast<double>(positives);
    const double u = rank_sum_x2 / 2.0 - p * (p + 1.0) / 2.0;
    return u / (p * static_cast<double>(negatives));
}

int calibration_bucket(double score) {
    int b = std::clamp(static_cast<int>(score * kCalibrationBuckets), 0, kCalibrationBuckets - 1);
    while (b < kCalibrationBuckets - 1 && score >= kEdges[b + 1]) ++b;
    while (b > 0 && score < kEdges[b]) --b;
    return b;
}

CalibrationBuckets calibration_buckets(std::span<const double> scores, std::span<const std::uint8_t> labels) {
    check_aligned(scores.size(), labels.size(), "calibration");
    CalibrationBuckets out;
    out.edges = kEdges;
    out.total = scores.size();
    std::array<double, kCalibrationBuckets> score_sum{};
    std::array<std::size_t, kCalibrationBuckets> positive{};
    for (std::size_t i = 0; i < scores.size(); ++i) {
        const int b = calibration_bucket(scores[i]);
        ++out.buckets[b].count;
        score_sum[b] += scores[i];
        positive[b] += labels[i] ? 1 : 0;
    }
    for (int b = 0; b < kCalibrationBuckets; ++b) {
        auto& bucket = out.buckets[b];
        bucket.lower = kEdges[b];
        bucket.upper = kEdges[b + 1];
        if (bucket.count > 0) {
            bucket.mean_score = score_sum[b] / static_cast<double>(bucket.count);
            bucket.positive_rate = static_cast<double>(positive[b]) / static_cast<double>(bucket.count);
        }
    }
    return out;
}

double ece(std::span<const double> scores, std::span<const std::uint8_t> labels) {
    const auto buckets = calibration_buckets(scores, labels);
    double total = 0.0;
    for (const auto& b : buckets.buckets) {
        if (b.count == 0) continue;
        total += static_cast<double>(b.count) / static_cast<double>(buckets.total) *
                 std::abs(b.positive_rate - b.mean_score);
    }
    return total;
}

double uncertainty_fraction(std::span<const double> scores, double low, double high) {
    if (!(low < high)) throw ArgumentError("uncertainty_fraction: low must be below high");
    if (scores.empty()) throw EmptyInputError("uncertainty_fraction: empty input");
    const auto uncertain = std::count_if(scores.begin(), scores.end(), [&](double s) { return s > low && s < high; });
    return static_cast<double>(uncertain) / static_cast<double>(scores.size());
}

double tcb(std::span<const double> scores, std::span<const std::uint8_t> test_labels, double train_mean,
           double threshold) {
    check_aligned(scores.size(), test_labels.size(), "tcb");
    if (!(train_mean >= 0.0 && train_mean <= 1.0)) throw ArgumentError("tcb: train mean must lie in [0,1]");
    const bool rare_is_one = train_mean < 0.5;
    std::size_t predicted = 0;
    std::size_t actual = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        const bool pred = scores[i] >= threshold;
        const bool truth = test_labels[i] != 0;
        predicted += pred == rare_is_one;
        actual += truth == rare_is_one;
    }
    if (actual == 0) {
        throw DegenerateInputError(std::string("tcb: test split has no samples with value ") +
                                   (rare_is_one ? "1" : "0"));
    }
    return static_cast<double>(predicted) / static_cast<double>(actual);
}

// --- multiclass ---------------------------------------------------------------

MulticlassRun::MulticlassRun(std::vector<std::string> ids, std::size_t k, std::vector<double> z,
                             std::vector<int> y)
    : sample_ids(std::move(ids)), classes(k), logits(std::move(z)), labels(std::move(y)) {
    if (classes < 2) throw ArgumentError("multiclass run needs at least two classes");
    if (logits.size() != labels.size() * classes) throw ArgumentError("logit matrix dimensions are inconsistent");
    if (!sample_ids.empty() && sample_ids.size() != labels.size()) {
        throw ArgumentError("sample id count does not match label count");
    }
    for (int label : labels) {
        if (label < 0 || static_cast<std::size_t>(label) >= classes) {
            throw ValueError("class label " + std::to_string(label) + " out of range");
        }
    }
}

MacroScores macro_prf(const MulticlassRun& run) {
    if (run.classes < 2) throw ArgumentError("macro_prf: needs at least two classes");
    const std::size_t k = run.classes;
    std::vector<std::size_t> tp(k, 0), predicted(k, 0), actual(k, 0);
    for (std::size_t i = 0; i < run.rows(); ++i) {
        auto row = run.row(i);
        const auto pred = static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
        const auto truth = static_cast<std::size_t>(run.labels[i]);
        ++predicted[pred];
        ++actual[truth];
        tp[pred] += pred == truth;
    }
    MacroScores out;
    std::size_t present = 0;
    for (std::size_t c = 0; c < k; ++c) {
        if (actual[c] == 0) continue;
        ++present;
        const double precision =
            predicted[c] ? static_cast<double>(tp[c]) / static_cast<double>(predicted[c]) : 0.0;
        const double recall = static_cast<double>(tp[c]) / static_cast<double>(actual[c]);
        out.precision += precision;
        out.recall += recall;
        out.f1 += precision + recall > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
    }
    if (present == 0) throw EmptyInputError("macro_prf: empty input");
    out.precision /= static_cast<double>(present);
    out.recall /= static_cast<double>(present);
    out.f1 /= static_cast<double>(present);
    return out;
}

double softmax_entropy(std::span<const double> logits) {
    const double peak = *std::max_element(logits.begin(), logits.end());
    double partition = 0.0;
    for (double z : logits) partition += std::exp(z - peak);
    const double log_partition = std::log(partition);
    double entropy = 0.0;
    for (double z : logits) {
        const double log_p = z - peak - log_partition;
        const double p = std::exp(log_p);
        if (p > 0.0) entropy -= p * log_p;
    }
    return std::max(entropy, 0.0);
}

double macro_entropy(const MulticlassRun& run) {
    if (run.classes < 2) throw ArgumentError("macro_entropy: needs at least two classes");
    std::vector<double> sum(run.classes, 0.0);
    std::vector<std::size_t> count(run.classes, 0);
    for (std::size_t i = 0; i < run.rows(); ++i) {
        const auto c = static_cast<std::size_t>(run.labels[i]);
        sum[c] += softmax_entropy(run.row(i));
        ++count[c];
    }
    double total = 0.0;
    std::size_t present = 0;
    for (std::size_t c = 0; c < run.classes; ++c) {
        if (count[c] == 0) continue;
        total += sum[c] / static_cast<double>(count[c]);
        ++present;
    }
    if (present == 0) throw EmptyInputError("macro_entropy: empty input");
    return total / static_cast<double>(present);
}

} // namespace prunebias
