#include "prunebias/bias_amplification.hpp"

#include "prunebias/errors.hpp"

#include <algorithm>
#include <cmath>

namespace prunebias {

std::string_view to_string(Sign sign) {
    switch (sign) {
        case Sign::positive: return "positive";
        case Sign::negative: return "negative";
        case Sign::none: return "none";
    }
    return "none";
}

std::string_view to_string(Eligibility reason) {
    switch (reason) {
        case Eligibility::ok: return "ok";
        case Eligibility::no_significant_correlation: return "no_significant_correlation";
        case Eligibility::sparse_cell: return "sparse_cell";
        case Eligibility::no_true_positives: return "no_true_positives";
    }
    return "ok";
}

CorrelationSign correlation_sign(const ContingencyCounts& c, double critical_value) {
    const std::int64_t n = c.total();
    if (n <= 0) throw EmptyInputError("correlation_sign: empty contingency table");

    CorrelationSign out;
    const double x1 = static_cast<double>(c.n11 + c.n10);
    const double x0 = static_cast<double>(c.n01 + c.n00);
    const double i1 = static_cast<double>(c.n11 + c.n01);
    const double i0 = static_cast<double>(c.n10 + c.n00);
    if (x1 == 0.0 || x0 == 0.0 || i1 == 0.0 || i0 == 0.0) return out;

    const double cross = static_cast<double>(c.n11) * static_cast<double>(c.n00) -
                         static_cast<double>(c.n10) * static_cast<double>(c.n01);
    out.phi = cross / std::sqrt(x1 * x0 * i1 * i0);
    out.chi_square = static_cast<double>(n) * out.phi * out.phi;
    out.significant = out.chi_square > critical_value;
    if (out.significant && out.phi != 0.0) out.sign = out.phi > 0.0 ? Sign::positive : Sign::negative;
    return out;
}

double bias(const ContingencyCounts& counts, const CorrelationSign& direction) {
    if (direction.sign == Sign::none) throw ArgumentError("bias: correlation direction is none");
    const std::int64_t positives = counts.n11 + counts.n10;
    if (positives == 0) throw DegenerateInputError("bias: no samples with attribute value 1");
    const std::int64_t aligned = direction.sign == Sign::positive ? counts.n11 : counts.n10;
    return static_cast<double>(aligned) / static_cast<double>(positives);
}

BAResult bias_amplification(std::span<const std::uint8_t> train_attribute,
                            std::span<const std::uint8_t> train_identity,
                            std::span<const std::uint8_t> test_attribute,
                            std::span<const std::uint8_t> test_identity,
                            std::span<const std::uint8_t> predicted, std::string attribute,
                            std::string category, const BAOptions& options) {
    if (attribute == category) throw ArgumentError("bias_amplification: attribute equals category '" + attribute + "'");
    if (predicted.size() != test_attribute.size()) {
        throw AlignmentError("bias_amplification: predictions and test labels differ in length");
    }

    BAResult r;
    r.attribute = std::move(attribute);
    r.category = std::move(category);
    r.direction = correlation_sign(contingency(train_attribute, train_identity), options.critical_value);
    r.true_counts = contingency(test_attribute, test_identity);
    r.predicted_counts = contingency(predicted, test_identity);

    if (r.direction.sign == Sign::none) {
        r.reason = Eligibility::no_significant_correlation;
        return r;
    }
    const auto& p = r.predicted_counts;
    if (std::min({p.n11, p.n10, p.n01, p.n00}) < options.min_cell_count) {
        r.reason = Eligibility::sparse_cell;
        if (r.true_counts.n11 + r.true_counts.n10 > 0) r.b_true = bias(r.true_counts, r.direction);
        if (p.n11 + p.n10 > 0) r.b_pred = bias(p, r.direction);
        return r;
    }
    r.b_pred = bias(p, r.direction);
    if (r.true_counts.n11 + r.true_counts.n10 == 0) {
        r.reason = Eligibility::no_true_positives;
        return r;
    }
    r.b_true = bias(r.true_counts, r.direction);
    r.eligible = true;
    r.reason = Eligibility::ok;
    r.ba = *r.b_pred - *r.b_true;
    return r;
}

std::vector<std::uint8_t> threshold_column(std::span<const double> scores, double threshold) {
    std::vector<std::uint8_t> out(scores.size());
    std::transform(scores.begin(), scores.end(), out.begin(),
                   [threshold](double s) { return static_cast<std::uint8_t>(s >= threshold); });
    return out;
}

namespace {

void check_same_samples(const AttributeTable& test, const std::vector<std::string>& ids) {
    if (test.sample_ids() != ids) {
        throw AlignmentError("bias_amplification: predictions are not aligned to the test labels");
    }
}

} // namespace

BAResult bias_amplification(const AttributeTable& train, const AttributeTable& test, const PredictionRun& run,
                            std::string_view attribute, std::string_view category, double threshold,
                            const BAOptions& options) {
    if (attribute == category) {
        throw ArgumentError("bias_amplification: attribute equals category '" + std::string(attribute) + "'");
    }
    check_same_samples(test, run.sample_ids());
    auto predicted = threshold_column(run.column(attribute), threshold);
    return bias_amplification(train.column(attribute), train.column(category), test.column(attribute),
                              test.column(category), predicted, std::string(attribute), std::string(category),
                              options);
}

BAResult bias_amplification(const AttributeTable& train, const AttributeTable& test,
                            const AttributeTable& predicted, std::string_view attribute,
                            std::string_view category, const BAOptions& options) {
    if (attribute == category) {
        throw ArgumentError("bias_amplification: attribute equals category '" + std::string(attribute) + "'");
    }
    check_same_samples(test, predicted.sample_ids());
    return bias_amplification(train.column(attribute), train.column(category), test.column(attribute),
                              test.column(category), predicted.column(attribute), std::string(attribute),
                              std::string(category), options);
}

std::optional<double> worst_case_ba(std::span<const BAResult> results) {
    std::optional<double> worst;
    for (const auto& r : results) {
        if (r.eligible && r.ba && (!worst || *r.ba > *worst)) worst = r.ba;
    }
    return worst;
}

BAResult ba_with_backdoor_identity(const AttributeTable& train, std::span<const std::uint8_t> train_flags,
                                   const AttributeTable& test, std::span<const std::uint8_t> test_flags,
                                   const PredictionRun& run, std::string_view attribute, double threshold,
                                   const BAOptions& options) {
    if (train_flags.size() != train.rows()) throw AlignmentError("backdoor flags do not match the training split");
    if (test_flags.size() != test.rows()) throw AlignmentError("backdoor flags do not match the test split");
    check_same_samples(test, run.sample_ids());
    auto predicted = threshold_column(run.column(attribute), threshold);
    return bias_amplification(train.column(attribute), train_flags, test.column(attribute), test_flags, predicted,
                              std::string(attribute), "backdoor", options);
}

} // namespace prunebias
