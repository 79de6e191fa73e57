#include "prunebias/mitigation.hpp"

#include "prunebias/errors.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

namespace prunebias {

double no_positive_cut() { return std::nextafter(1.0, 2.0); }

Threshold calibrate_threshold(std::span<const double> val_scores, std::span<const std::uint8_t> val_labels) {
    if (val_scores.size() != val_labels.size()) throw AlignmentError("calibrate_threshold: length mismatch");
    if (val_scores.empty()) throw EmptyInputError("calibrate_threshold: empty validation split");

    Threshold t;
    t.k = static_cast<std::size_t>(std::count_if(val_labels.begin(), val_labels.end(), [](auto v) { return v != 0; }));
    if (t.k == 0) {
        t.cut = no_positive_cut();
        return t;
    }
    std::vector<double> sorted(val_scores.begin(), val_scores.end());
    std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(t.k - 1), sorted.end(),
                     std::greater<>());
    t.cut = sorted[t.k - 1];
    return t;
}

ThresholdMap calibrate_thresholds(const PredictionRun& val_run, const AttributeTable& val_labels) {
    if (val_run.sample_ids() != val_labels.sample_ids()) {
        throw AlignmentError("calibrate_thresholds: run is not aligned to the validation labels");
    }
    ThresholdMap map;
    for (std::size_t j = 0; j < val_run.cols(); ++j) {
        const auto& name = val_run.attributes()[j];
        map[name] = calibrate_threshold(val_run.column(j), val_labels.column(name));
    }
    return map;
}

AttributeTable apply_thresholds(const PredictionRun& run, const ThresholdMap& map) {
    std::vector<double> cuts(run.cols());
    for (std::size_t j = 0; j < run.cols(); ++j) {
        auto it = map.find(run.attributes()[j]);
        if (it == map.end()) {
            throw ArgumentError("apply_thresholds: no threshold for attribute '" + run.attributes()[j] + "'");
        }
        cuts[j] = it->second.cut;
    }
    std::vector<std::uint8_t> values(run.rows() * run.cols());
    for (std::size_t i = 0; i < run.rows(); ++i) {
        for (std::size_t j = 0; j < run.cols(); ++j) values[i * run.cols() + j] = run.at(i, j) >= cuts[j];
    }
    return AttributeTable(run.split(), run.sample_ids(), run.attributes(), std::move(values));
}

AttributeTable threshold_labels(const PredictionRun& run, double threshold) {
    std::vector<std::uint8_t> values(run.scores().size());
    std::transform(run.scores().begin(), run.scores().end(), values.begin(),
                   [threshold](double s) { return static_cast<std::uint8_t>(s >= threshold); });
    return AttributeTable(run.split(), run.sample_ids(), run.attributes(), std::move(values));
}

std::vector<std::size_t> rank_by_uncertainty(std::span<const double> dense_scores) {
    if (dense_scores.empty()) throw EmptyInputError("rank_by_uncertainty: empty input");
    std::vector<std::size_t> order(dense_scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return std::abs(dense_scores[a] - 0.5) < std::abs(dense_scores[b] - 0.5);
    });
    return order;
}

std::string_view to_string(OverrideSource source) {
    return source == OverrideSource::truth ? "truth" : "dense";
}

OverrideSource parse_override_source(std::string_view text) {
    if (text == "truth") return OverrideSource::truth;
    if (text == "dense") return OverrideSource::dense;
    throw ArgumentError("override source must be 'truth' or 'dense'");
}

OverridePlan make_override_plan(const PredictionRun& dense_run, const AttributeTable& train,
                                const AttributeTable& test, std::string_view category, OverrideSource source,
                                double fraction, double threshold) {
    if (!(fraction >= 0.0 && fraction <= 1.0)) throw ArgumentError("override fraction must lie in [0,1]");
    OverridePlan plan;
    plan.source = source;
    plan.fraction = fraction;
    plan.category = std::string(category);
    for (std::size_t j = 0; j < dense_run.cols(); ++j) {
        const auto& name = dense_run.attributes()[j];
        AttributeOverride entry;
        entry.attribute = name;
        const auto scores = dense_run.column(j);
        entry.order = rank_by_uncertainty(scores);
        if (name != category) {
            auto ba = bias_amplification(train, test, dense_run, name, category, threshold);
            entry.dense_ba = ba.ba;
            entry.eligible = ba.eligible && *ba.ba > 0.0;
        }
        plan.attributes.push_back(std::move(entry));
    }
    return plan;
}

AttributeTable apply_overrides(const AttributeTable& sparse_labels, const OverridePlan& plan,
                               const AttributeTable& truth, const AttributeTable& dense_labels) {
    if (!(plan.fraction >= 0.0 && plan.fraction <= 1.0)) throw ArgumentError("override fraction must lie in [0,1]");
    const AttributeTable& source = plan.source == OverrideSource::truth ? truth : dense_labels;
    if (source.sample_ids() != sparse_labels.sample_ids()) {
        throw AlignmentError("apply_overrides: override source is not aligned to the sparse labels");
    }
    const std::size_t n = sparse_labels.rows();
    const std::size_t count = floor_fraction(plan.fraction, n);

    std::vector<std::uint8_t> values(sparse_labels.values().begin(), sparse_labels.values().end());
    for (const auto& entry : plan.attributes) {
        if (!entry.eligible) continue;
        if (entry.order.size() != n) {
            throw ArgumentError("apply_overrides: order for '" + entry.attribute + "' does not cover the split");
        }
        const std::size_t dst = sparse_labels.attribute_index(entry.attribute);
        const std::size_t src = source.attribute_index(entry.attribute);
        for (std::size_t k = 0; k < count; ++k) {
            const std::size_t i = entry.order[k];
            values[i * sparse_labels.cols() + dst] = source.at(i, src);
        }
    }
    return AttributeTable(sparse_labels.split(), sparse_labels.sample_ids(), sparse_labels.attributes(),
                          std::move(values));
}

std::vector<MitigationComparison> evaluate_mitigation(const AttributeTable& before, const AttributeTable& after,
                                                      const AttributeTable& test,
                                                      std::span<const std::string> categories,
                                                      const AttributeTable& train) {
    if (before.attributes() != after.attributes() || before.sample_ids() != after.sample_ids()) {
        throw AlignmentError("evaluate_mitigation: before and after labels differ in layout");
    }
    std::vector<MitigationComparison> out;
    for (const auto& attribute : before.attributes()) {
        for (const auto& category : categories) {
            if (attribute == category) continue;
            out.push_back({bias_amplification(train, test, before, attribute, category),
                           bias_amplification(train, test, after, attribute, category)});
        }
    }
    return out;
}

PredictionRun mean_run(std::span<const PredictionRun> runs, std::string run_id) {
    if (runs.empty()) throw ArgumentError("mean_run: no runs");
    const auto& first = runs.front();
    std::vector<double> scores(first.scores().size(), 0.0);
    for (const auto& run : runs) {
        if (run.sample_ids() != first.sample_ids() || run.attributes() != first.attributes()) {
            throw AlignmentError("mean_run: run '" + run.run_id() + "' differs in layout");
        }
        for (std::size_t k = 0; k < scores.size(); ++k) scores[k] += run.scores()[k];
    }
    for (auto& s : scores) s /= static_cast<double>(runs.size());
    RunDescriptor d = first.descriptor();
    d.run_id = std::move(run_id);
    return PredictionRun(std::move(d), first.sample_ids(), first.attributes(), std::move(scores));
}

// --- JSON -------------------------------------------------------------------------

nlohmann::json to_json(const ThresholdMap& map) {
    nlohmann::json attrs = nlohmann::json::object();
    for (const auto& [name, t] : map) attrs[name] = {{"k", t.k}, {"cut", t.cut}};
    return {{"thresholds", attrs}};
}

ThresholdMap threshold_map_from_json(const nlohmann::json& doc) {
    ThresholdMap map;
    try {
        for (const auto& [name, t] : doc.at("thresholds").items()) {
            map[name] = Threshold{t.at("k").get<std::size_t>(), t.at("cut").get<double>()};
        }
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("threshold map: ") + e.what());
    }
    return map;
}

nlohmann::json to_json(const OverridePlan& plan) {
    nlohmann::json attrs = nlohmann::json::array();
    for (const auto& a : plan.attributes) {
        attrs.push_back({{"attribute", a.attribute},
                         {"eligible", a.eligible},
                         {"dense_ba", a.dense_ba ? nlohmann::json(*a.dense_ba) : nlohmann::json(nullptr)},
                         {"order", a.order}});
    }
    return {{"source", to_string(plan.source)},
            {"fraction", plan.fraction},
            {"category", plan.category},
            {"attributes", attrs}};
}

OverridePlan override_plan_from_json(const nlohmann::json& doc) {
    OverridePlan plan;
    try {
        plan.source = parse_override_source(doc.at("source").get<std::string>());
        plan.fraction = doc.at("fraction").get<double>();
        plan.category = doc.at("category").get<std::string>();
        for (const auto& a : doc.at("attributes")) {
            AttributeOverride entry;
            entry.attribute = a.at("attribute").get<std::string>();
            entry.eligible = a.at("eligible").get<bool>();
            if (!a.at("dense_ba").is_null()) entry.dense_ba = a.at("dense_ba").get<double>();
            entry.order = a.at("order").get<std::vector<std::size_t>>();
            plan.attributes.push_back(std::move(entry));
        }
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("override plan: ") + e.what());
    }
    return plan;
}

} // namespace prunebias
