#include "prunebias/errors.hpp"
#include "prunebias/mitigation.hpp"

#include "fixtures.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace prunebias;
using namespace prunebias::testing;

using Scores = std::vector<double>;
using Bits = std::vector<std::uint8_t>;

namespace {

std::size_t count_ones(const AttributeTable& t, std::string_view attr) {
    auto c = t.column(attr);
    return static_cast<std::size_t>(std::count(c.begin(), c.end(), 1));
}

bool same_values(const AttributeTable& a, const AttributeTable& b) {
    return std::equal(a.values().begin(), a.values().end(), b.values().begin(), b.values().end());
}

double ba_of(const MitigationPopulation& p, const AttributeTable& predicted) {
    auto r = bias_amplification(p.train, p.test, predicted, "A", "I");
    REQUIRE(r.eligible);
    return *r.ba;
}

} // namespace

TEST_CASE("calibrate threshold") {
    auto one = calibrate_threshold(Scores{0.2, 0.4, 0.6, 0.9}, Bits{0, 1, 0, 0});
    CHECK(one.k == 1);
    CHECK(one.cut == 0.9);

    auto none = calibrate_threshold(Scores{0.2, 1.0}, Bits{0, 0});
    CHECK(none.k == 0);
    CHECK(none.cut > 1.0);
    CHECK(none.cut == no_positive_cut());

    auto all = calibrate_threshold(Scores{0.3, 0.1, 0.7}, Bits{1, 1, 1});
    CHECK(all.k == 3);
    CHECK(all.cut == 0.1);

    CHECK_THROWS_AS(calibrate_threshold(Scores{}, Bits{}), EmptyInputError);
}

TEST_CASE("apply thresholds") {
    auto run = run_from_columns(descriptor("r"), {"A", "B", "C"},
                                {{0.95, 0.5, 0.5}, {1.0, 0.3, 0.9}, {0.4, 0.4, 0.1}});
    ThresholdMap map{{"A", {1, 0.9}}, {"B", {0, no_positive_cut()}}, {"C", {2, 0.4}}};
    auto t = apply_thresholds(run, map);
    CHECK(t.column("A") == Bits{1, 0, 0});
    CHECK(t.column("B") == Bits{0, 0, 0});
    CHECK(t.column("C") == Bits{1, 1, 0});  // tied scores at the cut are all positive

    ThresholdMap partial{{"A", {1, 0.9}}};
    CHECK_THROWS_AS(apply_thresholds(run, partial), ArgumentError);
}

TEST_CASE("calibration reproduces the validation base rate up to ties") {
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 30; ++trial) {
        const std::size_t n = 10 + rng() % 200;
        Bits y = random_bits(rng, n, 0.3);
        Scores s(n);
        // Coarse grid produces ties at the cut.
        for (auto& v : s) v = static_cast<double>(rng() % 20) / 19.0;
        auto th = calibrate_threshold(s, y);
        const auto positives = static_cast<std::size_t>(std::count(y.begin(), y.end(), 1));
        CHECK(th.k == positives);
        std::size_t predicted = 0;
        for (double v : s) predicted += v >= th.cut;
        CHECK(predicted >= positives);
        // Surplus consists only of scores tied with the cut.
        std::size_t strictly_above = 0;
        for (double v : s) strictly_above += v > th.cut;
        CHECK(strictly_above < std::max<std::size_t>(positives, 1));
    }
}

TEST_CASE("rank by uncertainty") {
    CHECK(rank_by_uncertainty(Scores{0.5, 0.9, 0.45}) == std::vector<std::size_t>{0, 2, 1});
    CHECK(rank_by_uncertainty(Scores{0.3, 0.3, 0.3}) == std::vector<std::size_t>{0, 1, 2});
    CHECK(rank_by_uncertainty(Scores{0.1, 0.9}) == std::vector<std::size_t>{0, 1});
    CHECK_THROWS_AS(rank_by_uncertainty(Scores{}), EmptyInputError);
}

TEST_CASE("override source names") {
    CHECK(parse_override_source("truth") == OverrideSource::truth);
    CHECK(parse_override_source("dense") == OverrideSource::dense);
    CHECK(to_string(OverrideSource::dense) == "dense");
    CHECK_THROWS_AS(parse_override_source("oracle"), ArgumentError);
}

TEST_CASE("overrides replace the most uncertain cells") {
    // Ten samples, attribute A eligible by construction.
    const Bits truth_a{1, 1, 1, 1, 1, 0, 0, 0, 0, 0};
    const Bits sparse_a{0, 0, 0, 0, 0, 1, 1, 1, 1, 1};
    const Scores dense_a{0.9, 0.52, 0.8, 0.7, 0.95, 0.2, 0.1, 0.49, 0.3, 0.05};
    auto truth = table_from_columns(Split::test, {"A"}, {truth_a});
    auto sparse = table_from_columns(Split::test, {"A"}, {sparse_a});
    auto dense = table_from_columns(Split::test, {"A"}, {truth_a});

    OverridePlan plan;
    plan.source = OverrideSource::truth;
    plan.fraction = 0.2;
    plan.category = "I";
    plan.attributes.push_back({"A", true, 0.1, rank_by_uncertainty(dense_a)});
    auto out = apply_overrides(sparse, plan, truth, dense);
    // Most uncertain: index 7 (0.01), then index 1 (0.02).
    CHECK(out.column("A") == Bits{0, 1, 0, 0, 0, 1, 1, 0, 1, 1});

    plan.fraction = 0.0;
    CHECK(same_values(apply_overrides(sparse, plan, truth, dense), sparse));
    plan.fraction = 1.0;
    CHECK(same_values(apply_overrides(sparse, plan, truth, dense), truth));
    plan.attributes[0].eligible = false;
    CHECK(same_values(apply_overrides(sparse, plan, truth, dense), sparse));
    plan.fraction = 1.5;
    CHECK_THROWS_AS(apply_overrides(sparse, plan, truth, dense), ArgumentError);
}

TEST_CASE("override properties") {
    std::mt19937_64 rng(13);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const std::size_t n = 120;
    auto truth = table_from_columns(Split::test, {"A", "B"}, {random_bits(rng, n, 0.4), random_bits(rng, n, 0.6)});
    auto sparse = table_from_columns(Split::test, {"A", "B"}, {random_bits(rng, n, 0.4), random_bits(rng, n, 0.6)});
    auto dense = table_from_columns(Split::test, {"A", "B"}, {random_bits(rng, n, 0.4), random_bits(rng, n, 0.6)});
    Scores da(n), db(n);
    for (auto& v : da) v = u(rng);
    for (auto& v : db) v = u(rng);

    OverridePlan plan;
    plan.category = "I";
    plan.attributes.push_back({"A", true, 0.05, rank_by_uncertainty(da)});
    plan.attributes.push_back({"B", false, -0.01, rank_by_uncertainty(db)});

    auto errors = [&](const AttributeTable& t) {
        std::size_t e = 0;
        for (std::size_t k = 0; k < t.values().size(); ++k) e += t.values()[k] != truth.values()[k];
        return e;
    };

    for (auto source : {OverrideSource::truth, OverrideSource::dense}) {
        plan.source = source;
        std::vector<std::uint8_t> previous_changed(n, 0);
        std::size_t previous_errors = errors(sparse);
        for (double f : {0.0, 0.05, 0.1, 0.25, 0.5, 1.0}) {
            plan.fraction = f;
            auto out = apply_overrides(sparse, plan, truth, dense);
            CHECK(out.column("B") == sparse.column("B"));
            std::size_t changed = 0;
            std::vector<std::uint8_t> touched(n, 0);
            for (std::size_t i = 0; i < n; ++i) {
                if (out.at(i, 0) != sparse.at(i, 0)) {
                    ++changed;
                    touched[i] = 1;
                }
            }
            CHECK(changed <= floor_fraction(f, n));
            // Cells overridden at a smaller fraction stay overridden.
            for (std::size_t i = 0; i < n; ++i) {
                if (previous_changed[i]) CHECK(touched[i]);
            }
            previous_changed = touched;
            if (source == OverrideSource::truth) {
                CHECK(errors(out) <= previous_errors);
                previous_errors = errors(out);
            }
        }
    }
}

TEST_CASE("override plan eligibility follows dense BA") {
    auto p = make_mitigation_population();
    auto plan = make_override_plan(p.dense_test, p.train, p.test, "I", OverrideSource::truth, 0.05);
    REQUIRE(plan.attributes.size() == 2);
    CHECK(plan.attributes[0].attribute == "A");
    CHECK(plan.attributes[0].eligible);
    CHECK(*plan.attributes[0].dense_ba == doctest::Approx(100.0 / 170.0 - 0.5).epsilon(1e-15));
    CHECK(plan.attributes[0].order.size() == p.test.rows());
    // The category's own column is never overridden.
    CHECK(plan.attributes[1].attribute == "I");
    CHECK_FALSE(plan.attributes[1].eligible);

    CHECK_THROWS_AS(make_override_plan(p.dense_test, p.train, p.test, "I", OverrideSource::truth, 1.2),
                    ArgumentError);
}

TEST_CASE("mitigation on the planted population") {
    auto p = make_mitigation_population();
    auto sparse_labels = threshold_labels(p.sparse_test);
    CHECK(ba_of(p, sparse_labels) == doctest::Approx(0.10).epsilon(1e-14));

    SUBCASE("threshold calibration") {
        auto map = calibrate_thresholds(p.sparse_val, p.val);
        CHECK(map.at("A").k == 200);
        CHECK(map.at("A").cut == 0.30);
        auto calibrated = apply_thresholds(p.sparse_test, map);
        CHECK(count_ones(calibrated, "A") == 200);
        CHECK(ba_of(p, calibrated) == doctest::Approx(0.05).epsilon(1e-14));
    }

    SUBCASE("truth overrides") {
        auto dense_labels = threshold_labels(p.dense_test);
        const std::vector<std::pair<double, double>> expected{
            {0.0, 0.10}, {0.05, 100.0 / 190.0 - 0.5}, {0.1, 0.0}, {1.0, 0.0}};
        double previous = 1.0;
        for (const auto& [fraction, ba] : expected) {
            auto plan = make_override_plan(p.dense_test, p.train, p.test, "I", OverrideSource::truth, fraction);
            auto out = apply_overrides(sparse_labels, plan, p.test, dense_labels);
            const double value = ba_of(p, out);
            CHECK(value == doctest::Approx(ba).epsilon(1e-14));
            CHECK(value <= previous);
            previous = value;
        }
    }

    SUBCASE("dense overrides at full fraction give the dense BA") {
        auto dense_labels = threshold_labels(p.dense_test);
        auto plan = make_override_plan(p.dense_test, p.train, p.test, "I", OverrideSource::dense, 1.0);
        auto out = apply_overrides(sparse_labels, plan, p.test, dense_labels);
        CHECK(ba_of(p, out) == doctest::Approx(100.0 / 170.0 - 0.5).epsilon(1e-14));
    }

    SUBCASE("evaluate mitigation pairs before and after") {
        const std::vector<std::string> cats{"I"};
        auto same = evaluate_mitigation(sparse_labels, sparse_labels, p.test, cats, p.train);
        REQUIRE(same.size() == 1);
        CHECK(same[0].before.ba == same[0].after.ba);
        auto to_truth = evaluate_mitigation(sparse_labels, p.test, p.test, cats, p.train);
        CHECK(*to_truth[0].after.ba == 0.0);
        CHECK(*to_truth[0].before.ba > 0.0);
    }
}

TEST_CASE("mean run") {
    std::vector<PredictionRun> runs{run_from_columns(descriptor("a"), {"A"}, {{0.2, 0.4}}),
                                    run_from_columns(descriptor("b"), {"A"}, {{0.6, 0.8}})};
    auto m = mean_run(runs, "mean");
    CHECK(m.run_id() == "mean");
    CHECK(m.column("A")[0] == doctest::Approx(0.4));
    CHECK(m.column("A")[1] == doctest::Approx(0.6));
    std::vector<PredictionRun> none;
    CHECK_THROWS_AS(mean_run(none, "x"), ArgumentError);
}

TEST_CASE("threshold map and plan JSON round trip") {
    ThresholdMap map{{"A", {3, 0.25}}, {"B", {0, no_positive_cut()}}};
    auto back = threshold_map_from_json(to_json(map));
    REQUIRE(back.size() == 2);
    CHECK(back.at("A").k == 3);
    CHECK(back.at("A").cut == 0.25);
    CHECK(back.at("B").cut == no_positive_cut());
    CHECK_THROWS_AS(threshold_map_from_json(nlohmann::json::parse(R"({"thresholds": {"A": {"k": "x"}}})")),
                    FormatError);

    auto p = make_mitigation_population();
    auto plan = make_override_plan(p.dense_test, p.train, p.test, "I", OverrideSource::dense, 0.1);
    auto plan_back = override_plan_from_json(to_json(plan));
    CHECK(plan_back.source == OverrideSource::dense);
    CHECK(plan_back.fraction == 0.1);
    CHECK(plan_back.category == "I");
    REQUIRE(plan_back.attributes.size() == plan.attributes.size());
    CHECK(plan_back.attributes[0].order == plan.attributes[0].order);
    CHECK(plan_back.attributes[0].eligible == plan.attributes[0].eligible);
}
