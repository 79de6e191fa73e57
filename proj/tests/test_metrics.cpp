#include "prunebias/errors.hpp"
#include "prunebias/metrics.hpp"

#include "fixtures.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace prunebias;
using namespace prunebias::testing;

using Scores = std::vector<double>;
using Labels = std::vector<std::uint8_t>;

TEST_CASE("accuracy") {
    CHECK(accuracy(Scores{0.9, 0.1}, Labels{1, 0}, 0.5) == 1.0);
    CHECK(accuracy(Scores{0.9, 0.1}, Labels{0, 1}, 0.5) == 0.0);
    CHECK(accuracy(Scores{0.6, 0.4, 0.7, 0.2}, Labels{1, 1, 0, 0}, 0.5) == 0.5);
    // A score equal to the threshold counts as positive.
    CHECK(accuracy(Scores{0.5}, Labels{1}) == 1.0);
    CHECK_THROWS_AS(accuracy(Scores{}, Labels{}), EmptyInputError);
    CHECK_THROWS_AS(accuracy(Scores{0.1}, Labels{1, 0}), AlignmentError);
}

TEST_CASE("auc") {
    CHECK(auc(Scores{0.1, 0.4, 0.35, 0.8}, Labels{0, 0, 1, 1}) == 0.75);
    CHECK(auc(Scores{0.1, 0.2, 0.8, 0.9}, Labels{0, 0, 1, 1}) == 1.0);
    CHECK(auc(Scores{0.3, 0.3, 0.3, 0.3}, Labels{0, 1, 0, 1}) == 0.5);
    CHECK_THROWS_AS(auc(Scores{0.1, 0.2}, Labels{1, 1}), DegenerateInputError);
}

TEST_CASE("auc matches pair counting with heavy ties") {
    std::mt19937_64 rng(19);
    for (int trial = 0; trial < 300; ++trial) {
        const std::size_t n = 2 + rng() % 199;
        Scores s(n);
        // Scores drawn from a coarse grid so ties are common.
        for (auto& v : s) v = static_cast<double>(rng() % 7) / 6.0;
        Labels y = random_bits(rng, n, 0.4);
        y[0] = 1;
        y[1] = 0;
        CHECK(std::fabs(auc(s, y) - oracle::auc_pairs(s, y)) <= 1e-12);
    }
}

TEST_CASE("auc is invariant under increasing transforms") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Scores s(100), t(100);
    for (std::size_t i = 0; i < s.size(); ++i) {
        s[i] = u(rng);
        t[i] = std::pow(s[i], 3.0);
    }
    Labels y = random_bits(rng, s.size(), 0.5);
    CHECK(auc(s, y) == auc(t, y));
}

TEST_CASE("calibration buckets") {
    CHECK(calibration_bucket(0.0) == 0);
    CHECK(calibration_bucket(0.1) == 1);
    CHECK(calibration_bucket(0.3) == 3);
    CHECK(calibration_bucket(0.7) == 7);
    CHECK(calibration_bucket(0.95) == 9);
    CHECK(calibration_bucket(1.0) == 9);

    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Scores s(500);
    for (auto& v : s) v = u(rng);
    auto b = calibration_buckets(s, random_bits(rng, s.size(), 0.5));
    std::size_t sum = 0;
    for (const auto& bucket : b.buckets) {
        sum += bucket.count;
        if (bucket.count) {
            CHECK(bucket.mean_score >= bucket.lower);
            CHECK(bucket.mean_score <= bucket.upper);
        }
    }
    CHECK(sum == s.size());
    CHECK(b.edges.front() == 0.0);
    CHECK(b.edges.back() == 1.0);
}

TEST_CASE("ece worked examples") {
    CHECK(ece(Scores(8, 0.5), Labels{1, 1, 1, 1, 0, 0, 0, 0}) == 0.0);
    CHECK(ece(Scores(4, 0.95), Labels{1, 1, 1, 1}) == doctest::Approx(0.05).epsilon(1e-15));
    CHECK(ece(Scores{0.05, 0.05, 0.05, 0.05, 0.95, 0.95, 0.95, 0.95}, Labels{1, 0, 0, 0, 1, 1, 1, 1}) ==
          doctest::Approx(0.125).epsilon(1e-15));
    CHECK_THROWS_AS(ece(Scores{}, Labels{}), EmptyInputError);
}

TEST_CASE("ece vanishes when every bucket is calibrated") {
    // Bucket m holds 10 samples at score (m + 0.5)/10 with m+0.5 of them... use
    // 20 samples so the positive count is an integer: 2m+1 positives.
    Scores s;
    Labels y;
    for (int m = 0; m < 10; ++m) {
        for (int k = 0; k < 20; ++k) {
            s.push_back((m + 0.5) / 10.0);
            y.push_back(k < 2 * m + 1);
        }
    }
    CHECK(ece(s, y) == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("uncertainty fraction") {
    CHECK(uncertainty_fraction(Scores{0.05, 0.5, 0.89, 0.95}) == 0.5);
    CHECK(uncertainty_fraction(Scores{0.0, 1.0}) == 0.0);
    CHECK(uncertainty_fraction(Scores{0.1, 0.9}) == 0.0);
    CHECK_THROWS_AS(uncertainty_fraction(Scores{0.5}, 0.6, 0.4), ArgumentError);
    CHECK_THROWS_AS(uncertainty_fraction(Scores{}), EmptyInputError);

    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Scores s(300);
    for (auto& v : s) v = u(rng);
    double previous = -1.0;
    for (double w = 0.0; w <= 0.5; w += 0.05) {
        const double f = uncertainty_fraction(s, 0.5 - w - 1e-12, 0.5 + w + 1e-12);
        CHECK(f >= previous);
        previous = f;
    }
}

TEST_CASE("tcb") {
    // Rare value 1: 20 true positives, 16 predicted.
    Scores s(100, 0.1);
    Labels y(100, 0);
    for (int i = 0; i < 20; ++i) y[i] = 1;
    for (int i = 0; i < 16; ++i) s[i] = 0.9;
    CHECK(tcb(s, y, 0.2) == doctest::Approx(0.8).epsilon(1e-15));

    // Rare value 0: 30 true zeros, 33 predicted zeros.
    Scores s0(100, 0.9);
    Labels y0(100, 1);
    for (int i = 0; i < 30; ++i) y0[i] = 0;
    for (int i = 0; i < 33; ++i) s0[i] = 0.1;
    CHECK(tcb(s0, y0, 0.7) == doctest::Approx(1.1).epsilon(1e-15));

    CHECK(tcb(Scores{0.9, 0.1}, Labels{1, 0}, 0.3) == 1.0);
    CHECK_THROWS_AS(tcb(Scores{0.1, 0.1}, Labels{0, 0}, 0.3), DegenerateInputError);
}

TEST_CASE("tcb of a perfect predictor is one") {
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = 20 + rng() % 100;
        auto y = random_bits(rng, n, 0.3);
        y[0] = 1;
        y[1] = 0;
        Scores s(n);
        for (std::size_t i = 0; i < n; ++i) s[i] = y[i] ? 0.8 : 0.2;
        const double mean = static_cast<double>(std::count(y.begin(), y.end(), 1)) / static_cast<double>(n);
        CHECK(tcb(s, y, mean) == 1.0);
    }
}

TEST_CASE("macro precision recall f1") {
    SUBCASE("perfect") {
        MulticlassRun run({}, 3, {5, 0, 0, 0, 5, 0, 0, 0, 5}, {0, 1, 2});
        auto m = macro_prf(run);
        CHECK(m.precision == 1.0);
        CHECK(m.recall == 1.0);
        CHECK(m.f1 == 1.0);
    }
    SUBCASE("symmetric confusion") {
        MulticlassRun run({}, 2, {1, 0, 0, 1, 1, 0, 0, 1}, {0, 0, 1, 1});
        auto m = macro_prf(run);
        CHECK(m.precision == 0.5);
        CHECK(m.recall == 0.5);
        CHECK(m.f1 == 0.5);
    }
    SUBCASE("class absent from predictions") {
        // Everything predicted as class 0. Class 0: p = 1/2, r = 1; class 1: p = 0, r = 0.
        MulticlassRun run({}, 2, {1, 0, 1, 0}, {0, 1});
        auto m = macro_prf(run);
        CHECK(m.precision == 0.25);
        CHECK(m.recall == 0.5);
        CHECK(m.f1 == doctest::Approx((2.0 / 3.0) / 2.0));
    }
    CHECK_THROWS_AS(MulticlassRun({}, 2, {1, 0}, {2}), ValueError);
    CHECK_THROWS_AS(MulticlassRun({}, 2, {1, 0, 1}, {0}), ArgumentError);
}

TEST_CASE("macro entropy") {
    MulticlassRun uniform({}, 4, std::vector<double>(8, 0.0), {0, 3});
    CHECK(macro_entropy(uniform) == doctest::Approx(std::log(4.0)).epsilon(1e-14));

    CHECK(softmax_entropy(std::vector<double>{1000.0, 0.0, 0.0}) == doctest::Approx(0.0));

    // Class 0 has three samples with entropy e0 and class 1 one sample with e1;
    // the macro value is (e0 + e1)/2 regardless of class size.
    const double e0 = softmax_entropy(std::vector<double>{2.0, 0.0});
    const double e1 = softmax_entropy(std::vector<double>{0.0, 0.3});
    MulticlassRun skewed({}, 2, {2, 0, 2, 0, 2, 0, 0, 0.3}, {0, 0, 0, 1});
    CHECK(macro_entropy(skewed) == doctest::Approx((e0 + e1) / 2.0).epsilon(1e-14));

    std::mt19937_64 rng(4);
    std::normal_distribution<double> z(0.0, 3.0);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> logits(5);
        for (auto& v : logits) v = z(rng);
        CHECK(softmax_entropy(logits) <= std::log(5.0) + 1e-12);
        CHECK(softmax_entropy(logits) >= 0.0);
    }
}
