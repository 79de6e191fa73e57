#pragma once

// Test-only builders for synthetic label tables and prediction runs.

#include "prunebias/data_model.hpp"

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace prunebias::testing {

inline std::vector<std::string> sample_names(std::size_t n, const std::string& prefix = "s") {
    std::vector<std::string> ids(n);
    for (std::size_t i = 0; i < n; ++i) ids[i] = prefix + std::to_string(i);
    return ids;
}

/// Table from column-major binary columns.
inline AttributeTable table_from_columns(Split split, const std::vector<std::string>& names,
                                         const std::vector<std::vector<std::uint8_t>>& columns,
                                         std::vector<std::string> ids = {}) {
    const std::size_t n = columns.empty() ? 0 : columns.front().size();
    if (ids.empty()) ids = sample_names(n);
    std::vector<std::uint8_t> values(n * names.size());
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < names.size(); ++j) values[i * names.size() + j] = columns[j][i];
    }
    return AttributeTable(split, std::move(ids), names, std::move(values));
}

inline RunDescriptor descriptor(std::string run_id, Method method = Method::dense, double sparsity = 0.0,
                                std::int64_t seed = 0, Split split = Split::test) {
    RunDescriptor d;
    d.run_id = std::move(run_id);
    d.method = method;
    d.sparsity = sparsity;
    d.seed = seed;
    d.split = split;
    if (method == Method::nm) d.nm = NMPattern{2, 4};
    return d;
}

inline PredictionRun run_from_columns(RunDescriptor d, const std::vector<std::string>& names,
                                      const std::vector<std::vector<double>>& columns,
                                      std::vector<std::string> ids = {}) {
    const std::size_t n = columns.empty() ? 0 : columns.front().size();
    if (ids.empty()) ids = sample_names(n);
    std::vector<double> scores(n * names.size());
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < names.size(); ++j) scores[i * names.size() + j] = columns[j][i];
    }
    return PredictionRun(std::move(d), std::move(ids), names, std::move(scores));
}

/// Scores that reproduce the labels exactly at threshold 0.5.
inline PredictionRun perfect_run(const AttributeTable& labels, RunDescriptor d) {
    std::vector<double> scores(labels.values().size());
    for (std::size_t k = 0; k < scores.size(); ++k) scores[k] = labels.values()[k] ? 0.9 : 0.1;
    d.split = labels.split();
    return PredictionRun(std::move(d), labels.sample_ids(), labels.attributes(), std::move(scores));
}

inline std::vector<std::uint8_t> random_bits(std::mt19937_64& rng, std::size_t n, double p) {
    std::bernoulli_distribution coin(p);
    std::vector<std::uint8_t> out(n);
    for (auto& b : out) b = coin(rng);
    return out;
}

/// Population with a planted bias amplification of exactly +0.10 for
/// attribute "A" against identity "I" on a 1000-sample test split.
///
/// group  A I  sparse dense  count
///   G2   1 1  0.45   0.60    10   sparse miss, most uncertain for dense
///   G4   1 0  0.40   0.40    30   sparse and dense miss
///   G6   0 1  0.30   0.20    10
///   G5   1 0  0.20   0.85    10   sparse miss
///   G3   1 0  0.70   0.90    60
///   G1   1 1  0.80   0.95    90
///   G8   0 0  0.05   0.03   400
///   G7   0 1  0.05   0.02   390
///
/// Truth: N(A=1)=200 with 100 I=1, so b_true = 0.5. Sparse predictions are
/// G1+G3 (150 positives, 90 with I=1), b_pred = 0.6. Dense predictions are
/// G1+G2+G3+G5 (170 positives, 100 with I=1), dense BA = 100/170 - 0.5 > 0.
struct MitigationPopulation {
    AttributeTable train;
    AttributeTable val;
    AttributeTable test;
    PredictionRun sparse_val;
    PredictionRun sparse_test;
    PredictionRun dense_test;
};

inline MitigationPopulation make_mitigation_population() {
    struct Group {
        std::uint8_t a, i;
        double sparse, dense;
        int count;
    };
    // Listed in sample-index order; equal dense uncertainty resolves by index.
    const std::vector<Group> groups{
        {1, 1, 0.45, 0.60, 10}, {1, 0, 0.40, 0.40, 30}, {0, 1, 0.30, 0.20, 10},  {1, 0, 0.20, 0.85, 10},
        {1, 0, 0.70, 0.90, 60}, {1, 1, 0.80, 0.95, 90}, {0, 0, 0.05, 0.03, 400}, {0, 1, 0.05, 0.02, 390},
    };
    std::vector<std::uint8_t> a, i;
    std::vector<double> sparse_a, sparse_i, dense_a, dense_i;
    for (const auto& g : groups) {
        for (int k = 0; k < g.count; ++k) {
            a.push_back(g.a);
            i.push_back(g.i);
            sparse_a.push_back(g.sparse);
            dense_a.push_back(g.dense);
            sparse_i.push_back(g.i ? 0.99 : 0.01);
            dense_i.push_back(g.i ? 0.99 : 0.01);
        }
    }
    const std::vector<std::string> names{"A", "I"};

    // Training counts (80, 20, 400, 500): A and I positively correlated.
    std::vector<std::uint8_t> ta, ti;
    auto add = [&](std::uint8_t x, std::uint8_t y, int count) {
        for (int k = 0; k < count; ++k) {
            ta.push_back(x);
            ti.push_back(y);
        }
    };
    add(1, 1, 80);
    add(1, 0, 20);
    add(0, 1, 400);
    add(0, 0, 500);

    MitigationPopulation p{
        table_from_columns(Split::train, names, {ta, ti}, sample_names(ta.size(), "tr")),
        table_from_columns(Split::val, names, {a, i}, sample_names(a.size(), "v")),
        table_from_columns(Split::test, names, {a, i}),
        run_from_columns(descriptor("sparse_val", Method::gmp_pt, 0.995, 0, Split::val), names, {sparse_a, sparse_i},
                         sample_names(a.size(), "v")),
        run_from_columns(descriptor("sparse_test", Method::gmp_pt, 0.995, 0, Split::test), names, {sparse_a, sparse_i}),
        run_from_columns(descriptor("dense_test"), names, {dense_a, dense_i}),
    };
    return p;
}

} // namespace prunebias::testing
