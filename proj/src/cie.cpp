#include "prunebias/cie.hpp"

#include "prunebias/errors.hpp"

namespace prunebias {

namespace {

void check_consistent(std::span<const PredictionRun> runs, const PredictionRun& reference, const char* role) {
    if (runs.empty()) throw ArgumentError(std::string("find_cies: no ") + role + " runs");
    for (const auto& run : runs) {
        if (run.split() != reference.split()) {
            throw ArgumentError("find_cies: run '" + run.run_id() + "' is on split '" +
                                std::string(to_string(run.split())) + "', expected '" +
                                std::string(to_string(reference.split())) + "'");
        }
        if (run.attributes() != reference.attributes()) {
            throw ArgumentError("find_cies: run '" + run.run_id() + "' has a different attribute set");
        }
        if (run.sample_ids() != reference.sample_ids()) {
            throw ArgumentError("find_cies: run '" + run.run_id() + "' has a different sample ordering");
        }
    }
}

} // namespace

std::uint8_t modal_label(std::span<const PredictionRun> runs, std::size_t sample, std::size_t attribute,
                         double threshold) {
    std::size_t ones = 0;
    for (const auto& run : runs) ones += run.at(sample, attribute) >= threshold;
    return static_cast<std::uint8_t>(2 * ones >= runs.size());
}

CIESet find_cies(std::span<const PredictionRun> dense_runs, std::span<const PredictionRun> sparse_runs,
                 double threshold) {
    if (dense_runs.empty() || sparse_runs.empty()) throw ArgumentError("find_cies: both run lists must be nonempty");
    const PredictionRun& reference = dense_runs.front();
    check_consistent(dense_runs, reference, "dense");
    check_consistent(sparse_runs, reference, "sparse");

    CIESet out;
    out.sparsity = sparse_runs.front().sparsity();
    out.sample_ids = reference.sample_ids();
    out.attributes = reference.attributes();
    for (const auto& r : dense_runs) out.dense_run_ids.push_back(r.run_id());
    for (const auto& r : sparse_runs) out.sparse_run_ids.push_back(r.run_id());
    for (std::size_t i = 0; i < reference.rows(); ++i) {
        for (std::size_t j = 0; j < reference.cols(); ++j) {
            if (modal_label(dense_runs, i, j, threshold) != modal_label(sparse_runs, i, j, threshold)) {
                out.pairs.push_back({i, j});
            }
        }
    }
    return out;
}

UncertaintyEnrichment cie_uncertainty_enrichment(const CIESet& cies, std::span<const PredictionRun> dense_runs) {
    if (dense_runs.empty()) throw ArgumentError("cie_uncertainty_enrichment: no dense runs");
    check_consistent(dense_runs, dense_runs.front(), "dense");
    const PredictionRun& reference = dense_runs.front();
    if (reference.sample_ids() != cies.sample_ids || reference.attributes() != cies.attributes) {
        throw ArgumentError("cie_uncertainty_enrichment: dense runs do not match the CIE set layout");
    }

    auto uncertain = [&](std::size_t i, std::size_t j) {
        double mean = 0.0;
        for (const auto& run : dense_runs) mean += run.at(i, j);
        mean /= static_cast<double>(dense_runs.size());
        return mean > kUncertainLow && mean < kUncertainHigh;
    };

    UncertaintyEnrichment out;
    std::size_t total = 0;
    std::size_t hits = 0;
    for (std::size_t i = 0; i < reference.rows(); ++i) {
        for (std::size_t j = 0; j < reference.cols(); ++j) {
            hits += uncertain(i, j);
            ++total;
        }
    }
    if (total > 0) out.overall = static_cast<double>(hits) / static_cast<double>(total);

    if (!cies.pairs.empty()) {
        std::size_t cie_hits = 0;
        for (const auto& pair : cies.pairs) cie_hits += uncertain(pair.sample, pair.attribute);
        out.among_cies = static_cast<double>(cie_hits) / static_cast<double>(cies.pairs.size());
    }
    return out;
}

std::string format_cie_csv(const CIESet& cies) {
    std::string out = "sample_id,attribute\n";
    for (const auto& pair : cies.pairs) {
        out += cies.sample_ids[pair.sample] + "," + cies.attributes[pair.attribute] + "\n";
    }
    return out;
}

void write_cie_csv(const CIESet& cies, const std::filesystem::path& path) {
    write_text_file(path, format_cie_csv(cies));
}

} // namespace prunebias
