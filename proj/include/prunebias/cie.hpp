#pragma once

// Compression-identified exemplars: (sample, attribute) pairs whose modal
// dense label across runs disagrees with the modal sparse label.

#include "prunebias/data_model.hpp"
#include "prunebias/metrics.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace prunebias {

struct CIEPair {
    std::size_t sample = 0;     // row in the shared split ordering
    std::size_t attribute = 0;  // column in the shared attribute ordering

    friend auto operator<=>(const CIEPair&, const CIEPair&) = default;
};

struct CIESet {
    double sparsity = 0.0;
    std::vector<std::string> sample_ids;
    std::vector<std::string> attributes;
    std::vector<CIEPair> pairs;  // sorted by (sample, attribute)
    std::vector<std::string> dense_run_ids;
    std::vector<std::string> sparse_run_ids;
};

/// Majority of thresholded labels across runs; an exact tie yields 1.
std::uint8_t modal_label(std::span<const PredictionRun> runs, std::size_t sample, std::size_t attribute,
                         double threshold = kDefaultThreshold);

CIESet find_cies(std::span<const PredictionRun> dense_runs, std::span<const PredictionRun> sparse_runs,
                 double threshold = kDefaultThreshold);

struct UncertaintyEnrichment {
    std::optional<double> among_cies;
    double overall = 0.0;
};

/// Uncertainty of each pair is judged on its mean dense score across runs.
UncertaintyEnrichment cie_uncertainty_enrichment(const CIESet& cies, std::span<const PredictionRun> dense_runs);

/// `sample_id,attribute` rows.
std::string format_cie_csv(const CIESet& cies);
void write_cie_csv(const CIESet& cies, const std::filesystem::path& path);

} // namespace prunebias
