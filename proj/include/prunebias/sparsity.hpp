#pragma once

// Pruning math: global magnitude masks, the polynomial sparsity schedule,
// N:M structured masks and a multiply-accumulate FLOPs estimate.

#include "prunebias/data_model.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace prunebias {

struct TensorMask {
    std::string name;
    std::vector<std::uint64_t> dims;
    std::vector<std::uint8_t> keep;  // 1 = keep, 0 = prune

    std::size_t kept() const;
};

struct SparsityMask {
    std::vector<TensorMask> tensors;
    double target = 0.0;
    double achieved = 0.0;

    const TensorMask* find(std::string_view name) const;
};

/// Recomputes pruned / total over all masked tensors.
double achieved_sparsity(const SparsityMask& mask);

struct ScheduleParams {
    double initial = 0.0;     // s_i
    double final = 0.0;       // s_f
    std::int64_t start = 0;   // t0
    std::int64_t steps = 1;   // number of pruning steps
    std::int64_t interval = 1;
    int exponent = 3;
};

void validate(const ScheduleParams& params);

/// Staircase polynomial schedule: sparsity only changes on interval boundaries
/// and reaches `final` after `steps` intervals.
double schedule_sparsity(std::int64_t step, const ScheduleParams& params);

/// Prunes exactly floor(target * total) weights with the smallest magnitudes
/// across all prunable tensors. Ties go to the earlier tensor (bundle order),
/// then the lower flat index.
SparsityMask global_magnitude_mask(const TensorBundle& bundle, std::span<const std::string> prunable,
                                   double target);

/// Keeps the `n` largest magnitudes in every contiguous group of `m` along the
/// innermost dimension; ties keep the lower index.
std::vector<std::uint8_t> nm_mask(const Tensor& tensor, int n, int m);

SparsityMask nm_bundle_mask(const TensorBundle& bundle, std::span<const std::string> prunable, int n, int m);

/// Zeroes pruned weights; tensors without a mask pass through unchanged.
TensorBundle apply_mask(const TensorBundle& bundle, const SparsityMask& mask);

/// Masks as 0/1 float tensors under the weight names.
TensorBundle mask_to_bundle(const SparsityMask& mask);
SparsityMask mask_from_bundle(const TensorBundle& bundle);

enum class LayerKind { conv, dense };

struct LayerDescriptor {
    std::string name;
    LayerKind kind = LayerKind::dense;
    std::uint64_t output_positions = 1;  // H*W for conv, 1 for dense
    std::string weight;
};

/// Sum over layers of 2 * kept weights * output positions.
std::uint64_t flops_estimate(std::span<const LayerDescriptor> layers, const TensorBundle& bundle,
                             const SparsityMask* mask = nullptr);

std::vector<LayerDescriptor> load_layers(const std::filesystem::path& path);

} // namespace prunebias
