#pragma once

// Backdoor data preparation: trigger transforms on images and seeded
// backdoor assignments for the training and test splits.

#include "prunebias/data_model.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace prunebias {

/// BT.601 luminance, rounded half up, written to all three channels.
ImageRGB grayscale(const ImageRGB& image);

struct SquareTrigger {
    int size = 20;
    int x = 5;
    int y = 5;
    std::array<std::uint8_t, 3> color{255, 255, 0};
};

ImageRGB yellow_square(const ImageRGB& image, const SquareTrigger& trigger = {});

/// SplitMix64 output for position `index` of the stream seeded with `seed`:
/// mix(seed + (index + 1) * 0x9E3779B97F4A7C15) with the standard finaliser.
std::uint64_t splitmix64(std::uint64_t seed, std::uint64_t index);

/// Indices ordered by ascending (splitmix64(seed, index), index).
std::vector<std::size_t> seeded_permutation(std::size_t n, std::uint64_t seed);

struct BackdoorAssignment {
    std::vector<std::uint8_t> flags;
    double pos_fraction = 0.0;
    double neg_fraction = 0.0;
    std::uint64_t seed = 0;
};

/// Within each label class, flags the first round(fraction * class size)
/// samples of the seeded permutation.
BackdoorAssignment assign_backdoor(std::span<const std::uint8_t> labels, double pos_fraction, double neg_fraction,
                                   std::uint64_t seed);

/// Flags floor(n / 2) samples regardless of label.
std::vector<std::uint8_t> assign_even_test(std::size_t n, std::uint64_t seed);

/// `sample_id,flag` rows.
std::string format_flags_csv(std::span<const std::string> sample_ids, std::span<const std::uint8_t> flags);
std::vector<std::uint8_t> parse_flags_csv(std::string_view text, std::span<const std::string> sample_ids);

} // namespace prunebias
