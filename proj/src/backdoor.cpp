#include "prunebias/backdoor.hpp"

#include "prunebias/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace prunebias {

ImageRGB grayscale(const ImageRGB& image) {
    ImageRGB out = image;
    for (std::size_t k = 0; k + 2 < out.pixels.size(); k += 3) {
        // Integer weights keep the half-up rounding exact.
        const std::uint32_t weighted =
            299u * out.pixels[k] + 587u * out.pixels[k + 1] + 114u * out.pixels[k + 2];
        const auto luma = static_cast<std::uint8_t>((weighted + 500u) / 1000u);
        out.pixels[k] = out.pixels[k + 1] = out.pixels[k + 2] = luma;
    }
    return out;
}

ImageRGB yellow_square(const ImageRGB& image, const SquareTrigger& trigger) {
    if (trigger.size < 0 || trigger.x < 0 || trigger.y < 0 || trigger.x + trigger.size > image.width ||
        trigger.y + trigger.size > image.height) {
        throw ArgumentError("trigger square of size " + std::to_string(trigger.size) + " at (" +
                            std::to_string(trigger.x) + "," + std::to_string(trigger.y) + ") exceeds " +
                            std::to_string(image.width) + "x" + std::to_string(image.height) + " image");
    }
    ImageRGB out = image;
    for (int y = trigger.y; y < trigger.y + trigger.size; ++y) {
        for (int x = trigger.x; x < trigger.x + trigger.size; ++x) {
            std::copy(trigger.color.begin(), trigger.color.end(), out.pixel(x, y));
        }
    }
    return out;
}

std::uint64_t splitmix64(std::uint64_t seed, std::uint64_t index) {
    std::uint64_t z = seed + (index + 1) * 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

std::vector<std::size_t> seeded_permutation(std::size_t n, std::uint64_t seed) {
    std::vector<std::uint64_t> key(n);
    for (std::size_t i = 0; i < n; ++i) key[i] = splitmix64(seed, i);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return key[a] < key[b] || (key[a] == key[b] && a < b); });
    return order;
}

BackdoorAssignment assign_backdoor(std::span<const std::uint8_t> labels, double pos_fraction, double neg_fraction,
                                   std::uint64_t seed) {
    if (!(pos_fraction >= 0.0 && pos_fraction <= 1.0 && neg_fraction >= 0.0 && neg_fraction <= 1.0)) {
        throw ArgumentError("backdoor fractions must lie in [0,1]");
    }
    BackdoorAssignment out{std::vector<std::uint8_t>(labels.size(), 0), pos_fraction, neg_fraction, seed};
    const auto positives = static_cast<std::size_t>(std::count_if(labels.begin(), labels.end(), [](auto v) { return v != 0; }));
    const std::size_t negatives = labels.size() - positives;
    auto quota_pos = static_cast<std::size_t>(std::llround(pos_fraction * static_cast<double>(positives)));
    auto quota_neg = static_cast<std::size_t>(std::llround(neg_fraction * static_cast<double>(negatives)));
    for (std::size_t i : seeded_permutation(labels.size(), seed)) {
        std::size_t& quota = labels[i] ? quota_pos : quota_neg;
        if (quota > 0) {
            out.flags[i] = 1;
            --quota;
        }
    }
    return out;
}

std::vector<std::uint8_t> assign_even_test(std::size_t n, std::uint64_t seed) {
    std::vector<std::uint8_t> flags(n, 0);
    const auto order = seeded_permutation(n, seed);
    for (std::size_t k = 0; k < n / 2; ++k) flags[order[k]] = 1;
    return flags;
}

std::string format_flags_csv(std::span<const std::string> sample_ids, std::span<const std::uint8_t> flags) {
    if (sample_ids.size() != flags.size()) throw AlignmentError("flag column does not match sample ids");
    std::string out = "sample_id,flag\n";
    for (std::size_t i = 0; i < flags.size(); ++i) out += sample_ids[i] + (flags[i] ? ",1\n" : ",0\n");
    return out;
}

std::vector<std::uint8_t> parse_flags_csv(std::string_view text, std::span<const std::string> sample_ids) {
    // A flag file is a one-column attribute table.
    const AttributeTable table = parse_attribute_table(text, Split::test, "flags");
    if (table.cols() != 1 || table.attributes()[0] != "flag") throw FormatError("flag file must have header sample_id,flag");
    std::vector<std::uint8_t> flags(sample_ids.size());
    for (std::size_t i = 0; i < sample_ids.size(); ++i) {
        auto row = table.find_sample(sample_ids[i]);
        if (!row) throw AlignmentError("flag file has no entry for sample '" + sample_ids[i] + "'");
        flags[i] = table.at(*row, 0);
    }
    if (table.rows() != sample_ids.size()) throw AlignmentError("flag file has samples outside the split");
    return flags;
}

} // namespace prunebias
