#include "prunebias/sparsity.hpp"

#include "prunebias/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace prunebias {

std::size_t TensorMask::kept() const {
    return static_cast<std::size_t>(std::count(keep.begin(), keep.end(), std::uint8_t{1}));
}

const TensorMask* SparsityMask::find(std::string_view name) const {
    for (const auto& t : tensors) {
        if (t.name == name) return &t;
    }
    return nullptr;
}

double achieved_sparsity(const SparsityMask& mask) {
    std::size_t total = 0;
    std::size_t kept = 0;
    for (const auto& t : mask.tensors) {
        total += t.keep.size();
        kept += t.kept();
    }
    return total ? static_cast<double>(total - kept) / static_cast<double>(total) : 0.0;
}

void validate(const ScheduleParams& p) {
    if (!(0.0 <= p.initial && p.initial <= p.final && p.final <= 1.0)) {
        throw ArgumentError("schedule: requires 0 <= initial <= final <= 1");
    }
    if (p.steps < 1) throw ArgumentError("schedule: requires at least one pruning step");
    if (p.interval < 1) throw ArgumentError("schedule: interval must be at least 1");
    if (p.exponent < 1) throw ArgumentError("schedule: exponent must be positive");
}

double schedule_sparsity(std::int64_t step, const ScheduleParams& p) {
    validate(p);
    if (step < p.start) return p.initial;
    const std::int64_t elapsed_intervals = (step - p.start) / p.interval;
    if (elapsed_intervals >= p.steps) return p.final;
    const double progress = static_cast<double>(elapsed_intervals) / static_cast<double>(p.steps);
    return p.final + (p.initial - p.final) * std::pow(1.0 - progress, p.exponent);
}

namespace {

struct Located {
    const Tensor* tensor;
    std::size_t bundle_index;
};

std::vector<Located> resolve_prunable(const TensorBundle& bundle, std::span<const std::string> prunable) {
    if (prunable.empty()) throw ArgumentError("no prunable tensors given");
    std::vector<Located> out;
    for (const auto& name : prunable) {
        auto index = bundle.index_of(name);
        if (!index) throw ArgumentError("prunable tensor '" + name + "' is not in the bundle");
        if (std::any_of(out.begin(), out.end(), [&](const Located& l) { return l.bundle_index == *index; })) {
            throw ArgumentError("prunable tensor '" + name + "' listed twice");
        }
        out.push_back({&bundle.tensors[*index], *index});
    }
    std::sort(out.begin(), out.end(), [](const Located& a, const Located& b) { return a.bundle_index < b.bundle_index; });
    return out;
}

} // namespace

SparsityMask global_magnitude_mask(const TensorBundle& bundle, std::span<const std::string> prunable,
                                   double target) {
    if (!(target >= 0.0 && target <= 1.0)) throw ArgumentError("target sparsity must lie in [0,1]");
    validate_bundle(bundle);
    const auto tensors = resolve_prunable(bundle, prunable);

    SparsityMask mask;
    mask.target = target;
    std::size_t total = 0;
    for (const auto& l : tensors) {
        mask.tensors.push_back({l.tensor->name, l.tensor->dims, std::vector<std::uint8_t>(l.tensor->data.size(), 1)});
        total += l.tensor->data.size();
    }
    const std::size_t prune_count = floor_fraction(target, total);

    if (prune_count > 0) {
        // Global positions are (tensor order, flat index), so comparing the
        // position breaks magnitude ties exactly as required.
        std::vector<float> magnitude;
        magnitude.reserve(total);
        std::vector<std::size_t> offset;
        for (const auto& l : tensors) {
            offset.push_back(magnitude.size());
            for (float w : l.tensor->data) magnitude.push_back(std::abs(w));
        }
        std::vector<std::uint32_t> order(total);
        std::iota(order.begin(), order.end(), 0u);
        auto smaller = [&](std::uint32_t a, std::uint32_t b) {
            return magnitude[a] < magnitude[b] || (magnitude[a] == magnitude[b] && a < b);
        };
        std::nth_element(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(prune_count - 1), order.end(),
                         smaller);
        for (std::size_t k = 0; k < prune_count; ++k) {
            const std::size_t pos = order[k];
            const auto t = static_cast<std::size_t>(std::upper_bound(offset.begin(), offset.end(), pos) - offset.begin()) - 1;
            mask.tensors[t].keep[pos - offset[t]] = 0;
        }
    }
    mask.achieved = achieved_sparsity(mask);
    return mask;
}

std::vector<std::uint8_t> nm_mask(const Tensor& tensor, int n, int m) {
    if (n < 1 || n > m) throw ArgumentError("N:M mask requires 1 <= N <= M");
    const std::uint64_t inner = tensor.dims.empty() ? 1 : tensor.dims.back();
    if (inner % static_cast<std::uint64_t>(m) != 0) {
        throw ArgumentError("tensor '" + tensor.name + "': innermost dimension " + std::to_string(inner) +
                            " is not divisible by M=" + std::to_string(m));
    }
    if (tensor.data.size() != tensor.element_count()) throw LengthError("tensor '" + tensor.name + "': bad length");

    std::vector<std::uint8_t> keep(tensor.data.size(), 0);
    std::vector<std::size_t> idx(static_cast<std::size_t>(m));
    for (std::size_t base = 0; base < tensor.data.size(); base += static_cast<std::size_t>(m)) {
        std::iota(idx.begin(), idx.end(), base);
        std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
            return std::abs(tensor.data[a]) > std::abs(tensor.data[b]);
        });
        for (int k = 0; k < n; ++k) keep[idx[static_cast<std::size_t>(k)]] = 1;
    }
    return keep;
}

SparsityMask nm_bundle_mask(const TensorBundle& bundle, std::span<const std::string> prunable, int n, int m) {
    validate_bundle(bundle);
    const auto tensors = resolve_prunable(bundle, prunable);
    SparsityMask mask;
    mask.target = 1.0 - static_cast<double>(n) / static_cast<double>(m);
    for (const auto& l : tensors) mask.tensors.push_back({l.tensor->name, l.tensor->dims, nm_mask(*l.tensor, n, m)});
    mask.achieved = achieved_sparsity(mask);
    return mask;
}

TensorBundle apply_mask(const TensorBundle& bundle, const SparsityMask& mask) {
    for (const auto& tm : mask.tensors) {
        const Tensor* t = bundle.find(tm.name);
        if (!t) throw ArgumentError("mask tensor '" + tm.name + "' is not in the bundle");
        if (t->dims != tm.dims || t->data.size() != tm.keep.size()) {
            throw ArgumentError("mask tensor '" + tm.name + "' does not match the weight shape");
        }
    }
    TensorBundle out = bundle;
    for (auto& t : out.tensors) {
        const TensorMask* tm = mask.find(t.name);
        if (!tm) continue;
        for (std::size_t k = 0; k < t.data.size(); ++k) {
            if (!tm->keep[k]) t.data[k] = 0.0f;
        }
    }
    return out;
}

TensorBundle mask_to_bundle(const SparsityMask& mask) {
    TensorBundle out;
    for (const auto& tm : mask.tensors) {
        Tensor t{tm.name, tm.dims, std::vector<float>(tm.keep.size())};
        std::transform(tm.keep.begin(), tm.keep.end(), t.data.begin(), [](std::uint8_t k) { return k ? 1.0f : 0.0f; });
        out.tensors.push_back(std::move(t));
    }
    return out;
}

SparsityMask mask_from_bundle(const TensorBundle& bundle) {
    validate_bundle(bundle);
    SparsityMask mask;
    for (const auto& t : bundle.tensors) {
        TensorMask tm{t.name, t.dims, std::vector<std::uint8_t>(t.data.size())};
        for (std::size_t k = 0; k < t.data.size(); ++k) {
            if (t.data[k] != 0.0f && t.data[k] != 1.0f) {
                throw ValueError("mask tensor '" + t.name + "' holds a value other than 0 or 1");
            }
            tm.keep[k] = t.data[k] == 1.0f;
        }
        mask.tensors.push_back(std::move(tm));
    }
    mask.achieved = achieved_sparsity(mask);
    mask.target = mask.achieved;
    return mask;
}

std::uint64_t flops_estimate(std::span<const LayerDescriptor> layers, const TensorBundle& bundle,
                             const SparsityMask* mask) {
    std::uint64_t flops = 0;
    for (const auto& layer : layers) {
        const Tensor* t = bundle.find(layer.weight);
        if (!t) throw ArgumentError("layer '" + layer.name + "' references missing tensor '" + layer.weight + "'");
        std::uint64_t nnz = t->element_count();
        if (mask) {
            if (const TensorMask* tm = mask->find(layer.weight)) nnz = tm->kept();
        }
        flops += 2 * nnz * layer.output_positions;
    }
    return flops;
}

std::vector<LayerDescriptor> load_layers(const std::filesystem::path& path) {
    std::vector<LayerDescriptor> layers;
    try {
        auto doc = nlohmann::json::parse(read_text_file(path));
        for (const auto& entry : doc.at("layers")) {
            LayerDescriptor l;
            l.name = entry.at("name").get<std::string>();
            const auto kind = entry.at("kind").get<std::string>();
            if (kind == "conv") {
                l.kind = LayerKind::conv;
            } else if (kind == "dense") {
                l.kind = LayerKind::dense;
            } else {
                throw FormatError("layer '" + l.name + "': kind must be conv or dense");
            }
            l.output_positions = entry.value("output_positions", std::uint64_t{1});
            if (l.output_positions == 0) throw FormatError("layer '" + l.name + "': output_positions must be positive");
            l.weight = entry.at("weight").get<std::string>();
            layers.push_back(std::move(l));
        }
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
    return layers;
}

} // namespace prunebias
