#pragma once

// On-disk formats and in-memory tables: label tables, prediction runs,
// run manifests, TBND tensor bundles and PPM images.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace prunebias {

enum class Split { train, val, test };

std::string_view to_string(Split split);
Split parse_split(std::string_view text);

enum class Method { dense, gmp_ri, gmp_pt, nm };

std::string_view to_string(Method method);
Method parse_method(std::string_view text);

/// Keep-N-of-M structured pattern.
struct NMPattern {
    int n = 0;
    int m = 0;

    friend bool operator==(const NMPattern&, const NMPattern&) = default;
};

NMPattern parse_nm(std::string_view text);

/// Binary matrix keyed by sample id (rows) and attribute name (columns).
/// Also used for hard prediction labels produced by thresholding.
class AttributeTable {
public:
    AttributeTable() = default;
    AttributeTable(Split split, std::vector<std::string> sample_ids,
                   std::vector<std::string> attributes, std::vector<std::uint8_t> values);

    Split split() const { return split_; }
    const std::vector<std::string>& sample_ids() const { return sample_ids_; }
    const std::vector<std::string>& attributes() const { return attributes_; }
    std::span<const std::uint8_t> values() const { return values_; }

    std::size_t rows() const { return sample_ids_.size(); }
    std::size_t cols() const { return attributes_.size(); }

    std::uint8_t at(std::size_t row, std::size_t col) const { return values_[row * cols() + col]; }

    bool has_attribute(std::string_view name) const;
    std::size_t attribute_index(std::string_view name) const;
    std::optional<std::size_t> find_sample(std::string_view id) const;

    std::vector<std::uint8_t> column(std::size_t col) const;
    std::vector<std::uint8_t> column(std::string_view name) const;

    friend bool operator==(const AttributeTable& a, const AttributeTable& b) {
        return a.split_ == b.split_ && a.sample_ids_ == b.sample_ids_ &&
               a.attributes_ == b.attributes_ && a.values_ == b.values_;
    }

private:
    Split split_ = Split::test;
    std::vector<std::string> sample_ids_;
    std::vector<std::string> attributes_;
    std::vector<std::uint8_t> values_;
    std::unordered_map<std::string, std::size_t> sample_index_;
    std::unordered_map<std::string, std::size_t> attribute_index_;
};

/// Metadata for one model run as declared in the manifest.
struct RunDescriptor {
    std::string run_id;
    Method method = Method::dense;
    double sparsity = 0.0;
    std::optional<NMPattern> nm;
    std::int64_t seed = 0;
    Split split = Split::test;
    std::filesystem::path predictions_path;
};

void validate_descriptor(const RunDescriptor& descriptor);

/// One model run's sigmoid scores, rows in the order of the label table for
/// its split and columns in label-table attribute order.
class PredictionRun {
public:
    PredictionRun() = default;
    PredictionRun(RunDescriptor descriptor, std::vector<std::string> sample_ids,
                  std::vector<std::string> attributes, std::vector<double> scores);

    const RunDescriptor& descriptor() const { return descriptor_; }
    const std::string& run_id() const { return descriptor_.run_id; }
    Method method() const { return descriptor_.method; }
    double sparsity() const { return descriptor_.sparsity; }
    Split split() const { return descriptor_.split; }
    std::int64_t seed() const { return descriptor_.seed; }

    const std::vector<std::string>& sample_ids() const { return sample_ids_; }
    const std::vector<std::string>& attributes() const { return attributes_; }
    std::span<const double> scores() const { return scores_; }

    std::size_t rows() const { return sample_ids_.size(); }
    std::size_t cols() const { return attributes_.size(); }
    double at(std::size_t row, std::size_t col) const { return scores_[row * cols() + col]; }

    bool has_attribute(std::string_view name) const;
    std::size_t attribute_index(std::string_view name) const;
    std::vector<double> column(std::size_t col) const;
    std::vector<double> column(std::string_view name) const;

private:
    RunDescriptor descriptor_;
    std::vector<std::string> sample_ids_;
    std::vector<std::string> attributes_;
    std::vector<double> scores_;
};

struct RunManifest {
    std::map<Split, std::filesystem::path> labels;
    std::vector<RunDescriptor> runs;
    std::vector<std::string> categories;

    const RunDescriptor& run(std::string_view run_id) const;
};

/// Relative paths resolve against the manifest's directory. Every referenced
/// file must exist.
RunManifest load_manifest(const std::filesystem::path& path);

/// Every category must be an attribute of the table.
void validate_categories(const std::vector<std::string>& categories, const AttributeTable& table);

AttributeTable load_attribute_table(const std::filesystem::path& path, Split split);
AttributeTable parse_attribute_table(std::string_view text, Split split,
                                     std::string_view source = "<memory>");
void write_attribute_table(const AttributeTable& table, const std::filesystem::path& path);
std::string format_attribute_table(const AttributeTable& table);

/// Loads a run and aligns it to `labels` by sample id and attribute name.
/// The run may cover a subset of the label attributes but must cover every sample.
PredictionRun load_prediction_run(const std::filesystem::path& path, const RunDescriptor& descriptor,
                                  const AttributeTable& labels);
PredictionRun parse_prediction_run(std::string_view text, const RunDescriptor& descriptor,
                                   const AttributeTable& labels, std::string_view source = "<memory>");
void write_prediction_run(const PredictionRun& run, const std::filesystem::path& path);
std::string format_prediction_run(const PredictionRun& run);

struct ContingencyCounts {
    std::int64_t n11 = 0;  // X=1, I=1
    std::int64_t n10 = 0;  // X=1, I=0
    std::int64_t n01 = 0;  // X=0, I=1
    std::int64_t n00 = 0;  // X=0, I=0

    std::int64_t total() const { return n11 + n10 + n01 + n00; }

    friend bool operator==(const ContingencyCounts&, const ContingencyCounts&) = default;
};

ContingencyCounts contingency(std::span<const std::uint8_t> x, std::span<const std::uint8_t> identity);

// --- TBND tensor bundles --------------------------------------------------

struct Tensor {
    std::string name;
    std::vector<std::uint64_t> dims;
    std::vector<float> data;

    std::size_t element_count() const;
};

struct TensorBundle {
    std::vector<Tensor> tensors;

    const Tensor& get(std::string_view name) const;
    const Tensor* find(std::string_view name) const;
    std::optional<std::size_t> index_of(std::string_view name) const;
};

/// Checks data length against dims and name uniqueness.
void validate_bundle(const TensorBundle& bundle);

std::vector<std::uint8_t> serialize_tensor_bundle(const TensorBundle& bundle);
TensorBundle deserialize_tensor_bundle(std::span<const std::uint8_t> bytes);
TensorBundle read_tensor_bundle(const std::filesystem::path& path);
void write_tensor_bundle(const TensorBundle& bundle, const std::filesystem::path& path);

// --- PPM images ------------------------------------------------------------

struct ImageRGB {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> pixels;  // row-major RGB triples

    ImageRGB() = default;
    ImageRGB(int width, int height);

    std::uint8_t* pixel(int x, int y) { return &pixels[3 * (static_cast<std::size_t>(y) * width + x)]; }
    const std::uint8_t* pixel(int x, int y) const {
        return &pixels[3 * (static_cast<std::size_t>(y) * width + x)];
    }

    friend bool operator==(const ImageRGB&, const ImageRGB&) = default;
};

ImageRGB parse_ppm(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> serialize_ppm(const ImageRGB& image);
ImageRGB read_ppm(const std::filesystem::path& path);
void write_ppm(const ImageRGB& image, const std::filesystem::path& path);

// --- small helpers shared across modules -----------------------------------

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view text);

/// Shortest decimal representation that round-trips the double.
std::string format_real(double value);

/// floor(fraction * n), tolerant of representation error in `fraction`
/// (0.29 * 100 is 28.999999999999996 in binary).
std::size_t floor_fraction(double fraction, std::size_t n);

} // namespace prunebias
