#include "prunebias/data_model.hpp"

#include "prunebias/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <bit>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iterator>
#include <sstream>
#include <unordered_set>

namespace prunebias {

namespace fs = std::filesystem;

std::string_view to_string(Split split) {
    switch (split) {
        case Split::train: return "train";
        case Split::val: return "val";
        case Split::test: return "test";
    }
    return "test";
}

Split parse_split(std::string_view text) {
    if (text == "train") return Split::train;
    if (text == "val") return Split::val;
    if (text == "test") return Split::test;
    throw FormatError("unknown split '" + std::string(text) + "'");
}

std::string_view to_string(Method method) {
    switch (method) {
        case Method::dense: return "dense";
        case Method::gmp_ri: return "gmp_ri";
        case Method::gmp_pt: return "gmp_pt";
        case Method::nm: return "nm";
    }
    return "dense";
}

Method parse_method(std::string_view text) {
    if (text == "dense") return Method::dense;
    if (text == "gmp_ri") return Method::gmp_ri;
    if (text == "gmp_pt") return Method::gmp_pt;
    if (text == "nm") return Method::nm;
    throw FormatError("unknown method '" + std::string(text) + "'");
}

namespace {

template <typename Int>
Int parse_int(std::string_view text, std::string_view what) {
    Int value{};
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size()) {
        throw FormatError("invalid integer '" + std::string(text) + "' for " + std::string(what));
    }
    return value;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

struct CsvRow {
    std::size_t line = 0;
    std::vector<std::string_view> cells;
};

/// Splits plain comma-separated text. Quoting is not part of the format.
std::vector<CsvRow> split_csv(std::string_view text) {
    std::vector<CsvRow> rows;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    if (text.starts_with("\xEF\xBB\xBF")) pos = 3;
    while (pos <= text.size()) {
        std::size_t end = text.find('\n', pos);
        if (end == std::string_view::npos) end = text.size();
        std::string_view line = text.substr(pos, end - pos);
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (!trim(line).empty()) {
            CsvRow row{line_no, {}};
            std::size_t start = 0;
            while (true) {
                std::size_t comma = line.find(',', start);
                row.cells.push_back(trim(line.substr(start, comma - start)));
                if (comma == std::string_view::npos) break;
                start = comma + 1;
            }
            rows.push_back(std::move(row));
        }
        if (end == text.size()) break;
        pos = end + 1;
    }
    return rows;
}

std::string at_line(std::string_view source, std::size_t line) {
    return std::string(source) + ":" + std::to_string(line) + ": ";
}

struct ParsedHeader {
    std::vector<std::string> attributes;
};

ParsedHeader parse_header(const std::vector<CsvRow>& rows, std::string_view source) {
    if (rows.empty()) throw FormatError(std::string(source) + ": empty CSV");
    const CsvRow& header = rows.front();
    if (header.cells.empty() || header.cells[0] != "sample_id") {
        throw FormatError(at_line(source, header.line) + "header must start with 'sample_id'");
    }
    ParsedHeader parsed;
    std::unordered_set<std::string_view> seen;
    for (std::size_t c = 1; c < header.cells.size(); ++c) {
        std::string_view name = header.cells[c];
        if (name.empty()) throw FormatError(at_line(source, header.line) + "empty attribute name");
        if (!seen.insert(name).second) {
            throw UniquenessError(at_line(source, header.line) + "duplicate attribute '" +
                                  std::string(name) + "'");
        }
        parsed.attributes.emplace_back(name);
    }
    return parsed;
}

void check_width(const CsvRow& row, std::size_t width, std::string_view source) {
    if (row.cells.size() != width) {
        throw FormatError(at_line(source, row.line) + "expected " + std::to_string(width) +
                          " cells, found " + std::to_string(row.cells.size()));
    }
}

} // namespace

NMPattern parse_nm(std::string_view text) {
    auto colon = text.find(':');
    if (colon == std::string_view::npos) throw FormatError("N:M pattern must look like '2:4'");
    NMPattern p{parse_int<int>(text.substr(0, colon), "N"), parse_int<int>(text.substr(colon + 1), "M")};
    if (p.n < 1 || p.n > p.m) throw ValueError("N:M pattern requires 1 <= N <= M");
    return p;
}

// --- AttributeTable ---------------------------------------------------------

AttributeTable::AttributeTable(Split split, std::vector<std::string> sample_ids,
                               std::vector<std::string> attributes, std::vector<std::uint8_t> values)
    : split_(split),
      sample_ids_(std::move(sample_ids)),
      attributes_(std::move(attributes)),
      values_(std::move(values)) {
    if (values_.size() != sample_ids_.size() * attributes_.size()) {
        throw ArgumentError("attribute table dimensions do not match value count");
    }
    for (std::size_t i = 0; i < sample_ids_.size(); ++i) {
        if (!sample_index_.emplace(sample_ids_[i], i).second) {
            throw UniquenessError("duplicate sample_id '" + sample_ids_[i] + "'");
        }
    }
    for (std::size_t j = 0; j < attributes_.size(); ++j) {
        if (!attribute_index_.emplace(attributes_[j], j).second) {
            throw UniquenessError("duplicate attribute '" + attributes_[j] + "'");
        }
    }
    for (std::size_t k = 0; k < values_.size(); ++k) {
        if (values_[k] > 1) {
            throw ValueError("non-binary value at row " + std::to_string(k / attributes_.size()) +
                             ", column '" + attributes_[k % attributes_.size()] + "'");
        }
    }
}

bool AttributeTable::has_attribute(std::string_view name) const {
    return attribute_index_.contains(std::string(name));
}

std::size_t AttributeTable::attribute_index(std::string_view name) const {
    auto it = attribute_index_.find(std::string(name));
    if (it == attribute_index_.end()) throw ArgumentError("unknown attribute '" + std::string(name) + "'");
    return it->second;
}

std::optional<std::size_t> AttributeTable::find_sample(std::string_view id) const {
    auto it = sample_index_.find(std::string(id));
    if (it == sample_index_.end()) return std::nullopt;
    return it->second;
}

std::vector<std::uint8_t> AttributeTable::column(std::size_t col) const {
    std::vector<std::uint8_t> out(rows());
    for (std::size_t r = 0; r < rows(); ++r) out[r] = at(r, col);
    return out;
}

std::vector<std::uint8_t> AttributeTable::column(std::string_view name) const {
    return column(attribute_index(name));
}

AttributeTable parse_attribute_table(std::string_view text, Split split, std::string_view source) {
    auto rows = split_csv(text);
    auto header = parse_header(rows, source);
    const std::size_t width = header.attributes.size() + 1;

    std::vector<std::string> ids;
    std::vector<std::uint8_t> values;
    std::unordered_set<std::string_view> seen;
    ids.reserve(rows.size() - 1);
    values.reserve((rows.size() - 1) * header.attributes.size());
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const CsvRow& row = rows[r];
        check_width(row, width, source);
        if (row.cells[0].empty()) throw FormatError(at_line(source, row.line) + "empty sample_id");
        if (!seen.insert(row.cells[0]).second) {
            throw UniquenessError(at_line(source, row.line) + "duplicate sample_id '" +
                                  std::string(row.cells[0]) + "'");
        }
        ids.emplace_back(row.cells[0]);
        for (std::size_t c = 1; c < width; ++c) {
            std::string_view cell = row.cells[c];
            if (cell == "0") {
                values.push_back(0);
            } else if (cell == "1") {
                values.push_back(1);
            } else {
                throw ValueError(at_line(source, row.line) + "non-binary value '" + std::string(cell) +
                                 "' in row '" + std::string(row.cells[0]) + "', column '" +
                                 header.attributes[c - 1] + "'");
            }
        }
    }
    return AttributeTable(split, std::move(ids), std::move(header.attributes), std::move(values));
}

AttributeTable load_attribute_table(const fs::path& path, Split split) {
    return parse_attribute_table(read_text_file(path), split, path.string());
}

std::string format_attribute_table(const AttributeTable& table) {
    std::string out = "sample_id";
    for (const auto& a : table.attributes()) out += "," + a;
    out += "\n";
    for (std::size_t r = 0; r < table.rows(); ++r) {
        out += table.sample_ids()[r];
        for (std::size_t c = 0; c < table.cols(); ++c) {
            out += table.at(r, c) ? ",1" : ",0";
        }
        out += "\n";
    }
    return out;
}

void write_attribute_table(const AttributeTable& table, const fs::path& path) {
    write_text_file(path, format_attribute_table(table));
}

// --- PredictionRun ----------------------------------------------------------

void validate_descriptor(const RunDescriptor& d) {
    if (!(d.sparsity >= 0.0 && d.sparsity <= 1.0)) {
        throw ValueError("run '" + d.run_id + "': sparsity must lie in [0,1]");
    }
    if ((d.sparsity == 0.0) != (d.method == Method::dense)) {
        throw ValueError("run '" + d.run_id + "': sparsity is 0 exactly when method is dense");
    }
    if (d.nm.has_value() != (d.method == Method::nm)) {
        throw ValueError("run '" + d.run_id + "': N:M pattern is required for, and only for, method nm");
    }
    if (d.nm && (d.nm->n < 1 || d.nm->n > d.nm->m)) {
        throw ValueError("run '" + d.run_id + "': N:M pattern requires 1 <= N <= M");
    }
}

PredictionRun::PredictionRun(RunDescriptor descriptor, std::vector<std::string> sample_ids,
                             std::vector<std::string> attributes, std::vector<double> scores)
    : descriptor_(std::move(descriptor)),
      sample_ids_(std::move(sample_ids)),
      attributes_(std::move(attributes)),
      scores_(std::move(scores)) {
    validate_descriptor(descriptor_);
    if (scores_.size() != sample_ids_.size() * attributes_.size()) {
        throw ArgumentError("prediction run dimensions do not match score count");
    }
    for (std::size_t k = 0; k < scores_.size(); ++k) {
        if (!(scores_[k] >= 0.0 && scores_[k] <= 1.0)) {
            throw ValueError("run '" + descriptor_.run_id + "': score outside [0,1] for sample '" +
                             sample_ids_[k / attributes_.size()] + "'");
        }
    }
}

bool PredictionRun::has_attribute(std::string_view name) const {
    return std::find(attributes_.begin(), attributes_.end(), name) != attributes_.end();
}

std::size_t PredictionRun::attribute_index(std::string_view name) const {
    auto it = std::find(attributes_.begin(), attributes_.end(), name);
    if (it == attributes_.end()) {
        throw ArgumentError("run '" + run_id() + "' has no attribute '" + std::string(name) + "'");
    }
    return static_cast<std::size_t>(it - attributes_.begin());
}

std::vector<double> PredictionRun::column(std::size_t col) const {
    std::vector<double> out(rows());
    for (std::size_t r = 0; r < rows(); ++r) out[r] = at(r, col);
    return out;
}

std::vector<double> PredictionRun::column(std::string_view name) const {
    return column(attribute_index(name));
}

PredictionRun parse_prediction_run(std::string_view text, const RunDescriptor& descriptor,
                                   const AttributeTable& labels, std::string_view source) {
    validate_descriptor(descriptor);
    if (labels.split() != descriptor.split) {
        throw AlignmentError("run '" + descriptor.run_id + "' declares split '" +
                             std::string(to_string(descriptor.split)) + "' but labels are for '" +
                             std::string(to_string(labels.split())) + "'");
    }
    auto rows = split_csv(text);
    auto header = parse_header(rows, source);
    const std::size_t width = header.attributes.size() + 1;

    // Columns follow label-table order restricted to attributes the run covers.
    std::vector<std::size_t> file_col_of_label(labels.cols(), SIZE_MAX);
    for (std::size_t c = 0; c < header.attributes.size(); ++c) {
        if (!labels.has_attribute(header.attributes[c])) {
            throw AlignmentError(std::string(source) + ": attribute '" + header.attributes[c] +
                                 "' is not in the label table");
        }
        file_col_of_label[labels.attribute_index(header.attributes[c])] = c;
    }
    std::vector<std::string> attributes;
    std::vector<std::size_t> file_cols;
    for (std::size_t j = 0; j < labels.cols(); ++j) {
        if (file_col_of_label[j] != SIZE_MAX) {
            attributes.push_back(labels.attributes()[j]);
            file_cols.push_back(file_col_of_label[j]);
        }
    }

    const std::size_t cols = attributes.size();
    std::vector<double> scores(labels.rows() * cols);
    std::vector<char> filled(labels.rows(), 0);
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const CsvRow& row = rows[r];
        check_width(row, width, source);
        auto target = labels.find_sample(row.cells[0]);
        if (!target) {
            throw AlignmentError(at_line(source, row.line) + "sample '" + std::string(row.cells[0]) +
                                 "' is not in the label table");
        }
        if (filled[*target]) {
            throw UniquenessError(at_line(source, row.line) + "duplicate sample_id '" +
                                  std::string(row.cells[0]) + "'");
        }
        filled[*target] = 1;
        for (std::size_t k = 0; k < cols; ++k) {
            std::string_view cell = row.cells[file_cols[k] + 1];
            double value = 0.0;
            auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
            if (ec != std::errc{} || ptr != cell.data() + cell.size()) {
                throw FormatError(at_line(source, row.line) + "invalid number '" + std::string(cell) + "'");
            }
            if (!(value >= 0.0 && value <= 1.0)) {
                throw ValueError(at_line(source, row.line) + "score " + std::string(cell) +
                                 " outside [0,1] for sample '" + std::string(row.cells[0]) +
                                 "', attribute '" + attributes[k] + "'");
            }
            scores[*target * cols + k] = value;
        }
    }

    std::string missing;
    std::size_t missing_count = 0;
    for (std::size_t i = 0; i < labels.rows(); ++i) {
        if (!filled[i]) {
            if (missing_count < 20) missing += (missing.empty() ? "" : ", ") + labels.sample_ids()[i];
            ++missing_count;
        }
    }
    if (missing_count > 0) {
        if (missing_count > 20) missing += ", ... (" + std::to_string(missing_count) + " total)";
        throw AlignmentError(std::string(source) + ": samples missing from run: " + missing);
    }
    return PredictionRun(descriptor, labels.sample_ids(), std::move(attributes), std::move(scores));
}

PredictionRun load_prediction_run(const fs::path& path, const RunDescriptor& descriptor,
                                  const AttributeTable& labels) {
    return parse_prediction_run(read_text_file(path), descriptor, labels, path.string());
}

std::string format_prediction_run(const PredictionRun& run) {
    std::string out = "sample_id";
    for (const auto& a : run.attributes()) out += "," + a;
    out += "\n";
    for (std::size_t r = 0; r < run.rows(); ++r) {
        out += run.sample_ids()[r];
        for (std::size_t c = 0; c < run.cols(); ++c) out += "," + format_real(run.at(r, c));
        out += "\n";
    }
    return out;
}

void write_prediction_run(const PredictionRun& run, const fs::path& path) {
    write_text_file(path, format_prediction_run(run));
}

// --- Manifest ----------------------------------------------------------------

const RunDescriptor& RunManifest::run(std::string_view run_id) const {
    for (const auto& r : runs) {
        if (r.run_id == run_id) return r;
    }
    throw ArgumentError("manifest has no run '" + std::string(run_id) + "'");
}

RunManifest load_manifest(const fs::path& path) {
    using nlohmann::json;
    json doc;
    try {
        doc = json::parse(read_text_file(path));
    } catch (const json::parse_error& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
    const fs::path base = path.parent_path();
    auto resolve = [&](const std::string& p) {
        fs::path resolved = fs::path(p).is_absolute() ? fs::path(p) : base / p;
        if (!fs::exists(resolved)) {
            throw FormatError(path.string() + ": referenced file does not exist: " + resolved.string());
        }
        return resolved;
    };

    RunManifest manifest;
    try {
        for (const auto& [split, file] : doc.at("labels").items()) {
            manifest.labels[parse_split(split)] = resolve(file.get<std::string>());
        }
        std::unordered_set<std::string> ids;
        for (const auto& entry : doc.at("runs")) {
            RunDescriptor d;
            d.run_id = entry.at("run_id").get<std::string>();
            d.method = parse_method(entry.at("method").get<std::string>());
            d.sparsity = entry.at("sparsity").get<double>();
            d.seed = entry.at("seed").get<std::int64_t>();
            d.split = parse_split(entry.at("split").get<std::string>());
            d.predictions_path = resolve(entry.at("predictions_path").get<std::string>());
            if (entry.contains("nm") && !entry.at("nm").is_null()) {
                const auto& nm = entry.at("nm");
                if (nm.is_string()) {
                    d.nm = parse_nm(nm.get<std::string>());
                } else {
                    d.nm = NMPattern{nm.at(0).get<int>(), nm.at(1).get<int>()};
                }
            }
            validate_descriptor(d);
            if (!ids.insert(d.run_id).second) throw UniquenessError("duplicate run_id '" + d.run_id + "'");
            if (!manifest.labels.contains(d.split)) {
                throw FormatError("run '" + d.run_id + "' uses split '" + std::string(to_string(d.split)) +
                                  "' which has no labels file");
            }
            manifest.runs.push_back(std::move(d));
        }
        if (doc.contains("categories")) {
            manifest.categories = doc.at("categories").get<std::vector<std::string>>();
        }
    } catch (const json::exception& e) {
        throw FormatError(path.string() + ": " + e.what());
    } catch (const Error& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
    return manifest;
}

void validate_categories(const std::vector<std::string>& categories, const AttributeTable& table) {
    for (const auto& c : categories) {
        if (!table.has_attribute(c)) throw ArgumentError("category '" + c + "' is not an attribute");
    }
}

// --- Contingency --------------------------------------------------------------

ContingencyCounts contingency(std::span<const std::uint8_t> x, std::span<const std::uint8_t> identity) {
    if (x.size() != identity.size()) {
        throw AlignmentError("contingency: columns differ in length (" + std::to_string(x.size()) + " vs " +
                             std::to_string(identity.size()) + ")");
    }
    ContingencyCounts c;
    for (std::size_t k = 0; k < x.size(); ++k) {
        if (x[k]) {
            identity[k] ? ++c.n11 : ++c.n10;
        } else {
            identity[k] ? ++c.n01 : ++c.n00;
        }
    }
    return c;
}

// --- TBND ---------------------------------------------------------------------

std::size_t Tensor::element_count() const {
    std::size_t n = 1;
    for (auto d : dims) n *= static_cast<std::size_t>(d);
    return n;
}

const Tensor* TensorBundle::find(std::string_view name) const {
    for (const auto& t : tensors) {
        if (t.name == name) return &t;
    }
    return nullptr;
}

const Tensor& TensorBundle::get(std::string_view name) const {
    if (const Tensor* t = find(name)) return *t;
    throw ArgumentError("bundle has no tensor '" + std::string(name) + "'");
}

std::optional<std::size_t> TensorBundle::index_of(std::string_view name) const {
    for (std::size_t i = 0; i < tensors.size(); ++i) {
        if (tensors[i].name == name) return i;
    }
    return std::nullopt;
}

void validate_bundle(const TensorBundle& bundle) {
    std::unordered_set<std::string_view> names;
    for (const auto& t : bundle.tensors) {
        if (!names.insert(t.name).second) throw UniquenessError("duplicate tensor name '" + t.name + "'");
        if (t.data.size() != t.element_count()) {
            throw LengthError("tensor '" + t.name + "': data length " + std::to_string(t.data.size()) +
                              " does not match dims product " + std::to_string(t.element_count()));
        }
        if (t.name.size() > 0xFFFF) throw FormatError("tensor name too long");
        if (t.dims.size() > 0xFF) throw FormatError("tensor '" + t.name + "' has too many dimensions");
    }
}

namespace {

constexpr std::uint32_t kBundleVersion = 1;
constexpr std::uint8_t kDtypeFloat32 = 0;

class ByteWriter {
public:
    void u8(std::uint8_t v) { out_.push_back(v); }
    void u16(std::uint16_t v) { put(v, 2); }
    void u32(std::uint32_t v) { put(v, 4); }
    void u64(std::uint64_t v) { put(v, 8); }
    void bytes(std::string_view s) { out_.insert(out_.end(), s.begin(), s.end()); }
    std::vector<std::uint8_t> take() { return std::move(out_); }

private:
    void put(std::uint64_t v, int width) {
        for (int i = 0; i < width; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    std::vector<std::uint8_t> out_;
};

class ByteReader {
public:
    explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

    std::uint8_t u8() { return static_cast<std::uint8_t>(get(1)); }
    std::uint16_t u16() { return static_cast<std::uint16_t>(get(2)); }
    std::uint32_t u32() { return static_cast<std::uint32_t>(get(4)); }
    std::uint64_t u64() { return get(8); }
    std::string str(std::size_t n) {
        need(n);
        std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
        pos_ += n;
        return s;
    }
    std::size_t remaining() const { return bytes_.size() - pos_; }

private:
    void need(std::size_t n) const {
        if (remaining() < n) throw LengthError("tensor bundle truncated at byte " + std::to_string(pos_));
    }
    std::uint64_t get(int width) {
        need(static_cast<std::size_t>(width));
        std::uint64_t v = 0;
        for (int i = 0; i < width; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
        pos_ += static_cast<std::size_t>(width);
        return v;
    }
    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 0;
};

} // namespace

std::vector<std::uint8_t> serialize_tensor_bundle(const TensorBundle& bundle) {
    validate_bundle(bundle);
    ByteWriter w;
    w.bytes("TBND");
    w.u32(kBundleVersion);
    w.u32(static_cast<std::uint32_t>(bundle.tensors.size()));
    for (const auto& t : bundle.tensors) {
        w.u16(static_cast<std::uint16_t>(t.name.size()));
        w.bytes(t.name);
        w.u8(kDtypeFloat32);
        w.u8(static_cast<std::uint8_t>(t.dims.size()));
        for (auto d : t.dims) w.u64(d);
        for (float v : t.data) w.u32(std::bit_cast<std::uint32_t>(v));
    }
    return w.take();
}

TensorBundle deserialize_tensor_bundle(std::span<const std::uint8_t> bytes) {
    ByteReader r(bytes);
    if (bytes.size() < 4 || r.str(4) != "TBND") throw FormatError("tensor bundle: bad magic");
    if (auto version = r.u32(); version != kBundleVersion) {
        throw FormatError("tensor bundle: unsupported version " + std::to_string(version));
    }
    const std::uint32_t count = r.u32();
    TensorBundle bundle;
    for (std::uint32_t i = 0; i < count; ++i) {
        Tensor t;
        t.name = r.str(r.u16());
        if (auto dtype = r.u8(); dtype != kDtypeFloat32) {
            throw FormatError("tensor '" + t.name + "': unsupported dtype " + std::to_string(dtype));
        }
        const std::uint8_t ndim = r.u8();
        std::uint64_t elements = 1;
        for (std::uint8_t d = 0; d < ndim; ++d) {
            t.dims.push_back(r.u64());
            elements *= t.dims.back();
        }
        if (elements > r.remaining() / 4) {
            throw LengthError("tensor '" + t.name + "': declares " + std::to_string(elements) +
                              " floats but only " + std::to_string(r.remaining() / 4) + " remain");
        }
        t.data.resize(static_cast<std::size_t>(elements));
        for (auto& v : t.data) v = std::bit_cast<float>(r.u32());
        bundle.tensors.push_back(std::move(t));
    }
    if (r.remaining() != 0) throw FormatError("tensor bundle: trailing bytes after last tensor");
    validate_bundle(bundle);
    return bundle;
}

TensorBundle read_tensor_bundle(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    try {
        return deserialize_tensor_bundle(bytes);
    } catch (const LengthError& e) {
        throw LengthError(path.string() + ": " + e.what());
    } catch (const FormatError& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

void write_tensor_bundle(const TensorBundle& bundle, const fs::path& path) {
    auto bytes = serialize_tensor_bundle(bundle);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

// --- PPM ------------------------------------------------------------------------

ImageRGB::ImageRGB(int w, int h) : width(w), height(h), pixels(3 * static_cast<std::size_t>(w) * h, 0) {
    if (w <= 0 || h <= 0) throw ArgumentError("image dimensions must be positive");
}

ImageRGB parse_ppm(std::span<const std::uint8_t> bytes) {
    std::size_t pos = 0;
    auto skip_space = [&] {
        while (pos < bytes.size()) {
            if (bytes[pos] == '#') {
                while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
            } else if (std::isspace(bytes[pos])) {
                ++pos;
            } else {
                break;
            }
        }
    };
    auto token = [&] {
        skip_space();
        std::string t;
        while (pos < bytes.size() && !std::isspace(bytes[pos]) && bytes[pos] != '#') {
            t.push_back(static_cast<char>(bytes[pos++]));
        }
        if (t.empty()) throw FormatError("PPM: truncated header");
        return t;
    };
    if (token() != "P6") throw FormatError("PPM: only binary P6 images are supported");
    const int width = parse_int<int>(token(), "PPM width");
    const int height = parse_int<int>(token(), "PPM height");
    if (parse_int<int>(token(), "PPM maxval") != 255) throw FormatError("PPM: maxval must be 255");
    if (pos >= bytes.size() || !std::isspace(bytes[pos])) throw FormatError("PPM: truncated header");
    ++pos;
    if (width <= 0 || height <= 0) throw FormatError("PPM: dimensions must be positive");
    ImageRGB image(width, height);
    if (bytes.size() - pos < image.pixels.size()) throw LengthError("PPM: pixel data truncated");
    std::copy_n(bytes.begin() + static_cast<std::ptrdiff_t>(pos), image.pixels.size(), image.pixels.begin());
    return image;
}

std::vector<std::uint8_t> serialize_ppm(const ImageRGB& image) {
    if (image.pixels.size() != 3 * static_cast<std::size_t>(image.width) * image.height) {
        throw ArgumentError("image pixel buffer does not match dimensions");
    }
    std::string header = "P6\n" + std::to_string(image.width) + " " + std::to_string(image.height) + "\n255\n";
    std::vector<std::uint8_t> out(header.begin(), header.end());
    out.insert(out.end(), image.pixels.begin(), image.pixels.end());
    return out;
}

ImageRGB read_ppm(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse_ppm(bytes);
}

void write_ppm(const ImageRGB& image, const fs::path& path) {
    auto bytes = serialize_ppm(image);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

// --- helpers ----------------------------------------------------------------------

std::string read_text_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file(const fs::path& path, std::string_view text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot write " + path.string());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
}

std::string format_real(double value) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
    return std::string(buf, ptr);
}

std::size_t floor_fraction(double fraction, std::size_t n) {
    const double scaled = fraction * static_cast<double>(n);
    const double nearest = std::round(scaled);
    if (std::abs(scaled - nearest) <= 1e-9 * std::max(1.0, std::abs(scaled))) {
        return static_cast<std::size_t>(nearest);
    }
    return static_cast<std::size_t>(std::floor(scaled));
}

} // namespace prunebias
