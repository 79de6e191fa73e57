#include "prunebias/report.hpp"

#include "prunebias/bias_amplification.hpp"
#include "prunebias/errors.hpp"
#include "prunebias/interdependence.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <map>
#include <mutex>
#include <numeric>
#include <thread>

namespace prunebias {

double quantile_sorted(std::span<const double> sorted, double q) {
    if (sorted.empty()) throw EmptyInputError("quantile: empty input");
    const double h = (static_cast<double>(sorted.size()) - 1.0) * q;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    if (lo + 1 >= sorted.size()) return sorted.back();
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[lo + 1] - sorted[lo]);
}

BoxplotSummary boxplot_stats(std::span<const double> values) {
    if (values.empty()) throw EmptyInputError("boxplot_stats: empty input");
    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    BoxplotSummary s;
    s.q25 = quantile_sorted(sorted, 0.25);
    s.median = quantile_sorted(sorted, 0.5);
    s.q75 = quantile_sorted(sorted, 0.75);
    s.mean = std::accumulate(sorted.begin(), sorted.end(), 0.0) / static_cast<double>(sorted.size());
    // Distances are absolute so a mean outside the box cannot invert a whisker.
    const double upper = s.mean + 2.5 * std::fabs(s.q75 - s.mean);
    const double lower = s.mean - 2.5 * std::fabs(s.mean - s.q25);
    for (double v : values) {
        if (v > upper || v < lower) s.outliers.push_back(v);
    }
    return s;
}

Aggregate aggregate(std::span<const double> values) {
    if (values.empty()) throw EmptyInputError("aggregate: empty input");
    Aggregate a;
    const double n = static_cast<double>(values.size());
    a.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
    if (values.size() >= 2) {
        double ss = 0.0;
        for (double v : values) ss += (v - a.mean) * (v - a.mean);
        a.std = std::sqrt(ss / (n - 1.0));
    }
    return a;
}

double report_round(double value) {
    if (!std::isfinite(value)) return value;
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.10g", value);
    return std::strtod(buf, nullptr);
}

// --- aggregation -------------------------------------------------------------------

namespace {

GroupKey group_of(const RunDescriptor& d) { return {d.method, d.sparsity, d.nm, d.split}; }

std::string nm_text(const std::optional<NMPattern>& nm) {
    return nm ? std::to_string(nm->n) + ":" + std::to_string(nm->m) : std::string();
}

} // namespace

std::vector<AggregateCell> aggregate_runs(std::span<const RunReport> runs) {
    std::vector<AggregateCell> cells;
    std::map<std::tuple<std::size_t, std::string, std::string, std::string>, std::size_t> index;
    std::vector<GroupKey> groups;
    auto group_id = [&](const GroupKey& g) {
        auto it = std::find(groups.begin(), groups.end(), g);
        if (it != groups.end()) return static_cast<std::size_t>(it - groups.begin());
        groups.push_back(g);
        return groups.size() - 1;
    };

    std::vector<std::vector<std::pair<std::int64_t, double>>> per_seed;
    std::vector<std::string> first_skip;
    for (const auto& run : runs) {
        const std::size_t g = group_id(group_of(run.run));
        for (const auto& c : run.cells) {
            auto key = std::make_tuple(g, c.metric, c.attribute, c.category);
            auto [it, inserted] = index.emplace(key, cells.size());
            if (inserted) {
                AggregateCell cell;
                cell.group = groups[g];
                cell.metric = c.metric;
                cell.attribute = c.attribute;
                cell.category = c.category;
                cells.push_back(std::move(cell));
                per_seed.emplace_back();
                first_skip.emplace_back();
            }
            const std::size_t k = it->second;
            if (c.value) {
                per_seed[k].emplace_back(run.run.seed, *c.value);
            } else {
                ++cells[k].skipped;
                if (first_skip[k].empty()) first_skip[k] = c.status;
            }
        }
    }

    for (std::size_t k = 0; k < cells.size(); ++k) {
        auto& entries = per_seed[k];
        std::stable_sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
        for (const auto& [seed, value] : entries) {
            cells[k].seeds.push_back(seed);
            cells[k].values.push_back(value);
        }
        if (cells[k].values.empty()) {
            cells[k].status = first_skip[k];
            continue;
        }
        const Aggregate a = aggregate(cells[k].values);
        cells[k].mean = a.mean;
        cells[k].std = a.std;
    }
    return cells;
}

std::vector<BoxplotGroup> compute_boxplots(std::span<const AggregateCell> aggregates) {
    std::vector<BoxplotGroup> out;
    std::vector<std::vector<double>> values;
    for (const auto& cell : aggregates) {
        if (cell.values.empty()) continue;
        auto it = std::find_if(out.begin(), out.end(), [&](const BoxplotGroup& b) {
            return b.group == cell.group && b.metric == cell.metric && b.category == cell.category;
        });
        std::size_t k;
        if (it == out.end()) {
            out.push_back({cell.group, cell.metric, cell.category, 0, {}});
            values.emplace_back();
            k = out.size() - 1;
        } else {
            k = static_cast<std::size_t>(it - out.begin());
        }
        values[k].push_back(cell.mean);
    }
    for (std::size_t k = 0; k < out.size(); ++k) {
        out[k].count = values[k].size();
        out[k].summary = boxplot_stats(values[k]);
    }
    return out;
}

// --- audit ---------------------------------------------------------------------------

namespace {

struct AuditContext {
    const AttributeTable* train = nullptr;
    std::map<Split, AttributeTable> labels;
    std::vector<PredictionRun> runs;
    std::vector<std::string> categories;
    double threshold = kDefaultThreshold;
};

std::vector<MetricCell> audit_attribute(const AuditContext& ctx, const PredictionRun& run, std::size_t col) {
    const std::string& name = run.attributes()[col];
    const AttributeTable& truth = ctx.labels.at(run.split());
    const auto scores = run.column(col);
    const auto labels = truth.column(name);

    std::vector<MetricCell> cells;
    auto record = [&](std::string metric, auto&& compute) {
        MetricCell cell{std::move(metric), name, {}, std::nullopt, "ok"};
        try {
            cell.value = report_round(compute());
        } catch (const DegenerateInputError&) {
            cell.status = "degenerate_input";
        } catch (const EmptyInputError&) {
            cell.status = "empty_input";
        }
        cells.push_back(std::move(cell));
    };

    record("accuracy", [&] { return accuracy(scores, labels, ctx.threshold); });
    record("auc", [&] { return auc(scores, labels); });
    record("ece", [&] { return ece(scores, labels); });
    record("uncertainty", [&] { return uncertainty_fraction(scores); });
    record("tcb", [&] {
        const auto train_col = ctx.train->column(name);
        if (train_col.empty()) throw EmptyInputError("empty training split");
        const double mean = static_cast<double>(std::count(train_col.begin(), train_col.end(), std::uint8_t{1})) /
                            static_cast<double>(train_col.size());
        return tcb(scores, labels, mean, ctx.threshold);
    });
    if (run.cols() < 2) {
        cells.push_back({"interdependence", name, {}, std::nullopt, "single_attribute"});
    } else {
        record("interdependence", [&] { return interdependence(run, name); });
    }

    if (ctx.categories.empty()) return cells;
    std::vector<BAResult> results;
    const auto predicted = threshold_column(scores, ctx.threshold);
    for (const auto& category : ctx.categories) {
        MetricCell cell{"ba", name, category, std::nullopt, "ok"};
        if (category == name) {
            cell.status = "identity_category";
        } else {
            auto r = bias_amplification(ctx.train->column(name), ctx.train->column(category), labels,
                                        truth.column(category), predicted, name, category);
            if (r.eligible) {
                cell.value = report_round(100.0 * *r.ba);
            } else {
                cell.status = std::string(to_string(r.reason));
            }
            results.push_back(std::move(r));
        }
        cells.push_back(std::move(cell));
    }
    MetricCell worst{"ba_worst", name, {}, std::nullopt, "ok"};
    if (auto w = worst_case_ba(results)) {
        worst.value = report_round(100.0 * *w);
    } else {
        worst.status = "no_eligible_category";
    }
    cells.push_back(std::move(worst));
    return cells;
}

} // namespace

MetricReport run_audit(const std::filesystem::path& manifest_path, const AuditOptions& options) {
    const RunManifest manifest = load_manifest(manifest_path);
    AuditContext ctx;
    ctx.threshold = options.threshold;
    for (const auto& [split, path] : manifest.labels) ctx.labels.emplace(split, load_attribute_table(path, split));
    auto train = ctx.labels.find(Split::train);
    if (train == ctx.labels.end()) throw FormatError(manifest_path.string() + ": manifest has no train labels");
    ctx.train = &train->second;
    ctx.categories = options.categories.empty() ? manifest.categories : options.categories;
    validate_categories(ctx.categories, *ctx.train);
    for (const auto& [split, table] : ctx.labels) {
        if (table.attributes() != ctx.train->attributes()) {
            throw FormatError("labels for split '" + std::string(to_string(split)) +
                              "' do not have the training attribute columns");
        }
    }
    for (const auto& d : manifest.runs) {
        ctx.runs.push_back(load_prediction_run(d.predictions_path, d, ctx.labels.at(d.split)));
    }

    struct Task {
        std::size_t run;
        std::size_t col;
    };
    std::vector<Task> tasks;
    for (std::size_t r = 0; r < ctx.runs.size(); ++r) {
        for (std::size_t c = 0; c < ctx.runs[r].cols(); ++c) tasks.push_back({r, c});
    }
    std::vector<std::vector<MetricCell>> results(tasks.size());

    unsigned workers = options.jobs ? options.jobs : std::max(1u, std::thread::hardware_concurrency());
    workers = static_cast<unsigned>(std::min<std::size_t>(workers, std::max<std::size_t>(tasks.size(), 1)));
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto work = [&] {
        for (std::size_t t = next++; t < tasks.size(); t = next++) {
            try {
                results[t] = audit_attribute(ctx, ctx.runs[tasks[t].run], tasks[t].col);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
            }
        }
    };
    {
        std::vector<std::jthread> pool;
        for (unsigned w = 1; w < workers; ++w) pool.emplace_back(work);
        work();
    }
    if (failure) std::rethrow_exception(failure);

    MetricReport report;
    report.threshold = options.threshold;
    report.categories = ctx.categories;
    for (const auto& run : ctx.runs) report.runs.push_back({run.descriptor(), {}});
    for (std::size_t t = 0; t < tasks.size(); ++t) {
        auto& cells = report.runs[tasks[t].run].cells;
        cells.insert(cells.end(), std::make_move_iterator(results[t].begin()), std::make_move_iterator(results[t].end()));
    }
    report.aggregates = aggregate_runs(report.runs);
    report.boxplots = compute_boxplots(report.aggregates);
    return report;
}

// --- serialisation ---------------------------------------------------------------------

namespace {

using nlohmann::json;

json number_or_null(const std::optional<double>& v) { return v ? json(report_round(*v)) : json(nullptr); }

json group_json(const GroupKey& g) {
    return {{"method", to_string(g.method)},
            {"sparsity", report_round(g.sparsity)},
            {"nm", g.nm ? json(nm_text(g.nm)) : json(nullptr)},
            {"split", to_string(g.split)}};
}

std::string csv_number(const std::optional<double>& v) { return v ? format_real(report_round(*v)) : std::string(); }

} // namespace

json report_to_json(const MetricReport& report) {
    json runs = json::array();
    for (const auto& r : report.runs) {
        json cells = json::array();
        for (const auto& c : r.cells) {
            cells.push_back({{"metric", c.metric},
                             {"attribute", c.attribute},
                             {"category", c.category},
                             {"value", number_or_null(c.value)},
                             {"status", c.status}});
        }
        json entry = group_json(group_of(r.run));
        entry["run_id"] = r.run.run_id;
        entry["seed"] = r.run.seed;
        entry["metrics"] = std::move(cells);
        runs.push_back(std::move(entry));
    }
    json aggregates = json::array();
    for (const auto& a : report.aggregates) {
        json values = json::array();
        for (double v : a.values) values.push_back(report_round(v));
        aggregates.push_back({{"group", group_json(a.group)},
                              {"metric", a.metric},
                              {"attribute", a.attribute},
                              {"category", a.category},
                              {"seeds", a.seeds},
                              {"values", values},
                              {"n", a.values.size()},
                              {"mean", a.values.empty() ? json(nullptr) : json(report_round(a.mean))},
                              {"std", number_or_null(a.std)},
                              {"skipped", a.skipped},
                              {"status", a.status}});
    }
    json boxplots = json::array();
    for (const auto& b : report.boxplots) {
        json outliers = json::array();
        for (double v : b.summary.outliers) outliers.push_back(report_round(v));
        boxplots.push_back({{"group", group_json(b.group)},
                            {"metric", b.metric},
                            {"category", b.category},
                            {"n", b.count},
                            {"median", report_round(b.summary.median)},
                            {"q25", report_round(b.summary.q25)},
                            {"q75", report_round(b.summary.q75)},
                            {"mean", report_round(b.summary.mean)},
                            {"outliers", outliers}});
    }
    return {{"threshold", report_round(report.threshold)},
            {"categories", report.categories},
            {"ba_units", "percent"},
            {"runs", runs},
            {"aggregates", aggregates},
            {"boxplots", boxplots}};
}

std::string report_json_text(const MetricReport& report) { return report_to_json(report).dump(2) + "\n"; }

std::string report_csv_text(const MetricReport& report) {
    std::string out = "kind,run_id,method,sparsity,nm,split,seed,metric,attribute,category,value,std,n,status\n";
    for (const auto& r : report.runs) {
        for (const auto& c : r.cells) {
            out += "run," + r.run.run_id + "," + std::string(to_string(r.run.method)) + "," +
                   format_real(report_round(r.run.sparsity)) + "," + nm_text(r.run.nm) + "," +
                   std::string(to_string(r.run.split)) + "," + std::to_string(r.run.seed) + "," + c.metric + "," +
                   c.attribute + "," + c.category + "," + csv_number(c.value) + ",,1," + c.status + "\n";
        }
    }
    for (const auto& a : report.aggregates) {
        const std::optional<double> mean = a.values.empty() ? std::nullopt : std::optional<double>(a.mean);
        out += "aggregate,," + std::string(to_string(a.group.method)) + "," +
               format_real(report_round(a.group.sparsity)) + "," + nm_text(a.group.nm) + "," +
               std::string(to_string(a.group.split)) + ",," + a.metric + "," + a.attribute + "," + a.category + "," +
               csv_number(mean) + "," + csv_number(a.std) + "," + std::to_string(a.values.size()) + "," + a.status +
               "\n";
    }
    return out;
}

void write_report(const MetricReport& report, const std::filesystem::path& out_dir) {
    std::filesystem::create_directories(out_dir);
    write_text_file(out_dir / "report.json", report_json_text(report));
    write_text_file(out_dir / "report.csv", report_csv_text(report));
}

std::vector<AggregateCell> aggregates_from_json(const json& doc) {
    std::vector<AggregateCell> cells;
    try {
        for (const auto& a : doc.at("aggregates")) {
            AggregateCell cell;
            const auto& g = a.at("group");
            cell.group.method = parse_method(g.at("method").get<std::string>());
            cell.group.sparsity = g.at("sparsity").get<double>();
            if (!g.at("nm").is_null()) cell.group.nm = parse_nm(g.at("nm").get<std::string>());
            cell.group.split = parse_split(g.at("split").get<std::string>());
            cell.metric = a.at("metric").get<std::string>();
            cell.attribute = a.at("attribute").get<std::string>();
            cell.category = a.at("category").get<std::string>();
            cell.seeds = a.at("seeds").get<std::vector<std::int64_t>>();
            cell.values = a.at("values").get<std::vector<double>>();
            cell.skipped = a.at("skipped").get<std::size_t>();
            cell.status = a.at("status").get<std::string>();
            if (!cell.values.empty()) {
                const Aggregate agg = aggregate(cell.values);
                cell.mean = agg.mean;
                cell.std = agg.std;
            }
            cells.push_back(std::move(cell));
        }
    } catch (const json::exception& e) {
        throw FormatError(std::string("report: ") + e.what());
    }
    return cells;
}

std::string boxplots_csv_text(std::span<const BoxplotGroup> boxplots) {
    std::string out = "method,sparsity,nm,split,metric,category,n,median,q25,q75,mean,outliers\n";
    for (const auto& b : boxplots) {
        std::string outliers;
        for (double v : b.summary.outliers) outliers += (outliers.empty() ? "" : ";") + format_real(report_round(v));
        out += std::string(to_string(b.group.method)) + "," + format_real(report_round(b.group.sparsity)) + "," +
               nm_text(b.group.nm) + "," + std::string(to_string(b.group.split)) + "," + b.metric + "," + b.category +
               "," + std::to_string(b.count) + "," + format_real(report_round(b.summary.median)) + "," +
               format_real(report_round(b.summary.q25)) + "," + format_real(report_round(b.summary.q75)) + "," +
               format_real(report_round(b.summary.mean)) + "," + outliers + "\n";
    }
    return out;
}

} // namespace prunebias
