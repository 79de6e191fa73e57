// prunebias command-line front end.
//
// Exit codes: 0 success, 1 input error, 2 internal error.

#include "prunebias/backdoor.hpp"
#include "prunebias/bias_amplification.hpp"
#include "prunebias/cie.hpp"
#include "prunebias/data_model.hpp"
#include "prunebias/errors.hpp"
#include "prunebias/mitigation.hpp"
#include "prunebias/report.hpp"
#include "prunebias/sparsity.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace prunebias;

namespace {

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

/// Labels and runs of a manifest, loaded on demand.
class Workspace {
public:
    explicit Workspace(const fs::path& manifest_path) : manifest_(load_manifest(manifest_path)) {}

    const RunManifest& manifest() const { return manifest_; }

    const AttributeTable& labels(Split split) {
        auto it = labels_.find(split);
        if (it != labels_.end()) return it->second;
        auto path = manifest_.labels.find(split);
        if (path == manifest_.labels.end()) {
            throw FormatError("manifest has no labels for split '" + std::string(to_string(split)) + "'");
        }
        return labels_.emplace(split, load_attribute_table(path->second, split)).first->second;
    }

    PredictionRun run(const std::string& run_id) {
        const RunDescriptor& d = manifest_.run(run_id);
        return load_prediction_run(d.predictions_path, d, labels(d.split));
    }

    std::vector<PredictionRun> runs(const std::vector<std::string>& ids) {
        std::vector<PredictionRun> out;
        for (const auto& id : ids) out.push_back(run(id));
        return out;
    }

    std::vector<std::string> categories(const std::string& override_list) const {
        return override_list.empty() ? manifest_.categories : split_list(override_list);
    }

private:
    RunManifest manifest_;
    std::map<Split, AttributeTable> labels_;
};

std::string describe(const BAResult& r) {
    if (!r.eligible) return std::string(to_string(r.reason));
    return format_real(report_round(100.0 * *r.ba));
}

std::string comparison_csv(const std::vector<MitigationComparison>& rows) {
    std::string out = "attribute,category,ba_before,ba_after\n";
    for (const auto& row : rows) {
        out += row.before.attribute + "," + row.before.category + "," + describe(row.before) + "," +
               describe(row.after) + "\n";
    }
    return out;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Audit pruned classifiers for compression-induced bias"};
    app.require_subcommand(1);

    // audit
    std::string manifest_path, out_path, categories;
    double threshold = kDefaultThreshold;
    unsigned jobs = 0;
    auto* audit = app.add_subcommand("audit", "Compute every metric for every run in a manifest");
    audit->add_option("--manifest", manifest_path, "Run manifest (JSON)")->required()->check(CLI::ExistingFile);
    audit->add_option("--out", out_path, "Output directory for report.json and report.csv")->required();
    audit->add_option("--threshold", threshold, "Decision threshold")->check(CLI::Range(0.0, 1.0));
    audit->add_option("--categories", categories, "Comma-separated identity categories (overrides manifest)");
    audit->add_option("--jobs", jobs, "Worker threads (0 = all cores)");

    // calibrate
    std::string val_run, test_run;
    auto* calibrate = app.add_subcommand("calibrate", "Per-attribute threshold calibration on a validation run");
    calibrate->add_option("--manifest", manifest_path)->required()->check(CLI::ExistingFile);
    calibrate->add_option("--val-run", val_run, "Run id scored on the validation split")->required();
    calibrate->add_option("--test-run", test_run, "Run id to evaluate before/after calibration");
    calibrate->add_option("--categories", categories);
    calibrate->add_option("--threshold", threshold, "Threshold for the uncalibrated baseline");
    calibrate->add_option("--out", out_path, "Output directory")->required();

    // override
    std::string dense_runs, sparse_run, source = "truth";
    double fraction = 0.0;
    auto* override_cmd = app.add_subcommand("override", "Uncertainty-prioritised label overrides");
    override_cmd->add_option("--manifest", manifest_path)->required()->check(CLI::ExistingFile);
    override_cmd->add_option("--dense", dense_runs, "Comma-separated dense run ids (scores averaged)")->required();
    override_cmd->add_option("--sparse", sparse_run, "Sparse run id")->required();
    override_cmd->add_option("--categories", categories, "Identity category used for eligibility");
    override_cmd->add_option("--fraction", fraction, "Fraction of samples overridden per attribute")
        ->required()
        ->check(CLI::Range(0.0, 1.0));
    override_cmd->add_option("--source", source, "Override label source")->check(CLI::IsMember({"truth", "dense"}));
    override_cmd->add_option("--threshold", threshold);
    override_cmd->add_option("--out", out_path, "Output directory")->required();

    // cie
    std::string sparse_runs;
    std::optional<double> sparsity;
    std::string cie_split = "test";
    auto* cie = app.add_subcommand("cie", "Compression-identified exemplars");
    cie->add_option("--manifest", manifest_path)->required()->check(CLI::ExistingFile);
    cie->add_option("--dense", dense_runs, "Comma-separated dense run ids (default: all dense runs on the split)");
    cie->add_option("--sparse", sparse_runs, "Comma-separated sparse run ids");
    cie->add_option("--sparsity", sparsity, "Select sparse runs by sparsity instead of --sparse");
    cie->add_option("--split", cie_split, "Split used when selecting runs by sparsity or by default")
        ->check(CLI::IsMember({"train", "val", "test"}));
    cie->add_option("--threshold", threshold);
    cie->add_option("--out", out_path, "Output CSV of sample_id,attribute")->required();

    // mask
    std::string weights_path, nm_text, prunable_list, apply_path, layers_path;
    std::optional<double> mask_sparsity;
    auto* mask = app.add_subcommand("mask", "Pruning masks from a TBND weight bundle");
    mask->add_option("--weights", weights_path, "Weight bundle (TBND)")->required()->check(CLI::ExistingFile);
    auto* sparsity_opt = mask->add_option("--sparsity", mask_sparsity, "Global magnitude target sparsity")
                             ->check(CLI::Range(0.0, 1.0));
    auto* nm_opt = mask->add_option("--nm", nm_text, "Structured N:M pattern, e.g. 2:4");
    sparsity_opt->excludes(nm_opt);
    mask->add_option("--prunable", prunable_list, "Comma-separated tensor names (default: all)");
    mask->add_option("--out", out_path, "Mask bundle (TBND, 0/1 floats)")->required();
    mask->add_option("--apply", apply_path, "Also write the pruned weights here");
    mask->add_option("--layers", layers_path, "Layer descriptor JSON for a FLOPs estimate")->check(CLI::ExistingFile);

    // schedule
    ScheduleParams schedule;
    std::int64_t until = -1;
    auto* schedule_cmd = app.add_subcommand("schedule", "Polynomial sparsity schedule as CSV");
    schedule_cmd->add_option("--initial", schedule.initial)->check(CLI::Range(0.0, 1.0));
    schedule_cmd->add_option("--final,--sparsity", schedule.final)->required()->check(CLI::Range(0.0, 1.0));
    schedule_cmd->add_option("--start", schedule.start);
    schedule_cmd->add_option("--steps", schedule.steps)->required();
    schedule_cmd->add_option("--interval", schedule.interval)->required();
    schedule_cmd->add_option("--exponent", schedule.exponent);
    schedule_cmd->add_option("--until", until, "Last step to print (default: end of schedule)");
    schedule_cmd->add_option("--out", out_path, "Output CSV (default: stdout)");

    // backdoor
    auto* backdoor = app.add_subcommand("backdoor", "Backdoor assignments and trigger transforms");
    backdoor->require_subcommand(1);
    std::string labels_path, attribute, image_in, transform = "grayscale";
    double pos = 0.95, neg = 0.05;
    std::uint64_t seed = 0;
    SquareTrigger trigger;
    auto* assign = backdoor->add_subcommand("assign", "Class-conditional backdoor flags for a training split");
    assign->add_option("--labels", labels_path, "Label CSV")->required()->check(CLI::ExistingFile);
    assign->add_option("--attribute", attribute)->required();
    assign->add_option("--pos", pos, "Fraction of positives flagged")->check(CLI::Range(0.0, 1.0));
    assign->add_option("--neg", neg, "Fraction of negatives flagged")->check(CLI::Range(0.0, 1.0));
    assign->add_option("--seed", seed);
    assign->add_option("--out", out_path)->required();
    auto* even = backdoor->add_subcommand("even", "Flag half of a test split");
    even->add_option("--labels", labels_path, "Label CSV (sample ids)")->required()->check(CLI::ExistingFile);
    even->add_option("--seed", seed);
    even->add_option("--out", out_path)->required();
    auto* image = backdoor->add_subcommand("image", "Apply a trigger transform to a PPM image");
    image->add_option("--in", image_in)->required()->check(CLI::ExistingFile);
    image->add_option("--transform", transform)->check(CLI::IsMember({"grayscale", "square"}));
    image->add_option("--size", trigger.size);
    image->add_option("--x", trigger.x);
    image->add_option("--y", trigger.y);
    image->add_option("--out", out_path)->required();

    // report
    std::string report_in;
    auto* report = app.add_subcommand("report", "Boxplot summaries from an audit report");
    report->add_option("--report", report_in, "report.json from audit")->required()->check(CLI::ExistingFile);
    report->add_option("--out", out_path, "Output CSV (default: stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (*audit) {
            AuditOptions options;
            options.threshold = threshold;
            options.categories = split_list(categories);
            options.jobs = jobs;
            auto result = run_audit(manifest_path, options);
            write_report(result, out_path);
            std::cout << "wrote " << (fs::path(out_path) / "report.json").string() << " ("
                      << result.runs.size() << " runs)\n";
        } else if (*calibrate) {
            Workspace ws(manifest_path);
            const PredictionRun val = ws.run(val_run);
            const ThresholdMap map = calibrate_thresholds(val, ws.labels(val.split()));
            fs::create_directories(out_path);
            write_text_file(fs::path(out_path) / "thresholds.json", to_json(map).dump(2) + "\n");
            if (!test_run.empty()) {
                const PredictionRun test = ws.run(test_run);
                const auto before = threshold_labels(test, threshold);
                const auto after = apply_thresholds(test, map);
                const auto cats = ws.categories(categories);
                auto rows = evaluate_mitigation(before, after, ws.labels(test.split()), cats, ws.labels(Split::train));
                write_attribute_table(after, fs::path(out_path) / "calibrated_labels.csv");
                write_text_file(fs::path(out_path) / "ba_comparison.csv", comparison_csv(rows));
            }
            std::cout << "calibrated " << map.size() << " attributes\n";
        } else if (*override_cmd) {
            Workspace ws(manifest_path);
            const auto cats = ws.categories(categories);
            if (cats.size() != 1) throw ArgumentError("override needs exactly one identity category");
            const auto dense = mean_run(ws.runs(split_list(dense_runs)), "dense_mean");
            const PredictionRun sparse = ws.run(sparse_run);
            const auto& test = ws.labels(sparse.split());
            const auto& train = ws.labels(Split::train);
            const OverridePlan plan =
                make_override_plan(dense, train, test, cats.front(), parse_override_source(source), fraction, threshold);
            const auto before = threshold_labels(sparse, threshold);
            const auto after = apply_overrides(before, plan, test, threshold_labels(dense, kDefaultThreshold));
            fs::create_directories(out_path);
            write_text_file(fs::path(out_path) / "plan.json", to_json(plan).dump(2) + "\n");
            write_attribute_table(after, fs::path(out_path) / "overridden_labels.csv");
            write_text_file(fs::path(out_path) / "ba_comparison.csv",
                            comparison_csv(evaluate_mitigation(before, after, test, cats, train)));
            std::cout << "overrode " << floor_fraction(fraction, test.rows()) << " samples per eligible attribute\n";
        } else if (*cie) {
            Workspace ws(manifest_path);
            std::vector<std::string> sparse_ids = split_list(sparse_runs);
            if (sparsity) {
                for (const auto& d : ws.manifest().runs) {
                    if (d.method != Method::dense && d.sparsity == *sparsity && d.split == parse_split(cie_split)) {
                        sparse_ids.push_back(d.run_id);
                    }
                }
            }
            if (sparse_ids.empty()) throw ArgumentError("cie: no sparse runs selected");
            std::vector<std::string> dense_ids = split_list(dense_runs);
            if (dense_ids.empty()) {
                const Split split = ws.manifest().run(sparse_ids.front()).split;
                for (const auto& d : ws.manifest().runs) {
                    if (d.method == Method::dense && d.split == split) dense_ids.push_back(d.run_id);
                }
            }
            const auto dense = ws.runs(dense_ids);
            const auto sparse = ws.runs(sparse_ids);
            const CIESet set = find_cies(dense, sparse, threshold);
            write_cie_csv(set, out_path);
            const auto enrichment = cie_uncertainty_enrichment(set, dense);
            std::cout << "cies=" << set.pairs.size() << " uncertain_among_cies="
                      << (enrichment.among_cies ? format_real(report_round(*enrichment.among_cies)) : "n/a")
                      << " uncertain_overall=" << format_real(report_round(enrichment.overall)) << "\n";
        } else if (*mask) {
            const TensorBundle weights = read_tensor_bundle(weights_path);
            std::vector<std::string> prunable = split_list(prunable_list);
            if (prunable.empty()) {
                for (const auto& t : weights.tensors) prunable.push_back(t.name);
            }
            SparsityMask result;
            if (!nm_text.empty()) {
                const NMPattern nm = parse_nm(nm_text);
                result = nm_bundle_mask(weights, prunable, nm.n, nm.m);
            } else if (mask_sparsity) {
                result = global_magnitude_mask(weights, prunable, *mask_sparsity);
            } else {
                throw ArgumentError("mask needs --sparsity or --nm");
            }
            write_tensor_bundle(mask_to_bundle(result), out_path);
            if (!apply_path.empty()) write_tensor_bundle(apply_mask(weights, result), apply_path);
            std::cout << "target=" << format_real(result.target) << " achieved=" << format_real(result.achieved);
            if (!layers_path.empty()) {
                const auto layers = load_layers(layers_path);
                std::cout << " dense_flops=" << flops_estimate(layers, weights)
                          << " sparse_flops=" << flops_estimate(layers, weights, &result);
            }
            std::cout << "\n";
        } else if (*schedule_cmd) {
            validate(schedule);
            const std::int64_t last = until >= 0 ? until : schedule.start + schedule.steps * schedule.interval;
            std::string csv = "step,sparsity\n";
            for (std::int64_t step = 0; step <= last; ++step) {
                csv += std::to_string(step) + "," + format_real(schedule_sparsity(step, schedule)) + "\n";
            }
            if (out_path.empty()) {
                std::cout << csv;
            } else {
                write_text_file(out_path, csv);
            }
        } else if (*assign) {
            const AttributeTable table = load_attribute_table(labels_path, Split::train);
            const auto result = assign_backdoor(table.column(attribute), pos, neg, seed);
            write_text_file(out_path, format_flags_csv(table.sample_ids(), result.flags));
        } else if (*even) {
            const AttributeTable table = load_attribute_table(labels_path, Split::test);
            write_text_file(out_path, format_flags_csv(table.sample_ids(), assign_even_test(table.rows(), seed)));
        } else if (*image) {
            const ImageRGB input = read_ppm(image_in);
            write_ppm(transform == "grayscale" ? grayscale(input) : yellow_square(input, trigger), out_path);
        } else if (*report) {
            const auto doc = nlohmann::json::parse(read_text_file(report_in));
            const auto boxplots = compute_boxplots(aggregates_from_json(doc));
            const std::string csv = boxplots_csv_text(boxplots);
            if (out_path.empty()) {
                std::cout << csv;
            } else {
                write_text_file(out_path, csv);
            }
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
