#include "prunebias/backdoor.hpp"
#include "prunebias/data_model.hpp"
#include "prunebias/mitigation.hpp"
#include "prunebias/sparsity.hpp"

#include "audit_fixture.hpp"

#include <doctest.h>
#include <json.hpp>

#include <algorithm>
#include <cstdlib>
#include <sys/wait.h>

using namespace prunebias;
using namespace prunebias::testing;
namespace fs = std::filesystem;

namespace {

struct Result {
    int code = -1;
    std::string out;
    std::string err;
};

fs::path scratch(const std::string& name) {
    auto dir = fs::temp_directory_path() / ("prunebias_cli_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

Result run_cli(const std::string& args) {
    static int counter = 0;
    const auto base = fs::temp_directory_path() / ("prunebias_cli_capture_" + std::to_string(counter++));
    const std::string cmd = std::string("'") + PRUNEBIAS_CLI_PATH + "' " + args + " >'" + base.string() +
                            ".out' 2>'" + base.string() + ".err'";
    const int status = std::system(cmd.c_str());
    Result r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = read_text_file(base.string() + ".out");
    r.err = read_text_file(base.string() + ".err");
    return r;
}

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

} // namespace

TEST_CASE("audit writes report files") {
    auto dir = scratch("audit");
    auto manifest = write_audit_fixture(dir / "data");
    auto r = run_cli("audit --manifest " + q(manifest) + " --out " + q(dir / "out") + " --jobs 2");
    CHECK(r.code == 0);
    CHECK(r.out.find("5 runs") != std::string::npos);
    auto doc = nlohmann::json::parse(read_text_file(dir / "out" / "report.json"));
    CHECK(doc.at("runs").size() == 5);
    CHECK(fs::exists(dir / "out" / "report.csv"));

    auto again = run_cli("audit --manifest " + q(manifest) + " --out " + q(dir / "out2"));
    CHECK(again.code == 0);
    CHECK(read_text_file(dir / "out" / "report.json") == read_text_file(dir / "out2" / "report.json"));

    auto box = run_cli("report --report " + q(dir / "out" / "report.json"));
    CHECK(box.code == 0);
    CHECK(box.out.find("median") != std::string::npos);
}

TEST_CASE("input errors exit with status one") {
    auto dir = scratch("errors");
    SUBCASE("missing manifest") {
        auto r = run_cli("audit --manifest " + q(dir / "nope.json") + " --out " + q(dir / "out"));
        CHECK(r.code == 1);
        CHECK(r.err.find("nope.json") != std::string::npos);
    }
    SUBCASE("manifest pointing at a missing run file") {
        auto manifest = write_perfect_fixture(dir / "data");
        fs::remove(dir / "data" / "perfect.csv");
        auto r = run_cli("audit --manifest " + q(manifest) + " --out " + q(dir / "out"));
        CHECK(r.code == 1);
        CHECK(r.err.find("perfect.csv") != std::string::npos);
    }
    SUBCASE("malformed label cell") {
        auto manifest = write_perfect_fixture(dir / "data");
        auto text = read_text_file(dir / "data" / "test.csv");
        text.replace(text.find(",1"), 2, ",7");
        write_text_file(dir / "data" / "test.csv", text);
        auto r = run_cli("audit --manifest " + q(manifest) + " --out " + q(dir / "out"));
        CHECK(r.code == 1);
        CHECK(r.err.find("test.csv:") != std::string::npos);
    }
    SUBCASE("unknown subcommand") { CHECK(run_cli("frobnicate").code == 1); }
    SUBCASE("bad option value") {
        auto manifest = write_perfect_fixture(dir / "data");
        CHECK(run_cli("audit --manifest " + q(manifest) + " --out " + q(dir / "out") + " --threshold 3").code == 1);
    }
    SUBCASE("unknown category") {
        auto manifest = write_perfect_fixture(dir / "data");
        auto r = run_cli("audit --manifest " + q(manifest) + " --out " + q(dir / "out") + " --categories Nope");
        CHECK(r.code == 1);
    }
}

TEST_CASE("calibrate and override") {
    auto dir = scratch("mitigate");
    auto manifest = write_audit_fixture(dir / "data");

    auto cal = run_cli("calibrate --manifest " + q(manifest) + " --val-run sparse_val --test-run sparse_s0 --out " +
                       q(dir / "cal"));
    REQUIRE(cal.code == 0);
    auto map = threshold_map_from_json(nlohmann::json::parse(read_text_file(dir / "cal" / "thresholds.json")));
    CHECK(map.at("A").k == 200);
    CHECK(map.at("A").cut == 0.3);
    auto comparison = read_text_file(dir / "cal" / "ba_comparison.csv");
    CHECK(comparison.rfind("attribute,category,ba_before,ba_after\n", 0) == 0);
    CHECK(comparison.find("A,I,") != std::string::npos);

    auto ov = run_cli("override --manifest " + q(manifest) + " --dense dense_s0 --sparse sparse_s0 --fraction 1 " +
                      "--source truth --out " + q(dir / "ov"));
    REQUIRE(ov.code == 0);
    auto labels = load_attribute_table(dir / "ov" / "overridden_labels.csv", Split::test);
    auto truth = load_attribute_table(dir / "data" / "test.csv", Split::test);
    CHECK(labels.column("A") == truth.column("A"));
    auto plan = override_plan_from_json(nlohmann::json::parse(read_text_file(dir / "ov" / "plan.json")));
    CHECK(plan.fraction == 1.0);
    CHECK(plan.category == "I");

    auto bad = run_cli("override --manifest " + q(manifest) + " --dense dense_s0 --sparse nope --fraction 0.1 --out " +
                       q(dir / "ov2"));
    CHECK(bad.code == 1);
}

TEST_CASE("cie") {
    auto dir = scratch("cie");
    auto manifest = write_audit_fixture(dir / "data");
    auto r = run_cli("cie --manifest " + q(manifest) + " --sparsity 0.995 --out " + q(dir / "cies.csv"));
    REQUIRE(r.code == 0);
    CHECK(r.out.find("cies=") == 0);
    CHECK(read_text_file(dir / "cies.csv").rfind("sample_id,attribute\n", 0) == 0);
}

TEST_CASE("mask and schedule") {
    auto dir = scratch("mask");
    TensorBundle weights{{Tensor{"conv", {2, 4}, {0.1f, -0.9f, 0.3f, 0.05f, 0.5f, 0.4f, -0.2f, 0.8f}},
                          Tensor{"fc", {4}, {1.0f, -1.0f, 0.25f, 0.0f}}}};
    write_tensor_bundle(weights, dir / "w.tbnd");
    write_text_file(dir / "layers.json",
                    R"({"layers": [{"name": "c", "kind": "conv", "output_positions": 49, "weight": "conv"},
                                   {"name": "f", "kind": "dense", "output_positions": 1, "weight": "fc"}]})");

    auto nm = run_cli("mask --weights " + q(dir / "w.tbnd") + " --nm 2:4 --out " + q(dir / "m.tbnd") + " --apply " +
                      q(dir / "pruned.tbnd") + " --layers " + q(dir / "layers.json"));
    REQUIRE(nm.code == 0);
    CHECK(nm.out.find("achieved=0.5") != std::string::npos);
    CHECK(nm.out.find("dense_flops=792") != std::string::npos);
    CHECK(nm.out.find("sparse_flops=396") != std::string::npos);
    auto mask = mask_from_bundle(read_tensor_bundle(dir / "m.tbnd"));
    CHECK(mask.find("conv")->keep == std::vector<std::uint8_t>{0, 1, 1, 0, 1, 0, 0, 1});
    auto pruned = read_tensor_bundle(dir / "pruned.tbnd");
    CHECK(pruned.get("conv").data == std::vector<float>{0.0f, -0.9f, 0.3f, 0.0f, 0.5f, 0.0f, 0.0f, 0.8f});

    auto global = run_cli("mask --weights " + q(dir / "w.tbnd") + " --sparsity 0.5 --prunable conv --out " +
                          q(dir / "g.tbnd"));
    REQUIRE(global.code == 0);
    CHECK(global.out.find("achieved=0.5") != std::string::npos);

    CHECK(run_cli("mask --weights " + q(dir / "w.tbnd") + " --out " + q(dir / "x.tbnd")).code == 1);
    CHECK(run_cli("mask --weights " + q(dir / "w.tbnd") + " --nm 2:3 --out " + q(dir / "x.tbnd")).code == 1);

    auto sched = run_cli("schedule --final 0.8 --start 0 --steps 10 --interval 1");
    REQUIRE(sched.code == 0);
    CHECK(sched.out.rfind("step,sparsity\n0,0\n", 0) == 0);
    const auto at5 = sched.out.find("\n5,");
    REQUIRE(at5 != std::string::npos);
    CHECK(std::stod(sched.out.substr(at5 + 3)) == doctest::Approx(0.7).epsilon(1e-12));
    CHECK(sched.out.find("\n10,0.8\n") != std::string::npos);
}

TEST_CASE("backdoor commands") {
    auto dir = scratch("backdoor");
    auto manifest = write_audit_fixture(dir / "data");
    auto r = run_cli("backdoor assign --labels " + q(dir / "data" / "train.csv") +
                     " --attribute A --pos 0.95 --neg 0.05 --seed 3 --out " + q(dir / "flags.csv"));
    REQUIRE(r.code == 0);
    auto train = load_attribute_table(dir / "data" / "train.csv", Split::train);
    auto flags = read_text_file(dir / "flags.csv");
    auto again = run_cli("backdoor assign --labels " + q(dir / "data" / "train.csv") +
                         " --attribute A --pos 0.95 --neg 0.05 --seed 3 --out " + q(dir / "flags2.csv"));
    CHECK(again.code == 0);
    CHECK(read_text_file(dir / "flags2.csv") == flags);
    CHECK(flags.rfind("sample_id,flag\n", 0) == 0);
    CHECK(std::count(flags.begin(), flags.end(), '\n') == static_cast<std::ptrdiff_t>(train.rows() + 1));

    REQUIRE(run_cli("backdoor even --labels " + q(dir / "data" / "test.csv") + " --seed 1 --out " + q(dir / "even.csv"))
                .code == 0);
    auto test = load_attribute_table(dir / "data" / "test.csv", Split::test);
    auto even = parse_flags_csv(read_text_file(dir / "even.csv"), test.sample_ids());
    CHECK(static_cast<std::size_t>(std::count(even.begin(), even.end(), 1)) == test.rows() / 2);

    ImageRGB img(30, 30);
    for (std::size_t k = 0; k < img.pixels.size(); ++k) img.pixels[k] = static_cast<std::uint8_t>(k % 200);
    write_ppm(img, dir / "in.ppm");
    REQUIRE(run_cli("backdoor image --in " + q(dir / "in.ppm") + " --transform square --out " + q(dir / "sq.ppm"))
                .code == 0);
    auto sq = read_ppm(dir / "sq.ppm");
    CHECK(sq.pixels[(10 * 30 + 10) * 3] == 255);
    CHECK(sq.pixels[(10 * 30 + 10) * 3 + 2] == 0);
    CHECK(run_cli("backdoor image --in " + q(dir / "in.ppm") + " --transform square --x 20 --out " +
                  q(dir / "bad.ppm"))
              .code == 1);
}
