#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "openess/formats.hpp"
#include "openess/manifest.hpp"
#include "openess/metrics.hpp"

using namespace openess;
namespace fs = std::filesystem;

namespace {

std::string file_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) {
        path = fs::temp_directory_path() / name;
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string str(const std::string& sub = "") const {
        return sub.empty() ? path.string() : (path / sub).string();
    }
};

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
}

}  // namespace

TEST_CASE("manifest parsing: absent fields, comments, errors") {
    const auto m = harness::parse_manifest(
        "# dataset\n"
        "seqA a.evt1 a.fmap1 - a.lbl1\n"
        "seqA b.evt1 - - -\n"
        "\n"
        "seqB c.evt1\n",
        "/base");
    REQUIRE(m.samples.size() == 3);
    CHECK(m.samples[0].frame_path == "a.fmap1");
    CHECK(m.samples[0].mask_path.empty());
    CHECK(m.samples[1].frame_path.empty());
    CHECK(m.samples[2].sequence == "seqB");
    CHECK(m.resolve("a.evt1") == "/base/a.evt1");
    CHECK(m.resolve("/abs/x") == "/abs/x");

    CHECK_THROWS(harness::parse_manifest("onlyseq\n"));
}

TEST_CASE("split_budget: prefix per sequence") {
    std::ostringstream text;
    for (int i = 0; i < 100; ++i) text << "s0 e" << i << ".evt1\n";
    const auto m = harness::parse_manifest(text.str());
    const auto split = harness::split_budget(m, 0.10);
    REQUIRE(split.labeled.size() == 10);
    for (std::size_t i = 0; i < 10; ++i) CHECK(split.labeled[i] == i);
    CHECK(split.unlabeled.size() == 90);

    const auto all = harness::split_budget(m, 1.0);
    CHECK(all.labeled.size() == 100);
    CHECK(all.unlabeled.empty());
}

TEST_CASE("split_budget: ceiling arithmetic across sequences") {
    std::ostringstream text;
    for (int i = 0; i < 7; ++i) text << "sa a" << i << ".evt1\n";
    for (int i = 0; i < 13; ++i) text << "sb b" << i << ".evt1\n";
    const auto m = harness::parse_manifest(text.str());
    const auto split = harness::split_budget(m, 0.20);
    // ceil(1.4) = 2 and ceil(2.6) = 3
    REQUIRE(split.labeled.size() == 5);
    CHECK(split.labeled[0] == 0);
    CHECK(split.labeled[1] == 1);
    CHECK(split.labeled[2] == 7);
    CHECK(split.labeled[3] == 8);
    CHECK(split.labeled[4] == 9);
}

TEST_CASE("split_budget: monotone in the fraction, disjoint, covering") {
    std::ostringstream text;
    for (int i = 0; i < 9; ++i) text << (i % 2 ? "sa" : "sb") << " e" << i << ".evt1\n";
    const auto m = harness::parse_manifest(text.str());
    std::vector<std::size_t> prev;
    for (double f : {0.01, 0.05, 0.10, 0.20, 0.5, 1.0}) {
        const auto split = harness::split_budget(m, f);
        CHECK(split.labeled.size() + split.unlabeled.size() == m.samples.size());
        for (std::size_t idx : prev)
            CHECK(std::find(split.labeled.begin(), split.labeled.end(), idx) !=
                  split.labeled.end());
        prev = split.labeled;
    }
    CHECK_THROWS(harness::split_budget(m, 0.0));
    CHECK_THROWS(harness::split_budget(m, 1.5));
    CHECK_THROWS(harness::split_budget(harness::DatasetManifest{}, 0.5));
}

TEST_CASE("cli: unknown subcommand fails with usage") {
    CHECK(run_cli({"frobnicate"}) != 0);
    CHECK(run_cli({}) != 0);
}

TEST_CASE("cli: synth writes a consistent dataset directory") {
    TempDir tmp("openess_cli_synth");
    const int rc = run_cli({"synth", "--out", tmp.str(), "--width", "48", "--height", "48",
                            "--duration-ms", "600", "--fps", "10", "--seed", "5",
                            "--feature-dim", "8"});
    REQUIRE(rc == 0);
    CHECK(fs::exists(tmp.str("manifest.txt")));
    CHECK(fs::exists(tmp.str("texts.temb1")));
    CHECK(fs::exists(tmp.str("scene.txt")));

    const auto manifest = harness::load_manifest(tmp.str("manifest.txt"));
    REQUIRE(!manifest.samples.empty());
    for (const auto& s : manifest.samples) {
        CHECK(!formats::read_evt1_file(manifest.resolve(s.event_path)).events.empty());
        CHECK(formats::read_fmap1_file(manifest.resolve(s.frame_path)).channels == 8);
        CHECK(formats::read_lbl1_file(manifest.resolve(s.label_path)).pixels() == 48 * 48);
    }

    // Same seed, fresh directory: bitwise identical artifacts.
    TempDir tmp2("openess_cli_synth2");
    REQUIRE(run_cli({"synth", "--out", tmp2.str(), "--width", "48", "--height", "48",
                     "--duration-ms", "600", "--fps", "10", "--seed", "5",
                     "--feature-dim", "8"}) == 0);
    CHECK(file_bytes(tmp.str("manifest.txt")) == file_bytes(tmp2.str("manifest.txt")));
    for (const auto& s : manifest.samples) {
        CHECK(file_bytes(manifest.resolve(s.event_path)) ==
              file_bytes(tmp2.str(s.event_path)));
        CHECK(file_bytes(manifest.resolve(s.frame_path)) ==
              file_bytes(tmp2.str(s.frame_path)));
    }
}

TEST_CASE("cli: encode and slic produce loadable artifacts") {
    TempDir tmp("openess_cli_encode");
    REQUIRE(run_cli({"synth", "--out", tmp.str("data"), "--width", "32", "--height", "32",
                     "--duration-ms", "400", "--seed", "2", "--feature-dim", "6"}) == 0);
    const auto manifest = harness::load_manifest(tmp.str("data/manifest.txt"));
    REQUIRE(!manifest.samples.empty());
    const std::string evt = manifest.resolve(manifest.samples[0].event_path);

    REQUIRE(run_cli({"encode", "--evt", evt, "--out", tmp.str("enc"), "--bins", "3",
                     "--events-per-window", "64"}) == 0);
    bool found = false;
    for (const auto& entry : fs::directory_iterator(tmp.str("enc"))) {
        const auto m = formats::read_fmap1_file(entry.path().string());
        CHECK(m.channels == 3);
        found = true;
    }
    CHECK(found);

    const std::string fmap = manifest.resolve(manifest.samples[0].frame_path);
    REQUIRE(run_cli({"slic", "--image", fmap, "--out", tmp.str("mask.mask1"), "--segments",
                     "8", "--compactness", "0.2"}) == 0);
    const auto mask = formats::read_mask1_file(tmp.str("mask.mask1"));
    CHECK(mask.segment_count >= 1);
    CHECK(mask.height == 32);
}

TEST_CASE("cli: eval honors the strict-miou convention") {
    TempDir tmp("openess_cli_eval");
    // gt uses classes {0,1}; pred only 0; declare 3 classes so one is absent.
    LabelMap gt(2, 2, 0);
    gt.at(1, 1) = 1;
    LabelMap pred(2, 2, 0);
    formats::write_lbl1_file(tmp.str("gt.lbl1"), gt);
    formats::write_lbl1_file(tmp.str("pred.lbl1"), pred);

    CHECK(run_cli({"eval", "--pred", tmp.str("pred.lbl1"), "--gt", tmp.str("gt.lbl1"),
                   "--classes", "3", "--out", tmp.str("m.csv")}) == 0);
    const std::string report = file_bytes(tmp.str("m.csv"));
    CHECK(report.find("excluded") != std::string::npos);

    // Default vs strict differ: (0.75 + 0)/2 vs (0.75 + 0 + 0)/3.
    metrics::ConfusionMatrix cm(3);
    metrics::accumulate(cm, pred, gt);
    const auto rep = metrics::iou_scores(cm, false);
    const auto strict = metrics::iou_scores(cm, true);
    CHECK(rep.miou != strict.miou);

    CHECK(run_cli({"eval", "--pred", tmp.str("pred.lbl1"), "--gt", tmp.str("gt.lbl1"),
                   "--classes", "3", "--strict-miou"}) == 0);
}

TEST_CASE("cli: distill rejects an invalid config before training") {
    TempDir tmp("openess_cli_badcfg");
    write_file(tmp.str("bad.cfg"), "tau1=0\n");
    write_file(tmp.str("manifest.txt"), "s0 missing.evt1\n");
    const int rc = run_cli({"distill", "--manifest", tmp.str("manifest.txt"), "--texts",
                            tmp.str("missing.temb1"), "--config", tmp.str("bad.cfg"), "--out",
                            tmp.str("out")});
    CHECK(rc != 0);
}

TEST_CASE("cli: distill -> zeroshot -> attention round trip on a tiny scene") {
    TempDir tmp("openess_cli_e2e");
    REQUIRE(run_cli({"synth", "--out", tmp.str("data"), "--width", "32", "--height", "32",
                     "--duration-ms", "800", "--fps", "10", "--seed", "11", "--feature-dim",
                     "8", "--lookback-ms", "300"}) == 0);

    write_file(tmp.str("train.cfg"),
               "steps=12\nlr=0.05\nd1=8\nhidden=8\nevents_per_window=96\nbins=3\n"
               "segments=9\nslic_compactness=0.2\noptimizer=adam\nlr=0.003\n");
    REQUIRE(run_cli({"distill", "--manifest", tmp.str("data/manifest.txt"), "--texts",
                     tmp.str("data/texts.temb1"), "--config", tmp.str("train.cfg"), "--out",
                     tmp.str("model"), "--seed", "4"}) == 0);
    CHECK(fs::exists(tmp.str("model/encoder.enc1")));
    CHECK(fs::exists(tmp.str("model/head_query.enc1")));
    CHECK(fs::exists(tmp.str("model/trace.csv")));
    CHECK(fs::exists(tmp.str("model/model_config.txt")));

    REQUIRE(run_cli({"zeroshot", "--manifest", tmp.str("data/manifest.txt"), "--model",
                     tmp.str("model"), "--texts", tmp.str("data/texts.temb1"), "--out",
                     tmp.str("pred")}) == 0);
    CHECK(fs::exists(tmp.str("pred/metrics.csv")));
    bool any_pred = false;
    for (const auto& entry : fs::directory_iterator(tmp.str("pred")))
        if (entry.path().extension() == ".lbl1") {
            const auto m = formats::read_lbl1_file(entry.path().string());
            CHECK(m.height == 32);
            any_pred = true;
        }
    CHECK(any_pred);

    const auto manifest = harness::load_manifest(tmp.str("data/manifest.txt"));
    REQUIRE(run_cli({"attention", "--evt", manifest.resolve(manifest.samples[0].event_path),
                     "--model", tmp.str("model"), "--texts", tmp.str("data/texts.temb1"),
                     "--class", "class1", "--out", tmp.str("att.pgm")}) == 0);
    const auto att = formats::read_pgm_file(tmp.str("att.pgm"));
    CHECK(att.width == 32);

    // probe on the same data, both model-backed and random-init.
    REQUIRE(run_cli({"probe", "--manifest", tmp.str("data/manifest.txt"), "--eval-manifest",
                     tmp.str("data/manifest.txt"), "--model", tmp.str("model"), "--budget",
                     "0.5", "--steps", "20", "--out", tmp.str("probe")}) == 0);
    CHECK(fs::exists(tmp.str("probe/metrics.csv")));
    REQUIRE(run_cli({"probe", "--manifest", tmp.str("data/manifest.txt"), "--eval-manifest",
                     tmp.str("data/manifest.txt"), "--model", tmp.str("model"), "--random-init",
                     "--seed", "8", "--budget", "0.5", "--steps", "20", "--out",
                     tmp.str("probe_rand")}) == 0);
}
