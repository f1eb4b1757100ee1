#include <doctest.h>

#include <cmath>
#include <limits>
#include <sstream>

#include "openess/embedding.hpp"
#include "openess/formats.hpp"
#include "openess/rng.hpp"

using namespace openess;
using embedding::TextEmbeddingSet;

namespace {

double norm(const std::vector<double>& v) {
    double s = 0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

}  // namespace

TEST_CASE("fmap1: trivial payload, bad payloads, bitwise round trip") {
    FeatureMap m(2, 1, 1);
    m.at(0, 0, 0) = 0.5;
    m.at(1, 0, 0) = -0.5;
    std::ostringstream out;
    formats::write_fmap1(out, m);
    std::istringstream in(out.str());
    const FeatureMap back = formats::read_fmap1(in);
    CHECK(back.channels == 2);
    CHECK(back.at(0, 0, 0) == 0.5);
    CHECK(back.at(1, 0, 0) == -0.5);

    // Round trip is bitwise stable once values are f32-representable.
    std::ostringstream out2;
    formats::write_fmap1(out2, back);
    CHECK(out.str() == out2.str());

    std::string hdr = "FMAP1";
    const char dims[12] = {1, 0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0};
    hdr.append(dims, 12);
    std::istringstream trunc(hdr, std::ios::binary);
    CHECK_THROWS_WITH_AS(formats::read_fmap1(trunc), doctest::Contains("truncated"),
                         std::runtime_error);

    // Non-finite values rejected under strict mode, accepted otherwise.
    FeatureMap inf_map(1, 1, 1);
    inf_map.values[0] = std::numeric_limits<double>::infinity();
    std::ostringstream inf_out;
    formats::write_fmap1(inf_out, inf_map);
    std::istringstream inf_in(inf_out.str());
    CHECK_THROWS(formats::read_fmap1(inf_in));
    std::istringstream inf_in2(inf_out.str());
    CHECK(std::isinf(formats::read_fmap1(inf_in2, false).values[0]));
}

TEST_CASE("temb1 round trip preserves names and unit vectors") {
    TextEmbeddingSet set = embedding::random_embeddings({"road", "sky", "car"}, 8, 3);
    std::ostringstream out;
    formats::write_temb1(out, set);
    std::istringstream in(out.str());
    const TextEmbeddingSet back = formats::read_temb1(in);
    REQUIRE(back.class_count() == 3);
    CHECK(back.names == set.names);
    CHECK(back.find("sky") == 1);
    CHECK(back.find("nope") == -1);
    for (const auto& v : back.vectors) CHECK(std::abs(norm(v) - 1.0) < 1e-6);
}

TEST_CASE("average_prompt_embeddings: idempotent on identical prompts") {
    std::vector<double> v = {0.6, 0.8};
    const auto set = embedding::average_prompt_embeddings({{"cat", v}, {"cat", v}});
    REQUIRE(set.class_count() == 1);
    CHECK(set.vectors[0][0] == doctest::Approx(0.6));
    CHECK(set.vectors[0][1] == doctest::Approx(0.8));
}

TEST_CASE("average_prompt_embeddings: orthogonal prompts average and renormalize") {
    const auto set = embedding::average_prompt_embeddings(
        {{"thing", {1.0, 0.0}}, {"thing", {0.0, 1.0}}});
    const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
    CHECK(set.vectors[0][0] == doctest::Approx(inv_sqrt2).epsilon(1e-12));
    CHECK(set.vectors[0][1] == doctest::Approx(inv_sqrt2).epsilon(1e-12));
}

TEST_CASE("average_prompt_embeddings: antipodal prompts are degenerate") {
    CHECK_THROWS_WITH_AS(
        embedding::average_prompt_embeddings({{"x", {1.0, 0.0}}, {"x", {-1.0, 0.0}}}),
        doctest::Contains("degenerate class embedding"), std::invalid_argument);
}

TEST_CASE("average_prompt_embeddings: listed class without prompts") {
    CHECK_THROWS_WITH_AS(
        embedding::average_prompt_embeddings({"a", "b"}, {{"a", {1.0, 0.0}}}),
        doctest::Contains("zero prompts"), std::invalid_argument);
}

TEST_CASE("average_prompt_embeddings: dimension mismatch") {
    CHECK_THROWS(embedding::average_prompt_embeddings({{"a", {1.0}}, {"b", {1.0, 0.0}}}));
}

TEST_CASE("unit-norm invariant holds over random prompt sets") {
    Rng rng(12);
    std::vector<std::pair<std::string, std::vector<double>>> prompts;
    for (int c = 0; c < 5; ++c) {
        const std::string name = "c" + std::to_string(c);
        const int k = 1 + static_cast<int>(rng.below(4));
        for (int i = 0; i < k; ++i) {
            std::vector<double> v(16);
            for (double& x : v) x = rng.normal();
            const double n = norm(v);
            for (double& x : v) x /= n;
            prompts.emplace_back(name, v);
        }
    }
    const auto set = embedding::average_prompt_embeddings(prompts);
    REQUIRE(set.class_count() == 5);
    for (const auto& v : set.vectors) CHECK(std::abs(norm(v) - 1.0) < 1e-6);
}

TEST_CASE("synth_features: zero noise with anchors reproduces anchors exactly") {
    const auto anchors = embedding::random_embeddings({"a", "b"}, 4, 1);
    LabelMap labels(3, 3, 0);
    labels.at(2, 2) = 1;
    embedding::SynthFeatureParams p;
    p.channels = 4;
    p.noise_sigma = 0.0;
    const FeatureMap f = embedding::synth_features(labels, p, &anchors);
    for (std::uint32_t d = 0; d < 4; ++d) {
        CHECK(f.at(d, 0, 0) == anchors.vectors[0][d]);
        CHECK(f.at(d, 2, 2) == anchors.vectors[1][d]);
    }
}

TEST_CASE("synth_features: determinism and noise-free separability") {
    LabelMap labels(8, 8, 0);
    for (std::uint32_t x = 4; x < 8; ++x)
        for (std::uint32_t y = 0; y < 8; ++y) labels.at(y, x) = 1;
    embedding::SynthFeatureParams p;
    p.channels = 8;
    p.noise_sigma = 0.1;
    p.seed = 77;
    const FeatureMap a = embedding::synth_features(labels, p);
    const FeatureMap b = embedding::synth_features(labels, p);
    CHECK(a.values == b.values);

    // Noise-free features classify back to their generating labels.
    p.noise_sigma = 0.0;
    const auto anchors = embedding::random_embeddings({"c0", "c1"}, 8, p.seed);
    const FeatureMap clean = embedding::synth_features(labels, p);
    for (std::uint32_t y = 0; y < 8; ++y)
        for (std::uint32_t x = 0; x < 8; ++x) {
            double best = -2;
            int best_z = -1;
            for (int z = 0; z < 2; ++z) {
                double dot = 0;
                for (std::uint32_t d = 0; d < 8; ++d)
                    dot += clean.at(d, y, x) * anchors.vectors[z][d];
                if (dot > best) {
                    best = dot;
                    best_z = z;
                }
            }
            CHECK(best_z == labels.at(y, x));
        }
}

TEST_CASE("synth_features: per-class mean approaches the anchor (law of large numbers)") {
    const auto anchors = embedding::random_embeddings({"only"}, 16, 5);
    LabelMap labels(64, 64, 0);  // 4096 pixels of one class
    embedding::SynthFeatureParams p;
    p.channels = 16;
    p.noise_sigma = 0.1;
    p.seed = 2024;
    const FeatureMap f = embedding::synth_features(labels, p, &anchors);
    for (std::uint32_t d = 0; d < 16; ++d) {
        double mean = 0;
        for (std::uint32_t y = 0; y < 64; ++y)
            for (std::uint32_t x = 0; x < 64; ++x) mean += f.at(d, y, x);
        mean /= 4096.0;
        CHECK(std::abs(mean - anchors.vectors[0][d]) < 1e-2);
    }
}

TEST_CASE("synth_features: unknown class id is rejected") {
    const auto anchors = embedding::random_embeddings({"a"}, 4, 1);
    LabelMap labels(2, 2, 0);
    labels.at(0, 1) = 3;  // no anchor for class 3
    embedding::SynthFeatureParams p;
    p.channels = 4;
    CHECK_THROWS_WITH_AS(embedding::synth_features(labels, p, &anchors),
                         doctest::Contains("unknown class"), std::invalid_argument);

    labels.at(0, 1) = LabelMap::kIgnore;  // ignore is fine
    CHECK_NOTHROW(embedding::synth_features(labels, p, &anchors));
}

TEST_CASE("pgm round trip") {
    FeatureMap img(1, 3, 5);
    for (std::size_t i = 0; i < img.values.size(); ++i)
        img.values[i] = static_cast<double>(i * 17 % 256);
    std::ostringstream out;
    formats::write_pgm(out, img);
    std::istringstream in(out.str());
    const FeatureMap back = formats::read_pgm(in);
    CHECK(back.height == 3);
    CHECK(back.width == 5);
    CHECK(back.values == img.values);
}
