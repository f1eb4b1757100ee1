#include <doctest.h>

#include <cmath>

#include "openess/embedding.hpp"
#include "openess/openvocab.hpp"
#include "openess/rng.hpp"
#include "openess_ref/reference.hpp"

using namespace openess;
using distill::ProjectionHead;

namespace {

ProjectionHead identity_head(std::uint32_t dim) {
    ProjectionHead h;
    h.in_dim = dim;
    h.out_dim = dim;
    h.weight.assign(static_cast<std::size_t>(dim) * dim, 0.0);
    h.bias.assign(dim, 0.0);
    for (std::uint32_t i = 0; i < dim; ++i) h.weight[static_cast<std::size_t>(i) * dim + i] = 1.0;
    return h;
}

FeatureMap random_map(std::uint32_t d, std::uint32_t h, std::uint32_t w, std::uint64_t seed) {
    Rng rng(seed);
    FeatureMap m(d, h, w);
    for (double& v : m.values) v = rng.uniform(-1.0, 1.0);
    return m;
}

}  // namespace

TEST_CASE("predict_zero_shot: exact match, tie rule, scale invariance") {
    embedding::TextEmbeddingSet texts;
    texts.dim = 3;
    texts.names = {"zero", "one", "two"};
    texts.vectors = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
    const ProjectionHead q = identity_head(3);

    FeatureMap f(3, 1, 3);
    // pixel 0: exactly text 1
    f.at(1, 0, 0) = 1.0;
    // pixel 1: equidistant between classes 0 and 2 -> tie -> class 0
    f.at(0, 0, 1) = 0.5;
    f.at(2, 0, 1) = 0.5;
    // pixel 2: zero vector -> all cosines 0 -> class 0
    const LabelMap pred = openvocab::predict_zero_shot(f, q, texts);
    CHECK(pred.at(0, 0) == 1);
    CHECK(pred.at(0, 1) == 0);
    CHECK(pred.at(0, 2) == 0);

    FeatureMap scaled = f;
    for (double& v : scaled.values) v *= 3.0;
    const LabelMap pred3 = openvocab::predict_zero_shot(scaled, q, texts);
    CHECK(pred3.ids == pred.ids);

    // Deterministic: identical reruns yield identical maps.
    CHECK(openvocab::predict_zero_shot(f, q, texts).ids == pred.ids);
}

TEST_CASE("predict_zero_shot validates dimensions") {
    embedding::TextEmbeddingSet texts;
    texts.dim = 4;
    texts.names = {"a", "b"};
    texts.vectors = {{1, 0, 0, 0}, {0, 1, 0, 0}};
    const ProjectionHead q = identity_head(3);
    const FeatureMap f(3, 2, 2);
    CHECK_THROWS(openvocab::predict_zero_shot(f, q, texts));
}

TEST_CASE("attention_map: aligned, anti-aligned, zero pixels") {
    const ProjectionHead q = identity_head(2);
    FeatureMap f(2, 1, 3);
    f.at(0, 0, 0) = 0.7;   // same direction as text
    f.at(0, 0, 1) = -2.0;  // opposite
    // pixel 2 stays zero
    const std::vector<double> text = {1.0, 0.0};
    const FeatureMap att = openvocab::attention_map(f, q, text);
    CHECK(att.at(0, 0, 0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(att.at(0, 0, 1) == doctest::Approx(-1.0).epsilon(1e-12));
    CHECK(att.at(0, 0, 2) == 0.0);
}

TEST_CASE("attention_map matches the brute-force cosine oracle and stays in range") {
    const FeatureMap f = random_map(5, 6, 7, 33);
    const ProjectionHead q = distill::make_head(5, 4, 8);
    Rng rng(3);
    std::vector<double> text(4);
    for (double& v : text) v = rng.normal();

    const FeatureMap att = openvocab::attention_map(f, q, text);
    const FeatureMap oracle = ref::cosine_map_naive(f, q, text);
    for (std::size_t i = 0; i < att.values.size(); ++i) {
        CHECK(std::abs(att.values[i] - oracle.values[i]) < 1e-9);
        CHECK(att.values[i] >= -1.0 - 1e-12);
        CHECK(att.values[i] <= 1.0 + 1e-12);
    }
}

TEST_CASE("linear_probe: zero steps means zero head, chance-level accuracy") {
    const FeatureMap f = random_map(4, 8, 8, 5);
    LabelMap labels(8, 8, 0);
    for (std::uint32_t i = 0; i < 16; ++i) labels.ids[i] = 1;  // class 1 a quarter of pixels
    openvocab::ProbeConfig cfg;
    cfg.steps = 0;
    const auto res = openvocab::linear_probe({&f}, {&labels}, cfg);
    for (double w : res.head.weight) CHECK(w == 0.0);
    for (double b : res.head.bias) CHECK(b == 0.0);
    // Zero head ties everywhere; the tie rule predicts class 0.
    CHECK(res.train_accuracy == doctest::Approx(48.0 / 64.0));
}

TEST_CASE("linear_probe reaches full accuracy on separable features") {
    const auto anchors = embedding::random_embeddings({"a", "b", "c"}, 8, 2);
    LabelMap labels(10, 10, 0);
    for (std::uint32_t i = 0; i < 100; ++i) labels.ids[i] = static_cast<std::uint8_t>(i % 3);
    embedding::SynthFeatureParams sp;
    sp.channels = 8;
    sp.noise_sigma = 0.02;
    sp.seed = 12;
    const FeatureMap f = embedding::synth_features(labels, sp, &anchors);
    openvocab::ProbeConfig cfg;
    cfg.steps = 300;
    cfg.lr = 2.0;
    const auto res = openvocab::linear_probe({&f}, {&labels}, cfg);
    CHECK(res.train_accuracy == 1.0);
    CHECK(res.absent_classes.empty());
}

TEST_CASE("linear_probe warns about classes absent from training labels") {
    const FeatureMap f = random_map(4, 4, 4, 6);
    LabelMap labels(4, 4, 0);  // only class 0 present
    openvocab::ProbeConfig cfg;
    cfg.classes = 3;
    cfg.steps = 2;
    const auto res = openvocab::linear_probe({&f}, {&labels}, cfg);
    CHECK(res.absent_classes == std::vector<std::uint32_t>{1, 2});
}

TEST_CASE("probe cross-entropy gradients match finite differences") {
    const FeatureMap f = random_map(5, 6, 6, 71);
    LabelMap labels(6, 6, 0);
    Rng rng(8);
    for (auto& id : labels.ids) id = static_cast<std::uint8_t>(rng.below(3));
    labels.ids[7] = LabelMap::kIgnore;

    openvocab::LinearHead head;
    head.classes = 3;
    head.dim = 5;
    head.weight.resize(15);
    head.bias.resize(3);
    for (double& w : head.weight) w = rng.normal() * 0.3;
    for (double& b : head.bias) b = rng.normal() * 0.1;

    openvocab::LinearHead grads;
    openvocab::probe_loss({&f}, {&labels}, head, &grads);

    auto loss = [&]() { return openvocab::probe_loss({&f}, {&labels}, head, nullptr); };
    std::vector<double*> params;
    std::vector<double> analytic;
    for (std::size_t i = 0; i < head.weight.size(); ++i) {
        params.push_back(&head.weight[i]);
        analytic.push_back(grads.weight[i]);
    }
    for (std::size_t i = 0; i < head.bias.size(); ++i) {
        params.push_back(&head.bias[i]);
        analytic.push_back(grads.bias[i]);
    }
    CHECK(ref::max_relative_gradient_error(loss, params, analytic, 1e-6) < 1e-5);
}

TEST_CASE("probe_loss ignores ignore pixels and validates ids") {
    const FeatureMap f = random_map(2, 2, 2, 3);
    LabelMap all_ignore(2, 2, LabelMap::kIgnore);
    openvocab::LinearHead head;
    head.classes = 2;
    head.dim = 2;
    head.weight.assign(4, 0.0);
    head.bias.assign(2, 0.0);
    CHECK_THROWS(openvocab::probe_loss({&f}, {&all_ignore}, head, nullptr));

    LabelMap bad(2, 2, 7);  // id >= classes
    CHECK_THROWS(openvocab::probe_loss({&f}, {&bad}, head, nullptr));
}
