#include "openess/openvocab.hpp"

#include <cmath>
#include <iostream>
#include <limits>
#include <stdexcept>

#include "openess/parallel.hpp"

namespace openess::openvocab {

namespace {

[[noreturn]] void fail(const std::string& what) { throw std::runtime_error(what); }

}  // namespace

LabelMap predict_zero_shot(const FeatureMap& event_features,
                           const distill::ProjectionHead& head_q,
                           const embedding::TextEmbeddingSet& texts) {
    if (event_features.channels != head_q.in_dim)
        fail("predict_zero_shot: feature/head dimension mismatch");
    if (head_q.out_dim != texts.dim) fail("predict_zero_shot: head/text dimension mismatch");
    const std::size_t pixels = event_features.pixels();
    const std::uint32_t z_count = texts.class_count();
    if (z_count == 0) fail("predict_zero_shot: empty text set");

    LabelMap out(event_features.height, event_features.width);
#pragma omp parallel for schedule(static)
    for (long long pi = 0; pi < static_cast<long long>(pixels); ++pi) {
        const std::size_t p = static_cast<std::size_t>(pi);
        std::vector<double> feat(head_q.in_dim);
        for (std::uint32_t d = 0; d < head_q.in_dim; ++d)
            feat[d] = event_features.values[static_cast<std::size_t>(d) * pixels + p];
        const std::vector<double> proj = head_q.project(feat);
        double norm_sq = 0.0;
        for (double v : proj) norm_sq += v * v;
        const double norm = std::sqrt(norm_sq);
        double best = -std::numeric_limits<double>::infinity();
        std::uint32_t best_z = 0;
        for (std::uint32_t z = 0; z < z_count; ++z) {
            double s = 0.0;
            for (std::uint32_t d = 0; d < texts.dim; ++d) s += proj[d] * texts.vectors[z][d];
            const double cosv = norm > 1e-12 ? s / norm : 0.0;
            if (cosv > best) {  // strict: ties keep the lowest class index
                best = cosv;
                best_z = z;
            }
        }
        out.ids[p] = static_cast<std::uint8_t>(best_z);
    }
    return out;
}

FeatureMap attention_map(const FeatureMap& event_features,
                         const distill::ProjectionHead& head_q,
                         const std::vector<double>& text) {
    if (event_features.channels != head_q.in_dim)
        fail("attention_map: feature/head dimension mismatch");
    if (text.size() != head_q.out_dim) fail("attention_map: text dimension mismatch");
    double text_norm_sq = 0.0;
    for (double v : text) text_norm_sq += v * v;
    const double text_norm = std::sqrt(text_norm_sq);
    if (!(text_norm > 1e-12)) fail("attention_map: zero text vector");

    const std::size_t pixels = event_features.pixels();
    FeatureMap out(1, event_features.height, event_features.width);
#pragma omp parallel for schedule(static)
    for (long long pi = 0; pi < static_cast<long long>(pixels); ++pi) {
        const std::size_t p = static_cast<std::size_t>(pi);
        std::vector<double> feat(head_q.in_dim);
        for (std::uint32_t d = 0; d < head_q.in_dim; ++d)
            feat[d] = event_features.values[static_cast<std::size_t>(d) * pixels + p];
        const std::vector<double> proj = head_q.project(feat);
        double norm_sq = 0.0, s = 0.0;
        for (std::size_t d = 0; d < proj.size(); ++d) {
            norm_sq += proj[d] * proj[d];
            s += proj[d] * text[d];
        }
        const double norm = std::sqrt(norm_sq);
        out.values[p] = norm > 1e-12 ? s / (norm * text_norm) : 0.0;
    }
    return out;
}

LabelMap predict_linear(const FeatureMap& features, const LinearHead& head) {
    if (features.channels != head.dim) fail("predict_linear: dimension mismatch");
    const std::size_t pixels = features.pixels();
    LabelMap out(features.height, features.width);
#pragma omp parallel for schedule(static)
    for (long long pi = 0; pi < static_cast<long long>(pixels); ++pi) {
        const std::size_t p = static_cast<std::size_t>(pi);
        double best = -std::numeric_limits<double>::infinity();
        std::uint32_t best_z = 0;
        for (std::uint32_t z = 0; z < head.classes; ++z) {
            double s = head.bias[z];
            const double* row = head.weight.data() + static_cast<std::size_t>(z) * head.dim;
            for (std::uint32_t d = 0; d < head.dim; ++d)
                s += row[d] * features.values[static_cast<std::size_t>(d) * pixels + p];
            if (s > best) {
                best = s;
                best_z = z;
            }
        }
        out.ids[p] = static_cast<std::uint8_t>(best_z);
    }
    return out;
}

double probe_loss(const std::vector<const FeatureMap*>& features,
                  const std::vector<const LabelMap*>& labels, const LinearHead& head,
                  LinearHead* grads) {
    if (features.size() != labels.size()) fail("probe_loss: dataset size mismatch");
    const std::uint32_t zc = head.classes, dim = head.dim;

    // Count usable pixels first so gradients are means.
    std::size_t count = 0;
    for (std::size_t s = 0; s < features.size(); ++s) {
        if (features[s]->channels != dim) fail("probe_loss: feature dimension mismatch");
        if (features[s]->height != labels[s]->height || features[s]->width != labels[s]->width)
            fail("probe_loss: feature/label shape mismatch");
        for (std::uint8_t id : labels[s]->ids) {
            if (id == LabelMap::kIgnore) continue;
            if (id >= zc) fail("probe_loss: class id out of range");
            ++count;
        }
    }
    if (count == 0) fail("probe_loss: no labeled pixels");

    if (grads) {
        grads->classes = zc;
        grads->dim = dim;
        grads->weight.assign(static_cast<std::size_t>(zc) * dim, 0.0);
        grads->bias.assign(zc, 0.0);
    }
    const double inv = 1.0 / static_cast<double>(count);
    double loss = 0.0;
    for (std::size_t s = 0; s < features.size(); ++s) {
        const FeatureMap& f = *features[s];
        const LabelMap& l = *labels[s];
        const std::size_t pixels = f.pixels();
        loss += deterministic_sum(pixels, [&](std::size_t p) {
            const std::uint8_t target = l.ids[p];
            if (target == LabelMap::kIgnore) return 0.0;
            double mx = -std::numeric_limits<double>::infinity();
            std::vector<double> logits(zc);
            for (std::uint32_t z = 0; z < zc; ++z) {
                double v = head.bias[z];
                const double* row = head.weight.data() + static_cast<std::size_t>(z) * dim;
                for (std::uint32_t d = 0; d < dim; ++d)
                    v += row[d] * f.values[static_cast<std::size_t>(d) * pixels + p];
                logits[z] = v;
                mx = std::max(mx, v);
            }
            double sum = 0.0;
            for (double v : logits) sum += std::exp(v - mx);
            const double lse = mx + std::log(sum);
            return (lse - logits[target]) * inv;
        });
        if (grads) {
            // Per-row accumulation in fixed pixel order keeps the gradients
            // reproducible under any thread count.
#pragma omp parallel for schedule(static)
            for (long long zi = 0; zi < static_cast<long long>(zc); ++zi) {
                const std::uint32_t z = static_cast<std::uint32_t>(zi);
                double* grow = grads->weight.data() + static_cast<std::size_t>(z) * dim;
                double gb = grads->bias[z];
                for (std::size_t p = 0; p < pixels; ++p) {
                    const std::uint8_t target = l.ids[p];
                    if (target == LabelMap::kIgnore) continue;
                    double mx = -std::numeric_limits<double>::infinity();
                    std::vector<double> logits(zc);
                    for (std::uint32_t q = 0; q < zc; ++q) {
                        double v = head.bias[q];
                        const double* row =
                            head.weight.data() + static_cast<std::size_t>(q) * dim;
                        for (std::uint32_t d = 0; d < dim; ++d)
                            v += row[d] * f.values[static_cast<std::size_t>(d) * pixels + p];
                        logits[q] = v;
                        mx = std::max(mx, v);
                    }
                    double sum = 0.0;
                    for (double v : logits) sum += std::exp(v - mx);
                    const double lse = mx + std::log(sum);
                    const double pz = std::exp(logits[z] - lse);
                    const double g = (pz - (z == target ? 1.0 : 0.0)) * inv;
                    gb += g;
                    for (std::uint32_t d = 0; d < dim; ++d)
                        grow[d] += g * f.values[static_cast<std::size_t>(d) * pixels + p];
                }
                grads->bias[z] = gb;
            }
        }
    }
    return loss;
}

ProbeResult linear_probe(const std::vector<const FeatureMap*>& features,
                         const std::vector<const LabelMap*>& labels, const ProbeConfig& cfg) {
    if (features.empty()) fail("linear_probe: empty dataset");
    std::uint32_t zc = cfg.classes;
    if (zc == 0) {
        for (const auto* l : labels)
            for (std::uint8_t id : l->ids)
                if (id != LabelMap::kIgnore && id + 1u > zc) zc = id + 1u;
    }
    if (zc == 0) fail("linear_probe: no labeled pixels");

    std::vector<std::uint8_t> seen(zc, 0);
    for (const auto* l : labels)
        for (std::uint8_t id : l->ids)
            if (id != LabelMap::kIgnore) seen[id] = 1;

    ProbeResult res;
    for (std::uint32_t z = 0; z < zc; ++z)
        if (!seen[z]) {
            res.absent_classes.push_back(z);
            std::cerr << "linear_probe: warning: class " << z
                      << " absent from training labels; its row trains on negatives only\n";
        }

    res.head.classes = zc;
    res.head.dim = features.front()->channels;
    res.head.weight.assign(static_cast<std::size_t>(zc) * res.head.dim, 0.0);
    res.head.bias.assign(zc, 0.0);

    LinearHead grads;
    for (std::uint32_t step = 0; step < cfg.steps; ++step) {
        res.final_cross_entropy = probe_loss(features, labels, res.head, &grads);
        for (std::size_t i = 0; i < res.head.weight.size(); ++i)
            res.head.weight[i] -= cfg.lr * grads.weight[i];
        for (std::size_t i = 0; i < res.head.bias.size(); ++i)
            res.head.bias[i] -= cfg.lr * grads.bias[i];
    }
    res.final_cross_entropy = probe_loss(features, labels, res.head, nullptr);

    // Training pixel accuracy.
    std::size_t correct = 0, total = 0;
    for (std::size_t s = 0; s < features.size(); ++s) {
        const LabelMap pred = predict_linear(*features[s], res.head);
        for (std::size_t p = 0; p < pred.pixels(); ++p) {
            const std::uint8_t gt = labels[s]->ids[p];
            if (gt == LabelMap::kIgnore) continue;
            ++total;
            if (pred.ids[p] == gt) ++correct;
        }
    }
    res.train_accuracy = total ? static_cast<double>(correct) / static_cast<double>(total) : 0.0;
    return res;
}

}  // namespace openess::openvocab
