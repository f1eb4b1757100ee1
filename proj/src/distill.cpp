#include "openess/distill.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "openess/rng.hpp"

namespace openess::distill {

namespace {

double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

[[noreturn]] void fail(const std::string& what) { throw std::runtime_error(what); }

}  // namespace

std::vector<double> ProjectionHead::project(const std::vector<double>& v) const {
    if (v.size() != in_dim) fail("projection head: input dimension mismatch");
    std::vector<double> out(out_dim);
    for (std::uint32_t o = 0; o < out_dim; ++o) {
        double acc = bias[o];
        const double* row = weight.data() + static_cast<std::size_t>(o) * in_dim;
        for (std::uint32_t i = 0; i < in_dim; ++i) acc += row[i] * v[i];
        out[o] = acc;
    }
    return out;
}

ProjectionHead make_head(std::uint32_t in_dim, std::uint32_t out_dim, std::uint64_t seed) {
    if (in_dim == 0 || out_dim == 0) fail("make_head: zero dimension");
    ProjectionHead head;
    head.in_dim = in_dim;
    head.out_dim = out_dim;
    head.weight.resize(static_cast<std::size_t>(in_dim) * out_dim);
    head.bias.assign(out_dim, 0.0);
    Rng rng(seed);
    const double limit = std::sqrt(6.0 / in_dim);
    for (double& w : head.weight) w = rng.uniform(-limit, limit);
    return head;
}

PooledBatch pool_project(const FeatureMap& features,
                         const std::vector<std::vector<std::uint32_t>>& pixel_sets,
                         const ProjectionHead& head, bool normalize) {
    if (features.channels != head.in_dim) fail("pool_project: feature/head dimension mismatch");
    const std::size_t pixels = features.pixels();

    PooledBatch batch;
    batch.cache.pixel_sets = pixel_sets;
    batch.cache.normalized = normalize;
    batch.cache.in_dim = head.in_dim;
    batch.cache.out_dim = head.out_dim;
    batch.cache.height = features.height;
    batch.cache.width = features.width;

    for (const auto& set : pixel_sets) {
        if (set.empty()) fail("pool_project: empty or inactive segment requested");
        std::vector<double> mean(head.in_dim, 0.0);
        for (std::uint32_t p : set) {
            if (p >= pixels) fail("pool_project: pixel index out of range");
            for (std::uint32_t d = 0; d < head.in_dim; ++d)
                mean[d] += features.values[static_cast<std::size_t>(d) * pixels + p];
        }
        const double inv = 1.0 / static_cast<double>(set.size());
        for (double& v : mean) v *= inv;
        // The head is affine, so projecting the mean equals the mean of the
        // per-location projections.
        std::vector<double> raw = head.project(mean);
        double norm = std::sqrt(dot(raw, raw));
        std::vector<double> out = raw;
        if (normalize) {
            if (!(norm > 1e-12)) fail("pool_project: zero vector before normalization");
            for (double& v : out) v /= norm;
        }
        batch.cache.mean_features.push_back(std::move(mean));
        batch.cache.raw.push_back(std::move(raw));
        batch.cache.raw_norm.push_back(norm);
        batch.vectors.push_back(std::move(out));
    }
    return batch;
}

void pool_backward(const PoolCache& cache, const ProjectionHead& head_params,
                   const std::vector<std::vector<double>>& grad_pooled,
                   FeatureMap& grad_features, HeadGrads& head) {
    if (grad_pooled.size() != cache.raw.size()) fail("pool_backward: batch size mismatch");
    if (grad_features.channels != cache.in_dim || grad_features.height != cache.height ||
        grad_features.width != cache.width)
        fail("pool_backward: feature gradient shape mismatch");
    if (head.weight.size() != head_params.weight.size()) {
        head.weight.assign(head_params.weight.size(), 0.0);
        head.bias.assign(head_params.bias.size(), 0.0);
    }
    const std::size_t pixels = grad_features.pixels();

    for (std::size_t s = 0; s < cache.raw.size(); ++s) {
        std::vector<double> grad_raw = grad_pooled[s];
        if (cache.normalized) {
            // d(v/|v|) backward: (g - (g.u) u) / |v|.
            const double norm = cache.raw_norm[s];
            std::vector<double> u = cache.raw[s];
            for (double& v : u) v /= norm;
            const double gu = dot(grad_raw, u);
            for (std::size_t d = 0; d < grad_raw.size(); ++d)
                grad_raw[d] = (grad_raw[d] - gu * u[d]) / norm;
        }
        // Affine head: raw = W m + b.
        for (std::uint32_t o = 0; o < cache.out_dim; ++o) {
            head.bias[o] += grad_raw[o];
            double* wrow = head.weight.data() + static_cast<std::size_t>(o) * cache.in_dim;
            for (std::uint32_t i = 0; i < cache.in_dim; ++i)
                wrow[i] += grad_raw[o] * cache.mean_features[s][i];
        }
        // Mean over the pixel set.
        std::vector<double> grad_mean(cache.in_dim, 0.0);
        for (std::uint32_t o = 0; o < cache.out_dim; ++o) {
            const double* wrow =
                head_params.weight.data() + static_cast<std::size_t>(o) * cache.in_dim;
            for (std::uint32_t i = 0; i < cache.in_dim; ++i)
                grad_mean[i] += grad_raw[o] * wrow[i];
        }
        const double inv = 1.0 / static_cast<double>(cache.pixel_sets[s].size());
        for (std::uint32_t p : cache.pixel_sets[s])
            for (std::uint32_t d = 0; d < cache.in_dim; ++d)
                grad_features.values[static_cast<std::size_t>(d) * pixels + p] +=
                    grad_mean[d] * inv;
    }
}

namespace {

std::vector<std::vector<std::uint32_t>> gather_sets(
    const std::vector<std::vector<std::uint32_t>>& all,
    const std::vector<std::uint32_t>& ids) {
    std::vector<std::vector<std::uint32_t>> sets;
    sets.reserve(ids.size());
    for (std::uint32_t id : ids) {
        if (id >= all.size()) fail("pooling: segment id out of range");
        sets.push_back(all[id]);
    }
    return sets;
}

}  // namespace

PooledBatch pool_superevent(const FeatureMap& features, const superpixel::SupereventMap& sev,
                            const std::vector<std::uint32_t>& segment_ids,
                            const ProjectionHead& head, bool normalize) {
    for (std::uint32_t id : segment_ids)
        if (id >= sev.segment_count || !sev.active[id])
            fail("pool_superevent: inactive segment requested");
    return pool_project(features, gather_sets(sev.pixels, segment_ids), head, normalize);
}

PooledBatch pool_superpixel(const FeatureMap& features, const superpixel::SuperpixelMap& sp,
                            const std::vector<std::uint32_t>& segment_ids,
                            const ProjectionHead& head, bool normalize) {
    return pool_project(features, gather_sets(sp.pixel_lists(), segment_ids), head, normalize);
}

LossMode parse_loss_mode(const std::string& name) {
    if (name == "standard") return LossMode::kStandard;
    if (name == "paper-literal") return LossMode::kPaperLiteral;
    fail("unknown loss mode: " + name);
}

ContrastiveResult f2e_loss(const std::vector<std::vector<double>>& event_embeddings,
                           const std::vector<std::vector<double>>& frame_embeddings,
                           double tau, LossMode mode) {
    const std::size_t n = event_embeddings.size();
    if (!(tau > 0.0)) fail("f2e_loss: tau must be > 0");
    if (n < 2) fail("f2e_loss: need at least 2 pairs");
    if (frame_embeddings.size() != n) fail("f2e_loss: batch size mismatch");

    // Similarity logits s_ij = <e_i, f_j> / tau.
    std::vector<double> sims(n * n);
    double pos = 0.0, neg = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            const double s = dot(event_embeddings[i], frame_embeddings[j]);
            if (!std::isfinite(s)) fail("f2e_loss: non-finite similarity");
            sims[i * n + j] = s;
            if (i == j)
                pos += s;
            else
                neg += s;
        }

    ContrastiveResult res;
    res.positive_similarity = pos / static_cast<double>(n);
    res.negative_similarity = n > 1 ? neg / static_cast<double>(n * (n - 1)) : 0.0;

    std::vector<double> grad_s(n * n, 0.0);
    double loss = 0.0;
    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
        // Log-sum-exp over the row's denominator terms, max-shifted.
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < n; ++j) {
            if (mode == LossMode::kPaperLiteral && j == i) continue;
            mx = std::max(mx, sims[i * n + j] / tau);
        }
        double sum = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            if (mode == LossMode::kPaperLiteral && j == i) continue;
            sum += std::exp(sims[i * n + j] / tau - mx);
        }
        const double lse = mx + std::log(sum);
        loss += (lse - sims[i * n + i] / tau) * inv_n;
        for (std::size_t j = 0; j < n; ++j) {
            if (mode == LossMode::kPaperLiteral && j == i) continue;
            grad_s[i * n + j] += std::exp(sims[i * n + j] / tau - lse) * inv_n;
        }
        grad_s[i * n + i] -= inv_n;
    }
    res.loss = loss;

    res.grad_event.assign(n, std::vector<double>(event_embeddings[0].size(), 0.0));
    res.grad_frame.assign(n, std::vector<double>(frame_embeddings[0].size(), 0.0));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            const double g = grad_s[i * n + j] / tau;
            if (g == 0.0) continue;
            for (std::size_t d = 0; d < res.grad_event[i].size(); ++d)
                res.grad_event[i][d] += g * frame_embeddings[j][d];
            for (std::size_t d = 0; d < res.grad_frame[j].size(); ++d)
                res.grad_frame[j][d] += g * event_embeddings[i][d];
        }
    return res;
}

LabelMap pseudo_label(const FeatureMap& frame_features,
                      const embedding::TextEmbeddingSet& texts, double threshold) {
    if (frame_features.channels != texts.dim)
        fail("pseudo_label: feature/text dimension mismatch");
    const std::size_t pixels = frame_features.pixels();
    const std::uint32_t z_count = texts.class_count();
    LabelMap out(frame_features.height, frame_features.width, LabelMap::kIgnore);
#pragma omp parallel for schedule(static)
    for (long long pi = 0; pi < static_cast<long long>(pixels); ++pi) {
        const std::size_t p = static_cast<std::size_t>(pi);
        double norm_sq = 0.0;
        for (std::uint32_t d = 0; d < frame_features.channels; ++d) {
            const double v = frame_features.values[static_cast<std::size_t>(d) * pixels + p];
            norm_sq += v * v;
        }
        const double norm = std::sqrt(norm_sq);
        double best = -2.0;
        std::uint32_t best_z = 0;
        for (std::uint32_t z = 0; z < z_count; ++z) {
            double s = 0.0;
            for (std::uint32_t d = 0; d < frame_features.channels; ++d)
                s += frame_features.values[static_cast<std::size_t>(d) * pixels + p] *
                     texts.vectors[z][d];
            const double cosv = norm > 1e-12 ? s / norm : 0.0;
            if (cosv > best) {
                best = cosv;
                best_z = z;
            }
        }
        out.ids[p] = best >= threshold ? static_cast<std::uint8_t>(best_z) : LabelMap::kIgnore;
    }
    return out;
}

ConsistencyResult t2e_loss(const std::vector<std::vector<double>>& class_embeddings,
                           const std::vector<std::uint32_t>& class_ids,
                           const embedding::TextEmbeddingSet& texts, double tau) {
    if (!(tau > 0.0)) fail("t2e_loss: tau must be > 0");
    if (class_embeddings.empty()) fail("t2e_loss: no pooled classes");
    if (class_embeddings.size() != class_ids.size()) fail("t2e_loss: id/embedding mismatch");
    const std::uint32_t z_count = texts.class_count();
    if (z_count < 2) fail("t2e_loss: fewer than 2 classes");

    ConsistencyResult res;
    const std::size_t n = class_embeddings.size();
    const double inv_n = 1.0 / static_cast<double>(n);
    res.grad_event.assign(n, std::vector<double>(texts.dim, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
        if (class_ids[i] >= z_count) fail("t2e_loss: class id out of range");
        std::vector<double> logits(z_count);
        double mx = -std::numeric_limits<double>::infinity();
        for (std::uint32_t z = 0; z < z_count; ++z) {
            logits[z] = dot(class_embeddings[i], texts.vectors[z]) / tau;
            if (!std::isfinite(logits[z])) fail("t2e_loss: non-finite similarity");
            mx = std::max(mx, logits[z]);
        }
        double sum = 0.0;
        for (double l : logits) sum += std::exp(l - mx);
        const double lse = mx + std::log(sum);
        res.loss += (lse - logits[class_ids[i]]) * inv_n;
        for (std::uint32_t z = 0; z < z_count; ++z) {
            const double p = std::exp(logits[z] - lse);
            const double g = (p - (z == class_ids[i] ? 1.0 : 0.0)) * inv_n / tau;
            for (std::uint32_t d = 0; d < texts.dim; ++d)
                res.grad_event[i][d] += g * texts.vectors[z][d];
        }
    }
    return res;
}

ClassPixelSets class_pixel_sets(const LabelMap& plabels,
                                const std::vector<std::uint8_t>& occupied_mask,
                                std::uint32_t class_count) {
    if (occupied_mask.size() != plabels.pixels())
        fail("class_pixel_sets: occupancy mask size mismatch");
    std::vector<std::uint8_t> present(class_count, 0);
    for (std::uint8_t id : plabels.ids) {
        if (id == LabelMap::kIgnore) continue;
        if (id >= class_count) fail("class_pixel_sets: class id out of range");
        present[id] = 1;
    }
    std::uint32_t present_count = 0;
    for (std::uint8_t p : present) present_count += p;
    if (present_count < 2) fail("class_pixel_sets: fewer than 2 classes present");

    std::vector<std::vector<std::uint32_t>> sets(class_count);
    for (std::uint32_t p = 0; p < plabels.pixels(); ++p) {
        const std::uint8_t id = plabels.ids[p];
        if (id == LabelMap::kIgnore || !occupied_mask[p]) continue;
        sets[id].push_back(p);
    }
    ClassPixelSets out;
    for (std::uint32_t z = 0; z < class_count; ++z) {
        if (!present[z]) continue;
        if (sets[z].empty()) {
            ++out.skipped_classes;  // present but nothing event-occupied
            continue;
        }
        out.class_ids.push_back(z);
        out.pixel_sets.push_back(std::move(sets[z]));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Config
// ---------------------------------------------------------------------------

void TrainConfig::validate() const {
    if (!(tau1 > 0.0)) fail("config: tau1 must be > 0");
    if (!(tau2 > 0.0)) fail("config: tau2 must be > 0");
    if (alpha < 0.0) fail("config: alpha must be >= 0");
    if (lr < 0.0) fail("config: lr must be >= 0");
    if (momentum < 0.0 || momentum >= 1.0) fail("config: momentum must be in [0, 1)");
    if (steps == 0) fail("config: steps must be >= 1");
    if (batch_samples == 0) fail("config: batch_samples must be >= 1");
    if (superpixel_source != "slic" && superpixel_source != "mask")
        fail("config: superpixel_source must be slic or mask");
    if (optimizer != "sgd" && optimizer != "adam") fail("config: unknown optimizer");
    if (schedule != "constant" && schedule != "cosine") fail("config: unknown schedule");
    if (bins == 0) fail("config: bins must be >= 1");
    if (d1 == 0) fail("config: d1 must be >= 1");
    if (events_per_window == 0) fail("config: events_per_window must be >= 1");
    if (min_events == 0) fail("config: min_events must be >= 1");
    if (!(pseudo_threshold >= -1.0 && pseudo_threshold <= 1.0))
        fail("config: pseudo_threshold must be in [-1, 1]");
}

TrainConfig parse_train_config(const std::string& text) {
    TrainConfig cfg;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        // trim
        const auto b = line.find_first_not_of(" \t\r");
        if (b == std::string::npos) continue;
        const auto e = line.find_last_not_of(" \t\r");
        line = line.substr(b, e - b + 1);
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            fail("config line " + std::to_string(lineno) + ": expected key=value");
        std::string key = line.substr(0, eq);
        std::string value = line.substr(eq + 1);
        auto trim = [](std::string& s) {
            const auto bb = s.find_first_not_of(" \t");
            const auto ee = s.find_last_not_of(" \t");
            s = bb == std::string::npos ? "" : s.substr(bb, ee - bb + 1);
        };
        trim(key);
        trim(value);
        if (value.empty()) fail("config: empty value for " + key);

        auto as_double = [&value, &key]() {
            std::size_t used = 0;
            const double v = std::stod(value, &used);
            if (used != value.size()) fail("config: bad number for " + key);
            return v;
        };
        auto as_u32 = [&value, &key]() {
            const long long v = std::stoll(value);
            if (v < 0 || std::to_string(v) != value) fail("config: bad integer for " + key);
            return static_cast<std::uint32_t>(v);
        };

        if (key == "batch_samples") cfg.batch_samples = as_u32();
        else if (key == "tau1") cfg.tau1 = as_double();
        else if (key == "tau2") cfg.tau2 = as_double();
        else if (key == "alpha") cfg.alpha = as_double();
        else if (key == "lr") cfg.lr = as_double();
        else if (key == "momentum") cfg.momentum = as_double();
        else if (key == "steps") cfg.steps = as_u32();
        else if (key == "batch_pairs") cfg.batch_pairs = as_u32();
        else if (key == "seed") cfg.seed = static_cast<std::uint64_t>(std::stoull(value));
        else if (key == "loss_mode") cfg.loss_mode = parse_loss_mode(value);
        else if (key == "normalize") cfg.normalize = value == "1" || value == "true";
        else if (key == "superpixel_source") cfg.superpixel_source = value;
        else if (key == "M" || key == "segments") cfg.segments = as_u32();
        else if (key == "optimizer") cfg.optimizer = value;
        else if (key == "schedule") cfg.schedule = value;
        else if (key == "events_per_window") cfg.events_per_window = as_u32();
        else if (key == "bins") cfg.bins = as_u32();
        else if (key == "d1") cfg.d1 = as_u32();
        else if (key == "proj_dim") cfg.proj_dim = as_u32();
        else if (key == "pseudo_threshold") cfg.pseudo_threshold = as_double();
        else if (key == "slic_compactness") cfg.slic_compactness = as_double();
        else if (key == "slic_iters") cfg.slic_iters = as_u32();
        else if (key == "min_events") cfg.min_events = as_u32();
        else if (key == "hidden") {
            cfg.hidden.clear();
            std::istringstream hs(value);
            std::string tok;
            while (std::getline(hs, tok, ','))
                cfg.hidden.push_back(static_cast<std::uint32_t>(std::stoul(tok)));
        } else
            fail("config: unknown key " + key);
    }
    cfg.validate();
    return cfg;
}

// ---------------------------------------------------------------------------
// Optimizer
// ---------------------------------------------------------------------------

Optimizer::Optimizer(std::string kind, double lr, double momentum, std::size_t size)
    : kind_(std::move(kind)), lr_(lr), momentum_(momentum) {
    m_.assign(size, 0.0);
    if (kind_ == "adam") v_.assign(size, 0.0);
    else if (kind_ != "sgd") fail("optimizer: unknown kind " + kind_);
}

void Optimizer::step(const ParamView& view, double lr_scale) {
    if (view.size != m_.size()) fail("optimizer: parameter count changed");
    const double lr = lr_ * lr_scale;
    if (kind_ == "sgd") {
#pragma omp parallel for schedule(static)
        for (long long i = 0; i < static_cast<long long>(view.size); ++i) {
            const std::size_t k = static_cast<std::size_t>(i);
            m_[k] = momentum_ * m_[k] + *view.grads[k];
            *view.params[k] -= lr * m_[k];
        }
    } else {
        ++t_;
        const double b1 = 0.9, b2 = 0.999, eps = 1e-8;
        const double bc1 = 1.0 - std::pow(b1, static_cast<double>(t_));
        const double bc2 = 1.0 - std::pow(b2, static_cast<double>(t_));
#pragma omp parallel for schedule(static)
        for (long long i = 0; i < static_cast<long long>(view.size); ++i) {
            const std::size_t k = static_cast<std::size_t>(i);
            const double g = *view.grads[k];
            m_[k] = b1 * m_[k] + (1.0 - b1) * g;
            v_[k] = b2 * v_[k] + (1.0 - b2) * g * g;
            *view.params[k] -= lr * (m_[k] / bc1) / (std::sqrt(v_[k] / bc2) + eps);
        }
    }
}

double cosine_lr_scale(std::uint32_t step, std::uint32_t total_steps) {
    if (total_steps <= 1) return 1.0;
    const double x = static_cast<double>(step) / static_cast<double>(total_steps - 1);
    return 0.5 * (1.0 + std::cos(std::numbers::pi * x));
}

// ---------------------------------------------------------------------------
// Training loop
// ---------------------------------------------------------------------------

namespace {

void append_view(ParamView& view, std::vector<double>& params, std::vector<double>& grads) {
    for (std::size_t i = 0; i < params.size(); ++i) {
        view.params.push_back(&params[i]);
        view.grads.push_back(&grads[i]);
    }
    view.size += params.size();
}

}  // namespace

DistillModel init_model(const TrainConfig& cfg, std::uint32_t in_channels,
                        std::uint32_t frame_dim, std::uint32_t text_dim) {
    DistillModel model;
    std::vector<std::uint32_t> widths;
    widths.push_back(in_channels);
    for (std::uint32_t w : cfg.hidden) widths.push_back(w);
    widths.push_back(cfg.d1);
    model.enc = encoder::make_encoder(widths, cfg.seed);
    const std::uint32_t proj = cfg.proj_dim ? cfg.proj_dim : text_dim;
    model.head_event = make_head(cfg.d1, proj, cfg.seed + 1);
    model.head_frame = make_head(frame_dim, proj, cfg.seed + 2);
    model.head_query = make_head(cfg.d1, text_dim, cfg.seed + 3);
    return model;
}

TrainResult train(const TrainConfig& cfg, const std::vector<TrainSample>& samples,
                  const embedding::TextEmbeddingSet& texts) {
    cfg.validate();
    if (samples.empty()) fail("train: empty batch");
    const auto& first = samples.front();
    TrainResult result;
    result.model = init_model(cfg, first.event_input.channels, first.frame_features.channels,
                              texts.dim);
    DistillModel& model = result.model;

    // Gradient buffers mirroring the trainable parameters.
    std::vector<encoder::ConvLayer> enc_grads;
    for (const auto& l : model.enc.layers) {
        encoder::ConvLayer g;
        g.in_channels = l.in_channels;
        g.out_channels = l.out_channels;
        g.weights.assign(l.weights.size(), 0.0);
        g.bias.assign(l.bias.size(), 0.0);
        enc_grads.push_back(std::move(g));
    }
    HeadGrads ge{std::vector<double>(model.head_event.weight.size(), 0.0),
                 std::vector<double>(model.head_event.bias.size(), 0.0)};
    HeadGrads gf{std::vector<double>(model.head_frame.weight.size(), 0.0),
                 std::vector<double>(model.head_frame.bias.size(), 0.0)};
    HeadGrads gq{std::vector<double>(model.head_query.weight.size(), 0.0),
                 std::vector<double>(model.head_query.bias.size(), 0.0)};

    ParamView view;
    for (std::size_t l = 0; l < model.enc.layers.size(); ++l) {
        append_view(view, model.enc.layers[l].weights, enc_grads[l].weights);
        append_view(view, model.enc.layers[l].bias, enc_grads[l].bias);
    }
    append_view(view, model.head_event.weight, ge.weight);
    append_view(view, model.head_event.bias, ge.bias);
    append_view(view, model.head_frame.weight, gf.weight);
    append_view(view, model.head_frame.bias, gf.bias);
    append_view(view, model.head_query.weight, gq.weight);
    append_view(view, model.head_query.bias, gq.bias);

    Optimizer opt(cfg.optimizer, cfg.lr, cfg.momentum, view.size);

    for (std::uint32_t step = 0; step < cfg.steps; ++step) {
        for (auto& g : enc_grads) {
            std::fill(g.weights.begin(), g.weights.end(), 0.0);
            std::fill(g.bias.begin(), g.bias.end(), 0.0);
        }
        auto zero_head = [](HeadGrads& g) {
            std::fill(g.weight.begin(), g.weight.end(), 0.0);
            std::fill(g.bias.begin(), g.bias.end(), 0.0);
        };
        zero_head(ge);
        zero_head(gf);
        zero_head(gq);

        TraceRow row;
        row.step = step;
        std::uint32_t f2e_terms = 0;

        for (std::uint32_t b = 0; b < cfg.batch_samples; ++b) {
            const std::size_t index =
                (static_cast<std::size_t>(step) * cfg.batch_samples + b) % samples.size();
            const TrainSample& sample = samples[index];

            encoder::Activations acts;
            const FeatureMap event_features =
                encoder::forward(model.enc, sample.event_input, &acts);
            FeatureMap grad_features(event_features.channels, event_features.height,
                                     event_features.width);

            // F2E over active segments (capped at batch_pairs when configured).
            std::vector<std::uint32_t> active;
            for (std::uint32_t s = 0; s < sample.superevents.segment_count; ++s)
                if (sample.superevents.active[s] && !sample.superevents.pixels[s].empty())
                    active.push_back(s);
            if (cfg.batch_pairs > 0 && active.size() > cfg.batch_pairs)
                active.resize(cfg.batch_pairs);
            if (active.size() >= 2) {
                PooledBatch pe = pool_superevent(event_features, sample.superevents, active,
                                                 model.head_event, cfg.normalize);
                PooledBatch pf = pool_superpixel(sample.frame_features, sample.superpixels,
                                                 active, model.head_frame, cfg.normalize);
                ContrastiveResult f2e =
                    f2e_loss(pe.vectors, pf.vectors, cfg.tau1, cfg.loss_mode);
                row.loss_f2e += f2e.loss;
                row.pos_sim += f2e.positive_similarity;
                row.neg_sim += f2e.negative_similarity;
                ++f2e_terms;
                pool_backward(pe.cache, model.head_event, f2e.grad_event, grad_features, ge);
                FeatureMap grad_frame_unused(sample.frame_features.channels,
                                             sample.frame_features.height,
                                             sample.frame_features.width);
                pool_backward(pf.cache, model.head_frame, f2e.grad_frame, grad_frame_unused,
                              gf);
            } else {
                ++result.skipped_f2e_steps;
            }

            // T2E over pseudo-label classes restricted to event-occupied pixels.
            if (cfg.alpha > 0.0) {
                ClassPixelSets sets = class_pixel_sets(sample.pseudo_labels, sample.occupied,
                                                       texts.class_count());
                result.skipped_t2e_classes += sets.skipped_classes;
                if (!sets.class_ids.empty()) {
                    PooledBatch pq = pool_project(event_features, sets.pixel_sets,
                                                  model.head_query, cfg.normalize);
                    ConsistencyResult t2e =
                        t2e_loss(pq.vectors, sets.class_ids, texts, cfg.tau2);
                    row.loss_t2e += t2e.loss;
                    for (auto& g : t2e.grad_event)
                        for (double& v : g) v *= cfg.alpha;
                    pool_backward(pq.cache, model.head_query, t2e.grad_event, grad_features,
                                  gq);
                }
            }

            encoder::EncoderGrads eg = encoder::backward(model.enc, acts, grad_features);
            // Accumulate into the pre-pinned gradient buffers; the optimizer
            // view holds raw pointers into them.
            for (std::size_t l = 0; l < enc_grads.size(); ++l) {
                for (std::size_t i = 0; i < enc_grads[l].weights.size(); ++i)
                    enc_grads[l].weights[i] += eg.layers[l].weights[i];
                for (std::size_t i = 0; i < enc_grads[l].bias.size(); ++i)
                    enc_grads[l].bias[i] += eg.layers[l].bias[i];
            }
        }

        // Means over the batch.
        const double inv_b = 1.0 / static_cast<double>(cfg.batch_samples);
        if (cfg.batch_samples > 1) {
            for (auto& g : enc_grads) {
                for (double& v : g.weights) v *= inv_b;
                for (double& v : g.bias) v *= inv_b;
            }
            for (auto* g : {&ge, &gf, &gq}) {
                for (double& v : g->weight) v *= inv_b;
                for (double& v : g->bias) v *= inv_b;
            }
        }
        if (f2e_terms > 0) {
            row.loss_f2e /= f2e_terms;
            row.pos_sim /= f2e_terms;
            row.neg_sim /= f2e_terms;
        }
        row.loss_t2e *= inv_b;
        row.loss_total = row.loss_f2e + cfg.alpha * row.loss_t2e;
        if (!std::isfinite(row.loss_total))
            fail("train: non-finite loss at step " + std::to_string(step));

        const double scale =
            cfg.schedule == "cosine" ? cosine_lr_scale(step, cfg.steps) : 1.0;
        opt.step(view, scale);
        result.trace.push_back(row);
    }
    return result;
}

std::string trace_csv(const std::vector<TraceRow>& trace) {
    std::ostringstream out;
    out << "step,loss_total,loss_f2e,loss_t2e,pos_sim,neg_sim\n";
    out.precision(17);
    for (const auto& r : trace)
        out << r.step << ',' << r.loss_total << ',' << r.loss_f2e << ',' << r.loss_t2e << ','
            << r.pos_sim << ',' << r.neg_sim << '\n';
    return out.str();
}

}  // namespace openess::distill
