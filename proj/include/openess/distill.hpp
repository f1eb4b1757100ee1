#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "openess/embedding.hpp"
#include "openess/encoder.hpp"
#include "openess/superpixel.hpp"
#include "openess/tensor.hpp"

namespace openess::distill {

/// Linear projection applied per pixel location.
struct ProjectionHead {
    std::uint32_t in_dim = 0;
    std::uint32_t out_dim = 0;
    std::vector<double> weight;  // [out][in]
    std::vector<double> bias;    // [out]

    std::vector<double> project(const std::vector<double>& v) const;
};

ProjectionHead make_head(std::uint32_t in_dim, std::uint32_t out_dim, std::uint64_t seed);

/// Intermediates of a project-and-pool pass, kept for the backward pass.
struct PoolCache {
    std::vector<std::vector<std::uint32_t>> pixel_sets;
    std::vector<std::vector<double>> mean_features;  // per set, in_dim
    std::vector<std::vector<double>> raw;            // projected means, out_dim
    std::vector<double> raw_norm;
    bool normalized = true;
    std::uint32_t in_dim = 0, out_dim = 0, height = 0, width = 0;
};

struct PooledBatch {
    std::vector<std::vector<double>> vectors;  // unit-norm unless !normalized
    PoolCache cache;
};

/// Per set: mean of the per-location projections over the set's pixels, then
/// L2 normalization (optional). Empty sets and zero vectors before
/// normalization are errors.
PooledBatch pool_project(const FeatureMap& features,
                         const std::vector<std::vector<std::uint32_t>>& pixel_sets,
                         const ProjectionHead& head, bool normalize = true);

struct HeadGrads {
    std::vector<double> weight;
    std::vector<double> bias;
};

/// Backward through normalization, mean and projection. Feature gradients
/// accumulate into `grad_features`; head gradients accumulate into `head`.
void pool_backward(const PoolCache& cache, const ProjectionHead& head_params,
                   const std::vector<std::vector<double>>& grad_pooled,
                   FeatureMap& grad_features, HeadGrads& head);

/// Mean over superevent pixels (event-occupied only), active segments only.
/// Returns the pooled vectors in ascending segment order of `segment_ids`.
PooledBatch pool_superevent(const FeatureMap& features, const superpixel::SupereventMap& sev,
                            const std::vector<std::uint32_t>& segment_ids,
                            const ProjectionHead& head, bool normalize = true);

/// Mean over all pixels of each superpixel segment.
PooledBatch pool_superpixel(const FeatureMap& features, const superpixel::SuperpixelMap& sp,
                            const std::vector<std::uint32_t>& segment_ids,
                            const ProjectionHead& head, bool normalize = true);

enum class LossMode {
    kStandard,      // InfoNCE; positive pair included in the denominator
    kPaperLiteral,  // denominator excludes the positive pair (can go negative)
};

LossMode parse_loss_mode(const std::string& name);

struct ContrastiveResult {
    double loss = 0.0;
    std::vector<std::vector<double>> grad_event;  // d loss / d event embedding
    std::vector<std::vector<double>> grad_frame;  // d loss / d frame embedding
    double positive_similarity = 0.0;
    double negative_similarity = 0.0;
};

/// Frame-to-event contrastive loss over N (event, frame) embedding pairs:
/// per anchor i, cross-entropy of softmax(<e_i, f_j>/tau) toward j = i,
/// averaged over anchors. Requires N >= 2 and tau > 0.
ContrastiveResult f2e_loss(const std::vector<std::vector<double>>& event_embeddings,
                           const std::vector<std::vector<double>>& frame_embeddings,
                           double tau, LossMode mode = LossMode::kStandard);

/// Per pixel, argmax_z cosine(feature, text_z); below-threshold maxima are
/// ignored. Feature channel count must equal the text dimension.
LabelMap pseudo_label(const FeatureMap& frame_features,
                      const embedding::TextEmbeddingSet& texts, double threshold);

struct ConsistencyResult {
    double loss = 0.0;
    std::vector<std::vector<double>> grad_event;  // per pooled class embedding
    std::uint32_t skipped_classes = 0;
};

/// Class-level consistency: pooled event embedding of class z against every
/// class text embedding, softmax toward z, averaged over pooled classes.
/// Text embeddings are frozen.
ConsistencyResult t2e_loss(const std::vector<std::vector<double>>& class_embeddings,
                           const std::vector<std::uint32_t>& class_ids,
                           const embedding::TextEmbeddingSet& texts, double tau);

/// Pixel sets per pseudo-label class restricted to event-occupied pixels.
/// Classes with no occupied pixel are skipped (and counted); fewer than two
/// classes present in the pseudo labels is an error.
struct ClassPixelSets {
    std::vector<std::uint32_t> class_ids;
    std::vector<std::vector<std::uint32_t>> pixel_sets;
    std::uint32_t skipped_classes = 0;
};
ClassPixelSets class_pixel_sets(const LabelMap& plabels,
                                const std::vector<std::uint8_t>& occupied_mask,
                                std::uint32_t class_count);

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

struct TrainConfig {
    double tau1 = 0.07;
    double tau2 = 0.07;
    double alpha = 1.0;
    double lr = 0.1;
    double momentum = 0.9;
    std::uint32_t steps = 300;
    std::uint32_t batch_pairs = 0;    // 0 = all active segments
    std::uint32_t batch_samples = 1;  // samples averaged per optimizer step
    std::uint64_t seed = 1;
    LossMode loss_mode = LossMode::kStandard;
    bool normalize = true;
    std::string superpixel_source = "slic";  // slic | mask
    std::uint32_t segments = 0;              // 0 = resolution default
    std::string optimizer = "sgd";           // sgd | adam
    std::string schedule = "constant";       // constant | cosine
    std::uint32_t events_per_window = 2048;
    std::uint32_t bins = 5;
    std::uint32_t d1 = 64;                  // encoder output channels
    std::vector<std::uint32_t> hidden = {32, 32};
    std::uint32_t proj_dim = 0;             // 0 = text embedding dim
    double pseudo_threshold = 0.5;
    double slic_compactness = 10.0;
    std::uint32_t slic_iters = 10;
    std::uint32_t min_events = 1;

    void validate() const;
};

/// key=value lines; '#' starts a comment. Unknown keys are rejected.
TrainConfig parse_train_config(const std::string& text);

/// One training sample with everything frozen precomputed.
struct TrainSample {
    FeatureMap event_input;                  // voxel grid (or spike counts)
    FeatureMap frame_features;               // frozen frame-branch features
    superpixel::SuperpixelMap superpixels;
    superpixel::SupereventMap superevents;
    LabelMap pseudo_labels;
    std::vector<std::uint8_t> occupied;      // event-occupied pixel mask
};

struct DistillModel {
    encoder::EncoderParams enc;
    ProjectionHead head_event;   // P_e
    ProjectionHead head_frame;   // P_f
    ProjectionHead head_query;   // Q
};

struct TraceRow {
    std::uint32_t step = 0;
    double loss_total = 0.0;
    double loss_f2e = 0.0;
    double loss_t2e = 0.0;
    double pos_sim = 0.0;
    double neg_sim = 0.0;
};

struct TrainResult {
    DistillModel model;
    std::vector<TraceRow> trace;
    std::uint32_t skipped_f2e_steps = 0;   // steps with fewer than 2 active pairs
    std::uint32_t skipped_t2e_classes = 0;
};

DistillModel init_model(const TrainConfig& cfg, std::uint32_t in_channels,
                        std::uint32_t frame_dim, std::uint32_t text_dim);

/// Samples are visited round-robin in order; one sample per step. Deterministic
/// given seed and sample order.
TrainResult train(const TrainConfig& cfg, const std::vector<TrainSample>& samples,
                  const embedding::TextEmbeddingSet& texts);

std::string trace_csv(const std::vector<TraceRow>& trace);

// ---------------------------------------------------------------------------
// Optimizers (flat parameter/gradient views)
// ---------------------------------------------------------------------------

struct ParamView {
    std::vector<double*> params;
    std::vector<const double*> grads;
    std::size_t size = 0;
};

class Optimizer {
public:
    Optimizer(std::string kind, double lr, double momentum, std::size_t size);
    /// lr_scale multiplies the base rate (cosine schedule hook).
    void step(const ParamView& view, double lr_scale = 1.0);
    double base_lr() const { return lr_; }

private:
    std::string kind_;
    double lr_;
    double momentum_;
    std::uint64_t t_ = 0;
    std::vector<double> m_, v_;
};

double cosine_lr_scale(std::uint32_t step, std::uint32_t total_steps);

}  // namespace openess::distill
