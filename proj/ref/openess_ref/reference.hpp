#pragma once

// Serial reference implementations, written independently of the main
// kernels. Tests compare against them and the benchmark target races them;
// they never share code with the paths they check.

#include <cstdint>
#include <functional>
#include <vector>

#include "openess/distill.hpp"
#include "openess/embedding.hpp"
#include "openess/encoder.hpp"
#include "openess/events.hpp"
#include "openess/metrics.hpp"
#include "openess/superpixel.hpp"
#include "openess/tensor.hpp"

namespace openess::ref {

/// Brute-force voxel accumulation: every event visits every bin and applies
/// the tent weight directly (O(N*B) instead of O(N)).
events::VoxelGrid voxel_grid_brute(const events::EventWindow& window, std::uint32_t bins,
                                   std::uint32_t height, std::uint32_t width);

/// Direct convolution of the full stack (3x3, stride 1, zero pad, ReLU after
/// every layer), nested loops in the plainest possible order.
FeatureMap encoder_forward_naive(const encoder::EncoderParams& params, const FeatureMap& input);

/// Per-pixel projection, then mean, then normalization, as three separate
/// passes.
std::vector<double> pool_segment_naive(const FeatureMap& features,
                                       const std::vector<std::uint32_t>& pixels,
                                       const distill::ProjectionHead& head, bool normalize);

/// Cosine similarity map against a raw (not necessarily unit) vector,
/// computed per pixel from first principles.
FeatureMap cosine_map_naive(const FeatureMap& features, const distill::ProjectionHead& head,
                            const std::vector<double>& text);

/// Softmax cross-entropy of one row of similarities toward `target`.
double softmax_nll(const std::vector<double>& sims, std::size_t target, double tau,
                   bool exclude_target_from_denominator = false);

struct ClassCounts {
    std::uint64_t tp = 0, fp = 0, fn = 0;
};

/// Per-class TP/FP/FN counted directly from the label maps.
std::vector<ClassCounts> count_tp_fp_fn(const LabelMap& pred, const LabelMap& gt,
                                        std::uint32_t classes);

/// mIoU/accuracy from independent per-class counting (exact integer path).
void iou_brute(const LabelMap& pred, const LabelMap& gt, std::uint32_t classes,
               std::vector<double>& iou, double& miou, double& acc, bool strict);

/// Nearest-center Voronoi partition of grid-initialized centers; the SLIC
/// fixed point on a constant image.
superpixel::SuperpixelMap grid_voronoi(std::uint32_t height, std::uint32_t width,
                                       std::uint32_t segments);

/// Central finite difference of f around *x with step eps.
double central_difference(const std::function<double()>& f, double* x, double eps);

/// Largest relative mismatch between analytic gradients and central
/// differences over the given parameter pointers.
double max_relative_gradient_error(const std::function<double()>& f,
                                   const std::vector<double*>& params,
                                   const std::vector<double>& analytic, double eps);

}  // namespace openess::ref
