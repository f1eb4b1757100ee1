#include "openess_ref/reference.hpp"

#include <cmath>
#include <stdexcept>

namespace openess::ref {

events::VoxelGrid voxel_grid_brute(const events::EventWindow& window, std::uint32_t bins,
                                   std::uint32_t height, std::uint32_t width) {
    events::VoxelGrid grid(bins, height, width);
    for (const auto& e : window.events) {
        if (e.x >= width || e.y >= height)
            throw std::out_of_range("voxel_grid_brute: coordinate out of range");
        const double tstar = static_cast<double>(bins - 1) *
                             static_cast<double>(e.t - window.t0) /
                             static_cast<double>(window.dt_us);
        if (tstar < 0.0 || tstar > static_cast<double>(bins - 1)) {
            ++grid.clamped_events;
            continue;
        }
        for (std::uint32_t b = 0; b < bins; ++b) {
            const double w = std::max(1.0 - std::abs(tstar - static_cast<double>(b)), 0.0);
            grid.at(b, e.y, e.x) += static_cast<double>(e.p) * w;
        }
    }
    return grid;
}

FeatureMap encoder_forward_naive(const encoder::EncoderParams& params, const FeatureMap& input) {
    FeatureMap cur = input;
    for (const auto& layer : params.layers) {
        FeatureMap next(layer.out_channels, cur.height, cur.width);
        for (std::uint32_t co = 0; co < layer.out_channels; ++co)
            for (std::uint32_t y = 0; y < cur.height; ++y)
                for (std::uint32_t x = 0; x < cur.width; ++x) {
                    double acc = layer.bias[co];
                    for (std::uint32_t ci = 0; ci < layer.in_channels; ++ci)
                        for (int ky = -1; ky <= 1; ++ky)
                            for (int kx = -1; kx <= 1; ++kx) {
                                const long yy = static_cast<long>(y) + ky;
                                const long xx = static_cast<long>(x) + kx;
                                if (yy < 0 || xx < 0 || yy >= static_cast<long>(cur.height) ||
                                    xx >= static_cast<long>(cur.width))
                                    continue;
                                acc += layer.w(co, ci, static_cast<std::uint32_t>(ky + 1),
                                               static_cast<std::uint32_t>(kx + 1)) *
                                       cur.at(ci, static_cast<std::uint32_t>(yy),
                                              static_cast<std::uint32_t>(xx));
                            }
                    next.at(co, y, x) = acc > 0.0 ? acc : 0.0;
                }
        cur = std::move(next);
    }
    return cur;
}

std::vector<double> pool_segment_naive(const FeatureMap& features,
                                       const std::vector<std::uint32_t>& pixels,
                                       const distill::ProjectionHead& head, bool normalize) {
    if (pixels.empty()) throw std::invalid_argument("pool_segment_naive: empty segment");
    std::vector<double> mean(head.out_dim, 0.0);
    for (std::uint32_t p : pixels) {
        std::vector<double> feat(head.in_dim);
        for (std::uint32_t d = 0; d < head.in_dim; ++d)
            feat[d] = features.values[static_cast<std::size_t>(d) * features.pixels() + p];
        const std::vector<double> proj = head.project(feat);
        for (std::uint32_t d = 0; d < head.out_dim; ++d) mean[d] += proj[d];
    }
    for (double& v : mean) v /= static_cast<double>(pixels.size());
    if (normalize) {
        double norm = 0.0;
        for (double v : mean) norm += v * v;
        norm = std::sqrt(norm);
        if (!(norm > 0.0)) throw std::runtime_error("pool_segment_naive: zero vector");
        for (double& v : mean) v /= norm;
    }
    return mean;
}

FeatureMap cosine_map_naive(const FeatureMap& features, const distill::ProjectionHead& head,
                            const std::vector<double>& text) {
    FeatureMap out(1, features.height, features.width);
    double tn = 0.0;
    for (double v : text) tn += v * v;
    tn = std::sqrt(tn);
    for (std::uint32_t y = 0; y < features.height; ++y)
        for (std::uint32_t x = 0; x < features.width; ++x) {
            std::vector<double> feat(head.in_dim);
            for (std::uint32_t d = 0; d < head.in_dim; ++d) feat[d] = features.at(d, y, x);
            const std::vector<double> proj = head.project(feat);
            double pn = 0.0, dotv = 0.0;
            for (std::uint32_t d = 0; d < head.out_dim; ++d) {
                pn += proj[d] * proj[d];
                dotv += proj[d] * text[d];
            }
            pn = std::sqrt(pn);
            out.at(0, y, x) = pn > 1e-12 ? dotv / (pn * tn) : 0.0;
        }
    return out;
}

double softmax_nll(const std::vector<double>& sims, std::size_t target, double tau,
                   bool exclude_target_from_denominator) {
    double denom = 0.0;
    for (std::size_t j = 0; j < sims.size(); ++j) {
        if (exclude_target_from_denominator && j == target) continue;
        denom += std::exp(sims[j] / tau);
    }
    return -std::log(std::exp(sims[target] / tau) / denom);
}

std::vector<ClassCounts> count_tp_fp_fn(const LabelMap& pred, const LabelMap& gt,
                                        std::uint32_t classes) {
    std::vector<ClassCounts> counts(classes);
    for (std::uint32_t z = 0; z < classes; ++z)
        for (std::size_t i = 0; i < gt.pixels(); ++i) {
            const std::uint8_t g = gt.ids[i], p = pred.ids[i];
            if (g == LabelMap::kIgnore || p == LabelMap::kIgnore) continue;
            if (g == z && p == z) ++counts[z].tp;
            if (g != z && p == z) ++counts[z].fp;
            if (g == z && p != z) ++counts[z].fn;
        }
    return counts;
}

void iou_brute(const LabelMap& pred, const LabelMap& gt, std::uint32_t classes,
               std::vector<double>& iou, double& miou, double& acc, bool strict) {
    const auto counts = count_tp_fp_fn(pred, gt, classes);
    iou.assign(classes, std::nan(""));
    double sum = 0.0;
    std::uint32_t counted = 0;
    std::uint64_t correct = 0, total = 0;
    for (std::size_t i = 0; i < gt.pixels(); ++i) {
        const std::uint8_t g = gt.ids[i], p = pred.ids[i];
        if (g == LabelMap::kIgnore || p == LabelMap::kIgnore) continue;
        ++total;
        if (g == p) ++correct;
    }
    for (std::uint32_t z = 0; z < classes; ++z) {
        const std::uint64_t denom = counts[z].tp + counts[z].fp + counts[z].fn;
        if (denom == 0) {
            if (strict) {
                iou[z] = 0.0;
                ++counted;
            }
            continue;
        }
        iou[z] = static_cast<double>(counts[z].tp) / static_cast<double>(denom);
        sum += iou[z];
        ++counted;
    }
    miou = counted ? sum / counted : 0.0;
    acc = total ? static_cast<double>(correct) / static_cast<double>(total) : 0.0;
}

superpixel::SuperpixelMap grid_voronoi(std::uint32_t height, std::uint32_t width,
                                       std::uint32_t segments) {
    const double spacing =
        std::sqrt(static_cast<double>(height) * width / static_cast<double>(segments));
    const std::uint32_t nx =
        std::max<std::uint32_t>(1, static_cast<std::uint32_t>(std::lround(width / spacing)));
    const std::uint32_t ny =
        std::max<std::uint32_t>(1, static_cast<std::uint32_t>(std::lround(height / spacing)));
    std::vector<double> cx, cy;
    for (std::uint32_t gy = 0; gy < ny; ++gy)
        for (std::uint32_t gx = 0; gx < nx; ++gx) {
            cx.push_back((gx + 0.5) * static_cast<double>(width) / nx - 0.5);
            cy.push_back((gy + 0.5) * static_cast<double>(height) / ny - 0.5);
        }
    superpixel::SuperpixelMap map;
    map.height = height;
    map.width = width;
    map.segment_count = static_cast<std::uint32_t>(cx.size());
    map.labels.resize(static_cast<std::size_t>(height) * width);
    for (std::uint32_t y = 0; y < height; ++y)
        for (std::uint32_t x = 0; x < width; ++x) {
            double best = 1e300;
            std::uint32_t best_k = 0;
            for (std::uint32_t k = 0; k < map.segment_count; ++k) {
                const double d =
                    (x - cx[k]) * (x - cx[k]) + (y - cy[k]) * (y - cy[k]);
                if (d < best) {
                    best = d;
                    best_k = k;
                }
            }
            map.labels[static_cast<std::size_t>(y) * width + x] = best_k;
        }
    return map;
}

double central_difference(const std::function<double()>& f, double* x, double eps) {
    const double saved = *x;
    *x = saved + eps;
    const double hi = f();
    *x = saved - eps;
    const double lo = f();
    *x = saved;
    return (hi - lo) / (2.0 * eps);
}

double max_relative_gradient_error(const std::function<double()>& f,
                                   const std::vector<double*>& params,
                                   const std::vector<double>& analytic, double eps) {
    if (params.size() != analytic.size())
        throw std::invalid_argument("max_relative_gradient_error: size mismatch");
    double worst = 0.0;
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double numeric = central_difference(f, params[i], eps);
        const double denom = std::max({std::abs(numeric), std::abs(analytic[i]), 1e-8});
        const double rel = std::abs(numeric - analytic[i]) / denom;
        worst = std::max(worst, rel);
    }
    return worst;
}

}  // namespace openess::ref
