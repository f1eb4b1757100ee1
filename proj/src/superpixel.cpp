#include "openess/superpixel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace openess::superpixel {

std::vector<std::vector<std::uint32_t>> SuperpixelMap::pixel_lists() const {
    std::vector<std::vector<std::uint32_t>> lists(segment_count);
    for (std::uint32_t i = 0; i < labels.size(); ++i) {
        const std::uint32_t l = labels[i];
        if (l == kUnassigned) continue;
        if (l >= segment_count) throw std::out_of_range("superpixel label out of range");
        lists[l].push_back(i);
    }
    return lists;
}

namespace {

struct Cluster {
    double cx, cy;               // spatial center
    std::vector<double> color;   // channel means
};

double color_dist_sq(const FeatureMap& img, std::uint32_t y, std::uint32_t x,
                     const std::vector<double>& color) {
    double d = 0.0;
    for (std::uint32_t c = 0; c < img.channels; ++c) {
        const double diff = img.at(c, y, x) - color[c];
        d += diff * diff;
    }
    return d;
}

/// Squared gradient magnitude summed over channels (central differences).
double gradient_sq(const FeatureMap& img, std::uint32_t y, std::uint32_t x) {
    const std::uint32_t xl = x > 0 ? x - 1 : x;
    const std::uint32_t xr = x + 1 < img.width ? x + 1 : x;
    const std::uint32_t yu = y > 0 ? y - 1 : y;
    const std::uint32_t yd = y + 1 < img.height ? y + 1 : y;
    double g = 0.0;
    for (std::uint32_t c = 0; c < img.channels; ++c) {
        const double dx = img.at(c, y, xr) - img.at(c, y, xl);
        const double dy = img.at(c, yd, x) - img.at(c, yu, x);
        g += dx * dx + dy * dy;
    }
    return g;
}

/// Orphan components (everything but the largest component of each label)
/// merge into their dominant neighbor; labels are then compacted so that the
/// result is a full partition with labels 0..M-1.
void enforce_connectivity(SuperpixelMap& map) {
    const std::uint32_t h = map.height, w = map.width;
    const std::size_t n = map.labels.size();
    std::vector<std::int32_t> comp(n, -1);
    std::vector<std::uint32_t> comp_label;
    std::vector<std::uint64_t> comp_size;
    std::vector<std::uint32_t> stack;

    for (std::size_t i = 0; i < n; ++i) {
        if (comp[i] >= 0) continue;
        const std::int32_t id = static_cast<std::int32_t>(comp_label.size());
        const std::uint32_t label = map.labels[i];
        comp_label.push_back(label);
        comp_size.push_back(0);
        stack.assign(1, static_cast<std::uint32_t>(i));
        comp[i] = id;
        while (!stack.empty()) {
            const std::uint32_t p = stack.back();
            stack.pop_back();
            ++comp_size[static_cast<std::size_t>(id)];
            const std::uint32_t y = p / w, x = p % w;
            const std::uint32_t nb[4] = {x > 0 ? p - 1 : p, x + 1 < w ? p + 1 : p,
                                         y > 0 ? p - w : p, y + 1 < h ? p + w : p};
            for (std::uint32_t q : nb) {
                if (q == p || comp[q] >= 0 || map.labels[q] != label) continue;
                comp[q] = id;
                stack.push_back(q);
            }
        }
    }

    const std::size_t ncomp = comp_label.size();
    // Largest component of each label is kept (ties toward the earlier one).
    std::vector<std::int32_t> kept_of_label(map.segment_count, -1);
    for (std::size_t c = 0; c < ncomp; ++c) {
        const std::uint32_t l = comp_label[c];
        if (l == kUnassigned || l >= map.segment_count) continue;
        if (kept_of_label[l] < 0 ||
            comp_size[c] > comp_size[static_cast<std::size_t>(kept_of_label[l])])
            kept_of_label[l] = static_cast<std::int32_t>(c);
    }

    // Union-find over components; orphans merge into their largest neighbor
    // group, smallest orphans first.
    std::vector<std::int32_t> parent(ncomp);
    std::iota(parent.begin(), parent.end(), 0);
    std::vector<std::uint64_t> group_size = comp_size;
    auto find = [&parent](std::int32_t a) {
        while (parent[static_cast<std::size_t>(a)] != a) {
            parent[static_cast<std::size_t>(a)] =
                parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(a)])];
            a = parent[static_cast<std::size_t>(a)];
        }
        return a;
    };

    std::vector<std::size_t> orphans;
    for (std::size_t c = 0; c < ncomp; ++c) {
        const std::uint32_t l = comp_label[c];
        const bool kept = l != kUnassigned && l < map.segment_count &&
                          kept_of_label[l] == static_cast<std::int32_t>(c);
        if (!kept && l != kUnassigned) orphans.push_back(c);
    }
    std::sort(orphans.begin(), orphans.end(), [&](std::size_t a, std::size_t b) {
        if (comp_size[a] != comp_size[b]) return comp_size[a] < comp_size[b];
        return a < b;
    });

    for (std::size_t o : orphans) {
        // Neighbor groups of this component.
        std::int32_t best = -1;
        std::uint64_t best_size = 0;
        const std::int32_t self = find(static_cast<std::int32_t>(o));
        for (std::size_t i = 0; i < n; ++i) {
            if (find(comp[i]) != self) continue;
            const std::uint32_t y = static_cast<std::uint32_t>(i) / w;
            const std::uint32_t x = static_cast<std::uint32_t>(i) % w;
            const std::size_t nb[4] = {x > 0 ? i - 1 : i, x + 1 < w ? i + 1 : i,
                                       y > 0 ? i - w : i, y + 1 < h ? i + w : i};
            for (std::size_t q : nb) {
                if (q == i || map.labels[q] == kUnassigned) continue;
                const std::int32_t g = find(comp[q]);
                if (g == self) continue;
                const std::uint64_t sz = group_size[static_cast<std::size_t>(g)];
                if (best < 0 || sz > best_size || (sz == best_size && g < best)) {
                    best = g;
                    best_size = sz;
                }
            }
        }
        if (best < 0) continue;  // isolated by unassigned pixels; leave as is
        parent[static_cast<std::size_t>(self)] = best;
        group_size[static_cast<std::size_t>(best)] += group_size[static_cast<std::size_t>(self)];
    }

    // Final label of a group: label of its kept component, else of its
    // largest member.
    std::vector<std::int32_t> group_kept(ncomp, -1);
    for (std::uint32_t l = 0; l < map.segment_count; ++l) {
        if (kept_of_label[l] < 0) continue;
        group_kept[static_cast<std::size_t>(find(kept_of_label[l]))] = kept_of_label[l];
    }
    std::vector<std::uint32_t> final_label(ncomp, kUnassigned);
    for (std::size_t c = 0; c < ncomp; ++c) {
        if (comp_label[c] == kUnassigned) continue;
        const std::int32_t root = find(static_cast<std::int32_t>(c));
        const std::int32_t kc = group_kept[static_cast<std::size_t>(root)];
        final_label[c] = kc >= 0 ? comp_label[static_cast<std::size_t>(kc)]
                                 : comp_label[static_cast<std::size_t>(root)];
    }

    // Compact surviving labels in raster order of first appearance.
    std::vector<std::uint32_t> remap(map.segment_count, kUnassigned);
    std::uint32_t next = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const std::uint32_t fl = final_label[static_cast<std::size_t>(comp[i])];
        if (fl == kUnassigned) {
            map.labels[i] = kUnassigned;
            continue;
        }
        if (remap[fl] == kUnassigned) remap[fl] = next++;
        map.labels[i] = remap[fl];
    }
    map.segment_count = next;
}

}  // namespace

SuperpixelMap slic(const FeatureMap& image, const SlicParams& params) {
    const std::uint32_t h = image.height, w = image.width;
    const std::size_t n = static_cast<std::size_t>(h) * w;
    if (n == 0 || image.channels == 0) throw std::invalid_argument("slic: empty image");
    if (params.segments == 0) throw std::invalid_argument("slic: segments must be >= 1");
    if (params.segments > n) throw std::invalid_argument("slic: more segments than pixels");
    if (params.iters == 0) throw std::invalid_argument("slic: iters must be >= 1");

    const double spacing = std::sqrt(static_cast<double>(n) / params.segments);
    const std::uint32_t nx =
        std::max<std::uint32_t>(1, static_cast<std::uint32_t>(std::lround(w / spacing)));
    const std::uint32_t ny =
        std::max<std::uint32_t>(1, static_cast<std::uint32_t>(std::lround(h / spacing)));

    std::vector<Cluster> clusters;
    clusters.reserve(static_cast<std::size_t>(nx) * ny);
    for (std::uint32_t gy = 0; gy < ny; ++gy)
        for (std::uint32_t gx = 0; gx < nx; ++gx) {
            double cx = (gx + 0.5) * static_cast<double>(w) / nx - 0.5;
            double cy = (gy + 0.5) * static_cast<double>(h) / ny - 0.5;
            std::uint32_t px = static_cast<std::uint32_t>(
                std::clamp<long>(std::lround(cx), 0, static_cast<long>(w) - 1));
            std::uint32_t py = static_cast<std::uint32_t>(
                std::clamp<long>(std::lround(cy), 0, static_cast<long>(h) - 1));
            // Nudge off local gradient maxima within the 3x3 neighborhood.
            double best_g = std::numeric_limits<double>::infinity();
            std::uint32_t bx = px, by = py;
            for (int dy = -1; dy <= 1; ++dy)
                for (int dx = -1; dx <= 1; ++dx) {
                    const long qx = static_cast<long>(px) + dx;
                    const long qy = static_cast<long>(py) + dy;
                    if (qx < 0 || qy < 0 || qx >= static_cast<long>(w) ||
                        qy >= static_cast<long>(h))
                        continue;
                    const double g = gradient_sq(image, static_cast<std::uint32_t>(qy),
                                                 static_cast<std::uint32_t>(qx));
                    if (g < best_g) {
                        best_g = g;
                        bx = static_cast<std::uint32_t>(qx);
                        by = static_cast<std::uint32_t>(qy);
                    }
                }
            Cluster c;
            c.cx = bx;
            c.cy = by;
            c.color.resize(image.channels);
            for (std::uint32_t ch = 0; ch < image.channels; ++ch)
                c.color[ch] = image.at(ch, by, bx);
            clusters.push_back(std::move(c));
        }

    const std::uint32_t m = static_cast<std::uint32_t>(clusters.size());
    SuperpixelMap map;
    map.height = h;
    map.width = w;
    map.segment_count = m;
    map.labels.assign(n, kUnassigned);

    const double inv_s = 1.0 / spacing;
    const double comp_sq = params.compactness * params.compactness;
    const double reach = 2.0 * spacing;

    // Spatial binning of cluster centers so each pixel only scans nearby
    // clusters; bins are rebuilt every iteration as centers move.
    const std::uint32_t bins_x =
        std::max<std::uint32_t>(1, static_cast<std::uint32_t>(w / spacing) + 1);
    const std::uint32_t bins_y =
        std::max<std::uint32_t>(1, static_cast<std::uint32_t>(h / spacing) + 1);

    std::vector<double> dist(n);
    for (std::uint32_t iter = 0; iter < params.iters; ++iter) {
        std::vector<std::vector<std::uint32_t>> bins(static_cast<std::size_t>(bins_x) * bins_y);
        for (std::uint32_t k = 0; k < m; ++k) {
            const std::uint32_t bx = std::min<std::uint32_t>(
                bins_x - 1, static_cast<std::uint32_t>(std::max(0.0, clusters[k].cx) * inv_s));
            const std::uint32_t by = std::min<std::uint32_t>(
                bins_y - 1, static_cast<std::uint32_t>(std::max(0.0, clusters[k].cy) * inv_s));
            bins[static_cast<std::size_t>(by) * bins_x + bx].push_back(k);
        }

        std::fill(dist.begin(), dist.end(), std::numeric_limits<double>::infinity());
#pragma omp parallel for schedule(static)
        for (long long yi = 0; yi < static_cast<long long>(h); ++yi) {
            const std::uint32_t y = static_cast<std::uint32_t>(yi);
            for (std::uint32_t x = 0; x < w; ++x) {
                const std::size_t p = static_cast<std::size_t>(y) * w + x;
                const long cbx = static_cast<long>(x * inv_s);
                const long cby = static_cast<long>(y * inv_s);
                double best = std::numeric_limits<double>::infinity();
                std::uint32_t best_k = kUnassigned;
                for (long by = cby - 2; by <= cby + 2; ++by) {
                    if (by < 0 || by >= static_cast<long>(bins_y)) continue;
                    for (long bx = cbx - 2; bx <= cbx + 2; ++bx) {
                        if (bx < 0 || bx >= static_cast<long>(bins_x)) continue;
                        for (std::uint32_t k :
                             bins[static_cast<std::size_t>(by) * bins_x +
                                  static_cast<std::size_t>(bx)]) {
                            const double dx = x - clusters[k].cx;
                            const double dy = y - clusters[k].cy;
                            if (std::abs(dx) > reach || std::abs(dy) > reach) continue;
                            const double ds = (dx * dx + dy * dy) * inv_s * inv_s * comp_sq;
                            const double d = color_dist_sq(image, y, x, clusters[k].color) + ds;
                            if (d < best || (d == best && k < best_k)) {
                                best = d;
                                best_k = k;
                            }
                        }
                    }
                }
                dist[p] = best;
                map.labels[p] = best_k;
            }
        }

        // Pixels out of every cluster's reach fall back to a global scan.
        for (std::size_t p = 0; p < n; ++p) {
            if (map.labels[p] != kUnassigned) continue;
            const std::uint32_t y = static_cast<std::uint32_t>(p / w);
            const std::uint32_t x = static_cast<std::uint32_t>(p % w);
            double best = std::numeric_limits<double>::infinity();
            std::uint32_t best_k = 0;
            for (std::uint32_t k = 0; k < m; ++k) {
                const double dx = x - clusters[k].cx;
                const double dy = y - clusters[k].cy;
                const double d = color_dist_sq(image, y, x, clusters[k].color) +
                                 (dx * dx + dy * dy) * inv_s * inv_s * comp_sq;
                if (d < best) {
                    best = d;
                    best_k = k;
                }
            }
            map.labels[p] = best_k;
        }

        // Update step: recompute each cluster as the mean of its pixels.
        std::vector<double> acc_x(m, 0.0), acc_y(m, 0.0);
        std::vector<std::uint64_t> acc_n(m, 0);
        std::vector<std::vector<double>> acc_c(m, std::vector<double>(image.channels, 0.0));
        for (std::size_t p = 0; p < n; ++p) {
            const std::uint32_t k = map.labels[p];
            const std::uint32_t y = static_cast<std::uint32_t>(p / w);
            const std::uint32_t x = static_cast<std::uint32_t>(p % w);
            acc_x[k] += x;
            acc_y[k] += y;
            ++acc_n[k];
            for (std::uint32_t ch = 0; ch < image.channels; ++ch)
                acc_c[k][ch] += image.at(ch, y, x);
        }
        for (std::uint32_t k = 0; k < m; ++k) {
            if (acc_n[k] == 0) continue;  // keep the stale center
            const double inv = 1.0 / static_cast<double>(acc_n[k]);
            clusters[k].cx = acc_x[k] * inv;
            clusters[k].cy = acc_y[k] * inv;
            for (std::uint32_t ch = 0; ch < image.channels; ++ch)
                clusters[k].color[ch] = acc_c[k][ch] * inv;
        }
    }

    enforce_connectivity(map);
    return map;
}

SuperpixelMap select_largest_segments(const SuperpixelMap& map, std::uint32_t m) {
    if (m == 0) throw std::invalid_argument("select_largest_segments: m must be >= 1");
    std::vector<std::uint64_t> area(map.segment_count, 0);
    for (std::uint32_t l : map.labels)
        if (l != kUnassigned) ++area[l];
    std::vector<std::uint32_t> order(map.segment_count);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&area](std::uint32_t a, std::uint32_t b) {
        if (area[a] != area[b]) return area[a] > area[b];
        return a < b;
    });
    std::vector<std::uint32_t> remap(map.segment_count, kUnassigned);
    std::uint32_t kept = 0;
    for (std::uint32_t i = 0; i < order.size() && kept < m; ++i) {
        if (area[order[i]] == 0) break;
        remap[order[i]] = kept++;
    }
    SuperpixelMap out = map;
    out.segment_count = kept;
    for (auto& l : out.labels)
        if (l != kUnassigned) l = remap[l];
    return out;
}

SupereventMap group_superevents(const SuperpixelMap& map, const events::EventWindow& window,
                                std::uint32_t min_events) {
    SupereventMap sev;
    sev.segment_count = map.segment_count;
    sev.event_indices.resize(map.segment_count);
    sev.pixels.resize(map.segment_count);
    sev.active.assign(map.segment_count, 0);
    for (std::uint32_t j = 0; j < window.events.size(); ++j) {
        const auto& e = window.events[j];
        if (e.x >= map.width || e.y >= map.height)
            throw std::invalid_argument("group_superevents: sensor/map dimension mismatch");
        const std::uint32_t l = map.at(e.y, e.x);
        if (l == kUnassigned) {
            ++sev.unassigned_events;
            continue;
        }
        sev.event_indices[l].push_back(j);
        sev.pixels[l].push_back(static_cast<std::uint32_t>(e.y) * map.width + e.x);
    }
    for (std::uint32_t s = 0; s < sev.segment_count; ++s) {
        auto& px = sev.pixels[s];
        std::sort(px.begin(), px.end());
        px.erase(std::unique(px.begin(), px.end()), px.end());
        sev.active[s] = sev.event_indices[s].size() >= min_events ? 1 : 0;
    }
    return sev;
}

std::vector<std::uint8_t> boundary_mask(const SuperpixelMap& map) {
    const std::uint32_t h = map.height, w = map.width;
    std::vector<std::uint8_t> mask(static_cast<std::size_t>(h) * w, 0);
    for (std::uint32_t y = 0; y < h; ++y)
        for (std::uint32_t x = 0; x < w; ++x) {
            const std::uint32_t l = map.at(y, x);
            const bool b = (x > 0 && map.at(y, x - 1) != l) ||
                           (x + 1 < w && map.at(y, x + 1) != l) ||
                           (y > 0 && map.at(y - 1, x) != l) ||
                           (y + 1 < h && map.at(y + 1, x) != l);
            if (b) mask[static_cast<std::size_t>(y) * w + x] = 1;
        }
    return mask;
}

}  // namespace openess::superpixel
