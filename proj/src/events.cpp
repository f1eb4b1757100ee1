#include "openess/events.hpp"

#include <cmath>
#include <stdexcept>

#include "openess/rng.hpp"

namespace openess::events {

FeatureMap VoxelGrid::as_feature_map() const {
    FeatureMap map(bins, height, width);
    map.values = values;
    return map;
}

FeatureMap SpikeTensor::accumulated() const {
    FeatureMap map(1, height, width);
    for (std::size_t i = 0; i < counts.size(); ++i) map.values[i] = counts[i];
    return map;
}

std::vector<EventWindow> window_events(const EventStream& stream, std::size_t n) {
    if (n == 0) throw std::invalid_argument("window_events: n must be >= 1");
    std::vector<EventWindow> windows;
    const std::size_t count = stream.events.size() / n;
    windows.reserve(count);
    for (std::size_t w = 0; w < count; ++w) {
        std::span<const Event> slice(stream.events.data() + w * n, n);
        const std::uint64_t t0 = slice.front().t;
        std::uint64_t dt = slice.back().t - t0;
        if (dt == 0) dt = 1;  // all events share one timestamp
        windows.push_back(EventWindow{slice, t0, dt});
    }
    return windows;
}

VoxelGrid build_voxel_grid(const EventWindow& window, std::uint32_t bins,
                           std::uint32_t height, std::uint32_t width) {
    if (bins == 0) throw std::invalid_argument("build_voxel_grid: bins must be >= 1");
    if (window.events.empty()) throw std::invalid_argument("build_voxel_grid: empty window");
    if (window.dt_us == 0) throw std::invalid_argument("build_voxel_grid: zero window span");

    VoxelGrid grid(bins, height, width);
    for (const Event& e : window.events) {
        if (e.x >= width || e.y >= height)
            throw std::out_of_range("build_voxel_grid: coordinate out of range");
        // (B-1)(t - t0)/dt, kept in this exact form: the numerator is an
        // exact integer product, so t* never exceeds B-1 for in-window
        // timestamps.
        const double tstar = static_cast<double>(bins - 1) *
                             static_cast<double>(e.t - window.t0) /
                             static_cast<double>(window.dt_us);
        if (tstar < 0.0 || tstar > static_cast<double>(bins - 1)) {
            ++grid.clamped_events;
            continue;
        }
        // Bilinear in time: at most the two bins bracketing t* get weight.
        const std::int64_t lo = static_cast<std::int64_t>(std::floor(tstar));
        for (std::int64_t b = lo; b <= lo + 1; ++b) {
            if (b < 0 || b >= static_cast<std::int64_t>(bins)) continue;
            const double w = 1.0 - std::abs(tstar - static_cast<double>(b));
            if (w <= 0.0) continue;
            grid.at(static_cast<std::uint32_t>(b), e.y, e.x) += static_cast<double>(e.p) * w;
        }
    }
    return grid;
}

std::vector<VoxelGrid> encode_windows(const EventStream& stream, std::size_t events_per_window,
                                      std::uint32_t bins) {
    const auto windows = window_events(stream, events_per_window);
    std::vector<VoxelGrid> grids(windows.size());
#pragma omp parallel for schedule(static)
    for (long long i = 0; i < static_cast<long long>(windows.size()); ++i)
        grids[static_cast<std::size_t>(i)] =
            build_voxel_grid(windows[static_cast<std::size_t>(i)], bins, stream.height,
                             stream.width);
    return grids;
}

SpikeTensor rate_code(const FeatureMap& image, const RateCodeParams& params) {
    if (params.steps == 0) throw std::invalid_argument("rate_code: steps must be >= 1");
    if (!(params.s_min < params.s_max))
        throw std::invalid_argument("rate_code: s_min must be < s_max");
    if (image.channels != 1)
        throw std::invalid_argument("rate_code: expected a single-channel image");
    for (double v : image.values)
        if (v < params.s_min || v > params.s_max)
            throw std::out_of_range("rate_code: value outside [s_min, s_max]");

    const std::size_t pixels = image.pixels();
    SpikeTensor out;
    out.steps = params.steps;
    out.height = image.height;
    out.width = image.width;
    out.spikes.assign(static_cast<std::size_t>(params.steps) * pixels, 0);
    out.counts.assign(pixels, 0);

    const double inv_range = 1.0 / (params.s_max - params.s_min);
#pragma omp parallel for schedule(static)
    for (long long pi = 0; pi < static_cast<long long>(pixels); ++pi) {
        const std::size_t p = static_cast<std::size_t>(pi);
        const double prob = (image.values[p] - params.s_min) * inv_range;
        std::uint32_t count = 0;
        for (std::uint32_t s = 0; s < params.steps; ++s) {
            const double u = hash_uniform(params.seed, s, p);
            const bool fire = params.inverted ? (u >= prob) : (u < prob);
            if (fire) {
                out.spikes[static_cast<std::size_t>(s) * pixels + p] = 1;
                ++count;
            }
        }
        out.counts[p] = count;
    }
    return out;
}

}  // namespace openess::events
