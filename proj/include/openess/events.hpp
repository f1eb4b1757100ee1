#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "openess/tensor.hpp"

namespace openess::events {

struct Event {
    std::uint64_t t = 0;  // microseconds
    std::uint16_t x = 0;
    std::uint16_t y = 0;
    std::int8_t p = 1;  // polarity, -1 or +1
};

/// Time-ordered stream with sensor geometry. Events are kept sorted by
/// timestamp (non-decreasing); parsers and the synthetic generator enforce
/// this at construction.
struct EventStream {
    std::uint32_t width = 0;
    std::uint32_t height = 0;
    std::vector<Event> events;
};

/// Contiguous slice of a stream. t0 is the first-event timestamp, dt_us the
/// window span; all contained timestamps lie in [t0, t0 + dt_us].
struct EventWindow {
    std::span<const Event> events;
    std::uint64_t t0 = 0;
    std::uint64_t dt_us = 1;
};

/// B temporal bins over the sensor plane with signed bilinear accumulation.
struct VoxelGrid {
    std::uint32_t bins = 0;
    std::uint32_t height = 0;
    std::uint32_t width = 0;
    std::vector<double> values;
    /// Events whose normalized timestamp fell outside [0, B-1] and were
    /// dropped. Zero whenever t0/dt come from the window itself.
    std::uint64_t clamped_events = 0;

    VoxelGrid() = default;
    VoxelGrid(std::uint32_t b, std::uint32_t h, std::uint32_t w)
        : bins(b), height(h), width(w), values(static_cast<std::size_t>(b) * h * w, 0.0) {}

    double& at(std::uint32_t b, std::uint32_t y, std::uint32_t x) {
        return values[(static_cast<std::size_t>(b) * height + y) * width + x];
    }
    double at(std::uint32_t b, std::uint32_t y, std::uint32_t x) const {
        return values[(static_cast<std::size_t>(b) * height + y) * width + x];
    }

    FeatureMap as_feature_map() const;
};

/// Binary spikes per timestep plus the accumulated count frame.
struct SpikeTensor {
    std::uint32_t steps = 0;
    std::uint32_t height = 0;
    std::uint32_t width = 0;
    std::vector<std::uint8_t> spikes;      // [step][y][x], 0/1
    std::vector<std::uint32_t> counts;     // [y][x]

    std::uint8_t spike(std::uint32_t s, std::uint32_t y, std::uint32_t x) const {
        return spikes[(static_cast<std::size_t>(s) * height + y) * width + x];
    }
    FeatureMap accumulated() const;
};

/// Consecutive non-overlapping windows of exactly n events; a trailing
/// remainder of fewer than n events is dropped. Window span is the
/// first-to-last timestamp difference, or 1 us when all events coincide.
std::vector<EventWindow> window_events(const EventStream& stream, std::size_t n);

/// Signed bilinear-in-time voxel accumulation:
///   grid(b, y, x) += p * max(1 - |t* - b|, 0),  t* = (B-1)(t - t0)/dt.
/// Linear in the event count: each event touches at most two bins.
VoxelGrid build_voxel_grid(const EventWindow& window, std::uint32_t bins,
                           std::uint32_t height, std::uint32_t width);

/// Encodes every window of the stream; windows are independent and run in
/// parallel.
std::vector<VoxelGrid> encode_windows(const EventStream& stream, std::size_t events_per_window,
                                      std::uint32_t bins);

struct RateCodeParams {
    std::uint32_t steps = 16;
    double s_min = 0.0;
    double s_max = 255.0;
    std::uint64_t seed = 1;
    /// Reproduces the inverted comparison (dimmer pixels spike more).
    bool inverted = false;
};

/// Bernoulli rate coding of a single-channel image: a pixel with value v
/// spikes each step with probability (v - s_min)/(s_max - s_min).
/// Deterministic given the seed regardless of thread count.
SpikeTensor rate_code(const FeatureMap& image, const RateCodeParams& params);

}  // namespace openess::events
