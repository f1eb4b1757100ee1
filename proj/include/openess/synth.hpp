#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "openess/events.hpp"
#include "openess/tensor.hpp"

namespace openess::synth {

enum class ShapeKind { kRectangle, kDisk };

/// Geometry at t = 0; the shape translates with constant velocity. Later
/// shapes draw on top of earlier ones.
struct ShapeSpec {
    std::uint8_t class_id = 0;
    ShapeKind kind = ShapeKind::kRectangle;
    double cx = 0.0, cy = 0.0;      // center, pixels
    double width = 0.0, height = 0.0;  // rectangle extent
    double radius = 0.0;            // disk radius
    double vx = 0.0, vy = 0.0;      // pixels per second
    double intensity = 255.0;
};

struct SceneSpec {
    std::uint32_t width = 64;
    std::uint32_t height = 64;
    std::uint64_t duration_us = 2'000'000;
    double fps = 10.0;
    std::vector<ShapeSpec> shapes;
    double background_intensity = 100.0;
    std::uint8_t background_class = 0;
    double contrast_threshold = 0.15;  // on log intensity
    std::uint64_t seed = 1;
    double render_rate_hz = 1000.0;
    double noise_rate = 0.0;  // Poisson noise events per pixel per second
};

struct SceneResult {
    events::EventStream stream;
    std::vector<FeatureMap> frames;       // grayscale, one per output frame
    std::vector<LabelMap> labels;
    std::vector<std::uint64_t> frame_times_us;
    std::vector<std::string> warnings;
};

FeatureMap render_intensity(const SceneSpec& spec, std::uint64_t t_us);
LabelMap render_labels(const SceneSpec& spec, std::uint64_t t_us);

/// Event-camera model: per pixel, an event of polarity sign(delta) fires each
/// time |log I(t) - log I_ref| >= threshold, after which the reference
/// updates to log I(t). Log intensity uses log(I + 1e-3). Frames and labels
/// are rendered at the output frame rate, events at the internal render rate.
SceneResult generate(const SceneSpec& spec);

/// Demo scene used by the CLI and the end-to-end suites: a drifting
/// checkerboard background (class 0) with a bright disk (class 1) and a dark
/// rectangle (class 2) moving across it. Start positions and headings vary
/// with the seed.
SceneSpec make_moving_shapes_scene(std::uint32_t width, std::uint32_t height,
                                   std::uint64_t duration_us, std::uint64_t seed);

}  // namespace openess::synth
