#pragma once

#include <cstdint>
#include <vector>

namespace openess {

/// Dense D-channel map, row-major [d][h][w]. Doubles in memory; the FMAP1
/// file format stores 32-bit floats (see formats.hpp). D = 1 doubles as a
/// grayscale image, D = 3 as RGB.
struct FeatureMap {
    std::uint32_t channels = 0;
    std::uint32_t height = 0;
    std::uint32_t width = 0;
    std::vector<double> values;

    FeatureMap() = default;
    FeatureMap(std::uint32_t d, std::uint32_t h, std::uint32_t w)
        : channels(d), height(h), width(w),
          values(static_cast<std::size_t>(d) * h * w, 0.0) {}

    double& at(std::uint32_t d, std::uint32_t y, std::uint32_t x) {
        return values[(static_cast<std::size_t>(d) * height + y) * width + x];
    }
    double at(std::uint32_t d, std::uint32_t y, std::uint32_t x) const {
        return values[(static_cast<std::size_t>(d) * height + y) * width + x];
    }
    std::size_t size() const { return values.size(); }
    std::size_t pixels() const { return static_cast<std::size_t>(height) * width; }
};

/// Per-pixel class ids; 255 marks ignored pixels.
struct LabelMap {
    static constexpr std::uint8_t kIgnore = 255;

    std::uint32_t height = 0;
    std::uint32_t width = 0;
    std::vector<std::uint8_t> ids;

    LabelMap() = default;
    LabelMap(std::uint32_t h, std::uint32_t w, std::uint8_t fill = 0)
        : height(h), width(w), ids(static_cast<std::size_t>(h) * w, fill) {}

    std::uint8_t& at(std::uint32_t y, std::uint32_t x) {
        return ids[static_cast<std::size_t>(y) * width + x];
    }
    std::uint8_t at(std::uint32_t y, std::uint32_t x) const {
        return ids[static_cast<std::size_t>(y) * width + x];
    }
    std::size_t pixels() const { return ids.size(); }
};

}  // namespace openess
