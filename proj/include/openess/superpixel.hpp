#pragma once

#include <cstdint>
#include <vector>

#include "openess/events.hpp"
#include "openess/tensor.hpp"

namespace openess::superpixel {

constexpr std::uint32_t kUnassigned = 0xFFFFFFFFu;

/// Pixel partition. SLIC output covers every pixel; mask files may leave
/// pixels unassigned (kUnassigned sentinel).
struct SuperpixelMap {
    std::uint32_t height = 0;
    std::uint32_t width = 0;
    std::vector<std::uint32_t> labels;
    std::uint32_t segment_count = 0;

    std::uint32_t at(std::uint32_t y, std::uint32_t x) const {
        return labels[static_cast<std::size_t>(y) * width + x];
    }
    std::uint32_t& at(std::uint32_t y, std::uint32_t x) {
        return labels[static_cast<std::size_t>(y) * width + x];
    }

    /// Linear pixel indices per segment, ascending.
    std::vector<std::vector<std::uint32_t>> pixel_lists() const;
};

struct SlicParams {
    std::uint32_t segments = 100;
    double compactness = 10.0;
    std::uint32_t iters = 10;
    /// Reserved; the clustering is deterministic and draws nothing from it.
    std::uint64_t seed = 0;
};

/// SLIC clustering over a C-channel frame. Centers start on a regular grid
/// with spacing S = sqrt(H*W/M), are nudged off local gradient maxima, and
/// iterate assignment/update in 2Sx2S neighborhoods with distance
///   D = sqrt(d_color^2 + (d_spatial/S)^2 * compactness^2).
/// Orphan components are relabeled to their dominant neighbor, so the result
/// is a full partition with every label < segment_count.
SuperpixelMap slic(const FeatureMap& image, const SlicParams& params);

/// Keeps the m largest segments (by pixel area, ties toward lower label) and
/// marks the rest unassigned; labels are compacted to 0..m'-1.
SuperpixelMap select_largest_segments(const SuperpixelMap& map, std::uint32_t m);

/// Events grouped by the segment of their pixel. Indices refer to the window
/// the map was built from; `pixels` holds each segment's distinct
/// event-occupied pixels (linear indices, ascending).
struct SupereventMap {
    std::uint32_t segment_count = 0;
    std::vector<std::vector<std::uint32_t>> event_indices;
    std::vector<std::vector<std::uint32_t>> pixels;
    std::vector<std::uint8_t> active;
    std::uint64_t unassigned_events = 0;
};

SupereventMap group_superevents(const SuperpixelMap& map, const events::EventWindow& window,
                                std::uint32_t min_events = 1);

/// Boundary mask: pixels with a 4-neighbor of a different label.
std::vector<std::uint8_t> boundary_mask(const SuperpixelMap& map);

}  // namespace openess::superpixel
