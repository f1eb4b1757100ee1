#include <doctest.h>

#include <algorithm>
#include <sstream>

#include "openess/formats.hpp"
#include "openess/rng.hpp"
#include "openess/superpixel.hpp"
#include "openess_ref/reference.hpp"

using namespace openess;
using superpixel::kUnassigned;
using superpixel::SuperpixelMap;

namespace {

FeatureMap constant_image(std::uint32_t h, std::uint32_t w, double v) {
    FeatureMap img(1, h, w);
    std::fill(img.values.begin(), img.values.end(), v);
    return img;
}

/// Left region at `intensity_l` up to (not including) column `edge`.
FeatureMap two_region_image(std::uint32_t h, std::uint32_t w, std::uint32_t edge,
                            double intensity_l, double intensity_r) {
    FeatureMap img(1, h, w);
    for (std::uint32_t y = 0; y < h; ++y)
        for (std::uint32_t x = 0; x < w; ++x)
            img.at(0, y, x) = x < edge ? intensity_l : intensity_r;
    return img;
}

bool is_full_partition(const SuperpixelMap& map) {
    std::vector<std::uint64_t> sizes(map.segment_count, 0);
    for (std::uint32_t l : map.labels) {
        if (l == kUnassigned || l >= map.segment_count) return false;
        ++sizes[l];
    }
    for (std::uint64_t s : sizes)
        if (s == 0) return false;
    return true;
}

}  // namespace

TEST_CASE("slic on a constant image reduces to the spatial grid partition") {
    const auto img = constant_image(8, 8, 77.0);
    superpixel::SlicParams p;
    p.segments = 4;
    p.compactness = 10.0;
    const auto map = superpixel::slic(img, p);
    REQUIRE(map.segment_count == 4);
    REQUIRE(is_full_partition(map));

    // With zero color gradient only the spatial term acts, so the result is
    // the Voronoi partition of the initial grid centers.
    const auto oracle = ref::grid_voronoi(8, 8, 4);
    REQUIRE(oracle.segment_count == 4);
    std::vector<std::uint64_t> size(4, 0);
    for (std::size_t i = 0; i < map.labels.size(); ++i) ++size[map.labels[i]];
    for (std::uint64_t s : size) CHECK(s == 16);
    // Segment ids may be permuted; compare partition structure per pixel pair.
    for (std::size_t i = 0; i < map.labels.size(); ++i)
        for (std::size_t j = 0; j < map.labels.size(); ++j)
            CHECK((map.labels[i] == map.labels[j]) == (oracle.labels[i] == oracle.labels[j]));
}

TEST_CASE("slic with one segment covers everything") {
    const auto img = constant_image(8, 8, 1.0);
    superpixel::SlicParams p;
    p.segments = 1;
    const auto map = superpixel::slic(img, p);
    CHECK(map.segment_count == 1);
    for (std::uint32_t l : map.labels) CHECK(l == 0);
}

TEST_CASE("slic boundary lands on a strong intensity edge") {
    // 16x8 with the edge off the spatial midline: color must pull the
    // boundary away from the pure grid split.
    const auto img = two_region_image(8, 16, 6, 0.0, 255.0);
    superpixel::SlicParams p;
    p.segments = 2;
    p.compactness = 10.0;
    const auto map = superpixel::slic(img, p);
    REQUIRE(map.segment_count == 2);
    REQUIRE(is_full_partition(map));
    for (std::uint32_t y = 0; y < 8; ++y)
        for (std::uint32_t x = 0; x < 16; ++x)
            CHECK(map.at(y, x) == map.at(0, x < 6 ? 0 : 15));
}

TEST_CASE("slic input validation") {
    const auto img = constant_image(4, 4, 0.0);
    superpixel::SlicParams p;
    p.segments = 17;  // > pixel count
    CHECK_THROWS(superpixel::slic(img, p));
    p.segments = 0;
    CHECK_THROWS(superpixel::slic(img, p));
    FeatureMap empty;
    p.segments = 1;
    CHECK_THROWS(superpixel::slic(empty, p));
}

TEST_CASE("slic full partition and determinism on random images") {
    Rng rng(5);
    for (int trial = 0; trial < 4; ++trial) {
        FeatureMap img(1, 24, 32);
        for (double& v : img.values) v = rng.uniform(0.0, 255.0);
        superpixel::SlicParams p;
        p.segments = 12;
        p.seed = 9;
        const auto a = superpixel::slic(img, p);
        CHECK(is_full_partition(a));
        const auto b = superpixel::slic(img, p);
        CHECK(a.labels == b.labels);
        CHECK(a.segment_count == b.segment_count);
    }
}

TEST_CASE("mask1 load: labels verbatim, M from the payload") {
    std::ostringstream out;
    SuperpixelMap m;
    m.height = 2;
    m.width = 2;
    m.labels = {0, 0, 1, 1};
    m.segment_count = 2;
    formats::write_mask1(out, m);
    std::istringstream in(out.str());
    const auto back = formats::read_mask1(in);
    CHECK(back.segment_count == 2);
    CHECK(back.labels == m.labels);
    const auto lists = back.pixel_lists();
    CHECK(lists[0].size() == 2);
    CHECK(lists[1].size() == 2);
}

TEST_CASE("mask1 load: sentinel pixels are allowed") {
    std::ostringstream out;
    SuperpixelMap m;
    m.height = 2;
    m.width = 2;
    m.labels = {0, kUnassigned, kUnassigned, 0};
    m.segment_count = 1;
    formats::write_mask1(out, m);
    std::istringstream in(out.str());
    const auto back = formats::read_mask1(in);
    CHECK(back.segment_count == 1);
    CHECK(back.pixel_lists()[0].size() == 2);
}

TEST_CASE("mask1 load: truncation and strict mode") {
    std::ostringstream out;
    SuperpixelMap m;
    m.height = 2;
    m.width = 2;
    m.labels = {0, 1, 2, 3};
    m.segment_count = 4;
    formats::write_mask1(out, m);

    std::istringstream trunc(out.str().substr(0, out.str().size() - 2));
    CHECK_THROWS_WITH_AS(formats::read_mask1(trunc), doctest::Contains("truncated mask"),
                         std::runtime_error);

    std::istringstream strict(out.str());
    CHECK_THROWS(formats::read_mask1(strict, 3));  // label 3 >= declared 3
}

TEST_CASE("select_largest_segments keeps the m biggest by area") {
    SuperpixelMap m;
    m.height = 2;
    m.width = 4;
    //          seg1 x3,  seg0 x1, seg2 x4
    m.labels = {1, 1, 1, 0, 2, 2, 2, 2};
    m.segment_count = 3;
    const auto top2 = superpixel::select_largest_segments(m, 2);
    CHECK(top2.segment_count == 2);
    CHECK(top2.at(1, 0) == 0);  // old 2 (area 4) -> new 0
    CHECK(top2.at(0, 0) == 1);  // old 1 (area 3) -> new 1
    CHECK(top2.at(0, 3) == kUnassigned);
}

TEST_CASE("group_superevents: everything inside one segment") {
    SuperpixelMap map;
    map.height = 4;
    map.width = 4;
    map.labels.assign(16, 1);
    for (std::uint32_t i = 0; i < 8; ++i) map.labels[i] = 0;  // top half = segment 0
    map.segment_count = 2;

    std::vector<events::Event> evs = {{0, 1, 0, 1}, {5, 2, 1, -1}, {9, 1, 0, 1}};
    events::EventWindow w{std::span<const events::Event>(evs), 0, 9};
    const auto sev = superpixel::group_superevents(map, w);
    CHECK(sev.event_indices[0].size() == 3);
    CHECK(sev.event_indices[1].empty());
    CHECK(sev.active[0] == 1);
    CHECK(sev.active[1] == 0);
    CHECK(sev.pixels[0].size() == 2);  // duplicated pixel counted once
    CHECK(sev.unassigned_events == 0);
}

TEST_CASE("group_superevents: sentinel pixels leave events unassigned") {
    SuperpixelMap map;
    map.height = 2;
    map.width = 2;
    map.labels.assign(4, kUnassigned);
    map.segment_count = 0;

    std::vector<events::Event> evs = {{0, 0, 0, 1}, {1, 1, 1, 1}};
    events::EventWindow w{std::span<const events::Event>(evs), 0, 1};
    const auto sev = superpixel::group_superevents(map, w);
    CHECK(sev.unassigned_events == 2);
}

TEST_CASE("group_superevents matches a brute-force lookup on random data") {
    Rng rng(31);
    SuperpixelMap map;
    map.height = 8;
    map.width = 8;
    map.segment_count = 4;
    map.labels.resize(64);
    for (auto& l : map.labels) l = static_cast<std::uint32_t>(rng.below(4));

    std::vector<events::Event> evs;
    std::uint64_t t = 0;
    for (int i = 0; i < 100; ++i) {
        t += rng.below(10);
        evs.push_back({t, static_cast<std::uint16_t>(rng.below(8)),
                       static_cast<std::uint16_t>(rng.below(8)), 1});
    }
    events::EventWindow w{std::span<const events::Event>(evs), evs.front().t,
                          evs.back().t - evs.front().t + 1};
    const auto sev = superpixel::group_superevents(map, w);

    std::vector<std::size_t> counts(4, 0);
    for (const auto& e : evs) ++counts[map.at(e.y, e.x)];
    std::size_t assigned = 0;
    for (std::uint32_t s = 0; s < 4; ++s) {
        CHECK(sev.event_indices[s].size() == counts[s]);
        assigned += sev.event_indices[s].size();
        // pixel lists are deduplicated and sorted
        CHECK(std::is_sorted(sev.pixels[s].begin(), sev.pixels[s].end()));
        CHECK(std::adjacent_find(sev.pixels[s].begin(), sev.pixels[s].end()) ==
              sev.pixels[s].end());
        for (std::uint32_t idx : sev.event_indices[s]) CHECK(map.at(evs[idx].y, evs[idx].x) == s);
    }
    CHECK(assigned + sev.unassigned_events == evs.size());
}

TEST_CASE("group_superevents rejects events outside the map") {
    SuperpixelMap map;
    map.height = 2;
    map.width = 2;
    map.labels.assign(4, 0);
    map.segment_count = 1;
    std::vector<events::Event> evs = {{0, 5, 0, 1}};
    events::EventWindow w{std::span<const events::Event>(evs), 0, 1};
    CHECK_THROWS_WITH_AS(superpixel::group_superevents(map, w),
                         doctest::Contains("dimension mismatch"), std::invalid_argument);
}

TEST_CASE("boundary adherence on synthetic two-region images") {
    Rng rng(77);
    int total_boundary = 0, total_hit = 0;
    for (int trial = 0; trial < 10; ++trial) {
        const std::uint32_t h = 24, w = 24;
        const std::uint32_t edge = 6 + static_cast<std::uint32_t>(rng.below(12));
        const auto img = two_region_image(h, w, edge, 10.0, 245.0);
        superpixel::SlicParams p;
        p.segments = 9;
        const auto map = superpixel::slic(img, p);
        REQUIRE(is_full_partition(map));
        const auto sp_boundary = superpixel::boundary_mask(map);

        for (std::uint32_t y = 0; y < h; ++y)
            for (std::uint32_t x = 0; x < w; ++x) {
                const bool gt_boundary = (x + 1 == edge) || (x == edge && x > 0);
                if (!gt_boundary) continue;
                ++total_boundary;
                bool near = false;
                for (int dy = -1; dy <= 1 && !near; ++dy)
                    for (int dx = -1; dx <= 1 && !near; ++dx) {
                        const long qx = static_cast<long>(x) + dx, qy = static_cast<long>(y) + dy;
                        if (qx < 0 || qy < 0 || qx >= static_cast<long>(w) ||
                            qy >= static_cast<long>(h))
                            continue;
                        if (sp_boundary[static_cast<std::size_t>(qy) * w +
                                        static_cast<std::size_t>(qx)])
                            near = true;
                    }
                if (near) ++total_hit;
            }
    }
    CHECK(total_hit >= static_cast<int>(0.95 * total_boundary));
}
