#include <doctest.h>

#include <cmath>

#include "openess/metrics.hpp"
#include "openess/rng.hpp"
#include "openess_ref/reference.hpp"

using namespace openess;
using metrics::ConfusionMatrix;

namespace {

LabelMap from_ids(std::uint32_t h, std::uint32_t w, std::vector<std::uint8_t> ids) {
    LabelMap m(h, w);
    m.ids = std::move(ids);
    return m;
}

}  // namespace

TEST_CASE("perfect prediction fills the diagonal") {
    LabelMap gt(10, 10, 0);
    Rng rng(1);
    for (auto& id : gt.ids) id = static_cast<std::uint8_t>(rng.below(3));
    ConfusionMatrix cm(3);
    metrics::accumulate(cm, gt, gt);
    CHECK(cm.total() == 100);
    std::uint64_t diag = 0;
    for (std::uint32_t z = 0; z < 3; ++z) diag += cm.at(z, z);
    CHECK(diag == 100);
    const auto rep = metrics::iou_scores(cm);
    CHECK(rep.miou == 1.0);
    CHECK(rep.accuracy == 1.0);
    for (std::uint32_t z = 0; z < 3; ++z) CHECK(rep.iou[z] == 1.0);
}

TEST_CASE("ignore pixels are skipped on either side") {
    LabelMap gt = from_ids(1, 4, {0, LabelMap::kIgnore, 1, 1});
    LabelMap pred = from_ids(1, 4, {0, 1, LabelMap::kIgnore, 0});
    ConfusionMatrix cm(2);
    metrics::accumulate(cm, pred, gt);
    CHECK(cm.total() == 2);  // pixels 0 and 3 only

    LabelMap all_ignore(1, 4, LabelMap::kIgnore);
    ConfusionMatrix cm2(2);
    metrics::accumulate(cm2, pred, all_ignore);
    CHECK(cm2.total() == 0);
}

TEST_CASE("hand-counted confusion example") {
    // gt = [0,0,1,1], pred = [0,1,1,1] -> cm = [[1,1],[0,2]].
    LabelMap gt = from_ids(1, 4, {0, 0, 1, 1});
    LabelMap pred = from_ids(1, 4, {0, 1, 1, 1});
    ConfusionMatrix cm(2);
    metrics::accumulate(cm, pred, gt);
    CHECK(cm.at(0, 0) == 1);
    CHECK(cm.at(0, 1) == 1);
    CHECK(cm.at(1, 0) == 0);
    CHECK(cm.at(1, 1) == 2);

    const auto rep = metrics::iou_scores(cm);
    CHECK(rep.iou[0] == doctest::Approx(0.5));
    CHECK(rep.iou[1] == doctest::Approx(2.0 / 3.0));
    CHECK(rep.miou == doctest::Approx(7.0 / 12.0));
    CHECK(rep.accuracy == doctest::Approx(0.75));
}

TEST_CASE("absent classes: excluded by default, zero under strict scoring") {
    LabelMap gt = from_ids(1, 4, {0, 0, 1, 1});
    LabelMap pred = from_ids(1, 4, {0, 0, 1, 1});
    ConfusionMatrix cm(3);  // class 2 never appears
    metrics::accumulate(cm, pred, gt);
    const auto rep = metrics::iou_scores(cm);
    CHECK(std::isnan(rep.iou[2]));
    CHECK(!rep.present[2]);
    CHECK(rep.miou == doctest::Approx(1.0));

    const auto strict = metrics::iou_scores(cm, true);
    CHECK(strict.iou[2] == 0.0);
    CHECK(strict.miou == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("accumulate validates shapes and ids") {
    LabelMap a(2, 2, 0), b(2, 3, 0);
    ConfusionMatrix cm(2);
    CHECK_THROWS(metrics::accumulate(cm, a, b));
    LabelMap big(2, 2, 5);
    CHECK_THROWS(metrics::accumulate(cm, big, a));
    ConfusionMatrix empty(2);
    CHECK_THROWS(metrics::iou_scores(empty));
}

TEST_CASE("accumulate is additive over batches") {
    Rng rng(17);
    LabelMap gt1(4, 4, 0), pred1(4, 4, 0), gt2(4, 4, 0), pred2(4, 4, 0);
    for (auto* m : {&gt1, &pred1, &gt2, &pred2})
        for (auto& id : m->ids) id = static_cast<std::uint8_t>(rng.below(4));

    ConfusionMatrix separate(4);
    metrics::accumulate(separate, pred1, gt1);
    metrics::accumulate(separate, pred2, gt2);

    ConfusionMatrix merged(4);
    ConfusionMatrix part(4);
    metrics::accumulate(merged, pred1, gt1);
    metrics::accumulate(part, pred2, gt2);
    merged.merge(part);
    CHECK(separate.counts == merged.counts);
}

TEST_CASE("metrics match the brute-force TP/FP/FN oracle on random pairs") {
    Rng rng(23);
    for (int trial = 0; trial < 200; ++trial) {
        const std::uint32_t h = 1 + static_cast<std::uint32_t>(rng.below(6));
        const std::uint32_t w = 1 + static_cast<std::uint32_t>(rng.below(6));
        const std::uint32_t zc = 2 + static_cast<std::uint32_t>(rng.below(3));
        LabelMap gt(h, w, 0), pred(h, w, 0);
        for (auto& id : gt.ids)
            id = rng.uniform() < 0.1 ? LabelMap::kIgnore : static_cast<std::uint8_t>(rng.below(zc));
        for (auto& id : pred.ids)
            id = rng.uniform() < 0.1 ? LabelMap::kIgnore : static_cast<std::uint8_t>(rng.below(zc));

        ConfusionMatrix cm(zc);
        bool empty = true;
        for (std::size_t i = 0; i < gt.pixels(); ++i)
            if (gt.ids[i] != LabelMap::kIgnore && pred.ids[i] != LabelMap::kIgnore) empty = false;
        if (empty) continue;
        metrics::accumulate(cm, pred, gt);
        const auto rep = metrics::iou_scores(cm);

        std::vector<double> oracle_iou;
        double oracle_miou = 0.0, oracle_acc = 0.0;
        ref::iou_brute(pred, gt, zc, oracle_iou, oracle_miou, oracle_acc, false);
        CHECK(rep.miou == oracle_miou);
        CHECK(rep.accuracy == oracle_acc);
        for (std::uint32_t z = 0; z < zc; ++z) {
            if (std::isnan(oracle_iou[z]))
                CHECK(std::isnan(rep.iou[z]));
            else
                CHECK(rep.iou[z] == oracle_iou[z]);
        }
    }
}

TEST_CASE("class permutation leaves the score multiset unchanged") {
    Rng rng(29);
    LabelMap gt(8, 8, 0), pred(8, 8, 0);
    for (auto& id : gt.ids) id = static_cast<std::uint8_t>(rng.below(3));
    for (auto& id : pred.ids) id = static_cast<std::uint8_t>(rng.below(3));

    ConfusionMatrix cm(3);
    metrics::accumulate(cm, pred, gt);
    const auto rep = metrics::iou_scores(cm);

    const std::uint8_t perm[3] = {2, 0, 1};
    LabelMap gt_p = gt, pred_p = pred;
    for (auto& id : gt_p.ids) id = perm[id];
    for (auto& id : pred_p.ids) id = perm[id];
    ConfusionMatrix cm_p(3);
    metrics::accumulate(cm_p, pred_p, gt_p);
    const auto rep_p = metrics::iou_scores(cm_p);

    CHECK(rep_p.miou == doctest::Approx(rep.miou).epsilon(1e-15));
    CHECK(rep_p.accuracy == doctest::Approx(rep.accuracy).epsilon(1e-15));
    for (std::uint32_t z = 0; z < 3; ++z)
        CHECK(rep_p.iou[perm[z]] == doctest::Approx(rep.iou[z]).epsilon(1e-15));
}

TEST_CASE("csv and kv reports include per-class lines and the summary") {
    LabelMap gt = from_ids(1, 4, {0, 0, 1, 1});
    LabelMap pred = from_ids(1, 4, {0, 1, 1, 1});
    ConfusionMatrix cm(2);
    metrics::accumulate(cm, pred, gt);
    const auto rep = metrics::iou_scores(cm);
    const std::string csv = metrics::report_csv(rep);
    CHECK(csv.find("class,iou\n") == 0);
    CHECK(csv.find("miou,") != std::string::npos);
    const std::string kv = metrics::report_kv(rep);
    CHECK(kv.find("miou=") != std::string::npos);
    CHECK(kv.find("acc=") != std::string::npos);
}
