#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "openess/tensor.hpp"

namespace openess::metrics {

/// Rows = ground truth, columns = prediction.
struct ConfusionMatrix {
    std::uint32_t classes = 0;
    std::vector<std::uint64_t> counts;

    ConfusionMatrix() = default;
    explicit ConfusionMatrix(std::uint32_t z)
        : classes(z), counts(static_cast<std::size_t>(z) * z, 0) {}

    std::uint64_t& at(std::uint32_t gt, std::uint32_t pred) {
        return counts[static_cast<std::size_t>(gt) * classes + pred];
    }
    std::uint64_t at(std::uint32_t gt, std::uint32_t pred) const {
        return counts[static_cast<std::size_t>(gt) * classes + pred];
    }
    std::uint64_t total() const;
    void merge(const ConfusionMatrix& other);
};

/// Counts every pixel where neither side is ignore; ids must be < classes.
void accumulate(ConfusionMatrix& cm, const LabelMap& pred, const LabelMap& gt);

struct IouReport {
    std::vector<double> iou;        // NaN for excluded classes
    std::vector<bool> present;      // class seen in gt or pred
    double miou = 0.0;
    double accuracy = 0.0;
};

/// IoU_z = cm[z][z] / (row_z + col_z - cm[z][z]). Classes absent from both
/// sides are excluded from the mean unless strict_miou, which scores them 0.
IouReport iou_scores(const ConfusionMatrix& cm, bool strict_miou = false);

/// "class,iou" lines plus a "miou,acc" summary line.
std::string report_csv(const IouReport& report);
/// key=value block for machine consumption.
std::string report_kv(const IouReport& report);

}  // namespace openess::metrics
