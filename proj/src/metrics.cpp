#include "openess/metrics.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace openess::metrics {

std::uint64_t ConfusionMatrix::total() const {
    std::uint64_t t = 0;
    for (std::uint64_t c : counts) t += c;
    return t;
}

void ConfusionMatrix::merge(const ConfusionMatrix& other) {
    if (other.classes != classes) throw std::invalid_argument("merge: class count mismatch");
    for (std::size_t i = 0; i < counts.size(); ++i) counts[i] += other.counts[i];
}

void accumulate(ConfusionMatrix& cm, const LabelMap& pred, const LabelMap& gt) {
    if (pred.height != gt.height || pred.width != gt.width)
        throw std::invalid_argument("accumulate: shape mismatch");
    for (std::size_t i = 0; i < gt.pixels(); ++i) {
        const std::uint8_t g = gt.ids[i];
        const std::uint8_t p = pred.ids[i];
        if (g == LabelMap::kIgnore || p == LabelMap::kIgnore) continue;
        if (g >= cm.classes || p >= cm.classes)
            throw std::out_of_range("accumulate: class id >= matrix size");
        ++cm.at(g, p);
    }
}

IouReport iou_scores(const ConfusionMatrix& cm, bool strict_miou) {
    const std::uint64_t total = cm.total();
    if (total == 0) throw std::invalid_argument("iou_scores: empty confusion matrix");
    IouReport rep;
    rep.iou.assign(cm.classes, std::nan(""));
    rep.present.assign(cm.classes, false);
    std::uint64_t trace = 0;
    double sum = 0.0;
    std::uint32_t counted = 0;
    for (std::uint32_t z = 0; z < cm.classes; ++z) {
        std::uint64_t row = 0, col = 0;
        for (std::uint32_t k = 0; k < cm.classes; ++k) {
            row += cm.at(z, k);
            col += cm.at(k, z);
        }
        const std::uint64_t tp = cm.at(z, z);
        trace += tp;
        const std::uint64_t denom = row + col - tp;
        if (denom == 0) {
            // Absent everywhere: excluded, or scored zero in strict mode.
            if (strict_miou) {
                rep.iou[z] = 0.0;
                sum += 0.0;
                ++counted;
            }
            continue;
        }
        rep.present[z] = true;
        rep.iou[z] = static_cast<double>(tp) / static_cast<double>(denom);
        sum += rep.iou[z];
        ++counted;
    }
    rep.miou = counted ? sum / static_cast<double>(counted) : 0.0;
    rep.accuracy = static_cast<double>(trace) / static_cast<double>(total);
    return rep;
}

std::string report_csv(const IouReport& report) {
    std::ostringstream out;
    out.precision(17);
    out << "class,iou\n";
    for (std::size_t z = 0; z < report.iou.size(); ++z) {
        out << z << ',';
        if (std::isnan(report.iou[z]))
            out << "excluded";
        else
            out << report.iou[z];
        out << '\n';
    }
    out << "miou," << report.miou << '\n';
    out << "acc," << report.accuracy << '\n';
    return out.str();
}

std::string report_kv(const IouReport& report) {
    std::ostringstream out;
    out.precision(17);
    for (std::size_t z = 0; z < report.iou.size(); ++z)
        if (!std::isnan(report.iou[z])) out << "iou_" << z << '=' << report.iou[z] << '\n';
    out << "miou=" << report.miou << '\n';
    out << "acc=" << report.accuracy << '\n';
    return out.str();
}

}  // namespace openess::metrics
