#include "openess/manifest.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace openess::harness {

std::string DatasetManifest::resolve(const std::string& path) const {
    if (path.empty() || base_dir.empty() || path.front() == '/') return path;
    return base_dir + "/" + path;
}

DatasetManifest parse_manifest(const std::string& text, const std::string& base_dir) {
    DatasetManifest m;
    m.base_dir = base_dir;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::istringstream ls(line);
        std::string seq, evt, frame, mask, label;
        if (!(ls >> seq)) continue;  // blank line
        if (!(ls >> evt))
            throw std::runtime_error("manifest line " + std::to_string(lineno) +
                                     ": expected seq_id and event path");
        ls >> frame >> mask >> label;
        auto norm = [](std::string& s) {
            if (s == "-") s.clear();
        };
        norm(evt);
        norm(frame);
        norm(mask);
        norm(label);
        if (seq.empty() || evt.empty())
            throw std::runtime_error("manifest line " + std::to_string(lineno) +
                                     ": sequence id and event path are required");
        m.samples.push_back(SampleRef{seq, evt, frame, mask, label});
    }
    return m;
}

DatasetManifest load_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open manifest " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    std::string dir = ".";
    const auto slash = path.find_last_of('/');
    if (slash != std::string::npos) dir = path.substr(0, slash);
    return parse_manifest(buf.str(), dir);
}

BudgetSplit split_budget(const DatasetManifest& manifest, double fraction) {
    if (manifest.samples.empty()) throw std::invalid_argument("split_budget: empty manifest");
    if (!(fraction > 0.0) || fraction > 1.0)
        throw std::invalid_argument("split_budget: fraction must be in (0, 1]");

    // Sequences in first-appearance order.
    std::vector<std::string> seqs;
    for (const auto& s : manifest.samples) {
        bool seen = false;
        for (const auto& q : seqs)
            if (q == s.sequence) {
                seen = true;
                break;
            }
        if (!seen) seqs.push_back(s.sequence);
    }

    BudgetSplit split;
    for (const auto& seq : seqs) {
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < manifest.samples.size(); ++i)
            if (manifest.samples[i].sequence == seq) idx.push_back(i);
        const std::size_t labeled =
            static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(idx.size())));
        for (std::size_t k = 0; k < idx.size(); ++k)
            (k < labeled ? split.labeled : split.unlabeled).push_back(idx[k]);
    }
    return split;
}

}  // namespace openess::harness
