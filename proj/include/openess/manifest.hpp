#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace openess::harness {

/// One dataset sample; empty strings mark absent files.
struct SampleRef {
    std::string sequence;
    std::string event_path;
    std::string frame_path;
    std::string mask_path;
    std::string label_path;
};

/// Plain-text manifest, one sample per line:
///   seq_id evt_path [frame_path] [mask_path] [label_path]
/// with '-' for absent entries. Relative paths resolve against the manifest
/// directory.
struct DatasetManifest {
    std::vector<SampleRef> samples;
    std::string base_dir;

    std::string resolve(const std::string& path) const;
};

DatasetManifest parse_manifest(const std::string& text, const std::string& base_dir = "");
DatasetManifest load_manifest(const std::string& path);

struct BudgetSplit {
    std::vector<std::size_t> labeled;
    std::vector<std::size_t> unlabeled;
};

/// Per sequence, the first ceil(fraction * length) samples are labeled.
/// Requires 0 < fraction <= 1 and a non-empty manifest.
BudgetSplit split_budget(const DatasetManifest& manifest, double fraction);

}  // namespace openess::harness

namespace openess {
/// CLI entry point shared by the tool binary and the tests. Returns the
/// process exit status.
int run_cli(const std::vector<std::string>& args);
}  // namespace openess
