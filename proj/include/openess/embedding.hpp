#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "openess/tensor.hpp"

namespace openess::embedding {

/// Per-class unit-norm text embeddings. Construction paths (prompt averaging,
/// file load, synthetic generation) all normalize, so the unit-norm invariant
/// holds by construction.
struct TextEmbeddingSet {
    std::uint32_t dim = 0;
    std::vector<std::string> names;
    std::vector<std::vector<double>> vectors;

    std::uint32_t class_count() const { return static_cast<std::uint32_t>(vectors.size()); }
    /// Index of a class name, or -1.
    int find(const std::string& name) const;
};

/// Mean of each class's prompt vectors, re-normalized. Classes appear in
/// first-encounter order of `per_prompt`.
TextEmbeddingSet average_prompt_embeddings(
    const std::vector<std::pair<std::string, std::vector<double>>>& per_prompt);

/// As above but with an explicit class list; a listed class with no prompt is
/// an error.
TextEmbeddingSet average_prompt_embeddings(
    const std::vector<std::string>& class_names,
    const std::vector<std::pair<std::string, std::vector<double>>>& per_prompt);

/// Seeded random unit vectors, one per class name.
TextEmbeddingSet random_embeddings(const std::vector<std::string>& class_names,
                                   std::uint32_t dim, std::uint64_t seed);

struct SynthFeatureParams {
    std::uint32_t channels = 16;
    double noise_sigma = 0.0;
    std::uint64_t seed = 1;
};

/// Stand-in for a frozen frame encoder: each pixel receives its class anchor
/// plus isotropic Gaussian noise. Anchors come from `anchors` when given,
/// otherwise they are seeded random unit vectors per class. Ignore pixels get
/// noise around zero.
FeatureMap synth_features(const LabelMap& labels, const SynthFeatureParams& params,
                          const TextEmbeddingSet* anchors = nullptr);

}  // namespace openess::embedding
