#include "openess/embedding.hpp"

#include <cmath>
#include <stdexcept>

#include "openess/rng.hpp"

namespace openess::embedding {

namespace {

constexpr std::uint64_t kAnchorStream = 0x414e4348;  // noise and anchors draw
constexpr std::uint64_t kNoiseStream = 0x4e4f4953;   // from disjoint streams

void normalize(std::vector<double>& v, const std::string& context) {
    double norm_sq = 0.0;
    for (double x : v) norm_sq += x * x;
    const double norm = std::sqrt(norm_sq);
    if (!(norm > 1e-12)) throw std::invalid_argument(context);
    for (double& x : v) x /= norm;
}

}  // namespace

int TextEmbeddingSet::find(const std::string& name) const {
    for (std::size_t i = 0; i < names.size(); ++i)
        if (names[i] == name) return static_cast<int>(i);
    return -1;
}

TextEmbeddingSet average_prompt_embeddings(
    const std::vector<std::pair<std::string, std::vector<double>>>& per_prompt) {
    std::vector<std::string> class_names;
    for (const auto& [name, vec] : per_prompt) {
        (void)vec;
        bool seen = false;
        for (const auto& existing : class_names)
            if (existing == name) {
                seen = true;
                break;
            }
        if (!seen) class_names.push_back(name);
    }
    return average_prompt_embeddings(class_names, per_prompt);
}

TextEmbeddingSet average_prompt_embeddings(
    const std::vector<std::string>& class_names,
    const std::vector<std::pair<std::string, std::vector<double>>>& per_prompt) {
    if (class_names.empty()) throw std::invalid_argument("average_prompt_embeddings: no classes");
    std::size_t dim = 0;
    for (const auto& [name, vec] : per_prompt) {
        (void)name;
        if (dim == 0) dim = vec.size();
        if (vec.size() != dim)
            throw std::invalid_argument("average_prompt_embeddings: prompt dimension mismatch");
    }
    if (dim == 0) throw std::invalid_argument("average_prompt_embeddings: empty prompts");

    TextEmbeddingSet set;
    set.dim = static_cast<std::uint32_t>(dim);
    for (const auto& name : class_names) {
        for (const auto& existing : set.names)
            if (existing == name)
                throw std::invalid_argument("average_prompt_embeddings: duplicate class " + name);
        std::vector<double> mean(dim, 0.0);
        std::size_t count = 0;
        for (const auto& [pname, vec] : per_prompt) {
            if (pname != name) continue;
            for (std::size_t d = 0; d < dim; ++d) mean[d] += vec[d];
            ++count;
        }
        if (count == 0)
            throw std::invalid_argument("average_prompt_embeddings: class with zero prompts: " +
                                        name);
        for (double& v : mean) v /= static_cast<double>(count);
        normalize(mean, "average_prompt_embeddings: degenerate class embedding for " + name);
        set.names.push_back(name);
        set.vectors.push_back(std::move(mean));
    }
    return set;
}

TextEmbeddingSet random_embeddings(const std::vector<std::string>& class_names,
                                   std::uint32_t dim, std::uint64_t seed) {
    if (dim == 0) throw std::invalid_argument("random_embeddings: dim must be >= 1");
    if (class_names.size() > dim)
        throw std::invalid_argument("random_embeddings: more classes than dimensions");
    TextEmbeddingSet set;
    set.dim = dim;
    // Gram-Schmidt over seeded Gaussian draws: the class embeddings come out
    // orthonormal, so no two synthetic classes are accidentally close.
    for (std::size_t z = 0; z < class_names.size(); ++z) {
        std::vector<double> v(dim);
        for (std::uint32_t d = 0; d < dim; ++d)
            v[d] = hash_normal(seed, kAnchorStream, z, d);
        for (const auto& prev : set.vectors) {
            double proj = 0.0;
            for (std::uint32_t d = 0; d < dim; ++d) proj += v[d] * prev[d];
            for (std::uint32_t d = 0; d < dim; ++d) v[d] -= proj * prev[d];
        }
        normalize(v, "random_embeddings: degenerate draw");
        set.names.push_back(class_names[z]);
        set.vectors.push_back(std::move(v));
    }
    return set;
}

FeatureMap synth_features(const LabelMap& labels, const SynthFeatureParams& params,
                          const TextEmbeddingSet* anchors) {
    if (params.channels == 0) throw std::invalid_argument("synth_features: channels must be >= 1");
    if (anchors && anchors->dim != params.channels)
        throw std::invalid_argument("synth_features: anchor dimension mismatch");

    // Resolve the anchor table: supplied, or seeded random unit vectors for
    // the classes present.
    std::uint32_t z_count = 0;
    if (anchors) {
        z_count = anchors->class_count();
    } else {
        for (std::uint8_t id : labels.ids)
            if (id != LabelMap::kIgnore && id + 1u > z_count) z_count = id + 1u;
    }
    std::vector<std::vector<double>> table(z_count);
    for (std::uint32_t z = 0; z < z_count; ++z) {
        if (anchors) {
            table[z] = anchors->vectors[z];
        } else {
            table[z].resize(params.channels);
            for (std::uint32_t d = 0; d < params.channels; ++d)
                table[z][d] = hash_normal(params.seed, kAnchorStream, z, d);
            normalize(table[z], "synth_features: degenerate anchor draw");
        }
    }
    for (std::uint8_t id : labels.ids)
        if (id != LabelMap::kIgnore && id >= z_count)
            throw std::invalid_argument("synth_features: unknown class id in labels");

    FeatureMap out(params.channels, labels.height, labels.width);
    const std::size_t pixels = labels.pixels();
#pragma omp parallel for schedule(static)
    for (long long pi = 0; pi < static_cast<long long>(pixels); ++pi) {
        const std::size_t p = static_cast<std::size_t>(pi);
        const std::uint8_t id = labels.ids[p];
        for (std::uint32_t d = 0; d < params.channels; ++d) {
            double v = id == LabelMap::kIgnore ? 0.0 : table[id][d];
            if (params.noise_sigma > 0.0)
                v += params.noise_sigma * hash_normal(params.seed, kNoiseStream, p, d);
            out.values[static_cast<std::size_t>(d) * pixels + p] = v;
        }
    }
    return out;
}

}  // namespace openess::embedding
