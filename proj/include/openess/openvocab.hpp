#pragma once

#include <cstdint>
#include <vector>

#include "openess/distill.hpp"
#include "openess/embedding.hpp"
#include "openess/tensor.hpp"

namespace openess::openvocab {

/// Per pixel: class of the text embedding with the highest cosine similarity
/// to the Q-projected feature; ties break toward the lowest class index. A
/// zero projected vector has similarity 0 to everything.
LabelMap predict_zero_shot(const FeatureMap& event_features,
                           const distill::ProjectionHead& head_q,
                           const embedding::TextEmbeddingSet& texts);

/// Per-pixel cosine similarity to a single unit text vector, in [-1, 1];
/// zero feature vectors map to 0.
FeatureMap attention_map(const FeatureMap& event_features,
                         const distill::ProjectionHead& head_q,
                         const std::vector<double>& text);

/// Point-wise linear classifier over frozen features.
struct LinearHead {
    std::uint32_t classes = 0;
    std::uint32_t dim = 0;
    std::vector<double> weight;  // [z][d]
    std::vector<double> bias;    // [z]
};

struct ProbeConfig {
    std::uint32_t classes = 0;
    double lr = 0.5;
    std::uint32_t steps = 200;
};

struct ProbeResult {
    LinearHead head;
    double final_cross_entropy = 0.0;
    double train_accuracy = 0.0;
    std::vector<std::uint32_t> absent_classes;
};

/// Multinomial logistic regression by full-batch gradient descent on the
/// softmax cross-entropy; ignore pixels excluded. Head starts at zero, so
/// zero steps predicts class 0 everywhere (tie rule).
ProbeResult linear_probe(const std::vector<const FeatureMap*>& features,
                         const std::vector<const LabelMap*>& labels, const ProbeConfig& cfg);

LabelMap predict_linear(const FeatureMap& features, const LinearHead& head);

/// Cross-entropy and gradients of the probe objective on one dataset; used by
/// the training loop and exposed for gradient checks.
double probe_loss(const std::vector<const FeatureMap*>& features,
                  const std::vector<const LabelMap*>& labels, const LinearHead& head,
                  LinearHead* grads);

}  // namespace openess::openvocab
