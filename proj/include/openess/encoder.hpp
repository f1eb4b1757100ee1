#pragma once

#include <cstdint>
#include <vector>

#include "openess/tensor.hpp"

namespace openess::encoder {

/// One 3x3, stride-1, zero-padded convolution. Weights are laid out
/// [out][in][ky][kx].
struct ConvLayer {
    std::uint32_t in_channels = 0;
    std::uint32_t out_channels = 0;
    std::vector<double> weights;
    std::vector<double> bias;

    double& w(std::uint32_t co, std::uint32_t ci, std::uint32_t ky, std::uint32_t kx) {
        return weights[((static_cast<std::size_t>(co) * in_channels + ci) * 3 + ky) * 3 + kx];
    }
    double w(std::uint32_t co, std::uint32_t ci, std::uint32_t ky, std::uint32_t kx) const {
        return weights[((static_cast<std::size_t>(co) * in_channels + ci) * 3 + ky) * 3 + kx];
    }
};

/// Small convolutional stack (each layer 3x3/stride 1/pad 1, ReLU after every
/// layer). Spatial size is preserved end to end.
struct EncoderParams {
    std::vector<ConvLayer> layers;

    std::uint32_t in_channels() const { return layers.empty() ? 0 : layers.front().in_channels; }
    std::uint32_t out_channels() const { return layers.empty() ? 0 : layers.back().out_channels; }
    std::size_t parameter_count() const;
};

/// He-uniform initialization (fan-in 9*C_in), biases zero, fixed draw order.
EncoderParams make_encoder(const std::vector<std::uint32_t>& widths, std::uint64_t seed);

/// Per-layer tensors cached by the forward pass for exact backprop.
struct Activations {
    std::vector<FeatureMap> inputs;    // inputs[l] feeds layer l
    std::vector<FeatureMap> preacts;   // pre-ReLU outputs of layer l
};

/// Deterministic forward pass; the result is the ReLU of the last layer's
/// pre-activation. Throws on channel-count mismatch.
FeatureMap forward(const EncoderParams& params, const FeatureMap& input, Activations* acts);

struct EncoderGrads {
    std::vector<ConvLayer> layers;  // same shapes as the parameters
    FeatureMap input;
};

/// Exact gradients of the forward map. `acts` must come from a forward call
/// with these parameters; shape mismatches are rejected.
EncoderGrads backward(const EncoderParams& params, const Activations& acts,
                      const FeatureMap& grad_output);

}  // namespace openess::encoder
