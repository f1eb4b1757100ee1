#include "openess/encoder.hpp"

#include <cmath>
#include <stdexcept>

#include "openess/rng.hpp"

namespace openess::encoder {

std::size_t EncoderParams::parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += l.weights.size() + l.bias.size();
    return n;
}

EncoderParams make_encoder(const std::vector<std::uint32_t>& widths, std::uint64_t seed) {
    if (widths.size() < 2) throw std::invalid_argument("make_encoder: need at least two widths");
    for (std::uint32_t w : widths)
        if (w == 0) throw std::invalid_argument("make_encoder: zero channel width");
    EncoderParams params;
    Rng rng(seed);
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
        ConvLayer layer;
        layer.in_channels = widths[l];
        layer.out_channels = widths[l + 1];
        layer.weights.resize(static_cast<std::size_t>(layer.out_channels) * layer.in_channels * 9);
        layer.bias.assign(layer.out_channels, 0.0);
        const double limit = std::sqrt(6.0 / (9.0 * layer.in_channels));
        for (double& w : layer.weights) w = rng.uniform(-limit, limit);
        params.layers.push_back(std::move(layer));
    }
    return params;
}

namespace {

// Plane-sweep convolution: for each tap, one contiguous shifted
// multiply-add over the image. Each output plane accumulates in a fixed
// (ci, ky, kx, y, x) order, so results do not depend on the thread count.
void conv3x3(const ConvLayer& layer, const FeatureMap& in, FeatureMap& preact) {
    const std::uint32_t h = in.height, w = in.width;
    const std::size_t plane = static_cast<std::size_t>(h) * w;
#pragma omp parallel for schedule(static)
    for (long long co = 0; co < static_cast<long long>(layer.out_channels); ++co) {
        const std::uint32_t c = static_cast<std::uint32_t>(co);
        double* out = preact.values.data() + static_cast<std::size_t>(c) * plane;
        for (std::size_t i = 0; i < plane; ++i) out[i] = layer.bias[c];
        for (std::uint32_t ci = 0; ci < layer.in_channels; ++ci) {
            const double* src = in.values.data() + static_cast<std::size_t>(ci) * plane;
            for (std::uint32_t ky = 0; ky < 3; ++ky)
                for (std::uint32_t kx = 0; kx < 3; ++kx) {
                    const double wv = layer.w(c, ci, ky, kx);
                    const int dy = static_cast<int>(ky) - 1, dx = static_cast<int>(kx) - 1;
                    const std::uint32_t y0 = dy < 0 ? 1 : 0;
                    const std::uint32_t y1 = dy > 0 ? h - 1 : h;
                    const std::uint32_t x0 = dx < 0 ? 1 : 0;
                    const std::uint32_t x1 = dx > 0 ? w - 1 : w;
                    for (std::uint32_t y = y0; y < y1; ++y) {
                        double* orow = out + static_cast<std::size_t>(y) * w;
                        const double* irow =
                            src + static_cast<std::size_t>(y + dy) * w + dx;
                        for (std::uint32_t x = x0; x < x1; ++x) orow[x] += wv * irow[x];
                    }
                }
        }
    }
}

}  // namespace

FeatureMap forward(const EncoderParams& params, const FeatureMap& input, Activations* acts) {
    if (params.layers.empty()) throw std::invalid_argument("forward: empty encoder");
    if (input.channels != params.in_channels())
        throw std::invalid_argument("forward: input channel mismatch");
    if (input.height == 0 || input.width == 0)
        throw std::invalid_argument("forward: empty input");

    if (acts) {
        acts->inputs.clear();
        acts->preacts.clear();
    }
    FeatureMap current = input;
    for (const auto& layer : params.layers) {
        FeatureMap preact(layer.out_channels, current.height, current.width);
        conv3x3(layer, current, preact);
        if (acts) acts->inputs.push_back(std::move(current));
        FeatureMap post = preact;
        for (double& v : post.values) v = v > 0.0 ? v : 0.0;
        if (acts) acts->preacts.push_back(std::move(preact));
        current = std::move(post);
    }
    return current;
}

EncoderGrads backward(const EncoderParams& params, const Activations& acts,
                      const FeatureMap& grad_output) {
    const std::size_t nl = params.layers.size();
    if (acts.inputs.size() != nl || acts.preacts.size() != nl)
        throw std::invalid_argument("backward: stale or mismatched activations");
    for (std::size_t l = 0; l < nl; ++l) {
        if (acts.inputs[l].channels != params.layers[l].in_channels ||
            acts.preacts[l].channels != params.layers[l].out_channels)
            throw std::invalid_argument("backward: stale or mismatched activations");
    }
    if (grad_output.channels != params.out_channels() ||
        grad_output.height != acts.preacts.back().height ||
        grad_output.width != acts.preacts.back().width)
        throw std::invalid_argument("backward: gradient shape mismatch");

    EncoderGrads grads;
    grads.layers.resize(nl);

    FeatureMap grad_post = grad_output;
    for (std::size_t li = nl; li-- > 0;) {
        const ConvLayer& layer = params.layers[li];
        const FeatureMap& in = acts.inputs[li];
        const FeatureMap& pre = acts.preacts[li];
        const std::uint32_t h = in.height, w = in.width;

        // ReLU mask.
        FeatureMap grad_pre = grad_post;
        for (std::size_t i = 0; i < grad_pre.values.size(); ++i)
            if (pre.values[i] <= 0.0) grad_pre.values[i] = 0.0;

        ConvLayer& g = grads.layers[li];
        g.in_channels = layer.in_channels;
        g.out_channels = layer.out_channels;
        g.weights.assign(layer.weights.size(), 0.0);
        g.bias.assign(layer.bias.size(), 0.0);

        const std::size_t plane = static_cast<std::size_t>(h) * w;
        // Each weight-gradient entry is a shifted plane dot product in a
        // fixed (y, x) order, so the result is independent of the thread
        // count.
#pragma omp parallel for schedule(static)
        for (long long co = 0; co < static_cast<long long>(layer.out_channels); ++co) {
            const std::uint32_t c = static_cast<std::uint32_t>(co);
            const double* gp = grad_pre.values.data() + static_cast<std::size_t>(c) * plane;
            double bias_acc = 0.0;
            for (std::size_t i = 0; i < plane; ++i) bias_acc += gp[i];
            g.bias[c] = bias_acc;
            for (std::uint32_t ci = 0; ci < layer.in_channels; ++ci) {
                const double* src = in.values.data() + static_cast<std::size_t>(ci) * plane;
                for (std::uint32_t ky = 0; ky < 3; ++ky)
                    for (std::uint32_t kx = 0; kx < 3; ++kx) {
                        const int dy = static_cast<int>(ky) - 1, dx = static_cast<int>(kx) - 1;
                        const std::uint32_t y0 = dy < 0 ? 1 : 0;
                        const std::uint32_t y1 = dy > 0 ? h - 1 : h;
                        const std::uint32_t x0 = dx < 0 ? 1 : 0;
                        const std::uint32_t x1 = dx > 0 ? w - 1 : w;
                        double acc = 0.0;
                        for (std::uint32_t y = y0; y < y1; ++y) {
                            const double* grow = gp + static_cast<std::size_t>(y) * w;
                            const double* irow =
                                src + static_cast<std::size_t>(y + dy) * w + dx;
                            for (std::uint32_t x = x0; x < x1; ++x) acc += grow[x] * irow[x];
                        }
                        g.w(c, ci, ky, kx) = acc;
                    }
            }
        }

        // Gradient w.r.t. the layer input: plane sweep with flipped offsets;
        // becomes grad_post for the layer below.
        FeatureMap grad_in(layer.in_channels, h, w);
#pragma omp parallel for schedule(static)
        for (long long cii = 0; cii < static_cast<long long>(layer.in_channels); ++cii) {
            const std::uint32_t ci = static_cast<std::uint32_t>(cii);
            double* dst = grad_in.values.data() + static_cast<std::size_t>(ci) * plane;
            for (std::uint32_t c = 0; c < layer.out_channels; ++c) {
                const double* gp =
                    grad_pre.values.data() + static_cast<std::size_t>(c) * plane;
                for (std::uint32_t ky = 0; ky < 3; ++ky)
                    for (std::uint32_t kx = 0; kx < 3; ++kx) {
                        const double wv = layer.w(c, ci, ky, kx);
                        // Input (y, x) receives grad from output (y-dy, x-dx).
                        const int dy = static_cast<int>(ky) - 1, dx = static_cast<int>(kx) - 1;
                        const std::uint32_t y0 = dy > 0 ? dy : 0;
                        const std::uint32_t y1 = dy < 0 ? h - 1 : h;
                        const std::uint32_t x0 = dx > 0 ? dx : 0;
                        const std::uint32_t x1 = dx < 0 ? w - 1 : w;
                        for (std::uint32_t y = y0; y < y1; ++y) {
                            double* drow = dst + static_cast<std::size_t>(y) * w;
                            const double* grow =
                                gp + static_cast<std::size_t>(y - dy) * w - dx;
                            for (std::uint32_t x = x0; x < x1; ++x) drow[x] += wv * grow[x];
                        }
                    }
            }
        }
        grad_post = std::move(grad_in);
    }
    grads.input = std::move(grad_post);
    return grads;
}

}  // namespace openess::encoder
