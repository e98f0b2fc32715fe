#pragma once

#include <random>

#include "onenet/conv.hpp"
#include "onenet/shuffle.hpp"

namespace onenet {

// Channel axis position for batch norm: activations are either [B, C, ...]
// image tensors or [B, P, C] channels-innermost flattened tensors.
enum class ChannelAxis { dim1, innermost };

template <class T>
void kaiming_normal(Tensor<T>& w, i64 fan_in, std::mt19937_64& rng) {
    std::normal_distribution<T> dist(T(0), std::sqrt(T(2) / static_cast<T>(fan_in)));
    for (auto& v : w.vec()) v = dist(rng);
}

// Per-channel normalization with learned scale/shift. Training mode uses
// batch statistics and updates the running estimates; eval mode applies the
// stored running statistics as a fixed affine map.
template <class T>
struct BatchNorm {
    i64 channels = 0;
    T eps = T(1e-5);
    T momentum = T(0.1);
    Tensor<T> gamma, beta;
    std::vector<T> running_mean, running_var;

    BatchNorm() = default;
    explicit BatchNorm(i64 c) : channels(c), gamma({c}, true), beta({c}, true) {
        std::fill(gamma.vec().begin(), gamma.vec().end(), T(1));
        running_mean.assign(static_cast<std::size_t>(c), T(0));
        running_var.assign(static_cast<std::size_t>(c), T(1));
    }

    void reset(std::mt19937_64&) {
        std::fill(gamma.vec().begin(), gamma.vec().end(), T(1));
        std::fill(beta.vec().begin(), beta.vec().end(), T(0));
        std::fill(running_mean.begin(), running_mean.end(), T(0));
        std::fill(running_var.begin(), running_var.end(), T(1));
    }

    Tensor<T> forward(const Tensor<T>& x, ChannelAxis axis, bool training) {
        const std::size_t ax = axis == ChannelAxis::dim1 ? 1 : x.rank() - 1;
        if (x.rank() < 2 || x.shape()[ax] != channels)
            throw ShapeError("batchnorm: expected " + std::to_string(channels) +
                             " channels on axis " + std::to_string(ax) + " of " +
                             shape_str(x.shape()));
        i64 outer = 1, inner = 1;
        for (std::size_t i = 0; i < ax; ++i) outer *= x.shape()[i];
        for (std::size_t i = ax + 1; i < x.rank(); ++i) inner *= x.shape()[i];
        const i64 c = channels, n_per = outer * inner;

        std::vector<T> mean(static_cast<std::size_t>(c)), var(static_cast<std::size_t>(c));
        if (training) {
            for (i64 ch = 0; ch < c; ++ch) {
                T m = 0;
                for (i64 o = 0; o < outer; ++o) {
                    const T* src = x.vec().data() + (o * c + ch) * inner;
                    for (i64 i = 0; i < inner; ++i) m += src[i];
                }
                m /= static_cast<T>(n_per);
                T v = 0;
                for (i64 o = 0; o < outer; ++o) {
                    const T* src = x.vec().data() + (o * c + ch) * inner;
                    for (i64 i = 0; i < inner; ++i) v += (src[i] - m) * (src[i] - m);
                }
                v /= static_cast<T>(n_per);
                mean[ch] = m;
                var[ch] = v;
                running_mean[ch] = (T(1) - momentum) * running_mean[ch] + momentum * m;
                running_var[ch] = (T(1) - momentum) * running_var[ch] + momentum * v;
            }
        } else {
            mean.assign(running_mean.begin(), running_mean.end());
            var.assign(running_var.begin(), running_var.end());
        }

        auto invstd = std::make_shared<std::vector<T>>(static_cast<std::size_t>(c));
        for (i64 ch = 0; ch < c; ++ch) (*invstd)[ch] = T(1) / std::sqrt(var[ch] + eps);
        auto xhat = std::make_shared<std::vector<T>>(x.vec().size());
        std::vector<T> out(x.vec().size());
        for (i64 o = 0; o < outer; ++o)
            for (i64 ch = 0; ch < c; ++ch) {
                const T* src = x.vec().data() + (o * c + ch) * inner;
                T* xh = xhat->data() + (o * c + ch) * inner;
                T* dst = out.data() + (o * c + ch) * inner;
                const T g = gamma.vec()[ch], b = beta.vec()[ch];
                for (i64 i = 0; i < inner; ++i) {
                    xh[i] = (src[i] - mean[ch]) * (*invstd)[ch];
                    dst[i] = g * xh[i] + b;
                }
            }

        auto xi = x.impl();
        auto gi = gamma.impl();
        auto bi = beta.impl();
        auto bw = [xi, gi, bi, xhat, invstd, outer, c, inner, n_per,
                   training](const std::vector<T>& g) {
            if (gi->requires_grad) gi->ensure_grad();
            if (bi->requires_grad) bi->ensure_grad();
            for (i64 ch = 0; ch < c; ++ch) {
                T sum_g = 0, sum_gx = 0;
                for (i64 o = 0; o < outer; ++o) {
                    const T* gs = g.data() + (o * c + ch) * inner;
                    const T* xh = xhat->data() + (o * c + ch) * inner;
                    for (i64 i = 0; i < inner; ++i) {
                        sum_g += gs[i];
                        sum_gx += gs[i] * xh[i];
                    }
                }
                if (gi->requires_grad) gi->grad[ch] += sum_gx;
                if (bi->requires_grad) bi->grad[ch] += sum_g;
                if (!xi->requires_grad) continue;
                xi->ensure_grad();
                const T gm = gi->data[ch] * (*invstd)[ch];
                for (i64 o = 0; o < outer; ++o) {
                    const T* gs = g.data() + (o * c + ch) * inner;
                    const T* xh = xhat->data() + (o * c + ch) * inner;
                    T* gx = xi->grad.data() + (o * c + ch) * inner;
                    for (i64 i = 0; i < inner; ++i) {
                        if (training)
                            gx[i] += gm * (gs[i] - sum_g / static_cast<T>(n_per) -
                                           xh[i] * sum_gx / static_cast<T>(n_per));
                        else
                            gx[i] += gm * gs[i];
                    }
                }
            }
        };
        return make_result<T>(x.shape(), std::move(out), "batchnorm", {x, gamma, beta},
                              std::move(bw));
    }

    i64 param_count() const { return 2 * channels; }
    void collect(std::vector<std::pair<std::string, Tensor<T>>>& params,
                 const std::string& path) {
        params.emplace_back(path + ".gamma", gamma);
        params.emplace_back(path + ".beta", beta);
    }
};

// Dense per-pixel C_in -> C_out map, realized as a kernel = stride = C_in 1D
// convolution over the channels-innermost flattened tensor.
template <class T>
struct ChannelWiseConv {
    i64 c_in = 0, c_out = 0;
    bool has_bias = true;
    Tensor<T> weight;  // [c_out, c_in]
    Tensor<T> bias;    // [c_out] when has_bias

    ChannelWiseConv() = default;
    ChannelWiseConv(i64 in, i64 out, bool with_bias = true)
        : c_in(in), c_out(out), has_bias(with_bias), weight({out, in}, true) {
        if (with_bias) bias = Tensor<T>({out}, true);
    }

    void reset(std::mt19937_64& rng) {
        kaiming_normal(weight, c_in, rng);
        if (has_bias) std::fill(bias.vec().begin(), bias.vec().end(), T(0));
    }

    // x: [B, P, c_in] -> [B, P, c_out]
    Tensor<T> forward(const Tensor<T>& x) const {
        if (x.rank() != 3 || x.dim(2) != c_in)
            throw ContractError("channelwise conv: expected [B,P," + std::to_string(c_in) +
                                "], got " + shape_str(x.shape()));
        const i64 batch = x.dim(0), pixels = x.dim(1);
        auto flat = reshape(x, {batch, i64(1), pixels * c_in});
        auto w3 = reshape(weight, {c_out, i64(1), c_in});
        auto y = has_bias ? conv1d(flat, w3, bias, c_in, 0) : conv1d(flat, w3, c_in, 0);
        return transpose_last2(y);  // [B, c_out, P] -> [B, P, c_out]
    }

    i64 param_count() const { return c_out * c_in + (has_bias ? c_out : 0); }
    void collect(std::vector<std::pair<std::string, Tensor<T>>>& params,
                 const std::string& path) {
        params.emplace_back(path + ".weight", weight);
        if (has_bias) params.emplace_back(path + ".bias", bias);
    }
};

// Single shared 1D kernel slid over the fully flattened (P*C) axis,
// same-padded. Weights see the whole sequence as one channel group.
template <class T>
struct SpatialConv {
    i64 kernel = 9;
    Tensor<T> weight;  // [1, 1, kernel]
    Tensor<T> bias;    // [1]

    SpatialConv() = default;
    explicit SpatialConv(i64 k) : kernel(k), weight({1, 1, k}, true), bias({1}, true) {
        if (k < 1 || k % 2 == 0) throw ConfigError("spatial kernel must be odd and positive");
    }

    void reset(std::mt19937_64& rng) {
        kaiming_normal(weight, kernel, rng);
        std::fill(bias.vec().begin(), bias.vec().end(), T(0));
    }

    Tensor<T> forward(const Tensor<T>& x) const {
        const i64 batch = x.dim(0);
        const i64 flat = x.numel() / batch;
        auto f = reshape(x, {batch, i64(1), flat});
        auto y = conv1d(f, weight, bias, i64(1), (kernel - 1) / 2);
        return reshape(y, x.shape());
    }

    i64 param_count() const { return kernel + 1; }
    void collect(std::vector<std::pair<std::string, Tensor<T>>>& params,
                 const std::string& path) {
        params.emplace_back(path + ".weight", weight);
        params.emplace_back(path + ".bias", bias);
    }
};

// Encoder block: pixel-unshuffle downscale (C -> s^2*C at 1/s resolution),
// optional spatial conv, then two channel-wise convs with BN + ReLU. The
// input stem consumes flattened images [B, C, H*W] (channel-major); blocks
// deeper in the network consume [B, H*W, C] activations.
template <class T>
struct EncoderBlock1D {
    i64 c_in = 0, c_out = 0, scale = 2;
    bool use_spatial = false;
    PlanLayout layout = PlanLayout::pixel_major;
    ChannelWiseConv<T> conv1, conv2;
    BatchNorm<T> bn1, bn2;
    SpatialConv<T> spatial;

    EncoderBlock1D() = default;
    EncoderBlock1D(i64 in, i64 out, i64 s, bool with_spatial, i64 spatial_kernel,
                   PlanLayout src_layout = PlanLayout::pixel_major)
        : c_in(in),
          c_out(out),
          scale(s),
          use_spatial(with_spatial),
          layout(src_layout),
          conv1(in * s * s, out, false),
          conv2(out, out, false),
          bn1(out),
          bn2(out) {
        if (with_spatial) spatial = SpatialConv<T>(spatial_kernel);
    }

    void reset(std::mt19937_64& rng) {
        if (use_spatial) spatial.reset(rng);
        conv1.reset(rng);
        bn1.reset(rng);
        conv2.reset(rng);
        bn2.reset(rng);
    }

    // x: [B, h*w, c_in] (pixel-major) or [B, c_in, h*w] (channel-major)
    // -> [B, (h/s)*(w/s), c_out]
    Tensor<T> forward(const Tensor<T>& x, i64 h, i64 w, bool training) {
        auto plan = layout == PlanLayout::pixel_major ? build_plan_pixel_major(c_in, h, w, scale)
                                                      : build_plan_1d(c_in, h, w, scale);
        auto y = apply_plan(x, plan);
        if (use_spatial) y = relu(spatial.forward(y));
        y = relu(bn1.forward(conv1.forward(y), ChannelAxis::innermost, training));
        y = relu(bn2.forward(conv2.forward(y), ChannelAxis::innermost, training));
        return y;
    }

    i64 param_count() const {
        return conv1.param_count() + conv2.param_count() + bn1.param_count() +
               bn2.param_count() + (use_spatial ? spatial.param_count() : 0);
    }
    void collect(std::vector<std::pair<std::string, Tensor<T>>>& params,
                 const std::string& path) {
        if (use_spatial) spatial.collect(params, path + ".spatial");
        conv1.collect(params, path + ".conv1");
        bn1.collect(params, path + ".bn1");
        conv2.collect(params, path + ".conv2");
        bn2.collect(params, path + ".bn2");
    }
    void collect_stats(std::vector<std::pair<std::string, std::vector<T>*>>& bufs,
                       const std::string& path) {
        bufs.emplace_back(path + ".bn1.running_mean", &bn1.running_mean);
        bufs.emplace_back(path + ".bn1.running_var", &bn1.running_var);
        bufs.emplace_back(path + ".bn2.running_mean", &bn2.running_mean);
        bufs.emplace_back(path + ".bn2.running_var", &bn2.running_var);
    }
};

// Decoder block (scale 2): sub-pixel upscale — channel-wise expand C -> 2C,
// pixel-shuffle to C/2 at 2x resolution — concat the skip back to C, then
// channel-wise C -> C and C -> c_out with BN + ReLU. An optional spatial
// conv sits between the two channel-wise layers. scale 1 degenerates to
// concat + convs only.
template <class T>
struct DecoderBlock1D {
    i64 c_in = 0, c_skip = 0, c_out = 0, scale = 2;
    bool use_spatial = false;
    ChannelWiseConv<T> expand;  // only when scale == 2
    ChannelWiseConv<T> conv1, conv2;
    BatchNorm<T> bn1, bn2;
    SpatialConv<T> spatial;

    DecoderBlock1D() = default;
    DecoderBlock1D(i64 in, i64 skip, i64 out, i64 s, bool with_spatial, i64 spatial_kernel)
        : c_in(in), c_skip(skip), c_out(out), scale(s), use_spatial(with_spatial) {
        if (s != 1 && s != 2) throw ConfigError("decoder block supports scale 1 or 2");
        if (s == 2 && in % 2 != 0)
            throw GeometryError("decoder block: input channels must be even at scale 2");
        const i64 merged = merged_channels();
        if (s == 2) expand = ChannelWiseConv<T>(in, 2 * in, true);
        conv1 = ChannelWiseConv<T>(merged, merged, false);
        conv2 = ChannelWiseConv<T>(merged, out, false);
        bn1 = BatchNorm<T>(merged);
        bn2 = BatchNorm<T>(out);
        if (with_spatial) spatial = SpatialConv<T>(spatial_kernel);
    }

    i64 upscaled_channels() const { return scale == 2 ? c_in / 2 : c_in; }
    i64 merged_channels() const { return upscaled_channels() + c_skip; }

    void reset(std::mt19937_64& rng) {
        if (scale == 2) expand.reset(rng);
        conv1.reset(rng);
        bn1.reset(rng);
        if (use_spatial) spatial.reset(rng);
        conv2.reset(rng);
        bn2.reset(rng);
    }

    // x: [B, h*w, c_in], skip: [B, (h*s)*(w*s), c_skip]
    Tensor<T> forward(const Tensor<T>& x, const Tensor<T>& skip, i64 h, i64 w, bool training) {
        Tensor<T> up = x;
        if (scale == 2) {
            up = expand.forward(x);  // [B, h*w, 2*c_in]
            auto plan = build_plan_pixel_major(c_in / 2, h * scale, w * scale, scale);
            up = apply_plan_inverse(up, plan);  // [B, (2h)*(2w), c_in/2]
        }
        if (skip.rank() != 3 || skip.dim(0) != x.dim(0) || skip.dim(1) != up.dim(1) ||
            skip.dim(2) != c_skip)
            throw ShapeError("decoder block: skip " + shape_str(skip.shape()) +
                             " does not match upscaled " + shape_str(up.shape()));
        auto y = concat(up, skip, 2);
        y = relu(bn1.forward(conv1.forward(y), ChannelAxis::innermost, training));
        if (use_spatial) y = relu(spatial.forward(y));
        y = relu(bn2.forward(conv2.forward(y), ChannelAxis::innermost, training));
        return y;
    }

    i64 param_count() const {
        return (scale == 2 ? expand.param_count() : 0) + conv1.param_count() +
               conv2.param_count() + bn1.param_count() + bn2.param_count() +
               (use_spatial ? spatial.param_count() : 0);
    }
    void collect(std::vector<std::pair<std::string, Tensor<T>>>& params,
                 const std::string& path) {
        if (scale == 2) expand.collect(params, path + ".expand");
        conv1.collect(params, path + ".conv1");
        bn1.collect(params, path + ".bn1");
        if (use_spatial) spatial.collect(params, path + ".spatial");
        conv2.collect(params, path + ".conv2");
        bn2.collect(params, path + ".bn2");
    }
    void collect_stats(std::vector<std::pair<std::string, std::vector<T>*>>& bufs,
                       const std::string& path) {
        bufs.emplace_back(path + ".bn1.running_mean", &bn1.running_mean);
        bufs.emplace_back(path + ".bn1.running_var", &bn1.running_var);
        bufs.emplace_back(path + ".bn2.running_mean", &bn2.running_mean);
        bufs.emplace_back(path + ".bn2.running_var", &bn2.running_var);
    }
};

// 2D building blocks for the baseline U-Net and the hybrid decoder.

template <class T>
struct Conv2dLayer {
    i64 c_in = 0, c_out = 0, kernel = 3, stride = 1, padding = 1;
    bool has_bias = false;
    Tensor<T> weight, bias;

    Conv2dLayer() = default;
    Conv2dLayer(i64 in, i64 out, i64 k, i64 pad, bool with_bias)
        : c_in(in),
          c_out(out),
          kernel(k),
          padding(pad),
          has_bias(with_bias),
          weight({out, in, k, k}, true) {
        if (with_bias) bias = Tensor<T>({out}, true);
    }
    void reset(std::mt19937_64& rng) {
        kaiming_normal(weight, c_in * kernel * kernel, rng);
        if (has_bias) std::fill(bias.vec().begin(), bias.vec().end(), T(0));
    }
    Tensor<T> forward(const Tensor<T>& x) const {
        return has_bias ? conv2d(x, weight, bias, stride, padding)
                        : conv2d(x, weight, stride, padding);
    }
    i64 param_count() const {
        return c_out * c_in * kernel * kernel + (has_bias ? c_out : 0);
    }
    void collect(std::vector<std::pair<std::string, Tensor<T>>>& params,
                 const std::string& path) {
        params.emplace_back(path + ".weight", weight);
        if (has_bias) params.emplace_back(path + ".bias", bias);
    }
};

// Two 3x3 convs, each followed by BN + ReLU.
template <class T>
struct DoubleConv2D {
    Conv2dLayer<T> conv1, conv2;
    BatchNorm<T> bn1, bn2;

    DoubleConv2D() = default;
    DoubleConv2D(i64 in, i64 out)
        : conv1(in, out, 3, 1, false), conv2(out, out, 3, 1, false), bn1(out), bn2(out) {}

    void reset(std::mt19937_64& rng) {
        conv1.reset(rng);
        bn1.reset(rng);
        conv2.reset(rng);
        bn2.reset(rng);
    }
    Tensor<T> forward(const Tensor<T>& x, bool training) {
        auto y = relu(bn1.forward(conv1.forward(x), ChannelAxis::dim1, training));
        return relu(bn2.forward(conv2.forward(y), ChannelAxis::dim1, training));
    }
    i64 param_count() const {
        return conv1.param_count() + conv2.param_count() + bn1.param_count() + bn2.param_count();
    }
    void collect(std::vector<std::pair<std::string, Tensor<T>>>& params,
                 const std::string& path) {
        conv1.collect(params, path + ".conv1");
        bn1.collect(params, path + ".bn1");
        conv2.collect(params, path + ".conv2");
        bn2.collect(params, path + ".bn2");
    }
    void collect_stats(std::vector<std::pair<std::string, std::vector<T>*>>& bufs,
                       const std::string& path) {
        bufs.emplace_back(path + ".bn1.running_mean", &bn1.running_mean);
        bufs.emplace_back(path + ".bn1.running_var", &bn1.running_var);
        bufs.emplace_back(path + ".bn2.running_mean", &bn2.running_mean);
        bufs.emplace_back(path + ".bn2.running_var", &bn2.running_var);
    }
};

// Baseline encoder stage: 2x2 max pool then DoubleConv (C -> 2C).
template <class T>
struct Down2D {
    DoubleConv2D<T> convs;

    Down2D() = default;
    Down2D(i64 in, i64 out) : convs(in, out) {}
    void reset(std::mt19937_64& rng) { convs.reset(rng); }
    Tensor<T> forward(const Tensor<T>& x, bool training) {
        return convs.forward(maxpool2d(x, 2), training);
    }
    i64 param_count() const { return convs.param_count(); }
    void collect(std::vector<std::pair<std::string, Tensor<T>>>& params,
                 const std::string& path) {
        convs.collect(params, path);
    }
    void collect_stats(std::vector<std::pair<std::string, std::vector<T>*>>& bufs,
                       const std::string& path) {
        convs.collect_stats(bufs, path);
    }
};

// Decoder stage: 2x2 stride-2 transposed conv halving channels, concat with
// the mirrored skip, then DoubleConv back down.
template <class T>
struct Up2D {
    i64 c_in = 0;
    Tensor<T> up_weight, up_bias;  // transposed conv [c_in, c_in/2, 2, 2]
    DoubleConv2D<T> convs;

    Up2D() = default;
    Up2D(i64 in, i64 out)
        : c_in(in),
          up_weight({in, in / 2, 2, 2}, true),
          up_bias({in / 2}, true),
          convs(in, out) {}

    void reset(std::mt19937_64& rng) {
        kaiming_normal(up_weight, c_in * 4, rng);
        std::fill(up_bias.vec().begin(), up_bias.vec().end(), T(0));
        convs.reset(rng);
    }
    Tensor<T> forward(const Tensor<T>& x, const Tensor<T>& skip, bool training) {
        auto up = conv_transpose2d(x, up_weight, up_bias, 2);
        if (skip.dim(2) != up.dim(2) || skip.dim(3) != up.dim(3))
            throw ShapeError("up block: skip " + shape_str(skip.shape()) +
                             " does not match upsampled " + shape_str(up.shape()));
        return convs.forward(concat(up, skip, 1), training);
    }
    i64 param_count() const {
        return c_in * (c_in / 2) * 4 + c_in / 2 + convs.param_count();
    }
    void collect(std::vector<std::pair<std::string, Tensor<T>>>& params,
                 const std::string& path) {
        params.emplace_back(path + ".up.weight", up_weight);
        params.emplace_back(path + ".up.bias", up_bias);
        convs.collect(params, path);
    }
    void collect_stats(std::vector<std::pair<std::string, std::vector<T>*>>& bufs,
                       const std::string& path) {
        convs.collect_stats(bufs, path);
    }
};

}  // namespace onenet
