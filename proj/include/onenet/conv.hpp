#pragma once

#include "onenet/tensor.hpp"

namespace onenet {

// Convolutions are cross-correlations (no kernel flip). All kernels are
// direct loops; deterministic for fixed input.

inline i64 conv_out_extent(i64 in, i64 k, i64 stride, i64 padding) {
    return (in + 2 * padding - k) / stride + 1;
}

// input [B, C_in, L], weight [C_out, C_in, k], bias [C_out] (optional).
template <class T>
Tensor<T> conv1d(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias,
                 i64 stride, i64 padding) {
    if (input.rank() != 3 || weight.rank() != 3)
        throw ShapeError("conv1d expects input [B,C,L] and weight [O,C,k]");
    if (stride < 1 || padding < 0) throw ContractError("conv1d: stride >= 1 and padding >= 0");
    const i64 batch = input.dim(0), c_in = input.dim(1), len = input.dim(2);
    const i64 c_out = weight.dim(0), k = weight.dim(2);
    if (weight.dim(1) != c_in)
        throw ShapeError("conv1d: weight C_in " + std::to_string(weight.dim(1)) +
                         " vs input C_in " + std::to_string(c_in));
    if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != c_out))
        throw ShapeError("conv1d: bias must be [C_out]");
    if (len + 2 * padding < k) throw GeometryError("conv1d: kernel exceeds padded length");
    const i64 l_out = conv_out_extent(len, k, stride, padding);
    if (l_out < 1) throw GeometryError("conv1d: empty output");

    std::vector<T> out(static_cast<std::size_t>(batch * c_out * l_out), T(0));
    for (i64 b = 0; b < batch; ++b)
        for (i64 o = 0; o < c_out; ++o) {
            T* dst = out.data() + (b * c_out + o) * l_out;
            for (i64 t = 0; t < l_out; ++t) {
                T acc = bias.defined() ? bias.vec()[o] : T(0);
                const i64 start = t * stride - padding;
                for (i64 c = 0; c < c_in; ++c) {
                    const T* src = input.vec().data() + (b * c_in + c) * len;
                    const T* w = weight.vec().data() + (o * c_in + c) * k;
                    const i64 j0 = std::max<i64>(0, -start);
                    const i64 j1 = std::min<i64>(k, len - start);
                    for (i64 j = j0; j < j1; ++j) acc += w[j] * src[start + j];
                }
                dst[t] = acc;
            }
        }

    auto xi = input.impl();
    auto wi = weight.impl();
    auto bi = bias.defined() ? bias.impl() : nullptr;
    auto bw = [xi, wi, bi, batch, c_in, len, c_out, k, l_out, stride,
               padding](const std::vector<T>& g) {
        if (xi->requires_grad) xi->ensure_grad();
        if (wi->requires_grad) wi->ensure_grad();
        if (bi && bi->requires_grad) bi->ensure_grad();
        for (i64 b = 0; b < batch; ++b)
            for (i64 o = 0; o < c_out; ++o) {
                const T* go = g.data() + (b * c_out + o) * l_out;
                for (i64 t = 0; t < l_out; ++t) {
                    const T gv = go[t];
                    if (gv == T(0)) continue;
                    if (bi && bi->requires_grad) bi->grad[o] += gv;
                    const i64 start = t * stride - padding;
                    for (i64 c = 0; c < c_in; ++c) {
                        const i64 j0 = std::max<i64>(0, -start);
                        const i64 j1 = std::min<i64>(k, len - start);
                        const T* src = xi->data.data() + (b * c_in + c) * len;
                        const T* w = wi->data.data() + (o * c_in + c) * k;
                        if (xi->requires_grad) {
                            T* gx = xi->grad.data() + (b * c_in + c) * len;
                            for (i64 j = j0; j < j1; ++j) gx[start + j] += gv * w[j];
                        }
                        if (wi->requires_grad) {
                            T* gw = wi->grad.data() + (o * c_in + c) * k;
                            for (i64 j = j0; j < j1; ++j) gw[j] += gv * src[start + j];
                        }
                    }
                }
            }
    };
    if (bias.defined())
        return make_result<T>({batch, c_out, l_out}, std::move(out), "conv1d",
                              {input, weight, bias}, std::move(bw));
    return make_result<T>({batch, c_out, l_out}, std::move(out), "conv1d", {input, weight},
                          std::move(bw));
}

template <class T>
Tensor<T> conv1d(const Tensor<T>& input, const Tensor<T>& weight, i64 stride, i64 padding) {
    return conv1d(input, weight, Tensor<T>{}, stride, padding);
}

// input [B, C_in, H, W], weight [C_out, C_in, k, k].
template <class T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias,
                 i64 stride, i64 padding) {
    if (input.rank() != 4 || weight.rank() != 4)
        throw ShapeError("conv2d expects input [B,C,H,W] and weight [O,C,k,k]");
    if (stride < 1 || padding < 0) throw ContractError("conv2d: stride >= 1 and padding >= 0");
    const i64 batch = input.dim(0), c_in = input.dim(1), h = input.dim(2), w = input.dim(3);
    const i64 c_out = weight.dim(0), kh = weight.dim(2), kw = weight.dim(3);
    if (weight.dim(1) != c_in)
        throw ShapeError("conv2d: weight C_in " + std::to_string(weight.dim(1)) +
                         " vs input C_in " + std::to_string(c_in));
    if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != c_out))
        throw ShapeError("conv2d: bias must be [C_out]");
    const i64 h_out = conv_out_extent(h, kh, stride, padding);
    const i64 w_out = conv_out_extent(w, kw, stride, padding);
    if (h_out < 1 || w_out < 1) throw GeometryError("conv2d: empty output");

    std::vector<T> out(static_cast<std::size_t>(batch * c_out * h_out * w_out), T(0));
    for (i64 b = 0; b < batch; ++b)
        for (i64 o = 0; o < c_out; ++o)
            for (i64 y = 0; y < h_out; ++y)
                for (i64 x = 0; x < w_out; ++x) {
                    T acc = bias.defined() ? bias.vec()[o] : T(0);
                    const i64 y0 = y * stride - padding, x0 = x * stride - padding;
                    for (i64 c = 0; c < c_in; ++c) {
                        const T* src = input.vec().data() + ((b * c_in + c) * h) * w;
                        const T* wp = weight.vec().data() + ((o * c_in + c) * kh) * kw;
                        for (i64 dy = std::max<i64>(0, -y0); dy < std::min(kh, h - y0); ++dy)
                            for (i64 dx = std::max<i64>(0, -x0); dx < std::min(kw, w - x0); ++dx)
                                acc += wp[dy * kw + dx] * src[(y0 + dy) * w + (x0 + dx)];
                    }
                    out[((b * c_out + o) * h_out + y) * w_out + x] = acc;
                }

    auto xi = input.impl();
    auto wi = weight.impl();
    auto bi = bias.defined() ? bias.impl() : nullptr;
    auto bw = [xi, wi, bi, batch, c_in, h, w, c_out, kh, kw, h_out, w_out, stride,
               padding](const std::vector<T>& g) {
        if (xi->requires_grad) xi->ensure_grad();
        if (wi->requires_grad) wi->ensure_grad();
        if (bi && bi->requires_grad) bi->ensure_grad();
        for (i64 b = 0; b < batch; ++b)
            for (i64 o = 0; o < c_out; ++o)
                for (i64 y = 0; y < h_out; ++y)
                    for (i64 x = 0; x < w_out; ++x) {
                        const T gv = g[((b * c_out + o) * h_out + y) * w_out + x];
                        if (gv == T(0)) continue;
                        if (bi && bi->requires_grad) bi->grad[o] += gv;
                        const i64 y0 = y * stride - padding, x0 = x * stride - padding;
                        for (i64 c = 0; c < c_in; ++c) {
                            const T* src = xi->data.data() + ((b * c_in + c) * h) * w;
                            const T* wp = wi->data.data() + ((o * c_in + c) * kh) * kw;
                            T* gx = xi->requires_grad
                                        ? xi->grad.data() + ((b * c_in + c) * h) * w
                                        : nullptr;
                            T* gw = wi->requires_grad
                                        ? wi->grad.data() + ((o * c_in + c) * kh) * kw
                                        : nullptr;
                            for (i64 dy = std::max<i64>(0, -y0); dy < std::min(kh, h - y0); ++dy)
                                for (i64 dx = std::max<i64>(0, -x0); dx < std::min(kw, w - x0);
                                     ++dx) {
                                    if (gx) gx[(y0 + dy) * w + (x0 + dx)] += gv * wp[dy * kw + dx];
                                    if (gw) gw[dy * kw + dx] += gv * src[(y0 + dy) * w + (x0 + dx)];
                                }
                        }
                    }
    };
    if (bias.defined())
        return make_result<T>({batch, c_out, h_out, w_out}, std::move(out), "conv2d",
                              {input, weight, bias}, std::move(bw));
    return make_result<T>({batch, c_out, h_out, w_out}, std::move(out), "conv2d",
                          {input, weight}, std::move(bw));
}

template <class T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& weight, i64 stride, i64 padding) {
    return conv2d(input, weight, Tensor<T>{}, stride, padding);
}

// input [B, C_in, H, W], weight [C_in, C_out, k, k]; output extents
// (H-1)*stride + k. Each input pixel scatters into a k x k output patch.
template <class T>
Tensor<T> conv_transpose2d(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias,
                           i64 stride) {
    if (input.rank() != 4 || weight.rank() != 4)
        throw ShapeError("conv_transpose2d expects input [B,C,H,W] and weight [C,O,k,k]");
    if (stride < 1) throw ContractError("conv_transpose2d: stride >= 1");
    const i64 batch = input.dim(0), c_in = input.dim(1), h = input.dim(2), w = input.dim(3);
    const i64 c_out = weight.dim(1), kh = weight.dim(2), kw = weight.dim(3);
    if (weight.dim(0) != c_in)
        throw ShapeError("conv_transpose2d: weight C_in mismatch");
    const i64 h_out = (h - 1) * stride + kh, w_out = (w - 1) * stride + kw;

    std::vector<T> out(static_cast<std::size_t>(batch * c_out * h_out * w_out), T(0));
    if (bias.defined()) {
        if (bias.rank() != 1 || bias.dim(0) != c_out)
            throw ShapeError("conv_transpose2d: bias must be [C_out]");
        for (i64 b = 0; b < batch; ++b)
            for (i64 o = 0; o < c_out; ++o)
                std::fill_n(out.begin() + ((b * c_out + o) * h_out) * w_out, h_out * w_out,
                            bias.vec()[o]);
    }
    for (i64 b = 0; b < batch; ++b)
        for (i64 c = 0; c < c_in; ++c) {
            const T* src = input.vec().data() + ((b * c_in + c) * h) * w;
            for (i64 o = 0; o < c_out; ++o) {
                const T* wp = weight.vec().data() + ((c * c_out + o) * kh) * kw;
                T* dst = out.data() + ((b * c_out + o) * h_out) * w_out;
                for (i64 y = 0; y < h; ++y)
                    for (i64 x = 0; x < w; ++x) {
                        const T v = src[y * w + x];
                        if (v == T(0)) continue;
                        for (i64 dy = 0; dy < kh; ++dy)
                            for (i64 dx = 0; dx < kw; ++dx)
                                dst[(y * stride + dy) * w_out + (x * stride + dx)] +=
                                    v * wp[dy * kw + dx];
                    }
            }
        }

    auto xi = input.impl();
    auto wi = weight.impl();
    auto bi = bias.defined() ? bias.impl() : nullptr;
    auto bw = [xi, wi, bi, batch, c_in, h, w, c_out, kh, kw, h_out, w_out,
               stride](const std::vector<T>& g) {
        if (xi->requires_grad) xi->ensure_grad();
        if (wi->requires_grad) wi->ensure_grad();
        if (bi && bi->requires_grad) {
            bi->ensure_grad();
            for (i64 b = 0; b < batch; ++b)
                for (i64 o = 0; o < c_out; ++o) {
                    const T* go = g.data() + ((b * c_out + o) * h_out) * w_out;
                    T acc = 0;
                    for (i64 i = 0; i < h_out * w_out; ++i) acc += go[i];
                    bi->grad[o] += acc;
                }
        }
        for (i64 b = 0; b < batch; ++b)
            for (i64 c = 0; c < c_in; ++c) {
                const T* src = xi->data.data() + ((b * c_in + c) * h) * w;
                T* gx = xi->requires_grad ? xi->grad.data() + ((b * c_in + c) * h) * w : nullptr;
                for (i64 o = 0; o < c_out; ++o) {
                    const T* go = g.data() + ((b * c_out + o) * h_out) * w_out;
                    const T* wp = wi->data.data() + ((c * c_out + o) * kh) * kw;
                    T* gw = wi->requires_grad ? wi->grad.data() + ((c * c_out + o) * kh) * kw
                                              : nullptr;
                    for (i64 y = 0; y < h; ++y)
                        for (i64 x = 0; x < w; ++x) {
                            T acc = 0;
                            for (i64 dy = 0; dy < kh; ++dy)
                                for (i64 dx = 0; dx < kw; ++dx) {
                                    const T gv =
                                        go[(y * stride + dy) * w_out + (x * stride + dx)];
                                    acc += gv * wp[dy * kw + dx];
                                    if (gw) gw[dy * kw + dx] += gv * src[y * w + x];
                                }
                            if (gx) gx[y * w + x] += acc;
                        }
                }
            }
    };
    if (bias.defined())
        return make_result<T>({batch, c_out, h_out, w_out}, std::move(out), "conv_transpose2d",
                              {input, weight, bias}, std::move(bw));
    return make_result<T>({batch, c_out, h_out, w_out}, std::move(out), "conv_transpose2d",
                          {input, weight}, std::move(bw));
}

// k x k window max pool, stride = k. Ties resolve to the first element in
// raster order, so gradients stay deterministic.
template <class T>
Tensor<T> maxpool2d(const Tensor<T>& input, i64 k) {
    if (input.rank() != 4) throw ShapeError("maxpool2d expects [B,C,H,W]");
    const i64 batch = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);
    if (h % k != 0 || w % k != 0)
        throw GeometryError("maxpool2d: extents " + std::to_string(h) + "x" + std::to_string(w) +
                            " not divisible by " + std::to_string(k));
    const i64 h_out = h / k, w_out = w / k;
    std::vector<T> out(static_cast<std::size_t>(batch * c * h_out * w_out));
    auto argmax = std::make_shared<std::vector<i64>>(out.size());
    for (i64 b = 0; b < batch; ++b)
        for (i64 ch = 0; ch < c; ++ch) {
            const T* src = input.vec().data() + ((b * c + ch) * h) * w;
            for (i64 y = 0; y < h_out; ++y)
                for (i64 x = 0; x < w_out; ++x) {
                    i64 best = (y * k) * w + (x * k);
                    T bv = src[best];
                    for (i64 dy = 0; dy < k; ++dy)
                        for (i64 dx = 0; dx < k; ++dx) {
                            const i64 idx = (y * k + dy) * w + (x * k + dx);
                            if (src[idx] > bv) {
                                bv = src[idx];
                                best = idx;
                            }
                        }
                    const i64 oidx = ((b * c + ch) * h_out + y) * w_out + x;
                    out[oidx] = bv;
                    (*argmax)[oidx] = ((b * c + ch) * h) * w + best;
                }
        }
    auto xi = input.impl();
    return make_result<T>({batch, c, h_out, w_out}, std::move(out), "maxpool2d", {input},
                          [xi, argmax](const std::vector<T>& g) {
                              if (!xi->requires_grad) return;
                              xi->ensure_grad();
                              for (std::size_t i = 0; i < g.size(); ++i)
                                  xi->grad[(*argmax)[i]] += g[i];
                          });
}

}  // namespace onenet
