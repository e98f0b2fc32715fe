#pragma once

#include "onenet/tensor.hpp"

namespace onenet {

// Pixel-unshuffle/-shuffle as pure index permutations. Sub-pixel ordering is
// row-major within each s x s block: output channel c*s^2 + dy*s + dx holds
// input pixel (s*y + dy, s*x + dx) of source channel c.

inline void check_divisible(i64 h, i64 w, i64 s) {
    if (s < 1) throw GeometryError("scale must be >= 1");
    if (h % s != 0 || w % s != 0)
        throw GeometryError("extents " + std::to_string(h) + "x" + std::to_string(w) +
                            " not divisible by scale " + std::to_string(s));
}

// [B, C, H, W] -> [B, C*s^2, H/s, W/s]. Reference 2D path; direct loops,
// independent of the 1D plan machinery it serves as oracle for.
template <class T>
Tensor<T> pixel_unshuffle_2d(const Tensor<T>& input, i64 s) {
    if (input.rank() != 4) throw ShapeError("pixel_unshuffle_2d expects [B,C,H,W]");
    const i64 batch = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);
    check_divisible(h, w, s);
    const i64 ho = h / s, wo = w / s, co = c * s * s;
    std::vector<T> out(input.vec().size());
    for (i64 b = 0; b < batch; ++b)
        for (i64 ch = 0; ch < c; ++ch)
            for (i64 dy = 0; dy < s; ++dy)
                for (i64 dx = 0; dx < s; ++dx) {
                    const i64 q = ch * s * s + dy * s + dx;
                    const T* src = input.vec().data() + ((b * c + ch) * h) * w;
                    T* dst = out.data() + ((b * co + q) * ho) * wo;
                    for (i64 y = 0; y < ho; ++y)
                        for (i64 x = 0; x < wo; ++x)
                            dst[y * wo + x] = src[(s * y + dy) * w + (s * x + dx)];
                }
    auto xi = input.impl();
    return make_result<T>({batch, co, ho, wo}, std::move(out), "pixel_unshuffle_2d", {input},
                          [xi, batch, c, h, w, s, ho, wo, co](const std::vector<T>& g) {
                              if (!xi->requires_grad) return;
                              xi->ensure_grad();
                              for (i64 b = 0; b < batch; ++b)
                                  for (i64 ch = 0; ch < c; ++ch)
                                      for (i64 dy = 0; dy < s; ++dy)
                                          for (i64 dx = 0; dx < s; ++dx) {
                                              const i64 q = ch * s * s + dy * s + dx;
                                              const T* gs = g.data() + ((b * co + q) * ho) * wo;
                                              T* gd = xi->grad.data() + ((b * c + ch) * h) * w;
                                              for (i64 y = 0; y < ho; ++y)
                                                  for (i64 x = 0; x < wo; ++x)
                                                      gd[(s * y + dy) * w + (s * x + dx)] +=
                                                          gs[y * wo + x];
                                          }
                          });
}

// [B, C*s^2, H, W] -> [B, C, H*s, W*s]; exact inverse of pixel_unshuffle_2d.
template <class T>
Tensor<T> pixel_shuffle_2d(const Tensor<T>& input, i64 s) {
    if (input.rank() != 4) throw ShapeError("pixel_shuffle_2d expects [B,C,H,W]");
    const i64 batch = input.dim(0), cq = input.dim(1), h = input.dim(2), w = input.dim(3);
    if (s < 1 || cq % (s * s) != 0)
        throw GeometryError("pixel_shuffle_2d: channel count " + std::to_string(cq) +
                            " not divisible by s^2 = " + std::to_string(s * s));
    const i64 c = cq / (s * s), ho = h * s, wo = w * s;
    std::vector<T> out(input.vec().size());
    for (i64 b = 0; b < batch; ++b)
        for (i64 ch = 0; ch < c; ++ch)
            for (i64 dy = 0; dy < s; ++dy)
                for (i64 dx = 0; dx < s; ++dx) {
                    const i64 q = ch * s * s + dy * s + dx;
                    const T* src = input.vec().data() + ((b * cq + q) * h) * w;
                    T* dst = out.data() + ((b * c + ch) * ho) * wo;
                    for (i64 y = 0; y < h; ++y)
                        for (i64 x = 0; x < w; ++x)
                            dst[(s * y + dy) * wo + (s * x + dx)] = src[y * w + x];
                }
    auto xi = input.impl();
    return make_result<T>({batch, c, ho, wo}, std::move(out), "pixel_shuffle_2d", {input},
                          [xi, batch, c, cq, h, w, s, ho, wo](const std::vector<T>& g) {
                              if (!xi->requires_grad) return;
                              xi->ensure_grad();
                              for (i64 b = 0; b < batch; ++b)
                                  for (i64 ch = 0; ch < c; ++ch)
                                      for (i64 dy = 0; dy < s; ++dy)
                                          for (i64 dx = 0; dx < s; ++dx) {
                                              const i64 q = ch * s * s + dy * s + dx;
                                              T* gd = xi->grad.data() + ((b * cq + q) * h) * w;
                                              const T* gs = g.data() + ((b * c + ch) * ho) * wo;
                                              for (i64 y = 0; y < h; ++y)
                                                  for (i64 x = 0; x < w; ++x)
                                                      gd[y * w + x] +=
                                                          gs[(s * y + dy) * wo + (s * x + dx)];
                                          }
                          });
}

// Which flattened source layout a plan's gather indices address.
enum class PlanLayout {
    channel_major,  // source [C, H*W]: image tensors flattened as-is
    pixel_major,    // source [H*W, C]: channels-innermost activations
};

struct ShufflePlan {
    i64 channels = 0;
    i64 height = 0;
    i64 width = 0;
    i64 scale = 1;
    PlanLayout layout = PlanLayout::channel_major;
    // Gather form: unshuffled_flat[i] = source_flat[index_map[i]].
    std::vector<i64> index_map;
    std::vector<i64> inverse_map;

    i64 out_pixels() const { return (height / scale) * (width / scale); }
    i64 out_channels() const { return channels * scale * scale; }
};

inline ShufflePlan finish_plan(ShufflePlan plan) {
    plan.inverse_map.assign(plan.index_map.size(), 0);
    for (std::size_t i = 0; i < plan.index_map.size(); ++i)
        plan.inverse_map[static_cast<std::size_t>(plan.index_map[i])] = static_cast<i64>(i);
    return plan;
}

// Plan for a [B, C, H*W] (channel-major) source: the flattened-image form.
// Target layout is [B, P, C*s^2] with P = (H/s)*(W/s), channels innermost.
inline ShufflePlan build_plan_1d(i64 c, i64 h, i64 w, i64 s) {
    if (c < 1) throw GeometryError("build_plan_1d: channels must be >= 1");
    check_divisible(h, w, s);
    ShufflePlan plan{c, h, w, s, PlanLayout::channel_major, {}, {}};
    plan.index_map.resize(static_cast<std::size_t>(c * h * w));
    i64 t = 0;
    for (i64 by = 0; by < h / s; ++by)
        for (i64 bx = 0; bx < w / s; ++bx)
            for (i64 ch = 0; ch < c; ++ch)
                for (i64 dy = 0; dy < s; ++dy)
                    for (i64 dx = 0; dx < s; ++dx)
                        plan.index_map[t++] = ch * h * w + (s * by + dy) * w + (s * bx + dx);
    return finish_plan(std::move(plan));
}

// Plan for a [B, H*W, C] (pixel-major) source: mid-network activations that
// already carry channels innermost.
inline ShufflePlan build_plan_pixel_major(i64 c, i64 h, i64 w, i64 s) {
    if (c < 1) throw GeometryError("build_plan_pixel_major: channels must be >= 1");
    check_divisible(h, w, s);
    ShufflePlan plan{c, h, w, s, PlanLayout::pixel_major, {}, {}};
    plan.index_map.resize(static_cast<std::size_t>(c * h * w));
    i64 t = 0;
    for (i64 by = 0; by < h / s; ++by)
        for (i64 bx = 0; bx < w / s; ++bx)
            for (i64 ch = 0; ch < c; ++ch)
                for (i64 dy = 0; dy < s; ++dy)
                    for (i64 dx = 0; dx < s; ++dx)
                        plan.index_map[t++] = ((s * by + dy) * w + (s * bx + dx)) * c + ch;
    return finish_plan(std::move(plan));
}

// Unshuffle direction: source-layout tensor -> [B, P, C*s^2].
template <class T>
Tensor<T> apply_plan(const Tensor<T>& input, const ShufflePlan& plan) {
    const i64 per = static_cast<i64>(plan.index_map.size());
    if (input.rank() < 2 || input.numel() % per != 0 ||
        input.numel() / input.dim(0) != per)
        throw GeometryError("apply_plan: input " + shape_str(input.shape()) +
                            " does not match plan extent " + std::to_string(per));
    return gather_per_batch(input, plan.index_map,
                            {input.dim(0), plan.out_pixels(), plan.out_channels()});
}

// Shuffle direction: [B, P, C*s^2] -> source-layout tensor.
template <class T>
Tensor<T> apply_plan_inverse(const Tensor<T>& input, const ShufflePlan& plan) {
    const i64 per = static_cast<i64>(plan.index_map.size());
    if (input.rank() < 2 || input.numel() / input.dim(0) != per)
        throw GeometryError("apply_plan_inverse: input " + shape_str(input.shape()) +
                            " does not match plan extent " + std::to_string(per));
    std::vector<i64> out_shape =
        plan.layout == PlanLayout::channel_major
            ? std::vector<i64>{input.dim(0), plan.channels, plan.height * plan.width}
            : std::vector<i64>{input.dim(0), plan.height * plan.width, plan.channels};
    return gather_per_batch(input, plan.inverse_map, std::move(out_shape));
}

}  // namespace onenet
