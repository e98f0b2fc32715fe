#pragma once

#include "onenet/blocks.hpp"
#include "onenet/config.hpp"

namespace onenet {

// [B, P, C] at (h, w) -> [B, C, h, w]
template <class T>
Tensor<T> flat_to_image(const Tensor<T>& x, i64 h, i64 w) {
    return reshape(transpose_last2(x), {x.dim(0), x.dim(2), h, w});
}

// [B, C, h, w] -> [B, h*w, C]
template <class T>
Tensor<T> image_to_flat(const Tensor<T>& x) {
    return transpose_last2(reshape(x, {x.dim(0), x.dim(1), x.dim(2) * x.dim(3)}));
}

// The three network families. OneNet encoders downscale immediately on input
// (stem unshuffle) and then run `layers` doubling blocks; decoders mirror
// with one up stage per block, so logits land at half the input resolution.
// The baseline keeps its stem at full resolution and drops the last up stage
// to hit the same half-resolution output.
template <class T>
struct Network {
    ModelConfig cfg;

    // 1D encoder (onenet_e, onenet_ed)
    EncoderBlock1D<T> stem1d;
    std::vector<EncoderBlock1D<T>> enc1d;
    // 2D encoder (unet_baseline)
    DoubleConv2D<T> stem2d;
    std::vector<Down2D<T>> enc2d;
    // decoders
    std::vector<DecoderBlock1D<T>> dec1d;
    std::vector<Up2D<T>> dec2d;
    ChannelWiseConv<T> head1d;
    Conv2dLayer<T> head2d;

    bool has_1d_encoder() const { return cfg.variant != Variant::unet_baseline; }
    bool has_1d_decoder() const { return cfg.variant == Variant::onenet_ed; }

    explicit Network(const ModelConfig& config) : cfg(config) {
        cfg.validate();
        const i64 base = cfg.base_channels;
        const i64 layers = cfg.layers;
        if (has_1d_encoder()) {
            stem1d = EncoderBlock1D<T>(cfg.input_channels, base, cfg.scale, cfg.use_spatial,
                                       cfg.spatial_kernel, PlanLayout::channel_major);
            i64 c = base;
            for (i64 i = 0; i < layers; ++i) {
                enc1d.emplace_back(c, 2 * c, cfg.scale, cfg.use_spatial, cfg.spatial_kernel);
                c *= 2;
            }
            if (has_1d_decoder()) {
                for (i64 j = 0; j < layers; ++j) {
                    dec1d.emplace_back(c, c / 2, c / 2, i64(2), cfg.use_spatial,
                                       cfg.spatial_kernel);
                    c /= 2;
                }
                head1d = ChannelWiseConv<T>(base, cfg.num_classes, true);
            } else {
                for (i64 j = 0; j < layers; ++j) {
                    dec2d.emplace_back(c, c / 2);
                    c /= 2;
                }
                head2d = Conv2dLayer<T>(base, cfg.num_classes, 1, 0, true);
            }
        } else {
            stem2d = DoubleConv2D<T>(cfg.input_channels, base);
            i64 c = base;
            for (i64 i = 0; i < layers; ++i) {
                enc2d.emplace_back(c, 2 * c);
                c *= 2;
            }
            for (i64 j = 0; j + 1 < layers; ++j) {
                dec2d.emplace_back(c, c / 2);
                c /= 2;
            }
            head2d = Conv2dLayer<T>(c, cfg.num_classes, 1, 0, true);
        }
    }

    void init_weights(u64 seed) {
        std::mt19937_64 rng(seed);
        if (has_1d_encoder()) {
            stem1d.reset(rng);
            for (auto& b : enc1d) b.reset(rng);
        } else {
            stem2d.reset(rng);
            for (auto& b : enc2d) b.reset(rng);
        }
        for (auto& b : dec1d) b.reset(rng);
        for (auto& b : dec2d) b.reset(rng);
        if (has_1d_decoder())
            head1d.reset(rng);
        else
            head2d.reset(rng);
    }

    void check_input(const Tensor<T>& x) const {
        if (x.rank() != 4 || x.dim(1) != cfg.input_channels)
            throw ShapeError("forward expects [B," + std::to_string(cfg.input_channels) +
                             ",H,W], got " + shape_str(x.shape()));
        const i64 div = cfg.required_divisor();
        if (x.dim(2) % div != 0 || x.dim(3) % div != 0 || x.dim(2) < div || x.dim(3) < div)
            throw GeometryError("input extents " + std::to_string(x.dim(2)) + "x" +
                                std::to_string(x.dim(3)) + " must be positive multiples of " +
                                std::to_string(div));
    }

    // Stage outputs of the 1D encoder: index 0 is the stem, i >= 1 the i-th
    // block. Used for receptive-field probes; `n_stages` >= 1.
    Tensor<T> forward_encoder_stages(const Tensor<T>& x, i64 n_stages, bool training) {
        check_input(x);
        if (!has_1d_encoder()) throw ContractError("encoder stages require a 1D encoder");
        if (n_stages < 1 || n_stages > cfg.layers + 1)
            throw ContractError("n_stages out of range");
        i64 h = x.dim(2), w = x.dim(3);
        auto cur = stem1d.forward(reshape(x, {x.dim(0), x.dim(1), h * w}), h, w, training);
        h /= 2;
        w /= 2;
        for (i64 i = 0; i + 1 < n_stages; ++i) {
            cur = enc1d[static_cast<std::size_t>(i)].forward(cur, h, w, training);
            h /= 2;
            w /= 2;
        }
        return cur;
    }

    // [B, C_in, H, W] -> logits [B, K, H/2, W/2]
    Tensor<T> forward(const Tensor<T>& x, bool training) {
        check_input(x);
        const i64 batch = x.dim(0);
        const i64 layers = cfg.layers;
        i64 h = x.dim(2), w = x.dim(3);

        if (has_1d_encoder()) {
            std::vector<Tensor<T>> stages;
            std::vector<std::pair<i64, i64>> extents;
            auto cur = stem1d.forward(reshape(x, {batch, x.dim(1), h * w}), h, w, training);
            h /= 2;
            w /= 2;
            stages.push_back(cur);
            extents.emplace_back(h, w);
            for (auto& block : enc1d) {
                cur = block.forward(cur, h, w, training);
                h /= 2;
                w /= 2;
                stages.push_back(cur);
                extents.emplace_back(h, w);
            }
            if (has_1d_decoder()) {
                for (i64 j = 0; j < layers; ++j) {
                    const auto& skip = stages[static_cast<std::size_t>(layers - 1 - j)];
                    cur = dec1d[static_cast<std::size_t>(j)].forward(cur, skip, h, w, training);
                    h *= 2;
                    w *= 2;
                }
                auto logits = head1d.forward(cur);
                return flat_to_image(logits, h, w);
            }
            auto cur2 = flat_to_image(cur, h, w);
            for (i64 j = 0; j < layers; ++j) {
                const auto idx = static_cast<std::size_t>(layers - 1 - j);
                auto skip2 = flat_to_image(stages[idx], extents[idx].first, extents[idx].second);
                cur2 = dec2d[static_cast<std::size_t>(j)].forward(cur2, skip2, training);
            }
            return head2d.forward(cur2);
        }

        std::vector<Tensor<T>> stages;
        auto cur = stem2d.forward(x, training);
        stages.push_back(cur);
        for (auto& block : enc2d) {
            cur = block.forward(cur, training);
            stages.push_back(cur);
        }
        for (i64 j = 0; j + 1 < layers; ++j) {
            const auto& skip = stages[static_cast<std::size_t>(layers - 1 - j)];
            cur = dec2d[static_cast<std::size_t>(j)].forward(cur, skip, training);
        }
        return head2d.forward(cur);
    }

    // Ordered learnable parameters (path, tensor).
    std::vector<std::pair<std::string, Tensor<T>>> params() {
        std::vector<std::pair<std::string, Tensor<T>>> out;
        if (has_1d_encoder()) {
            stem1d.collect(out, "enc.stem");
            for (std::size_t i = 0; i < enc1d.size(); ++i)
                enc1d[i].collect(out, "enc.block" + std::to_string(i + 1));
        } else {
            stem2d.collect(out, "enc.stem");
            for (std::size_t i = 0; i < enc2d.size(); ++i)
                enc2d[i].collect(out, "enc.block" + std::to_string(i + 1));
        }
        for (std::size_t j = 0; j < dec1d.size(); ++j)
            dec1d[j].collect(out, "dec.up" + std::to_string(j + 1));
        for (std::size_t j = 0; j < dec2d.size(); ++j)
            dec2d[j].collect(out, "dec.up" + std::to_string(j + 1));
        if (has_1d_decoder())
            head1d.collect(out, "head");
        else
            head2d.collect(out, "head");
        return out;
    }

    // Non-learnable state that must survive a save/load round trip.
    std::vector<std::pair<std::string, std::vector<T>*>> stat_buffers() {
        std::vector<std::pair<std::string, std::vector<T>*>> out;
        if (has_1d_encoder()) {
            stem1d.collect_stats(out, "enc.stem");
            for (std::size_t i = 0; i < enc1d.size(); ++i)
                enc1d[i].collect_stats(out, "enc.block" + std::to_string(i + 1));
        } else {
            stem2d.collect_stats(out, "enc.stem");
            for (std::size_t i = 0; i < enc2d.size(); ++i)
                enc2d[i].collect_stats(out, "enc.block" + std::to_string(i + 1));
        }
        for (std::size_t j = 0; j < dec1d.size(); ++j)
            dec1d[j].collect_stats(out, "dec.up" + std::to_string(j + 1));
        for (std::size_t j = 0; j < dec2d.size(); ++j)
            dec2d[j].collect_stats(out, "dec.up" + std::to_string(j + 1));
        return out;
    }

    i64 param_element_count() {
        i64 n = 0;
        for (auto& [path, t] : params()) n += t.numel();
        return n;
    }

    void zero_grad() {
        for (auto& [path, t] : params()) t.zero_grad();
    }
};

}  // namespace onenet
