#pragma once

#include <functional>
#include <random>

#include "onenet/tensor.hpp"

namespace onenet::ref {

// Independent oracles for the property suites and unit tests. These stay
// deliberately naive: padded copies and literal summation loops, sharing no
// code with the production kernels they check.

template <class T>
std::vector<T> naive_conv1d(const std::vector<T>& in, i64 batch, i64 c_in, i64 len,
                            const std::vector<T>& w, i64 c_out, i64 k,
                            const std::vector<T>& bias, i64 stride, i64 padding) {
    const i64 padded = len + 2 * padding;
    const i64 l_out = (padded - k) / stride + 1;
    std::vector<T> pad(static_cast<std::size_t>(batch * c_in * padded), T(0));
    for (i64 b = 0; b < batch; ++b)
        for (i64 c = 0; c < c_in; ++c)
            for (i64 t = 0; t < len; ++t)
                pad[(b * c_in + c) * padded + padding + t] = in[(b * c_in + c) * len + t];
    std::vector<T> out(static_cast<std::size_t>(batch * c_out * l_out), T(0));
    for (i64 b = 0; b < batch; ++b)
        for (i64 o = 0; o < c_out; ++o)
            for (i64 t = 0; t < l_out; ++t) {
                T acc = bias.empty() ? T(0) : bias[o];
                for (i64 c = 0; c < c_in; ++c)
                    for (i64 j = 0; j < k; ++j)
                        acc += w[(o * c_in + c) * k + j] *
                               pad[(b * c_in + c) * padded + t * stride + j];
                out[(b * c_out + o) * l_out + t] = acc;
            }
    return out;
}

template <class T>
std::vector<T> naive_conv2d(const std::vector<T>& in, i64 batch, i64 c_in, i64 h, i64 w,
                            const std::vector<T>& wt, i64 c_out, i64 k,
                            const std::vector<T>& bias, i64 stride, i64 padding) {
    const i64 ph = h + 2 * padding, pw = w + 2 * padding;
    const i64 h_out = (ph - k) / stride + 1, w_out = (pw - k) / stride + 1;
    std::vector<T> pad(static_cast<std::size_t>(batch * c_in * ph * pw), T(0));
    for (i64 b = 0; b < batch; ++b)
        for (i64 c = 0; c < c_in; ++c)
            for (i64 y = 0; y < h; ++y)
                for (i64 x = 0; x < w; ++x)
                    pad[((b * c_in + c) * ph + padding + y) * pw + padding + x] =
                        in[((b * c_in + c) * h + y) * w + x];
    std::vector<T> out(static_cast<std::size_t>(batch * c_out * h_out * w_out), T(0));
    for (i64 b = 0; b < batch; ++b)
        for (i64 o = 0; o < c_out; ++o)
            for (i64 y = 0; y < h_out; ++y)
                for (i64 x = 0; x < w_out; ++x) {
                    T acc = bias.empty() ? T(0) : bias[o];
                    for (i64 c = 0; c < c_in; ++c)
                        for (i64 dy = 0; dy < k; ++dy)
                            for (i64 dx = 0; dx < k; ++dx)
                                acc += wt[((o * c_in + c) * k + dy) * k + dx] *
                                       pad[((b * c_in + c) * ph + y * stride + dy) * pw +
                                           x * stride + dx];
                    out[((b * c_out + o) * h_out + y) * w_out + x] = acc;
                }
    return out;
}

template <class T>
T max_rel_err(const std::vector<T>& a, const std::vector<T>& b, T floor = T(1e-4)) {
    T worst = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const T denom = std::max({std::abs(a[i]), std::abs(b[i]), floor});
        worst = std::max(worst, std::abs(a[i] - b[i]) / denom);
    }
    return worst;
}

template <class T>
void fill_uniform(Tensor<T>& t, std::mt19937_64& rng, T lo = T(-1), T hi = T(1)) {
    std::uniform_real_distribution<T> dist(lo, hi);
    for (auto& v : t.vec()) v = dist(rng);
}

// Central finite differences against the analytic gradient of a scalar-valued
// function of `probe`. Checks `n_probes` randomly chosen coordinates; other
// tensors in the closure are held fixed. 64-bit only.
struct GradCheckResult {
    double max_rel = 0.0;
    i64 probes = 0;
    std::string worst_detail;
};

inline GradCheckResult finite_diff_check(const std::function<Tensor<double>()>& loss_fn,
                                         Tensor<double>& probe, std::mt19937_64& rng,
                                         i64 n_probes, double eps = 1e-4) {
    GradCheckResult res;
    auto loss = loss_fn();
    probe.zero_grad();
    backward(loss);
    std::vector<double> analytic = probe.grad();
    std::uniform_int_distribution<i64> pick_idx(0, probe.numel() - 1);
    for (i64 p = 0; p < n_probes; ++p) {
        const i64 i = pick_idx(rng);
        const double saved = probe.vec()[i];
        probe.vec()[i] = saved + eps;
        const double up = loss_fn().item();
        probe.vec()[i] = saved - eps;
        const double down = loss_fn().item();
        probe.vec()[i] = saved;
        const double fd = (up - down) / (2 * eps);
        const double denom = std::max({std::abs(fd), std::abs(analytic[i]), 1e-4});
        const double rel = std::abs(fd - analytic[i]) / denom;
        if (rel > res.max_rel) {
            res.max_rel = rel;
            res.worst_detail = "coord " + std::to_string(i) + ": analytic " +
                               std::to_string(analytic[i]) + " vs fd " + std::to_string(fd);
        }
        ++res.probes;
    }
    return res;
}

// Confusion-matrix metrics oracle: literal per-pixel counting.
struct ConfusionOracle {
    std::vector<i64> tp, fp, fn;
    i64 correct = 0, total = 0;

    explicit ConfusionOracle(i64 classes) : tp(classes, 0), fp(classes, 0), fn(classes, 0) {}

    void add(i64 pred, i64 target) {
        if (pred == target) {
            ++tp[pred];
            ++correct;
        } else {
            ++fp[pred];
            ++fn[target];
        }
        ++total;
    }
    double miou() const {
        double acc = 0;
        i64 n = 0;
        for (std::size_t c = 0; c < tp.size(); ++c) {
            const i64 denom = tp[c] + fp[c] + fn[c];
            if (denom == 0) continue;
            acc += static_cast<double>(tp[c]) / static_cast<double>(denom);
            ++n;
        }
        return n ? acc / n : 0.0;
    }
    double dice() const {
        double acc = 0;
        i64 n = 0;
        for (std::size_t c = 0; c < tp.size(); ++c) {
            const i64 denom = 2 * tp[c] + fp[c] + fn[c];
            if (denom == 0) continue;
            acc += 2.0 * static_cast<double>(tp[c]) / static_cast<double>(denom);
            ++n;
        }
        return n ? acc / n : 0.0;
    }
    double pixel_accuracy() const {
        return total ? static_cast<double>(correct) / static_cast<double>(total) : 0.0;
    }
};

}  // namespace onenet::ref
