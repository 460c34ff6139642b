#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "wnet/autograd.hpp"
#include "wnet/connectivity.hpp"
#include "wnet/tensor.hpp"

namespace wnet {

// "Same" zero padding: output extent is ceil(in / stride), the pad total
// splits with the smaller half in front. Reproduces the 224->112->56->28->
// 14->7 progression for K=3, stride 2.
struct ConvGeom {
    int out_h = 0, out_w = 0;
    int pad_top = 0, pad_left = 0;
};

inline ConvGeom conv_geometry(int in_h, int in_w, int kernel, int stride) {
    if (stride < 1) throw std::invalid_argument("conv_geometry: stride must be >= 1");
    ConvGeom g;
    g.out_h = (in_h + stride - 1) / stride;
    g.out_w = (in_w + stride - 1) / stride;
    int pad_h = std::max((g.out_h - 1) * stride + kernel - in_h, 0);
    int pad_w = std::max((g.out_w - 1) * stride + kernel - in_w, 0);
    g.pad_top = pad_h / 2;
    g.pad_left = pad_w / 2;
    return g;
}

// ---------------------------------------------------------------------------
// raw kernels (forward / backward pairs on plain tensors)
// ---------------------------------------------------------------------------

// weights: (K, K, Cin, Cout)
template <typename T>
Tensor<T> conv2d_fw(const Tensor<T>& x, const Tensor<T>& w, int stride) {
    const int kernel = w.shape()[0];
    if (w.shape()[1] != kernel) throw std::invalid_argument("conv2d: non-square kernel " + w.shape_str());
    if (w.shape()[2] != x.channels())
        throw std::invalid_argument("conv2d: input " + x.shape_str() + " incompatible with weights " + w.shape_str());
    const int batch = x.batch(), in_h = x.height(), in_w = x.width(), cin = x.channels();
    const int cout = w.shape()[3];
    const ConvGeom g = conv_geometry(in_h, in_w, kernel, stride);
    Tensor<T> y(batch, g.out_h, g.out_w, cout);
    for (int n = 0; n < batch; ++n) {
        for (int oh = 0; oh < g.out_h; ++oh) {
            for (int ow = 0; ow < g.out_w; ++ow) {
                T* yp = &y.at(n, oh, ow, 0);
                for (int kh = 0; kh < kernel; ++kh) {
                    const int ih = oh * stride + kh - g.pad_top;
                    if (ih < 0 || ih >= in_h) continue;
                    for (int kw = 0; kw < kernel; ++kw) {
                        const int iw = ow * stride + kw - g.pad_left;
                        if (iw < 0 || iw >= in_w) continue;
                        const T* xp = &x.at(n, ih, iw, 0);
                        const T* wp = &w.at(kh, kw, 0, 0);
                        for (int ci = 0; ci < cin; ++ci) {
                            const T xv = xp[ci];
                            const T* wrow = wp + static_cast<std::size_t>(ci) * cout;
                            for (int co = 0; co < cout; ++co) yp[co] += xv * wrow[co];
                        }
                    }
                }
            }
        }
    }
    return y;
}

template <typename T>
void conv2d_bw(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& gy, int stride, Tensor<T>& gx,
               Tensor<T>& gw) {
    const int kernel = w.shape()[0];
    const int batch = x.batch(), in_h = x.height(), in_w = x.width(), cin = x.channels();
    const int cout = w.shape()[3];
    const ConvGeom g = conv_geometry(in_h, in_w, kernel, stride);
    for (int n = 0; n < batch; ++n) {
        for (int oh = 0; oh < g.out_h; ++oh) {
            for (int ow = 0; ow < g.out_w; ++ow) {
                const T* gyp = &gy.at(n, oh, ow, 0);
                for (int kh = 0; kh < kernel; ++kh) {
                    const int ih = oh * stride + kh - g.pad_top;
                    if (ih < 0 || ih >= in_h) continue;
                    for (int kw = 0; kw < kernel; ++kw) {
                        const int iw = ow * stride + kw - g.pad_left;
                        if (iw < 0 || iw >= in_w) continue;
                        const T* xp = &x.at(n, ih, iw, 0);
                        T* gxp = &gx.at(n, ih, iw, 0);
                        const T* wp = &w.at(kh, kw, 0, 0);
                        T* gwp = &gw.at(kh, kw, 0, 0);
                        for (int ci = 0; ci < cin; ++ci) {
                            const T xv = xp[ci];
                            const T* wrow = wp + static_cast<std::size_t>(ci) * cout;
                            T* gwrow = gwp + static_cast<std::size_t>(ci) * cout;
                            T acc = 0;
                            for (int co = 0; co < cout; ++co) {
                                acc += wrow[co] * gyp[co];
                                gwrow[co] += xv * gyp[co];
                            }
                            gxp[ci] += acc;
                        }
                    }
                }
            }
        }
    }
}

// weights: (K, K, C); one filter per channel, channel c of the output
// depends only on channel c of the input
template <typename T>
Tensor<T> depthwise_conv2d_fw(const Tensor<T>& x, const Tensor<T>& w, int stride) {
    const int kernel = w.shape()[0];
    const int channels = w.shape()[2];
    if (channels != x.channels())
        throw std::invalid_argument("depthwise_conv2d: weights carry " + std::to_string(channels) +
                                    " filters but input " + x.shape_str() + " has " +
                                    std::to_string(x.channels()) + " channels");
    const int batch = x.batch(), in_h = x.height(), in_w = x.width();
    const ConvGeom g = conv_geometry(in_h, in_w, kernel, stride);
    Tensor<T> y(batch, g.out_h, g.out_w, channels);
    for (int n = 0; n < batch; ++n) {
        for (int oh = 0; oh < g.out_h; ++oh) {
            for (int ow = 0; ow < g.out_w; ++ow) {
                T* yp = &y.at(n, oh, ow, 0);
                for (int kh = 0; kh < kernel; ++kh) {
                    const int ih = oh * stride + kh - g.pad_top;
                    if (ih < 0 || ih >= in_h) continue;
                    for (int kw = 0; kw < kernel; ++kw) {
                        const int iw = ow * stride + kw - g.pad_left;
                        if (iw < 0 || iw >= in_w) continue;
                        const T* xp = &x.at(n, ih, iw, 0);
                        const T* wp = &w.at(kh, kw, 0, 0);
                        for (int c = 0; c < channels; ++c) yp[c] += xp[c] * wp[c];
                    }
                }
            }
        }
    }
    return y;
}

template <typename T>
void depthwise_conv2d_bw(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& gy, int stride, Tensor<T>& gx,
                         Tensor<T>& gw) {
    const int kernel = w.shape()[0];
    const int channels = w.shape()[2];
    const int batch = x.batch(), in_h = x.height(), in_w = x.width();
    const ConvGeom g = conv_geometry(in_h, in_w, kernel, stride);
    for (int n = 0; n < batch; ++n) {
        for (int oh = 0; oh < g.out_h; ++oh) {
            for (int ow = 0; ow < g.out_w; ++ow) {
                const T* gyp = &gy.at(n, oh, ow, 0);
                for (int kh = 0; kh < kernel; ++kh) {
                    const int ih = oh * stride + kh - g.pad_top;
                    if (ih < 0 || ih >= in_h) continue;
                    for (int kw = 0; kw < kernel; ++kw) {
                        const int iw = ow * stride + kw - g.pad_left;
                        if (iw < 0 || iw >= in_w) continue;
                        const T* xp = &x.at(n, ih, iw, 0);
                        T* gxp = &gx.at(n, ih, iw, 0);
                        const T* wp = &w.at(kh, kw, 0, 0);
                        T* gwp = &gw.at(kh, kw, 0, 0);
                        for (int c = 0; c < channels; ++c) {
                            gxp[c] += wp[c] * gyp[c];
                            gwp[c] += xp[c] * gyp[c];
                        }
                    }
                }
            }
        }
    }
}

// Fast wavelet transform broadcast over the channel axis. At each of the
// kappa levels the working block of n channels splits into halves (channel j
// pairs with j + n/2); the difference half is emitted and the sum half
// carries on. Output blocks: {D/2, D/4, ..., D/2^kappa, D/2^kappa}. Only
// additions, O(D) per spatial position. The running sums are kept in double
// so the result equals the dense Haar-matrix broadcast exactly: integer
// combinations of float inputs are representable without rounding.
template <typename T>
Tensor<T> dfwt_fw(const Tensor<T>& x, int kappa, HaarSign sign) {
    const int channels = x.channels();
    if (kappa < 0 || (kappa > 0 && channels % (1 << kappa) != 0))
        throw std::invalid_argument("dfwt: depth " + std::to_string(kappa) + " invalid for " +
                                    std::to_string(channels) + " channels");
    Tensor<T> y(x.shape());
    const std::size_t positions = x.size() / channels;
    std::vector<double> work(channels);
    const double dsign = (sign == HaarSign::algorithm2) ? 1.0 : -1.0;
    const T* xp = x.data();
    T* yp = y.data();
    for (std::size_t p = 0; p < positions; ++p, xp += channels, yp += channels) {
        for (int j = 0; j < channels; ++j) work[j] = static_cast<double>(xp[j]);
        int n = channels;
        int emitted = 0;
        for (int level = 0; level < kappa; ++level) {
            const int half = n / 2;
            for (int j = 0; j < half; ++j) {
                const double lo = work[j];
                const double hi = work[half + j];
                yp[emitted + j] = static_cast<T>(dsign * (hi - lo));
                work[j] = hi + lo;
            }
            emitted += half;
            n = half;
        }
        for (int j = 0; j < n; ++j) yp[emitted + j] = static_cast<T>(work[j]);
    }
    return y;
}

// Reverse sweep of the same butterfly: at each level, grad(high) picks up
// grad(sum) + s*grad(diff) and grad(low) picks up grad(sum) - s*grad(diff).
template <typename T>
void dfwt_bw(const Tensor<T>& gy, int kappa, HaarSign sign, Tensor<T>& gx) {
    const int channels = gy.channels();
    const std::size_t positions = gy.size() / channels;
    std::vector<double> work(channels);
    const double dsign = (sign == HaarSign::algorithm2) ? 1.0 : -1.0;
    const T* gyp = gy.data();
    T* gxp = gx.data();
    std::vector<int> block(kappa);
    for (int level = 0; level < kappa; ++level) block[level] = channels >> (level + 1);
    for (std::size_t p = 0; p < positions; ++p, gyp += channels, gxp += channels) {
        int n = channels >> kappa; // final sum block size
        int emitted = channels - n;
        for (int j = 0; j < n; ++j) work[j] = static_cast<double>(gyp[emitted + j]);
        for (int level = kappa - 1; level >= 0; --level) {
            const int half = block[level];
            emitted -= half;
            for (int j = half - 1; j >= 0; --j) {
                const double gsum = work[j];
                const double gdiff = dsign * static_cast<double>(gyp[emitted + j]);
                work[half + j] = gsum + gdiff;
                work[j] = gsum - gdiff;
            }
            n = half * 2;
        }
        for (int j = 0; j < channels; ++j) gxp[j] += static_cast<T>(work[j]);
    }
}

template <typename T>
Tensor<T> relu6_fw(const Tensor<T>& x) {
    Tensor<T> y(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = std::min(std::max(x[i], T(0)), T(6));
    return y;
}

template <typename T>
void relu6_bw(const Tensor<T>& x, const Tensor<T>& gy, Tensor<T>& gx) {
    for (std::size_t i = 0; i < x.size(); ++i)
        if (x[i] > T(0) && x[i] < T(6)) gx[i] += gy[i];
}

// Per-channel batch statistics saved for the backward pass.
template <typename T>
struct BatchNormCache {
    std::vector<double> mean, inv_std;
};

// Normalizes over (batch, height, width) per channel, then applies the
// per-channel affine pair. In training mode the batch statistics are used
// and the running estimates updated in place; in eval mode the running
// estimates are used.
template <typename T>
Tensor<T> batch_norm_fw(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                        std::vector<double>& running_mean, std::vector<double>& running_var, bool training,
                        double momentum, double eps, BatchNormCache<T>* cache) {
    const int channels = x.channels();
    if (gamma.size() != static_cast<std::size_t>(channels) || beta.size() != static_cast<std::size_t>(channels))
        throw std::invalid_argument("batch_norm: affine parameters sized " + std::to_string(gamma.size()) +
                                    " do not match " + std::to_string(channels) + " channels");
    const std::size_t positions = x.size() / channels;
    std::vector<double> mean(channels, 0.0), var(channels, 0.0);
    if (training) {
        const T* xp = x.data();
        for (std::size_t p = 0; p < positions; ++p, xp += channels)
            for (int c = 0; c < channels; ++c) mean[c] += xp[c];
        for (int c = 0; c < channels; ++c) mean[c] /= static_cast<double>(positions);
        xp = x.data();
        for (std::size_t p = 0; p < positions; ++p, xp += channels)
            for (int c = 0; c < channels; ++c) {
                const double d = xp[c] - mean[c];
                var[c] += d * d;
            }
        for (int c = 0; c < channels; ++c) var[c] /= static_cast<double>(positions);
        for (int c = 0; c < channels; ++c) {
            running_mean[c] = momentum * running_mean[c] + (1.0 - momentum) * mean[c];
            running_var[c] = momentum * running_var[c] + (1.0 - momentum) * var[c];
        }
    } else {
        mean = running_mean;
        var = running_var;
    }
    std::vector<double> inv_std(channels);
    for (int c = 0; c < channels; ++c) inv_std[c] = 1.0 / std::sqrt(var[c] + eps);
    if (cache) {
        cache->mean = mean;
        cache->inv_std = inv_std;
    }
    Tensor<T> y(x.shape());
    const T* xp = x.data();
    T* yp = y.data();
    for (std::size_t p = 0; p < positions; ++p, xp += channels, yp += channels)
        for (int c = 0; c < channels; ++c)
            yp[c] = static_cast<T>(gamma[c] * (xp[c] - mean[c]) * inv_std[c] + beta[c]);
    return y;
}

template <typename T>
void batch_norm_bw(const Tensor<T>& x, const Tensor<T>& gamma, const BatchNormCache<T>& cache, const Tensor<T>& gy,
                   bool training, Tensor<T>& gx, Tensor<T>& ggamma, Tensor<T>& gbeta) {
    const int channels = x.channels();
    const std::size_t positions = x.size() / channels;
    std::vector<double> sum_gy(channels, 0.0), sum_gy_xhat(channels, 0.0);
    const T* xp = x.data();
    const T* gyp = gy.data();
    for (std::size_t p = 0; p < positions; ++p, xp += channels, gyp += channels)
        for (int c = 0; c < channels; ++c) {
            const double xhat = (xp[c] - cache.mean[c]) * cache.inv_std[c];
            sum_gy[c] += gyp[c];
            sum_gy_xhat[c] += gyp[c] * xhat;
        }
    for (int c = 0; c < channels; ++c) {
        ggamma[c] += static_cast<T>(sum_gy_xhat[c]);
        gbeta[c] += static_cast<T>(sum_gy[c]);
    }
    const double m = static_cast<double>(positions);
    xp = x.data();
    gyp = gy.data();
    T* gxp = gx.data();
    for (std::size_t p = 0; p < positions; ++p, xp += channels, gyp += channels, gxp += channels)
        for (int c = 0; c < channels; ++c) {
            const double xhat = (xp[c] - cache.mean[c]) * cache.inv_std[c];
            double g;
            if (training) {
                g = gamma[c] * cache.inv_std[c] * (gyp[c] - sum_gy[c] / m - xhat * sum_gy_xhat[c] / m);
            } else {
                g = gamma[c] * cache.inv_std[c] * gyp[c];
            }
            gxp[c] += static_cast<T>(g);
        }
}

template <typename T>
Tensor<T> global_avg_pool_fw(const Tensor<T>& x) {
    const int batch = x.batch(), channels = x.channels();
    const std::size_t plane = static_cast<std::size_t>(x.height()) * x.width();
    Tensor<T> y(batch, 1, 1, channels);
    for (int n = 0; n < batch; ++n) {
        std::vector<double> acc(channels, 0.0);
        const T* xp = &x.at(n, 0, 0, 0);
        for (std::size_t p = 0; p < plane; ++p, xp += channels)
            for (int c = 0; c < channels; ++c) acc[c] += xp[c];
        for (int c = 0; c < channels; ++c) y.at(n, 0, 0, c) = static_cast<T>(acc[c] / static_cast<double>(plane));
    }
    return y;
}

template <typename T>
void global_avg_pool_bw(const std::array<int, 4>& in_shape, const Tensor<T>& gy, Tensor<T>& gx) {
    const int batch = in_shape[0], channels = in_shape[3];
    const std::size_t plane = static_cast<std::size_t>(in_shape[1]) * in_shape[2];
    for (int n = 0; n < batch; ++n) {
        T* gxp = &gx.at(n, 0, 0, 0);
        const T* gyp = &gy.at(n, 0, 0, 0);
        for (std::size_t p = 0; p < plane; ++p, gxp += channels)
            for (int c = 0; c < channels; ++c) gxp[c] += gyp[c] / static_cast<T>(plane);
    }
}

// Mean over the batch of -log softmax(logits)[label]. Logits must be
// spatially collapsed (1x1). Returns the loss and fills `probs`.
template <typename T>
double softmax_cross_entropy_fw(const Tensor<T>& logits, const std::vector<int>& labels, Tensor<T>& probs) {
    const int batch = logits.batch(), classes = logits.channels();
    if (logits.height() != 1 || logits.width() != 1)
        throw std::invalid_argument("softmax_cross_entropy: logits must be 1x1 spatial, got " + logits.shape_str());
    if (static_cast<int>(labels.size()) != batch)
        throw std::invalid_argument("softmax_cross_entropy: " + std::to_string(labels.size()) + " labels for batch " +
                                    std::to_string(batch));
    probs = Tensor<T>(logits.shape());
    double loss = 0.0;
    for (int n = 0; n < batch; ++n) {
        if (labels[n] < 0 || labels[n] >= classes)
            throw std::invalid_argument("softmax_cross_entropy: label " + std::to_string(labels[n]) +
                                        " out of range for " + std::to_string(classes) + " classes");
        const T* lp = &logits.at(n, 0, 0, 0);
        double mx = lp[0];
        for (int c = 1; c < classes; ++c) mx = std::max(mx, static_cast<double>(lp[c]));
        double sum = 0.0;
        for (int c = 0; c < classes; ++c) sum += std::exp(static_cast<double>(lp[c]) - mx);
        const double log_sum = std::log(sum) + mx;
        for (int c = 0; c < classes; ++c)
            probs.at(n, 0, 0, c) = static_cast<T>(std::exp(static_cast<double>(lp[c]) - log_sum));
        loss += log_sum - static_cast<double>(lp[labels[n]]);
    }
    return loss / static_cast<double>(batch);
}

template <typename T>
void softmax_cross_entropy_bw(const Tensor<T>& probs, const std::vector<int>& labels, T gloss, Tensor<T>& glogits) {
    const int batch = probs.batch(), classes = probs.channels();
    for (int n = 0; n < batch; ++n)
        for (int c = 0; c < classes; ++c) {
            const T onehot = (labels[n] == c) ? T(1) : T(0);
            glogits.at(n, 0, 0, c) += gloss * (probs.at(n, 0, 0, c) - onehot) / static_cast<T>(batch);
        }
}

// ---------------------------------------------------------------------------
// taped wrappers: compute forward, record the matching backward step.
// `tape == nullptr` runs forward only (inference).
// ---------------------------------------------------------------------------

template <typename T>
NodePtr<T> wrap(Tape<T>* tape, Tensor<T> value) {
    return tape ? tape->emit(std::move(value)) : make_leaf<T>(std::move(value));
}

template <typename T>
NodePtr<T> conv2d(Tape<T>* tape, const NodePtr<T>& x, const NodePtr<T>& w, int stride) {
    auto out = wrap(tape, conv2d_fw(x->value, w->value, stride));
    if (tape)
        tape->record([x, w, out, stride] { conv2d_bw(x->value, w->value, out->grad(), stride, x->grad(), w->grad()); });
    return out;
}

template <typename T>
NodePtr<T> depthwise_conv2d(Tape<T>* tape, const NodePtr<T>& x, const NodePtr<T>& w, int stride) {
    auto out = wrap(tape, depthwise_conv2d_fw(x->value, w->value, stride));
    if (tape)
        tape->record(
            [x, w, out, stride] { depthwise_conv2d_bw(x->value, w->value, out->grad(), stride, x->grad(), w->grad()); });
    return out;
}

template <typename T>
NodePtr<T> dfwt(Tape<T>* tape, const NodePtr<T>& x, int kappa, HaarSign sign = HaarSign::algorithm2) {
    if (kappa == 0) return x; // identity
    auto out = wrap(tape, dfwt_fw(x->value, kappa, sign));
    if (tape) tape->record([x, out, kappa, sign] { dfwt_bw(out->grad(), kappa, sign, x->grad()); });
    return out;
}

template <typename T>
NodePtr<T> relu6(Tape<T>* tape, const NodePtr<T>& x) {
    auto out = wrap(tape, relu6_fw(x->value));
    if (tape) tape->record([x, out] { relu6_bw(x->value, out->grad(), x->grad()); });
    return out;
}

template <typename T>
NodePtr<T> batch_norm(Tape<T>* tape, const NodePtr<T>& x, const NodePtr<T>& gamma, const NodePtr<T>& beta,
                      std::vector<double>& running_mean, std::vector<double>& running_var, bool training,
                      double momentum = 0.9, double eps = 1e-5) {
    auto cache = std::make_shared<BatchNormCache<T>>();
    auto out = wrap(tape, batch_norm_fw(x->value, gamma->value, beta->value, running_mean, running_var, training,
                                        momentum, eps, cache.get()));
    if (tape)
        tape->record([x, gamma, beta, out, cache, training] {
            batch_norm_bw(x->value, gamma->value, *cache, out->grad(), training, x->grad(), gamma->grad(),
                          beta->grad());
        });
    return out;
}

template <typename T>
NodePtr<T> global_avg_pool(Tape<T>* tape, const NodePtr<T>& x) {
    auto out = wrap(tape, global_avg_pool_fw(x->value));
    if (tape) {
        auto shape = x->value.shape();
        tape->record([x, out, shape] { global_avg_pool_bw(shape, out->grad(), x->grad()); });
    }
    return out;
}

template <typename T>
NodePtr<T> softmax_cross_entropy(Tape<T>* tape, const NodePtr<T>& logits, const std::vector<int>& labels) {
    auto probs = std::make_shared<Tensor<T>>();
    const double loss = softmax_cross_entropy_fw(logits->value, labels, *probs);
    Tensor<T> scalar(1, 1, 1, 1);
    scalar[0] = static_cast<T>(loss);
    auto out = wrap(tape, std::move(scalar));
    if (tape)
        tape->record([logits, probs, labels, out] {
            softmax_cross_entropy_bw(*probs, labels, out->grad()[0], logits->grad());
        });
    return out;
}

template <typename T>
NodePtr<T> add(Tape<T>* tape, const NodePtr<T>& a, const NodePtr<T>& b) {
    check_same_shape("add", a->value.shape(), b->value.shape());
    Tensor<T> y(a->value.shape());
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = a->value[i] + b->value[i];
    auto out = wrap(tape, std::move(y));
    if (tape)
        tape->record([a, b, out] {
            for (std::size_t i = 0; i < out->grad().size(); ++i) {
                a->grad()[i] += out->grad()[i];
                b->grad()[i] += out->grad()[i];
            }
        });
    return out;
}

// Sum of all entries, as a scalar node.
template <typename T>
NodePtr<T> reduce_sum(Tape<T>* tape, const NodePtr<T>& x) {
    Tensor<T> scalar(1, 1, 1, 1);
    double acc = 0.0;
    for (std::size_t i = 0; i < x->value.size(); ++i) acc += x->value[i];
    scalar[0] = static_cast<T>(acc);
    auto out = wrap(tape, std::move(scalar));
    if (tape)
        tape->record([x, out] {
            const T g = out->grad()[0];
            for (std::size_t i = 0; i < x->grad().size(); ++i) x->grad()[i] += g;
        });
    return out;
}

// Channel slice [begin, begin + count), copied out.
template <typename T>
NodePtr<T> slice_channels(Tape<T>* tape, const NodePtr<T>& x, int begin, int count) {
    const int channels = x->value.channels();
    if (begin < 0 || count <= 0 || begin + count > channels)
        throw std::invalid_argument("slice_channels: [" + std::to_string(begin) + ", " +
                                    std::to_string(begin + count) + ") out of range for " + std::to_string(channels));
    Tensor<T> y(x->value.batch(), x->value.height(), x->value.width(), count);
    const std::size_t positions = x->value.size() / channels;
    const T* xp = x->value.data() + begin;
    T* yp = y.data();
    for (std::size_t p = 0; p < positions; ++p, xp += channels, yp += count)
        for (int c = 0; c < count; ++c) yp[c] = xp[c];
    auto out = wrap(tape, std::move(y));
    if (tape)
        tape->record([x, out, begin, count, channels, positions] {
            T* gxp = x->grad().data() + begin;
            const T* gyp = out->grad().data();
            for (std::size_t p = 0; p < positions; ++p, gxp += channels, gyp += count)
                for (int c = 0; c < count; ++c) gxp[c] += gyp[c];
        });
    return out;
}

template <typename T>
NodePtr<T> concat_channels(Tape<T>* tape, const std::vector<NodePtr<T>>& parts) {
    if (parts.empty()) throw std::invalid_argument("concat_channels: nothing to concatenate");
    int channels = 0;
    for (const auto& p : parts) channels += p->value.channels();
    const auto& first = parts.front()->value;
    Tensor<T> y(first.batch(), first.height(), first.width(), channels);
    const std::size_t positions = y.size() / channels;
    int offset = 0;
    for (const auto& part : parts) {
        const int pc = part->value.channels();
        if (part->value.batch() != first.batch() || part->value.height() != first.height() ||
            part->value.width() != first.width())
            throw std::invalid_argument("concat_channels: spatial shapes differ, " + part->value.shape_str() +
                                        " vs " + first.shape_str());
        const T* xp = part->value.data();
        T* yp = y.data() + offset;
        for (std::size_t p = 0; p < positions; ++p, xp += pc, yp += channels)
            for (int c = 0; c < pc; ++c) yp[c] = xp[c];
        offset += pc;
    }
    auto out = wrap(tape, std::move(y));
    if (tape)
        tape->record([parts, out, channels, positions] {
            int off = 0;
            for (const auto& part : parts) {
                const int pc = part->value.channels();
                T* gxp = part->grad().data();
                const T* gyp = out->grad().data() + off;
                for (std::size_t p = 0; p < positions; ++p, gxp += pc, gyp += channels)
                    for (int c = 0; c < pc; ++c) gxp[c] += gyp[c];
                off += pc;
            }
        });
    return out;
}

} // namespace wnet
