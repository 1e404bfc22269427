#pragma once

#include <cmath>
#include <cstring>
#include <limits>
#include <string>

#include "vaec/core/errors.hpp"
#include "vaec/core/rng.hpp"
#include "vaec/nn/feature_map.hpp"

// Layers hold parameters only. All per-call state (activations, im2col
// buffers, parameter gradients) lives in a caller-owned Ctx, so a model can be
// shared read-only across threads for inference while a trainer that owns a
// model exclusively can run forward/backward through the same objects.

namespace vaec::nn {

template <typename S>
class Conv2d {
public:
    Conv2d() = default;
    Conv2d(int in_ch, int out_ch, int ksize, int stride, int pad, bool with_bias)
        : in_ch_(in_ch), out_ch_(out_ch), k_(ksize), stride_(stride), pad_(pad),
          with_bias_(with_bias) {
        weight_.resize(out_ch_, in_ch_ * k_ * k_);
        if (with_bias_) bias_ = Mat<S>::Zero(out_ch_, 1);
    }

    void init(Rng& rng) {
        const double fan_in = static_cast<double>(in_ch_) * k_ * k_;
        const double sd = std::sqrt(2.0 / fan_in);
        for (long i = 0; i < weight_.size(); ++i)
            weight_.data()[i] = static_cast<S>(rng.normal() * sd);
        if (with_bias_) bias_.setZero();
    }

    struct Ctx {
        Mat<S> cols;          // (in_ch*k*k) x (out_spatial*batch); reused as gcols in backward
        FeatureMap<S> out, gin;
        Mat<S> gweight, gbias;
        int in_h = 0, in_w = 0, in_batch = 0;
    };

    int out_dim(int in) const { return (in + 2 * pad_ - k_) / stride_ + 1; }

    const FeatureMap<S>& forward(const FeatureMap<S>& x, Ctx& c) const {
        if (x.channels != in_ch_) throw ShapeError("Conv2d: channel mismatch");
        const int ho = out_dim(x.height), wo = out_dim(x.width);
        if (ho <= 0 || wo <= 0) throw ShapeError("Conv2d: input too small");
        c.in_h = x.height;
        c.in_w = x.width;
        c.in_batch = x.batch;
        im2col(x, c.cols, ho, wo);
        c.out.resize(out_ch_, ho, wo, x.batch);
        c.out.data.noalias() = weight_ * c.cols;
        if (with_bias_) c.out.data.colwise() += bias_.col(0);
        return c.out;
    }

    const FeatureMap<S>& backward(const FeatureMap<S>& gout, Ctx& c) const {
        c.gweight.noalias() = gout.data * c.cols.transpose();
        if (with_bias_) c.gbias = gout.data.rowwise().sum();
        // cols is free now; reuse it for the gradient columns
        c.cols.noalias() = weight_.transpose() * gout.data;
        c.gin.resize(in_ch_, c.in_h, c.in_w, c.in_batch);
        col2im(c.cols, c.gin, gout.height, gout.width);
        return c.gin;
    }

    template <class Self, class V>
    static void visit_state_impl(Self& self, const std::string& p, V&& v) {
        v(p + ".weight", self.weight_, true);
        if (self.with_bias_) v(p + ".bias", self.bias_, true);
    }
    template <class V>
    void visit_state(const std::string& p, V&& v) {
        visit_state_impl(*this, p, v);
    }
    template <class V>
    void visit_state(const std::string& p, V&& v) const {
        visit_state_impl(*this, p, v);
    }
    template <class V>
    void visit_grads(Ctx& c, V&& v) const {
        v(c.gweight);
        if (with_bias_) v(c.gbias);
    }

private:
    void im2col(const FeatureMap<S>& x, Mat<S>& cols, int ho, int wo) const {
        const int kk = k_ * k_;
        const long rows = static_cast<long>(in_ch_) * kk;
        cols.resize(rows, static_cast<long>(ho) * wo * x.batch);
        const S* src_base = x.data.data();
        S* dst_base = cols.data();
        const long spatial_in = x.spatial();
        for (int b = 0; b < x.batch; ++b) {
            for (int oy = 0; oy < ho; ++oy) {
                for (int ox = 0; ox < wo; ++ox) {
                    const long j = (static_cast<long>(b) * ho + oy) * wo + ox;
                    S* dst_col = dst_base + j * rows;
                    for (int ky = 0; ky < k_; ++ky) {
                        const int iy = oy * stride_ - pad_ + ky;
                        for (int kx = 0; kx < k_; ++kx) {
                            const int ix = ox * stride_ - pad_ + kx;
                            S* dst = dst_col + static_cast<long>(ky * k_ + kx) * in_ch_;
                            if (iy >= 0 && iy < x.height && ix >= 0 && ix < x.width) {
                                const long src_col =
                                    static_cast<long>(b) * spatial_in + static_cast<long>(iy) * x.width + ix;
                                std::memcpy(dst, src_base + src_col * in_ch_,
                                            sizeof(S) * in_ch_);
                            } else {
                                std::memset(dst, 0, sizeof(S) * in_ch_);
                            }
                        }
                    }
                }
            }
        }
    }

    void col2im(const Mat<S>& cols, FeatureMap<S>& gin, int ho, int wo) const {
        gin.data.setZero();
        const long rows = cols.rows();
        const S* src_base = cols.data();
        S* dst_base = gin.data.data();
        const long spatial_in = gin.spatial();
        for (int b = 0; b < gin.batch; ++b) {
            for (int oy = 0; oy < ho; ++oy) {
                for (int ox = 0; ox < wo; ++ox) {
                    const long j = (static_cast<long>(b) * ho + oy) * wo + ox;
                    const S* src_col = src_base + j * rows;
                    for (int ky = 0; ky < k_; ++ky) {
                        const int iy = oy * stride_ - pad_ + ky;
                        if (iy < 0 || iy >= gin.height) continue;
                        for (int kx = 0; kx < k_; ++kx) {
                            const int ix = ox * stride_ - pad_ + kx;
                            if (ix < 0 || ix >= gin.width) continue;
                            const S* src = src_col + static_cast<long>(ky * k_ + kx) * in_ch_;
                            S* dst = dst_base + (static_cast<long>(b) * spatial_in +
                                                 static_cast<long>(iy) * gin.width + ix) *
                                                    in_ch_;
                            for (int t = 0; t < in_ch_; ++t) dst[t] += src[t];
                        }
                    }
                }
            }
        }
    }

    int in_ch_ = 0, out_ch_ = 0, k_ = 0, stride_ = 1, pad_ = 0;
    bool with_bias_ = true;
    Mat<S> weight_; // out_ch x (in_ch*k*k), column index (ky*k + kx)*in_ch + ci
    Mat<S> bias_;   // out_ch x 1
};

template <typename S>
class BatchNorm2d {
public:
    BatchNorm2d() = default;
    explicit BatchNorm2d(int channels, S momentum = S(0.1), S eps = S(1e-5))
        : channels_(channels), momentum_(momentum), eps_(eps) {
        gamma_ = Mat<S>::Ones(channels, 1);
        beta_ = Mat<S>::Zero(channels, 1);
        running_mean_ = Mat<S>::Zero(channels, 1);
        running_var_ = Mat<S>::Ones(channels, 1);
    }

    struct Ctx {
        FeatureMap<S> out, gin;
        Mat<S> xhat;                      // normalized input (train mode)
        Vec<S> batch_mean, batch_var, invstd;
        Mat<S> ggamma, gbeta;
        bool train = false;
        long m = 0; // columns the batch statistics were computed over
    };

    const FeatureMap<S>& forward(const FeatureMap<S>& x, Ctx& c, bool train) const {
        if (x.channels != channels_) throw ShapeError("BatchNorm2d: channel mismatch");
        resize_like(c.out, x);
        c.train = train;
        c.m = x.data.cols();
        if (train) {
            c.batch_mean = x.data.rowwise().mean();
            c.xhat = x.data.colwise() - c.batch_mean;
            c.batch_var = c.xhat.array().square().rowwise().mean().matrix();
            c.invstd = (c.batch_var.array() + eps_).rsqrt().matrix();
            c.xhat.array().colwise() *= c.invstd.array();
        } else {
            c.invstd = (running_var_.col(0).array() + eps_).rsqrt().matrix();
            c.xhat = x.data.colwise() - running_mean_.col(0);
            c.xhat.array().colwise() *= c.invstd.array();
        }
        c.out.data = c.xhat;
        c.out.data.array().colwise() *= gamma_.col(0).array();
        c.out.data.colwise() += beta_.col(0);
        return c.out;
    }

    /// Folds the batch statistics of the last training-mode forward into the
    /// running estimates. Called by the trainer; keeps forward() const.
    void fold_batch_stats(const Ctx& c) {
        if (!c.train || c.m <= 0) return;
        const S unbias = c.m > 1 ? static_cast<S>(c.m) / static_cast<S>(c.m - 1) : S(1);
        running_mean_.col(0) = (S(1) - momentum_) * running_mean_.col(0) + momentum_ * c.batch_mean;
        running_var_.col(0) =
            (S(1) - momentum_) * running_var_.col(0) + momentum_ * unbias * c.batch_var;
    }

    const FeatureMap<S>& backward(const FeatureMap<S>& gout, Ctx& c) const {
        resize_like(c.gin, gout);
        c.ggamma = (gout.data.array() * c.xhat.array()).rowwise().sum().matrix();
        c.gbeta = gout.data.rowwise().sum();
        if (c.train) {
            const S inv_m = S(1) / static_cast<S>(c.m);
            // gin = invstd/m * (m*gxhat - sum(gxhat) - xhat * sum(gxhat .* xhat))
            c.gin.data = gout.data; // becomes gxhat
            c.gin.data.array().colwise() *= gamma_.col(0).array();
            const Vec<S> sum_g = c.gin.data.rowwise().sum();
            const Vec<S> sum_gx = (c.gin.data.array() * c.xhat.array()).rowwise().sum().matrix();
            c.gin.data *= static_cast<S>(c.m);
            c.gin.data.colwise() -= sum_g;
            c.gin.data -= (c.xhat.array().colwise() * sum_gx.array()).matrix();
            const Vec<S> scale = c.invstd * inv_m;
            c.gin.data.array().colwise() *= scale.array();
        } else {
            const Vec<S> scale = gamma_.col(0).cwiseProduct(c.invstd);
            c.gin.data = gout.data;
            c.gin.data.array().colwise() *= scale.array();
        }
        return c.gin;
    }

    template <class Self, class V>
    static void visit_state_impl(Self& self, const std::string& p, V&& v) {
        v(p + ".gamma", self.gamma_, true);
        v(p + ".beta", self.beta_, true);
        v(p + ".running_mean", self.running_mean_, false);
        v(p + ".running_var", self.running_var_, false);
    }
    template <class V>
    void visit_state(const std::string& p, V&& v) {
        visit_state_impl(*this, p, v);
    }
    template <class V>
    void visit_state(const std::string& p, V&& v) const {
        visit_state_impl(*this, p, v);
    }
    template <class V>
    void visit_grads(Ctx& c, V&& v) const {
        v(c.ggamma);
        v(c.gbeta);
    }

private:
    int channels_ = 0;
    S momentum_ = S(0.1), eps_ = S(1e-5);
    Mat<S> gamma_, beta_;
    Mat<S> running_mean_, running_var_;
};

template <typename S>
struct Relu {
    struct Ctx {
        FeatureMap<S> out, gin;
    };
    const FeatureMap<S>& forward(const FeatureMap<S>& x, Ctx& c) const {
        resize_like(c.out, x);
        c.out.data = x.data.cwiseMax(S(0));
        return c.out;
    }
    const FeatureMap<S>& backward(const FeatureMap<S>& gout, Ctx& c) const {
        resize_like(c.gin, gout);
        c.gin.data =
            ((c.out.data.array() > S(0)).template cast<S>() * gout.data.array()).matrix();
        return c.gin;
    }
};

template <typename S>
class MaxPool2d {
public:
    MaxPool2d() = default;
    MaxPool2d(int ksize, int stride, int pad) : k_(ksize), stride_(stride), pad_(pad) {}

    struct Ctx {
        FeatureMap<S> out, gin;
        Eigen::Matrix<long, Eigen::Dynamic, Eigen::Dynamic> idx; // winning input column per (c, out col)
        int in_h = 0, in_w = 0, in_batch = 0, in_ch = 0;
    };

    int out_dim(int in) const { return (in + 2 * pad_ - k_) / stride_ + 1; }

    const FeatureMap<S>& forward(const FeatureMap<S>& x, Ctx& c) const {
        const int ho = out_dim(x.height), wo = out_dim(x.width);
        c.in_h = x.height;
        c.in_w = x.width;
        c.in_batch = x.batch;
        c.in_ch = x.channels;
        c.out.resize(x.channels, ho, wo, x.batch);
        c.idx.resize(x.channels, c.out.data.cols());
        const long spatial_in = x.spatial();
        const S* src_base = x.data.data();
        for (int b = 0; b < x.batch; ++b)
            for (int oy = 0; oy < ho; ++oy)
                for (int ox = 0; ox < wo; ++ox) {
                    const long j = (static_cast<long>(b) * ho + oy) * wo + ox;
                    S* ocol = c.out.data.data() + j * x.channels;
                    long* icol = c.idx.data() + j * x.channels;
                    bool first = true;
                    for (int ky = 0; ky < k_; ++ky) {
                        const int iy = oy * stride_ - pad_ + ky;
                        if (iy < 0 || iy >= x.height) continue;
                        for (int kx = 0; kx < k_; ++kx) {
                            const int ix = ox * stride_ - pad_ + kx;
                            if (ix < 0 || ix >= x.width) continue;
                            const long src_col = static_cast<long>(b) * spatial_in +
                                                 static_cast<long>(iy) * x.width + ix;
                            const S* scol = src_base + src_col * x.channels;
                            if (first) {
                                for (int t = 0; t < x.channels; ++t) {
                                    ocol[t] = scol[t];
                                    icol[t] = src_col;
                                }
                                first = false;
                            } else {
                                for (int t = 0; t < x.channels; ++t)
                                    if (scol[t] > ocol[t]) {
                                        ocol[t] = scol[t];
                                        icol[t] = src_col;
                                    }
                            }
                        }
                    }
                    if (first) throw ShapeError("MaxPool2d: empty pooling window");
                }
        return c.out;
    }

    const FeatureMap<S>& backward(const FeatureMap<S>& gout, Ctx& c) const {
        c.gin.resize(c.in_ch, c.in_h, c.in_w, c.in_batch);
        c.gin.data.setZero();
        for (long j = 0; j < gout.data.cols(); ++j)
            for (int t = 0; t < c.in_ch; ++t)
                c.gin.data(t, c.idx(t, j)) += gout.data(t, j);
        return c.gin;
    }

private:
    int k_ = 3, stride_ = 2, pad_ = 1;
};

/// Nearest-neighbour 2x upsampling.
template <typename S>
struct Upsample2x {
    struct Ctx {
        FeatureMap<S> out, gin;
    };
    const FeatureMap<S>& forward(const FeatureMap<S>& x, Ctx& c) const {
        c.out.resize(x.channels, x.height * 2, x.width * 2, x.batch);
        const long spatial_in = x.spatial();
        const long spatial_out = c.out.spatial();
        for (int b = 0; b < x.batch; ++b)
            for (int y = 0; y < x.height; ++y)
                for (int x0 = 0; x0 < x.width; ++x0) {
                    const long src = static_cast<long>(b) * spatial_in +
                                     static_cast<long>(y) * x.width + x0;
                    const long base = static_cast<long>(b) * spatial_out +
                                      static_cast<long>(2 * y) * c.out.width + 2 * x0;
                    c.out.data.col(base) = x.data.col(src);
                    c.out.data.col(base + 1) = x.data.col(src);
                    c.out.data.col(base + c.out.width) = x.data.col(src);
                    c.out.data.col(base + c.out.width + 1) = x.data.col(src);
                }
        return c.out;
    }
    const FeatureMap<S>& backward(const FeatureMap<S>& gout, Ctx& c) const {
        c.gin.resize(gout.channels, gout.height / 2, gout.width / 2, gout.batch);
        const long spatial_in = c.gin.spatial();
        const long spatial_out = gout.spatial();
        for (int b = 0; b < c.gin.batch; ++b)
            for (int y = 0; y < c.gin.height; ++y)
                for (int x0 = 0; x0 < c.gin.width; ++x0) {
                    const long dst = static_cast<long>(b) * spatial_in +
                                     static_cast<long>(y) * c.gin.width + x0;
                    const long base = static_cast<long>(b) * spatial_out +
                                      static_cast<long>(2 * y) * gout.width + 2 * x0;
                    c.gin.data.col(dst) = gout.data.col(base) + gout.data.col(base + 1) +
                                          gout.data.col(base + gout.width) +
                                          gout.data.col(base + gout.width + 1);
                }
        return c.gin;
    }
};

/// Fully connected layer on (features x batch) maps (height == width == 1).
template <typename S>
class Linear {
public:
    Linear() = default;
    Linear(int in_features, int out_features) : in_(in_features), out_(out_features) {
        weight_.resize(out_, in_);
        bias_ = Mat<S>::Zero(out_, 1);
    }

    void init(Rng& rng, double gain = 1.0) {
        const double sd = gain / std::sqrt(static_cast<double>(in_));
        for (long i = 0; i < weight_.size(); ++i)
            weight_.data()[i] = static_cast<S>(rng.normal() * sd);
        bias_.setZero();
    }

    struct Ctx {
        FeatureMap<S> out, gin;
        Mat<S> x; // cached input for the weight gradient
        Mat<S> gweight, gbias;
    };

    const FeatureMap<S>& forward(const FeatureMap<S>& x, Ctx& c) const {
        if (x.data.rows() != in_ || x.height != 1 || x.width != 1)
            throw ShapeError("Linear: input shape mismatch");
        c.x = x.data;
        c.out.resize(out_, 1, 1, x.batch);
        c.out.data.noalias() = weight_ * x.data;
        c.out.data.colwise() += bias_.col(0);
        return c.out;
    }

    const FeatureMap<S>& backward(const FeatureMap<S>& gout, Ctx& c) const {
        c.gweight.noalias() = gout.data * c.x.transpose();
        c.gbias = gout.data.rowwise().sum();
        c.gin.resize(in_, 1, 1, gout.batch);
        c.gin.data.noalias() = weight_.transpose() * gout.data;
        return c.gin;
    }

    template <class Self, class V>
    static void visit_state_impl(Self& self, const std::string& p, V&& v) {
        v(p + ".weight", self.weight_, true);
        v(p + ".bias", self.bias_, true);
    }
    template <class V>
    void visit_state(const std::string& p, V&& v) {
        visit_state_impl(*this, p, v);
    }
    template <class V>
    void visit_state(const std::string& p, V&& v) const {
        visit_state_impl(*this, p, v);
    }
    template <class V>
    void visit_grads(Ctx& c, V&& v) const {
        v(c.gweight);
        v(c.gbias);
    }

private:
    int in_ = 0, out_ = 0;
    Mat<S> weight_;
    Mat<S> bias_;
};

} // namespace vaec::nn
