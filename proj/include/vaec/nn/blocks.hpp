#pragma once

#include <optional>

#include "vaec/nn/layers.hpp"

namespace vaec::nn {

/// ResNet basic block: conv3x3(stride) -> BN -> ReLU -> conv3x3 -> BN, plus an
/// identity or 1x1-projection skip, ReLU after the sum.
template <typename S>
class EncoderBlock {
public:
    EncoderBlock() = default;
    EncoderBlock(int in_ch, int out_ch, int stride)
        : conv1_(in_ch, out_ch, 3, stride, 1, false), bn1_(out_ch),
          conv2_(out_ch, out_ch, 3, 1, 1, false), bn2_(out_ch) {
        if (stride != 1 || in_ch != out_ch) {
            proj_.emplace(in_ch, out_ch, 1, stride, 0, false);
            bnp_.emplace(out_ch);
        }
    }

    void init(Rng& rng) {
        conv1_.init(rng);
        conv2_.init(rng);
        if (proj_) proj_->init(rng);
    }

    struct Ctx {
        typename Conv2d<S>::Ctx c1, c2, cp;
        typename BatchNorm2d<S>::Ctx b1, b2, bp;
        typename Relu<S>::Ctx r1, r2;
        FeatureMap<S> sum, gin;
    };

    const FeatureMap<S>& forward(const FeatureMap<S>& x, Ctx& c, bool train) const {
        const auto& a1 = relu_.forward(bn1_.forward(conv1_.forward(x, c.c1), c.b1, train), c.r1);
        const auto& a2 = bn2_.forward(conv2_.forward(a1, c.c2), c.b2, train);
        resize_like(c.sum, a2);
        if (proj_)
            c.sum.data = a2.data +
                         bnp_->forward(proj_->forward(x, c.cp), c.bp, train).data;
        else
            c.sum.data = a2.data + x.data;
        return relu_.forward(c.sum, c.r2);
    }

    const FeatureMap<S>& backward(const FeatureMap<S>& gout, Ctx& c) const {
        const auto& gsum = relu_.backward(gout, c.r2);
        const auto& gmain =
            conv1_.backward(bn1_.backward(relu_.backward(conv2_.backward(bn2_.backward(gsum, c.b2), c.c2), c.r1), c.b1), c.c1);
        resize_like(c.gin, gmain);
        if (proj_) {
            const auto& gskip = proj_->backward(bnp_->backward(gsum, c.bp), c.cp);
            c.gin.data = gmain.data + gskip.data;
        } else {
            c.gin.data = gmain.data + gsum.data;
        }
        return c.gin;
    }

    void fold_batch_stats(const Ctx& c) {
        bn1_.fold_batch_stats(c.b1);
        bn2_.fold_batch_stats(c.b2);
        if (bnp_) bnp_->fold_batch_stats(c.bp);
    }

    template <class Self, class V>
    static void visit_state_impl(Self& self, const std::string& p, V&& v) {
        self.conv1_.visit_state(p + ".conv1", v);
        self.bn1_.visit_state(p + ".bn1", v);
        self.conv2_.visit_state(p + ".conv2", v);
        self.bn2_.visit_state(p + ".bn2", v);
        if (self.proj_) {
            self.proj_->visit_state(p + ".proj", v);
            self.bnp_->visit_state(p + ".bnp", v);
        }
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
        conv1_.visit_grads(c.c1, v);
        bn1_.visit_grads(c.b1, v);
        conv2_.visit_grads(c.c2, v);
        bn2_.visit_grads(c.b2, v);
        if (proj_) {
            proj_->visit_grads(c.cp, v);
            bnp_->visit_grads(c.bp, v);
        }
    }

private:
    Conv2d<S> conv1_, conv2_;
    BatchNorm2d<S> bn1_, bn2_;
    std::optional<Conv2d<S>> proj_;
    std::optional<BatchNorm2d<S>> bnp_;
    Relu<S> relu_;
};

/// Decoder counterpart: optional nearest 2x upsample at the block entry
/// (shared by both branches), then the same two-conv residual body.
template <typename S>
class DecoderBlock {
public:
    DecoderBlock() = default;
    DecoderBlock(int in_ch, int out_ch, bool upsample)
        : upsample_(upsample), conv1_(in_ch, out_ch, 3, 1, 1, false), bn1_(out_ch),
          conv2_(out_ch, out_ch, 3, 1, 1, false), bn2_(out_ch) {
        if (in_ch != out_ch) {
            proj_.emplace(in_ch, out_ch, 1, 1, 0, false);
            bnp_.emplace(out_ch);
        }
    }

    void init(Rng& rng) {
        conv1_.init(rng);
        conv2_.init(rng);
        if (proj_) proj_->init(rng);
    }

    struct Ctx {
        typename Upsample2x<S>::Ctx up;
        typename Conv2d<S>::Ctx c1, c2, cp;
        typename BatchNorm2d<S>::Ctx b1, b2, bp;
        typename Relu<S>::Ctx r1, r2;
        FeatureMap<S> sum, gbase, gin;
    };

    const FeatureMap<S>& forward(const FeatureMap<S>& x, Ctx& c, bool train) const {
        const FeatureMap<S>& base = upsample_ ? up_.forward(x, c.up) : x;
        const auto& a1 =
            relu_.forward(bn1_.forward(conv1_.forward(base, c.c1), c.b1, train), c.r1);
        const auto& a2 = bn2_.forward(conv2_.forward(a1, c.c2), c.b2, train);
        resize_like(c.sum, a2);
        if (proj_)
            c.sum.data = a2.data + bnp_->forward(proj_->forward(base, c.cp), c.bp, train).data;
        else
            c.sum.data = a2.data + base.data;
        return relu_.forward(c.sum, c.r2);
    }

    const FeatureMap<S>& backward(const FeatureMap<S>& gout, Ctx& c) const {
        const auto& gsum = relu_.backward(gout, c.r2);
        const auto& gmain =
            conv1_.backward(bn1_.backward(relu_.backward(conv2_.backward(bn2_.backward(gsum, c.b2), c.c2), c.r1), c.b1), c.c1);
        resize_like(c.gbase, gmain);
        if (proj_) {
            const auto& gskip = proj_->backward(bnp_->backward(gsum, c.bp), c.cp);
            c.gbase.data = gmain.data + gskip.data;
        } else {
            c.gbase.data = gmain.data + gsum.data;
        }
        if (!upsample_) return c.gbase;
        const auto& g = up_.backward(c.gbase, c.up);
        resize_like(c.gin, g);
        c.gin.data = g.data;
        return c.gin;
    }

    void fold_batch_stats(const Ctx& c) {
        bn1_.fold_batch_stats(c.b1);
        bn2_.fold_batch_stats(c.b2);
        if (bnp_) bnp_->fold_batch_stats(c.bp);
    }

    template <class Self, class V>
    static void visit_state_impl(Self& self, const std::string& p, V&& v) {
        self.conv1_.visit_state(p + ".conv1", v);
        self.bn1_.visit_state(p + ".bn1", v);
        self.conv2_.visit_state(p + ".conv2", v);
        self.bn2_.visit_state(p + ".bn2", v);
        if (self.proj_) {
            self.proj_->visit_state(p + ".proj", v);
            self.bnp_->visit_state(p + ".bnp", v);
        }
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
        conv1_.visit_grads(c.c1, v);
        bn1_.visit_grads(c.b1, v);
        conv2_.visit_grads(c.c2, v);
        bn2_.visit_grads(c.b2, v);
        if (proj_) {
            proj_->visit_grads(c.cp, v);
            bnp_->visit_grads(c.bp, v);
        }
    }

private:
    bool upsample_ = false;
    Upsample2x<S> up_;
    Conv2d<S> conv1_, conv2_;
    BatchNorm2d<S> bn1_, bn2_;
    std::optional<Conv2d<S>> proj_;
    std::optional<BatchNorm2d<S>> bnp_;
    Relu<S> relu_;
};

} // namespace vaec::nn
