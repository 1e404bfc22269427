#pragma once

#include <cstring>
#include <vector>

#include "vaec/nn/blocks.hpp"

namespace vaec::nn {

/// ResNet18-style encoder: 7x7/2 stem, 3x3/2 max pool, four stages of two
/// basic blocks (widths w, 2w, 4w, 8w; stages 2-4 downsample), and a linear
/// head mapping the flattened deepest map to 2*latent_dim values (mu, logvar).
template <typename S>
class Encoder {
public:
    Encoder() = default;
    Encoder(int latent_dim, int patch_size, int base_width)
        : latent_dim_(latent_dim), patch_size_(patch_size), width_(base_width),
          stem_(3, base_width, 7, 2, 3, false), bn_stem_(base_width), pool_(3, 2, 1) {
        const int w = base_width;
        const int specs[8][3] = {{w, w, 1},          {w, w, 1},          {w, 2 * w, 2},
                                 {2 * w, 2 * w, 1},  {2 * w, 4 * w, 2},  {4 * w, 4 * w, 1},
                                 {4 * w, 8 * w, 2},  {8 * w, 8 * w, 1}};
        blocks_.reserve(8);
        for (const auto& s : specs) blocks_.emplace_back(s[0], s[1], s[2]);
        cells_ = (patch_size / 32) * (patch_size / 32);
        head_ = Linear<S>(8 * w * cells_, 2 * latent_dim);
    }

    void init(Rng& rng) {
        stem_.init(rng);
        for (auto& b : blocks_) b.init(rng);
        head_.init(rng, 1.0);
    }

    struct Ctx {
        typename Conv2d<S>::Ctx stem;
        typename BatchNorm2d<S>::Ctx bn_stem;
        typename Relu<S>::Ctx relu_stem;
        typename MaxPool2d<S>::Ctx pool;
        std::vector<typename EncoderBlock<S>::Ctx> blocks{8};
        FeatureMap<S> flat, gflat;
        typename Linear<S>::Ctx head;
    };

    /// Returns the (2*latent_dim x batch) head output.
    const Mat<S>& forward(const FeatureMap<S>& x, Ctx& c, bool train) const {
        if (x.channels != 3 || x.height != patch_size_ || x.width != patch_size_)
            throw ShapeError("Encoder: input must be 3 x patch_size x patch_size");
        const FeatureMap<S>* cur =
            &pool_.forward(relu_.forward(bn_stem_.forward(stem_.forward(x, c.stem), c.bn_stem, train),
                                         c.relu_stem),
                           c.pool);
        for (std::size_t i = 0; i < blocks_.size(); ++i)
            cur = &blocks_[i].forward(*cur, c.blocks[i], train);
        // (8w, cells*B) and (8w*cells, B) share one column-major buffer
        c.flat.resize(8 * width_ * cells_, 1, 1, cur->batch);
        std::memcpy(c.flat.data.data(), cur->data.data(), sizeof(S) * cur->data.size());
        return head_.forward(c.flat, c.head).data;
    }

    /// ghead is (2*latent_dim x batch); returns the gradient w.r.t. the input.
    const FeatureMap<S>& backward(const Mat<S>& ghead, Ctx& c) const {
        FeatureMap<S> g;
        g.resize(2 * latent_dim_, 1, 1, static_cast<int>(ghead.cols()));
        g.data = ghead;
        const auto& gflat_fm = head_.backward(g, c.head);
        const int side = patch_size_ / 32;
        c.gflat.resize(8 * width_, side, side, gflat_fm.batch);
        std::memcpy(c.gflat.data.data(), gflat_fm.data.data(),
                    sizeof(S) * gflat_fm.data.size());
        const FeatureMap<S>* cur = &c.gflat;
        for (std::size_t i = blocks_.size(); i-- > 0;)
            cur = &blocks_[i].backward(*cur, c.blocks[i]);
        return stem_.backward(
            bn_stem_.backward(relu_.backward(pool_.backward(*cur, c.pool), c.relu_stem), c.bn_stem),
            c.stem);
    }

    void fold_batch_stats(const Ctx& c) {
        bn_stem_.fold_batch_stats(c.bn_stem);
        for (std::size_t i = 0; i < blocks_.size(); ++i) blocks_[i].fold_batch_stats(c.blocks[i]);
    }

    template <class Self, class V>
    static void visit_state_impl(Self& self, const std::string& p, V&& v) {
        self.stem_.visit_state(p + ".stem", v);
        self.bn_stem_.visit_state(p + ".bn_stem", v);
        for (std::size_t i = 0; i < self.blocks_.size(); ++i)
            self.blocks_[i].visit_state(p + ".block" + std::to_string(i), v);
        self.head_.visit_state(p + ".head", v);
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
        stem_.visit_grads(c.stem, v);
        bn_stem_.visit_grads(c.bn_stem, v);
        for (std::size_t i = 0; i < blocks_.size(); ++i) blocks_[i].visit_grads(c.blocks[i], v);
        head_.visit_grads(c.head, v);
    }

private:
    int latent_dim_ = 0, patch_size_ = 0, width_ = 0, cells_ = 0;
    Conv2d<S> stem_;
    BatchNorm2d<S> bn_stem_;
    MaxPool2d<S> pool_;
    std::vector<EncoderBlock<S>> blocks_;
    Linear<S> head_;
    Relu<S> relu_;
};

/// Mirror decoder: linear latent -> 8w x (P/32)^2 map, three upsampling
/// residual stages (8w -> 4w -> 2w -> w), then two more nearest-upsample +
/// conv steps mirroring the encoder's pool and stem (5 total 2x upsamplings).
template <typename S>
class Decoder {
public:
    Decoder() = default;
    Decoder(int latent_dim, int patch_size, int base_width)
        : latent_dim_(latent_dim), patch_size_(patch_size), width_(base_width) {
        const int w = base_width;
        side_ = patch_size / 32;
        fc_ = Linear<S>(latent_dim, 8 * w * side_ * side_);
        bn_fc_ = BatchNorm2d<S>(8 * w);
        blocks_.reserve(6);
        blocks_.emplace_back(8 * w, 4 * w, true);
        blocks_.emplace_back(4 * w, 4 * w, false);
        blocks_.emplace_back(4 * w, 2 * w, true);
        blocks_.emplace_back(2 * w, 2 * w, false);
        blocks_.emplace_back(2 * w, w, true);
        blocks_.emplace_back(w, w, false);
        conv_pool_ = Conv2d<S>(w, w, 3, 1, 1, false);
        bn_pool_ = BatchNorm2d<S>(w);
        conv_out_ = Conv2d<S>(w, 3, 3, 1, 1, true);
    }

    void init(Rng& rng) {
        fc_.init(rng, 1.0);
        for (auto& b : blocks_) b.init(rng);
        conv_pool_.init(rng);
        conv_out_.init(rng);
    }

    struct Ctx {
        typename Linear<S>::Ctx fc;
        FeatureMap<S> z_in, shaped, gshaped;
        typename BatchNorm2d<S>::Ctx bn_fc;
        typename Relu<S>::Ctx relu_fc;
        std::vector<typename DecoderBlock<S>::Ctx> blocks{6};
        typename Upsample2x<S>::Ctx up_pool, up_out;
        typename Conv2d<S>::Ctx conv_pool, conv_out;
        typename BatchNorm2d<S>::Ctx bn_pool;
        typename Relu<S>::Ctx relu_pool;
        Mat<S> gz;
    };

    /// z is (latent_dim x batch); returns the reconstructed 3 x P x P batch.
    const FeatureMap<S>& forward(const Mat<S>& z, Ctx& c, bool train) const {
        if (z.rows() != latent_dim_) throw ShapeError("Decoder: latent dimension mismatch");
        c.z_in.resize(latent_dim_, 1, 1, static_cast<int>(z.cols()));
        c.z_in.data = z;
        const auto& lifted = fc_.forward(c.z_in, c.fc);
        c.shaped.resize(8 * width_, side_, side_, lifted.batch);
        std::memcpy(c.shaped.data.data(), lifted.data.data(), sizeof(S) * lifted.data.size());
        const FeatureMap<S>* cur =
            &relu_.forward(bn_fc_.forward(c.shaped, c.bn_fc, train), c.relu_fc);
        for (std::size_t i = 0; i < blocks_.size(); ++i)
            cur = &blocks_[i].forward(*cur, c.blocks[i], train);
        cur = &relu_.forward(
            bn_pool_.forward(conv_pool_.forward(up_pool_.forward(*cur, c.up_pool), c.conv_pool),
                             c.bn_pool, train),
            c.relu_pool);
        return conv_out_.forward(up_out_.forward(*cur, c.up_out), c.conv_out);
    }

    /// gout has the output shape; returns the gradient w.r.t. z (latent x batch).
    const Mat<S>& backward(const FeatureMap<S>& gout, Ctx& c) const {
        const FeatureMap<S>* cur = &up_out_.backward(conv_out_.backward(gout, c.conv_out), c.up_out);
        cur = &up_pool_.backward(
            conv_pool_.backward(
                bn_pool_.backward(relu_.backward(*cur, c.relu_pool), c.bn_pool), c.conv_pool),
            c.up_pool);
        for (std::size_t i = blocks_.size(); i-- > 0;)
            cur = &blocks_[i].backward(*cur, c.blocks[i]);
        const auto& gshaped = bn_fc_.backward(relu_.backward(*cur, c.relu_fc), c.bn_fc);
        c.gshaped.resize(8 * width_ * side_ * side_, 1, 1, gshaped.batch);
        std::memcpy(c.gshaped.data.data(), gshaped.data.data(),
                    sizeof(S) * gshaped.data.size());
        c.gz = fc_.backward(c.gshaped, c.fc).data;
        return c.gz;
    }

    void fold_batch_stats(const Ctx& c) {
        bn_fc_.fold_batch_stats(c.bn_fc);
        for (std::size_t i = 0; i < blocks_.size(); ++i) blocks_[i].fold_batch_stats(c.blocks[i]);
        bn_pool_.fold_batch_stats(c.bn_pool);
    }

    template <class Self, class V>
    static void visit_state_impl(Self& self, const std::string& p, V&& v) {
        self.fc_.visit_state(p + ".fc", v);
        self.bn_fc_.visit_state(p + ".bn_fc", v);
        for (std::size_t i = 0; i < self.blocks_.size(); ++i)
            self.blocks_[i].visit_state(p + ".block" + std::to_string(i), v);
        self.conv_pool_.visit_state(p + ".conv_pool", v);
        self.bn_pool_.visit_state(p + ".bn_pool", v);
        self.conv_out_.visit_state(p + ".conv_out", v);
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
        fc_.visit_grads(c.fc, v);
        bn_fc_.visit_grads(c.bn_fc, v);
        for (std::size_t i = 0; i < blocks_.size(); ++i) blocks_[i].visit_grads(c.blocks[i], v);
        conv_pool_.visit_grads(c.conv_pool, v);
        bn_pool_.visit_grads(c.bn_pool, v);
        conv_out_.visit_grads(c.conv_out, v);
    }

private:
    int latent_dim_ = 0, patch_size_ = 0, width_ = 0, side_ = 0;
    Linear<S> fc_;
    BatchNorm2d<S> bn_fc_;
    std::vector<DecoderBlock<S>> blocks_;
    Upsample2x<S> up_pool_, up_out_;
    Conv2d<S> conv_pool_, conv_out_;
    BatchNorm2d<S> bn_pool_;
    Relu<S> relu_;
};

} // namespace vaec::nn
