#pragma once

#include <optional>
#include <span>

#include "vaec/nn/resnet_vae.hpp"
#include "vaec/normstats.hpp"
#include "vaec/slide_io.hpp"

namespace vaec {

using nn::FeatureMap;

struct VaeConfig {
    int latent_dim = 0;
    int patch_size = 0;
    double kl_coeff = 0.1;
    int base_width = 64; // stage widths w, 2w, 4w, 8w
    std::string encoder_arch = "resnet18-style";

    void validate() const {
        if (latent_dim < 1) throw ConfigError("latent_dim must be >= 1");
        if (patch_size < 32 || patch_size % 32 != 0)
            throw ConfigError("patch_size must be a positive multiple of 32");
        if (kl_coeff < 0.0) throw ConfigError("kl_coeff must be nonnegative");
        if (base_width < 1) throw ConfigError("base_width must be >= 1");
        if (encoder_arch != "resnet18-style")
            throw ConfigError("unknown encoder_arch: " + encoder_arch);
    }
};

/// Posterior parameters (and optionally a sample) for one patch.
struct LatentCode {
    Vecf mu;
    Vecf logvar;
    std::optional<Vecf> z;
};

struct LossBreakdown {
    double kl = 0.0;
    double recon = 0.0;
    double total = 0.0;
    double kl_coeff = 0.0;
};

template <typename S>
class VaeModel {
public:
    VaeModel() = default;
    VaeModel(VaeConfig cfg, std::uint64_t seed) : cfg_(cfg) {
        cfg_.validate();
        enc_ = nn::Encoder<S>(cfg_.latent_dim, cfg_.patch_size, cfg_.base_width);
        dec_ = nn::Decoder<S>(cfg_.latent_dim, cfg_.patch_size, cfg_.base_width);
        Rng rng(seed);
        enc_.init(rng);
        dec_.init(rng);
    }

    const VaeConfig& config() const { return cfg_; }

    struct Ctx {
        typename nn::Encoder<S>::Ctx enc;
        typename nn::Decoder<S>::Ctx dec;
        Mat<S> mu, logvar; // latent_dim x batch, split from the encoder head
        Mat<S> ghead;      // 2*latent_dim x batch
    };

    /// Fills ctx.mu / ctx.logvar. Deterministic; thread-safe when train=false
    /// and each caller owns its Ctx.
    void encode_batch(const FeatureMap<S>& x, Ctx& c, bool train) const {
        const Mat<S>& head = enc_.forward(x, c.enc, train);
        const int L = cfg_.latent_dim;
        c.mu = head.topRows(L);
        c.logvar = head.bottomRows(L);
    }

    const FeatureMap<S>& decode_batch(const Mat<S>& z, Ctx& c, bool train) const {
        return dec_.forward(z, c.dec, train);
    }

    /// Backward through the encoder given gradients w.r.t. mu and logvar.
    const FeatureMap<S>& encoder_backward(const Mat<S>& gmu, const Mat<S>& glogvar, Ctx& c) const {
        const int L = cfg_.latent_dim;
        c.ghead.resize(2 * L, gmu.cols());
        c.ghead.topRows(L) = gmu;
        c.ghead.bottomRows(L) = glogvar;
        return enc_.backward(c.ghead, c.enc);
    }

    const Mat<S>& decoder_backward(const FeatureMap<S>& gxhat, Ctx& c) const {
        return dec_.backward(gxhat, c.dec);
    }

    void fold_batch_stats(const Ctx& c) {
        enc_.fold_batch_stats(c.enc);
        dec_.fold_batch_stats(c.dec);
    }

    template <class V>
    void visit_state(V&& v) {
        enc_.visit_state("enc", v);
        dec_.visit_state("dec", v);
    }
    template <class V>
    void visit_state(V&& v) const {
        enc_.visit_state("enc", v);
        dec_.visit_state("dec", v);
    }
    template <class V>
    void visit_grads(Ctx& c, V&& v) const {
        enc_.visit_grads(c.enc, v);
        dec_.visit_grads(c.dec, v);
    }

private:
    VaeConfig cfg_;
    nn::Encoder<S> enc_;
    nn::Decoder<S> dec_;
};

// ---- state snapshots (best-epoch restore, checkpointing) ----

template <typename S>
std::vector<Mat<S>> snapshot_state(const VaeModel<S>& model) {
    std::vector<Mat<S>> snap;
    model.visit_state([&](const std::string&, const Mat<S>& m, bool) { snap.push_back(m); });
    return snap;
}

template <typename S>
void restore_state(VaeModel<S>& model, const std::vector<Mat<S>>& snap) {
    std::size_t i = 0;
    model.visit_state([&](const std::string&, Mat<S>& m, bool) {
        if (i >= snap.size()) throw ShapeError("restore_state: snapshot too short");
        m = snap[i++];
    });
    if (i != snap.size()) throw ShapeError("restore_state: snapshot size mismatch");
}

// ---- batch <-> patch plumbing ----

template <typename S>
void batch_from_patches(std::span<const Patch> patches, FeatureMap<S>& x) {
    if (patches.empty()) throw EmptyInputError("batch_from_patches: no patches");
    const int P = patches.front().size;
    x.resize(3, P, P, static_cast<int>(patches.size()));
    for (std::size_t i = 0; i < patches.size(); ++i) {
        const Patch& p = patches[i];
        if (p.size != P || !p.well_formed())
            throw ShapeError("batch_from_patches: inconsistent patch shapes");
        x.data.middleCols(static_cast<long>(i) * P * P, static_cast<long>(P) * P) =
            p.pixels.cast<S>();
    }
}

template <typename S>
std::vector<Patch> patches_from_batch(const FeatureMap<S>& x) {
    std::vector<Patch> out(static_cast<std::size_t>(x.batch));
    for (int i = 0; i < x.batch; ++i) {
        Patch& p = out[static_cast<std::size_t>(i)];
        p.size = x.height;
        p.pixels = x.data.middleCols(static_cast<long>(i) * x.spatial(), x.spatial())
                       .template cast<float>();
    }
    return out;
}

// ---- the spec-level operations ----

/// z = mu + noise .* exp(logvar / 2)
template <typename D1, typename D2, typename D3>
auto reparameterize(const Eigen::MatrixBase<D1>& mu, const Eigen::MatrixBase<D2>& logvar,
                    const Eigen::MatrixBase<D3>& noise) {
    using S = typename D1::Scalar;
    if (mu.rows() != logvar.rows() || mu.cols() != logvar.cols() || mu.rows() != noise.rows() ||
        mu.cols() != noise.cols())
        throw ShapeError("reparameterize: shape mismatch");
    Mat<S> z =
        (mu.array() + noise.array() * (logvar.array() * S(0.5)).exp()).matrix();
    return z;
}

/// KL(q || N(0, I)) summed over latent dimensions, averaged over the batch:
/// -0.5 * sum(1 + logvar - mu^2 - exp(logvar)).
template <typename D1, typename D2>
double kl_divergence(const Eigen::MatrixBase<D1>& mu, const Eigen::MatrixBase<D2>& logvar) {
    using S = typename D1::Scalar;
    if (mu.rows() != logvar.rows() || mu.cols() != logvar.cols())
        throw ShapeError("kl_divergence: shape mismatch");
    const auto per_element =
        (S(1) + logvar.array() - mu.array().square() - logvar.array().exp()).template cast<double>();
    return -0.5 * per_element.sum() / static_cast<double>(mu.cols());
}

inline double kl_divergence(const LatentCode& code) {
    return kl_divergence(code.mu, code.logvar);
}

/// Mean squared error over all elements.
template <typename D1, typename D2>
double reconstruction_loss(const Eigen::MatrixBase<D1>& x, const Eigen::MatrixBase<D2>& x_hat) {
    if (x.rows() != x_hat.rows() || x.cols() != x_hat.cols())
        throw ShapeError("reconstruction_loss: shape mismatch");
    return (x_hat - x).template cast<double>().array().square().sum() /
           static_cast<double>(x.size());
}

template <typename S>
double reconstruction_loss(const FeatureMap<S>& x, const FeatureMap<S>& x_hat) {
    if (!x.same_shape(x_hat)) throw ShapeError("reconstruction_loss: shape mismatch");
    return reconstruction_loss(x.data, x_hat.data);
}

/// total = kl_coeff * kl + recon (the identity holds exactly in doubles).
template <typename X, typename M, typename L>
LossBreakdown total_loss(const X& x, const X& x_hat, const M& mu, const L& logvar,
                         double kl_coeff) {
    if (kl_coeff < 0.0) throw ConfigError("kl_coeff must be nonnegative");
    LossBreakdown b;
    b.kl = kl_divergence(mu, logvar);
    b.recon = reconstruction_loss(x, x_hat);
    b.kl_coeff = kl_coeff;
    b.total = kl_coeff * b.kl + b.recon;
    return b;
}

/// Normalized patches -> posterior parameters, eval mode, chunked internally.
template <typename S>
Mat<S> encode_mu_logvar(const VaeModel<S>& model, std::span<const Patch> patches,
                        int chunk = 128) {
    if (patches.empty()) throw EmptyInputError("encode: no patches");
    const int L = model.config().latent_dim;
    Mat<S> out(2 * L, static_cast<long>(patches.size()));
    typename VaeModel<S>::Ctx ctx;
    FeatureMap<S> x;
    for (std::size_t off = 0; off < patches.size(); off += static_cast<std::size_t>(chunk)) {
        const std::size_t n = std::min<std::size_t>(chunk, patches.size() - off);
        batch_from_patches<S>(patches.subspan(off, n), x);
        model.encode_batch(x, ctx, false);
        out.middleCols(static_cast<long>(off), static_cast<long>(n)).topRows(L) = ctx.mu;
        out.middleCols(static_cast<long>(off), static_cast<long>(n)).bottomRows(L) = ctx.logvar;
    }
    return out;
}

/// Spec-level encode: one LatentCode per patch (no sampling).
template <typename S>
std::vector<LatentCode> encode(const VaeModel<S>& model, std::span<const Patch> patches) {
    const Mat<S> both = encode_mu_logvar(model, patches);
    const int L = model.config().latent_dim;
    std::vector<LatentCode> codes(patches.size());
    for (std::size_t i = 0; i < patches.size(); ++i) {
        codes[i].mu = both.col(static_cast<long>(i)).head(L).template cast<float>();
        codes[i].logvar = both.col(static_cast<long>(i)).tail(L).template cast<float>();
    }
    return codes;
}

/// Latent vectors (latent_dim x n) -> normalized patches, eval mode.
template <typename S>
std::vector<Patch> decode(const VaeModel<S>& model, const Mat<S>& z, int chunk = 128) {
    if (z.rows() != model.config().latent_dim)
        throw ShapeError("decode: latent dimension mismatch");
    std::vector<Patch> out;
    out.reserve(static_cast<std::size_t>(z.cols()));
    typename VaeModel<S>::Ctx ctx;
    for (long off = 0; off < z.cols(); off += chunk) {
        const long n = std::min<long>(chunk, z.cols() - off);
        const auto& xhat = model.decode_batch(z.middleCols(off, n), ctx, false);
        auto decoded = patches_from_batch(xhat);
        for (auto& p : decoded) out.push_back(std::move(p));
    }
    return out;
}

} // namespace vaec
