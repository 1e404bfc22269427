#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>

#include "vaec/nn/adam.hpp"
#include "vaec/vae.hpp"

namespace vaec {

struct TrainConfig {
    int batch_size = 128;
    double learning_rate = 1e-4;
    int patience = 5;
    int max_epochs = 100;
    std::uint64_t seed = 0;
    double kl_coeff = 0.1;
    bool early_stopping = true; // sweeps disable this

    void validate() const {
        if (batch_size < 1) throw ConfigError("batch_size must be positive");
        if (learning_rate <= 0.0) throw ConfigError("learning_rate must be positive");
        if (patience < 0) throw ConfigError("patience must be nonnegative");
        if (max_epochs < 0) throw ConfigError("max_epochs must be nonnegative");
        if (kl_coeff < 0.0) throw ConfigError("kl_coeff must be nonnegative");
    }
};

struct EpochRecord {
    double train_loss = 0.0;
    double val_loss = 0.0;
    double val_kl = 0.0;
    double val_recon = 0.0;
};

struct TrainHistory {
    std::vector<EpochRecord> epochs;
    int best_epoch = -1; // 0-based index into epochs
    bool stopped_early = false;
};

struct ValidationResult {
    double loss = 0.0;
    double kl = 0.0;
    double recon = 0.0;
};

/// True iff strictly more than `patience` consecutive epochs have passed since
/// the best (minimum) validation loss.
inline bool early_stop_check(const std::vector<double>& val_losses, int patience) {
    if (val_losses.empty()) throw EmptyInputError("early_stop_check: empty history");
    std::size_t best = 0;
    for (std::size_t i = 1; i < val_losses.size(); ++i)
        if (val_losses[i] < val_losses[best]) best = i;
    const auto since_best = static_cast<long>(val_losses.size() - 1 - best);
    return since_best > patience;
}

/// Mean total loss over the validation set, eval-mode statistics, no parameter
/// updates. Sampling noise comes from a stream derived from cfg.seed, so two
/// calls with the same seed return identical values.
template <typename S>
ValidationResult validate(const VaeModel<S>& model, const std::vector<Patch>& val_patches,
                          const TrainConfig& cfg) {
    if (val_patches.empty()) throw EmptyInputError("validate: empty validation set");
    cfg.validate();
    Rng noise_rng = Rng(cfg.seed).fork(0x76616cull); // fixed validation stream

    typename VaeModel<S>::Ctx ctx;
    nn::FeatureMap<S> x;
    Mat<S> noise;
    ValidationResult acc;
    const auto n = static_cast<long>(val_patches.size());
    for (long off = 0; off < n; off += cfg.batch_size) {
        const long b = std::min<long>(cfg.batch_size, n - off);
        batch_from_patches<S>(std::span<const Patch>(val_patches).subspan(
                                  static_cast<std::size_t>(off), static_cast<std::size_t>(b)),
                              x);
        model.encode_batch(x, ctx, false);
        noise.resize(ctx.mu.rows(), ctx.mu.cols());
        for (long i = 0; i < noise.size(); ++i)
            noise.data()[i] = static_cast<S>(noise_rng.normal());
        const Mat<S> z = reparameterize(ctx.mu, ctx.logvar, noise);
        const auto& xhat = model.decode_batch(z, ctx, false);
        const LossBreakdown lb = total_loss(x.data, xhat.data, ctx.mu, ctx.logvar, cfg.kl_coeff);
        const double w = static_cast<double>(b);
        acc.loss += lb.total * w;
        acc.kl += lb.kl * w;
        acc.recon += lb.recon * w;
    }
    acc.loss /= static_cast<double>(n);
    acc.kl /= static_cast<double>(n);
    acc.recon /= static_cast<double>(n);
    return acc;
}

/// Shuffled mini-batch optimization of the weighted ELBO with validation
/// tracking, early stopping, and best-epoch weight restoration.
template <typename S>
TrainHistory train(VaeModel<S>& model, const std::vector<Patch>& train_patches,
                   const std::vector<Patch>& val_patches, const TrainConfig& cfg) {
    cfg.validate();
    TrainHistory history;
    if (cfg.max_epochs == 0) return history;
    if (train_patches.empty() || val_patches.empty())
        throw EmptyInputError("train: empty patch set");

    Rng shuffle_rng = Rng(cfg.seed).fork(0x736875ull);
    Rng noise_rng = Rng(cfg.seed).fork(0x6e6f69ull);
    nn::Adam<S> opt(cfg.learning_rate);

    typename VaeModel<S>::Ctx ctx;
    nn::FeatureMap<S> x;
    Mat<S> noise, gmu, glogvar, gz_total;
    nn::FeatureMap<S> gxhat;

    std::vector<std::size_t> order(train_patches.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::vector<Patch> batch_patches;

    std::vector<Mat<S>> best_state = snapshot_state(model);
    double best_val = std::numeric_limits<double>::infinity();
    std::vector<double> val_history;

    std::vector<Mat<S>*> params;
    std::vector<const Mat<S>*> grads;

    for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        double train_loss_sum = 0.0;
        const auto n = static_cast<long>(order.size());
        for (long off = 0; off < n; off += cfg.batch_size) {
            const long b = std::min<long>(cfg.batch_size, n - off);
            batch_patches.clear();
            for (long i = 0; i < b; ++i)
                batch_patches.push_back(train_patches[order[static_cast<std::size_t>(off + i)]]);
            batch_from_patches<S>(batch_patches, x);

            model.encode_batch(x, ctx, true);
            noise.resize(ctx.mu.rows(), ctx.mu.cols());
            for (long i = 0; i < noise.size(); ++i)
                noise.data()[i] = static_cast<S>(noise_rng.normal());
            const Mat<S> z = reparameterize(ctx.mu, ctx.logvar, noise);
            const auto& xhat = model.decode_batch(z, ctx, true);
            const LossBreakdown lb =
                total_loss(x.data, xhat.data, ctx.mu, ctx.logvar, cfg.kl_coeff);
            if (!std::isfinite(lb.total)) throw DivergedError(epoch);
            train_loss_sum += lb.total * static_cast<double>(b);

            // d recon / d xhat = 2 (xhat - x) / element count
            nn::resize_like(gxhat, xhat);
            gxhat.data = (xhat.data - x.data) * static_cast<S>(2.0 / static_cast<double>(x.data.size()));
            const Mat<S>& gz = model.decoder_backward(gxhat, ctx);

            // d z / d mu = 1;  d z / d logvar = 0.5 * noise * exp(logvar / 2)
            const S kl_scale = static_cast<S>(cfg.kl_coeff / static_cast<double>(b));
            gmu = gz + kl_scale * ctx.mu;
            glogvar =
                (gz.array() * noise.array() * (ctx.logvar.array() * S(0.5)).exp() * S(0.5) +
                 kl_scale * S(0.5) * (ctx.logvar.array().exp() - S(1)))
                    .matrix();
            model.encoder_backward(gmu, glogvar, ctx);

            model.fold_batch_stats(ctx);
            params.clear();
            grads.clear();
            model.visit_state([&](const std::string&, Mat<S>& m, bool is_param) {
                if (is_param) params.push_back(&m);
            });
            model.visit_grads(ctx, [&](const Mat<S>& g) { grads.push_back(&g); });
            opt.step(params, grads);
        }

        EpochRecord rec;
        rec.train_loss = train_loss_sum / static_cast<double>(n);
        const ValidationResult v = validate(model, val_patches, cfg);
        rec.val_loss = v.loss;
        rec.val_kl = v.kl;
        rec.val_recon = v.recon;
        if (!std::isfinite(rec.val_loss)) throw DivergedError(epoch);
        history.epochs.push_back(rec);
        val_history.push_back(rec.val_loss);

        if (rec.val_loss < best_val) {
            best_val = rec.val_loss;
            best_state = snapshot_state(model);
            history.best_epoch = epoch - 1;
        }
        if (cfg.early_stopping && early_stop_check(val_history, cfg.patience)) {
            history.stopped_early = true;
            break;
        }
    }

    restore_state(model, best_state);
    return history;
}

} // namespace vaec
