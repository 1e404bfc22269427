#pragma once

#include <cmath>
#include <vector>

#include "vaec/core/image.hpp"

namespace vaec::nn {

/// Adaptive-moment optimizer with bias correction. Parameter/gradient pairs
/// are re-collected each step (layer visitors guarantee a stable order), so
/// the optimizer never holds pointers across steps.
template <typename S>
class Adam {
public:
    explicit Adam(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
        : lr_(lr), b1_(beta1), b2_(beta2), eps_(eps) {}

    void step(const std::vector<Mat<S>*>& params, const std::vector<const Mat<S>*>& grads) {
        if (params.size() != grads.size()) throw ShapeError("Adam: param/grad count mismatch");
        if (m_.empty()) {
            m_.reserve(params.size());
            v_.reserve(params.size());
            for (const auto* p : params) {
                m_.push_back(Mat<S>::Zero(p->rows(), p->cols()));
                v_.push_back(Mat<S>::Zero(p->rows(), p->cols()));
            }
        }
        ++t_;
        const S c1 = static_cast<S>(1.0 - std::pow(b1_, static_cast<double>(t_)));
        const S c2 = static_cast<S>(1.0 - std::pow(b2_, static_cast<double>(t_)));
        const S lr = static_cast<S>(lr_);
        for (std::size_t i = 0; i < params.size(); ++i) {
            Mat<S>& p = *params[i];
            const Mat<S>& g = *grads[i];
            if (m_[i].rows() != g.rows() || m_[i].cols() != g.cols())
                throw ShapeError("Adam: gradient shape changed between steps");
            m_[i] = static_cast<S>(b1_) * m_[i] + static_cast<S>(1.0 - b1_) * g;
            v_[i].array() =
                static_cast<S>(b2_) * v_[i].array() + static_cast<S>(1.0 - b2_) * g.array().square();
            p.array() -= lr * (m_[i].array() / c1) /
                         ((v_[i].array() / c2).sqrt() + static_cast<S>(eps_));
        }
    }

    long steps() const { return t_; }

private:
    double lr_, b1_, b2_, eps_;
    long t_ = 0;
    std::vector<Mat<S>> m_, v_;
};

} // namespace vaec::nn
