#pragma once

#include <Eigen/Core>

#include "vaec/core/image.hpp"

namespace vaec::nn {

using vaec::Mat;
using vaec::Vec;

/// A batch of feature maps stored as one dense matrix:
/// data(c, j) with column j = b*(height*width) + y*width + x.
/// Convolution lowers onto this layout directly (im2col columns are
/// contiguous channel runs), and a (C, S*B) buffer reinterprets as the
/// (C*S, B) matrix a linear layer consumes without copying.
template <typename S>
struct FeatureMap {
    int channels = 0;
    int height = 0;
    int width = 0;
    int batch = 0;
    Mat<S> data;

    void resize(int c, int h, int w, int b) {
        channels = c;
        height = h;
        width = w;
        batch = b;
        data.resize(c, static_cast<long>(h) * w * b);
    }
    long spatial() const { return static_cast<long>(height) * width; }
    bool same_shape(const FeatureMap& o) const {
        return channels == o.channels && height == o.height && width == o.width &&
               batch == o.batch;
    }
};

template <typename S>
void resize_like(FeatureMap<S>& dst, const FeatureMap<S>& src) {
    dst.resize(src.channels, src.height, src.width, src.batch);
}

} // namespace vaec::nn
