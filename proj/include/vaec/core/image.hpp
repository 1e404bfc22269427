#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "vaec/core/errors.hpp"

namespace vaec {

template <typename S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
template <typename S>
using Vec = Eigen::Matrix<S, Eigen::Dynamic, 1>;
using Matf = Mat<float>;
using Vecf = Vec<float>;

/// Interleaved 8-bit RGB raster, row-major. The on-disk / display domain.
struct ImageU8 {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> rgb; // size 3*width*height

    ImageU8() = default;
    ImageU8(int w, int h, std::uint8_t fill = 0)
        : width(w), height(h), rgb(static_cast<std::size_t>(3) * w * h, fill) {}

    std::uint8_t& at(int x, int y, int c) {
        return rgb[(static_cast<std::size_t>(y) * width + x) * 3 + c];
    }
    std::uint8_t at(int x, int y, int c) const {
        return rgb[(static_cast<std::size_t>(y) * width + x) * 3 + c];
    }
    bool operator==(const ImageU8& o) const {
        return width == o.width && height == o.height && rgb == o.rgb;
    }
};

/// Planar float RGB raster in arbitrary (possibly un-clamped) pixel units.
/// Column j = y*width + x holds the (r, g, b) values of that pixel.
struct ImageF {
    int width = 0;
    int height = 0;
    Matf pixels; // 3 x (width*height)

    ImageF() = default;
    ImageF(int w, int h) : width(w), height(h), pixels(Matf::Zero(3, static_cast<long>(w) * h)) {}
};

inline ImageF to_unit_float(const ImageU8& img) {
    ImageF out(img.width, img.height);
    const long n = static_cast<long>(img.width) * img.height;
    for (long j = 0; j < n; ++j) {
        out.pixels(0, j) = img.rgb[3 * j + 0] / 255.0f;
        out.pixels(1, j) = img.rgb[3 * j + 1] / 255.0f;
        out.pixels(2, j) = img.rgb[3 * j + 2] / 255.0f;
    }
    return out;
}

/// Final export step: clamp to the displayable range and round to 8 bits.
inline ImageU8 to_u8(const ImageF& img) {
    ImageU8 out(img.width, img.height);
    const long n = static_cast<long>(img.width) * img.height;
    for (long j = 0; j < n; ++j) {
        for (int c = 0; c < 3; ++c) {
            const float v = std::clamp(img.pixels(c, j) * 255.0f, 0.0f, 255.0f);
            out.rgb[3 * j + c] = static_cast<std::uint8_t>(std::lround(v));
        }
    }
    return out;
}

} // namespace vaec
