#pragma once

#include <Eigen/Core>
#include <filesystem>
#include <vector>

#include "vaec/slide_io.hpp"

namespace vaec {

/// Per-channel standard-score statistics of a training patch population.
struct NormStats {
    Eigen::Vector3f mean = Eigen::Vector3f::Zero();
    Eigen::Vector3f std = Eigen::Vector3f::Ones();

    bool valid() const {
        return mean.allFinite() && std.allFinite() && (std.array() > 0.0f).all();
    }
};

/// Per-channel mean and population standard deviation over all pixels of all
/// patches. Throws EmptyInputError / DegenerateStatsError.
NormStats compute_stats(const std::vector<Patch>& patches);

/// out = (in - mean) / std, per channel.
Patch normalize(const Patch& patch, const NormStats& stats);

/// Exact algebraic inverse of normalize. Never clamps; clamping happens only
/// at image export.
Patch denormalize(const Patch& patch, const NormStats& stats);

// JSON sidecar (floats round-trip exactly).
void save_stats(const std::filesystem::path& path, const NormStats& stats);
NormStats load_stats(const std::filesystem::path& path);

} // namespace vaec
