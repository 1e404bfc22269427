#include "vaec/normstats.hpp"

#include <cmath>
#include <fstream>

#include <json.hpp>

namespace vaec {

NormStats compute_stats(const std::vector<Patch>& patches) {
    if (patches.empty()) throw EmptyInputError("compute_stats: no patches");

    Eigen::Vector3d sum = Eigen::Vector3d::Zero();
    Eigen::Vector3d sumsq = Eigen::Vector3d::Zero();
    double n = 0.0;
    for (const auto& p : patches) {
        if (!p.well_formed()) throw ShapeError("compute_stats: malformed patch");
        sum += p.pixels.cast<double>().rowwise().sum();
        sumsq += p.pixels.cast<double>().array().square().matrix().rowwise().sum();
        n += static_cast<double>(p.pixels.cols());
    }

    const Eigen::Vector3d mean = sum / n;
    const Eigen::Vector3d var = (sumsq / n - mean.cwiseProduct(mean)).cwiseMax(0.0);

    NormStats stats;
    stats.mean = mean.cast<float>();
    stats.std = var.cwiseSqrt().cast<float>();
    for (int c = 0; c < 3; ++c)
        if (stats.std[c] <= 0.0f)
            throw DegenerateStatsError("compute_stats: zero variance in channel " +
                                       std::to_string(c));
    return stats;
}

Patch normalize(const Patch& patch, const NormStats& stats) {
    if (!stats.valid()) throw DegenerateStatsError("normalize: invalid stats");
    Patch out = patch;
    for (int c = 0; c < 3; ++c)
        out.pixels.row(c) = (patch.pixels.row(c).array() - stats.mean[c]) / stats.std[c];
    return out;
}

Patch denormalize(const Patch& patch, const NormStats& stats) {
    if (!stats.valid()) throw DegenerateStatsError("denormalize: invalid stats");
    Patch out = patch;
    for (int c = 0; c < 3; ++c)
        out.pixels.row(c) = patch.pixels.row(c).array() * stats.std[c] + stats.mean[c];
    return out;
}

void save_stats(const std::filesystem::path& path, const NormStats& stats) {
    nlohmann::json j;
    j["mean"] = {stats.mean[0], stats.mean[1], stats.mean[2]};
    j["std"] = {stats.std[0], stats.std[1], stats.std[2]};
    std::ofstream f(path);
    if (!f) throw IoError("cannot write " + path.string());
    f << j.dump(2) << "\n";
}

NormStats load_stats(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open " + path.string());
    nlohmann::json j;
    try {
        f >> j;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("bad stats file " + path.string() + ": " + e.what());
    }
    NormStats stats;
    for (int c = 0; c < 3; ++c) {
        stats.mean[c] = j.at("mean").at(c).get<float>();
        stats.std[c] = j.at("std").at(c).get<float>();
    }
    if (!stats.valid()) throw DegenerateStatsError("stats file holds invalid values");
    return stats;
}

} // namespace vaec
