#pragma once

#include <filesystem>
#include <optional>

#include "vaec/vae.hpp"

namespace vaec {

/// Model checkpoint: "VAEM" magic, version, JSON config block (including the
/// training NormStats when present), then named float32 tensors, all
/// little-endian. A human-readable config sidecar goes next to the binary.
void save_checkpoint(const std::filesystem::path& path, const VaeModel<float>& model,
                     const std::optional<NormStats>& stats);

struct LoadedCheckpoint {
    VaeModel<float> model;
    std::optional<NormStats> stats;
};

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

/// Writes `<path>` as a JSON sidecar describing a VaeConfig.
void save_config_sidecar(const std::filesystem::path& path, const VaeConfig& cfg,
                         const std::optional<NormStats>& stats);

} // namespace vaec
