#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "vaec/core/image.hpp"
#include "vaec/core/rng.hpp"

namespace vaec {

/// One training/inference unit: a square RGB patch with its slide coordinates.
/// Pixel storage matches the network's activation layout: 3 x size*size,
/// column j = y*size + x, values in raw pixel units ([0,1]) until normalized.
struct Patch {
    int size = 0;
    int origin_x = 0;
    int origin_y = 0;
    std::string slide_id;
    Matf pixels; // 3 x size*size

    bool well_formed() const {
        return size > 0 && pixels.rows() == 3 && pixels.cols() == static_cast<long>(size) * size;
    }
};

Patch patch_from_u8(const ImageU8& region, int origin_x, int origin_y, std::string slide_id);
ImageU8 patch_to_u8(const Patch& patch); // clamps + rounds (export only)

/// Region-read interface over a slide source. Plain rasters load eagerly;
/// pyramid formats (.svs) can plug in via register_slide_reader.
class SlideReader {
public:
    virtual ~SlideReader() = default;
    virtual int width() const = 0;
    virtual int height() const = 0;
    virtual ImageU8 read_region(int x, int y, int w, int h) const = 0;
};

using SlideReaderFactory =
    std::function<std::unique_ptr<SlideReader>(const std::filesystem::path&)>;

/// Registers a reader for an extension (e.g. ".svs"). Overrides any previous
/// registration for that extension.
void register_slide_reader(const std::string& extension, SlideReaderFactory factory);

struct SlideHandle {
    std::string source_path;
    std::string slide_id;
    int width = 0;
    int height = 0;
    int channels = 3;
    std::shared_ptr<const SlideReader> reader;
};

/// Opens an RGB raster (PNG/TIFF, or any registered adapter format).
SlideHandle open_slide(const std::filesystem::path& path);

/// Background test: true iff at least `white_fraction` of the pixels have all
/// three channels strictly above `white_level` (0-255 scale).
bool is_whitespace(const Patch& patch, int white_level = 220, double white_fraction = 0.5);

struct SampleOptions {
    int white_level = 220;
    double white_fraction = 0.5;
    int max_attempts_per_patch = 100;
};

/// Rejection-samples `count` non-overlapping, non-blank patches. Deterministic
/// for a fixed seed. Throws SamplingExhaustedError when the attempt budget
/// (max_attempts_per_patch * count draws) runs out first.
std::vector<Patch> sample_patches(const SlideHandle& slide, int count, int patch_size,
                                  std::uint64_t seed, const SampleOptions& opts = {});

struct TileGrid {
    int rows = 0;
    int cols = 0;
    int patch_size = 0;
    int original_width = 0;
    int original_height = 0;
    std::vector<Patch> patches; // row-major
};

/// Fully tiles an image, reflect-padding the right/bottom edges up to the next
/// multiple of patch_size.
TileGrid tile_slide(const ImageU8& image, int patch_size);
TileGrid tile_slide(const ImageF& image, int patch_size);

/// Places patches back on the grid and crops to the original dimensions.
/// No clamping here; use to_u8 at export time.
ImageF stitch(const TileGrid& grid);

} // namespace vaec
