#include "vaec/slide_io.hpp"

#include <algorithm>
#include <cctype>
#include <map>

#include "vaec/core/image_io.hpp"

namespace vaec {

Patch patch_from_u8(const ImageU8& region, int origin_x, int origin_y, std::string slide_id) {
    if (region.width != region.height || region.width <= 0)
        throw ShapeError("patch region must be square and non-empty");
    Patch p;
    p.size = region.width;
    p.origin_x = origin_x;
    p.origin_y = origin_y;
    p.slide_id = std::move(slide_id);
    p.pixels.resize(3, static_cast<long>(p.size) * p.size);
    for (long j = 0; j < p.pixels.cols(); ++j)
        for (int c = 0; c < 3; ++c) p.pixels(c, j) = region.rgb[3 * j + c] / 255.0f;
    return p;
}

ImageU8 patch_to_u8(const Patch& patch) {
    ImageU8 out(patch.size, patch.size);
    for (long j = 0; j < patch.pixels.cols(); ++j)
        for (int c = 0; c < 3; ++c) {
            const float v = std::clamp(patch.pixels(c, j) * 255.0f, 0.0f, 255.0f);
            out.rgb[3 * j + c] = static_cast<std::uint8_t>(std::lround(v));
        }
    return out;
}

namespace {

class RasterSlideReader final : public SlideReader {
public:
    explicit RasterSlideReader(ImageU8 img) : img_(std::move(img)) {}
    int width() const override { return img_.width; }
    int height() const override { return img_.height; }
    ImageU8 read_region(int x, int y, int w, int h) const override {
        if (x < 0 || y < 0 || w <= 0 || h <= 0 || x + w > img_.width || y + h > img_.height)
            throw ShapeError("region read out of bounds");
        ImageU8 out(w, h);
        for (int r = 0; r < h; ++r)
            std::copy_n(&img_.rgb[(static_cast<std::size_t>(y + r) * img_.width + x) * 3],
                        static_cast<std::size_t>(w) * 3, &out.rgb[static_cast<std::size_t>(r) * w * 3]);
        return out;
    }

private:
    ImageU8 img_;
};

std::map<std::string, SlideReaderFactory>& reader_registry() {
    static std::map<std::string, SlideReaderFactory> reg;
    return reg;
}

std::string lower_ext(const std::filesystem::path& path) {
    auto ext = path.extension().string();
    for (auto& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return ext;
}

} // namespace

void register_slide_reader(const std::string& extension, SlideReaderFactory factory) {
    reader_registry()[extension] = std::move(factory);
}

SlideHandle open_slide(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw IoError("no such file: " + path.string());

    std::shared_ptr<const SlideReader> reader;
    const auto it = reader_registry().find(lower_ext(path));
    if (it != reader_registry().end())
        reader = it->second(path);
    else
        reader = std::make_shared<RasterSlideReader>(read_image(path));

    SlideHandle handle;
    handle.source_path = path.string();
    handle.slide_id = path.stem().string();
    handle.width = reader->width();
    handle.height = reader->height();
    handle.channels = 3;
    handle.reader = std::move(reader);
    return handle;
}

bool is_whitespace(const Patch& patch, int white_level, double white_fraction) {
    const float threshold = static_cast<float>(white_level) / 255.0f;
    const long n = patch.pixels.cols();
    long white = 0;
    for (long j = 0; j < n; ++j)
        if (patch.pixels(0, j) > threshold && patch.pixels(1, j) > threshold &&
            patch.pixels(2, j) > threshold)
            ++white;
    return static_cast<double>(white) / static_cast<double>(n) >= white_fraction;
}

namespace {

struct Box {
    int x, y, size;
};

bool boxes_intersect(const Box& a, const Box& b) {
    return !(a.x + a.size <= b.x || b.x + b.size <= a.x || a.y + a.size <= b.y ||
             b.y + b.size <= a.y);
}

} // namespace

std::vector<Patch> sample_patches(const SlideHandle& slide, int count, int patch_size,
                                  std::uint64_t seed, const SampleOptions& opts) {
    if (count < 0) throw ConfigError("negative patch count");
    if (patch_size <= 0) throw ConfigError("patch size must be positive");
    if (count == 0) return {};
    if (slide.width < patch_size || slide.height < patch_size)
        throw SamplingExhaustedError(0, count);

    Rng rng(seed);
    const std::uint64_t span_x = static_cast<std::uint64_t>(slide.width - patch_size) + 1;
    const std::uint64_t span_y = static_cast<std::uint64_t>(slide.height - patch_size) + 1;
    const long budget = static_cast<long>(opts.max_attempts_per_patch) * count;

    std::vector<Patch> accepted;
    std::vector<Box> boxes;
    accepted.reserve(count);
    for (long attempt = 0; attempt < budget && static_cast<int>(accepted.size()) < count;
         ++attempt) {
        const int x = static_cast<int>(rng.uniform_int(span_x));
        const int y = static_cast<int>(rng.uniform_int(span_y));
        const Box candidate{x, y, patch_size};
        const bool overlaps = std::any_of(boxes.begin(), boxes.end(), [&](const Box& b) {
            return boxes_intersect(candidate, b);
        });
        if (overlaps) continue;

        Patch p = patch_from_u8(slide.reader->read_region(x, y, patch_size, patch_size), x, y,
                                slide.slide_id);
        if (is_whitespace(p, opts.white_level, opts.white_fraction)) continue;
        boxes.push_back(candidate);
        accepted.push_back(std::move(p));
    }
    if (static_cast<int>(accepted.size()) < count)
        throw SamplingExhaustedError(static_cast<int>(accepted.size()), count);
    return accepted;
}

namespace {

// Folds an index into [0, n) by reflecting at both ends (period 2n), so the
// padded border mirrors the image content for any padding amount.
inline int mirror_index(int i, int n) {
    if (n == 1) return 0;
    const int period = 2 * n;
    int j = i % period;
    if (j < 0) j += period;
    return j < n ? j : period - 1 - j;
}

template <typename GetPixel>
TileGrid tile_impl(int width, int height, int patch_size, GetPixel&& pixel) {
    if (width <= 0 || height <= 0) throw ShapeError("cannot tile an empty image");
    if (patch_size <= 0) throw ConfigError("patch size must be positive");

    TileGrid grid;
    grid.patch_size = patch_size;
    grid.original_width = width;
    grid.original_height = height;
    grid.cols = (width + patch_size - 1) / patch_size;
    grid.rows = (height + patch_size - 1) / patch_size;
    grid.patches.reserve(static_cast<std::size_t>(grid.rows) * grid.cols);

    for (int gr = 0; gr < grid.rows; ++gr)
        for (int gc = 0; gc < grid.cols; ++gc) {
            Patch p;
            p.size = patch_size;
            p.origin_x = gc * patch_size;
            p.origin_y = gr * patch_size;
            p.pixels.resize(3, static_cast<long>(patch_size) * patch_size);
            for (int py = 0; py < patch_size; ++py) {
                const int sy = mirror_index(gr * patch_size + py, height);
                for (int px = 0; px < patch_size; ++px) {
                    const int sx = mirror_index(gc * patch_size + px, width);
                    const long col = static_cast<long>(py) * patch_size + px;
                    for (int c = 0; c < 3; ++c) p.pixels(c, col) = pixel(sx, sy, c);
                }
            }
            grid.patches.push_back(std::move(p));
        }
    return grid;
}

} // namespace

TileGrid tile_slide(const ImageU8& image, int patch_size) {
    return tile_impl(image.width, image.height, patch_size,
                     [&](int x, int y, int c) { return image.at(x, y, c) / 255.0f; });
}

TileGrid tile_slide(const ImageF& image, int patch_size) {
    return tile_impl(image.width, image.height, patch_size, [&](int x, int y, int c) {
        return image.pixels(c, static_cast<long>(y) * image.width + x);
    });
}

ImageF stitch(const TileGrid& grid) {
    if (grid.rows <= 0 || grid.cols <= 0 || grid.patch_size <= 0)
        throw MalformedGridError("empty tile grid");
    if (grid.patches.size() != static_cast<std::size_t>(grid.rows) * grid.cols)
        throw MalformedGridError("patch count does not match grid dimensions");
    if (grid.original_width <= 0 || grid.original_height <= 0 ||
        grid.cols * grid.patch_size < grid.original_width ||
        grid.rows * grid.patch_size < grid.original_height)
        throw MalformedGridError("grid does not cover the original dimensions");

    ImageF out(grid.original_width, grid.original_height);
    const int P = grid.patch_size;
    for (int gr = 0; gr < grid.rows; ++gr)
        for (int gc = 0; gc < grid.cols; ++gc) {
            const Patch& p = grid.patches[static_cast<std::size_t>(gr) * grid.cols + gc];
            if (p.size != P || !p.well_formed())
                throw MalformedGridError("patch shape does not match grid patch size");
            const int y_lim = std::min(P, grid.original_height - gr * P);
            const int x_lim = std::min(P, grid.original_width - gc * P);
            for (int py = 0; py < y_lim; ++py)
                for (int px = 0; px < x_lim; ++px) {
                    const long src = static_cast<long>(py) * P + px;
                    const long dst =
                        static_cast<long>(gr * P + py) * grid.original_width + gc * P + px;
                    out.pixels.col(dst) = p.pixels.col(src);
                }
        }
    return out;
}

} // namespace vaec
