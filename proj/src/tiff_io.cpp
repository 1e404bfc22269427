#include <cctype>
#include <cstring>
#include <fstream>
#include <map>

#include "vaec/core/image_io.hpp"

// Hand-rolled baseline TIFF codec. The sandboxed toolchain has no libtiff,
// and the profile we need (uncompressed chunky RGB8) is a small, fixed subset
// of the format.

namespace vaec {

namespace {

struct IfdEntry {
    std::uint16_t type = 0;
    std::uint32_t count = 0;
    std::uint32_t value_or_offset = 0; // raw 4 bytes, endian-resolved
};

class ByteReader {
public:
    ByteReader(std::vector<std::uint8_t> bytes, const std::string& name)
        : bytes_(std::move(bytes)), name_(name) {}

    void set_big_endian(bool be) { big_endian_ = be; }
    std::size_t size() const { return bytes_.size(); }
    const std::uint8_t* data() const { return bytes_.data(); }

    std::uint16_t u16(std::size_t off) const {
        check(off, 2);
        return big_endian_ ? static_cast<std::uint16_t>(bytes_[off] << 8 | bytes_[off + 1])
                           : static_cast<std::uint16_t>(bytes_[off + 1] << 8 | bytes_[off]);
    }
    std::uint32_t u32(std::size_t off) const {
        check(off, 4);
        if (big_endian_)
            return (std::uint32_t(bytes_[off]) << 24) | (std::uint32_t(bytes_[off + 1]) << 16) |
                   (std::uint32_t(bytes_[off + 2]) << 8) | std::uint32_t(bytes_[off + 3]);
        return (std::uint32_t(bytes_[off + 3]) << 24) | (std::uint32_t(bytes_[off + 2]) << 16) |
               (std::uint32_t(bytes_[off + 1]) << 8) | std::uint32_t(bytes_[off]);
    }

private:
    void check(std::size_t off, std::size_t n) const {
        if (off + n > bytes_.size()) throw FormatError("truncated TIFF: " + name_);
    }
    std::vector<std::uint8_t> bytes_;
    std::string name_;
    bool big_endian_ = false;
};

std::uint32_t entry_scalar(const ByteReader& r, const IfdEntry& e, std::size_t value_field_off) {
    // SHORT (3) and LONG (4) single values live inline in the value field.
    if (e.type == 3) return r.u16(value_field_off);
    return r.u32(value_field_off);
}

// Reads `count` SHORT/LONG values, inline or via offset.
std::vector<std::uint32_t> entry_values(const ByteReader& r, const IfdEntry& e,
                                        std::size_t value_field_off) {
    std::vector<std::uint32_t> out;
    const std::size_t elem = (e.type == 3) ? 2 : 4;
    const std::size_t total = elem * e.count;
    std::size_t base = (total <= 4) ? value_field_off : r.u32(value_field_off);
    for (std::uint32_t i = 0; i < e.count; ++i)
        out.push_back(e.type == 3 ? r.u16(base + elem * i) : r.u32(base + elem * i));
    return out;
}

} // namespace

ImageU8 read_tiff(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                                    std::istreambuf_iterator<char>());
    ByteReader r(std::move(bytes), path.string());
    if (r.size() < 8) throw FormatError("truncated TIFF: " + path.string());

    const std::uint8_t* d = r.data();
    if (d[0] == 'I' && d[1] == 'I')
        r.set_big_endian(false);
    else if (d[0] == 'M' && d[1] == 'M')
        r.set_big_endian(true);
    else
        throw FormatError("not a TIFF file: " + path.string());
    if (r.u16(2) != 42) throw FormatError("bad TIFF magic: " + path.string());

    const std::uint32_t ifd_off = r.u32(4);
    const std::uint16_t n_entries = r.u16(ifd_off);
    std::map<std::uint16_t, std::pair<IfdEntry, std::size_t>> tags; // tag -> (entry, value field offset)
    for (std::uint16_t i = 0; i < n_entries; ++i) {
        const std::size_t off = ifd_off + 2 + 12 * static_cast<std::size_t>(i);
        IfdEntry e;
        const std::uint16_t tag = r.u16(off);
        e.type = r.u16(off + 2);
        e.count = r.u32(off + 4);
        tags[tag] = {e, off + 8};
    }

    auto scalar = [&](std::uint16_t tag, std::uint32_t fallback,
                      bool required) -> std::uint32_t {
        auto it = tags.find(tag);
        if (it == tags.end()) {
            if (required) throw FormatError("TIFF missing tag " + std::to_string(tag));
            return fallback;
        }
        return entry_scalar(r, it->second.first, it->second.second);
    };

    const std::uint32_t width = scalar(256, 0, true);
    const std::uint32_t height = scalar(257, 0, true);
    const std::uint32_t compression = scalar(259, 1, false);
    const std::uint32_t photometric = scalar(262, 2, false);
    const std::uint32_t samples = scalar(277, 1, false);
    const std::uint32_t rows_per_strip = scalar(278, height, false);
    const std::uint32_t planar = scalar(284, 1, false);

    if (compression != 1) throw UnsupportedFormatError("only uncompressed TIFF supported");
    if (planar != 1) throw UnsupportedFormatError("only chunky TIFF supported");
    if (samples != 3 || photometric != 2)
        throw UnsupportedFormatError("TIFF is not 3-sample RGB: " + path.string());
    {
        auto it = tags.find(258); // BitsPerSample
        if (it != tags.end())
            for (auto b : entry_values(r, it->second.first, it->second.second))
                if (b != 8) throw UnsupportedFormatError("only 8-bit TIFF supported");
    }

    auto offs_it = tags.find(273);
    auto counts_it = tags.find(279);
    if (offs_it == tags.end() || counts_it == tags.end())
        throw FormatError("TIFF missing strip layout");
    const auto strip_offsets = entry_values(r, offs_it->second.first, offs_it->second.second);
    const auto strip_counts = entry_values(r, counts_it->second.first, counts_it->second.second);
    if (strip_offsets.size() != strip_counts.size())
        throw FormatError("TIFF strip table mismatch");

    ImageU8 out(static_cast<int>(width), static_cast<int>(height));
    const std::size_t row_bytes = static_cast<std::size_t>(width) * 3;
    std::size_t written = 0;
    for (std::size_t s = 0; s < strip_offsets.size(); ++s) {
        const std::size_t expect =
            row_bytes * std::min<std::size_t>(rows_per_strip, height - written / row_bytes);
        if (strip_counts[s] != expect || strip_offsets[s] + expect > r.size())
            throw FormatError("TIFF strip out of bounds");
        std::memcpy(out.rgb.data() + written, r.data() + strip_offsets[s], expect);
        written += expect;
    }
    if (written != out.rgb.size()) throw FormatError("TIFF pixel data incomplete");
    return out;
}

void write_tiff(const std::filesystem::path& path, const ImageU8& img) {
    if (img.width <= 0 || img.height <= 0) throw IoError("refusing to write empty image");
    std::vector<std::uint8_t> out;
    auto put16 = [&](std::uint16_t v) {
        out.push_back(v & 0xff);
        out.push_back((v >> 8) & 0xff);
    };
    auto put32 = [&](std::uint32_t v) {
        for (int i = 0; i < 4; ++i) out.push_back((v >> (8 * i)) & 0xff);
    };

    // header, pixel strip, then one IFD
    out.push_back('I');
    out.push_back('I');
    put16(42);
    const std::uint32_t pixels_off = 8;
    const auto strip_len = static_cast<std::uint32_t>(img.rgb.size());
    const std::uint32_t bps_off = pixels_off + strip_len; // BitsPerSample triple
    const std::uint32_t ifd_off = bps_off + 6;
    put32(ifd_off);
    out.insert(out.end(), img.rgb.begin(), img.rgb.end());
    put16(8);
    put16(8);
    put16(8);

    struct Tag {
        std::uint16_t tag, type;
        std::uint32_t count, value;
    };
    const Tag tags[] = {
        {256, 4, 1, static_cast<std::uint32_t>(img.width)},
        {257, 4, 1, static_cast<std::uint32_t>(img.height)},
        {258, 3, 3, bps_off},
        {259, 3, 1, 1}, // uncompressed
        {262, 3, 1, 2}, // RGB
        {273, 4, 1, pixels_off},
        {277, 3, 1, 3},
        {278, 4, 1, static_cast<std::uint32_t>(img.height)},
        {279, 4, 1, strip_len},
        {284, 3, 1, 1}, // chunky
    };
    put16(static_cast<std::uint16_t>(std::size(tags)));
    for (const auto& t : tags) {
        put16(t.tag);
        put16(t.type);
        put32(t.count);
        if (t.type == 3 && t.count == 1) {
            put16(static_cast<std::uint16_t>(t.value));
            put16(0);
        } else {
            put32(t.value);
        }
    }
    put32(0); // no next IFD

    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot write " + path.string());
    f.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
    if (!f) throw IoError("short write: " + path.string());
}

ImageU8 read_image(const std::filesystem::path& path) {
    auto ext = path.extension().string();
    for (auto& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (ext == ".png") return read_png(path);
    if (ext == ".tif" || ext == ".tiff") return read_tiff(path);

    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open " + path.string());
    char magic[4] = {};
    f.read(magic, 4);
    if (f.gcount() >= 4 && static_cast<unsigned char>(magic[0]) == 0x89 && magic[1] == 'P')
        return read_png(path);
    if (f.gcount() >= 2 && ((magic[0] == 'I' && magic[1] == 'I') || (magic[0] == 'M' && magic[1] == 'M')))
        return read_tiff(path);
    throw UnsupportedFormatError("unrecognized raster format: " + path.string());
}

void write_image(const std::filesystem::path& path, const ImageU8& img) {
    auto ext = path.extension().string();
    for (auto& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (ext == ".tif" || ext == ".tiff") {
        write_tiff(path, img);
        return;
    }
    write_png(path, img);
}

} // namespace vaec
