#pragma once

#include <array>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include <zlib.h>

#include "v2v/errors.hpp"
#include "v2v/raster.hpp"

namespace v2v {

namespace detail {

inline uint32_t crc32_png(const uint8_t* data, size_t len, uint32_t crc = 0xffffffffu) {
    static const auto table = [] {
        std::array<uint32_t, 256> t{};
        for (uint32_t n = 0; n < 256; ++n) {
            uint32_t c = n;
            for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xedb88320u ^ (c >> 1) : c >> 1;
            t[n] = c;
        }
        return t;
    }();
    for (size_t i = 0; i < len; ++i) crc = table[(crc ^ data[i]) & 0xffu] ^ (crc >> 8);
    return crc;
}

inline void put_u32_be(std::vector<uint8_t>& out, uint32_t v) {
    out.push_back(static_cast<uint8_t>(v >> 24));
    out.push_back(static_cast<uint8_t>(v >> 16));
    out.push_back(static_cast<uint8_t>(v >> 8));
    out.push_back(static_cast<uint8_t>(v));
}

inline void put_chunk(std::vector<uint8_t>& out, const char type[4], const std::vector<uint8_t>& payload) {
    put_u32_be(out, static_cast<uint32_t>(payload.size()));
    const size_t crc_start = out.size();
    out.insert(out.end(), type, type + 4);
    out.insert(out.end(), payload.begin(), payload.end());
    const uint32_t crc = crc32_png(out.data() + crc_start, out.size() - crc_start) ^ 0xffffffffu;
    put_u32_be(out, crc);
}

}  // namespace detail

/// Encode as 8-bit RGB PNG. The zlib stream uses stored (uncompressed)
/// deflate blocks and filter 0 on every row, so identical pixels always
/// produce identical bytes regardless of any compression library version.
inline std::vector<uint8_t> encode_png(const RasterImage& img) {
    if (img.empty()) fail(ErrorKind::dimension, "cannot encode an empty image");
    std::vector<uint8_t> out;
    static const uint8_t sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
    out.insert(out.end(), sig, sig + 8);

    std::vector<uint8_t> ihdr;
    detail::put_u32_be(ihdr, static_cast<uint32_t>(img.width()));
    detail::put_u32_be(ihdr, static_cast<uint32_t>(img.height()));
    ihdr.push_back(8);   // bit depth
    ihdr.push_back(2);   // color type: truecolor
    ihdr.push_back(0);   // compression
    ihdr.push_back(0);   // filter method
    ihdr.push_back(0);   // not interlaced
    detail::put_chunk(out, "IHDR", ihdr);

    // Raw scanlines: filter byte 0 + RGB row.
    const size_t stride = static_cast<size_t>(img.width()) * 3;
    std::vector<uint8_t> raw;
    raw.reserve((stride + 1) * img.height());
    for (int y = 0; y < img.height(); ++y) {
        raw.push_back(0);
        const uint8_t* row = img.pixels().data() + static_cast<size_t>(y) * stride;
        raw.insert(raw.end(), row, row + stride);
    }

    // zlib wrapper with stored deflate blocks (max 65535 bytes each).
    std::vector<uint8_t> z;
    z.push_back(0x78);
    z.push_back(0x01);
    size_t off = 0;
    while (off < raw.size() || raw.empty()) {
        const size_t n = std::min<size_t>(65535, raw.size() - off);
        const bool final = (off + n == raw.size());
        z.push_back(final ? 1 : 0);
        z.push_back(static_cast<uint8_t>(n & 0xff));
        z.push_back(static_cast<uint8_t>(n >> 8));
        z.push_back(static_cast<uint8_t>(~n & 0xff));
        z.push_back(static_cast<uint8_t>((~n >> 8) & 0xff));
        z.insert(z.end(), raw.begin() + off, raw.begin() + off + n);
        off += n;
        if (final) break;
    }
    uint32_t s1 = 1, s2 = 0;
    for (uint8_t byte : raw) {
        s1 = (s1 + byte) % 65521;
        s2 = (s2 + s1) % 65521;
    }
    detail::put_u32_be(z, (s2 << 16) | s1);

    detail::put_chunk(out, "IDAT", z);
    detail::put_chunk(out, "IEND", {});
    return out;
}

inline size_t write_png(const RasterImage& img, const std::string& path) {
    const std::vector<uint8_t> bytes = encode_png(img);
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) fail(ErrorKind::io, "cannot open '" + path + "' for writing");
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!f) fail(ErrorKind::io, "write failed for '" + path + "'");
    return bytes.size();
}

/// Decode an 8-bit non-interlaced PNG (gray, RGB, or RGBA; alpha dropped,
/// gray replicated). Covers everything this library writes plus common
/// externally produced pages.
inline RasterImage decode_png(const std::vector<uint8_t>& bytes, const std::string& context = "<memory>") {
    auto bad = [&](const std::string& why) -> void { fail(ErrorKind::io, "png '" + context + "': " + why); };
    static const uint8_t sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
    if (bytes.size() < 8 + 25 || std::memcmp(bytes.data(), sig, 8) != 0) bad("not a png file");

    auto u32 = [&](size_t off) {
        return (uint32_t(bytes[off]) << 24) | (uint32_t(bytes[off + 1]) << 16) |
               (uint32_t(bytes[off + 2]) << 8) | uint32_t(bytes[off + 3]);
    };

    uint32_t width = 0, height = 0;
    int color_type = -1;
    std::vector<uint8_t> idat;
    size_t pos = 8;
    while (pos + 8 <= bytes.size()) {
        const uint32_t len = u32(pos);
        if (pos + 12 + len > bytes.size()) bad("truncated chunk");
        const std::string type(reinterpret_cast<const char*>(bytes.data() + pos + 4), 4);
        const uint8_t* payload = bytes.data() + pos + 8;
        const uint32_t want_crc =
            detail::crc32_png(bytes.data() + pos + 4, 4 + size_t(len)) ^ 0xffffffffu;
        if (u32(pos + 8 + len) != want_crc) bad("chunk crc mismatch in " + type);
        if (type == "IHDR") {
            width = u32(pos + 8);
            height = u32(pos + 12);
            const int bit_depth = payload[8];
            color_type = payload[9];
            if (bit_depth != 8) bad("only 8-bit depth supported");
            if (color_type != 0 && color_type != 2 && color_type != 6) bad("unsupported color type");
            if (payload[12] != 0) bad("interlaced png not supported");
        } else if (type == "IDAT") {
            idat.insert(idat.end(), payload, payload + len);
        } else if (type == "IEND") {
            break;
        }
        pos += 12 + len;
    }
    if (width == 0 || height == 0 || color_type < 0) bad("missing IHDR");
    const int channels = color_type == 0 ? 1 : (color_type == 2 ? 3 : 4);
    const size_t stride = static_cast<size_t>(width) * channels;
    std::vector<uint8_t> raw((stride + 1) * height);

    uLongf out_len = static_cast<uLongf>(raw.size());
    const int rc = uncompress(raw.data(), &out_len, idat.data(), static_cast<uLong>(idat.size()));
    if (rc != Z_OK || out_len != raw.size()) bad("zlib inflate failed");

    RasterImage img(static_cast<int>(width), static_cast<int>(height), Rgb{0, 0, 0});
    std::vector<uint8_t> prev(stride, 0), cur(stride, 0);
    const int bpp = channels;
    for (uint32_t y = 0; y < height; ++y) {
        const uint8_t* line = raw.data() + static_cast<size_t>(y) * (stride + 1);
        const uint8_t filter = line[0];
        const uint8_t* src = line + 1;
        for (size_t x = 0; x < stride; ++x) {
            const int a = x >= static_cast<size_t>(bpp) ? cur[x - bpp] : 0;
            const int b = prev[x];
            const int c = x >= static_cast<size_t>(bpp) ? prev[x - bpp] : 0;
            int v = src[x];
            switch (filter) {
                case 0: break;
                case 1: v += a; break;
                case 2: v += b; break;
                case 3: v += (a + b) / 2; break;
                case 4: {
                    const int p = a + b - c;
                    const int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
                    v += (pa <= pb && pa <= pc) ? a : (pb <= pc ? b : c);
                    break;
                }
                default: bad("unknown filter type");
            }
            cur[x] = static_cast<uint8_t>(v);
        }
        for (uint32_t x = 0; x < width; ++x) {
            Rgb px;
            if (channels == 1) {
                px = Rgb{cur[x], cur[x], cur[x]};
            } else {
                px = Rgb{cur[x * channels], cur[x * channels + 1], cur[x * channels + 2]};
            }
            img.set(static_cast<int>(x), static_cast<int>(y), px);
        }
        std::swap(prev, cur);
    }
    return img;
}

inline RasterImage read_png(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) fail(ErrorKind::io, "cannot open '" + path + "' for reading");
    std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return decode_png(bytes, path);
}

}  // namespace v2v
