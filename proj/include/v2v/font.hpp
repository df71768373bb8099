#pragma once

#include <array>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "v2v/errors.hpp"
#include "v2v/font_data.hpp"
#include "v2v/raster.hpp"

namespace v2v {

constexpr int kGlyphCell = 8;  // base cell is 8x8 pixels

struct Glyph {
    std::array<uint8_t, kGlyphCell> rows{};  // bit 7 = leftmost column
    int advance = 0;
};

/// Fixed bitmap font over printable ASCII, loaded from the plain-text glyph
/// table. Scaling to a target font size is integer nearest-neighbor, so a
/// font size must be a multiple of the base cell.
class GlyphSet {
public:
    static GlyphSet from_table_text(std::string_view text) {
        GlyphSet gs;
        std::istringstream in{std::string(text)};
        std::string line;
        int pending = -1;
        int row = 0;
        Glyph cur{};
        int line_no = 0;
        auto flush = [&] {
            if (pending >= 0) {
                if (row != kGlyphCell)
                    fail(ErrorKind::io, "glyph table: incomplete bitmap for codepoint " +
                                            std::to_string(pending));
                gs.glyphs_[pending - 0x20] = cur;
                gs.present_[pending - 0x20] = true;
            }
            pending = -1;
            row = 0;
            cur = Glyph{};
        };
        while (std::getline(in, line)) {
            ++line_no;
            if (line.empty() || line[0] == '#') {
                // '#' only starts a comment outside of bitmap rows
                if (pending >= 0 && !line.empty() && row < kGlyphCell) {
                    // fall through: this is a bitmap row beginning with '#'
                } else {
                    continue;
                }
            }
            if (line.rfind("glyph ", 0) == 0) {
                flush();
                unsigned code = 0;
                int adv = -1;
                if (std::sscanf(line.c_str(), "glyph 0x%x advance %d", &code, &adv) != 2 ||
                    code < 0x20 || code > 0x7E || adv < 1)
                    fail(ErrorKind::io, "glyph table: bad record header at line " +
                                            std::to_string(line_no));
                pending = static_cast<int>(code);
                cur.advance = adv;
                continue;
            }
            if (pending < 0) fail(ErrorKind::io, "glyph table: stray row at line " + std::to_string(line_no));
            if (line.size() < kGlyphCell)
                fail(ErrorKind::io, "glyph table: short bitmap row at line " + std::to_string(line_no));
            uint8_t bits = 0;
            for (int x = 0; x < kGlyphCell; ++x)
                if (line[x] == '#') bits |= static_cast<uint8_t>(0x80u >> x);
            cur.rows[row++] = bits;
            if (row == kGlyphCell) flush();
        }
        flush();
        for (int c = 0x20; c <= 0x7E; ++c)
            if (!gs.present_[c - 0x20])
                fail(ErrorKind::io, "glyph table: missing codepoint " + std::to_string(c));
        return gs;
    }

    static GlyphSet load(const std::string& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) fail(ErrorKind::io, "cannot open glyph table '" + path + "'");
        std::ostringstream ss;
        ss << in.rdbuf();
        return from_table_text(ss.str());
    }

    static const GlyphSet& builtin() {
        static const GlyphSet gs = from_table_text(detail::kGlyphTable);
        return gs;
    }

    bool has(char c) const { return c >= 0x20 && c <= 0x7E; }

    const Glyph& glyph(char c) const {
        if (!has(c))
            fail(ErrorKind::unsupported_glyph,
                 "no glyph for codepoint " + std::to_string(int(static_cast<unsigned char>(c))));
        return glyphs_[c - 0x20];
    }

    /// Components of a glyph bitmap under 4-connectivity; counting pages
    /// need marks that render as a single component.
    int glyph_component_count(char c) const {
        const Glyph& g = glyph(c);
        RasterImage tmp(kGlyphCell, kGlyphCell, Rgb{255, 255, 255});
        for (int y = 0; y < kGlyphCell; ++y)
            for (int x = 0; x < kGlyphCell; ++x)
                if (g.rows[y] & (0x80u >> x)) tmp.set(x, y, Rgb{0, 0, 0});
        return connected_components(tmp, [](Rgb p) { return p == Rgb{0, 0, 0}; });
    }

private:
    std::array<Glyph, 95> glyphs_{};
    std::array<bool, 95> present_{};
};

inline int glyph_scale_for(int font_size) {
    if (font_size < kGlyphCell || font_size % kGlyphCell != 0)
        fail(ErrorKind::font_size, "font size " + std::to_string(font_size) +
                                       " is not a positive multiple of the base cell (" +
                                       std::to_string(kGlyphCell) + ")");
    return font_size / kGlyphCell;
}

/// Total horizontal advance of `text` at `font_size`, from the metric table.
inline int text_advance(const GlyphSet& gs, std::string_view text, int font_size) {
    const int scale = glyph_scale_for(font_size);
    int adv = 0;
    for (char c : text) adv += gs.glyph(c).advance * scale;
    return adv;
}

/// Rasterize `text` left-to-right with the cell's top-left at `origin`.
/// Pixels outside the canvas are clipped. Returns the total advance.
inline int draw_text(RasterImage& canvas, std::string_view text, int origin_x, int origin_y,
                     int font_size, Rgb color, const GlyphSet& gs = GlyphSet::builtin()) {
    const int scale = glyph_scale_for(font_size);
    int pen_x = origin_x;
    for (char c : text) {
        const Glyph& g = gs.glyph(c);
        for (int gy = 0; gy < kGlyphCell; ++gy) {
            const uint8_t bits = g.rows[gy];
            if (!bits) continue;
            for (int gx = 0; gx < kGlyphCell; ++gx) {
                if (!(bits & (0x80u >> gx))) continue;
                fill_rect(canvas, pen_x + gx * scale, origin_y + gy * scale, scale, scale, color);
            }
        }
        pen_x += g.advance * scale;
    }
    return pen_x - origin_x;
}

}  // namespace v2v
