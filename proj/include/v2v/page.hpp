#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "v2v/errors.hpp"
#include "v2v/font.hpp"
#include "v2v/png_io.hpp"
#include "v2v/raster.hpp"

namespace v2v {

enum class PageFamily {
    color_card,
    object_layout_card,
    counting_display,
    inline_color_prompt,
    inline_visual_reference,
    rendered_text_page,
    style_reference_page,
    structure_reference_page,
};

enum class ElementKind {
    text_run,
    color_swatch,
    image_thumbnail,
    grid_cell,
    repeat_glyph,
};

inline const char* family_name(PageFamily f) {
    switch (f) {
        case PageFamily::color_card: return "color-card";
        case PageFamily::object_layout_card: return "object-layout-card";
        case PageFamily::counting_display: return "counting-display";
        case PageFamily::inline_color_prompt: return "inline-color-prompt";
        case PageFamily::inline_visual_reference: return "inline-visual-reference";
        case PageFamily::rendered_text_page: return "rendered-text-page";
        case PageFamily::style_reference_page: return "style-reference-page";
        case PageFamily::structure_reference_page: return "structure-reference-page";
    }
    return "?";
}

inline PageFamily family_from_name(const std::string& name) {
    for (PageFamily f : {PageFamily::color_card, PageFamily::object_layout_card,
                         PageFamily::counting_display, PageFamily::inline_color_prompt,
                         PageFamily::inline_visual_reference, PageFamily::rendered_text_page,
                         PageFamily::style_reference_page, PageFamily::structure_reference_page}) {
        if (name == family_name(f)) return f;
    }
    fail(ErrorKind::spec_validation, "unknown page family '" + name + "'");
}

inline const char* element_kind_name(ElementKind k) {
    switch (k) {
        case ElementKind::text_run: return "text-run";
        case ElementKind::color_swatch: return "color-swatch";
        case ElementKind::image_thumbnail: return "image-thumbnail";
        case ElementKind::grid_cell: return "grid-cell";
        case ElementKind::repeat_glyph: return "repeat-glyph";
    }
    return "?";
}

inline ElementKind element_kind_from_name(const std::string& name) {
    for (ElementKind k : {ElementKind::text_run, ElementKind::color_swatch,
                          ElementKind::image_thumbnail, ElementKind::grid_cell,
                          ElementKind::repeat_glyph}) {
        if (name == element_kind_name(k)) return k;
    }
    fail(ErrorKind::spec_validation, "unknown element kind '" + name + "'");
}

struct PageElement {
    ElementKind kind = ElementKind::text_run;
    std::string text;          // text-run
    Rgb color{0, 0, 0};        // color-swatch
    RasterImage image;         // image-thumbnail
    std::string image_path;    // source path if loaded from a spec file
    int cell_index = 0;        // grid-cell
    char glyph = 'x';          // repeat-glyph
    int count = 1;             // repeat-glyph

    static PageElement text_run(std::string t) {
        PageElement e;
        e.kind = ElementKind::text_run;
        e.text = std::move(t);
        return e;
    }
    static PageElement swatch(Rgb c) {
        PageElement e;
        e.kind = ElementKind::color_swatch;
        e.color = c;
        return e;
    }
    static PageElement thumbnail(RasterImage img, std::string path = "") {
        PageElement e;
        e.kind = ElementKind::image_thumbnail;
        e.image = std::move(img);
        e.image_path = std::move(path);
        return e;
    }
    static PageElement grid_cell(int index) {
        PageElement e;
        e.kind = ElementKind::grid_cell;
        e.cell_index = index;
        return e;
    }
    static PageElement repeat_glyph(char g, int n) {
        PageElement e;
        e.kind = ElementKind::repeat_glyph;
        e.glyph = g;
        e.count = n;
        return e;
    }
};

struct RenderParams {
    int font_size = 32;
    double text_height_ratio = 0.20;
    int inline_swatch_size = 28;
    int inline_thumbnail_size = 72;
};

struct PageSpec {
    PageFamily family = PageFamily::color_card;
    std::vector<PageElement> elements;
    int canvas_width = 0;   // 0 selects the family default
    int canvas_height = 0;
    RenderParams params;
};

inline bool is_inline_family(PageFamily f) {
    return f == PageFamily::inline_color_prompt || f == PageFamily::inline_visual_reference;
}

inline void apply_default_canvas(PageSpec& spec) {
    if (spec.canvas_width <= 0) spec.canvas_width = 448;
    if (spec.canvas_height <= 0) spec.canvas_height = is_inline_family(spec.family) ? 112 : 448;
}

/// Axis-aligned placement of one rendered element instance. repeat-glyph
/// elements produce one box per copy; every other kind produces one box.
struct ElementBox {
    int element_index = 0;
    ElementKind kind = ElementKind::text_run;
    int x = 0;
    int y = 0;
    int w = 0;
    int h = 0;
};

struct RenderedPage {
    RasterImage image;
    std::vector<ElementBox> boxes;
};

namespace detail {

constexpr int kPageMargin = 16;

inline bool kind_legal_for_family(PageFamily f, ElementKind k) {
    switch (f) {
        case PageFamily::color_card:
            return k == ElementKind::color_swatch || k == ElementKind::text_run;
        case PageFamily::object_layout_card:
            return k == ElementKind::image_thumbnail || k == ElementKind::grid_cell ||
                   k == ElementKind::text_run;
        case PageFamily::counting_display:
            return k == ElementKind::repeat_glyph;
        case PageFamily::inline_color_prompt:
            return k == ElementKind::text_run || k == ElementKind::color_swatch;
        case PageFamily::inline_visual_reference:
            return k == ElementKind::text_run || k == ElementKind::image_thumbnail;
        case PageFamily::rendered_text_page:
            return k == ElementKind::text_run;
        case PageFamily::style_reference_page:
        case PageFamily::structure_reference_page:
            return k == ElementKind::image_thumbnail || k == ElementKind::text_run;
    }
    return false;
}

inline int glyph_grid_gap(int font_size) { return std::max(2, font_size / 8); }

inline int counting_capacity(int width, int height, int font_size) {
    const int gap = glyph_grid_gap(font_size);
    const int usable_w = width - 2 * kPageMargin;
    const int usable_h = height - 2 * kPageMargin;
    if (usable_w < font_size || usable_h < font_size) return 0;
    const int cols = (usable_w + gap) / (font_size + gap);
    const int rows = (usable_h + gap) / (font_size + gap);
    return cols * rows;
}

}  // namespace detail

/// Collect every rule violation instead of stopping at the first.
inline std::vector<std::string> validate_spec(const PageSpec& spec_in) {
    PageSpec spec = spec_in;
    apply_default_canvas(spec);
    std::vector<std::string> violations;
    auto violation = [&](const std::string& msg) { violations.push_back(msg); };

    if (spec.elements.empty()) violation("elements must be non-empty");
    if (spec.params.text_height_ratio <= 0.0 || spec.params.text_height_ratio >= 1.0)
        violation("text_height_ratio must be strictly between 0 and 1");
    if (spec.params.font_size < 8) violation("font_size must be at least 8");
    if (spec.params.inline_swatch_size < 8) violation("inline_swatch_size must be at least 8");
    if (spec.params.inline_thumbnail_size < 8) violation("inline_thumbnail_size must be at least 8");
    if (spec.params.font_size >= 8 && spec.params.font_size % kGlyphCell != 0)
        violation("font_size must be a multiple of " + std::to_string(kGlyphCell));

    const GlyphSet& gs = GlyphSet::builtin();
    int glyph_total = 0;
    int image_count = 0, text_count = 0;
    for (size_t i = 0; i < spec.elements.size(); ++i) {
        const PageElement& e = spec.elements[i];
        const std::string where = "element " + std::to_string(i) + " (" +
                                  element_kind_name(e.kind) + ")";
        if (!detail::kind_legal_for_family(spec.family, e.kind)) {
            violation(where + " is not allowed in family " + family_name(spec.family));
            continue;
        }
        switch (e.kind) {
            case ElementKind::text_run:
                ++text_count;
                for (char c : e.text)
                    if (!gs.has(c)) {
                        violation(where + " uses unsupported character code " +
                                  std::to_string(int(static_cast<unsigned char>(c))));
                        break;
                    }
                break;
            case ElementKind::image_thumbnail:
                ++image_count;
                if (e.image.empty()) violation(where + " has an empty image");
                break;
            case ElementKind::grid_cell:
                if (e.cell_index < 0 || e.cell_index > 3)
                    violation(where + " cell index " + std::to_string(e.cell_index) +
                              " outside 0..3");
                break;
            case ElementKind::repeat_glyph: {
                if (e.count < 1) violation(where + " count must be >= 1");
                if (!gs.has(e.glyph) || e.glyph == ' ') {
                    violation(where + " glyph is not renderable");
                } else if (gs.glyph_component_count(e.glyph) != 1) {
                    violation(where + " glyph '" + std::string(1, e.glyph) +
                              "' is not a single connected mark");
                }
                if (e.count >= 1) glyph_total += e.count;
                break;
            }
            case ElementKind::color_swatch:
                break;
        }
    }

    if (spec.family == PageFamily::counting_display && glyph_total > 0) {
        const int cap = detail::counting_capacity(spec.canvas_width, spec.canvas_height,
                                                  spec.params.font_size);
        if (glyph_total > cap)
            violation("total glyph count " + std::to_string(glyph_total) +
                      " exceeds page capacity " + std::to_string(cap));
    }
    if (spec.family == PageFamily::style_reference_page ||
        spec.family == PageFamily::structure_reference_page) {
        if (image_count != 1)
            violation("reference pages need exactly one image-thumbnail, got " +
                      std::to_string(image_count));
        if (text_count > 1)
            violation("reference pages allow at most one caption text-run");
    }
    return violations;
}

namespace detail {

inline void render_inline_row(const PageSpec& spec, RasterImage& canvas,
                              std::vector<ElementBox>& boxes) {
    const int font = spec.params.font_size;
    const int gap = std::max(4, font / 4);
    const int baseline = canvas.height() / 2 + font / 2;
    int x = kPageMargin;
    for (size_t i = 0; i < spec.elements.size(); ++i) {
        const PageElement& e = spec.elements[i];
        if (e.kind == ElementKind::text_run) {
            const int y = baseline - font;
            const int adv = draw_text(canvas, e.text, x, y, font, Rgb{0, 0, 0});
            boxes.push_back({int(i), e.kind, x, y, adv, font});
            x += adv + gap;
        } else if (e.kind == ElementKind::color_swatch) {
            const int s = spec.params.inline_swatch_size;
            const int y = baseline - s;
            fill_rect(canvas, x, y, s, s, e.color);
            boxes.push_back({int(i), e.kind, x, y, s, s});
            x += s + gap;
        } else if (e.kind == ElementKind::image_thumbnail) {
            const int s = spec.params.inline_thumbnail_size;
            const int y = baseline - s;
            blit(canvas, resize_nearest(e.image, s, s), x, y);
            boxes.push_back({int(i), e.kind, x, y, s, s});
            x += s + gap;
        }
    }
}

inline void render_caption(const PageSpec& spec, RasterImage& canvas,
                           std::vector<ElementBox>& boxes, int band_top) {
    const int font = spec.params.font_size;
    std::string caption;
    int first_text = -1;
    for (size_t i = 0; i < spec.elements.size(); ++i) {
        if (spec.elements[i].kind == ElementKind::text_run) {
            if (first_text < 0) first_text = int(i);
            caption += spec.elements[i].text;
        }
    }
    if (first_text < 0) return;
    const int adv = text_advance(GlyphSet::builtin(), caption, font);
    const int x = std::max(0, (canvas.width() - adv) / 2);
    const int y = band_top;
    draw_text(canvas, caption, x, y, font, Rgb{0, 0, 0});
    boxes.push_back({first_text, ElementKind::text_run, x, y, adv, font});
}

inline void render_color_card(const PageSpec& spec, RasterImage& canvas,
                              std::vector<ElementBox>& boxes) {
    std::vector<size_t> swatches;
    bool has_text = false;
    for (size_t i = 0; i < spec.elements.size(); ++i) {
        if (spec.elements[i].kind == ElementKind::color_swatch) swatches.push_back(i);
        if (spec.elements[i].kind == ElementKind::text_run) has_text = true;
    }
    const int font = spec.params.font_size;
    const int caption_band = has_text ? font + kPageMargin : 0;
    const int margin =
        std::min({2 * kPageMargin, canvas.width() / 8, canvas.height() / 8});
    const int gap = kPageMargin;
    const int k = int(swatches.size());
    if (k > 0) {
        const int block_h = canvas.height() - 2 * margin - caption_band;
        const int block_w = (canvas.width() - 2 * margin - (k - 1) * gap) / k;
        int x = margin;
        for (size_t idx : swatches) {
            fill_rect(canvas, x, margin, block_w, block_h, spec.elements[idx].color);
            boxes.push_back({int(idx), ElementKind::color_swatch, x, margin, block_w, block_h});
            x += block_w + gap;
        }
    }
    if (has_text) render_caption(spec, canvas, boxes, canvas.height() - caption_band + kPageMargin / 2);
}

inline void render_layout_card(const PageSpec& spec, RasterImage& canvas,
                               std::vector<ElementBox>& boxes) {
    bool has_text = false;
    for (const PageElement& e : spec.elements)
        if (e.kind == ElementKind::text_run) has_text = true;
    const int font = spec.params.font_size;
    const int caption_band = has_text ? font + kPageMargin : 0;
    const int grid_w = canvas.width();
    const int grid_h = canvas.height() - caption_band;
    const int cell_w = grid_w / 2;
    const int cell_h = grid_h / 2;
    const int pad = kPageMargin / 2;

    int active = 0;
    for (size_t i = 0; i < spec.elements.size(); ++i) {
        const PageElement& e = spec.elements[i];
        if (e.kind == ElementKind::grid_cell) {
            active = e.cell_index;
        } else if (e.kind == ElementKind::image_thumbnail) {
            const int cell = active % 4;
            const int cx = (cell % 2) * cell_w;
            const int cy = (cell / 2) * cell_h;
            const int side = std::min(cell_w, cell_h) - 2 * pad;
            const int x = cx + (cell_w - side) / 2;
            const int y = cy + (cell_h - side) / 2;
            blit(canvas, resize_nearest(e.image, side, side), x, y);
            boxes.push_back({int(i), e.kind, x, y, side, side});
            active = cell + 1;
        }
    }
    if (has_text) render_caption(spec, canvas, boxes, canvas.height() - caption_band + kPageMargin / 2);
}

inline void render_counting(const PageSpec& spec, RasterImage& canvas,
                            std::vector<ElementBox>& boxes) {
    const int font = spec.params.font_size;
    const int gap = glyph_grid_gap(font);
    const int cols = std::max(1, (canvas.width() - 2 * kPageMargin + gap) / (font + gap));
    int slot = 0;
    for (size_t i = 0; i < spec.elements.size(); ++i) {
        const PageElement& e = spec.elements[i];
        if (e.kind != ElementKind::repeat_glyph) continue;
        for (int c = 0; c < e.count; ++c, ++slot) {
            const int x = kPageMargin + (slot % cols) * (font + gap);
            const int y = kPageMargin + (slot / cols) * (font + gap);
            draw_text(canvas, std::string(1, e.glyph), x, y, font, Rgb{0, 0, 0});
            boxes.push_back({int(i), e.kind, x, y, font, font});
        }
    }
}

inline void render_text_page(const PageSpec& spec, RasterImage& canvas,
                             std::vector<ElementBox>& boxes) {
    const int font = spec.params.font_size;
    const int band_h = int(std::lround(spec.params.text_height_ratio * canvas.height()));
    const int y = std::max(0, (band_h - font) / 2);
    int x = kPageMargin;
    for (size_t i = 0; i < spec.elements.size(); ++i) {
        const PageElement& e = spec.elements[i];
        if (e.kind != ElementKind::text_run) continue;
        const int adv = draw_text(canvas, e.text, x, y, font, Rgb{0, 0, 0});
        boxes.push_back({int(i), e.kind, x, y, adv, font});
        x += adv;
    }
}

inline void render_reference_page(const PageSpec& spec, RasterImage& canvas,
                                  std::vector<ElementBox>& boxes) {
    bool has_text = false;
    for (const PageElement& e : spec.elements)
        if (e.kind == ElementKind::text_run) has_text = true;
    const int font = spec.params.font_size;
    const int caption_band = has_text ? font + kPageMargin : 0;
    for (size_t i = 0; i < spec.elements.size(); ++i) {
        const PageElement& e = spec.elements[i];
        if (e.kind != ElementKind::image_thumbnail) continue;
        const int x = std::max(0, (canvas.width() - e.image.width()) / 2);
        const int y = kPageMargin;
        blit(canvas, e.image, x, y);
        boxes.push_back({int(i), e.kind, x, y, e.image.width(), e.image.height()});
    }
    if (has_text) render_caption(spec, canvas, boxes, canvas.height() - caption_band + kPageMargin / 2);
}

}  // namespace detail

inline RenderedPage render_page_with_boxes(const PageSpec& spec_in) {
    PageSpec spec = spec_in;
    apply_default_canvas(spec);
    const std::vector<std::string> violations = validate_spec(spec);
    if (!violations.empty()) {
        std::string msg = "page spec invalid:";
        for (const std::string& v : violations) msg += "\n  - " + v;
        fail(ErrorKind::spec_validation, msg);
    }
    RenderedPage out{new_canvas(spec.canvas_width, spec.canvas_height, Rgb{255, 255, 255}), {}};
    switch (spec.family) {
        case PageFamily::inline_color_prompt:
        case PageFamily::inline_visual_reference:
            detail::render_inline_row(spec, out.image, out.boxes);
            break;
        case PageFamily::color_card:
            detail::render_color_card(spec, out.image, out.boxes);
            break;
        case PageFamily::object_layout_card:
            detail::render_layout_card(spec, out.image, out.boxes);
            break;
        case PageFamily::counting_display:
            detail::render_counting(spec, out.image, out.boxes);
            break;
        case PageFamily::rendered_text_page:
            detail::render_text_page(spec, out.image, out.boxes);
            break;
        case PageFamily::style_reference_page:
        case PageFamily::structure_reference_page:
            detail::render_reference_page(spec, out.image, out.boxes);
            break;
    }
    return out;
}

inline RasterImage render_page(const PageSpec& spec) { return render_page_with_boxes(spec).image; }

// ---------------------------------------------------------------------------
// Named colors

struct NamedColor {
    const char* name;
    Rgb rgb;
};

/// The 16 basic web colors.
inline const std::vector<NamedColor>& color_palette() {
    static const std::vector<NamedColor> palette = {
        {"black", {0, 0, 0}},       {"silver", {192, 192, 192}},
        {"gray", {128, 128, 128}},  {"white", {255, 255, 255}},
        {"maroon", {128, 0, 0}},    {"red", {255, 0, 0}},
        {"purple", {128, 0, 128}},  {"fuchsia", {255, 0, 255}},
        {"green", {0, 128, 0}},     {"lime", {0, 255, 0}},
        {"olive", {128, 128, 0}},   {"yellow", {255, 255, 0}},
        {"navy", {0, 0, 128}},      {"blue", {0, 0, 255}},
        {"teal", {0, 128, 128}},    {"aqua", {0, 255, 255}},
    };
    return palette;
}

namespace detail {

/// Common color words outside the palette, used only to pick a sensible
/// suggestion by hue rather than by spelling.
inline const std::vector<NamedColor>& extended_color_words() {
    static const std::vector<NamedColor> words = {
        {"crimson", {220, 20, 60}},     {"scarlet", {255, 36, 0}},
        {"salmon", {250, 128, 114}},    {"pink", {255, 192, 203}},
        {"coral", {255, 127, 80}},      {"orange", {255, 165, 0}},
        {"gold", {255, 215, 0}},        {"khaki", {240, 230, 140}},
        {"beige", {245, 245, 220}},     {"ivory", {255, 255, 240}},
        {"chartreuse", {127, 255, 0}},  {"forestgreen", {34, 139, 34}},
        {"seagreen", {46, 139, 87}},    {"mint", {62, 180, 137}},
        {"emerald", {80, 200, 120}},    {"turquoise", {64, 224, 208}},
        {"cyan", {0, 255, 255}},        {"skyblue", {135, 206, 235}},
        {"azure", {0, 127, 255}},       {"cobalt", {0, 71, 171}},
        {"indigo", {75, 0, 130}},       {"violet", {238, 130, 238}},
        {"lavender", {230, 230, 250}},  {"magenta", {255, 0, 255}},
        {"plum", {221, 160, 221}},      {"orchid", {218, 112, 214}},
        {"brown", {150, 75, 0}},        {"chocolate", {210, 105, 30}},
        {"tan", {210, 180, 140}},       {"sienna", {160, 82, 45}},
        {"rust", {183, 65, 14}},        {"burgundy", {128, 0, 32}},
        {"charcoal", {54, 69, 79}},     {"slate", {112, 128, 144}},
        {"cream", {255, 253, 208}},     {"peach", {255, 229, 180}},
    };
    return words;
}

inline int color_distance_sq(Rgb a, Rgb b) {
    const int dr = int(a.r) - int(b.r);
    const int dg = int(a.g) - int(b.g);
    const int db = int(a.b) - int(b.b);
    return dr * dr + dg * dg + db * db;
}

inline std::string nearest_palette_name(Rgb c) {
    const NamedColor* best = nullptr;
    int best_d = 0;
    for (const NamedColor& nc : color_palette()) {
        const int d = color_distance_sq(c, nc.rgb);
        if (!best || d < best_d) {
            best = &nc;
            best_d = d;
        }
    }
    return best->name;
}

inline int edit_distance(const std::string& a, const std::string& b) {
    std::vector<int> prev(b.size() + 1), cur(b.size() + 1);
    for (size_t j = 0; j <= b.size(); ++j) prev[j] = int(j);
    for (size_t i = 1; i <= a.size(); ++i) {
        cur[0] = int(i);
        for (size_t j = 1; j <= b.size(); ++j) {
            const int sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
        }
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

}  // namespace detail

/// Map a color word to its palette rgb. Unknown words raise an error whose
/// message suggests the closest palette entry: if the word is a recognizable
/// color term the suggestion matches by hue, otherwise by spelling.
inline Rgb named_color(const std::string& name) {
    std::string lower;
    for (char c : name) lower += char(std::tolower(static_cast<unsigned char>(c)));
    for (const NamedColor& nc : color_palette())
        if (lower == nc.name) return nc.rgb;

    std::string suggestion;
    for (const NamedColor& w : detail::extended_color_words())
        if (lower == w.name) suggestion = detail::nearest_palette_name(w.rgb);
    if (suggestion.empty()) {
        int best_d = 0;
        for (const NamedColor& nc : color_palette()) {
            const int d = detail::edit_distance(lower, nc.name);
            if (suggestion.empty() || d < best_d) {
                suggestion = nc.name;
                best_d = d;
            }
        }
    }
    fail(ErrorKind::unknown_color,
         "unknown color '" + name + "' (closest known: '" + suggestion + "')");
}

// ---------------------------------------------------------------------------
// JSON spec round trip

inline nlohmann::json page_spec_to_json(const PageSpec& spec) {
    nlohmann::json j;
    j["family"] = family_name(spec.family);
    if (spec.canvas_width > 0 && spec.canvas_height > 0)
        j["canvas"] = {{"width", spec.canvas_width}, {"height", spec.canvas_height}};
    j["params"] = {{"font_size", spec.params.font_size},
                   {"text_height_ratio", spec.params.text_height_ratio},
                   {"inline_swatch_size", spec.params.inline_swatch_size},
                   {"inline_thumbnail_size", spec.params.inline_thumbnail_size}};
    nlohmann::json elems = nlohmann::json::array();
    for (const PageElement& e : spec.elements) {
        nlohmann::json je;
        je["kind"] = element_kind_name(e.kind);
        switch (e.kind) {
            case ElementKind::text_run: je["text"] = e.text; break;
            case ElementKind::color_swatch:
                je["rgb"] = {e.color.r, e.color.g, e.color.b};
                break;
            case ElementKind::image_thumbnail:
                if (e.image_path.empty())
                    fail(ErrorKind::spec_validation,
                         "image-thumbnail without a source path cannot be serialized");
                je["path"] = e.image_path;
                break;
            case ElementKind::grid_cell: je["cell"] = e.cell_index; break;
            case ElementKind::repeat_glyph:
                je["glyph"] = std::string(1, e.glyph);
                je["count"] = e.count;
                break;
        }
        elems.push_back(je);
    }
    j["elements"] = elems;
    return j;
}

/// `base_dir` resolves relative image paths (usually the spec file's directory).
inline PageSpec page_spec_from_json(const nlohmann::json& j, const std::string& base_dir = ".") {
    if (!j.contains("family") || !j.contains("elements"))
        fail(ErrorKind::spec_validation, "page spec needs 'family' and 'elements'");
    PageSpec spec;
    spec.family = family_from_name(j.at("family").get<std::string>());
    if (j.contains("canvas")) {
        spec.canvas_width = j.at("canvas").value("width", 0);
        spec.canvas_height = j.at("canvas").value("height", 0);
    }
    if (j.contains("params")) {
        const nlohmann::json& p = j.at("params");
        spec.params.font_size = p.value("font_size", spec.params.font_size);
        spec.params.text_height_ratio = p.value("text_height_ratio", spec.params.text_height_ratio);
        spec.params.inline_swatch_size = p.value("inline_swatch_size", spec.params.inline_swatch_size);
        spec.params.inline_thumbnail_size =
            p.value("inline_thumbnail_size", spec.params.inline_thumbnail_size);
    }
    for (const nlohmann::json& je : j.at("elements")) {
        PageElement e;
        e.kind = element_kind_from_name(je.at("kind").get<std::string>());
        switch (e.kind) {
            case ElementKind::text_run: e.text = je.at("text").get<std::string>(); break;
            case ElementKind::color_swatch: {
                if (je.contains("color")) {
                    e.color = named_color(je.at("color").get<std::string>());
                } else {
                    const nlohmann::json& rgb = je.at("rgb");
                    if (!rgb.is_array() || rgb.size() != 3)
                        fail(ErrorKind::spec_validation, "swatch rgb must be a 3-element array");
                    int v[3];
                    for (int i = 0; i < 3; ++i) {
                        v[i] = rgb[i].get<int>();
                        if (v[i] < 0 || v[i] > 255)
                            fail(ErrorKind::spec_validation,
                                 "swatch rgb component " + std::to_string(v[i]) + " outside 0..255");
                    }
                    e.color = Rgb{uint8_t(v[0]), uint8_t(v[1]), uint8_t(v[2])};
                }
                break;
            }
            case ElementKind::image_thumbnail: {
                e.image_path = je.at("path").get<std::string>();
                const std::string full = e.image_path.front() == '/'
                                             ? e.image_path
                                             : base_dir + "/" + e.image_path;
                e.image = read_png(full);
                break;
            }
            case ElementKind::grid_cell: e.cell_index = je.at("cell").get<int>(); break;
            case ElementKind::repeat_glyph: {
                const std::string g = je.at("glyph").get<std::string>();
                if (g.size() != 1)
                    fail(ErrorKind::spec_validation, "repeat-glyph glyph must be one character");
                e.glyph = g[0];
                e.count = je.at("count").get<int>();
                break;
            }
        }
        spec.elements.push_back(std::move(e));
    }
    return spec;
}

inline PageSpec load_page_spec(const std::string& path) {
    std::ifstream f(path);
    if (!f) fail(ErrorKind::io, "cannot open page spec '" + path + "'");
    nlohmann::json j;
    try {
        f >> j;
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::io, "page spec '" + path + "' is not valid json: " + e.what());
    }
    std::string dir = ".";
    const size_t slash = path.rfind('/');
    if (slash != std::string::npos) dir = path.substr(0, slash);
    return page_spec_from_json(j, dir);
}

inline nlohmann::json boxes_to_json(const std::vector<ElementBox>& boxes) {
    nlohmann::json arr = nlohmann::json::array();
    for (const ElementBox& b : boxes) {
        arr.push_back({{"element", b.element_index},
                       {"kind", element_kind_name(b.kind)},
                       {"x", b.x},
                       {"y", b.y},
                       {"w", b.w},
                       {"h", b.h}});
    }
    return arr;
}

}  // namespace v2v
