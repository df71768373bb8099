#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <string>
#include <vector>

#include "v2v/errors.hpp"

namespace v2v {

struct Rgb {
    uint8_t r = 0, g = 0, b = 0;
    bool operator==(const Rgb&) const = default;
};

/// Owned row-major RGB8 pixel grid. All drawing helpers clip instead of
/// asserting, so any origin (including negative) is safe.
class RasterImage {
public:
    RasterImage() = default;

    RasterImage(int width, int height, Rgb background) {
        if (width < 1 || height < 1)
            fail(ErrorKind::dimension, "canvas dimensions must be positive, got " +
                                           std::to_string(width) + "x" + std::to_string(height));
        if (static_cast<int64_t>(width) * height > (1ll << 28))
            fail(ErrorKind::dimension, "canvas dimensions overflow sane limits");
        width_ = width;
        height_ = height;
        pixels_.resize(static_cast<size_t>(width) * height * 3);
        for (size_t i = 0; i < pixels_.size(); i += 3) {
            pixels_[i] = background.r;
            pixels_[i + 1] = background.g;
            pixels_[i + 2] = background.b;
        }
    }

    int width() const { return width_; }
    int height() const { return height_; }
    bool empty() const { return pixels_.empty(); }

    bool in_bounds(int x, int y) const { return x >= 0 && y >= 0 && x < width_ && y < height_; }

    Rgb at(int x, int y) const {
        const size_t i = idx(x, y);
        return Rgb{pixels_[i], pixels_[i + 1], pixels_[i + 2]};
    }

    void set(int x, int y, Rgb c) {
        if (!in_bounds(x, y)) return;  // clipped
        const size_t i = idx(x, y);
        pixels_[i] = c.r;
        pixels_[i + 1] = c.g;
        pixels_[i + 2] = c.b;
    }

    const std::vector<uint8_t>& pixels() const { return pixels_; }
    std::vector<uint8_t>& pixels() { return pixels_; }

    bool operator==(const RasterImage& o) const {
        return width_ == o.width_ && height_ == o.height_ && pixels_ == o.pixels_;
    }

private:
    size_t idx(int x, int y) const { return (static_cast<size_t>(y) * width_ + x) * 3; }

    int width_ = 0;
    int height_ = 0;
    std::vector<uint8_t> pixels_;
};

inline RasterImage new_canvas(int width, int height, Rgb background) {
    return RasterImage(width, height, background);
}

inline void fill_rect(RasterImage& img, int x, int y, int w, int h, Rgb c) {
    const int x0 = std::max(0, x);
    const int y0 = std::max(0, y);
    const int x1 = std::min(img.width(), x + w);
    const int y1 = std::min(img.height(), y + h);
    for (int yy = y0; yy < y1; ++yy)
        for (int xx = x0; xx < x1; ++xx) img.set(xx, yy, c);
}

/// 1:1 copy of src onto dst with top-left at (x, y), clipped.
inline void blit(RasterImage& dst, const RasterImage& src, int x, int y) {
    for (int sy = 0; sy < src.height(); ++sy)
        for (int sx = 0; sx < src.width(); ++sx) dst.set(x + sx, y + sy, src.at(sx, sy));
}

inline RasterImage resize_nearest(const RasterImage& src, int width, int height) {
    RasterImage out(width, height, Rgb{0, 0, 0});
    for (int y = 0; y < height; ++y) {
        const int sy = static_cast<int>((static_cast<int64_t>(y) * src.height()) / height);
        for (int x = 0; x < width; ++x) {
            const int sx = static_cast<int>((static_cast<int64_t>(x) * src.width()) / width);
            out.set(x, y, src.at(sx, sy));
        }
    }
    return out;
}

inline void draw_line(RasterImage& img, int x0, int y0, int x1, int y1, Rgb c, int thickness = 1) {
    // Bresenham; thickness drawn as a small square stamp.
    const int dx = std::abs(x1 - x0), dy = -std::abs(y1 - y0);
    const int sx = x0 < x1 ? 1 : -1, sy = y0 < y1 ? 1 : -1;
    int err = dx + dy;
    const int half = thickness / 2;
    while (true) {
        for (int oy = -half; oy <= half; ++oy)
            for (int ox = -half; ox <= half; ++ox) img.set(x0 + ox, y0 + oy, c);
        if (x0 == x1 && y0 == y1) break;
        const int e2 = 2 * err;
        if (e2 >= dy) { err += dy; x0 += sx; }
        if (e2 <= dx) { err += dx; y0 += sy; }
    }
}

inline void draw_disc(RasterImage& img, int cx, int cy, int radius, Rgb c) {
    for (int y = -radius; y <= radius; ++y)
        for (int x = -radius; x <= radius; ++x)
            if (x * x + y * y <= radius * radius) img.set(cx + x, cy + y, c);
}

inline double mean_channel_distance(Rgb a, Rgb b) {
    return std::max({std::abs(int(a.r) - int(b.r)), std::abs(int(a.g) - int(b.g)),
                     std::abs(int(a.b) - int(b.b))});
}

inline Rgb mean_color(const RasterImage& img) {
    uint64_t r = 0, g = 0, b = 0;
    const auto& px = img.pixels();
    for (size_t i = 0; i < px.size(); i += 3) {
        r += px[i];
        g += px[i + 1];
        b += px[i + 2];
    }
    const uint64_t n = px.size() / 3;
    if (n == 0) return Rgb{0, 0, 0};
    return Rgb{static_cast<uint8_t>((r + n / 2) / n), static_cast<uint8_t>((g + n / 2) / n),
               static_cast<uint8_t>((b + n / 2) / n)};
}

/// Count 4-connected components of pixels where foreground(pixel) is true.
template <typename ForegroundFn>
int connected_components(const RasterImage& img, ForegroundFn foreground) {
    const int w = img.width(), h = img.height();
    std::vector<uint8_t> seen(static_cast<size_t>(w) * h, 0);
    std::vector<int> stack;
    int count = 0;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const int id = y * w + x;
            if (seen[id] || !foreground(img.at(x, y))) continue;
            ++count;
            stack.push_back(id);
            seen[id] = 1;
            while (!stack.empty()) {
                const int cur = stack.back();
                stack.pop_back();
                const int cx = cur % w, cy = cur / w;
                const int nx[4] = {cx - 1, cx + 1, cx, cx};
                const int ny[4] = {cy, cy, cy - 1, cy + 1};
                for (int k = 0; k < 4; ++k) {
                    if (nx[k] < 0 || ny[k] < 0 || nx[k] >= w || ny[k] >= h) continue;
                    const int nid = ny[k] * w + nx[k];
                    if (!seen[nid] && foreground(img.at(nx[k], ny[k]))) {
                        seen[nid] = 1;
                        stack.push_back(nid);
                    }
                }
            }
        }
    }
    return count;
}

}  // namespace v2v
