#include "finflow/core/image.hpp"

#include "finflow/core/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

namespace finflow {

Image::Image(int w, int h, std::array<unsigned char, 3> bg) : w_(w), h_(h), px_(std::size_t(w) * h * 3) {
    for (int i = 0; i < w * h; ++i) {
        px_[3 * i] = bg[0];
        px_[3 * i + 1] = bg[1];
        px_[3 * i + 2] = bg[2];
    }
}

void Image::set(int x, int y, std::array<unsigned char, 3> rgb) {
    if (x < 0 || y < 0 || x >= w_ || y >= h_) return;
    std::size_t i = 3 * (std::size_t(y) * w_ + x);
    px_[i] = rgb[0];
    px_[i + 1] = rgb[1];
    px_[i + 2] = rgb[2];
}

void Image::line(int x0, int y0, int x1, int y1, std::array<unsigned char, 3> rgb) {
    int dx = std::abs(x1 - x0), sx = x0 < x1 ? 1 : -1;
    int dy = -std::abs(y1 - y0), sy = y0 < y1 ? 1 : -1;
    int err = dx + dy;
    while (true) {
        set(x0, y0, rgb);
        if (x0 == x1 && y0 == y1) break;
        int e2 = 2 * err;
        if (e2 >= dy) {
            err += dy;
            x0 += sx;
        }
        if (e2 <= dx) {
            err += dx;
            y0 += sy;
        }
    }
}

void Image::save_ppm(const std::string& path) const {
    std::ofstream f(path, std::ios::binary);
    check(f.good(), "cannot write image: " + path);
    f << "P6\n" << w_ << " " << h_ << "\n255\n";
    f.write(reinterpret_cast<const char*>(px_.data()), std::streamsize(px_.size()));
}

Image render_field(const Tensor& field, int ch, double vmax) {
    const int h = field.h(), w = field.w();
    if (vmax <= 0.0) vmax = std::max(kern::ops().max_abs(field.plane(ch), field.shape().plane()), 1e-300);
    Image img(w, h);
    for (int j = 0; j < h; ++j)
        for (int i = 0; i < w; ++i) {
            double v = std::clamp(field.at(ch, j, i) / vmax, -1.0, 1.0);
            unsigned char r, g, b;
            if (v >= 0) { // white -> red
                r = 255;
                g = b = static_cast<unsigned char>(255 * (1.0 - v));
            } else { // white -> blue
                b = 255;
                r = g = static_cast<unsigned char>(255 * (1.0 + v));
            }
            // image row 0 on top = largest y
            img.set(i, h - 1 - j, {r, g, b});
        }
    return img;
}

void overlay_mask(Image& img, const Tensor& mask, int ch) {
    const int h = mask.h(), w = mask.w();
    for (int j = 0; j < h; ++j)
        for (int i = 0; i < w; ++i) {
            bool in = mask.at(ch, j, i) > 0.5;
            bool edge = false;
            if (i + 1 < w && (mask.at(ch, j, i + 1) > 0.5) != in) edge = true;
            if (j + 1 < h && (mask.at(ch, j + 1, i) > 0.5) != in) edge = true;
            if (edge) img.set(i, h - 1 - j, {40, 40, 40});
        }
}

Image render_chart(const std::vector<Series>& series, int w, int h) {
    Image img(w, h);
    const int m = 60; // margin
    double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
    for (const auto& s : series)
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            xmin = std::min(xmin, s.x[i]);
            xmax = std::max(xmax, s.x[i]);
            ymin = std::min(ymin, s.y[i]);
            ymax = std::max(ymax, s.y[i]);
        }
    if (xmin > xmax) {
        xmin = 0;
        xmax = 1;
    }
    if (ymin > ymax) {
        ymin = 0;
        ymax = 1;
    }
    if (xmax - xmin < 1e-12) xmax = xmin + 1;
    if (ymax - ymin < 1e-12) ymax = ymin + 1;
    auto px = [&](double x) { return m + int((x - xmin) / (xmax - xmin) * (w - 2 * m)); };
    auto py = [&](double y) { return h - m - int((y - ymin) / (ymax - ymin) * (h - 2 * m)); };
    img.line(m, h - m, w - m, h - m, {0, 0, 0});
    img.line(m, h - m, m, m, {0, 0, 0});
    // light grid
    for (int g = 1; g <= 4; ++g) {
        int gy = m + g * (h - 2 * m) / 5;
        img.line(m, gy, w - m, gy, {220, 220, 220});
    }
    for (const auto& s : series) {
        for (std::size_t i = 1; i < s.x.size(); ++i)
            img.line(px(s.x[i - 1]), py(s.y[i - 1]), px(s.x[i]), py(s.y[i]), s.rgb);
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            int cx = px(s.x[i]), cy = py(s.y[i]);
            for (int dy = -1; dy <= 1; ++dy)
                for (int dx = -1; dx <= 1; ++dx) img.set(cx + dx, cy + dy, s.rgb);
        }
    }
    return img;
}

} // namespace finflow
