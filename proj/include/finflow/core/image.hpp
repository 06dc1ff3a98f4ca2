#pragma once

#include "finflow/core/tensor.hpp"

#include <array>
#include <string>
#include <vector>

namespace finflow {

// Minimal raster output: binary PPM (P6), no external deps. Used for
// pressure-field frames and optimization history plots.
class Image {
public:
    Image(int w, int h, std::array<unsigned char, 3> bg = {255, 255, 255});

    int width() const { return w_; }
    int height() const { return h_; }
    void set(int x, int y, std::array<unsigned char, 3> rgb);
    void line(int x0, int y0, int x1, int y1, std::array<unsigned char, 3> rgb);
    void save_ppm(const std::string& path) const;

private:
    int w_, h_;
    std::vector<unsigned char> px_;
};

// field rendered with a diverging blue-white-red map, symmetric range
Image render_field(const Tensor& field, int ch = 0, double vmax = 0.0 /*0 = auto*/);

// overlay contour of a scalar mask at level 0.5 (drawn dark)
void overlay_mask(Image& img, const Tensor& mask, int ch = 0);

struct Series {
    std::string label;
    std::vector<double> x, y;
    std::array<unsigned char, 3> rgb;
};

// simple line chart with auto-scaled axes
Image render_chart(const std::vector<Series>& series, int w = 900, int h = 600);

} // namespace finflow
