#pragma once

#include <cstddef>
#include <vector>

#include "setdino/common.hpp"

namespace setdino {

// Channel-major float image tensor [C, H, W].
struct Image {
    int channels = 0;
    int height = 0;
    int width = 0;
    std::vector<float> data;

    Image() = default;
    Image(int c, int h, int w, float fill = 0.f)
        : channels(c), height(h), width(w), data(static_cast<std::size_t>(c) * h * w, fill) {}

    float& at(int c, int y, int x) {
        return data[(static_cast<std::size_t>(c) * height + y) * width + x];
    }
    float at(int c, int y, int x) const {
        return data[(static_cast<std::size_t>(c) * height + y) * width + x];
    }

    float* channel(int c) { return data.data() + static_cast<std::size_t>(c) * height * width; }
    const float* channel(int c) const {
        return data.data() + static_cast<std::size_t>(c) * height * width;
    }

    std::size_t pixels_per_channel() const { return static_cast<std::size_t>(height) * width; }
    std::size_t size() const { return data.size(); }
    bool empty() const { return data.empty(); }
};

// Bilinear resample of every channel to out_h x out_w.
Image resize_bilinear(const Image& img, int out_h, int out_w);

// Axis-aligned crop; caller guarantees the window lies inside the image.
Image crop(const Image& img, int top, int left, int crop_h, int crop_w);

Image flip_horizontal(const Image& img);

// Rotate by k*90 degrees counterclockwise (square images only for k odd).
Image rotate90(const Image& img, int k);

// Separable Gaussian blur with reflective borders; sigma <= 0 is a copy.
Image gaussian_blur(const Image& img, float sigma);

}  // namespace setdino
