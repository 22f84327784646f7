#include "setdino/image.hpp"

#include <algorithm>
#include <cmath>

namespace setdino {

Image resize_bilinear(const Image& img, int out_h, int out_w) {
    if (img.empty()) throw DataError("resize_bilinear: empty image");
    Image out(img.channels, out_h, out_w);
    const float sy = static_cast<float>(img.height) / out_h;
    const float sx = static_cast<float>(img.width) / out_w;
    for (int c = 0; c < img.channels; ++c) {
        const float* src = img.channel(c);
        float* dst = out.channel(c);
        for (int y = 0; y < out_h; ++y) {
            // align centers: source coordinate of the output pixel center
            float fy = (y + 0.5f) * sy - 0.5f;
            int y0 = static_cast<int>(std::floor(fy));
            float wy = fy - y0;
            int y0c = std::clamp(y0, 0, img.height - 1);
            int y1c = std::clamp(y0 + 1, 0, img.height - 1);
            for (int x = 0; x < out_w; ++x) {
                float fx = (x + 0.5f) * sx - 0.5f;
                int x0 = static_cast<int>(std::floor(fx));
                float wx = fx - x0;
                int x0c = std::clamp(x0, 0, img.width - 1);
                int x1c = std::clamp(x0 + 1, 0, img.width - 1);
                float v00 = src[y0c * img.width + x0c];
                float v01 = src[y0c * img.width + x1c];
                float v10 = src[y1c * img.width + x0c];
                float v11 = src[y1c * img.width + x1c];
                float top = v00 + (v01 - v00) * wx;
                float bot = v10 + (v11 - v10) * wx;
                dst[y * out_w + x] = top + (bot - top) * wy;
            }
        }
    }
    return out;
}

Image crop(const Image& img, int top, int left, int crop_h, int crop_w) {
    if (top < 0 || left < 0 || top + crop_h > img.height || left + crop_w > img.width)
        throw DataError("crop: window outside image bounds");
    Image out(img.channels, crop_h, crop_w);
    for (int c = 0; c < img.channels; ++c) {
        const float* src = img.channel(c);
        float* dst = out.channel(c);
        for (int y = 0; y < crop_h; ++y)
            std::copy_n(src + (top + y) * img.width + left, crop_w, dst + y * crop_w);
    }
    return out;
}

Image flip_horizontal(const Image& img) {
    Image out(img.channels, img.height, img.width);
    for (int c = 0; c < img.channels; ++c)
        for (int y = 0; y < img.height; ++y)
            for (int x = 0; x < img.width; ++x)
                out.at(c, y, x) = img.at(c, y, img.width - 1 - x);
    return out;
}

Image rotate90(const Image& img, int k) {
    k = ((k % 4) + 4) % 4;
    if (k == 0) return img;
    if (img.height != img.width && (k % 2) == 1)
        throw DataError("rotate90: odd quarter-turns require square images");
    const int h = img.height, w = img.width;
    Image out(img.channels, (k % 2) ? w : h, (k % 2) ? h : w);
    for (int c = 0; c < img.channels; ++c)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                float v = img.at(c, y, x);
                switch (k) {
                    case 1: out.at(c, w - 1 - x, y) = v; break;
                    case 2: out.at(c, h - 1 - y, w - 1 - x) = v; break;
                    default: out.at(c, x, h - 1 - y) = v; break;
                }
            }
    return out;
}

Image gaussian_blur(const Image& img, float sigma) {
    if (sigma <= 0.f) return img;
    const int radius = std::max(1, static_cast<int>(std::ceil(3.f * sigma)));
    std::vector<float> kernel(2 * radius + 1);
    float sum = 0.f;
    for (int i = -radius; i <= radius; ++i) {
        float v = std::exp(-0.5f * (i * i) / (sigma * sigma));
        kernel[i + radius] = v;
        sum += v;
    }
    for (auto& v : kernel) v /= sum;

    auto reflect = [](int i, int n) {
        while (i < 0 || i >= n) {
            if (i < 0) i = -i - 1;
            if (i >= n) i = 2 * n - 1 - i;
        }
        return i;
    };

    Image tmp(img.channels, img.height, img.width);
    Image out(img.channels, img.height, img.width);
    for (int c = 0; c < img.channels; ++c) {
        const float* src = img.channel(c);
        float* mid = tmp.channel(c);
        float* dst = out.channel(c);
        for (int y = 0; y < img.height; ++y)
            for (int x = 0; x < img.width; ++x) {
                float acc = 0.f;
                for (int i = -radius; i <= radius; ++i)
                    acc += kernel[i + radius] * src[y * img.width + reflect(x + i, img.width)];
                mid[y * img.width + x] = acc;
            }
        for (int y = 0; y < img.height; ++y)
            for (int x = 0; x < img.width; ++x) {
                float acc = 0.f;
                for (int i = -radius; i <= radius; ++i)
                    acc += kernel[i + radius] * mid[reflect(y + i, img.height) * img.width + x];
                dst[y * img.width + x] = acc;
            }
    }
    return out;
}

}  // namespace setdino
