#include "setdino/imageproc.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace setdino::imageproc {

double percentile(std::vector<float> values, double pct) {
    if (values.empty()) throw DataError("percentile: empty value list");
    std::sort(values.begin(), values.end());
    const double pos = pct / 100.0 * (values.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = static_cast<std::size_t>(std::ceil(pos));
    const double frac = pos - lo;
    return values[lo] * (1.0 - frac) + values[hi] * frac;
}

Image clip_and_rescale(const Image& img, double lo_pct, double hi_pct) {
    if (img.empty()) throw DataError("clip_and_rescale: empty image");
    if (!(lo_pct < hi_pct)) throw ConfigError("clip_and_rescale: lo_pct must be < hi_pct");
    Image out(img.channels, img.height, img.width);
    std::vector<float> scratch(img.pixels_per_channel());
    for (int c = 0; c < img.channels; ++c) {
        const float* src = img.channel(c);
        std::memcpy(scratch.data(), src, scratch.size() * sizeof(float));
        const double plo = percentile(scratch, lo_pct);
        const double phi = percentile(scratch, hi_pct);
        float* dst = out.channel(c);
        if (!(phi > plo)) {
            std::fill_n(dst, scratch.size(), 0.f);
            continue;
        }
        const double inv = 1.0 / (phi - plo);
        for (std::size_t i = 0; i < scratch.size(); ++i) {
            double v = std::clamp(static_cast<double>(src[i]), plo, phi);
            dst[i] = static_cast<float>((v - plo) * inv);
        }
    }
    return out;
}

Image zscore_normalize(const Image& img) {
    if (img.empty()) throw DataError("zscore_normalize: empty image");
    Image out(img.channels, img.height, img.width);
    const std::size_t n = img.pixels_per_channel();
    for (int c = 0; c < img.channels; ++c) {
        const float* src = img.channel(c);
        double sum = 0.0, sq = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            sum += src[i];
            sq += static_cast<double>(src[i]) * src[i];
        }
        const double mean = sum / n;
        const double var = std::max(0.0, sq / n - mean * mean);
        const double sd = std::sqrt(var);
        float* dst = out.channel(c);
        if (sd < 1e-12) {
            warn("zscore_normalize: zero-variance channel " + std::to_string(c) +
                 " mapped to zeros");
            std::fill_n(dst, n, 0.f);
            continue;
        }
        const double inv = 1.0 / sd;
        for (std::size_t i = 0; i < n; ++i)
            dst[i] = static_cast<float>((src[i] - mean) * inv);
    }
    return out;
}

NtcStats compute_ntc_stats(const std::vector<const Image*>& ntc_images, int batch_id) {
    if (ntc_images.empty())
        throw DataError("compute_ntc_stats: batch " + std::to_string(batch_id) +
                        " has no NTC cells (missing controls)");
    const int channels = ntc_images.front()->channels;
    NtcStats stats;
    stats.batch_id = batch_id;
    stats.n_cells = static_cast<long>(ntc_images.size());
    stats.mean.resize(channels);
    stats.stddev.resize(channels);
    for (int c = 0; c < channels; ++c) {
        double sum = 0.0, sq = 0.0;
        std::size_t count = 0;
        for (const Image* im : ntc_images) {
            if (im->channels != channels)
                throw DataError("compute_ntc_stats: inconsistent channel counts");
            const float* src = im->channel(c);
            const std::size_t n = im->pixels_per_channel();
            for (std::size_t i = 0; i < n; ++i) {
                sum += src[i];
                sq += static_cast<double>(src[i]) * src[i];
            }
            count += n;
        }
        const double mean = sum / count;
        const double var = std::max(0.0, sq / count - mean * mean);
        stats.mean[c] = mean;
        stats.stddev[c] = std::sqrt(var);
        if (stats.stddev[c] < 1e-12)
            throw DataError("compute_ntc_stats: batch " + std::to_string(batch_id) +
                            " channel " + std::to_string(c) +
                            " has zero pooled variance (missing variance)");
    }
    return stats;
}

Image ntc_zscore_normalize(const Image& img, const NtcStats& stats, int image_batch_id) {
    if (stats.batch_id != image_batch_id)
        throw DataError("ntc_zscore_normalize: stats are for batch " +
                        std::to_string(stats.batch_id) + " but image is from batch " +
                        std::to_string(image_batch_id));
    if (static_cast<int>(stats.mean.size()) != img.channels)
        throw DataError("ntc_zscore_normalize: channel count mismatch");
    Image out(img.channels, img.height, img.width);
    const std::size_t n = img.pixels_per_channel();
    for (int c = 0; c < img.channels; ++c) {
        const double mean = stats.mean[c];
        const double inv = 1.0 / stats.stddev[c];
        const float* src = img.channel(c);
        float* dst = out.channel(c);
        for (std::size_t i = 0; i < n; ++i)
            dst[i] = static_cast<float>((src[i] - mean) * inv);
    }
    return out;
}

namespace {

Image random_resized_crop(const Image& img, double area_min, double area_max, int out_size,
                          Rng& rng) {
    const int side_limit = std::min(img.height, img.width);
    const double frac = rng.uniform(area_min, area_max);
    int side = static_cast<int>(std::lround(std::sqrt(frac) * side_limit));
    side = std::clamp(side, 1, side_limit);
    const int top = rng.uniform_index(img.height - side + 1);
    const int left = rng.uniform_index(img.width - side + 1);
    Image c = crop(img, top, left, side, side);
    Image r = (side == out_size) ? std::move(c) : resize_bilinear(c, out_size, out_size);
    if (rng.bernoulli(0.5)) r = flip_horizontal(r);
    const int k = rng.uniform_index(4);
    if (k != 0) r = rotate90(r, k);
    return r;
}

}  // namespace

Crops multicrop(const Image& img, const MulticropConfig& cfg, Rng& rng) {
    if (cfg.global_size > std::min(img.height, img.width) ||
        cfg.local_size > std::min(img.height, img.width))
        throw ConfigError("multicrop: crop output size exceeds image size");
    Crops out;
    out.global_crops.reserve(cfg.n_global);
    out.local_crops.reserve(cfg.n_local);
    for (int i = 0; i < cfg.n_global; ++i)
        out.global_crops.push_back(
            random_resized_crop(img, cfg.global_area_min, cfg.global_area_max, cfg.global_size, rng));
    for (int i = 0; i < cfg.n_local; ++i)
        out.local_crops.push_back(
            random_resized_crop(img, cfg.local_area_min, cfg.local_area_max, cfg.local_size, rng));
    return out;
}

}  // namespace setdino::imageproc
