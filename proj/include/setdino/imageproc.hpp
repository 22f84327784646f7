#pragma once

#include <vector>

#include "setdino/common.hpp"
#include "setdino/image.hpp"

namespace setdino::imageproc {

// Pooled per-channel pixel statistics of the non-targeting controls of one
// batch, computed on clipped images. Feeds ntc_zscore_normalize.
struct NtcStats {
    int batch_id = -1;
    std::vector<double> mean;  // one per channel
    std::vector<double> stddev;
    long n_cells = 0;
};

// Per-channel percentile clip to [P_lo, P_hi] followed by a linear map to
// [0, 1]. Constant channels map to all-zeros.
Image clip_and_rescale(const Image& img, double lo_pct = 0.1, double hi_pct = 99.9);

// Per-channel z-score. Zero-variance channels come back as zeros with a
// warning instead of an error (single-cell crops can have empty channels).
Image zscore_normalize(const Image& img);

// Pooled pixel mean/std over all NTC images of one batch, per channel.
// Throws DataError when the batch has no NTC images or zero pooled variance.
NtcStats compute_ntc_stats(const std::vector<const Image*>& ntc_images, int batch_id);

// (image - ntc_mean) / ntc_std per channel. image_batch_id must match the
// batch the stats were computed from.
Image ntc_zscore_normalize(const Image& img, const NtcStats& stats, int image_batch_id);

// Percentile with linear interpolation over the sorted values (pct in [0,100]).
double percentile(std::vector<float> values, double pct);

struct MulticropConfig {
    int n_global = 2;
    int n_local = 8;
    int global_size = 32;   // model input side for global crops
    int local_size = 16;    // model input side for local crops
    double global_area_min = 0.5;
    double global_area_max = 1.0;
    double local_area_min = 0.15;
    double local_area_max = 0.40;
};

struct Crops {
    std::vector<Image> global_crops;
    std::vector<Image> local_crops;
};

// Random square crops resized to the configured input sizes, with random
// horizontal flips and 90-degree rotations. Deterministic given rng state.
Crops multicrop(const Image& img, const MulticropConfig& cfg, Rng& rng);

}  // namespace setdino::imageproc
