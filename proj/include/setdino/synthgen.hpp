#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "setdino/common.hpp"
#include "setdino/image.hpp"

namespace setdino::synthgen {

// Sentinel gene id for non-targeting controls.
inline constexpr int kNtcGene = -1;

// Morphology parameter space of the procedural renderer. Gene effects,
// guide efficacy and per-cell noise all act additively in this space.
enum MorphParam : int {
    kNucleusRadius = 0,
    kNucleusEccentricity,
    kIntensityDna,
    kIntensityDnaDamage,
    kIntensityActin,
    kIntensityTubulin,
    kFilamentCount,
    kFilamentCoherence,
    kCytoRadius,
    kMorphParamCount
};

struct WorldConfig {
    int n_genes = 64;
    int guides_per_gene = 4;
    int n_ntc_guides = 8;
    int n_batches = 6;
    int image_size = 64;

    // gene-module ground truth (the biological-recall oracle)
    int n_modules = 8;
    int module_size = 4;
    double module_cos_floor = 0.80;

    // effect magnitude distribution (free choice, see README): lognormal
    // with the given median and log-sigma; sparse support of 2-4 params
    double effect_magnitude_median = 0.35;
    double effect_magnitude_log_sigma = 0.35;
    int effect_sparsity_min = 2;
    int effect_sparsity_max = 4;
    // curated modules (first half, rounded up) get boosted magnitudes,
    // standing in for the high-confidence complex subset
    double curated_magnitude_boost = 1.6;

    double guide_efficacy_min = 0.6;
    double guide_efficacy_max = 1.0;
    double escaper_rate = 0.05;

    // per-batch confounder ranges
    double gain_min = 0.85;
    double gain_max = 1.60;
    double offset_min = 0.00;
    double offset_max = 0.08;
    double blur_sigma_min = 0.0;
    double blur_sigma_max = 1.0;

    // per-cell nuisance
    double cell_param_noise = 0.05;
    double pixel_noise = 0.02;

    // optional multiplicative illumination plane (exercises the clipping path)
    double illumination_plane_strength = 0.0;

    // train/val/test split by batch id, mirroring a by-plate split
    int train_batches = 4;
    int val_batches = 1;
    int test_batches = 1;

    void validate() const;  // throws ConfigError naming the offending field
};

struct BatchConfounders {
    std::array<float, 4> gain{1.f, 1.f, 1.f, 1.f};
    std::array<float, 4> offset{0.f, 0.f, 0.f, 0.f};
    float blur_sigma = 0.f;
};

struct WorldSpec {
    WorldConfig config;
    std::uint64_t rng_seed = 0;

    // one effect vector per gene, in morphology-parameter space
    std::vector<std::array<float, kMorphParamCount>> gene_effects;
    std::vector<int> module_assignment;  // -1 = singleton gene
    std::vector<bool> module_curated;    // per module
    std::vector<float> guide_efficacy;   // targeting guides then NTC guides
    std::vector<BatchConfounders> batch_confounders;
    float escaper_rate = 0.f;

    int total_guides() const {
        return config.n_genes * config.guides_per_gene + config.n_ntc_guides;
    }
    bool is_ntc_guide(int guide_id) const {
        return guide_id >= config.n_genes * config.guides_per_gene &&
               guide_id < total_guides();
    }
    // kNtcGene for NTC guides
    int gene_of_guide(int guide_id) const;
};

enum class Split { kTrain, kVal, kTest };
const char* split_name(Split s);
Split split_from_name(const std::string& name);

struct CellMeta {
    long cell_id = -1;
    int gene_id = kNtcGene;
    int guide_id = -1;
    int batch_id = -1;
    bool escaper = false;
    float well_row = 0.f;  // normalized [0,1]
    float well_col = 0.f;
    std::uint64_t cell_seed = 0;
    Split split = Split::kTrain;
    std::string image_path;  // empty when images are rendered on demand
};

struct CellRecord {
    CellMeta meta;
    Image image;  // [4, H, W], finite, >= 0 before normalization
};

struct Manifest {
    std::vector<CellMeta> cells;
    int n_batches = 0;
    int channels = 4;
    int image_size = 0;
};

// Deterministic for fixed (config, seed).
WorldSpec generate_world(const WorldConfig& config, std::uint64_t seed);

// All within-module gene pairs, each once with first < second.
std::vector<std::pair<int, int>> ground_truth_edges(const WorldSpec& world);
// Edges restricted to curated modules.
std::vector<std::pair<int, int>> curated_truth_edges(const WorldSpec& world);

// Render one cell. gene_id must match the guide's target (kNtcGene for NTC
// guides); unknown ids raise DataError.
CellRecord render_cell(const WorldSpec& world, int gene_id, int guide_id, int batch_id,
                       std::uint64_t cell_seed);

// Convenience: metadata-only record (escaper flag, well position) without
// rasterizing the image.
CellMeta cell_meta(const WorldSpec& world, int gene_id, int guide_id, int batch_id,
                   std::uint64_t cell_seed);

// Every (guide, batch) pair receives exactly cells_per_guide_per_batch cells.
Manifest generate_dataset(const WorldSpec& world, int cells_per_guide_per_batch,
                          std::uint64_t seed);

}  // namespace setdino::synthgen
