#include "setdino/synthgen.hpp"

#include <algorithm>
#include <cmath>

namespace setdino::synthgen {

namespace {

constexpr std::uint64_t kTagWorld = 0x5747;     // world generation stream
constexpr std::uint64_t kTagParams = 0xA117;    // per-cell parameter stream
constexpr std::uint64_t kTagNoise = 0xB229;     // per-cell pixel-noise stream
constexpr std::uint64_t kTagEscaper = 0xC331;   // per-cell escaper coin
constexpr std::uint64_t kTagPosition = 0xD443;  // per-cell well position

constexpr double kTwoPi = 6.283185307179586;

void require(bool ok, const std::string& field, const std::string& why) {
    if (!ok) throw ConfigError("world config: " + field + " " + why);
}

}  // namespace

void WorldConfig::validate() const {
    require(n_genes >= 1, "n_genes", "must be >= 1");
    require(guides_per_gene >= 1, "guides_per_gene", "must be >= 1");
    require(n_ntc_guides >= 1, "n_ntc_guides", "must be >= 1 (NTC z-score needs controls)");
    require(n_batches >= 1, "n_batches", "must be >= 1");
    require(image_size >= 16, "image_size", "must be >= 16");
    require(n_modules >= 0, "n_modules", "must be >= 0");
    require(module_size >= 2 || n_modules == 0, "module_size", "must be >= 2");
    require(n_modules * module_size <= n_genes, "n_modules",
            "module genes exceed n_genes");
    require(module_cos_floor > 0.0 && module_cos_floor < 1.0, "module_cos_floor",
            "must lie in (0, 1)");
    require(effect_sparsity_min >= 1 && effect_sparsity_max >= effect_sparsity_min &&
                effect_sparsity_max <= kMorphParamCount,
            "effect_sparsity", "must satisfy 1 <= min <= max <= param count");
    require(effect_magnitude_median > 0.0, "effect_magnitude_median", "must be > 0");
    require(guide_efficacy_min >= 0.0 && guide_efficacy_max <= 1.0 &&
                guide_efficacy_min <= guide_efficacy_max,
            "guide_efficacy", "range must lie inside [0, 1]");
    require(escaper_rate >= 0.0 && escaper_rate <= 1.0, "escaper_rate",
            "must lie in [0, 1]");
    require(gain_min > 0.0 && gain_max >= gain_min, "gain", "range must be positive");
    require(offset_min >= 0.0 && offset_max >= offset_min, "offset",
            "range must be nonnegative");
    require(blur_sigma_min >= 0.0 && blur_sigma_max >= blur_sigma_min, "blur_sigma",
            "range must be nonnegative");
    require(cell_param_noise >= 0.0, "cell_param_noise", "must be >= 0");
    require(pixel_noise >= 0.0, "pixel_noise", "must be >= 0");
    require(illumination_plane_strength >= 0.0 && illumination_plane_strength <= 0.9,
            "illumination_plane_strength", "must lie in [0, 0.9]");
    require(train_batches >= 0 && val_batches >= 0 && test_batches >= 0 &&
                train_batches + val_batches + test_batches == n_batches,
            "train/val/test_batches", "must partition n_batches");
}

int WorldSpec::gene_of_guide(int guide_id) const {
    if (guide_id < 0 || guide_id >= total_guides())
        throw DataError("unknown guide id " + std::to_string(guide_id));
    if (is_ntc_guide(guide_id)) return kNtcGene;
    return guide_id / config.guides_per_gene;
}

const char* split_name(Split s) {
    switch (s) {
        case Split::kTrain: return "train";
        case Split::kVal: return "val";
        default: return "test";
    }
}

Split split_from_name(const std::string& name) {
    if (name == "train") return Split::kTrain;
    if (name == "val") return Split::kVal;
    if (name == "test") return Split::kTest;
    throw DataError("unknown split name: " + name);
}

namespace {

using Effect = std::array<float, kMorphParamCount>;

double dot(const Effect& a, const Effect& b) {
    double s = 0.0;
    for (int i = 0; i < kMorphParamCount; ++i) s += static_cast<double>(a[i]) * b[i];
    return s;
}

double norm(const Effect& a) { return std::sqrt(dot(a, a)); }

void normalize(Effect& a) {
    double n = norm(a);
    if (n < 1e-12) { a[0] = 1.f; n = 1.0; }
    for (auto& v : a) v = static_cast<float>(v / n);
}

Effect random_unit_on_support(Rng& rng, const std::vector<int>& support) {
    Effect e{};
    for (int idx : support) e[idx] = static_cast<float>(rng.normal());
    normalize(e);
    return e;
}

double lognormal_magnitude(Rng& rng, const WorldConfig& cfg) {
    return cfg.effect_magnitude_median * std::exp(cfg.effect_magnitude_log_sigma * rng.normal());
}

}  // namespace

WorldSpec generate_world(const WorldConfig& config, std::uint64_t seed) {
    config.validate();
    WorldSpec world;
    world.config = config;
    world.rng_seed = seed;
    world.escaper_rate = static_cast<float>(config.escaper_rate);
    world.gene_effects.assign(config.n_genes, Effect{});
    world.module_assignment.assign(config.n_genes, -1);

    Rng rng(hash_mix(seed, kTagWorld));

    const int n_curated = (config.n_modules + 1) / 2;
    world.module_curated.assign(config.n_modules, false);
    for (int m = 0; m < n_curated; ++m) world.module_curated[m] = true;

    // members of a module stay within half the floor angle of a shared
    // center direction, which bounds every within-module pairwise cosine
    // from below by the floor
    const double member_cos = std::cos(std::acos(config.module_cos_floor) / 2.0);

    int next_gene = 0;
    for (int m = 0; m < config.n_modules; ++m) {
        const int k = config.effect_sparsity_min +
                      rng.uniform_index(config.effect_sparsity_max - config.effect_sparsity_min + 1);
        std::vector<int> support = rng.sample_without_replacement(kMorphParamCount, k);
        std::sort(support.begin(), support.end());
        const Effect center = random_unit_on_support(rng, support);
        for (int j = 0; j < config.module_size; ++j) {
            Effect dir;
            double delta = 0.35;
            for (int attempt = 0;; ++attempt) {
                Effect z = random_unit_on_support(rng, support);
                dir = center;
                for (int i = 0; i < kMorphParamCount; ++i)
                    dir[i] += static_cast<float>(delta) * z[i];
                normalize(dir);
                if (dot(dir, center) >= member_cos || attempt > 200) break;
                delta *= 0.7;
            }
            double mag = lognormal_magnitude(rng, config);
            if (world.module_curated[m]) mag *= config.curated_magnitude_boost;
            Effect eff{};
            for (int i = 0; i < kMorphParamCount; ++i)
                eff[i] = static_cast<float>(dir[i] * mag);
            world.gene_effects[next_gene] = eff;
            world.module_assignment[next_gene] = m;
            ++next_gene;
        }
    }

    for (int g = next_gene; g < config.n_genes; ++g) {
        const int k = config.effect_sparsity_min +
                      rng.uniform_index(config.effect_sparsity_max - config.effect_sparsity_min + 1);
        std::vector<int> support = rng.sample_without_replacement(kMorphParamCount, k);
        std::sort(support.begin(), support.end());
        Effect dir = random_unit_on_support(rng, support);
        double mag = lognormal_magnitude(rng, config);
        for (int i = 0; i < kMorphParamCount; ++i)
            dir[i] = static_cast<float>(dir[i] * mag);
        world.gene_effects[g] = dir;
    }

    const int n_targeting = config.n_genes * config.guides_per_gene;
    world.guide_efficacy.resize(n_targeting + config.n_ntc_guides);
    for (int g = 0; g < n_targeting; ++g)
        world.guide_efficacy[g] =
            static_cast<float>(rng.uniform(config.guide_efficacy_min, config.guide_efficacy_max));
    for (int g = n_targeting; g < world.total_guides(); ++g)
        world.guide_efficacy[g] = 0.f;

    world.batch_confounders.resize(config.n_batches);
    for (auto& bc : world.batch_confounders) {
        for (int c = 0; c < 4; ++c)
            bc.gain[c] = static_cast<float>(rng.uniform(config.gain_min, config.gain_max));
        for (int c = 0; c < 4; ++c)
            bc.offset[c] = static_cast<float>(rng.uniform(config.offset_min, config.offset_max));
        bc.blur_sigma = static_cast<float>(rng.uniform(config.blur_sigma_min, config.blur_sigma_max));
    }
    return world;
}

std::vector<std::pair<int, int>> ground_truth_edges(const WorldSpec& world) {
    std::vector<std::vector<int>> members(world.config.n_modules);
    for (int g = 0; g < world.config.n_genes; ++g)
        if (world.module_assignment[g] >= 0) members[world.module_assignment[g]].push_back(g);
    std::vector<std::pair<int, int>> edges;
    for (const auto& mod : members)
        for (std::size_t i = 0; i < mod.size(); ++i)
            for (std::size_t j = i + 1; j < mod.size(); ++j)
                edges.emplace_back(mod[i], mod[j]);
    return edges;
}

std::vector<std::pair<int, int>> curated_truth_edges(const WorldSpec& world) {
    std::vector<std::pair<int, int>> edges;
    for (auto [a, b] : ground_truth_edges(world)) {
        int m = world.module_assignment[a];
        if (m >= 0 && world.module_curated[m]) edges.emplace_back(a, b);
    }
    return edges;
}

// ---------------------------------------------------------------------------
// Procedural renderer
// ---------------------------------------------------------------------------

namespace {

struct RenderScene {
    float cx, cy;            // nucleus center, pixels
    float theta;             // cell orientation
    float nucleus_radius;    // pixels
    float eccentricity;      // [0, 0.85]
    float cyto_radius;       // pixels
    std::array<float, 4> intensity;
    int filament_count;
    float coherence;         // [0,1]; 1 = aligned filaments
    float chrom_wx, chrom_wy, chrom_px, chrom_py;
};

// soft ellipse: ~1 inside, 0.5 at the boundary, 0 outside
inline float soft_ellipse(float x, float y, float cx, float cy, float theta, float radius,
                          float ecc, float edge_px) {
    const float dx = x - cx, dy = y - cy;
    const float ct = std::cos(theta), st = std::sin(theta);
    const float rx = ct * dx + st * dy;
    const float ry = -st * dx + ct * dy;
    const float stretch = std::sqrt(1.f - ecc);
    const float a = radius / stretch;
    const float b = radius * stretch;
    const float d = std::sqrt((rx / a) * (rx / a) + (ry / b) * (ry / b));
    const float z = (1.f - d) * radius / edge_px;
    return 1.f / (1.f + std::exp(-z));
}

inline void add_dab(Image& img, int c, float cx, float cy, float sigma, float amp) {
    const int r = std::max(1, static_cast<int>(std::ceil(2.5f * sigma)));
    const int x0 = std::max(0, static_cast<int>(cx) - r);
    const int x1 = std::min(img.width - 1, static_cast<int>(cx) + r);
    const int y0 = std::max(0, static_cast<int>(cy) - r);
    const int y1 = std::min(img.height - 1, static_cast<int>(cy) + r);
    const float inv = 1.f / (2.f * sigma * sigma);
    for (int y = y0; y <= y1; ++y)
        for (int x = x0; x <= x1; ++x) {
            const float d2 = (x - cx) * (x - cx) + (y - cy) * (y - cy);
            img.at(c, y, x) += amp * std::exp(-d2 * inv);
        }
}

void add_filament(Image& img, int c, float x0, float y0, float angle, float length, float amp) {
    const float step = 0.7f;
    const int n = std::max(2, static_cast<int>(length / step));
    const float dx = std::cos(angle) * step, dy = std::sin(angle) * step;
    float x = x0, y = y0;
    for (int i = 0; i < n; ++i) {
        add_dab(img, c, x, y, 0.9f, amp);
        x += dx;
        y += dy;
    }
}

RenderScene build_scene(const WorldSpec& world, const Effect& params, Rng& rng) {
    const int size = world.config.image_size;
    RenderScene s;
    s.cx = size * 0.5f + static_cast<float>(rng.uniform(-0.06, 0.06)) * size;
    s.cy = size * 0.5f + static_cast<float>(rng.uniform(-0.06, 0.06)) * size;
    s.theta = static_cast<float>(rng.uniform(0.0, kTwoPi));
    s.nucleus_radius = 0.14f * size * std::max(0.25f, 1.f + params[kNucleusRadius]);
    s.eccentricity = std::clamp(0.18f + params[kNucleusEccentricity], 0.f, 0.85f);
    s.cyto_radius = 0.34f * size * std::max(0.30f, 1.f + params[kCytoRadius]);
    for (int c = 0; c < 4; ++c)
        s.intensity[c] = std::max(0.02f, 1.f + params[kIntensityDna + c]);
    s.filament_count =
        std::clamp(static_cast<int>(std::lround(7.0 * std::max(0.f, 1.f + params[kFilamentCount]))),
                   0, 40);
    s.coherence = std::clamp(0.35f + params[kFilamentCoherence], 0.f, 1.f);
    s.chrom_wx = static_cast<float>(rng.uniform(0.3, 0.9));
    s.chrom_wy = static_cast<float>(rng.uniform(0.3, 0.9));
    s.chrom_px = static_cast<float>(rng.uniform(0.0, kTwoPi));
    s.chrom_py = static_cast<float>(rng.uniform(0.0, kTwoPi));
    return s;
}

void rasterize(const RenderScene& s, Image& img, Rng& rng) {
    const int size = img.height;

    // ch0: DNA — nucleus with mild chromatin modulation
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) {
            const float m =
                soft_ellipse(x, y, s.cx, s.cy, s.theta, s.nucleus_radius, s.eccentricity, 1.2f);
            const float chrom = 1.f + 0.15f * std::sin(s.chrom_wx * x + s.chrom_px) *
                                          std::sin(s.chrom_wy * y + s.chrom_py);
            img.at(0, y, x) = m * chrom;
        }

    // ch1: DNA damage — speckles inside the nucleus over a faint nucleus floor
    const int n_speckles = 5;
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x)
            img.at(1, y, x) = 0.08f * soft_ellipse(x, y, s.cx, s.cy, s.theta, s.nucleus_radius,
                                                   s.eccentricity, 1.2f);
    for (int i = 0; i < n_speckles; ++i) {
        const float ang = static_cast<float>(rng.uniform(0.0, kTwoPi));
        const float rad = static_cast<float>(rng.uniform(0.0, 0.75)) * s.nucleus_radius;
        const float amp = static_cast<float>(rng.uniform(0.5, 1.0));
        add_dab(img, 1, s.cx + rad * std::cos(ang), s.cy + rad * std::sin(ang), 1.2f, amp);
    }

    // ch2: F-actin — cytoplasm body, cortical ring, a few radial filaments
    const float ring_sigma = 1.8f;
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) {
            const float body = soft_ellipse(x, y, s.cx, s.cy, s.theta, s.cyto_radius,
                                            s.eccentricity * 0.5f, 3.0f);
            const float dx = x - s.cx, dy = y - s.cy;
            const float d = std::sqrt(dx * dx + dy * dy);
            const float ring = std::exp(-0.5f * (d - s.cyto_radius) * (d - s.cyto_radius) /
                                        (ring_sigma * ring_sigma));
            img.at(2, y, x) = 0.35f * body + 0.55f * ring;
        }
    const int n_actin = s.filament_count / 2;
    for (int i = 0; i < n_actin; ++i) {
        const float ang = static_cast<float>(rng.uniform(0.0, kTwoPi));
        const float len = static_cast<float>(rng.uniform(0.55, 0.95)) * s.cyto_radius;
        add_filament(img, 2, s.cx, s.cy, ang, len, 0.35f);
    }

    // ch3: tubulin — filaments radiating from a centrosome near the nucleus edge
    const float cen_ang = static_cast<float>(rng.uniform(0.0, kTwoPi));
    const float cen_x = s.cx + (s.nucleus_radius + 2.f) * std::cos(cen_ang);
    const float cen_y = s.cy + (s.nucleus_radius + 2.f) * std::sin(cen_ang);
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x)
            img.at(3, y, x) = 0.12f * soft_ellipse(x, y, s.cx, s.cy, s.theta, s.cyto_radius,
                                                   s.eccentricity * 0.5f, 3.0f);
    const float fil_base = static_cast<float>(rng.uniform(0.0, kTwoPi));
    for (int i = 0; i < s.filament_count; ++i) {
        const float jitter = static_cast<float>(rng.uniform(-1.0, 1.0)) *
                             (1.f - s.coherence) * 3.14159265f;
        const float ang = fil_base + jitter;
        const float len = static_cast<float>(rng.uniform(0.5, 1.0)) * s.cyto_radius * 1.15f;
        const float amp = 0.55f * static_cast<float>(rng.uniform(0.7, 1.0));
        add_filament(img, 3, cen_x, cen_y, ang, len, amp);
    }

    for (int c = 0; c < 4; ++c) {
        float* ch = img.channel(c);
        const std::size_t n = img.pixels_per_channel();
        for (std::size_t i = 0; i < n; ++i) ch[i] *= s.intensity[c];
    }
}

}  // namespace

CellMeta cell_meta(const WorldSpec& world, int gene_id, int guide_id, int batch_id,
                   std::uint64_t cell_seed) {
    if (guide_id < 0 || guide_id >= world.total_guides())
        throw DataError("render_cell: unknown guide id " + std::to_string(guide_id));
    if (batch_id < 0 || batch_id >= world.config.n_batches)
        throw DataError("render_cell: unknown batch id " + std::to_string(batch_id));
    if (world.gene_of_guide(guide_id) != gene_id)
        throw DataError("render_cell: guide " + std::to_string(guide_id) +
                        " does not target gene " + std::to_string(gene_id));
    CellMeta meta;
    meta.gene_id = gene_id;
    meta.guide_id = guide_id;
    meta.batch_id = batch_id;
    meta.cell_seed = cell_seed;
    Rng escaper_rng(hash_mix(cell_seed, kTagEscaper));
    meta.escaper = (gene_id != kNtcGene) && escaper_rng.bernoulli(world.escaper_rate);
    Rng pos_rng(hash_mix(cell_seed, kTagPosition));
    meta.well_row = static_cast<float>(pos_rng.uniform());
    meta.well_col = static_cast<float>(pos_rng.uniform());
    return meta;
}

CellRecord render_cell(const WorldSpec& world, int gene_id, int guide_id, int batch_id,
                       std::uint64_t cell_seed) {
    CellRecord rec;
    rec.meta = cell_meta(world, gene_id, guide_id, batch_id, cell_seed);

    Effect params{};
    if (gene_id != kNtcGene && !rec.meta.escaper) {
        const float eff = world.guide_efficacy[guide_id];
        for (int i = 0; i < kMorphParamCount; ++i)
            params[i] = world.gene_effects[gene_id][i] * eff;
    }
    Rng param_rng(hash_mix(cell_seed, kTagParams));
    for (int i = 0; i < kMorphParamCount; ++i)
        params[i] += static_cast<float>(world.config.cell_param_noise * param_rng.normal());

    const int size = world.config.image_size;
    rec.image = Image(4, size, size);
    RenderScene scene = build_scene(world, params, param_rng);
    rasterize(scene, rec.image, param_rng);

    if (world.config.pixel_noise > 0.0) {
        Rng noise_rng(hash_mix(cell_seed, kTagNoise));
        const float sigma = static_cast<float>(world.config.pixel_noise);
        for (auto& v : rec.image.data)
            v = std::max(0.f, v + sigma * static_cast<float>(noise_rng.normal()));
    }

    if (world.config.illumination_plane_strength > 0.0) {
        const float s = static_cast<float>(world.config.illumination_plane_strength);
        for (int c = 0; c < 4; ++c)
            for (int y = 0; y < size; ++y)
                for (int x = 0; x < size; ++x) {
                    const float plane =
                        1.f + s * ((static_cast<float>(x) / (size - 1) +
                                    static_cast<float>(y) / (size - 1)) -
                                   1.f);
                    rec.image.at(c, y, x) *= plane;
                }
    }

    const BatchConfounders& bc = world.batch_confounders[batch_id];
    for (int c = 0; c < 4; ++c) {
        float* ch = rec.image.channel(c);
        const std::size_t n = rec.image.pixels_per_channel();
        for (std::size_t i = 0; i < n; ++i)
            ch[i] = std::max(0.f, bc.gain[c] * ch[i] + bc.offset[c]);
    }
    if (bc.blur_sigma > 0.f) rec.image = gaussian_blur(rec.image, bc.blur_sigma);
    return rec;
}

Manifest generate_dataset(const WorldSpec& world, int cells_per_guide_per_batch,
                          std::uint64_t seed) {
    if (cells_per_guide_per_batch < 1)
        throw ConfigError("generate_dataset: cells_per_guide_per_batch must be >= 1");
    Manifest manifest;
    manifest.n_batches = world.config.n_batches;
    manifest.image_size = world.config.image_size;
    manifest.cells.reserve(static_cast<std::size_t>(world.total_guides()) *
                           world.config.n_batches * cells_per_guide_per_batch);
    const WorldConfig& cfg = world.config;
    long next_id = 0;
    for (int batch = 0; batch < cfg.n_batches; ++batch) {
        Split split = Split::kTrain;
        if (batch >= cfg.train_batches + cfg.val_batches)
            split = Split::kTest;
        else if (batch >= cfg.train_batches)
            split = Split::kVal;
        for (int guide = 0; guide < world.total_guides(); ++guide) {
            const int gene = world.gene_of_guide(guide);
            for (int i = 0; i < cells_per_guide_per_batch; ++i) {
                const std::uint64_t cell_seed =
                    hash_mix(world.rng_seed, seed, static_cast<std::uint64_t>(batch),
                             static_cast<std::uint64_t>(guide), static_cast<std::uint64_t>(i));
                CellMeta meta = cell_meta(world, gene, guide, batch, cell_seed);
                meta.cell_id = next_id++;
                meta.split = split;
                manifest.cells.push_back(std::move(meta));
            }
        }
    }
    return manifest;
}

}  // namespace setdino::synthgen
