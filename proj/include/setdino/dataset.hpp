#pragma once

#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "setdino/image.hpp"
#include "setdino/imageproc.hpp"
#include "setdino/synthgen.hpp"

namespace setdino::data {

// Source of raw cell images. Implementations must be safe for concurrent
// load() calls.
class ImageStore {
public:
    virtual ~ImageStore() = default;
    virtual Image load(const synthgen::CellMeta& meta) const = 0;
};

// Renders images on demand from the world spec; used when the manifest
// carries no image files.
class ProceduralStore : public ImageStore {
public:
    explicit ProceduralStore(synthgen::WorldSpec world) : world_(std::move(world)) {}
    Image load(const synthgen::CellMeta& meta) const override;
    const synthgen::WorldSpec& world() const { return world_; }

private:
    synthgen::WorldSpec world_;
};

// Reads images from files referenced by the manifest (paths relative to root).
class FileStore : public ImageStore {
public:
    explicit FileStore(std::string root) : root_(std::move(root)) {}
    Image load(const synthgen::CellMeta& meta) const override;

private:
    std::string root_;
};

enum class Normalization { kZscore, kNtcZscore };
const char* normalization_name(Normalization n);
Normalization normalization_from_name(const std::string& name);

// Clip-and-rescale followed by the configured normalization. NTC statistics
// are pooled per batch over the manifest's NTC cells (clipped images) and
// cached. Normalized images are cached up to a byte budget.
class Preprocessor {
public:
    Preprocessor(const synthgen::Manifest* manifest, const ImageStore* store,
                 Normalization normalization, double clip_lo = 0.1, double clip_hi = 99.9,
                 std::size_t cache_budget_bytes = 2ull << 30);

    // Normalized image for one cell (shared, immutable).
    std::shared_ptr<const Image> process(const synthgen::CellMeta& meta) const;

    // Pooled NTC statistics of a batch (computed lazily, cached).
    const imageproc::NtcStats& ntc_stats(int batch_id) const;

    Normalization normalization() const { return normalization_; }

private:
    Image process_uncached(const synthgen::CellMeta& meta) const;

    const synthgen::Manifest* manifest_;
    const ImageStore* store_;
    Normalization normalization_;
    double clip_lo_, clip_hi_;
    std::size_t cache_budget_;

    mutable std::mutex mutex_;
    mutable std::unordered_map<int, imageproc::NtcStats> stats_;
    mutable std::unordered_map<long, std::shared_ptr<const Image>> cache_;
    mutable std::size_t cache_bytes_ = 0;
};

}  // namespace setdino::data
