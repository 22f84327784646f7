#include "setdino/dataset.hpp"

#include <filesystem>

#include "setdino/io.hpp"

namespace setdino::data {

Image ProceduralStore::load(const synthgen::CellMeta& meta) const {
    return synthgen::render_cell(world_, meta.gene_id, meta.guide_id, meta.batch_id,
                                 meta.cell_seed)
        .image;
}

Image FileStore::load(const synthgen::CellMeta& meta) const {
    if (meta.image_path.empty())
        throw DataError("cell " + std::to_string(meta.cell_id) + " has no image path");
    std::filesystem::path p = std::filesystem::path(root_) / meta.image_path;
    return io::read_image_file(p.string());
}

const char* normalization_name(Normalization n) {
    return n == Normalization::kZscore ? "zscore" : "ntc_zscore";
}

Normalization normalization_from_name(const std::string& name) {
    if (name == "zscore") return Normalization::kZscore;
    if (name == "ntc_zscore") return Normalization::kNtcZscore;
    throw ConfigError("unknown normalization: " + name + " (expected zscore|ntc_zscore)");
}

Preprocessor::Preprocessor(const synthgen::Manifest* manifest, const ImageStore* store,
                           Normalization normalization, double clip_lo, double clip_hi,
                           std::size_t cache_budget_bytes)
    : manifest_(manifest),
      store_(store),
      normalization_(normalization),
      clip_lo_(clip_lo),
      clip_hi_(clip_hi),
      cache_budget_(cache_budget_bytes) {}

const imageproc::NtcStats& Preprocessor::ntc_stats(int batch_id) const {
    std::lock_guard<std::mutex> lock(mutex_);
    auto it = stats_.find(batch_id);
    if (it != stats_.end()) return it->second;

    std::vector<Image> clipped;
    for (const auto& cell : manifest_->cells) {
        if (cell.batch_id != batch_id || cell.gene_id != synthgen::kNtcGene) continue;
        clipped.push_back(imageproc::clip_and_rescale(store_->load(cell), clip_lo_, clip_hi_));
    }
    std::vector<const Image*> ptrs;
    ptrs.reserve(clipped.size());
    for (const auto& im : clipped) ptrs.push_back(&im);
    auto [ins, _] = stats_.emplace(batch_id, imageproc::compute_ntc_stats(ptrs, batch_id));
    return ins->second;
}

Image Preprocessor::process_uncached(const synthgen::CellMeta& meta) const {
    Image clipped = imageproc::clip_and_rescale(store_->load(meta), clip_lo_, clip_hi_);
    if (normalization_ == Normalization::kZscore) return imageproc::zscore_normalize(clipped);
    return imageproc::ntc_zscore_normalize(clipped, ntc_stats(meta.batch_id), meta.batch_id);
}

std::shared_ptr<const Image> Preprocessor::process(const synthgen::CellMeta& meta) const {
    {
        std::lock_guard<std::mutex> lock(mutex_);
        auto it = cache_.find(meta.cell_id);
        if (it != cache_.end()) return it->second;
    }
    // NTC stats are resolved before heavy work so the first ntc_zscore call
    // per batch computes them exactly once
    if (normalization_ == Normalization::kNtcZscore) ntc_stats(meta.batch_id);
    auto img = std::make_shared<const Image>(process_uncached(meta));
    std::lock_guard<std::mutex> lock(mutex_);
    auto it = cache_.find(meta.cell_id);
    if (it != cache_.end()) return it->second;
    const std::size_t bytes = img->size() * sizeof(float);
    if (cache_bytes_ + bytes <= cache_budget_) {
        cache_.emplace(meta.cell_id, img);
        cache_bytes_ += bytes;
    }
    return img;
}

}  // namespace setdino::data
