#include "setdino/sampler.hpp"

#include <algorithm>

namespace setdino::sampler {

const char* strategy_name(Strategy s) {
    switch (s) {
        case Strategy::kSameCells: return "same_cells";
        case Strategy::kWithinBatch: return "within_batch";
        default: return "cross_batch";
    }
}

Strategy strategy_from_name(const std::string& name) {
    if (name == "same_cells") return Strategy::kSameCells;
    if (name == "within_batch") return Strategy::kWithinBatch;
    if (name == "cross_batch") return Strategy::kCrossBatch;
    throw ConfigError("unknown sampling strategy: " + name +
                      " (expected same_cells|within_batch|cross_batch)");
}

const char* level_name(Level l) { return l == Level::kSgRna ? "sgRNA" : "gene_target"; }

Level level_from_name(const std::string& name) {
    if (name == "sgRNA" || name == "sgrna" || name == "guide") return Level::kSgRna;
    if (name == "gene_target" || name == "gene") return Level::kGeneTarget;
    throw ConfigError("unknown sampling level: " + name + " (expected sgRNA|gene_target)");
}

ManifestIndex::ManifestIndex(const synthgen::Manifest& manifest, Level level,
                             std::optional<synthgen::Split> split)
    : manifest_(&manifest), level_(level), n_batches_(manifest.n_batches) {
    int key_min = 0, key_max = -1;
    for (const auto& cell : manifest.cells) {
        const int key = (level == Level::kSgRna) ? cell.guide_id : cell.gene_id;
        key_min = std::min(key_min, key);
        key_max = std::max(key_max, key);
    }
    key_offset_ = -key_min;  // NTC gene key is negative
    key_slot_.assign(static_cast<std::size_t>(key_max + key_offset_ + 1), -1);

    for (std::size_t i = 0; i < manifest.cells.size(); ++i) {
        const auto& cell = manifest.cells[i];
        if (split && cell.split != *split) continue;
        const int key = (level == Level::kSgRna) ? cell.guide_id : cell.gene_id;
        int& slot = key_slot_[key + key_offset_];
        if (slot < 0) {
            slot = static_cast<int>(cells_.size());
            keys_.push_back(key);
            cells_.emplace_back(n_batches_);
        }
        cells_[slot][cell.batch_id].push_back(static_cast<int>(i));
    }
    std::vector<int> order(keys_.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    std::sort(order.begin(), order.end(), [&](int a, int b) { return keys_[a] < keys_[b]; });
    std::vector<int> sorted_keys(keys_.size());
    std::vector<std::vector<std::vector<int>>> sorted_cells(cells_.size());
    for (std::size_t i = 0; i < order.size(); ++i) {
        sorted_keys[i] = keys_[order[i]];
        sorted_cells[i] = std::move(cells_[order[i]]);
        key_slot_[sorted_keys[i] + key_offset_] = static_cast<int>(i);
    }
    keys_ = std::move(sorted_keys);
    cells_ = std::move(sorted_cells);
}

const std::vector<int>& ManifestIndex::cells(int key, int batch) const {
    const std::size_t idx = static_cast<std::size_t>(key + key_offset_);
    if (idx >= key_slot_.size() || key_slot_[idx] < 0) return empty_;
    if (batch < 0 || batch >= n_batches_) return empty_;
    return cells_[key_slot_[idx]][batch];
}

int ManifestIndex::count(int key, int batch) const {
    return static_cast<int>(cells(key, batch).size());
}

namespace {

std::vector<int> pick_cells(const std::vector<int>& pool, int n, Rng& rng) {
    std::vector<int> idx = rng.sample_without_replacement(static_cast<int>(pool.size()), n);
    std::vector<int> out(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) out[i] = pool[idx[i]];
    return out;
}

// fills pair's batches/cells; false when the perturbation is infeasible
bool sample_pair(const ManifestIndex& index, Strategy strategy, int key, int n, Rng& rng,
                 SetPair& pair) {
    std::vector<int> eligible;
    switch (strategy) {
        case Strategy::kSameCells: {
            for (int b = 0; b < index.n_batches(); ++b)
                if (index.count(key, b) >= n) eligible.push_back(b);
            if (eligible.empty()) return false;
            const int b = eligible[rng.uniform_index(static_cast<int>(eligible.size()))];
            pair.student_batch = pair.teacher_batch = b;
            pair.student_cells = pick_cells(index.cells(key, b), n, rng);
            pair.teacher_cells = pair.student_cells;
            return true;
        }
        case Strategy::kWithinBatch: {
            for (int b = 0; b < index.n_batches(); ++b)
                if (index.count(key, b) >= 2 * n) eligible.push_back(b);
            if (eligible.empty()) return false;
            const int b = eligible[rng.uniform_index(static_cast<int>(eligible.size()))];
            pair.student_batch = pair.teacher_batch = b;
            std::vector<int> both = pick_cells(index.cells(key, b), 2 * n, rng);
            pair.student_cells.assign(both.begin(), both.begin() + n);
            pair.teacher_cells.assign(both.begin() + n, both.end());
            return true;
        }
        default: {  // cross-batch
            for (int b = 0; b < index.n_batches(); ++b)
                if (index.count(key, b) >= n) eligible.push_back(b);
            if (eligible.size() < 2) return false;
            const int i = rng.uniform_index(static_cast<int>(eligible.size()));
            int j = rng.uniform_index(static_cast<int>(eligible.size()) - 1);
            if (j >= i) ++j;
            pair.student_batch = eligible[i];
            pair.teacher_batch = eligible[j];
            pair.student_cells = pick_cells(index.cells(key, pair.student_batch), n, rng);
            pair.teacher_cells = pick_cells(index.cells(key, pair.teacher_batch), n, rng);
            return true;
        }
    }
}

}  // namespace

MinibatchPlan build_minibatch(const ManifestIndex& index, Strategy strategy,
                              int n_perturbations, int set_size, Rng& rng) {
    if (set_size < 1) throw ConfigError("build_minibatch: set_size must be >= 1");
    if (n_perturbations < 1) throw ConfigError("build_minibatch: n_perturbations must be >= 1");

    MinibatchPlan plan;
    plan.n_perturbations = n_perturbations;
    plan.set_size = set_size;

    // walking a shuffled pool samples perturbations uniformly without
    // replacement while letting us skip infeasible ones deterministically
    std::vector<int> pool = index.keys();
    rng.shuffle(pool);
    for (int key : pool) {
        if (static_cast<int>(plan.set_pairs.size()) >= n_perturbations) break;
        SetPair pair;
        pair.perturbation_key = key;
        pair.strategy = strategy;
        pair.level = index.level();
        if (sample_pair(index, strategy, key, set_size, rng, pair)) {
            plan.set_pairs.push_back(std::move(pair));
        } else {
            ++plan.skipped;
        }
    }
    if (static_cast<int>(plan.set_pairs.size()) < n_perturbations) {
        warn("build_minibatch: only " + std::to_string(plan.set_pairs.size()) + " of " +
             std::to_string(n_perturbations) + " perturbations feasible for strategy " +
             strategy_name(strategy) + " with n=" + std::to_string(set_size));
    }
    return plan;
}

EpochIterator::EpochIterator(const ManifestIndex* index, Strategy strategy,
                             int n_perturbations, int set_size, int steps_per_epoch,
                             std::uint64_t seed)
    : index_(index),
      strategy_(strategy),
      n_perturbations_(n_perturbations),
      set_size_(set_size),
      steps_per_epoch_(steps_per_epoch),
      seed_(seed) {
    if (steps_per_epoch < 1) throw ConfigError("epoch_iterator: steps_per_epoch must be >= 1");
}

MinibatchPlan EpochIterator::plan_for(int epoch, int step) const {
    Rng rng(hash_mix(seed_, 0x6d62, static_cast<std::uint64_t>(epoch),
                     static_cast<std::uint64_t>(step)));
    return build_minibatch(*index_, strategy_, n_perturbations_, set_size_, rng);
}

MinibatchPlan EpochIterator::next() {
    MinibatchPlan plan = plan_for(epoch_, step_);
    if (++step_ >= steps_per_epoch_) {
        step_ = 0;
        ++epoch_;
    }
    return plan;
}

void EpochIterator::seek(int epoch, int step) {
    epoch_ = epoch;
    step_ = step;
}

}  // namespace setdino::sampler
