#pragma once

#include <optional>
#include <string>
#include <vector>

#include "setdino/common.hpp"
#include "setdino/synthgen.hpp"

namespace setdino::sampler {

enum class Strategy { kSameCells, kWithinBatch, kCrossBatch };
enum class Level { kSgRna, kGeneTarget };

const char* strategy_name(Strategy s);
Strategy strategy_from_name(const std::string& name);
const char* level_name(Level l);
Level level_from_name(const std::string& name);

// One student/teacher set pair for a single perturbation. Cell entries are
// indices into the manifest's cell list.
struct SetPair {
    int perturbation_key = 0;  // guide id at sgRNA level, gene id at gene level
    Strategy strategy = Strategy::kCrossBatch;
    Level level = Level::kSgRna;
    int student_batch = -1;
    int teacher_batch = -1;
    std::vector<int> student_cells;
    std::vector<int> teacher_cells;
};

struct MinibatchPlan {
    std::vector<SetPair> set_pairs;
    int n_perturbations = 0;  // requested N_P
    int set_size = 0;         // n
    int skipped = 0;          // perturbations dropped as infeasible
};

// Cells grouped by (perturbation key, batch) at a given level. NTC guides
// participate as perturbations; at gene level all NTC guides pool under the
// NTC sentinel key.
class ManifestIndex {
public:
    ManifestIndex(const synthgen::Manifest& manifest, Level level,
                  std::optional<synthgen::Split> split = std::nullopt);

    Level level() const { return level_; }
    int n_batches() const { return n_batches_; }
    const std::vector<int>& keys() const { return keys_; }
    const synthgen::Manifest& manifest() const { return *manifest_; }

    // cells of (key, batch); empty when none
    const std::vector<int>& cells(int key, int batch) const;
    int count(int key, int batch) const;

private:
    const synthgen::Manifest* manifest_;
    Level level_;
    int n_batches_ = 0;
    std::vector<int> keys_;                       // sorted perturbation keys
    std::vector<std::vector<std::vector<int>>> cells_;  // [key index][batch]
    std::vector<int> key_slot_;                   // key -> index (offset by 1 for NTC)
    int key_offset_ = 0;
    std::vector<int> empty_;
};

// Uniform perturbation sampling without replacement; batch (pair) uniform
// among eligible; cells uniform without replacement within (perturbation,
// batch). Infeasible perturbations are skipped after resampling; the plan is
// smaller than N_P only when the eligible pool is exhausted.
MinibatchPlan build_minibatch(const ManifestIndex& index, Strategy strategy,
                              int n_perturbations, int set_size, Rng& rng);

// Deterministic stream of plans; reshuffles every epoch.
class EpochIterator {
public:
    EpochIterator(const ManifestIndex* index, Strategy strategy, int n_perturbations,
                  int set_size, int steps_per_epoch, std::uint64_t seed);

    MinibatchPlan plan_for(int epoch, int step) const;
    MinibatchPlan next();

    int epoch() const { return epoch_; }
    int step() const { return step_; }
    int steps_per_epoch() const { return steps_per_epoch_; }
    void seek(int epoch, int step);

private:
    const ManifestIndex* index_;
    Strategy strategy_;
    int n_perturbations_;
    int set_size_;
    int steps_per_epoch_;
    std::uint64_t seed_;
    int epoch_ = 0;
    int step_ = 0;
};

}  // namespace setdino::sampler
