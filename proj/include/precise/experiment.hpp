#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "precise/metrics.hpp"
#include "precise/training.hpp"

namespace precise {

template <typename T>
struct SeedOutcome {
  std::uint64_t seed = 0;
  std::vector<std::size_t> subset_counts;  // per-class training counts actually used
  Metrics metrics;
  std::optional<PreciseModel<T>> model;
  TrainHistory history;
};

template <typename T>
struct MultiSeedResult {
  std::vector<SeedOutcome<T>> outcomes;
  MetricsReport report;
};

// Seed i of the run is config.seed + i. Its training subset depends only on
// that seed and the fraction, so runs that differ in mode, lambda or d train
// on identical draws. Seeds run on up to config.workers threads.
template <typename T>
MultiSeedResult<T> run_multiseed(const TrainConfig& config, const LabeledDataset& train_set,
                                 const LabeledDataset& test_set, bool keep_models = true);

struct SweepRow {
  double value = 0.0;  // subset fraction or prototypes per class
  MetricsReport report;
  std::vector<std::vector<std::size_t>> subset_counts;  // per seed
};

inline const std::vector<double> kDefaultFractions = {0.01, 0.05, 0.10, 0.25, 0.50, 1.00};
inline const std::vector<std::size_t> kDefaultPrototypeCounts = {1, 2, 3, 4, 5};

template <typename T>
std::vector<SweepRow> sweep_subsets(const TrainConfig& config, const std::vector<double>& fractions,
                                    const LabeledDataset& train_set, const LabeledDataset& test_set);

template <typename T>
std::vector<SweepRow> sweep_prototypes(const TrainConfig& config, const std::vector<std::size_t>& per_class_values,
                                       const LabeledDataset& train_set, const LabeledDataset& test_set);

// "fraction_or_d,seed,accuracy,macro_f1,acc_class_0,...": one row per seed,
// then "mean" and "std" rows per swept value. Absent class accuracies are
// left empty.
void write_results_csv(std::ostream& out, const std::vector<SweepRow>& rows, std::size_t num_classes);

}  // namespace precise
