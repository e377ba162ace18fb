#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "precise/dataset.hpp"

namespace precise {

// Single-run classification metrics, percentages in [0, 100].
struct Metrics {
  std::size_t samples = 0;
  double accuracy = 0.0;
  double macro_f1 = 0.0;
  // Absent for classes with no test samples.
  std::vector<std::optional<double>> class_accuracy;
  std::vector<std::vector<std::size_t>> confusion;  // [true][predicted]
};

// Macro F1 averages over classes present in `labels`; a class with no true
// positives scores F1 = 0.
Metrics compute_metrics(std::span<const ClassIndex> labels, std::span<const ClassIndex> predictions,
                        std::size_t num_classes);

// Index of the largest entry, lowest index on ties.
template <typename T>
ClassIndex argmax(std::span<const T> row) {
  ClassIndex best = 0;
  for (std::size_t j = 1; j < row.size(); ++j)
    if (row[j] > row[best]) best = j;
  return best;
}

struct Aggregate {
  double mean = 0.0;
  double std = 0.0;  // sample std; 0 for a single value
};

Aggregate aggregate(std::span<const double> values);

struct MetricsReport {
  std::vector<std::uint64_t> seeds;
  std::vector<Metrics> per_seed;
  Aggregate accuracy;
  Aggregate macro_f1;
  std::vector<std::optional<Aggregate>> class_accuracy;
  std::string config_echo;
};

MetricsReport make_report(std::vector<std::uint64_t> seeds, std::vector<Metrics> per_seed);

}  // namespace precise
