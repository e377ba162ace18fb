#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "precise/adam.hpp"
#include "precise/dataset.hpp"
#include "precise/metrics.hpp"
#include "precise/model.hpp"
#include "precise/objective.hpp"

namespace precise {

struct TrainConfig {
  std::size_t epochs = 50;
  std::size_t batch_size = 16;
  double lr = 1e-3;
  double weight_decay = 1e-4;
  double lambda1 = 1.0;
  double lambda2 = 0.001;
  std::size_t per_class = 2;  // prototypes reserved per class
  PrototypeLossMode mode = PrototypeLossMode::kReserved;
  std::size_t seeds = 3;
  std::uint64_t seed = 0;  // first seed; run i uses seed + i
  double fraction = 1.0;
  std::vector<std::size_t> hidden = {128, 64};
  std::size_t latent_dim = 32;
  bool classifier_bias = true;
  std::size_t workers = 1;

  void validate() const;
  ArchitectureSpec architecture(std::size_t image_height, std::size_t image_width) const;
  AdamOptions adam() const { return {lr, weight_decay}; }
};

struct EpochRecord {
  LossBreakdown mean;  // sample-weighted over the epoch's batches
  std::optional<double> val_accuracy;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  std::vector<LossBreakdown> steps;
};

template <typename T>
struct TrainResult {
  PreciseModel<T> model;
  TrainHistory history;
};

// Called after every optimizer step with the 1-based step index.
template <typename T>
using StepObserver = std::function<void(std::size_t step, const LossBreakdown&, const PreciseModel<T>&)>;

// Joint training of all components with Adam. Class weights come from the
// training set's counts. Deterministic given (data, config, seed).
template <typename T>
TrainResult<T> train(const LabeledDataset& train_set, const LabeledDataset* val_set, const TrainConfig& config,
                     std::uint64_t seed, std::optional<PreciseModel<T>> initial = std::nullopt,
                     const StepObserver<T>& observer = {});

template <typename T>
std::vector<ClassIndex> predict(const PreciseModel<T>& model, const LabeledDataset& ds, std::size_t batch_size = 64);

template <typename T>
Metrics evaluate(const PreciseModel<T>& model, const LabeledDataset& test_set, std::size_t batch_size = 64);

}  // namespace precise
