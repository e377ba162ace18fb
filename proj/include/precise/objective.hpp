#pragma once

#include <span>
#include <string_view>
#include <vector>

#include "precise/dataset.hpp"
#include "precise/model.hpp"
#include "precise/tape.hpp"

namespace precise {

// Reserved: each class's prototype block is aligned only with that class's
// encodings. Unreserved: the dataset-level alignment that ignores labels.
enum class PrototypeLossMode { kReserved, kUnreserved };

std::string_view to_string(PrototypeLossMode mode);
PrototypeLossMode parse_mode(std::string_view text);

struct LossWeights {
  double lambda1 = 1.0;
  double lambda2 = 0.001;
  std::vector<double> class_weights;  // empty means all ones

  void validate(std::size_t num_classes) const;
};

struct LossBreakdown {
  double total = 0.0;
  double classification = 0.0;
  double ae = 0.0;
  double proto_term1 = 0.0;
  double proto_term2 = 0.0;

  // |total - recombined| / max(|total|, tiny).
  double identity_residual(double lambda1, double lambda2) const;
};

template <typename T>
struct PrototypeTerms {
  Tensor<T> term1;  // mean over samples of the distance to the nearest admissible prototype
  Tensor<T> term2;  // mean over prototypes of the distance to the nearest admissible sample
};

template <typename T>
struct LossTerms {
  Tensor<T> total;
  Tensor<T> classification;
  Tensor<T> ae;
  Tensor<T> term1;
  Tensor<T> term2;
  ForwardResult<T> forward;

  LossBreakdown breakdown() const;
};

// Floor applied to probabilities before the logarithm.
inline constexpr double kLogProbFloor = 1e-12;

// (1/batch) * sum_i ||recon_i - x_i||^2.
template <typename T>
Tensor<T> ae_loss(Tape<T>& tape, const Tensor<T>& x, const Tensor<T>& reconstruction);

// sum_i w[y_i] * -log p[i][y_i] / sum_i w[y_i], from log-probabilities.
template <typename T>
Tensor<T> weighted_ce(Tape<T>& tape, const Tensor<T>& log_probs, std::span<const ClassIndex> labels,
                      std::span<const double> class_weights);

// w_j = n / (N * n_j).
std::vector<double> compute_class_weights(std::span<const std::size_t> class_counts);

// Classes absent from the batch are skipped by term2, which then averages
// over the prototypes of the classes that are present.
template <typename T>
PrototypeTerms<T> proto_loss_reserved(Tape<T>& tape, const Tensor<T>& encodings, std::span<const ClassIndex> labels,
                                      const PrototypeBank<T>& bank);
template <typename T>
PrototypeTerms<T> proto_loss_reserved_from_distances(Tape<T>& tape, const Tensor<T>& distances,
                                                     std::span<const ClassIndex> labels,
                                                     const ReservationMap& reservation);

template <typename T>
PrototypeTerms<T> proto_loss_unreserved(Tape<T>& tape, const Tensor<T>& encodings, const PrototypeBank<T>& bank);
template <typename T>
PrototypeTerms<T> proto_loss_unreserved_from_distances(Tape<T>& tape, const Tensor<T>& distances);

// One forward pass; total = ce + lambda1 * ae + lambda2 * (term1 + term2).
// A non-finite value raises NumericalError naming the offending term.
template <typename T>
LossTerms<T> total_loss(Tape<T>& tape, const Batch<T>& batch, const PreciseModel<T>& model,
                        const LossWeights& weights, PrototypeLossMode mode);

}  // namespace precise
