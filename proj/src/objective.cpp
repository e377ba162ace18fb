#include "precise/objective.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "precise/errors.hpp"

namespace precise {

std::string_view to_string(PrototypeLossMode mode) {
  return mode == PrototypeLossMode::kReserved ? "reserved" : "unreserved";
}

PrototypeLossMode parse_mode(std::string_view text) {
  if (text == "reserved") return PrototypeLossMode::kReserved;
  if (text == "unreserved") return PrototypeLossMode::kUnreserved;
  throw ConfigError("mode must be 'reserved' or 'unreserved', got '" + std::string(text) + "'");
}

void LossWeights::validate(std::size_t num_classes) const {
  if (!(lambda1 >= 0.0) || !(lambda2 >= 0.0)) throw ConfigError("lambda1 and lambda2 must be >= 0");
  if (!class_weights.empty()) {
    if (class_weights.size() != num_classes) {
      throw ConfigError("expected " + std::to_string(num_classes) + " class weights, got " +
                        std::to_string(class_weights.size()));
    }
    for (double w : class_weights)
      if (!(w > 0.0)) throw ConfigError("class weights must be strictly positive");
  }
}

double LossBreakdown::identity_residual(double lambda1, double lambda2) const {
  const double recombined = classification + lambda1 * ae + lambda2 * (proto_term1 + proto_term2);
  return std::abs(total - recombined) / std::max(std::abs(total), 1e-300);
}

template <typename T>
LossBreakdown LossTerms<T>::breakdown() const {
  return {static_cast<double>(total.item()), static_cast<double>(classification.item()),
          static_cast<double>(ae.item()), static_cast<double>(term1.item()), static_cast<double>(term2.item())};
}

template <typename T>
Tensor<T> ae_loss(Tape<T>& tape, const Tensor<T>& x, const Tensor<T>& reconstruction) {
  if (x.shape() != reconstruction.shape() || x.rank() != 2) {
    throw_shape_error("ae_loss", shape_string(x.shape()) + " vs " + shape_string(reconstruction.shape()));
  }
  const Tensor<T> diff = tape.sub(reconstruction, x);
  return tape.scale(tape.sum(tape.mul(diff, diff)), T(1) / static_cast<T>(x.rows()));
}

template <typename T>
Tensor<T> weighted_ce(Tape<T>& tape, const Tensor<T>& log_probs, std::span<const ClassIndex> labels,
                      std::span<const double> class_weights) {
  if (log_probs.rank() != 2 || log_probs.rows() != labels.size() || labels.empty()) {
    throw_shape_error("weighted_ce", "log-probabilities " + shape_string(log_probs.shape()) + " for " +
                                         std::to_string(labels.size()) + " labels");
  }
  const std::size_t n = labels.size(), classes = log_probs.cols();
  if (!class_weights.empty() && class_weights.size() != classes) {
    throw_shape_error("weighted_ce", std::to_string(class_weights.size()) + " weights for " +
                                         std::to_string(classes) + " classes");
  }
  std::vector<std::size_t> picks(n);
  std::vector<T> w(n);
  double weight_sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] >= classes) {
      throw std::out_of_range("weighted_ce: label " + std::to_string(labels[i]) + " out of range for " +
                              std::to_string(classes) + " classes");
    }
    picks[i] = i * classes + labels[i];
    const double wi = class_weights.empty() ? 1.0 : class_weights[labels[i]];
    w[i] = static_cast<T>(wi);
    weight_sum += wi;
  }
  const Tensor<T> picked = tape.gather(log_probs, picks, Shape{n});
  const Tensor<T> floored = tape.clamp_min(picked, static_cast<T>(std::log(kLogProbFloor)));
  const Tensor<T> weighted = tape.mul(floored, Tensor<T>(Shape{n}, std::move(w)));
  return tape.scale(tape.sum(weighted), static_cast<T>(-1.0 / weight_sum));
}

std::vector<double> compute_class_weights(std::span<const std::size_t> class_counts) {
  if (class_counts.empty()) throw DataError("compute_class_weights: no classes");
  const double n = static_cast<double>(std::accumulate(class_counts.begin(), class_counts.end(), std::size_t{0}));
  const double classes = static_cast<double>(class_counts.size());
  std::vector<double> weights;
  for (std::size_t j = 0; j < class_counts.size(); ++j) {
    if (class_counts[j] == 0) throw DataError("compute_class_weights: class " + std::to_string(j) + " has no samples");
    weights.push_back(n / (classes * static_cast<double>(class_counts[j])));
  }
  return weights;
}

template <typename T>
PrototypeTerms<T> proto_loss_reserved_from_distances(Tape<T>& tape, const Tensor<T>& distances,
                                                     std::span<const ClassIndex> labels,
                                                     const ReservationMap& reservation) {
  const std::size_t m = reservation.size(), d = reservation.per_class();
  if (distances.rank() != 2 || distances.cols() != m || distances.rows() != labels.size() || labels.empty()) {
    throw_shape_error("proto_loss_reserved", "distances " + shape_string(distances.shape()) + " for " +
                                                 std::to_string(labels.size()) + " labels and m=" + std::to_string(m));
  }
  const std::size_t n = labels.size();
  for (ClassIndex y : labels) {
    if (y >= reservation.num_classes()) throw std::out_of_range("proto_loss_reserved: label out of range");
  }

  // term1: sample i against the block PR_{y_i}.
  std::vector<std::size_t> own_block;
  own_block.reserve(n * d);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k : reservation.indices(labels[i])) own_block.push_back(i * m + k);
  const Tensor<T> term1 = tape.mean(tape.min(tape.gather(distances, own_block, Shape{n, d}), 1));

  // term2: prototype k in PR_j against the samples labelled j.
  Tensor<T> term2_sum;
  std::size_t contributing = 0;
  for (ClassIndex j = 0; j < reservation.num_classes(); ++j) {
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < n; ++i)
      if (labels[i] == j) rows.push_back(i);
    if (rows.empty()) continue;
    std::vector<std::size_t> block;
    block.reserve(rows.size() * d);
    for (std::size_t i : rows)
      for (std::size_t k : reservation.indices(j)) block.push_back(i * m + k);
    const Tensor<T> class_sum = tape.sum(tape.min(tape.gather(distances, block, Shape{rows.size(), d}), 0));
    term2_sum = term2_sum.defined() ? tape.add(term2_sum, class_sum) : class_sum;
    contributing += d;
  }
  const Tensor<T> term2 = tape.scale(term2_sum, T(1) / static_cast<T>(contributing));
  return {term1, term2};
}

template <typename T>
PrototypeTerms<T> proto_loss_reserved(Tape<T>& tape, const Tensor<T>& encodings, std::span<const ClassIndex> labels,
                                      const PrototypeBank<T>& bank) {
  const Tensor<T> distances = tape.euclidean_distance_rows(encodings, bank.prototypes);
  return proto_loss_reserved_from_distances(tape, distances, labels, bank.reservation);
}

template <typename T>
PrototypeTerms<T> proto_loss_unreserved_from_distances(Tape<T>& tape, const Tensor<T>& distances) {
  if (distances.rank() != 2) throw_shape_error("proto_loss_unreserved", "expected a distance matrix");
  return {tape.mean(tape.min(distances, 1)), tape.mean(tape.min(distances, 0))};
}

template <typename T>
PrototypeTerms<T> proto_loss_unreserved(Tape<T>& tape, const Tensor<T>& encodings, const PrototypeBank<T>& bank) {
  return proto_loss_unreserved_from_distances(tape, tape.euclidean_distance_rows(encodings, bank.prototypes));
}

namespace {

template <typename F>
auto named_term(const char* term, F&& f) {
  try {
    return f();
  } catch (const NumericalError& e) {
    throw NumericalError(std::string("non-finite ") + term + " term (" + e.what() + ")");
  }
}

}  // namespace

template <typename T>
LossTerms<T> total_loss(Tape<T>& tape, const Batch<T>& batch, const PreciseModel<T>& model,
                        const LossWeights& weights, PrototypeLossMode mode) {
  weights.validate(model.num_classes());
  LossTerms<T> out;
  out.forward = named_term("forward", [&] { return model.forward(tape, batch.inputs); });
  out.classification =
      named_term("classification", [&] { return weighted_ce(tape, out.forward.log_probs, batch.labels, weights.class_weights); });
  out.ae = named_term("autoencoder", [&] { return ae_loss(tape, batch.targets, out.forward.reconstruction); });
  const PrototypeTerms<T> proto = named_term("prototype", [&] {
    return mode == PrototypeLossMode::kReserved
               ? proto_loss_reserved_from_distances(tape, out.forward.distances, batch.labels, model.reservation())
               : proto_loss_unreserved_from_distances(tape, out.forward.distances);
  });
  out.term1 = proto.term1;
  out.term2 = proto.term2;
  out.total = named_term("total", [&] {
    const Tensor<T> ae = tape.scale(out.ae, static_cast<T>(weights.lambda1));
    const Tensor<T> pr = tape.scale(tape.add(out.term1, out.term2), static_cast<T>(weights.lambda2));
    return tape.add(tape.add(out.classification, ae), pr);
  });
  return out;
}

#define PRECISE_INSTANTIATE(T)                                                                                       \
  template struct LossTerms<T>;                                                                                      \
  template Tensor<T> ae_loss<T>(Tape<T>&, const Tensor<T>&, const Tensor<T>&);                                       \
  template Tensor<T> weighted_ce<T>(Tape<T>&, const Tensor<T>&, std::span<const ClassIndex>, std::span<const double>); \
  template PrototypeTerms<T> proto_loss_reserved<T>(Tape<T>&, const Tensor<T>&, std::span<const ClassIndex>,         \
                                                    const PrototypeBank<T>&);                                        \
  template PrototypeTerms<T> proto_loss_reserved_from_distances<T>(Tape<T>&, const Tensor<T>&,                       \
                                                                   std::span<const ClassIndex>,                      \
                                                                   const ReservationMap&);                           \
  template PrototypeTerms<T> proto_loss_unreserved<T>(Tape<T>&, const Tensor<T>&, const PrototypeBank<T>&);          \
  template PrototypeTerms<T> proto_loss_unreserved_from_distances<T>(Tape<T>&, const Tensor<T>&);                    \
  template LossTerms<T> total_loss<T>(Tape<T>&, const Batch<T>&, const PreciseModel<T>&, const LossWeights&,         \
                                      PrototypeLossMode);

PRECISE_INSTANTIATE(float)
PRECISE_INSTANTIATE(double)

}  // namespace precise
