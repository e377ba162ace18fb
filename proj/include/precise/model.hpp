#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "precise/dataset.hpp"
#include "precise/tape.hpp"
#include "precise/tensor.hpp"

namespace precise {

enum class Activation { kIdentity, kRelu, kSigmoid };

std::string_view to_string(Activation a);
Activation parse_activation(std::string_view tag);

struct LayerSpec {
  std::size_t in = 0;
  std::size_t out = 0;
  Activation activation = Activation::kIdentity;
};

// MLP autoencoder layout. The encoder maps pixels through `hidden` to
// latent_dim with relu between layers and a linear latent; the decoder
// mirrors it and ends in a sigmoid so reconstructions stay in [0,1].
struct ArchitectureSpec {
  std::size_t image_height = 16;
  std::size_t image_width = 16;
  std::vector<std::size_t> hidden = {128, 64};
  std::size_t latent_dim = 32;
  bool classifier_bias = true;

  std::size_t pixels() const { return image_height * image_width; }
  std::vector<LayerSpec> encoder_layers() const;
  std::vector<LayerSpec> decoder_layers() const;
  void validate() const;
};

// Class-blocked prototype ownership: prototype k belongs to class k / d.
class ReservationMap {
 public:
  ReservationMap(std::size_t per_class, std::size_t num_classes);

  std::size_t per_class() const { return per_class_; }
  std::size_t num_classes() const { return num_classes_; }
  std::size_t size() const { return per_class_ * num_classes_; }
  ClassIndex class_of(std::size_t prototype) const { return prototype / per_class_; }
  std::size_t first(ClassIndex label) const { return label * per_class_; }
  std::vector<std::size_t> indices(ClassIndex label) const;

 private:
  std::size_t per_class_;
  std::size_t num_classes_;
};

template <typename T>
struct PrototypeBank {
  Tensor<T> prototypes;  // m x latent_dim
  ReservationMap reservation;
};

template <typename T>
struct AffineLayer {
  Tensor<T> weight;  // in x out
  Tensor<T> bias;    // out
  Activation activation = Activation::kIdentity;
};

template <typename T>
struct NamedTensor {
  std::string name;
  Tensor<T> tensor;
};

template <typename T>
struct ClassifierOutput {
  Tensor<T> log_probs;
  Tensor<T> probs;
};

template <typename T>
struct ForwardResult {
  Tensor<T> reconstruction;  // batch x pixels
  Tensor<T> encoding;        // batch x latent_dim
  Tensor<T> distances;       // batch x m, the classifier input
  Tensor<T> log_probs;       // batch x N
  Tensor<T> probs;           // batch x N
};

// Encoder f, decoder g, prototype-metric layer p and linear head w, trained
// jointly. Copying a model deep-copies its parameters.
template <typename T>
class PreciseModel {
 public:
  // Weights ~ U(-a, a), a = sqrt(6 / (fan_in + fan_out)); zero biases. With
  // seed data, each prototype of class j starts at the encoding of a random
  // class-j sample plus N(0, 0.01^2) noise; otherwise standard normal.
  static PreciseModel init(const ArchitectureSpec& arch, std::size_t per_class, std::size_t num_classes,
                           std::uint64_t seed, const LabeledDataset* seed_data = nullptr);

  // Assembles a model from named parameter tensors (the checkpoint path).
  static PreciseModel from_parameters(const ArchitectureSpec& arch, std::size_t per_class, std::size_t num_classes,
                                      std::vector<NamedTensor<T>> params);

  PreciseModel(const PreciseModel& other);
  PreciseModel& operator=(const PreciseModel& other);
  PreciseModel(PreciseModel&&) noexcept = default;
  PreciseModel& operator=(PreciseModel&&) noexcept = default;

  Tensor<T> encode(Tape<T>& tape, const Tensor<T>& x) const;
  Tensor<T> decode(Tape<T>& tape, const Tensor<T>& z) const;
  Tensor<T> prototype_distances(Tape<T>& tape, const Tensor<T>& z) const;
  ClassifierOutput<T> classify(Tape<T>& tape, const Tensor<T>& distances) const;
  ForwardResult<T> forward(Tape<T>& tape, const Tensor<T>& x) const;

  // Stable order: encoder layers, decoder layers, prototypes, classifier.
  std::vector<NamedTensor<T>> named_parameters() const;
  std::vector<Tensor<T>> parameters() const;
  void zero_grad();

  const ArchitectureSpec& architecture() const { return arch_; }
  const ReservationMap& reservation() const { return reservation_; }
  std::size_t num_prototypes() const { return reservation_.size(); }
  std::size_t num_classes() const { return reservation_.num_classes(); }
  const Tensor<T>& prototypes() const { return prototypes_; }
  PrototypeBank<T> bank() const { return {prototypes_, reservation_}; }
  const Tensor<T>& classifier_weight() const { return classifier_weight_; }  // N x m
  const std::optional<Tensor<T>>& classifier_bias() const { return classifier_bias_; }

  // Input normalization applied to images before encoding.
  const Normalization& normalization() const { return normalization_; }
  void set_normalization(const Normalization& n) { normalization_ = n; }

 private:
  PreciseModel(ArchitectureSpec arch, ReservationMap reservation);
  Tensor<T> run_stack(Tape<T>& tape, const std::vector<AffineLayer<T>>& stack, const Tensor<T>& x,
                      std::string_view what) const;
  void copy_from(const PreciseModel& other);

  ArchitectureSpec arch_;
  ReservationMap reservation_;
  std::vector<AffineLayer<T>> encoder_;
  std::vector<AffineLayer<T>> decoder_;
  Tensor<T> prototypes_;  // m x latent_dim
  Tensor<T> classifier_weight_;
  std::optional<Tensor<T>> classifier_bias_;
  Normalization normalization_;
};

extern template class PreciseModel<float>;
extern template class PreciseModel<double>;

}  // namespace precise
