#include "precise/model.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

#include "precise/errors.hpp"
#include "precise/random.hpp"

namespace precise {

std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::kIdentity: return "identity";
    case Activation::kRelu: return "relu";
    case Activation::kSigmoid: return "sigmoid";
  }
  return "?";
}

Activation parse_activation(std::string_view tag) {
  if (tag == "identity") return Activation::kIdentity;
  if (tag == "relu") return Activation::kRelu;
  if (tag == "sigmoid") return Activation::kSigmoid;
  throw std::invalid_argument("unknown activation '" + std::string(tag) + "'");
}

std::vector<LayerSpec> ArchitectureSpec::encoder_layers() const {
  std::vector<LayerSpec> layers;
  std::size_t in = pixels();
  for (std::size_t h : hidden) {
    layers.push_back({in, h, Activation::kRelu});
    in = h;
  }
  layers.push_back({in, latent_dim, Activation::kIdentity});
  return layers;
}

std::vector<LayerSpec> ArchitectureSpec::decoder_layers() const {
  std::vector<LayerSpec> layers;
  std::size_t in = latent_dim;
  for (auto it = hidden.rbegin(); it != hidden.rend(); ++it) {
    layers.push_back({in, *it, Activation::kRelu});
    in = *it;
  }
  layers.push_back({in, pixels(), Activation::kSigmoid});
  return layers;
}

void ArchitectureSpec::validate() const {
  if (image_height == 0 || image_width == 0) throw ConfigError("architecture: zero image extent");
  if (latent_dim == 0) throw ConfigError("architecture: latent_dim must be positive");
  for (std::size_t h : hidden) {
    if (h == 0) throw ConfigError("architecture: hidden extents must be positive");
  }
}

ReservationMap::ReservationMap(std::size_t per_class, std::size_t num_classes)
    : per_class_(per_class), num_classes_(num_classes) {
  if (per_class == 0) throw ConfigError("prototypes per class must be >= 1");
  if (num_classes < 2) throw ConfigError("need at least 2 classes, got " + std::to_string(num_classes));
}

std::vector<std::size_t> ReservationMap::indices(ClassIndex label) const {
  std::vector<std::size_t> out(per_class_);
  for (std::size_t i = 0; i < per_class_; ++i) out[i] = label * per_class_ + i;
  return out;
}

template <typename T>
PreciseModel<T>::PreciseModel(ArchitectureSpec arch, ReservationMap reservation)
    : arch_(std::move(arch)), reservation_(reservation) {}

template <typename T>
PreciseModel<T>::PreciseModel(const PreciseModel& other) : arch_(other.arch_), reservation_(other.reservation_) {
  copy_from(other);
}

template <typename T>
PreciseModel<T>& PreciseModel<T>::operator=(const PreciseModel& other) {
  if (this != &other) {
    arch_ = other.arch_;
    reservation_ = other.reservation_;
    copy_from(other);
  }
  return *this;
}

template <typename T>
void PreciseModel<T>::copy_from(const PreciseModel& other) {
  auto clone_stack = [](const std::vector<AffineLayer<T>>& stack) {
    std::vector<AffineLayer<T>> out;
    for (const auto& l : stack) out.push_back({l.weight.clone(), l.bias.clone(), l.activation});
    return out;
  };
  encoder_ = clone_stack(other.encoder_);
  decoder_ = clone_stack(other.decoder_);
  prototypes_ = other.prototypes_.clone();
  classifier_weight_ = other.classifier_weight_.clone();
  classifier_bias_.reset();
  if (other.classifier_bias_) classifier_bias_ = other.classifier_bias_->clone();
  normalization_ = other.normalization_;
}

template <typename T>
PreciseModel<T> PreciseModel<T>::init(const ArchitectureSpec& arch, std::size_t per_class, std::size_t num_classes,
                                      std::uint64_t seed, const LabeledDataset* seed_data) {
  arch.validate();
  PreciseModel model(arch, ReservationMap(per_class, num_classes));
  Rng rng(seed);

  auto xavier = [&rng](std::size_t fan_in, std::size_t fan_out) {
    const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-a, a);
    std::vector<T> w(fan_in * fan_out);
    for (T& v : w) v = static_cast<T>(dist(rng));
    return w;
  };
  auto build = [&](const std::vector<LayerSpec>& specs) {
    std::vector<AffineLayer<T>> stack;
    for (const LayerSpec& s : specs) {
      stack.push_back({Tensor<T>::matrix(s.in, s.out, xavier(s.in, s.out), true),
                       Tensor<T>::zeros(Shape{s.out}, true), s.activation});
    }
    return stack;
  };
  model.encoder_ = build(arch.encoder_layers());
  model.decoder_ = build(arch.decoder_layers());

  const std::size_t m = model.reservation_.size();
  model.classifier_weight_ = Tensor<T>::matrix(num_classes, m, xavier(m, num_classes), true);
  if (arch.classifier_bias) model.classifier_bias_ = Tensor<T>::zeros(Shape{num_classes}, true);

  if (seed_data) {
    if (seed_data->pixel_count() != arch.pixels()) {
      throw_shape_error("init_model", "seed data has " + std::to_string(seed_data->pixel_count()) +
                                          " pixels, architecture expects " + std::to_string(arch.pixels()));
    }
    if (seed_data->normalization()) model.normalization_ = *seed_data->normalization();
  }

  std::vector<T> protos(m * arch.latent_dim);
  std::normal_distribution<double> standard(0.0, 1.0);
  std::normal_distribution<double> jitter(0.0, 0.01);
  for (ClassIndex j = 0; j < num_classes; ++j) {
    const std::vector<std::size_t> pool = seed_data ? seed_data->indices_of_class(j) : std::vector<std::size_t>{};
    for (std::size_t k : model.reservation_.indices(j)) {
      T* row = protos.data() + k * arch.latent_dim;
      if (pool.empty()) {
        for (std::size_t t = 0; t < arch.latent_dim; ++t) row[t] = static_cast<T>(standard(rng));
        continue;
      }
      std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
      const std::size_t idx = pool[pick(rng)];
      Tape<T> tape(Recording::kOff);
      const Batch<T> b = make_batch<T>(*seed_data, std::span(&idx, 1), model.normalization_);
      const Tensor<T> z = model.encode(tape, b.inputs);
      for (std::size_t t = 0; t < arch.latent_dim; ++t) row[t] = z.at(t) + static_cast<T>(jitter(rng));
    }
  }
  model.prototypes_ = Tensor<T>::matrix(m, arch.latent_dim, std::move(protos), true);
  return model;
}

template <typename T>
PreciseModel<T> PreciseModel<T>::from_parameters(const ArchitectureSpec& arch, std::size_t per_class,
                                                 std::size_t num_classes, std::vector<NamedTensor<T>> params) {
  arch.validate();
  PreciseModel model(arch, ReservationMap(per_class, num_classes));
  std::size_t next = 0;
  auto take = [&](const std::string& name, const Shape& shape) {
    if (next >= params.size()) throw DataError("missing parameter '" + name + "'");
    NamedTensor<T>& p = params[next++];
    if (p.name != name) throw DataError("expected parameter '" + name + "', found '" + p.name + "'");
    if (p.tensor.shape() != shape) {
      throw DataError("parameter '" + name + "' has shape " + shape_string(p.tensor.shape()) + ", expected " +
                      shape_string(shape));
    }
    p.tensor.storage().requires_grad = true;
    return p.tensor;
  };
  auto load_stack = [&](const std::string& prefix, const std::vector<LayerSpec>& specs) {
    std::vector<AffineLayer<T>> stack;
    for (std::size_t i = 0; i < specs.size(); ++i) {
      const std::string base = prefix + "." + std::to_string(i);
      Tensor<T> w = take(base + ".weight", {specs[i].in, specs[i].out});
      Tensor<T> b = take(base + ".bias", {specs[i].out});
      stack.push_back({w, b, specs[i].activation});
    }
    return stack;
  };
  model.encoder_ = load_stack("encoder", arch.encoder_layers());
  model.decoder_ = load_stack("decoder", arch.decoder_layers());
  const std::size_t m = model.reservation_.size();
  model.prototypes_ = take("prototypes", {m, arch.latent_dim});
  model.classifier_weight_ = take("classifier.weight", {num_classes, m});
  if (arch.classifier_bias) model.classifier_bias_ = take("classifier.bias", {num_classes});
  if (next != params.size()) throw DataError("unexpected parameter '" + params[next].name + "'");
  return model;
}

template <typename T>
Tensor<T> PreciseModel<T>::run_stack(Tape<T>& tape, const std::vector<AffineLayer<T>>& stack, const Tensor<T>& x,
                                     std::string_view what) const {
  if (x.rank() != 2 || x.cols() != stack.front().weight.rows()) {
    throw_shape_error(std::string(what), "input " + shape_string(x.shape()) + " does not match extent " +
                                             std::to_string(stack.front().weight.rows()));
  }
  Tensor<T> h = x;
  for (const AffineLayer<T>& layer : stack) {
    h = tape.add_row_vector(tape.matmul(h, layer.weight), layer.bias);
    switch (layer.activation) {
      case Activation::kRelu: h = tape.relu(h); break;
      case Activation::kSigmoid: h = tape.sigmoid(h); break;
      case Activation::kIdentity: break;
    }
  }
  return h;
}

template <typename T>
Tensor<T> PreciseModel<T>::encode(Tape<T>& tape, const Tensor<T>& x) const {
  return run_stack(tape, encoder_, x, "encode");
}

template <typename T>
Tensor<T> PreciseModel<T>::decode(Tape<T>& tape, const Tensor<T>& z) const {
  return run_stack(tape, decoder_, z, "decode");
}

template <typename T>
Tensor<T> PreciseModel<T>::prototype_distances(Tape<T>& tape, const Tensor<T>& z) const {
  if (z.rank() != 2 || z.cols() != arch_.latent_dim) {
    throw_shape_error("prototype_distances", "encoding " + shape_string(z.shape()) + " does not match latent_dim " +
                                                 std::to_string(arch_.latent_dim));
  }
  return tape.euclidean_distance_rows(z, prototypes_);
}

template <typename T>
ClassifierOutput<T> PreciseModel<T>::classify(Tape<T>& tape, const Tensor<T>& distances) const {
  if (distances.rank() != 2 || distances.cols() != num_prototypes()) {
    throw_shape_error("classify", "distance matrix " + shape_string(distances.shape()) + " does not match m=" +
                                      std::to_string(num_prototypes()));
  }
  Tensor<T> logits = tape.matmul(distances, tape.transpose(classifier_weight_));
  if (classifier_bias_) logits = tape.add_row_vector(logits, *classifier_bias_);
  Tensor<T> log_probs = tape.log_softmax(logits);
  return {log_probs, tape.exp(log_probs)};
}

template <typename T>
ForwardResult<T> PreciseModel<T>::forward(Tape<T>& tape, const Tensor<T>& x) const {
  ForwardResult<T> r;
  r.encoding = encode(tape, x);
  r.reconstruction = decode(tape, r.encoding);
  r.distances = prototype_distances(tape, r.encoding);
  auto cls = classify(tape, r.distances);
  r.log_probs = cls.log_probs;
  r.probs = cls.probs;
  return r;
}

template <typename T>
std::vector<NamedTensor<T>> PreciseModel<T>::named_parameters() const {
  std::vector<NamedTensor<T>> out;
  auto add_stack = [&](const std::string& prefix, const std::vector<AffineLayer<T>>& stack) {
    for (std::size_t i = 0; i < stack.size(); ++i) {
      out.push_back({prefix + "." + std::to_string(i) + ".weight", stack[i].weight});
      out.push_back({prefix + "." + std::to_string(i) + ".bias", stack[i].bias});
    }
  };
  add_stack("encoder", encoder_);
  add_stack("decoder", decoder_);
  out.push_back({"prototypes", prototypes_});
  out.push_back({"classifier.weight", classifier_weight_});
  if (classifier_bias_) out.push_back({"classifier.bias", *classifier_bias_});
  return out;
}

template <typename T>
std::vector<Tensor<T>> PreciseModel<T>::parameters() const {
  std::vector<Tensor<T>> out;
  for (auto& p : named_parameters()) out.push_back(p.tensor);
  return out;
}

template <typename T>
void PreciseModel<T>::zero_grad() {
  for (auto& p : parameters()) p.zero_grad();
}

template class PreciseModel<float>;
template class PreciseModel<double>;

}  // namespace precise
