#include "precise/training.hpp"

#include <cmath>

#include "precise/errors.hpp"
#include "precise/random.hpp"

namespace precise {

void TrainConfig::validate() const {
  if (batch_size == 0) throw ConfigError("batch-size must be >= 1");
  if (!(lr > 0.0)) throw ConfigError("lr must be positive");
  if (!(weight_decay >= 0.0)) throw ConfigError("weight-decay must be >= 0");
  if (!(lambda1 >= 0.0) || !(lambda2 >= 0.0)) throw ConfigError("lambda1 and lambda2 must be >= 0");
  if (per_class == 0) throw ConfigError("protos-per-class must be >= 1");
  if (seeds == 0) throw ConfigError("seeds must be >= 1");
  if (!(fraction > 0.0 && fraction <= 1.0)) throw ConfigError("fraction must lie in (0, 1]");
  if (latent_dim == 0) throw ConfigError("latent-dim must be >= 1");
  if (workers == 0) throw ConfigError("workers must be >= 1");
}

ArchitectureSpec TrainConfig::architecture(std::size_t image_height, std::size_t image_width) const {
  ArchitectureSpec arch;
  arch.image_height = image_height;
  arch.image_width = image_width;
  arch.hidden = hidden;
  arch.latent_dim = latent_dim;
  arch.classifier_bias = classifier_bias;
  return arch;
}

namespace {

void accumulate(LossBreakdown& acc, const LossBreakdown& b, double w) {
  acc.total += w * b.total;
  acc.classification += w * b.classification;
  acc.ae += w * b.ae;
  acc.proto_term1 += w * b.proto_term1;
  acc.proto_term2 += w * b.proto_term2;
}

void require_finite(const LossBreakdown& b) {
  const std::pair<const char*, double> terms[] = {{"classification", b.classification},
                                                  {"autoencoder", b.ae},
                                                  {"prototype term1", b.proto_term1},
                                                  {"prototype term2", b.proto_term2},
                                                  {"total", b.total}};
  for (const auto& [name, v] : terms) {
    if (!std::isfinite(v)) throw NumericalError(std::string("non-finite ") + name + " loss");
  }
}

}  // namespace

template <typename T>
TrainResult<T> train(const LabeledDataset& train_set, const LabeledDataset* val_set, const TrainConfig& config,
                     std::uint64_t seed, std::optional<PreciseModel<T>> initial, const StepObserver<T>& observer) {
  config.validate();
  if (train_set.size() == 0) throw DataError("train: empty training set");
  PreciseModel<T> model = initial ? std::move(*initial)
                                  : PreciseModel<T>::init(config.architecture(train_set.height(), train_set.width()),
                                                          config.per_class, train_set.num_classes(),
                                                          derive_seed(seed, seed_stream::kInit), &train_set);
  if (model.architecture().pixels() != train_set.pixel_count()) {
    throw_shape_error("train", "model expects " + std::to_string(model.architecture().pixels()) + " pixels, data has " +
                                   std::to_string(train_set.pixel_count()));
  }

  LossWeights weights{config.lambda1, config.lambda2, compute_class_weights(train_set.class_counts())};
  const AdamOptions adam = config.adam();
  AdamState<T> state;
  std::vector<Tensor<T>> params = model.parameters();
  TrainHistory history;
  std::size_t step = 0;

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    EpochRecord record;
    for (const auto& idx :
         epoch_batches(train_set.size(), config.batch_size, derive_seed(seed, seed_stream::kShuffle), epoch, true)) {
      const Batch<T> batch = make_batch<T>(train_set, idx, model.normalization());
      Tape<T> tape;
      const LossTerms<T> terms = total_loss(tape, batch, model, weights, config.mode);
      const LossBreakdown b = terms.breakdown();
      require_finite(b);
      model.zero_grad();
      tape.backward(terms.total);
      adam_step<T>(params, state, adam);
      ++step;
      history.steps.push_back(b);
      accumulate(record.mean, b, static_cast<double>(idx.size()) / static_cast<double>(train_set.size()));
      if (observer) observer(step, b, model);
    }
    if (val_set && val_set->size() > 0) record.val_accuracy = evaluate(model, *val_set).accuracy;
    history.epochs.push_back(record);
  }
  return {std::move(model), std::move(history)};
}

template <typename T>
std::vector<ClassIndex> predict(const PreciseModel<T>& model, const LabeledDataset& ds, std::size_t batch_size) {
  if (ds.pixel_count() != model.architecture().pixels()) {
    throw_shape_error("predict", "model expects " + std::to_string(model.architecture().pixels()) +
                                     " pixels, data has " + std::to_string(ds.pixel_count()));
  }
  std::vector<ClassIndex> out;
  out.reserve(ds.size());
  for (const auto& idx : epoch_batches(ds.size(), batch_size, 0, 0, false)) {
    const Batch<T> batch = make_batch<T>(ds, idx, model.normalization());
    Tape<T> tape(Recording::kOff);
    const ForwardResult<T> f = model.forward(tape, batch.inputs);
    const std::size_t n = model.num_classes();
    for (std::size_t r = 0; r < idx.size(); ++r) out.push_back(argmax(f.probs.values().subspan(r * n, n)));
  }
  return out;
}

template <typename T>
Metrics evaluate(const PreciseModel<T>& model, const LabeledDataset& test_set, std::size_t batch_size) {
  if (test_set.size() == 0) throw DataError("evaluate: empty test set");
  const std::vector<ClassIndex> preds = predict(model, test_set, batch_size);
  std::vector<ClassIndex> labels;
  for (const Sample& s : test_set.samples()) labels.push_back(s.label);
  return compute_metrics(labels, preds, model.num_classes());
}

#define PRECISE_INSTANTIATE(T)                                                                                      \
  template TrainResult<T> train<T>(const LabeledDataset&, const LabeledDataset*, const TrainConfig&, std::uint64_t, \
                                   std::optional<PreciseModel<T>>, const StepObserver<T>&);                         \
  template std::vector<ClassIndex> predict<T>(const PreciseModel<T>&, const LabeledDataset&, std::size_t);          \
  template Metrics evaluate<T>(const PreciseModel<T>&, const LabeledDataset&, std::size_t);

PRECISE_INSTANTIATE(float)
PRECISE_INSTANTIATE(double)

}  // namespace precise
