#include "precise/metrics.hpp"

#include <cmath>
#include <numeric>

#include "precise/errors.hpp"

namespace precise {

Metrics compute_metrics(std::span<const ClassIndex> labels, std::span<const ClassIndex> predictions,
                        std::size_t num_classes) {
  if (labels.size() != predictions.size()) throw_shape_error("compute_metrics", "label/prediction count mismatch");
  if (labels.empty()) throw DataError("compute_metrics: empty test set");
  Metrics m;
  m.samples = labels.size();
  m.confusion.assign(num_classes, std::vector<std::size_t>(num_classes, 0));
  std::size_t correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= num_classes || predictions[i] >= num_classes) {
      throw std::out_of_range("compute_metrics: class index out of range");
    }
    ++m.confusion[labels[i]][predictions[i]];
    if (labels[i] == predictions[i]) ++correct;
  }
  m.accuracy = 100.0 * static_cast<double>(correct) / static_cast<double>(labels.size());

  double f1_sum = 0.0;
  std::size_t present = 0;
  m.class_accuracy.resize(num_classes);
  for (std::size_t j = 0; j < num_classes; ++j) {
    const std::size_t tp = m.confusion[j][j];
    std::size_t actual = 0, predicted = 0;
    for (std::size_t k = 0; k < num_classes; ++k) {
      actual += m.confusion[j][k];
      predicted += m.confusion[k][j];
    }
    if (actual == 0) continue;
    ++present;
    m.class_accuracy[j] = 100.0 * static_cast<double>(tp) / static_cast<double>(actual);
    if (tp == 0) continue;
    const double precision = static_cast<double>(tp) / static_cast<double>(predicted);
    const double recall = static_cast<double>(tp) / static_cast<double>(actual);
    f1_sum += 2.0 * precision * recall / (precision + recall);
  }
  m.macro_f1 = 100.0 * f1_sum / static_cast<double>(present);
  return m;
}

Aggregate aggregate(std::span<const double> values) {
  if (values.empty()) return {};
  const double n = static_cast<double>(values.size());
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  if (values.size() == 1) return {mean, 0.0};
  double sq = 0.0;
  for (double v : values) sq += (v - mean) * (v - mean);
  return {mean, std::sqrt(sq / (n - 1.0))};
}

MetricsReport make_report(std::vector<std::uint64_t> seeds, std::vector<Metrics> per_seed) {
  MetricsReport r;
  r.seeds = std::move(seeds);
  r.per_seed = std::move(per_seed);
  std::vector<double> acc, f1;
  for (const Metrics& m : r.per_seed) {
    acc.push_back(m.accuracy);
    f1.push_back(m.macro_f1);
  }
  r.accuracy = aggregate(acc);
  r.macro_f1 = aggregate(f1);
  const std::size_t classes = r.per_seed.empty() ? 0 : r.per_seed.front().class_accuracy.size();
  r.class_accuracy.resize(classes);
  for (std::size_t j = 0; j < classes; ++j) {
    std::vector<double> vals;
    for (const Metrics& m : r.per_seed)
      if (m.class_accuracy[j]) vals.push_back(*m.class_accuracy[j]);
    if (!vals.empty()) r.class_accuracy[j] = aggregate(vals);
  }
  return r;
}

}  // namespace precise
