#include "precise/explain.hpp"

#include <limits>
#include <ostream>

#include "precise/errors.hpp"
#include "precise/metrics.hpp"
#include "precise/pgm.hpp"
#include "precise/text.hpp"

namespace precise {

template <typename T>
std::vector<std::filesystem::path> export_prototypes(const PreciseModel<T>& model, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  Tape<T> tape(Recording::kOff);
  const Tensor<T> images = model.decode(tape, model.prototypes());
  const ArchitectureSpec& arch = model.architecture();
  const std::size_t p = arch.pixels();
  std::vector<std::filesystem::path> paths;
  for (std::size_t k = 0; k < model.num_prototypes(); ++k) {
    GrayImage img{arch.image_width, arch.image_height, {}};
    img.pixels.reserve(p);
    for (std::size_t i = 0; i < p; ++i) img.pixels.push_back(to_byte(static_cast<double>(images.at(k * p + i))));
    const auto path = dir / ("proto_" + std::to_string(model.reservation().class_of(k)) + "_" + std::to_string(k) + ".pgm");
    write_pgm(path, img);
    paths.push_back(path);
  }
  return paths;
}

template <typename T>
std::vector<DistanceRow<T>> distance_report(const PreciseModel<T>& model, const LabeledDataset& queries) {
  if (queries.pixel_count() != model.architecture().pixels()) {
    throw_shape_error("distance_report", "query images have " + std::to_string(queries.pixel_count()) +
                                             " pixels, model expects " + std::to_string(model.architecture().pixels()));
  }
  std::vector<DistanceRow<T>> rows;
  const std::size_t m = model.num_prototypes(), n = model.num_classes();
  for (const auto& idx : epoch_batches(queries.size(), 64, 0, 0, false)) {
    const Batch<T> batch = make_batch<T>(queries, idx, model.normalization());
    Tape<T> tape(Recording::kOff);
    const ForwardResult<T> f = model.forward(tape, batch.inputs);
    for (std::size_t r = 0; r < idx.size(); ++r) {
      DistanceRow<T> row;
      row.image = queries[idx[r]].source;
      row.label = queries[idx[r]].label;
      const auto dist = f.distances.values().subspan(r * m, m);
      row.distances.assign(dist.begin(), dist.end());
      row.predicted = argmax(f.probs.values().subspan(r * n, n));
      std::size_t nearest = 0;
      for (std::size_t k = 1; k < m; ++k)
        if (dist[k] < dist[nearest]) nearest = k;
      row.nearest_prototype = nearest;
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

template <typename T>
ClassAverageMatrix class_average_distances(const PreciseModel<T>& model, const LabeledDataset& ds) {
  if (ds.size() == 0) throw DataError("class_average_distances: empty dataset");
  const std::size_t n = model.num_classes();
  const ReservationMap& res = model.reservation();
  std::vector<std::vector<double>> sums(n, std::vector<double>(n, 0.0));
  std::vector<std::size_t> counts(n, 0);
  for (const DistanceRow<T>& row : distance_report(model, ds)) {
    if (row.label >= n) throw DataError("class_average_distances: label out of range");
    ++counts[row.label];
    for (ClassIndex b = 0; b < n; ++b) {
      double block = 0.0;
      for (std::size_t k : res.indices(b)) block += static_cast<double>(row.distances[k]);
      sums[row.label][b] += block / static_cast<double>(res.per_class());
    }
  }
  ClassAverageMatrix out(n);
  for (ClassIndex a = 0; a < n; ++a) {
    if (counts[a] == 0) continue;
    for (double& v : sums[a]) v /= static_cast<double>(counts[a]);
    out[a] = sums[a];
  }
  return out;
}

template <typename T>
std::vector<ClassIndex> prototype_nearest_labels(const PreciseModel<T>& model, const LabeledDataset& ds) {
  const auto rows = distance_report(model, ds);
  if (rows.empty()) throw DataError("prototype_nearest_labels: empty dataset");
  std::vector<ClassIndex> labels(model.num_prototypes());
  for (std::size_t k = 0; k < model.num_prototypes(); ++k) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < rows.size(); ++i)
      if (rows[i].distances[k] < rows[best].distances[k]) best = i;
    labels[k] = rows[best].label;
  }
  return labels;
}

template <typename T>
bool has_prototype_coverage(const PreciseModel<T>& model, const LabeledDataset& ds) {
  const auto nearest = prototype_nearest_labels(model, ds);
  const ReservationMap& res = model.reservation();
  for (ClassIndex j = 0; j < res.num_classes(); ++j) {
    bool covered = false;
    for (std::size_t k : res.indices(j)) covered = covered || nearest[k] == j;
    if (!covered) return false;
  }
  return true;
}

bool row_diagonally_dominant(const ClassAverageMatrix& matrix) {
  for (std::size_t a = 0; a < matrix.size(); ++a) {
    if (!matrix[a]) continue;
    const auto& row = *matrix[a];
    for (std::size_t b = 0; b < row.size(); ++b)
      if (b != a && !(row[a] < row[b])) return false;
  }
  return true;
}

template <typename T>
void write_distance_csv(std::ostream& out, const std::vector<DistanceRow<T>>& rows, const ReservationMap& reservation) {
  out << "image,pred";
  for (std::size_t k = 0; k < reservation.size(); ++k) out << ",proto_" << k << "_class,proto_" << k << "_dist";
  out << '\n';
  for (const auto& row : rows) {
    out << row.image << ',' << row.predicted;
    for (std::size_t k = 0; k < row.distances.size(); ++k) {
      out << ',' << reservation.class_of(k) << ',' << format_double(static_cast<double>(row.distances[k]));
    }
    out << '\n';
  }
}

void write_class_average_csv(std::ostream& out, const ClassAverageMatrix& matrix) {
  out << "class";
  for (std::size_t b = 0; b < matrix.size(); ++b) out << ',' << b;
  out << '\n';
  for (std::size_t a = 0; a < matrix.size(); ++a) {
    if (!matrix[a]) continue;
    out << a;
    for (double v : *matrix[a]) out << ',' << format_double(v);
    out << '\n';
  }
}

#define PRECISE_INSTANTIATE(T)                                                                                    \
  template std::vector<std::filesystem::path> export_prototypes<T>(const PreciseModel<T>&,                        \
                                                                   const std::filesystem::path&);                 \
  template std::vector<DistanceRow<T>> distance_report<T>(const PreciseModel<T>&, const LabeledDataset&);         \
  template ClassAverageMatrix class_average_distances<T>(const PreciseModel<T>&, const LabeledDataset&);          \
  template std::vector<ClassIndex> prototype_nearest_labels<T>(const PreciseModel<T>&, const LabeledDataset&);    \
  template bool has_prototype_coverage<T>(const PreciseModel<T>&, const LabeledDataset&);                         \
  template void write_distance_csv<T>(std::ostream&, const std::vector<DistanceRow<T>>&, const ReservationMap&);

PRECISE_INSTANTIATE(float)
PRECISE_INSTANTIATE(double)

}  // namespace precise
