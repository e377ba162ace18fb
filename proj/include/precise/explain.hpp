#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "precise/dataset.hpp"
#include "precise/model.hpp"

namespace precise {

template <typename T>
struct DistanceRow {
  std::string image;
  ClassIndex label = 0;
  ClassIndex predicted = 0;
  std::size_t nearest_prototype = 0;
  std::vector<T> distances;  // exactly the classifier input for this image
};

// Rows: data class a; columns: prototype class b. Entry (a, b) is the mean
// over class-a images of the mean distance to the prototypes in PR_b. Rows of
// classes without images are absent.
using ClassAverageMatrix = std::vector<std::optional<std::vector<double>>>;

template <typename T>
struct ExplainReport {
  std::vector<std::filesystem::path> prototype_images;
  std::vector<ClassIndex> prototype_classes;
  std::vector<DistanceRow<T>> rows;
  ClassAverageMatrix class_average;
};

// Decodes every prototype and writes it as "proto_{class}_{index}.pgm".
template <typename T>
std::vector<std::filesystem::path> export_prototypes(const PreciseModel<T>& model, const std::filesystem::path& dir);

template <typename T>
std::vector<DistanceRow<T>> distance_report(const PreciseModel<T>& model, const LabeledDataset& queries);

template <typename T>
ClassAverageMatrix class_average_distances(const PreciseModel<T>& model, const LabeledDataset& ds);

// For each prototype, the label of the training sample whose encoding is
// closest to it.
template <typename T>
std::vector<ClassIndex> prototype_nearest_labels(const PreciseModel<T>& model, const LabeledDataset& ds);

// True when every class owns a reserved prototype whose nearest encoding in
// `ds` carries that class's label.
template <typename T>
bool has_prototype_coverage(const PreciseModel<T>& model, const LabeledDataset& ds);

// Diagonal strictly below every off-diagonal entry of its row, for each
// present row.
bool row_diagonally_dominant(const ClassAverageMatrix& matrix);

// "image,pred,proto_0_class,proto_0_dist,...".
template <typename T>
void write_distance_csv(std::ostream& out, const std::vector<DistanceRow<T>>& rows, const ReservationMap& reservation);
void write_class_average_csv(std::ostream& out, const ClassAverageMatrix& matrix);

}  // namespace precise
