#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "precise/tensor.hpp"

namespace precise {

using ClassIndex = std::size_t;

struct Sample {
  std::vector<double> pixels;  // raw intensities in [0,1], row-major
  ClassIndex label = 0;
  std::string source;          // manifest path, or a generated name
};

struct Normalization {
  double mean = 0.0;
  double std = 1.0;

  double apply(double v) const { return (v - mean) / std; }
};

inline constexpr double kStdFloor = 1e-6;

enum class Provenance { kSynthetic, kManifest };

// Immutable collection of equally sized grayscale images with labels in
// [0, num_classes).
class LabeledDataset {
 public:
  LabeledDataset(std::size_t height, std::size_t width, std::size_t num_classes, std::vector<Sample> samples,
                 Provenance provenance);

  std::size_t size() const { return samples_.size(); }
  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }
  std::size_t pixel_count() const { return height_ * width_; }
  std::size_t num_classes() const { return num_classes_; }
  const std::vector<std::size_t>& class_counts() const { return class_counts_; }
  const Sample& operator[](std::size_t i) const { return samples_[i]; }
  const std::vector<Sample>& samples() const { return samples_; }
  Provenance provenance() const { return provenance_; }
  // Mean and std over all pixels; absent for fewer than two samples.
  const std::optional<Normalization>& normalization() const { return normalization_; }

  // Samples at `indices`, in that order.
  LabeledDataset select(std::span<const std::size_t> indices) const;
  std::vector<std::size_t> indices_of_class(ClassIndex label) const;

 private:
  std::size_t height_;
  std::size_t width_;
  std::size_t num_classes_;
  std::vector<Sample> samples_;
  std::vector<std::size_t> class_counts_;
  Provenance provenance_;
  std::optional<Normalization> normalization_;
};

// Reads a "path,label" CSV manifest of P5 PGM files. Relative paths resolve
// against `root`, or the manifest's directory when `root` is empty. Every
// class in [0, max label] must be present.
LabeledDataset load_manifest(const std::filesystem::path& manifest, const std::filesystem::path& root = {});

// Writes each sample as a PGM plus "manifest.csv" into `dir`.
void export_dataset(const LabeledDataset& ds, const std::filesystem::path& dir);

// Class patterns over Gaussian background noise (sigma 0.1): class 0 a
// centered disc of radius side/4, class 1 two vertical bands, class j >= 2
// j+1 bright corner blocks. Supports up to four classes.
LabeledDataset gen_synthetic(std::span<const std::size_t> n_per_class, std::size_t side, std::uint64_t seed);

struct SubsetSpec {
  double fraction = 1.0;
  std::uint64_t seed = 0;
};

// max(1, round-half-up(fraction * class_count)).
std::size_t subset_count(std::size_t class_count, double fraction);

// Uniform per-class sampling without replacement; selected samples keep their
// original relative order.
LabeledDataset stratified_subset(const LabeledDataset& ds, const SubsetSpec& spec);

Normalization normalization_stats(const LabeledDataset& ds);

// Index batches for one epoch. Shuffled order depends only on (seed, epoch).
std::vector<std::vector<std::size_t>> epoch_batches(std::size_t n, std::size_t batch_size, std::uint64_t seed,
                                                    std::size_t epoch, bool shuffle);

template <typename T>
struct Batch {
  Tensor<T> inputs;   // normalized, batch x pixels
  Tensor<T> targets;  // raw [0,1] pixels, the reconstruction target
  std::vector<ClassIndex> labels;
  std::vector<std::size_t> indices;
};

template <typename T>
Batch<T> make_batch(const LabeledDataset& ds, std::span<const std::size_t> indices, const Normalization& norm);

template <typename T>
std::vector<Batch<T>> batches(const LabeledDataset& ds, std::size_t batch_size, std::uint64_t seed, std::size_t epoch,
                              bool shuffle, const Normalization& norm);

}  // namespace precise
