#include "precise/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include "precise/errors.hpp"
#include "precise/pgm.hpp"
#include "precise/random.hpp"

namespace precise {

LabeledDataset::LabeledDataset(std::size_t height, std::size_t width, std::size_t num_classes,
                               std::vector<Sample> samples, Provenance provenance)
    : height_(height),
      width_(width),
      num_classes_(num_classes),
      samples_(std::move(samples)),
      class_counts_(num_classes, 0),
      provenance_(provenance) {
  if (height_ == 0 || width_ == 0) throw DataError("dataset: zero image extent");
  if (num_classes_ == 0) throw DataError("dataset: no classes");
  for (const Sample& s : samples_) {
    if (s.pixels.size() != pixel_count()) {
      throw DataError("dataset: sample '" + s.source + "' has " + std::to_string(s.pixels.size()) +
                      " pixels, expected " + std::to_string(pixel_count()));
    }
    if (s.label >= num_classes_) {
      throw DataError("dataset: label " + std::to_string(s.label) + " out of range for " +
                      std::to_string(num_classes_) + " classes");
    }
    if (!std::all_of(s.pixels.begin(), s.pixels.end(), [](double v) { return std::isfinite(v); })) {
      throw DataError("dataset: non-finite pixel in '" + s.source + "'");
    }
    ++class_counts_[s.label];
  }
  if (samples_.size() >= 2) normalization_ = normalization_stats(*this);
}

LabeledDataset LabeledDataset::select(std::span<const std::size_t> indices) const {
  std::vector<Sample> picked;
  picked.reserve(indices.size());
  for (std::size_t i : indices) picked.push_back(samples_.at(i));
  return LabeledDataset(height_, width_, num_classes_, std::move(picked), provenance_);
}

std::vector<std::size_t> LabeledDataset::indices_of_class(ClassIndex label) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < samples_.size(); ++i)
    if (samples_[i].label == label) out.push_back(i);
  return out;
}

namespace {

std::string trim(std::string s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ' || s.back() == '\t')) s.pop_back();
  std::size_t start = 0;
  while (start < s.size() && (s[start] == ' ' || s[start] == '\t')) ++start;
  return s.substr(start);
}

}  // namespace

LabeledDataset load_manifest(const std::filesystem::path& manifest, const std::filesystem::path& root) {
  std::ifstream in(manifest);
  if (!in) throw DataError("cannot open manifest: " + manifest.string());
  const std::filesystem::path base = root.empty() ? manifest.parent_path() : root;

  std::string line;
  if (!std::getline(in, line) || trim(line) != "path,label") {
    throw DataError("manifest " + manifest.string() + ": expected header 'path,label'");
  }
  std::vector<Sample> samples;
  std::size_t height = 0, width = 0, max_label = 0;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty()) continue;
    const auto comma = line.rfind(',');
    if (comma == std::string::npos) {
      throw DataError("manifest " + manifest.string() + ":" + std::to_string(line_no) + ": expected 'path,label'");
    }
    const std::string rel = trim(line.substr(0, comma));
    const std::string label_text = trim(line.substr(comma + 1));
    if (label_text.empty() || !std::all_of(label_text.begin(), label_text.end(), ::isdigit)) {
      throw DataError("manifest " + manifest.string() + ":" + std::to_string(line_no) + ": bad label '" +
                      label_text + "'");
    }
    const std::filesystem::path path = std::filesystem::path(rel).is_absolute() ? std::filesystem::path(rel) : base / rel;
    if (!std::filesystem::exists(path)) throw DataError("missing image file: " + path.string());
    const GrayImage img = read_pgm(path);
    if (samples.empty()) {
      height = img.height;
      width = img.width;
    } else if (img.height != height || img.width != width) {
      throw DataError("inconsistent image dimensions: " + path.string() + " is " + std::to_string(img.width) + "x" +
                      std::to_string(img.height) + ", expected " + std::to_string(width) + "x" +
                      std::to_string(height));
    }
    Sample s;
    s.label = std::stoul(label_text);
    s.source = rel;
    s.pixels.resize(img.pixels.size());
    std::transform(img.pixels.begin(), img.pixels.end(), s.pixels.begin(),
                   [](std::uint8_t b) { return static_cast<double>(b) / 255.0; });
    max_label = std::max(max_label, s.label);
    samples.push_back(std::move(s));
  }
  if (samples.empty()) throw DataError("manifest " + manifest.string() + " lists no images");

  std::vector<std::size_t> counts(max_label + 1, 0);
  for (const Sample& s : samples) ++counts[s.label];
  for (std::size_t j = 0; j < counts.size(); ++j) {
    if (counts[j] == 0) {
      throw DataError("manifest " + manifest.string() + ": label gap, class " + std::to_string(j) + " has no images");
    }
  }
  return LabeledDataset(height, width, max_label + 1, std::move(samples), Provenance::kManifest);
}

void export_dataset(const LabeledDataset& ds, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::ofstream manifest(dir / "manifest.csv");
  if (!manifest) throw IoError("cannot write manifest in " + dir.string());
  manifest << "path,label\n";
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const Sample& s = ds[i];
    GrayImage img{ds.width(), ds.height(), {}};
    img.pixels.reserve(s.pixels.size());
    for (double v : s.pixels) img.pixels.push_back(to_byte(v));
    const std::string name = "img_" + std::to_string(i) + "_c" + std::to_string(s.label) + ".pgm";
    write_pgm(dir / name, img);
    manifest << name << ',' << s.label << '\n';
  }
}

namespace {

bool in_pattern(std::size_t label, std::size_t side, std::size_t row, std::size_t col) {
  const double r = static_cast<double>(row), c = static_cast<double>(col);
  const double s = static_cast<double>(side);
  switch (label) {
    case 0: {
      const double center = (s - 1.0) / 2.0, radius = s / 4.0;
      return (r - center) * (r - center) + (c - center) * (c - center) <= radius * radius;
    }
    case 1: {
      const std::size_t band = std::max<std::size_t>(1, side / 8);
      const std::size_t left = side / 4, right = 5 * side / 8;
      return (col >= left && col < left + band) || (col >= right && col < right + band);
    }
    default: {
      const std::size_t block = side / 4;
      const bool top = row < block, bottom = row >= side - block;
      const bool lft = col < block, rgt = col >= side - block;
      // Corners in order: top-left, top-right, bottom-left, bottom-right.
      const bool corner[4] = {top && lft, top && rgt, bottom && lft, bottom && rgt};
      for (std::size_t k = 0; k <= label && k < 4; ++k)
        if (corner[k]) return true;
      return false;
    }
  }
}

constexpr double kBackground = 0.1;
constexpr double kPatternBoost = 0.8;
constexpr double kNoiseSigma = 0.1;

}  // namespace

LabeledDataset gen_synthetic(std::span<const std::size_t> n_per_class, std::size_t side, std::uint64_t seed) {
  if (side < 8) throw DataError("gen_synthetic: side must be >= 8, got " + std::to_string(side));
  if (n_per_class.empty() || n_per_class.size() > 4) {
    throw DataError("gen_synthetic: supports 1 to 4 classes, got " + std::to_string(n_per_class.size()));
  }
  for (std::size_t n : n_per_class) {
    if (n == 0) throw DataError("gen_synthetic: every class needs at least one sample");
  }
  Rng rng(seed);
  std::normal_distribution<double> noise(0.0, kNoiseSigma);
  std::vector<Sample> samples;
  for (std::size_t label = 0; label < n_per_class.size(); ++label) {
    for (std::size_t i = 0; i < n_per_class[label]; ++i) {
      Sample s;
      s.label = label;
      s.source = "synthetic_c" + std::to_string(label) + "_" + std::to_string(i);
      s.pixels.resize(side * side);
      for (std::size_t r = 0; r < side; ++r) {
        for (std::size_t c = 0; c < side; ++c) {
          double v = kBackground + noise(rng);
          if (in_pattern(label, side, r, c)) v += kPatternBoost;
          s.pixels[r * side + c] = std::clamp(v, 0.0, 1.0);
        }
      }
      samples.push_back(std::move(s));
    }
  }
  return LabeledDataset(side, side, n_per_class.size(), std::move(samples), Provenance::kSynthetic);
}

std::size_t subset_count(std::size_t class_count, double fraction) {
  const auto rounded = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(class_count) + 0.5));
  return std::clamp<std::size_t>(rounded, 1, std::max<std::size_t>(class_count, 1));
}

LabeledDataset stratified_subset(const LabeledDataset& ds, const SubsetSpec& spec) {
  if (!(spec.fraction > 0.0 && spec.fraction <= 1.0)) {
    throw ConfigError("stratified_subset: fraction must lie in (0, 1], got " + std::to_string(spec.fraction));
  }
  Rng rng(spec.seed);
  std::vector<std::size_t> chosen;
  for (ClassIndex j = 0; j < ds.num_classes(); ++j) {
    std::vector<std::size_t> pool = ds.indices_of_class(j);
    if (pool.empty()) continue;
    const std::size_t take = subset_count(pool.size(), spec.fraction);
    // Partial Fisher-Yates: the first `take` slots become the sample.
    for (std::size_t k = 0; k < take; ++k) {
      std::uniform_int_distribution<std::size_t> pick(k, pool.size() - 1);
      std::swap(pool[k], pool[pick(rng)]);
    }
    chosen.insert(chosen.end(), pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(take));
  }
  std::sort(chosen.begin(), chosen.end());
  return ds.select(chosen);
}

Normalization normalization_stats(const LabeledDataset& ds) {
  if (ds.size() < 2) throw DataError("normalization_stats: need at least 2 samples, got " + std::to_string(ds.size()));
  double sum = 0.0;
  std::size_t count = 0;
  for (const Sample& s : ds.samples()) {
    for (double v : s.pixels) sum += v;
    count += s.pixels.size();
  }
  const double mean = sum / static_cast<double>(count);
  double sq = 0.0;
  for (const Sample& s : ds.samples())
    for (double v : s.pixels) sq += (v - mean) * (v - mean);
  const double std = std::sqrt(sq / static_cast<double>(count));
  return Normalization{mean, std::max(std, kStdFloor)};
}

std::vector<std::vector<std::size_t>> epoch_batches(std::size_t n, std::size_t batch_size, std::uint64_t seed,
                                                    std::size_t epoch, bool shuffle) {
  if (batch_size == 0) throw ConfigError("batch size must be >= 1");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  if (shuffle) {
    Rng rng(derive_seed(seed, epoch));
    std::shuffle(order.begin(), order.end(), rng);
  }
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t start = 0; start < n; start += batch_size) {
    const std::size_t end = std::min(n, start + batch_size);
    out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start), order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return out;
}

template <typename T>
Batch<T> make_batch(const LabeledDataset& ds, std::span<const std::size_t> indices, const Normalization& norm) {
  const std::size_t b = indices.size(), p = ds.pixel_count();
  std::vector<T> inputs(b * p), targets(b * p);
  Batch<T> batch;
  for (std::size_t r = 0; r < b; ++r) {
    const Sample& s = ds[indices[r]];
    for (std::size_t c = 0; c < p; ++c) {
      inputs[r * p + c] = static_cast<T>(norm.apply(s.pixels[c]));
      targets[r * p + c] = static_cast<T>(s.pixels[c]);
    }
    batch.labels.push_back(s.label);
  }
  batch.inputs = Tensor<T>::matrix(b, p, std::move(inputs));
  batch.targets = Tensor<T>::matrix(b, p, std::move(targets));
  batch.indices.assign(indices.begin(), indices.end());
  return batch;
}

template <typename T>
std::vector<Batch<T>> batches(const LabeledDataset& ds, std::size_t batch_size, std::uint64_t seed, std::size_t epoch,
                              bool shuffle, const Normalization& norm) {
  std::vector<Batch<T>> out;
  for (const auto& idx : epoch_batches(ds.size(), batch_size, seed, epoch, shuffle)) {
    out.push_back(make_batch<T>(ds, idx, norm));
  }
  return out;
}

template Batch<float> make_batch<float>(const LabeledDataset&, std::span<const std::size_t>, const Normalization&);
template Batch<double> make_batch<double>(const LabeledDataset&, std::span<const std::size_t>, const Normalization&);
template std::vector<Batch<float>> batches<float>(const LabeledDataset&, std::size_t, std::uint64_t, std::size_t, bool,
                                                  const Normalization&);
template std::vector<Batch<double>> batches<double>(const LabeledDataset&, std::size_t, std::uint64_t, std::size_t,
                                                    bool, const Normalization&);

}  // namespace precise
