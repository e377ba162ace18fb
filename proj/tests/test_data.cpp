#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>

#include "precise/dataset.hpp"
#include "precise/errors.hpp"
#include "precise/pgm.hpp"

using namespace precise;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("precise_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void write_gray(const fs::path& path, std::size_t w, std::size_t h, std::uint8_t fill) {
  write_pgm(path, GrayImage{w, h, std::vector<std::uint8_t>(w * h, fill)});
}

LabeledDataset constant_dataset(std::size_t n, double value) {
  std::vector<Sample> samples;
  for (std::size_t i = 0; i < n; ++i) samples.push_back({std::vector<double>(4, value), i % 2, "c" + std::to_string(i)});
  return LabeledDataset(2, 2, 2, std::move(samples), Provenance::kSynthetic);
}

}  // namespace

TEST(Pgm, RoundTripWithHeaderComment) {
  const fs::path dir = scratch_dir("pgm");
  {
    std::ofstream out(dir / "c.pgm", std::ios::binary);
    out << "P5\n# made by hand\n3 2\n255\n";
    const unsigned char px[] = {0, 128, 255, 1, 2, 3};
    out.write(reinterpret_cast<const char*>(px), sizeof(px));
  }
  const GrayImage img = read_pgm(dir / "c.pgm");
  EXPECT_EQ(img.width, 3u);
  EXPECT_EQ(img.height, 2u);
  EXPECT_EQ(img.pixels[1], 128);
  write_pgm(dir / "d.pgm", img);
  EXPECT_EQ(read_pgm(dir / "d.pgm").pixels, img.pixels);
}

TEST(Pgm, MalformedFilesRaiseDataError) {
  const fs::path dir = scratch_dir("pgm_bad");
  std::ofstream(dir / "p2.pgm") << "P2\n2 2\n255\n0 0 0 0\n";
  std::ofstream(dir / "short.pgm", std::ios::binary) << "P5\n4 4\n255\nab";
  std::ofstream(dir / "deep.pgm", std::ios::binary) << "P5\n1 1\n65535\nab";
  EXPECT_THROW(read_pgm(dir / "p2.pgm"), DataError);
  EXPECT_THROW(read_pgm(dir / "short.pgm"), DataError);
  EXPECT_THROW(read_pgm(dir / "deep.pgm"), DataError);
}

TEST(Pgm, ByteMappingRoundsHalfUpAndClips) {
  EXPECT_EQ(to_byte(0.0), 0);
  EXPECT_EQ(to_byte(1.0), 255);
  EXPECT_EQ(to_byte(0.5), 128);  // 127.5 rounds up
  EXPECT_EQ(to_byte(-0.2), 0);
  EXPECT_EQ(to_byte(1.7), 255);
}

TEST(Manifest, TwoRowSmokeCase) {
  const fs::path dir = scratch_dir("manifest");
  write_gray(dir / "a.pgm", 4, 4, 0);
  write_gray(dir / "b.pgm", 4, 4, 255);
  std::ofstream(dir / "manifest.csv") << "path,label\na.pgm,0\nb.pgm,1\n";
  const LabeledDataset ds = load_manifest(dir / "manifest.csv");
  EXPECT_EQ(ds.size(), 2u);
  EXPECT_EQ(ds[0].label, 0u);
  EXPECT_EQ(ds[1].label, 1u);
  EXPECT_EQ(ds[1].pixels.front(), 1.0);
  EXPECT_EQ(ds.provenance(), Provenance::kManifest);
}

TEST(Manifest, ErrorsNameTheProblem) {
  const fs::path dir = scratch_dir("manifest_bad");
  write_gray(dir / "a.pgm", 4, 4, 0);
  write_gray(dir / "wide.pgm", 5, 4, 0);
  std::ofstream(dir / "missing.csv") << "path,label\na.pgm,0\nnope.pgm,1\n";
  std::ofstream(dir / "dims.csv") << "path,label\na.pgm,0\nwide.pgm,1\n";
  std::ofstream(dir / "gap.csv") << "path,label\na.pgm,0\na.pgm,2\n";
  try {
    load_manifest(dir / "missing.csv");
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("nope.pgm"), std::string::npos);
  }
  EXPECT_THROW(load_manifest(dir / "dims.csv"), DataError);
  EXPECT_THROW(load_manifest(dir / "gap.csv"), DataError);
}

TEST(Manifest, PneumoniaShapedCounts) {
  const fs::path dir = scratch_dir("manifest_pneumonia");
  write_gray(dir / "x.pgm", 8, 8, 40);
  {
    std::ofstream m(dir / "manifest.csv");
    m << "path,label\n";
    for (int i = 0; i < 1349; ++i) m << "x.pgm,0\n";
    for (int i = 0; i < 3883; ++i) m << "x.pgm,1\n";
  }
  EXPECT_EQ(load_manifest(dir / "manifest.csv").class_counts(), (std::vector<std::size_t>{1349, 3883}));
}

TEST(Synthetic, CountsDeterminismAndRange) {
  const std::size_t counts[] = {95, 5};
  const LabeledDataset a = gen_synthetic(counts, 16, 7), b = gen_synthetic(counts, 16, 7), c = gen_synthetic(counts, 16, 8);
  EXPECT_EQ(a.class_counts(), (std::vector<std::size_t>{95, 5}));
  bool differs = false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].pixels, b[i].pixels);
    differs = differs || a[i].pixels != c[i].pixels;
    for (double v : a[i].pixels) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
  }
  EXPECT_TRUE(differs);
}

TEST(Synthetic, RejectsInvalidExtents) {
  const std::size_t ok[] = {3, 3}, zero[] = {3, 0}, five[] = {1, 1, 1, 1, 1};
  EXPECT_THROW(gen_synthetic(ok, 7, 0), DataError);
  EXPECT_THROW(gen_synthetic(zero, 16, 0), DataError);
  EXPECT_THROW(gen_synthetic(five, 16, 0), DataError);
}

TEST(Synthetic, NearestNeighbourSeparatesClasses) {
  // 1-NN in pixel space, leave-one-out, on 100 samples across four classes.
  const std::size_t counts[] = {25, 25, 25, 25};
  const LabeledDataset ds = gen_synthetic(counts, 16, 3);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    double best = 1e300;
    ClassIndex label = 0;
    for (std::size_t j = 0; j < ds.size(); ++j) {
      if (j == i) continue;
      double d = 0.0;
      for (std::size_t p = 0; p < ds.pixel_count(); ++p) d += (ds[i].pixels[p] - ds[j].pixels[p]) * (ds[i].pixels[p] - ds[j].pixels[p]);
      if (d < best) best = d, label = ds[j].label;
    }
    correct += label == ds[i].label;
  }
  EXPECT_GT(static_cast<double>(correct) / static_cast<double>(ds.size()), 0.9);
}

TEST(Synthetic, ExportReloadsBitExactAfterQuantisation) {
  const std::size_t counts[] = {3, 2};
  const LabeledDataset ds = gen_synthetic(counts, 8, 1);
  const fs::path dir = scratch_dir("export");
  export_dataset(ds, dir);
  const LabeledDataset back = load_manifest(dir / "manifest.csv");
  ASSERT_EQ(back.size(), ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    EXPECT_EQ(back[i].label, ds[i].label);
    for (std::size_t p = 0; p < ds.pixel_count(); ++p)
      EXPECT_EQ(back[i].pixels[p], static_cast<double>(to_byte(ds[i].pixels[p])) / 255.0);
  }
}

TEST(Subset, CountsFollowRoundHalfUpWithFloor) {
  EXPECT_EQ(subset_count(90, 0.1), 9u);
  EXPECT_EQ(subset_count(10, 0.1), 1u);
  EXPECT_EQ(subset_count(3883, 0.01), 39u);
  EXPECT_EQ(subset_count(1349, 0.01), 13u);
  EXPECT_EQ(subset_count(5, 0.01), 1u);
  EXPECT_EQ(subset_count(5, 0.5), 3u);  // 2.5 rounds up
}

TEST(Subset, FullScaleOnePercentIsFiftyTwoImages) {
  std::vector<Sample> samples;
  for (std::size_t j = 0; j < 2; ++j)
    for (std::size_t i = 0; i < (j == 0 ? 3883u : 1349u); ++i) samples.push_back({{0.5}, j, ""});
  const LabeledDataset ds(1, 1, 2, std::move(samples), Provenance::kSynthetic);
  const LabeledDataset sub = stratified_subset(ds, {0.01, 4});
  EXPECT_EQ(sub.class_counts(), (std::vector<std::size_t>{39, 13}));
  EXPECT_EQ(sub.size(), 52u);
}

TEST(Subset, IdentityDeterminismAndRatio) {
  const std::size_t counts[] = {90, 10};
  const LabeledDataset ds = gen_synthetic(counts, 8, 5);
  const LabeledDataset full = stratified_subset(ds, {1.0, 3});
  ASSERT_EQ(full.size(), ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) EXPECT_EQ(full[i].source, ds[i].source);
  EXPECT_EQ(stratified_subset(ds, {0.1, 3}).class_counts(), (std::vector<std::size_t>{9, 1}));

  auto names = [](const LabeledDataset& d) {
    std::vector<std::string> out;
    for (const auto& s : d.samples()) out.push_back(s.source);
    return out;
  };
  EXPECT_EQ(names(stratified_subset(ds, {0.25, 3})), names(stratified_subset(ds, {0.25, 3})));
  EXPECT_NE(names(stratified_subset(ds, {0.25, 3})), names(stratified_subset(ds, {0.25, 4})));
  for (double f : {0.01, 0.05, 0.1, 0.25, 0.5, 1.0}) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const auto got = stratified_subset(ds, {f, seed}).class_counts();
      for (std::size_t j = 0; j < 2; ++j) {
        EXPECT_GE(got[j], 1u);
        EXPECT_LE(std::abs(static_cast<double>(got[j]) - f * static_cast<double>(ds.class_counts()[j])), 1.0);
      }
    }
  }
  EXPECT_THROW(stratified_subset(ds, {0.0, 1}), ConfigError);
}

TEST(Batching, SizesPartitionAndOrder) {
  const auto b = epoch_batches(10, 4, 0, 0, false);
  ASSERT_EQ(b.size(), 3u);
  EXPECT_EQ(b[0].size(), 4u);
  EXPECT_EQ(b[2].size(), 2u);
  EXPECT_EQ(b[0], (std::vector<std::size_t>{0, 1, 2, 3}));
  for (std::size_t epoch = 0; epoch < 3; ++epoch) {
    const auto s = epoch_batches(37, 5, 11, epoch, true);
    std::multiset<std::size_t> seen;
    for (const auto& batch : s) seen.insert(batch.begin(), batch.end());
    EXPECT_EQ(seen.size(), 37u);
    EXPECT_EQ(std::set<std::size_t>(seen.begin(), seen.end()).size(), 37u);
    EXPECT_EQ(s, epoch_batches(37, 5, 11, epoch, true));
  }
  EXPECT_NE(epoch_batches(37, 5, 11, 0, true), epoch_batches(37, 5, 11, 1, true));
  EXPECT_THROW(epoch_batches(5, 0, 0, 0, false), ConfigError);
}

TEST(Batching, InputsAreNormalisedTargetsRaw) {
  const std::size_t counts[] = {4, 4};
  const LabeledDataset ds = gen_synthetic(counts, 8, 2);
  const Normalization norm = *ds.normalization();
  const std::vector<std::size_t> idx{5, 1};
  const Batch<double> b = make_batch<double>(ds, idx, norm);
  EXPECT_EQ(b.labels, (std::vector<ClassIndex>{1, 0}));
  EXPECT_EQ(b.targets.at(0, 3), ds[5].pixels[3]);
  EXPECT_DOUBLE_EQ(b.inputs.at(1, 7), (ds[1].pixels[7] - norm.mean) / norm.std);
}

TEST(Normalization, ConstantImagesHitTheFloor) {
  const Normalization n = normalization_stats(constant_dataset(4, 0.5));
  EXPECT_EQ(n.mean, 0.5);
  EXPECT_EQ(n.std, kStdFloor);
  EXPECT_THROW(normalization_stats(constant_dataset(1, 0.5)), DataError);
}

TEST(Normalization, MatchesTwoPassOracleAndStandardises) {
  const std::size_t counts[] = {7, 5};
  const LabeledDataset ds = gen_synthetic(counts, 8, 9);
  double sum = 0.0, n = 0.0;
  for (const auto& s : ds.samples())
    for (double v : s.pixels) sum += v, n += 1.0;
  const double mean = sum / n;
  double sq = 0.0;
  for (const auto& s : ds.samples())
    for (double v : s.pixels) sq += (v - mean) * (v - mean);
  const Normalization got = normalization_stats(ds);
  EXPECT_NEAR(got.mean, mean, 1e-9);
  EXPECT_NEAR(got.std, std::sqrt(sq / n), 1e-9);

  std::vector<Sample> normalised = ds.samples();
  for (auto& s : normalised)
    for (double& v : s.pixels) v = got.apply(v);
  double m2 = 0.0, s2 = 0.0;
  for (const auto& s : normalised)
    for (double v : s.pixels) m2 += v;
  m2 /= n;
  for (const auto& s : normalised)
    for (double v : s.pixels) s2 += (v - m2) * (v - m2);
  EXPECT_NEAR(m2, 0.0, 1e-6);
  EXPECT_NEAR(std::sqrt(s2 / n), 1.0, 1e-6);
}
