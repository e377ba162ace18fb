#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include "oracles.hpp"
#include "precise/errors.hpp"
#include "precise/explain.hpp"
#include "precise/metrics.hpp"
#include "precise/pgm.hpp"

using namespace precise;
namespace fs = std::filesystem;

namespace {

ArchitectureSpec small_arch() {
  ArchitectureSpec arch;
  arch.image_height = arch.image_width = 8;
  arch.hidden = {6};
  arch.latent_dim = 3;
  return arch;
}

LabeledDataset data(std::size_t a, std::size_t b, std::uint64_t seed) {
  const std::size_t counts[] = {a, b};
  return gen_synthetic(counts, 8, seed);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// Encodings of every sample, computed in double.
oracle::Matrix encodings(const PreciseModel<double>& model, const LabeledDataset& ds) {
  std::vector<std::size_t> idx(ds.size());
  std::iota(idx.begin(), idx.end(), 0);
  Tape<double> tape(Recording::kOff);
  return oracle::to_matrix(model.encode(tape, make_batch<double>(ds, idx, model.normalization()).inputs));
}

}  // namespace

TEST(ExportPrototypes, FourFilesInRangeAndReproducible) {
  const LabeledDataset ds = data(6, 4, 1);
  const auto model = PreciseModel<double>::init(small_arch(), 2, 2, 3, &ds);
  const fs::path dir = fs::temp_directory_path() / "precise_test_protos";
  fs::remove_all(dir);
  const auto paths = export_prototypes(model, dir);
  ASSERT_EQ(paths.size(), 4u);
  EXPECT_EQ(paths[0].filename(), "proto_0_0.pgm");
  EXPECT_EQ(paths[3].filename(), "proto_1_3.pgm");
  Tape<double> tape(Recording::kOff);
  const auto decoded = model.decode(tape, model.prototypes());
  for (std::size_t k = 0; k < 4; ++k) {
    const GrayImage img = read_pgm(paths[k]);
    EXPECT_EQ(img.width, 8u);
    EXPECT_EQ(img.height, 8u);
    for (std::size_t i = 0; i < img.pixels.size(); ++i) EXPECT_EQ(img.pixels[i], to_byte(decoded.at(k * 64 + i)));
  }
  const std::string first = slurp(paths[2]);
  export_prototypes(model, dir);
  EXPECT_EQ(slurp(paths[2]), first);
}

TEST(DistanceReport, RowsAreTheClassifierInput) {
  const LabeledDataset ds = data(7, 5, 2);
  const auto model = PreciseModel<float>::init(small_arch(), 2, 2, 4, &ds);
  const auto rows = distance_report(model, ds);
  ASSERT_EQ(rows.size(), ds.size());
  std::vector<std::size_t> idx(ds.size());
  std::iota(idx.begin(), idx.end(), 0);
  Tape<float> tape(Recording::kOff);
  const auto f = model.forward(tape, make_batch<float>(ds, idx, model.normalization()).inputs);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    EXPECT_EQ(rows[i].label, ds[i].label);
    EXPECT_EQ(rows[i].image, ds[i].source);
    for (std::size_t k = 0; k < 4; ++k) {
      EXPECT_EQ(rows[i].distances[k], f.distances.at(i, k));
      EXPECT_GE(rows[i].distances[k], 0.0f);
      EXPECT_LE(rows[i].distances[rows[i].nearest_prototype], rows[i].distances[k]);
    }
    EXPECT_EQ(rows[i].predicted, argmax<float>(f.probs.values().subspan(i * 2, 2)));
  }
}

TEST(DistanceReport, QueryOnAPrototypeReadsZero) {
  const LabeledDataset ds = data(3, 3, 3);
  const auto model = PreciseModel<double>::init(small_arch(), 1, 2, 5, &ds);
  const auto z = encodings(model, ds);
  std::vector<double> protos(model.prototypes().values().begin(), model.prototypes().values().end());
  std::copy(z[4].begin(), z[4].end(), protos.begin() + 3);
  model.prototypes().storage().values = protos;
  const auto rows = distance_report(model, ds);
  EXPECT_LE(rows[4].distances[1], 1e-6);
  EXPECT_EQ(rows[4].nearest_prototype, 1u);
}

TEST(DistanceReport, ShapeMismatchThrows) {
  const LabeledDataset ds = data(3, 3, 3);
  const std::size_t counts[] = {2, 2};
  const auto model = PreciseModel<double>::init(small_arch(), 1, 2, 5, &ds);
  EXPECT_THROW(distance_report(model, gen_synthetic(counts, 9, 0)), ShapeError);
}

TEST(ClassAverage, MatchesDoubleLoopOracle) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 10; ++trial) {
    const LabeledDataset ds = data(1 + rng() % 5, 1 + rng() % 3, rng());
    const std::size_t d = 1 + rng() % 3;
    const auto model = PreciseModel<double>::init(small_arch(), d, 2, rng(), &ds);
    const auto z = encodings(model, ds);
    const auto protos = oracle::to_matrix(model.prototypes());
    oracle::Matrix expect(2, std::vector<double>(2, 0.0));
    std::vector<double> count(2, 0.0);
    for (std::size_t i = 0; i < z.size(); ++i) {
      count[ds[i].label] += 1.0;
      for (std::size_t b = 0; b < 2; ++b) {
        double block = 0.0;
        for (std::size_t k = b * d; k < (b + 1) * d; ++k) block += oracle::euclid(z[i], protos[k]);
        expect[ds[i].label][b] += block / static_cast<double>(d);
      }
    }
    const auto got = class_average_distances(model, ds);
    for (std::size_t a = 0; a < 2; ++a)
      for (std::size_t b = 0; b < 2; ++b) EXPECT_NEAR((*got[a])[b], expect[a][b] / count[a], 1e-12);
  }
}

TEST(ClassAverage, SingleImageAndAbsentRows) {
  const LabeledDataset ds = data(4, 4, 8);
  const auto model = PreciseModel<double>::init(small_arch(), 2, 2, 1, &ds);
  const std::vector<std::size_t> one{5};
  const LabeledDataset single = ds.select(one);
  const auto m = class_average_distances(model, single);
  EXPECT_FALSE(m[0].has_value());
  ASSERT_TRUE(m[1].has_value());
  const auto row = distance_report(model, single).front().distances;
  EXPECT_NEAR((*m[1])[0], (row[0] + row[1]) / 2.0, 1e-15);
  EXPECT_NEAR((*m[1])[1], (row[2] + row[3]) / 2.0, 1e-15);
}

TEST(ClassAverage, DiagonalDominanceRule) {
  EXPECT_TRUE(row_diagonally_dominant({std::vector<double>{2.536, 5.171}, std::vector<double>{7.932, 3.499}}));
  EXPECT_FALSE(row_diagonally_dominant({std::vector<double>{2.0, 2.0}, std::vector<double>{3.0, 1.0}}));
  EXPECT_TRUE(row_diagonally_dominant({std::nullopt, std::vector<double>{3.0, 1.0}}));
}

TEST(Coverage, NearestLabelsDecideCoverage) {
  const LabeledDataset ds = data(4, 4, 9);
  const auto model = PreciseModel<double>::init(small_arch(), 1, 2, 2, &ds);
  const auto z = encodings(model, ds);
  // Place prototype 0 on a class-1 encoding and prototype 1 on a class-0 one.
  std::vector<double> protos;
  protos.insert(protos.end(), z[6].begin(), z[6].end());
  protos.insert(protos.end(), z[1].begin(), z[1].end());
  model.prototypes().storage().values = protos;
  EXPECT_EQ(prototype_nearest_labels(model, ds), (std::vector<ClassIndex>{1, 0}));
  EXPECT_FALSE(has_prototype_coverage(model, ds));
  std::swap_ranges(protos.begin(), protos.begin() + 3, protos.begin() + 3);
  model.prototypes().storage().values = protos;
  EXPECT_TRUE(has_prototype_coverage(model, ds));
}

TEST(ReportCsv, HeadersFollowTheDeclaredLayout) {
  const ReservationMap map(1, 2);
  std::vector<DistanceRow<double>> rows{{"a.pgm", 0, 1, 0, {0.5, 2.25}}};
  std::ostringstream dist, avg;
  write_distance_csv(dist, rows, map);
  EXPECT_EQ(dist.str(), "image,pred,proto_0_class,proto_0_dist,proto_1_class,proto_1_dist\na.pgm,1,0,0.5,1,2.25\n");
  write_class_average_csv(avg, {std::vector<double>{1.5, 3}, std::nullopt});
  EXPECT_EQ(avg.str(), "class,0,1\n0,1.5,3\n");
}
