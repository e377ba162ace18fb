#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "oracles.hpp"
#include "precise/dataset.hpp"
#include "precise/errors.hpp"
#include "precise/objective.hpp"

using namespace precise;
using Td = Tensor<double>;

namespace {

Td log_of(const oracle::Matrix& probs) {
  oracle::Matrix logs = probs;
  for (auto& row : logs)
    for (double& v : row) v = std::log(v);
  return oracle::to_tensor(logs);
}

struct ProtoInstance {
  oracle::Matrix z;
  oracle::Matrix protos;
  std::vector<ClassIndex> labels;
  std::size_t per_class = 1;
  std::size_t classes = 2;
};

// n <= 6 samples, m <= 6 prototypes, latent <= 3.
ProtoInstance random_instance(std::mt19937_64& rng, bool single_class) {
  ProtoInstance inst;
  const std::size_t latent = 1 + rng() % 3;
  inst.classes = 2 + rng() % 2;
  inst.per_class = 1 + rng() % (6 / inst.classes);
  const std::size_t n = 1 + rng() % 6;
  inst.z = oracle::random_matrix(rng, n, latent);
  inst.protos = oracle::random_matrix(rng, inst.per_class * inst.classes, latent);
  const ClassIndex only = rng() % inst.classes;
  for (std::size_t i = 0; i < n; ++i) inst.labels.push_back(single_class ? only : rng() % inst.classes);
  return inst;
}

}  // namespace

TEST(AeLoss, IdentityIsZeroAndHandValue) {
  Tape<double> tape;
  const Td x = Td::matrix(2, 2, {0.1, 0.2, 0.3, 0.4});
  EXPECT_EQ(ae_loss(tape, x, x).item(), 0.0);
  EXPECT_EQ(ae_loss(tape, Td::matrix(1, 2, {0, 0}), Td::matrix(1, 2, {1, 1})).item(), 2.0);
  EXPECT_THROW(ae_loss(tape, x, Td::zeros({1, 4})), ShapeError);
}

TEST(AeLoss, MatchesDoubleLoopOracle) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 1 + rng() % 6, p = 1 + rng() % 9;
    const auto x = oracle::random_matrix(rng, n, p, 0, 1), r = oracle::random_matrix(rng, n, p, 0, 1);
    Tape<double> tape;
    EXPECT_NEAR(ae_loss(tape, oracle::to_tensor(x), oracle::to_tensor(r)).item(), oracle::ae_loss(x, r), 1e-12);
  }
}

TEST(WeightedCe, HandComputedTwoSampleBatch) {
  Tape<double> tape;
  const std::vector<ClassIndex> labels{0, 1};
  const std::vector<double> w{1, 3};
  const double got = weighted_ce(tape, log_of({{0.8, 0.2}, {0.3, 0.7}}), labels, w).item();
  EXPECT_NEAR(got, (1 * -std::log(0.8) + 3 * -std::log(0.7)) / 4, 1e-12);
}

TEST(WeightedCe, UniformProbabilitiesGiveLogN) {
  Tape<double> tape;
  const std::vector<ClassIndex> labels{0, 2, 1};
  const std::vector<double> w{0.2, 5, 1.5};
  const oracle::Matrix uniform(3, std::vector<double>(3, 1.0 / 3));
  EXPECT_NEAR(weighted_ce(tape, log_of(uniform), labels, w).item(), std::log(3.0), 1e-12);
}

TEST(WeightedCe, PerfectPredictionsAndLogClamp) {
  Tape<double> tape;
  const std::vector<ClassIndex> labels{0};
  const Td perfect = tape.log_softmax(Td::matrix(1, 2, {800, 0}));
  EXPECT_EQ(weighted_ce(tape, perfect, labels, {}).item(), 0.0);
  const Td hopeless = Td::matrix(1, 2, {-200, 0});
  EXPECT_NEAR(weighted_ce(tape, hopeless, labels, {}).item(), -std::log(1e-12), 1e-9);
}

TEST(WeightedCe, AllOnesWeightsEqualUnweightedAndMatchOracle) {
  std::mt19937_64 rng(22);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 1 + rng() % 6, classes = 2 + rng() % 3;
    Tape<double> tape;
    const Td logp = tape.log_softmax(oracle::to_tensor(oracle::random_matrix(rng, n, classes, -3, 3)));
    oracle::Matrix probs = oracle::to_matrix(logp);
    for (auto& row : probs)
      for (double& v : row) v = std::exp(v);
    std::vector<ClassIndex> labels(n);
    for (auto& y : labels) y = rng() % classes;
    std::vector<double> w(classes);
    for (double& v : w) v = 0.1 + static_cast<double>(rng() % 100) / 10.0;
    EXPECT_NEAR(weighted_ce(tape, logp, labels, w).item(), oracle::weighted_ce(probs, labels, w), 1e-12);
    const std::vector<double> ones(classes, 1.0);
    EXPECT_NEAR(weighted_ce(tape, logp, labels, ones).item(), weighted_ce(tape, logp, labels, {}).item(), 1e-12);
  }
}

TEST(WeightedCe, LabelOutOfRangeThrows) {
  Tape<double> tape;
  const std::vector<ClassIndex> labels{2};
  EXPECT_THROW(weighted_ce(tape, log_of({{0.5, 0.5}}), labels, {}), std::out_of_range);
}

TEST(ClassWeights, InverseFrequency) {
  const std::size_t balanced[] = {50, 50}, skewed[] = {90, 10}, pneumonia[] = {1349, 3883};
  EXPECT_EQ(compute_class_weights(balanced), (std::vector<double>{1, 1}));
  const auto w = compute_class_weights(skewed);
  EXPECT_NEAR(w[0], 100.0 / 180.0, 1e-12);
  EXPECT_NEAR(w[1], 5.0, 1e-12);
  const auto p = compute_class_weights(pneumonia);
  EXPECT_NEAR(p[0], 1.939, 5e-4);
  EXPECT_NEAR(p[1], 0.674, 5e-4);
  const std::size_t empty[] = {5, 0};
  EXPECT_THROW(compute_class_weights(empty), DataError);
}

TEST(ProtoReserved, HandEnumeratedSingleSample) {
  Tape<double> tape;
  const PrototypeBank<double> bank{Td::matrix(4, 2, {3, 4, 0, 1, 9, 9, 8, 8}), ReservationMap(2, 2)};
  const std::vector<ClassIndex> labels{0};
  const auto terms = proto_loss_reserved(tape, Td::matrix(1, 2, {0, 0}), labels, bank);
  EXPECT_NEAR(terms.term1.item(), 1.0, 1e-12);
  EXPECT_NEAR(terms.term2.item(), 3.0, 1e-12);
}

TEST(ProtoReserved, CoincidentPointsGiveZero) {
  Tape<double> tape;
  const PrototypeBank<double> bank{Td::matrix(2, 2, {1, 2, -1, 0.5}), ReservationMap(1, 2)};
  const std::vector<ClassIndex> labels{0, 1, 0};
  const auto terms = proto_loss_reserved(tape, Td::matrix(3, 2, {1, 2, -1, 0.5, 1, 2}), labels, bank);
  EXPECT_EQ(terms.term1.item(), 0.0);
  EXPECT_EQ(terms.term2.item(), 0.0);
}

TEST(ProtoReserved, MatchesExhaustiveOracleIncludingSingleClassBatches) {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 200; ++trial) {
    const auto inst = random_instance(rng, trial % 3 == 0);
    Tape<double> tape;
    const PrototypeBank<double> bank{oracle::to_tensor(inst.protos), ReservationMap(inst.per_class, inst.classes)};
    const auto got = proto_loss_reserved(tape, oracle::to_tensor(inst.z), inst.labels, bank);
    const auto want = oracle::proto_reserved(inst.z, inst.labels, inst.protos, inst.per_class);
    EXPECT_NEAR(got.term1.item(), want.term1, 1e-12);
    EXPECT_NEAR(got.term2.item(), want.term2, 1e-12);
    EXPECT_GE(got.term1.item(), 0.0);
    EXPECT_GE(got.term2.item(), 0.0);
  }
}

TEST(ProtoReserved, InvariantUnderWithinClassPrototypePermutation) {
  std::mt19937_64 rng(24);
  const auto z = oracle::random_matrix(rng, 5, 3);
  auto protos = oracle::random_matrix(rng, 6, 3);
  const std::vector<ClassIndex> labels{0, 1, 2, 1, 0};
  Tape<double> tape;
  const ReservationMap map(2, 3);
  const auto a = proto_loss_reserved(tape, oracle::to_tensor(z), labels, {oracle::to_tensor(protos), map});
  std::swap(protos[0], protos[1]);
  std::swap(protos[4], protos[5]);
  const auto b = proto_loss_reserved(tape, oracle::to_tensor(z), labels, {oracle::to_tensor(protos), map});
  EXPECT_NEAR(a.term1.item(), b.term1.item(), 1e-15);
  EXPECT_NEAR(a.term2.item(), b.term2.item(), 1e-15);
}

TEST(ProtoUnreserved, SingleCoincidentPrototypeIsZero) {
  Tape<double> tape;
  const PrototypeBank<double> bank{Td::matrix(1, 2, {0.5, 0.5}), ReservationMap(1, 2)};
  const auto t = proto_loss_unreserved(tape, Td::matrix(1, 2, {0.5, 0.5}), bank);
  EXPECT_EQ(t.term1.item(), 0.0);
  EXPECT_EQ(t.term2.item(), 0.0);
}

TEST(ProtoUnreserved, MatchesExhaustiveOracle) {
  std::mt19937_64 rng(25);
  for (int trial = 0; trial < 200; ++trial) {
    const auto inst = random_instance(rng, trial % 3 == 0);
    Tape<double> tape;
    const PrototypeBank<double> bank{oracle::to_tensor(inst.protos), ReservationMap(inst.per_class, inst.classes)};
    const auto got = proto_loss_unreserved(tape, oracle::to_tensor(inst.z), bank);
    const auto want = oracle::proto_unreserved(inst.z, inst.protos);
    EXPECT_NEAR(got.term1.item(), want.term1, 1e-12);
    EXPECT_NEAR(got.term2.item(), want.term2, 1e-12);
  }
}

TEST(ProtoUnreserved, NeverExceedsReservedTerm1) {
  // The unrestricted minimum can only be smaller.
  std::mt19937_64 rng(26);
  for (int trial = 0; trial < 50; ++trial) {
    const auto inst = random_instance(rng, false);
    Tape<double> tape;
    const PrototypeBank<double> bank{oracle::to_tensor(inst.protos), ReservationMap(inst.per_class, inst.classes)};
    EXPECT_LE(proto_loss_unreserved(tape, oracle::to_tensor(inst.z), bank).term1.item(),
              proto_loss_reserved(tape, oracle::to_tensor(inst.z), inst.labels, bank).term1.item() + 1e-15);
  }
}

class TotalLossTest : public ::testing::Test {
 protected:
  void SetUp() override {
    const std::size_t counts[] = {6, 3};
    data_.emplace(gen_synthetic(counts, 8, 2));
    ArchitectureSpec arch;
    arch.image_height = arch.image_width = 8;
    arch.hidden = {10};
    arch.latent_dim = 3;
    model_.emplace(PreciseModel<double>::init(arch, 2, 2, 1, &*data_));
    std::vector<std::size_t> idx(data_->size());
    std::iota(idx.begin(), idx.end(), 0);
    batch_.emplace(make_batch<double>(*data_, idx, model_->normalization()));
  }
  std::optional<LabeledDataset> data_;
  std::optional<PreciseModel<double>> model_;
  std::optional<Batch<double>> batch_;
};

TEST_F(TotalLossTest, BreakdownIdentityInBothModes) {
  const LossWeights w{1.0, 0.001, compute_class_weights(data_->class_counts())};
  for (auto mode : {PrototypeLossMode::kReserved, PrototypeLossMode::kUnreserved}) {
    Tape<double> tape;
    const LossBreakdown b = total_loss(tape, *batch_, *model_, w, mode).breakdown();
    EXPECT_LE(b.identity_residual(w.lambda1, w.lambda2), 1e-9) << to_string(mode);
    const double expect = b.classification + b.ae + 0.001 * (b.proto_term1 + b.proto_term2);
    EXPECT_NEAR(b.total, expect, 1e-9 * std::abs(expect));
  }
}

TEST_F(TotalLossTest, ZeroLambdasLeaveOnlyClassification) {
  const LossWeights w{0.0, 0.0, compute_class_weights(data_->class_counts())};
  Tape<double> tape;
  const LossTerms<double> terms = total_loss(tape, *batch_, *model_, w, PrototypeLossMode::kReserved);
  Tape<double> t2;
  const double ce = weighted_ce(t2, terms.forward.log_probs, batch_->labels, w.class_weights).item();
  EXPECT_EQ(terms.total.item(), ce);
}

TEST_F(TotalLossTest, UsesRawPixelsAsReconstructionTarget) {
  Tape<double> tape;
  const LossTerms<double> terms = total_loss(tape, *batch_, *model_, LossWeights{}, PrototypeLossMode::kReserved);
  Tape<double> t2;
  EXPECT_EQ(terms.ae.item(), ae_loss(t2, batch_->targets, terms.forward.reconstruction).item());
}

TEST(LossWeights, DefaultsAndValidation) {
  const LossWeights w;
  EXPECT_EQ(w.lambda1, 1.0);
  EXPECT_EQ(w.lambda2, 0.001);
  EXPECT_THROW((LossWeights{-1.0, 0.0, {}}.validate(2)), ConfigError);
  EXPECT_THROW((LossWeights{1.0, 0.0, {1.0, 0.0}}.validate(2)), ConfigError);
  EXPECT_EQ(parse_mode("unreserved"), PrototypeLossMode::kUnreserved);
  EXPECT_THROW(parse_mode("dataset"), ConfigError);
}
