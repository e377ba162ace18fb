#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "precise/checkpoint.hpp"
#include "precise/errors.hpp"
#include "precise/training.hpp"

using namespace precise;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "precise_test_ckpt";
  fs::create_directories(dir);
  return dir / name;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

TrainConfig tiny_config() {
  TrainConfig c;
  c.hidden = {12};
  c.latent_dim = 3;
  c.epochs = 2;
  c.batch_size = 8;
  return c;
}

LabeledDataset tiny_data(std::uint64_t seed) {
  const std::size_t counts[] = {14, 6};
  return gen_synthetic(counts, 8, seed);
}

template <typename T>
void expect_same_parameters(const PreciseModel<T>& a, const PreciseModel<T>& b) {
  const auto pa = a.named_parameters(), pb = b.named_parameters();
  ASSERT_EQ(pa.size(), pb.size());
  for (std::size_t i = 0; i < pa.size(); ++i) {
    EXPECT_EQ(pa[i].name, pb[i].name);
    EXPECT_EQ(pa[i].tensor.shape(), pb[i].tensor.shape());
    EXPECT_TRUE(std::equal(pa[i].tensor.values().begin(), pa[i].tensor.values().end(), pb[i].tensor.values().begin()))
        << pa[i].name;
  }
}

}  // namespace

TEST(Checkpoint, RoundTripIsBitExactWithIdenticalMetrics) {
  const TrainConfig c = tiny_config();
  const LabeledDataset ds = tiny_data(1), test = tiny_data(2);
  const auto trained = train<float>(ds, nullptr, c, 3).model;
  CheckpointMeta meta{1.0, 0.001, "reserved", 3, {{"epochs", "2"}}};
  const fs::path path = scratch("roundtrip.bin");
  save_checkpoint(path, trained, meta);
  const auto loaded = load_checkpoint<float>(path);
  expect_same_parameters(trained, loaded.model);
  EXPECT_EQ(loaded.model.normalization().mean, trained.normalization().mean);
  EXPECT_EQ(loaded.model.normalization().std, trained.normalization().std);
  EXPECT_EQ(loaded.model.architecture().hidden, trained.architecture().hidden);
  EXPECT_EQ(loaded.model.reservation().per_class(), 2u);
  EXPECT_EQ(loaded.meta.lambda2, 0.001);
  EXPECT_EQ(loaded.meta.mode, "reserved");
  EXPECT_EQ(loaded.meta.seed, 3u);
  EXPECT_EQ(loaded.meta.extra.at("epochs"), "2");
  const Metrics before = evaluate(trained, test), after = evaluate(loaded.model, test);
  EXPECT_EQ(before.accuracy, after.accuracy);
  EXPECT_EQ(before.macro_f1, after.macro_f1);
  EXPECT_EQ(before.confusion, after.confusion);
  save_checkpoint(scratch("again.bin"), loaded.model, loaded.meta);
  EXPECT_EQ(slurp(path), slurp(scratch("again.bin")));
}

TEST(Checkpoint, IdenticalRunsGiveIdenticalBytes) {
  const TrainConfig c = tiny_config();
  const LabeledDataset ds = tiny_data(4);
  save_checkpoint(scratch("a.bin"), train<float>(ds, nullptr, c, 9).model, CheckpointMeta{});
  save_checkpoint(scratch("b.bin"), train<float>(ds, nullptr, c, 9).model, CheckpointMeta{});
  EXPECT_EQ(slurp(scratch("a.bin")), slurp(scratch("b.bin")));
}

TEST(Checkpoint, ScalarWidthIsRecordedAndConverted) {
  ArchitectureSpec arch;
  arch.image_height = arch.image_width = 8;
  arch.hidden = {};
  arch.latent_dim = 2;
  arch.classifier_bias = false;
  const auto model = PreciseModel<double>::init(arch, 1, 3, 0);
  save_checkpoint(scratch("wide.bin"), model, CheckpointMeta{});
  EXPECT_EQ(checkpoint_scalar_width(scratch("wide.bin")), 8u);
  const auto narrow = load_checkpoint<float>(scratch("wide.bin"));
  EXPECT_FALSE(narrow.model.classifier_bias().has_value());
  EXPECT_EQ(narrow.model.num_classes(), 3u);
  EXPECT_EQ(narrow.model.prototypes().at(1), static_cast<float>(model.prototypes().at(1)));
}

TEST(Checkpoint, StartsWithMagicAndRejectsCorruption) {
  const auto model = PreciseModel<float>::init(ArchitectureSpec{}, 1, 2, 0);
  const fs::path path = scratch("magic.bin");
  save_checkpoint(path, model, CheckpointMeta{});
  const std::string bytes = slurp(path);
  EXPECT_EQ(bytes.substr(0, 10), "PRECISEv1\n");
  std::ofstream(scratch("bad.bin"), std::ios::binary) << "NOTACKPT\n";
  EXPECT_THROW(load_checkpoint<float>(scratch("bad.bin")), DataError);
  std::ofstream(scratch("cut.bin"), std::ios::binary) << bytes.substr(0, bytes.size() / 2);
  EXPECT_THROW(load_checkpoint<float>(scratch("cut.bin")), DataError);
  EXPECT_THROW(load_checkpoint<float>(scratch("absent.bin")), DataError);
}
