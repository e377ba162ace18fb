#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include "precise/model.hpp"

namespace precise {

// Training-side metadata stored next to the parameters.
struct CheckpointMeta {
  double lambda1 = 1.0;
  double lambda2 = 0.001;
  std::string mode = "reserved";
  std::uint64_t seed = 0;
  std::map<std::string, std::string> extra;
};

template <typename T>
struct Checkpoint {
  PreciseModel<T> model;
  CheckpointMeta meta;
};

// Layout:
//   "PRECISEv1\n"
//   one "param <name> <shape> <scalar bytes>\n" line per parameter
//   "data\n"
//   little-endian raw buffers in header order
//   key=value metadata lines (architecture, reservation, lambdas, ...)
template <typename T>
void save_checkpoint(const std::filesystem::path& path, const PreciseModel<T>& model, const CheckpointMeta& meta);

// Parameters stored at a different scalar width are converted.
template <typename T>
Checkpoint<T> load_checkpoint(const std::filesystem::path& path);

// Scalar width in bytes (4 or 8) of the first stored parameter.
std::size_t checkpoint_scalar_width(const std::filesystem::path& path);

}  // namespace precise
