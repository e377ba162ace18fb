#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "precise/tape.hpp"

namespace precise {

// Central finite differences against the tape's backward pass, in 64-bit.

using ScalarFunction = std::function<Tensor<double>(Tape<double>&)>;

struct GradientComparison {
  double max_rel_error = 0.0;  // worst input tensor
  double kink_margin = 0.0;    // distance of the base point from a non-smooth point
};

// ||analytic - numeric|| / max(||analytic||, ||numeric||, floor), per tensor.
double relative_error(std::span<const double> analytic, std::span<const double> numeric, double floor = 1e-8);

// `f` must rebuild its output from the current values of `inputs` on every
// call; inputs are perturbed in place and restored.
GradientComparison compare_gradients(const ScalarFunction& f, std::span<Tensor<double>> inputs, double eps);

struct GradCheckOptions {
  std::uint64_t seed = 0;
  std::size_t instances = 20;
  double eps = 1e-6;
  double tolerance = 1e-4;
  // Instances whose base point lies closer than this to a kink are redrawn.
  double min_kink_margin = 1e-4;
};

struct GradCheckOutcome {
  std::string name;
  std::size_t instances = 0;
  std::size_t rejected = 0;
  double max_rel_error = 0.0;
  bool passed = false;
};

// Every differentiable tape operation, the loss terms, and the full objective
// in both prototype-loss modes.
std::vector<GradCheckOutcome> run_gradcheck_suite(const GradCheckOptions& options);

void print_gradcheck_report(std::ostream& out, const std::vector<GradCheckOutcome>& outcomes);

}  // namespace precise
