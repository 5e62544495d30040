#pragma once
// Self-checks behind `kasr verify`: finite-difference gradient checks, brute-force
// oracle comparisons, loss identities and metric sanity checks.

#include <cstdint>
#include <functional>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "kasr/tensor.hpp"

namespace kasr::verify {

struct CheckResult {
  std::string suite;      // gradient | oracle | identity | metric
  std::string op;
  std::string precision;  // f32 | f64 | "" when not applicable
  bool passed = false;
  std::size_t instances = 0;
  double worst = 0.0;     // largest observed error
  double tolerance = 0.0;
  std::string detail;
};

struct Options {
  std::string filter;              // case-insensitive substring of suite or op name
  bool inject_conv_fault = false;  // swap in a conv2d with a deliberately wrong backward
  std::uint64_t seed = 20240611;
  std::size_t grad_instances = 20;
  std::size_t oracle_instances = 10;
};

std::vector<CheckResult> run(const Options& opts, std::ostream* log = nullptr);

bool all_passed(const std::vector<CheckResult>& results);

std::string format(const CheckResult& r);

template <typename T>
using TensorFn = std::function<BasicTensor<T>(const std::vector<BasicTensor<T>>&)>;

/// Central-difference check of `f` with respect to inputs[wrt...]. A non-scalar
/// output is reduced with a fixed random projection. Returns
/// ||fd - bp|| / max(||fd||, ||bp||) over all checked coordinates.
template <typename T>
double gradient_error(const TensorFn<T>& f, std::vector<BasicTensor<T>>& inputs, const std::vector<std::size_t>& wrt,
                      std::mt19937_64& rng, double step);

/// conv2d whose weight gradient comes out spatially flipped; used as a
/// negative control for the gradient suite.
template <typename T>
BasicTensor<T> faulty_conv2d(const BasicTensor<T>& input, const BasicTensor<T>& weight, const BasicTensor<T>& bias,
                             std::size_t stride, std::size_t padding);

}  // namespace kasr::verify
