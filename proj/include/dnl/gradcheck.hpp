#pragma once

// Central finite-difference gradient checking.
//
// The checker only evaluates the scalar function forward; it never touches
// the reverse pass it is checking.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "dnl/tensor.hpp"

namespace dnl {

struct GradCheckOptions {
  double step = 1e-5;
  double tolerance = 1e-4;
  /// Denominator floor: relative error is |a - n| / max(|a|, |n|, floor).
  double floor = 1e-6;
};

struct GradCheckResult {
  std::string name;
  std::size_t checked = 0;
  double max_relative_error = 0.0;
  std::size_t worst_index = 0;
  bool passed = true;
};

/// Perturbs each element of `point` by +/- step and compares the central
/// difference of `f` against `analytic` elementwise.
GradCheckResult check_gradient(const std::string& name,
                               const std::function<double(const Tensor&)>& f,
                               const Tensor& point, const Tensor& analytic,
                               const GradCheckOptions& options = {});

double relative_error(double analytic, double numeric, double floor);

}  // namespace dnl

namespace dnl {

/// Finite-difference checks of every differentiable operation, each extractor,
/// both attention variants (3x3 maps, 8 channels) and the full model
/// (8 feature channels, 7x7 patches, 3 classes). One result per checked
/// input or parameter tensor.
std::vector<GradCheckResult> run_gradcheck_suite(std::uint64_t seed = 2024,
                                                 const GradCheckOptions& options = {});

}  // namespace dnl
