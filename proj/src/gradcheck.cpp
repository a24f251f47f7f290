#include "dnl/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "dnl/errors.hpp"

namespace dnl {

double relative_error(double analytic, double numeric, double floor) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

GradCheckResult check_gradient(const std::string& name,
                               const std::function<double(const Tensor&)>& f,
                               const Tensor& point, const Tensor& analytic,
                               const GradCheckOptions& options) {
  if (point.shape() != analytic.shape()) {
    throw ShapeError("check_gradient(" + name + "): point " + shape_string(point.shape()) +
                     " vs gradient " + shape_string(analytic.shape()));
  }
  GradCheckResult result;
  result.name = name;
  Tensor probe = point;
  for (std::size_t i = 0; i < point.size(); ++i) {
    const double x = point[i];
    probe[i] = x + options.step;
    const double up = f(probe);
    probe[i] = x - options.step;
    const double down = f(probe);
    probe[i] = x;
    const double numeric = (up - down) / (2.0 * options.step);
    const double err = relative_error(analytic[i], numeric, options.floor);
    if (!(err <= result.max_relative_error)) {
      result.max_relative_error = err;
      result.worst_index = i;
    }
    ++result.checked;
  }
  result.passed = result.max_relative_error < options.tolerance;
  return result;
}

}  // namespace dnl
