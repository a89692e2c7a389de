#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <vector>

#include "dcq/errors.hpp"
#include "dcq/tape.hpp"

namespace dcq {

/// Builds a scalar loss on `tape` from parameter handles.
using TapeFn = std::function<Var(Tape&, std::span<const Var>)>;
using ScalarFn = std::function<double(const std::vector<Tensor>&)>;

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::size_t worst_param = 0;
  Index worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t coordinates = 0;
};

inline double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
  return std::abs(analytic - numeric) / denom;
}

inline double evaluate(const TapeFn& fn, const std::vector<Tensor>& params) {
  Tape tape;
  std::vector<Var> vars;
  vars.reserve(params.size());
  for (const Tensor& p : params) vars.push_back(tape.constant(p));
  const Var out = fn(tape, vars);
  const Tensor& v = tape.value(out);
  if (v.size() != 1) throw ContractError("gradient check needs a scalar function");
  return v(0, 0);
}

inline std::vector<Tensor> autodiff_gradients(const TapeFn& fn, const std::vector<Tensor>& params) {
  Tape tape;
  std::vector<Var> vars;
  vars.reserve(params.size());
  for (const Tensor& p : params) vars.push_back(tape.parameter(p));
  tape.backward(fn(tape, vars));
  std::vector<Tensor> grads;
  grads.reserve(vars.size());
  for (Var v : vars) grads.push_back(tape.grad(v));
  return grads;
}

/// Central differences (f(p+h) - f(p-h)) / 2h against `analytic`, coordinate by coordinate.
inline GradCheckReport finite_difference_check(const ScalarFn& fn, std::vector<Tensor> params,
                                               const std::vector<Tensor>& analytic, double h = 1e-5) {
  if (!(h > 0)) throw ConfigError("finite difference step must be positive");
  if (analytic.size() != params.size()) throw ShapeError("one analytic gradient per parameter required");
  GradCheckReport report;
  for (std::size_t p = 0; p < params.size(); ++p) {
    require_same_shape(params[p], analytic[p], "finite_difference_check");
    for (Index i = 0; i < params[p].size(); ++i) {
      double& x = params[p].data()[i];
      const double saved = x;
      x = saved + h;
      const double up = fn(params);
      x = saved - h;
      const double down = fn(params);
      x = saved;
      if (!std::isfinite(up) || !std::isfinite(down)) {
        throw NumericError("non-finite function value during finite differencing");
      }
      const double numeric = (up - down) / (2.0 * h);
      const double a = analytic[p].data()[i];
      const double err = relative_error(a, numeric);
      ++report.coordinates;
      if (err > report.max_relative_error || report.coordinates == 1) {
        report.max_relative_error = err;
        report.worst_param = p;
        report.worst_index = i;
        report.analytic = a;
        report.numeric = numeric;
      }
    }
  }
  return report;
}

inline GradCheckReport gradcheck(const TapeFn& fn, const std::vector<Tensor>& params, double h = 1e-5) {
  const auto analytic = autodiff_gradients(fn, params);
  return finite_difference_check([&fn](const std::vector<Tensor>& p) { return evaluate(fn, p); }, params, analytic, h);
}

}  // namespace dcq
