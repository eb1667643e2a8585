#pragma once

#include <cstddef>
#include <functional>
#include <string>

#include "insmt/graph.hpp"

namespace insmt {

// Finite-difference verification runs in 64-bit only; the signatures enforce it.

using ScalarFunction = std::function<Node<double>(Graph<double>&, Node<double>)>;
using ParameterLoss = std::function<Node<double>(Graph<double>&)>;

// Max over coordinates of |analytic - numeric| / max(|analytic|, |numeric|, 1e-8),
// numeric gradients by central differences.
double grad_check(const ScalarFunction& f, const Tensor<double>& point, double epsilon = 1e-5);

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::string worst_parameter;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t coordinates = 0;
};

// Checks every coordinate of every parameter against the loss built by `f`.
// `params` is perturbed in place and restored before returning.
GradCheckReport grad_check_parameters(const ParameterLoss& f, ParameterSet<double>& params,
                                      double epsilon = 1e-5);

// Same check with the finite differences taken in extended precision, which
// keeps roundoff in the numeric side far below the tolerance even for
// near-zero gradients. `extended` must hold the values of `params` and
// `extended_loss` must build the same function over it.
using ExtendedParameterLoss = std::function<Node<long double>(Graph<long double>&)>;
GradCheckReport grad_check_parameters(const ParameterLoss& f, ParameterSet<double>& params,
                                      const ExtendedParameterLoss& extended_loss,
                                      ParameterSet<long double>& extended, double epsilon = 1e-5);

double relative_error(double analytic, double numeric);

}  // namespace insmt
