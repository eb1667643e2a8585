#include "insmt/grad_check.hpp"

#include <algorithm>
#include <cmath>

namespace insmt {

double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
  return std::abs(analytic - numeric) / denom;
}

namespace {

double evaluate(const ScalarFunction& f, const Tensor<double>& point) {
  Graph<double> g;
  Node<double> out = f(g, g.input(point));
  if (out.value().size() != 1) {
    throw ContractViolation("grad_check: function output has shape " +
                            shape_string(out.value().shape()));
  }
  return out.value()[0];
}

}  // namespace

double grad_check(const ScalarFunction& f, const Tensor<double>& point, double epsilon) {
  Tensor<double> analytic;
  {
    Graph<double> g;
    Node<double> x = g.input(point);
    Node<double> out = f(g, x);
    if (out.value().size() != 1) {
      throw ContractViolation("grad_check: function output has shape " +
                              shape_string(out.value().shape()));
    }
    g.backward(out);
    analytic = x.grad();
  }
  double worst = 0.0;
  Tensor<double> probe = point;
  for (std::size_t i = 0; i < probe.size(); ++i) {
    const double saved = probe[i];
    probe[i] = saved + epsilon;
    const double up = evaluate(f, probe);
    probe[i] = saved - epsilon;
    const double down = evaluate(f, probe);
    probe[i] = saved;
    worst = std::max(worst, relative_error(analytic[i], (up - down) / (2 * epsilon)));
  }
  return worst;
}

namespace {

Gradients<double> analytic_gradients(const ParameterLoss& f, ParameterSet<double>& params) {
  Gradients<double> analytic = zero_gradients(params);
  Graph<double> g(&params);
  Node<double> out = f(g);
  if (out.value().size() != 1) {
    throw ContractViolation("grad_check: loss has shape " + shape_string(out.value().shape()));
  }
  g.backward(out);
  g.accumulate_parameter_grads(analytic);
  return analytic;
}

// Central differences over every coordinate of `probe`, compared with `analytic`.
template <typename T, typename Loss>
GradCheckReport compare(const Gradients<double>& analytic, ParameterSet<T>& probe, const Loss& loss,
                        double epsilon) {
  auto evaluate = [&] {
    Graph<T> g(&probe);
    return loss(g).value()[0];
  };
  const T step = static_cast<T>(epsilon);
  GradCheckReport report;
  for (std::size_t p = 0; p < probe.size(); ++p) {
    Tensor<T>& value = probe[static_cast<int>(p)].value;
    for (std::size_t i = 0; i < value.size(); ++i) {
      const T saved = value[i];
      value[i] = saved + step;
      const T up = evaluate();
      value[i] = saved - step;
      const T down = evaluate();
      value[i] = saved;
      const double numeric = static_cast<double>((up - down) / (2 * step));
      const double err = relative_error(analytic[p][i], numeric);
      ++report.coordinates;
      if (report.worst_parameter.empty() || err > report.max_relative_error) {
        report.max_relative_error = err;
        report.worst_parameter = probe[static_cast<int>(p)].name;
        report.worst_index = i;
        report.worst_analytic = analytic[p][i];
        report.worst_numeric = numeric;
      }
    }
  }
  return report;
}

}  // namespace

GradCheckReport grad_check_parameters(const ParameterLoss& f, ParameterSet<double>& params,
                                      double epsilon) {
  const Gradients<double> analytic = analytic_gradients(f, params);
  return compare(analytic, params, f, epsilon);
}

GradCheckReport grad_check_parameters(const ParameterLoss& f, ParameterSet<double>& params,
                                      const ExtendedParameterLoss& extended_loss,
                                      ParameterSet<long double>& extended, double epsilon) {
  if (extended.size() != params.size()) {
    throw ContractViolation("grad_check: extended parameter set does not match");
  }
  const Gradients<double> analytic = analytic_gradients(f, params);
  return compare(analytic, extended, extended_loss, epsilon);
}

}  // namespace insmt
