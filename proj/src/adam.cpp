#include "insmt/adam.hpp"

#include <cmath>

namespace insmt {

template <typename T>
AdamState<T> make_adam_state(const ParameterSet<T>& params, const AdamOptions& options) {
  AdamState<T> state;
  state.options = options;
  for (const auto& p : params) {
    state.first_moment.emplace_back(p.value.shape());
    state.second_moment.emplace_back(p.value.shape());
  }
  return state;
}

template <typename T>
void adam_step(AdamState<T>& state, ParameterSet<T>& params, const Gradients<T>& grads) {
  if (grads.size() != params.size() || state.first_moment.size() != params.size()) {
    throw ContractViolation("adam_step: " + std::to_string(grads.size()) + " gradients and " +
                            std::to_string(state.first_moment.size()) + " moments for " +
                            std::to_string(params.size()) + " parameters");
  }
  for (std::size_t p = 0; p < params.size(); ++p) {
    const Shape& shape = params[static_cast<int>(p)].value.shape();
    if (grads[p].empty()) {
      throw ContractViolation("adam_step: missing gradient for " + params[static_cast<int>(p)].name);
    }
    if (grads[p].shape() != shape) {
      throw DimensionError("adam_step: gradient " + shape_string(grads[p].shape()) + " for " +
                           params[static_cast<int>(p)].name + " " + shape_string(shape));
    }
  }

  ++state.step_count;
  const AdamOptions& o = state.options;
  const double t = static_cast<double>(state.step_count);
  const double correction1 = 1.0 - std::pow(o.beta1, t);
  const double correction2 = 1.0 - std::pow(o.beta2, t);
  for (std::size_t p = 0; p < params.size(); ++p) {
    Tensor<T>& value = params[static_cast<int>(p)].value;
    Tensor<T>& m = state.first_moment[p];
    Tensor<T>& v = state.second_moment[p];
    const Tensor<T>& g = grads[p];
    for (std::size_t i = 0; i < value.size(); ++i) {
      const double gi = g[i];
      const double mi = o.beta1 * m[i] + (1.0 - o.beta1) * gi;
      const double vi = o.beta2 * v[i] + (1.0 - o.beta2) * gi * gi;
      m[i] = static_cast<T>(mi);
      v[i] = static_cast<T>(vi);
      const double m_hat = mi / correction1;
      const double v_hat = vi / correction2;
      value[i] = static_cast<T>(value[i] - o.learning_rate * m_hat / (std::sqrt(v_hat) + o.epsilon));
    }
  }
}

template <typename T>
double global_norm(const Gradients<T>& grads) {
  double total = 0.0;
  for (const auto& g : grads) {
    for (T v : g.values()) total += static_cast<double>(v) * v;
  }
  return std::sqrt(total);
}

template <typename T>
double clip_global_norm(Gradients<T>& grads, double max_norm) {
  const double norm = global_norm(grads);
  if (norm > max_norm && norm > 0.0) {
    const double factor = max_norm / norm;
    for (auto& g : grads) {
      for (T& v : g.values()) v = static_cast<T>(v * factor);
    }
  }
  return norm;
}

#define INSMT_INSTANTIATE_ADAM(T)                                                 \
  template AdamState<T> make_adam_state(const ParameterSet<T>&, const AdamOptions&); \
  template void adam_step(AdamState<T>&, ParameterSet<T>&, const Gradients<T>&);  \
  template double global_norm(const Gradients<T>&);                               \
  template double clip_global_norm(Gradients<T>&, double);

INSMT_INSTANTIATE_ADAM(float)
INSMT_INSTANTIATE_ADAM(double)

#undef INSMT_INSTANTIATE_ADAM

}  // namespace insmt
