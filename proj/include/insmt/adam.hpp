#pragma once

#include <cstdint>
#include <vector>

#include "insmt/graph.hpp"

namespace insmt {

struct AdamOptions {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

template <typename T>
struct AdamState {
  AdamOptions options;
  std::vector<Tensor<T>> first_moment;
  std::vector<Tensor<T>> second_moment;
  std::int64_t step_count = 0;
};

template <typename T>
AdamState<T> make_adam_state(const ParameterSet<T>& params, const AdamOptions& options = {});

// Bias-corrected Adam update; every parameter must have a gradient of matching shape.
template <typename T>
void adam_step(AdamState<T>& state, ParameterSet<T>& params, const Gradients<T>& grads);

template <typename T>
double global_norm(const Gradients<T>& grads);

// Rescales so the global L2 norm is at most `max_norm`; returns the norm before clipping.
template <typename T>
double clip_global_norm(Gradients<T>& grads, double max_norm);

}  // namespace insmt
