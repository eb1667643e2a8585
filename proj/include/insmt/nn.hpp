#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "insmt/graph.hpp"

namespace insmt::nn {

// Gate blocks are stacked in the order input, forget, cell, output:
// input_weights [4H, I], recurrent_weights [4H, H], bias [4H].
struct LstmParams {
  int input_weights = -1;
  int recurrent_weights = -1;
  int bias = -1;
  int input_size = 0;
  int hidden_size = 0;
};

template <typename T>
struct LstmState {
  Node<T> h;
  Node<T> c;
};

struct FeedForwardParams {
  int w1 = -1;  // [hidden, input]
  int b1 = -1;  // [hidden]
  int w2 = -1;  // [1, hidden]
  int b2 = -1;  // [1]
};

// Registers zero-valued tensors; see initialize_* for values.
template <typename T>
LstmParams add_lstm(ParameterSet<T>& params, const std::string& prefix, int input_size,
                    int hidden_size);

template <typename T>
FeedForwardParams add_feedforward(ParameterSet<T>& params, const std::string& prefix,
                                  int input_size, int hidden_size);

// Weights uniform in [-scale, scale], biases zero except the forget gate (1.0).
template <typename T>
void initialize_lstm(ParameterSet<T>& params, const LstmParams& lstm, double scale,
                     std::mt19937_64& rng);

template <typename T>
void initialize_uniform(Tensor<T>& tensor, double scale, std::mt19937_64& rng);

template <typename T>
LstmState<T> zero_state(Graph<T>& g, const LstmParams& lstm);

// c' = f*c + i*g, h' = o*tanh(c'), gates through sigmoid, candidate through tanh.
template <typename T>
LstmState<T> lstm_step(Graph<T>& g, const LstmParams& lstm, Node<T> x, const LstmState<T>& state);

// Position t holds forward-state-after-x1..xt ‖ backward-state-after-xN..xt.
template <typename T>
std::vector<Node<T>> bilstm_encode(Graph<T>& g, const LstmParams& fwd, const LstmParams& bwd,
                                   std::span<const Node<T>> xs);

// Forward LSTM's last state ‖ backward LSTM's last state; size 2H.
template <typename T>
Node<T> final_state(Graph<T>& g, const LstmParams& fwd, const LstmParams& bwd,
                    std::span<const Node<T>> xs);

// w2 * tanh(w1 * x + b1) + b2, a single score.
template <typename T>
Node<T> feedforward2(Node<T> w1, Node<T> b1, Node<T> w2, Node<T> b2, Node<T> x);

template <typename T>
Node<T> feedforward2(Graph<T>& g, const FeedForwardParams& ff, Node<T> x) {
  return feedforward2(g.parameter(ff.w1), g.parameter(ff.b1), g.parameter(ff.w2),
                      g.parameter(ff.b2), x);
}

}  // namespace insmt::nn
