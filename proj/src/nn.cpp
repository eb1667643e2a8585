#include "insmt/nn.hpp"

namespace insmt::nn {

template <typename T>
LstmParams add_lstm(ParameterSet<T>& params, const std::string& prefix, int input_size,
                    int hidden_size) {
  LstmParams lstm;
  lstm.input_size = input_size;
  lstm.hidden_size = hidden_size;
  lstm.input_weights = params.add(prefix + ".input_weights", Tensor<T>({4 * hidden_size, input_size}));
  lstm.recurrent_weights =
      params.add(prefix + ".recurrent_weights", Tensor<T>({4 * hidden_size, hidden_size}));
  lstm.bias = params.add(prefix + ".bias", Tensor<T>({4 * hidden_size}));
  return lstm;
}

template <typename T>
FeedForwardParams add_feedforward(ParameterSet<T>& params, const std::string& prefix,
                                  int input_size, int hidden_size) {
  FeedForwardParams ff;
  ff.w1 = params.add(prefix + ".w1", Tensor<T>({hidden_size, input_size}));
  ff.b1 = params.add(prefix + ".b1", Tensor<T>({hidden_size}));
  ff.w2 = params.add(prefix + ".w2", Tensor<T>({1, hidden_size}));
  ff.b2 = params.add(prefix + ".b2", Tensor<T>({1}));
  return ff;
}

template <typename T>
void initialize_uniform(Tensor<T>& tensor, double scale, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-scale, scale);
  for (T& v : tensor.values()) v = static_cast<T>(dist(rng));
}

template <typename T>
void initialize_lstm(ParameterSet<T>& params, const LstmParams& lstm, double scale,
                     std::mt19937_64& rng) {
  initialize_uniform(params[lstm.input_weights].value, scale, rng);
  initialize_uniform(params[lstm.recurrent_weights].value, scale, rng);
  Tensor<T>& bias = params[lstm.bias].value;
  bias.fill(T(0));
  for (int i = lstm.hidden_size; i < 2 * lstm.hidden_size; ++i) bias[static_cast<std::size_t>(i)] = T(1);
}

template <typename T>
LstmState<T> zero_state(Graph<T>& g, const LstmParams& lstm) {
  Node<T> zeros = g.input(Tensor<T>({lstm.hidden_size}));
  return {zeros, zeros};
}

template <typename T>
LstmState<T> lstm_step(Graph<T>& g, const LstmParams& lstm, Node<T> x, const LstmState<T>& state) {
  if (x.shape() != Shape{lstm.input_size}) {
    throw DimensionError("lstm_step: input " + shape_string(x.shape()) + " for input size " +
                         std::to_string(lstm.input_size));
  }
  if (state.h.shape() != Shape{lstm.hidden_size} || state.c.shape() != Shape{lstm.hidden_size}) {
    throw DimensionError("lstm_step: state shape does not match hidden size " +
                         std::to_string(lstm.hidden_size));
  }
  const int H = lstm.hidden_size;
  Node<T> z = add(add(matmul(g.parameter(lstm.input_weights), x),
                      matmul(g.parameter(lstm.recurrent_weights), state.h)),
                  g.parameter(lstm.bias));
  Node<T> in_gate = sigmoid(slice(z, 0, H));
  Node<T> forget_gate = sigmoid(slice(z, H, 2 * H));
  Node<T> candidate = tanh(slice(z, 2 * H, 3 * H));
  Node<T> out_gate = sigmoid(slice(z, 3 * H, 4 * H));
  Node<T> c = add(mul(forget_gate, state.c), mul(in_gate, candidate));
  Node<T> h = mul(out_gate, tanh(c));
  return {h, c};
}

template <typename T>
std::vector<Node<T>> bilstm_encode(Graph<T>& g, const LstmParams& fwd, const LstmParams& bwd,
                                   std::span<const Node<T>> xs) {
  if (xs.empty()) throw ContractViolation("bilstm_encode: empty input sequence");
  const std::size_t n = xs.size();
  std::vector<Node<T>> forward(n), backward(n);
  LstmState<T> state = zero_state(g, fwd);
  for (std::size_t t = 0; t < n; ++t) {
    state = lstm_step(g, fwd, xs[t], state);
    forward[t] = state.h;
  }
  state = zero_state(g, bwd);
  for (std::size_t t = n; t-- > 0;) {
    state = lstm_step(g, bwd, xs[t], state);
    backward[t] = state.h;
  }
  std::vector<Node<T>> out;
  out.reserve(n);
  for (std::size_t t = 0; t < n; ++t) out.push_back(concat({forward[t], backward[t]}));
  return out;
}

template <typename T>
Node<T> final_state(Graph<T>& g, const LstmParams& fwd, const LstmParams& bwd,
                    std::span<const Node<T>> xs) {
  if (xs.empty()) throw ContractViolation("final_state: empty input sequence");
  LstmState<T> f = zero_state(g, fwd);
  for (const Node<T>& x : xs) f = lstm_step(g, fwd, x, f);
  LstmState<T> b = zero_state(g, bwd);
  for (std::size_t t = xs.size(); t-- > 0;) b = lstm_step(g, bwd, xs[t], b);
  return concat({f.h, b.h});
}

template <typename T>
Node<T> feedforward2(Node<T> w1, Node<T> b1, Node<T> w2, Node<T> b2, Node<T> x) {
  if (w2.shape().size() != 2 || w2.shape()[0] != 1 || b2.shape() != Shape{1}) {
    throw DimensionError("feedforward2: output layer must be [1,H] with bias [1], got " +
                         shape_string(w2.shape()) + " and " + shape_string(b2.shape()));
  }
  Node<T> hidden = tanh(add(matmul(w1, x), b1));
  return add(matmul(w2, hidden), b2);
}

#define INSMT_INSTANTIATE_NN(T)                                                                  \
  template LstmParams add_lstm(ParameterSet<T>&, const std::string&, int, int);                  \
  template FeedForwardParams add_feedforward(ParameterSet<T>&, const std::string&, int, int);    \
  template void initialize_uniform(Tensor<T>&, double, std::mt19937_64&);                        \
  template void initialize_lstm(ParameterSet<T>&, const LstmParams&, double, std::mt19937_64&);  \
  template LstmState<T> zero_state(Graph<T>&, const LstmParams&);                                \
  template LstmState<T> lstm_step(Graph<T>&, const LstmParams&, Node<T>, const LstmState<T>&);   \
  template std::vector<Node<T>> bilstm_encode(Graph<T>&, const LstmParams&, const LstmParams&,   \
                                              std::span<const Node<T>>);                         \
  template Node<T> final_state(Graph<T>&, const LstmParams&, const LstmParams&,                  \
                               std::span<const Node<T>>);                                        \
  template Node<T> feedforward2(Node<T>, Node<T>, Node<T>, Node<T>, Node<T>);

INSMT_INSTANTIATE_NN(float)
INSMT_INSTANTIATE_NN(double)
INSMT_INSTANTIATE_NN(long double)

#undef INSMT_INSTANTIATE_NN

}  // namespace insmt::nn
