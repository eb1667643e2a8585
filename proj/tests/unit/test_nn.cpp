#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "adam_oracle.hpp"
#include "insmt/adam.hpp"
#include "insmt/errors.hpp"
#include "insmt/grad_check.hpp"
#include "insmt/nn.hpp"

using namespace insmt;
using T = Tensor<double>;

namespace {

double sig(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Plain-loop LSTM step over the stacked i, f, g, o layout.
std::pair<std::vector<double>, std::vector<double>> reference_step(const ParameterSet<double>& p,
                                                                   const nn::LstmParams& l,
                                                                   const std::vector<double>& x,
                                                                   const std::vector<double>& h,
                                                                   const std::vector<double>& c) {
  const int H = l.hidden_size, I = l.input_size;
  const T& wx = p[l.input_weights].value;
  const T& wh = p[l.recurrent_weights].value;
  const T& b = p[l.bias].value;
  std::vector<double> pre(4 * H);
  for (int r = 0; r < 4 * H; ++r) {
    double s = b[r];
    for (int k = 0; k < I; ++k) s += wx.at(r, k) * x[k];
    for (int k = 0; k < H; ++k) s += wh.at(r, k) * h[k];
    pre[r] = s;
  }
  std::vector<double> h2(H), c2(H);
  for (int k = 0; k < H; ++k) {
    const double i = sig(pre[k]), f = sig(pre[H + k]), g = std::tanh(pre[2 * H + k]), o = sig(pre[3 * H + k]);
    c2[k] = f * c[k] + i * g;
    h2[k] = o * std::tanh(c2[k]);
  }
  return {h2, c2};
}

std::vector<double> to_vector(const T& t) { return {t.values().begin(), t.values().end()}; }

struct BiLstmFixture {
  ParameterSet<double> params;
  nn::LstmParams fwd, bwd;
  std::vector<T> inputs;

  BiLstmFixture(int in, int hidden, int steps, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    fwd = nn::add_lstm(params, "fwd", in, hidden);
    bwd = nn::add_lstm(params, "bwd", in, hidden);
    nn::initialize_lstm(params, fwd, 0.5, rng);
    nn::initialize_lstm(params, bwd, 0.5, rng);
    for (int t = 0; t < steps; ++t) {
      T x(Shape{in});
      nn::initialize_uniform(x, 1.0, rng);
      inputs.push_back(x);
    }
  }

  std::vector<std::vector<double>> manual_unroll() const {
    const int H = fwd.hidden_size;
    const std::size_t n = inputs.size();
    std::vector<std::vector<double>> fw(n), bw(n);
    std::vector<double> h(H, 0.0), c(H, 0.0);
    for (std::size_t t = 0; t < n; ++t) {
      std::tie(h, c) = reference_step(params, fwd, to_vector(inputs[t]), h, c);
      fw[t] = h;
    }
    h.assign(H, 0.0);
    c.assign(H, 0.0);
    for (std::size_t t = n; t-- > 0;) {
      std::tie(h, c) = reference_step(params, bwd, to_vector(inputs[t]), h, c);
      bw[t] = h;
    }
    std::vector<std::vector<double>> out(n);
    for (std::size_t t = 0; t < n; ++t) {
      out[t] = fw[t];
      out[t].insert(out[t].end(), bw[t].begin(), bw[t].end());
    }
    return out;
  }

  std::vector<Node<double>> nodes(Graph<double>& g) const {
    std::vector<Node<double>> xs;
    for (const auto& x : inputs) xs.push_back(g.input(x));
    return xs;
  }
};

}  // namespace

TEST(Lstm, ZeroParamsGiveZeroState) {
  ParameterSet<double> params;
  const auto l = nn::add_lstm(params, "l", 3, 2);
  Graph<double> g(&params);
  auto s = nn::lstm_step(g, l, g.input(T::vector({1, -2, 3})), nn::zero_state(g, l));
  for (double v : s.h.value().values()) EXPECT_EQ(v, 0.0);
  for (double v : s.c.value().values()) EXPECT_EQ(v, 0.0);
}

TEST(Lstm, ShapesFollowSizes) {
  ParameterSet<double> params;
  const auto l = nn::add_lstm(params, "l", 3, 2);
  EXPECT_EQ(params[l.input_weights].value.shape(), (Shape{8, 3}));
  EXPECT_EQ(params[l.recurrent_weights].value.shape(), (Shape{8, 2}));
  EXPECT_EQ(params[l.bias].value.shape(), (Shape{8}));
  Graph<double> g(&params);
  EXPECT_THROW(nn::lstm_step(g, l, g.input(T::vector({1, 2})), nn::zero_state(g, l)), DimensionError);
}

TEST(Lstm, ForgetBiasInitializedToOne) {
  ParameterSet<double> params;
  const auto l = nn::add_lstm(params, "l", 2, 3);
  std::mt19937_64 rng(1);
  nn::initialize_lstm(params, l, 0.1, rng);
  const T& b = params[l.bias].value;
  for (int k = 0; k < 12; ++k) EXPECT_EQ(b[k], (k >= 3 && k < 6) ? 1.0 : 0.0);
  for (double w : params[l.input_weights].value.values()) EXPECT_LE(std::abs(w), 0.1);
}

TEST(Lstm, HiddenSizeOneMatchesHandRecurrence) {
  ParameterSet<double> params;
  const auto l = nn::add_lstm(params, "l", 1, 1);
  params[l.input_weights].value = T::matrix(4, 1, {0.5, -0.3, 0.8, 0.1});
  params[l.recurrent_weights].value = T::matrix(4, 1, {0.2, 0.4, -0.6, 0.7});
  params[l.bias].value = T::vector({0.1, 1.0, -0.2, 0.0});
  const double x = 0.9, h = -0.4, c = 0.3;
  const double i = sig(0.5 * x + 0.2 * h + 0.1), f = sig(-0.3 * x + 0.4 * h + 1.0);
  const double gg = std::tanh(0.8 * x - 0.6 * h - 0.2), o = sig(0.1 * x + 0.7 * h);
  const double c2 = f * c + i * gg, h2 = o * std::tanh(c2);
  Graph<double> g(&params);
  auto s = nn::lstm_step(g, l, g.input(T::vector({x})), {g.input(T::vector({h})), g.input(T::vector({c}))});
  EXPECT_NEAR(s.h.value()[0], h2, 1e-12);
  EXPECT_NEAR(s.c.value()[0], c2, 1e-12);
}

TEST(Lstm, SumOfHiddenPassesGradCheck) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    BiLstmFixture fx(3, 2, 1, seed);
    const auto report = grad_check_parameters(
        [&](Graph<double>& g) {
          auto s = nn::lstm_step(g, fx.fwd, g.input(fx.inputs[0]), nn::zero_state(g, fx.fwd));
          auto s2 = nn::lstm_step(g, fx.fwd, g.input(fx.inputs[0]), s);
          return sum(s2.h);
        },
        fx.params);
    EXPECT_LT(report.max_relative_error, 1e-4) << report.worst_parameter;
  }
}

TEST(BiLstm, LengthOneIsBothStepsOnSameInput) {
  BiLstmFixture fx(2, 3, 1, 7);
  Graph<double> g(&fx.params);
  auto xs = fx.nodes(g);
  auto states = nn::bilstm_encode<double>(g, fx.fwd, fx.bwd, xs);
  ASSERT_EQ(states.size(), 1u);
  auto f = nn::lstm_step(g, fx.fwd, xs[0], nn::zero_state(g, fx.fwd));
  auto b = nn::lstm_step(g, fx.bwd, xs[0], nn::zero_state(g, fx.bwd));
  EXPECT_EQ(states[0].value(), concat({f.h, b.h}).value());
}

TEST(BiLstm, MatchesManualUnroll) {
  BiLstmFixture fx(3, 2, 3, 8);
  Graph<double> g(&fx.params);
  auto xs = fx.nodes(g);
  auto states = nn::bilstm_encode<double>(g, fx.fwd, fx.bwd, xs);
  const auto expected = fx.manual_unroll();
  ASSERT_EQ(states.size(), expected.size());
  for (std::size_t t = 0; t < states.size(); ++t) {
    for (std::size_t k = 0; k < expected[t].size(); ++k) EXPECT_NEAR(states[t].value()[k], expected[t][k], 1e-12);
  }
}

TEST(BiLstm, SwappingDirectionsReversesOutput) {
  BiLstmFixture fx(2, 2, 4, 9);
  Graph<double> g(&fx.params);
  auto xs = fx.nodes(g);
  auto forward = nn::bilstm_encode<double>(g, fx.fwd, fx.bwd, xs);
  std::vector<Node<double>> reversed(xs.rbegin(), xs.rend());
  auto swapped = nn::bilstm_encode<double>(g, fx.bwd, fx.fwd, reversed);
  const int H = 2;
  for (std::size_t t = 0; t < xs.size(); ++t) {
    const T a = forward[t].value();
    const T b = swapped[xs.size() - 1 - t].value();
    for (int k = 0; k < H; ++k) {
      EXPECT_DOUBLE_EQ(a[k], b[H + k]);
      EXPECT_DOUBLE_EQ(a[H + k], b[k]);
    }
  }
}

TEST(BiLstm, EmptySequenceIsContractViolation) {
  BiLstmFixture fx(2, 2, 1, 1);
  Graph<double> g(&fx.params);
  std::vector<Node<double>> none;
  EXPECT_THROW(nn::bilstm_encode<double>(g, fx.fwd, fx.bwd, none), ContractViolation);
}

TEST(FinalState, LengthOneEqualsEncoderOutput) {
  BiLstmFixture fx(2, 3, 1, 10);
  Graph<double> g(&fx.params);
  auto xs = fx.nodes(g);
  EXPECT_EQ(nn::final_state<double>(g, fx.fwd, fx.bwd, xs).value(),
            nn::bilstm_encode<double>(g, fx.fwd, fx.bwd, xs)[0].value());
}

TEST(FinalState, MatchesManualUnrollOnLengthFour) {
  BiLstmFixture fx(3, 2, 4, 11);
  Graph<double> g(&fx.params);
  auto xs = fx.nodes(g);
  const T out = nn::final_state<double>(g, fx.fwd, fx.bwd, xs).value();
  const auto unrolled = fx.manual_unroll();
  ASSERT_EQ(out.size(), 4u);
  EXPECT_NEAR(out[0], unrolled[3][0], 1e-12);
  EXPECT_NEAR(out[1], unrolled[3][1], 1e-12);
  EXPECT_NEAR(out[2], unrolled[0][2], 1e-12);
  EXPECT_NEAR(out[3], unrolled[0][3], 1e-12);
}

TEST(FinalState, DimensionIsTwiceHidden) {
  for (int steps = 1; steps <= 5; ++steps) {
    BiLstmFixture fx(2, 3, steps, 12);
    Graph<double> g(&fx.params);
    auto xs = fx.nodes(g);
    EXPECT_EQ(nn::final_state<double>(g, fx.fwd, fx.bwd, xs).shape(), (Shape{6}));
    EXPECT_EQ(nn::bilstm_encode<double>(g, fx.fwd, fx.bwd, xs).size(), static_cast<std::size_t>(steps));
  }
}

TEST(FeedForward, ZeroWeightsGiveZero) {
  ParameterSet<double> params;
  const auto ff = nn::add_feedforward(params, "ff", 3, 4);
  Graph<double> g(&params);
  EXPECT_EQ(nn::feedforward2(g, ff, g.input(T::vector({1, 2, 3}))).value()[0], 0.0);
}

TEST(FeedForward, UnitChain) {
  ParameterSet<double> params;
  const auto ff = nn::add_feedforward(params, "ff", 1, 1);
  params[ff.w1].value = T::matrix(1, 1, {1.0});
  params[ff.w2].value = T::matrix(1, 1, {1.0});
  Graph<double> g(&params);
  EXPECT_NEAR(nn::feedforward2(g, ff, g.input(T::vector({0.5}))).value()[0], 0.46212, 1e-5);
}

TEST(FeedForward, GradCheckOnRandomShapes) {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 5; ++trial) {
    const int in = std::uniform_int_distribution<int>(1, 5)(rng);
    const int hidden = std::uniform_int_distribution<int>(1, 5)(rng);
    ParameterSet<double> params;
    const auto ff = nn::add_feedforward(params, "ff", in, hidden);
    for (int id : {ff.w1, ff.b1, ff.w2, ff.b2}) nn::initialize_uniform(params[id].value, 1.0, rng);
    T x(Shape{in});
    nn::initialize_uniform(x, 1.0, rng);
    const auto report =
        grad_check_parameters([&](Graph<double>& g) { return nn::feedforward2(g, ff, g.input(x)); }, params);
    EXPECT_LT(report.max_relative_error, 1e-4);
  }
}

TEST(Initialization, ReproducibleFromSeed) {
  auto build = [](std::uint64_t seed) {
    ParameterSet<double> params;
    const auto l = nn::add_lstm(params, "l", 3, 4);
    std::mt19937_64 rng(seed);
    nn::initialize_lstm(params, l, 0.1, rng);
    return params;
  };
  EXPECT_EQ(build(5), build(5));
  EXPECT_FALSE(build(5) == build(6));
}

TEST(Adam, ZeroGradientIsIdentity) {
  ParameterSet<double> params;
  params.add("w", T::vector({1.0, -2.0}));
  auto state = make_adam_state(params);
  for (int k = 0; k < 3; ++k) adam_step(state, params, zero_gradients(params));
  EXPECT_EQ(params[0].value, T::vector({1.0, -2.0}));
  EXPECT_EQ(state.first_moment[0], T::vector({0.0, 0.0}));
  EXPECT_EQ(state.second_moment[0], T::vector({0.0, 0.0}));
  EXPECT_EQ(state.step_count, 3);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  ParameterSet<double> params;
  params.add("w", T::scalar(0.5));
  auto state = make_adam_state(params);
  adam_step(state, params, {T::scalar(1.0)});
  EXPECT_NEAR(params[0].value[0], 0.5 - 1e-3, 1e-10);
}

TEST(Adam, MatchesScriptedReference) {
  ParameterSet<double> params;
  params.add("w", T::vector({0.3, -0.7, 1.1}));
  auto state = make_adam_state(params);
  oracle::ScalarAdam reference;
  std::vector<double> theta = {0.3, -0.7, 1.1};
  for (int k = 0; k < 2; ++k) {
    adam_step(state, params, {T::vector({1.0, 1.0, 1.0})});
    reference.step(theta, {1.0, 1.0, 1.0});
  }
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int k = 0; k < 20; ++k) {
    std::vector<double> grad = {u(rng), u(rng), u(rng)};
    adam_step(state, params, {T::vector(grad)});
    reference.step(theta, grad);
  }
  for (int k = 0; k < 3; ++k) EXPECT_NEAR(params[0].value[k], theta[k], 1e-12);
}

TEST(Adam, ShapeMismatchIsDimensionError) {
  ParameterSet<double> params;
  params.add("w", T::vector({1.0, 2.0}));
  auto state = make_adam_state(params);
  EXPECT_THROW(adam_step(state, params, {T::vector({1.0})}), DimensionError);
  EXPECT_THROW(adam_step(state, params, {}), ContractViolation);
}

TEST(Clip, NeverIncreasesNorm) {
  std::mt19937_64 rng(4);
  for (double max_norm : {0.1, 1.0, 5.0, 100.0}) {
    Gradients<double> grads = {T(Shape{3, 2}), T(Shape{4})};
    for (auto& g : grads) nn::initialize_uniform(g, 3.0, rng);
    const double before = global_norm(grads);
    const auto original = grads;
    EXPECT_DOUBLE_EQ(clip_global_norm(grads, max_norm), before);
    const double after = global_norm(grads);
    EXPECT_LE(after, before);
    EXPECT_LE(after, max_norm * (1 + 1e-12));
    if (before <= max_norm) EXPECT_EQ(grads, original);
  }
}
