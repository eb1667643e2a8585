#include "insmt/verification.hpp"

#include <chrono>
#include <functional>
#include <random>
#include <set>

#include "insmt/align.hpp"
#include "insmt/grad_check.hpp"
#include "insmt/model.hpp"
#include "insmt/nn.hpp"

namespace insmt {

namespace {

using G = Graph<double>;
using N = Node<double>;

template <typename Graph>
using scalar_of = typename std::remove_reference_t<Graph>::value_type;

Tensor<double> random_tensor(const Shape& shape, std::mt19937_64& rng, double scale = 1.0) {
  Tensor<double> t(shape);
  nn::initialize_uniform(t, scale, rng);
  return t;
}

// Contracts a tensor-valued node to a scalar with fixed random weights.
template <typename T>
Node<T> weighted_sum(Graph<T>& g, Node<T> x, const Tensor<double>& weights) {
  return sum(mul(x, g.input(weights.template cast<T>())));
}

struct Context {
  std::mt19937_64& rng;
  int configuration;
  double epsilon;
  VerificationReport& report;

  int uniform(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

  void record(const std::string& name, const GradCheckReport& r) {
    report.cases.push_back({name, configuration, r.max_relative_error, r.coordinates});
    if (r.max_relative_error >= report.max_relative_error) {
      report.max_relative_error = r.max_relative_error;
      report.worst_case = name + " (configuration " + std::to_string(configuration) + ")";
    }
  }

  // `loss` is generic over the graph's scalar type; analytic gradients come
  // from the 64-bit instance.
  template <typename Loss>
  void check(const std::string& name, ParameterSet<double>& params, const Loss& loss) {
    ParameterSet<long double> extended = params.cast<long double>();
    record(name, grad_check_parameters(ParameterLoss(loss), params, ExtendedParameterLoss(loss), extended,
                                       epsilon));
  }

  // Inputs become parameters so every coordinate is checked.
  template <typename Build>
  void check_op(const std::string& name, std::vector<Tensor<double>> inputs, const Build& build,
                const Shape& out_shape) {
    ParameterSet<double> params;
    for (std::size_t k = 0; k < inputs.size(); ++k) params.add("x" + std::to_string(k), std::move(inputs[k]));
    const Tensor<double> weights = random_tensor(out_shape, rng);
    const bool scalar_out = out_shape == Shape{1};
    const int count = static_cast<int>(params.size());
    auto loss = [&](auto& g) {
      using T = scalar_of<decltype(g)>;
      std::vector<Node<T>> xs;
      for (int k = 0; k < count; ++k) xs.push_back(g.parameter(k));
      Node<T> out = build(xs);
      return scalar_out ? out : weighted_sum(g, out, weights);
    };
    check(name, params, loss);
  }

  void check_ops() {
    const int r = uniform(1, 4), k = uniform(1, 4), c = uniform(1, 4), w = uniform(2, 5);
    check_op("matmul", {random_tensor({r, k}, rng), random_tensor({k, c}, rng)},
             [](auto& x) { return matmul(x[0], x[1]); }, {r, c});
    check_op("matmul_vector", {random_tensor({r, k}, rng), random_tensor({k}, rng)},
             [](auto& x) { return matmul(x[0], x[1]); }, {r});
    check_op("add", {random_tensor({r, c}, rng), random_tensor({r, c}, rng)},
             [](auto& x) { return add(x[0], x[1]); }, {r, c});
    check_op("add_broadcast", {random_tensor({r, c}, rng), random_tensor({c}, rng)},
             [](auto& x) { return add(x[0], x[1]); }, {r, c});
    check_op("mul", {random_tensor({r, c}, rng), random_tensor({r, c}, rng)},
             [](auto& x) { return mul(x[0], x[1]); }, {r, c});
    check_op("concat", {random_tensor({r, k}, rng), random_tensor({r, c}, rng), random_tensor({r, 1}, rng)},
             [](auto& x) { return concat({x[0], x[1], x[2]}); }, {r, k + c + 1});
    check_op("sigmoid", {random_tensor({r, c}, rng, 3.0)}, [](auto& x) { return sigmoid(x[0]); }, {r, c});
    check_op("tanh", {random_tensor({r, c}, rng, 2.0)}, [](auto& x) { return tanh(x[0]); }, {r, c});
    check_op("softmax", {random_tensor({w}, rng, 2.0)}, [](auto& x) { return softmax(x[0]); }, {w});
    check_op("softmax_rows", {random_tensor({r, w}, rng, 2.0)}, [](auto& x) { return softmax(x[0]); },
             {r, w});
    const int row = uniform(0, r - 1);
    check_op("embedding_lookup", {random_tensor({r, c}, rng)},
             [row](auto& x) { return embedding_lookup(x[0], row); }, {c});
    const int target = uniform(0, w - 1);
    check_op("cross_entropy", {random_tensor({w}, rng, 2.0)},
             [target](auto& x) { return cross_entropy(x[0], target); }, {1});
    const int begin = uniform(0, w - 2), end = uniform(begin + 1, w);
    check_op("slice", {random_tensor({r, w}, rng)}, [begin, end](auto& x) { return slice(x[0], begin, end); },
             {r, end - begin});
    check_op("sum", {random_tensor({r, c}, rng)}, [](auto& x) { return sum(x[0]); }, {1});
    const double factor = std::uniform_real_distribution<double>(-2.0, 2.0)(rng);
    check_op("scale", {random_tensor({r, c}, rng)}, [factor](auto& x) { return scale(x[0], factor); }, {r, c});
  }

  void check_layers() {
    const int in = uniform(1, 4), hidden = uniform(1, 3), steps = uniform(1, 4);
    {
      ParameterSet<double> params;
      const auto lstm = nn::add_lstm(params, "lstm", in, hidden);
      nn::initialize_lstm(params, lstm, 0.5, rng);
      const int x = params.add("x", random_tensor({in}, rng));
      const int h = params.add("h", random_tensor({hidden}, rng, 0.9));
      const int c = params.add("c", random_tensor({hidden}, rng));
      const Tensor<double> wh = random_tensor({hidden}, rng), wc = random_tensor({hidden}, rng);
      check("lstm_step", params, [&](auto& g) {
        const auto next = nn::lstm_step(g, lstm, g.parameter(x), {g.parameter(h), g.parameter(c)});
        return add(weighted_sum(g, next.h, wh), weighted_sum(g, next.c, wc));
      });
    }
    {
      ParameterSet<double> params;
      const auto fwd = nn::add_lstm(params, "fwd", in, hidden);
      const auto bwd = nn::add_lstm(params, "bwd", in, hidden);
      nn::initialize_lstm(params, fwd, 0.5, rng);
      nn::initialize_lstm(params, bwd, 0.5, rng);
      std::vector<int> xs;
      for (int t = 0; t < steps; ++t) xs.push_back(params.add("x" + std::to_string(t), random_tensor({in}, rng)));
      std::vector<Tensor<double>> weights;
      for (int t = 0; t < steps; ++t) weights.push_back(random_tensor({2 * hidden}, rng));
      const Tensor<double> final_weights = random_tensor({2 * hidden}, rng);
      auto inputs = [&](auto& g) {
        std::vector<Node<scalar_of<decltype(g)>>> nodes;
        for (int id : xs) nodes.push_back(g.parameter(id));
        return nodes;
      };
      check("bilstm_encode", params, [&](auto& g) {
        using T = scalar_of<decltype(g)>;
        const auto nodes = inputs(g);
        const auto states = nn::bilstm_encode<T>(g, fwd, bwd, nodes);
        std::vector<Node<T>> terms;
        for (int t = 0; t < steps; ++t) terms.push_back(weighted_sum(g, states[t], weights[t]));
        return sum_scalars<T>(terms);
      });
      check("final_state", params, [&](auto& g) {
        using T = scalar_of<decltype(g)>;
        const auto nodes = inputs(g);
        return weighted_sum(g, nn::final_state<T>(g, fwd, bwd, nodes), final_weights);
      });
    }
    {
      ParameterSet<double> params;
      const auto ff = nn::add_feedforward(params, "ff", in, hidden);
      for (int id : {ff.w1, ff.b1, ff.w2, ff.b2}) nn::initialize_uniform(params[id].value, 1.0, rng);
      const int x = params.add("x", random_tensor({in}, rng));
      check("feedforward2", params, [&](auto& g) { return nn::feedforward2(g, ff, g.parameter(x)); });
    }
  }

  void check_sentence_loss() {
    const std::string alphabet = "abc";
    auto random_word = [&](int min_len, int max_len) {
      std::string word;
      const int len = uniform(min_len, max_len);
      for (int k = 0; k < len; ++k) word.push_back(alphabet[static_cast<std::size_t>(uniform(0, 2))]);
      return word;
    };
    align::AlignedSentencePair pair;
    const int n = uniform(1, 3);
    for (int i = 0; i < n; ++i) {
      pair.source_tokens.push_back(random_word(1, 3));
      pair.chunks.push_back(i == 0 || uniform(0, 3) > 0 ? random_word(1, 3) : std::string());
    }
    std::vector<int> order;
    for (int i = 0; i < n; ++i) {
      if (!pair.chunks[i].empty()) order.push_back(static_cast<int>(order.size()) + 1);
    }
    std::shuffle(order.begin(), order.end(), rng);
    std::size_t next = 0;
    for (int i = 0; i < n; ++i) {
      pair.gold_target_index.push_back(pair.chunks[i].empty() ? std::nullopt
                                                              : std::optional<int>(order[next++]));
    }
    pair.gold_insertion = align::derive_gold_insertions(pair.gold_target_index);

    ModelConfig config;
    config.hidden_dim = uniform(1, 3);
    config.char_embed_dim = uniform(1, 3);
    config.max_chunk_chars = 8;
    config.init_scale = 0.5;
    // The target vocabulary leaves out one character so the unknown id is exercised.
    auto model = make_model<double>(config, CharVocab({U'a', U'b', U'c'}), CharVocab({U'a', U'b'}), rng());
    auto extended = model.cast<long double>();
    ParameterLoss loss = [&](G& g) { return sentence_loss(g, model, pair); };
    ExtendedParameterLoss extended_loss = [&](Graph<long double>& g) { return sentence_loss(g, extended, pair); };
    record("sentence_loss", grad_check_parameters(loss, model.params, extended_loss, extended.params, epsilon));
  }
};

}  // namespace

VerificationReport run_verification(int configurations, std::uint64_t seed, double epsilon) {
  const auto start = std::chrono::steady_clock::now();
  VerificationReport report;
  report.configurations = configurations;
  std::mt19937_64 rng(seed);
  for (int k = 1; k <= configurations; ++k) {
    Context ctx{rng, k, epsilon, report};
    ctx.check_ops();
    ctx.check_layers();
    ctx.check_sentence_loss();
  }
  report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

}  // namespace insmt
