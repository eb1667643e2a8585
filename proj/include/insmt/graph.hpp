#pragma once

// Tape-based reverse-mode automatic differentiation.
//
// A Graph records every node in creation order, so the tape is already a
// topological order and backward() walks it in reverse. Parameters live in a
// ParameterSet outside any graph; a graph borrows their values through
// parameter leaves and hands gradients back through
// accumulate_parameter_grads(), which lets several graphs (one per worker)
// share a single immutable parameter set.

#include <cstddef>
#include <deque>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "insmt/tensor.hpp"

namespace insmt {

enum class OpKind {
  kInput,
  kParameter,
  kMatMul,           // [m,k]x[k,n] -> [m,n];  [m,k]x[k] -> [m]
  kAdd,              // equal shapes, or [r,n] + [n] (bias over rows)
  kMul,              // elementwise, equal shapes
  kConcat,           // along the last axis; leading dims must agree
  kSigmoid,
  kTanh,
  kSoftmax,          // over the last axis
  kEmbeddingLookup,  // table [V,d], attrs.index -> [d]
  kCrossEntropy,     // logits [V], attrs.index -> [1] = logsumexp - x[t]
  kSlice,            // [attrs.begin, attrs.end) along the last axis
  kSum,              // all elements -> [1]
  kScale,            // attrs.factor * x
};

std::string_view op_name(OpKind kind);

struct OpAttrs {
  int index = 0;
  int begin = 0;
  int end = 0;
  double factor = 1.0;
};

template <typename T>
class Graph;

// Handle to a node inside a Graph. Valid only while the graph is alive.
template <typename T>
class Node {
 public:
  Node() = default;

  bool valid() const noexcept { return graph_ != nullptr; }
  Graph<T>& graph() const { return *graph_; }
  int id() const noexcept { return id_; }
  const Tensor<T>& value() const { return graph_->value(id_); }
  const Tensor<T>& grad() const { return graph_->grad(id_); }
  const Shape& shape() const { return value().shape(); }

 private:
  friend class Graph<T>;
  Node(Graph<T>* graph, int id) : graph_(graph), id_(id) {}

  Graph<T>* graph_ = nullptr;
  int id_ = -1;
};

template <typename T>
struct Parameter {
  std::string name;
  Tensor<T> value;
};

// Named, ordered collection of trainable tensors.
template <typename T>
class ParameterSet {
 public:
  int add(std::string name, Tensor<T> value);

  std::size_t size() const noexcept { return params_.size(); }
  Parameter<T>& operator[](int index) { return params_.at(static_cast<std::size_t>(index)); }
  const Parameter<T>& operator[](int index) const {
    return params_.at(static_cast<std::size_t>(index));
  }
  // Throws ContractViolation when absent.
  int index_of(std::string_view name) const;
  bool contains(std::string_view name) const;
  std::size_t total_values() const;

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  template <typename U>
  ParameterSet<U> cast() const {
    ParameterSet<U> out;
    for (const auto& p : params_) out.add(p.name, p.value.template cast<U>());
    return out;
  }

  bool operator==(const ParameterSet& other) const;

 private:
  std::vector<Parameter<T>> params_;
};

// Gradient buffers aligned index-for-index with a ParameterSet.
template <typename T>
using Gradients = std::vector<Tensor<T>>;

template <typename T>
Gradients<T> zero_gradients(const ParameterSet<T>& params);

template <typename T>
void add_gradients(Gradients<T>& into, const Gradients<T>& from);

template <typename T>
class Graph {
 public:
  using value_type = T;

  explicit Graph(const ParameterSet<T>* params = nullptr);
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Node<T> input(Tensor<T> value);
  // Memoized: one leaf per parameter per graph.
  Node<T> parameter(int index);
  Node<T> apply(OpKind kind, std::span<const Node<T>> inputs, const OpAttrs& attrs = {});

  // Leaves accumulate across calls; intermediate gradients are recomputed.
  void backward(Node<T> loss);
  void zero_grad();
  void accumulate_parameter_grads(Gradients<T>& into) const;

  const Tensor<T>& value(int id) const;
  const Tensor<T>& grad(int id) const;
  std::size_t size() const noexcept { return records_.size(); }
  const ParameterSet<T>* parameters() const noexcept { return params_; }

 private:
  struct Record {
    OpKind kind = OpKind::kInput;
    std::vector<int> parents;
    OpAttrs attrs;
    Tensor<T> value;
    const Tensor<T>* borrowed = nullptr;
    mutable Tensor<T> grad;
    int parameter = -1;

    const Tensor<T>& val() const { return borrowed ? *borrowed : value; }
    bool leaf() const { return kind == OpKind::kInput || kind == OpKind::kParameter; }
  };

  Tensor<T> forward(OpKind kind, const std::vector<int>& parents, const OpAttrs& attrs) const;
  void propagate(const Record& rec);
  Tensor<T>& grad_buffer(int id);

  const ParameterSet<T>* params_;
  std::vector<int> parameter_nodes_;
  std::deque<Record> records_;
};

template <typename T>
Node<T> matmul(Node<T> a, Node<T> b);
template <typename T>
Node<T> add(Node<T> a, Node<T> b);
template <typename T>
Node<T> mul(Node<T> a, Node<T> b);
template <typename T>
Node<T> concat(std::span<const Node<T>> parts);
template <typename T>
Node<T> sigmoid(Node<T> x);
template <typename T>
Node<T> tanh(Node<T> x);
template <typename T>
Node<T> softmax(Node<T> x);
template <typename T>
Node<T> embedding_lookup(Node<T> table, int row);
template <typename T>
Node<T> cross_entropy(Node<T> logits, int target);
template <typename T>
Node<T> slice(Node<T> x, int begin, int end);
template <typename T>
Node<T> sum(Node<T> x);
template <typename T>
Node<T> scale(Node<T> x, double factor);

template <typename T>
Node<T> concat(std::initializer_list<Node<T>> parts) {
  return concat(std::span<const Node<T>>(parts.begin(), parts.size()));
}

// Sum of scalar nodes; a single concat+sum pair keeps the tape short.
template <typename T>
Node<T> sum_scalars(std::span<const Node<T>> terms) {
  if (terms.size() == 1) return terms[0];
  return sum(concat(terms));
}

}  // namespace insmt
