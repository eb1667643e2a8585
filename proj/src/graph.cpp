#include "insmt/graph.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Core>

namespace insmt {

namespace {

template <typename T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

std::size_t outer_size(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t i = 0; i + 1 < shape.size(); ++i) n *= static_cast<std::size_t>(shape[i]);
  return n;
}

bool same_leading_dims(const Shape& a, const Shape& b) {
  return a.size() == b.size() && std::equal(a.begin(), a.end() - 1, b.begin());
}

[[noreturn]] void shape_error(OpKind kind, const std::string& detail) {
  throw DimensionError(std::string(op_name(kind)) + ": " + detail);
}

}  // namespace

std::string_view op_name(OpKind kind) {
  switch (kind) {
    case OpKind::kInput: return "input";
    case OpKind::kParameter: return "parameter";
    case OpKind::kMatMul: return "matmul";
    case OpKind::kAdd: return "add";
    case OpKind::kMul: return "mul";
    case OpKind::kConcat: return "concat";
    case OpKind::kSigmoid: return "sigmoid";
    case OpKind::kTanh: return "tanh";
    case OpKind::kSoftmax: return "softmax";
    case OpKind::kEmbeddingLookup: return "embedding_lookup";
    case OpKind::kCrossEntropy: return "cross_entropy";
    case OpKind::kSlice: return "slice";
    case OpKind::kSum: return "sum";
    case OpKind::kScale: return "scale";
  }
  return "unknown";
}

// ---------------------------------------------------------------------------
// ParameterSet

template <typename T>
int ParameterSet<T>::add(std::string name, Tensor<T> value) {
  if (contains(name)) throw ContractViolation("duplicate parameter name '" + name + "'");
  params_.push_back({std::move(name), std::move(value)});
  return static_cast<int>(params_.size()) - 1;
}

template <typename T>
int ParameterSet<T>::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (params_[i].name == name) return static_cast<int>(i);
  }
  throw ContractViolation("no parameter named '" + std::string(name) + "'");
}

template <typename T>
bool ParameterSet<T>::contains(std::string_view name) const {
  return std::any_of(params_.begin(), params_.end(),
                     [&](const Parameter<T>& p) { return p.name == name; });
}

template <typename T>
std::size_t ParameterSet<T>::total_values() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

template <typename T>
bool ParameterSet<T>::operator==(const ParameterSet& other) const {
  if (params_.size() != other.params_.size()) return false;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (params_[i].name != other.params_[i].name || !(params_[i].value == other.params_[i].value))
      return false;
  }
  return true;
}

template <typename T>
Gradients<T> zero_gradients(const ParameterSet<T>& params) {
  Gradients<T> grads;
  grads.reserve(params.size());
  for (const auto& p : params) grads.emplace_back(p.value.shape());
  return grads;
}

template <typename T>
void add_gradients(Gradients<T>& into, const Gradients<T>& from) {
  if (into.size() != from.size()) throw ContractViolation("gradient sets differ in length");
  for (std::size_t i = 0; i < into.size(); ++i) {
    if (into[i].shape() != from[i].shape()) throw DimensionError("gradient shape mismatch");
    T* dst = into[i].data();
    const T* src = from[i].data();
    for (std::size_t k = 0; k < into[i].size(); ++k) dst[k] += src[k];
  }
}

// ---------------------------------------------------------------------------
// Graph

template <typename T>
Graph<T>::Graph(const ParameterSet<T>* params) : params_(params) {
  if (params_) parameter_nodes_.assign(params_->size(), -1);
}

template <typename T>
Node<T> Graph<T>::input(Tensor<T> value) {
  Record rec;
  rec.kind = OpKind::kInput;
  rec.value = std::move(value);
  records_.push_back(std::move(rec));
  return Node<T>(this, static_cast<int>(records_.size()) - 1);
}

template <typename T>
Node<T> Graph<T>::parameter(int index) {
  if (!params_) throw ContractViolation("graph has no parameter set");
  if (index < 0 || static_cast<std::size_t>(index) >= params_->size()) {
    throw IndexError("parameter index " + std::to_string(index) + " out of range");
  }
  int& slot = parameter_nodes_[static_cast<std::size_t>(index)];
  if (slot < 0) {
    Record rec;
    rec.kind = OpKind::kParameter;
    rec.borrowed = &(*params_)[index].value;
    rec.parameter = index;
    records_.push_back(std::move(rec));
    slot = static_cast<int>(records_.size()) - 1;
  }
  return Node<T>(this, slot);
}

template <typename T>
const Tensor<T>& Graph<T>::value(int id) const {
  return records_.at(static_cast<std::size_t>(id)).val();
}

template <typename T>
const Tensor<T>& Graph<T>::grad(int id) const {
  const Record& rec = records_.at(static_cast<std::size_t>(id));
  if (rec.grad.empty()) rec.grad = Tensor<T>(rec.val().shape());
  return rec.grad;
}

template <typename T>
Tensor<T>& Graph<T>::grad_buffer(int id) {
  Record& rec = records_[static_cast<std::size_t>(id)];
  if (rec.grad.empty()) rec.grad = Tensor<T>(rec.val().shape());
  return rec.grad;
}

template <typename T>
Node<T> Graph<T>::apply(OpKind kind, std::span<const Node<T>> inputs, const OpAttrs& attrs) {
  if (kind == OpKind::kInput || kind == OpKind::kParameter) {
    throw ContractViolation("leaves are created with input() or parameter()");
  }
  std::vector<int> parents;
  parents.reserve(inputs.size());
  for (const Node<T>& n : inputs) {
    if (&n.graph() != this) throw ContractViolation("node belongs to a different graph");
    parents.push_back(n.id());
  }
  Record rec;
  rec.kind = kind;
  rec.attrs = attrs;
  rec.value = forward(kind, parents, attrs);
  rec.parents = std::move(parents);
  records_.push_back(std::move(rec));
  return Node<T>(this, static_cast<int>(records_.size()) - 1);
}

template <typename T>
Tensor<T> Graph<T>::forward(OpKind kind, const std::vector<int>& parents,
                            const OpAttrs& attrs) const {
  auto arg = [&](std::size_t i) -> const Tensor<T>& { return value(parents[i]); };
  auto expect_arity = [&](std::size_t n) {
    if (parents.size() != n) {
      shape_error(kind, "expected " + std::to_string(n) + " inputs, got " +
                            std::to_string(parents.size()));
    }
  };

  switch (kind) {
    case OpKind::kMatMul: {
      expect_arity(2);
      const Tensor<T>& a = arg(0);
      const Tensor<T>& b = arg(1);
      if (a.rank() != 2 || (b.rank() != 1 && b.rank() != 2) || a.dim(1) != b.dim(0)) {
        shape_error(kind, shape_string(a.shape()) + " x " + shape_string(b.shape()));
      }
      const int m = a.dim(0), k = a.dim(1), n = b.rank() == 2 ? b.dim(1) : 1;
      Tensor<T> out(b.rank() == 2 ? Shape{m, n} : Shape{m});
      Eigen::Map<const RowMatrix<T>> am(a.data(), m, k);
      Eigen::Map<const RowMatrix<T>> bm(b.data(), k, n);
      Eigen::Map<RowMatrix<T>> om(out.data(), m, n);
      om.noalias() = am * bm;
      return out;
    }
    case OpKind::kAdd: {
      expect_arity(2);
      const Tensor<T>& a = arg(0);
      const Tensor<T>& b = arg(1);
      Tensor<T> out = a;
      if (a.shape() == b.shape()) {
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += b[i];
      } else if (a.rank() == 2 && b.rank() == 1 && a.dim(1) == b.dim(0)) {
        const std::size_t cols = static_cast<std::size_t>(b.dim(0));
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += b[i % cols];
      } else {
        shape_error(kind, shape_string(a.shape()) + " + " + shape_string(b.shape()));
      }
      return out;
    }
    case OpKind::kMul: {
      expect_arity(2);
      const Tensor<T>& a = arg(0);
      const Tensor<T>& b = arg(1);
      if (a.shape() != b.shape()) {
        shape_error(kind, shape_string(a.shape()) + " * " + shape_string(b.shape()));
      }
      Tensor<T> out = a;
      for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b[i];
      return out;
    }
    case OpKind::kConcat: {
      if (parents.empty()) shape_error(kind, "no inputs");
      const Shape& first = arg(0).shape();
      int total = 0;
      for (std::size_t p = 0; p < parents.size(); ++p) {
        if (!same_leading_dims(first, arg(p).shape())) {
          shape_error(kind, shape_string(first) + " with " + shape_string(arg(p).shape()));
        }
        total += arg(p).last_dim();
      }
      Shape shape = first;
      shape.back() = total;
      Tensor<T> out(shape);
      const std::size_t rows = outer_size(shape);
      std::size_t offset = 0;
      for (std::size_t p = 0; p < parents.size(); ++p) {
        const Tensor<T>& part = arg(p);
        const std::size_t w = static_cast<std::size_t>(part.last_dim());
        for (std::size_t r = 0; r < rows; ++r) {
          std::copy_n(part.data() + r * w, w, out.data() + r * total + offset);
        }
        offset += w;
      }
      return out;
    }
    case OpKind::kSigmoid: {
      expect_arity(1);
      Tensor<T> out = arg(0);
      for (T& v : out.values()) v = T(1) / (T(1) + std::exp(-v));
      return out;
    }
    case OpKind::kTanh: {
      expect_arity(1);
      Tensor<T> out = arg(0);
      for (T& v : out.values()) v = std::tanh(v);
      return out;
    }
    case OpKind::kSoftmax: {
      expect_arity(1);
      Tensor<T> out = arg(0);
      const std::size_t w = static_cast<std::size_t>(out.last_dim());
      for (std::size_t r = 0; r < outer_size(out.shape()); ++r) {
        T* row = out.data() + r * w;
        const T mx = *std::max_element(row, row + w);
        T total = 0;
        for (std::size_t i = 0; i < w; ++i) total += (row[i] = std::exp(row[i] - mx));
        for (std::size_t i = 0; i < w; ++i) row[i] /= total;
      }
      return out;
    }
    case OpKind::kEmbeddingLookup: {
      expect_arity(1);
      const Tensor<T>& table = arg(0);
      if (table.rank() != 2) shape_error(kind, "table must be rank 2, got " + shape_string(table.shape()));
      if (attrs.index < 0 || attrs.index >= table.dim(0)) {
        throw IndexError("embedding_lookup: row " + std::to_string(attrs.index) +
                         " outside table of " + std::to_string(table.dim(0)) + " rows");
      }
      const int d = table.dim(1);
      Tensor<T> out(Shape{d});
      std::copy_n(table.data() + static_cast<std::size_t>(attrs.index) * d, d, out.data());
      return out;
    }
    case OpKind::kCrossEntropy: {
      expect_arity(1);
      const Tensor<T>& logits = arg(0);
      if (logits.rank() != 1) shape_error(kind, "logits must be rank 1, got " + shape_string(logits.shape()));
      if (attrs.index < 0 || attrs.index >= logits.dim(0)) {
        throw IndexError("cross_entropy: target " + std::to_string(attrs.index) +
                         " outside " + std::to_string(logits.dim(0)) + " classes");
      }
      const T mx = *std::max_element(logits.data(), logits.data() + logits.size());
      T total = 0;
      for (T v : logits.values()) total += std::exp(v - mx);
      return Tensor<T>::scalar(mx + std::log(total) - logits[static_cast<std::size_t>(attrs.index)]);
    }
    case OpKind::kSlice: {
      expect_arity(1);
      const Tensor<T>& x = arg(0);
      if (attrs.begin < 0 || attrs.end > x.last_dim() || attrs.begin >= attrs.end) {
        shape_error(kind, "range [" + std::to_string(attrs.begin) + "," + std::to_string(attrs.end) +
                              ") invalid for " + shape_string(x.shape()));
      }
      Shape shape = x.shape();
      shape.back() = attrs.end - attrs.begin;
      Tensor<T> out(shape);
      const std::size_t rows = outer_size(shape), w = static_cast<std::size_t>(shape.back());
      const std::size_t src_w = static_cast<std::size_t>(x.last_dim());
      for (std::size_t r = 0; r < rows; ++r) {
        std::copy_n(x.data() + r * src_w + attrs.begin, w, out.data() + r * w);
      }
      return out;
    }
    case OpKind::kSum: {
      expect_arity(1);
      T total = 0;
      for (T v : arg(0).values()) total += v;
      return Tensor<T>::scalar(total);
    }
    case OpKind::kScale: {
      expect_arity(1);
      Tensor<T> out = arg(0);
      const T f = static_cast<T>(attrs.factor);
      for (T& v : out.values()) v *= f;
      return out;
    }
    case OpKind::kInput:
    case OpKind::kParameter:
      break;
  }
  throw ContractViolation("unsupported op kind");
}

template <typename T>
void Graph<T>::backward(Node<T> loss) {
  if (&loss.graph() != this) throw ContractViolation("loss belongs to a different graph");
  const Record& root = records_[static_cast<std::size_t>(loss.id())];
  if (root.val().size() != 1) {
    throw ContractViolation("backward requires a scalar loss, got shape " +
                            shape_string(root.val().shape()));
  }
  std::vector<char> reachable(static_cast<std::size_t>(loss.id()) + 1, 0);
  reachable[static_cast<std::size_t>(loss.id())] = 1;
  for (int id = loss.id(); id >= 0; --id) {
    if (!reachable[static_cast<std::size_t>(id)]) continue;
    for (int p : records_[static_cast<std::size_t>(id)].parents) reachable[static_cast<std::size_t>(p)] = 1;
  }
  for (int id = 0; id <= loss.id(); ++id) {
    Record& rec = records_[static_cast<std::size_t>(id)];
    if (reachable[static_cast<std::size_t>(id)] && !rec.leaf()) rec.grad = Tensor<T>(rec.val().shape());
  }
  grad_buffer(loss.id())[0] += T(1);
  for (int id = loss.id(); id >= 0; --id) {
    const Record& rec = records_[static_cast<std::size_t>(id)];
    if (reachable[static_cast<std::size_t>(id)] && !rec.leaf()) propagate(rec);
  }
}

template <typename T>
void Graph<T>::propagate(const Record& rec) {
  const Tensor<T>& g = rec.grad;
  const Tensor<T>& y = rec.value;
  auto parent_val = [&](std::size_t i) -> const Tensor<T>& { return value(rec.parents[i]); };
  auto parent_grad = [&](std::size_t i) -> Tensor<T>& { return grad_buffer(rec.parents[i]); };

  switch (rec.kind) {
    case OpKind::kMatMul: {
      const Tensor<T>& a = parent_val(0);
      const Tensor<T>& b = parent_val(1);
      const int m = a.dim(0), k = a.dim(1), n = b.rank() == 2 ? b.dim(1) : 1;
      Eigen::Map<const RowMatrix<T>> am(a.data(), m, k);
      Eigen::Map<const RowMatrix<T>> bm(b.data(), k, n);
      Eigen::Map<const RowMatrix<T>> gm(g.data(), m, n);
      {
        Eigen::Map<RowMatrix<T>> da(parent_grad(0).data(), m, k);
        da.noalias() += gm * bm.transpose();
      }
      {
        Eigen::Map<RowMatrix<T>> db(parent_grad(1).data(), k, n);
        db.noalias() += am.transpose() * gm;
      }
      break;
    }
    case OpKind::kAdd: {
      Tensor<T>& da = parent_grad(0);
      for (std::size_t i = 0; i < g.size(); ++i) da[i] += g[i];
      Tensor<T>& db = parent_grad(1);
      const std::size_t cols = db.size();
      for (std::size_t i = 0; i < g.size(); ++i) db[i % cols] += g[i];
      break;
    }
    case OpKind::kMul: {
      const Tensor<T>& a = parent_val(0);
      const Tensor<T>& b = parent_val(1);
      Tensor<T>& da = parent_grad(0);
      for (std::size_t i = 0; i < g.size(); ++i) da[i] += g[i] * b[i];
      Tensor<T>& db = parent_grad(1);
      for (std::size_t i = 0; i < g.size(); ++i) db[i] += g[i] * a[i];
      break;
    }
    case OpKind::kConcat: {
      const std::size_t rows = outer_size(y.shape());
      const std::size_t total = static_cast<std::size_t>(y.last_dim());
      std::size_t offset = 0;
      for (std::size_t p = 0; p < rec.parents.size(); ++p) {
        Tensor<T>& dp = parent_grad(p);
        const std::size_t w = static_cast<std::size_t>(dp.last_dim());
        for (std::size_t r = 0; r < rows; ++r) {
          const T* src = g.data() + r * total + offset;
          T* dst = dp.data() + r * w;
          for (std::size_t i = 0; i < w; ++i) dst[i] += src[i];
        }
        offset += w;
      }
      break;
    }
    case OpKind::kSigmoid: {
      Tensor<T>& dx = parent_grad(0);
      for (std::size_t i = 0; i < g.size(); ++i) dx[i] += g[i] * y[i] * (T(1) - y[i]);
      break;
    }
    case OpKind::kTanh: {
      Tensor<T>& dx = parent_grad(0);
      for (std::size_t i = 0; i < g.size(); ++i) dx[i] += g[i] * (T(1) - y[i] * y[i]);
      break;
    }
    case OpKind::kSoftmax: {
      Tensor<T>& dx = parent_grad(0);
      const std::size_t w = static_cast<std::size_t>(y.last_dim());
      for (std::size_t r = 0; r < outer_size(y.shape()); ++r) {
        const T* yr = y.data() + r * w;
        const T* gr = g.data() + r * w;
        T dot = 0;
        for (std::size_t i = 0; i < w; ++i) dot += gr[i] * yr[i];
        T* dr = dx.data() + r * w;
        for (std::size_t i = 0; i < w; ++i) dr[i] += yr[i] * (gr[i] - dot);
      }
      break;
    }
    case OpKind::kEmbeddingLookup: {
      Tensor<T>& dt = parent_grad(0);
      const std::size_t d = g.size();
      T* row = dt.data() + static_cast<std::size_t>(rec.attrs.index) * d;
      for (std::size_t i = 0; i < d; ++i) row[i] += g[i];
      break;
    }
    case OpKind::kCrossEntropy: {
      const Tensor<T>& x = parent_val(0);
      Tensor<T>& dx = parent_grad(0);
      const T mx = *std::max_element(x.data(), x.data() + x.size());
      T total = 0;
      for (T v : x.values()) total += std::exp(v - mx);
      const T upstream = g[0];
      for (std::size_t i = 0; i < x.size(); ++i) dx[i] += upstream * std::exp(x[i] - mx) / total;
      dx[static_cast<std::size_t>(rec.attrs.index)] -= upstream;
      break;
    }
    case OpKind::kSlice: {
      Tensor<T>& dx = parent_grad(0);
      const std::size_t rows = outer_size(y.shape()), w = static_cast<std::size_t>(y.last_dim());
      const std::size_t src_w = static_cast<std::size_t>(dx.last_dim());
      for (std::size_t r = 0; r < rows; ++r) {
        T* dst = dx.data() + r * src_w + rec.attrs.begin;
        const T* src = g.data() + r * w;
        for (std::size_t i = 0; i < w; ++i) dst[i] += src[i];
      }
      break;
    }
    case OpKind::kSum: {
      Tensor<T>& dx = parent_grad(0);
      for (T& v : dx.values()) v += g[0];
      break;
    }
    case OpKind::kScale: {
      Tensor<T>& dx = parent_grad(0);
      const T f = static_cast<T>(rec.attrs.factor);
      for (std::size_t i = 0; i < g.size(); ++i) dx[i] += f * g[i];
      break;
    }
    case OpKind::kInput:
    case OpKind::kParameter:
      break;
  }
}

template <typename T>
void Graph<T>::zero_grad() {
  for (Record& rec : records_) rec.grad = Tensor<T>();
}

template <typename T>
void Graph<T>::accumulate_parameter_grads(Gradients<T>& into) const {
  if (!params_) return;
  if (into.size() != params_->size()) {
    throw ContractViolation("gradient buffer has " + std::to_string(into.size()) +
                            " entries for " + std::to_string(params_->size()) + " parameters");
  }
  for (std::size_t p = 0; p < parameter_nodes_.size(); ++p) {
    const int id = parameter_nodes_[p];
    if (id < 0) continue;
    const Tensor<T>& g = records_[static_cast<std::size_t>(id)].grad;
    if (g.empty()) continue;
    T* dst = into[p].data();
    for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i];
  }
}

// ---------------------------------------------------------------------------
// Op helpers

namespace {

template <typename T>
Node<T> apply1(OpKind kind, Node<T> x, const OpAttrs& attrs = {}) {
  const Node<T> in[] = {x};
  return x.graph().apply(kind, in, attrs);
}

template <typename T>
Node<T> apply2(OpKind kind, Node<T> a, Node<T> b) {
  const Node<T> in[] = {a, b};
  return a.graph().apply(kind, in);
}

}  // namespace

template <typename T>
Node<T> matmul(Node<T> a, Node<T> b) { return apply2(OpKind::kMatMul, a, b); }
template <typename T>
Node<T> add(Node<T> a, Node<T> b) { return apply2(OpKind::kAdd, a, b); }
template <typename T>
Node<T> mul(Node<T> a, Node<T> b) { return apply2(OpKind::kMul, a, b); }

template <typename T>
Node<T> concat(std::span<const Node<T>> parts) {
  if (parts.empty()) throw DimensionError("concat: no inputs");
  return parts[0].graph().apply(OpKind::kConcat, parts);
}

template <typename T>
Node<T> sigmoid(Node<T> x) { return apply1(OpKind::kSigmoid, x); }
template <typename T>
Node<T> tanh(Node<T> x) { return apply1(OpKind::kTanh, x); }
template <typename T>
Node<T> softmax(Node<T> x) { return apply1(OpKind::kSoftmax, x); }

template <typename T>
Node<T> embedding_lookup(Node<T> table, int row) {
  OpAttrs attrs;
  attrs.index = row;
  return apply1(OpKind::kEmbeddingLookup, table, attrs);
}

template <typename T>
Node<T> cross_entropy(Node<T> logits, int target) {
  OpAttrs attrs;
  attrs.index = target;
  return apply1(OpKind::kCrossEntropy, logits, attrs);
}

template <typename T>
Node<T> slice(Node<T> x, int begin, int end) {
  OpAttrs attrs;
  attrs.begin = begin;
  attrs.end = end;
  return apply1(OpKind::kSlice, x, attrs);
}

template <typename T>
Node<T> sum(Node<T> x) { return apply1(OpKind::kSum, x); }

template <typename T>
Node<T> scale(Node<T> x, double factor) {
  OpAttrs attrs;
  attrs.factor = factor;
  return apply1(OpKind::kScale, x, attrs);
}

#define INSMT_INSTANTIATE_GRAPH(T)                                     \
  template class ParameterSet<T>;                                      \
  template class Graph<T>;                                             \
  template Gradients<T> zero_gradients(const ParameterSet<T>&);        \
  template void add_gradients(Gradients<T>&, const Gradients<T>&);     \
  template Node<T> matmul(Node<T>, Node<T>);                           \
  template Node<T> add(Node<T>, Node<T>);                              \
  template Node<T> mul(Node<T>, Node<T>);                              \
  template Node<T> concat(std::span<const Node<T>>);                   \
  template Node<T> sigmoid(Node<T>);                                   \
  template Node<T> tanh(Node<T>);                                      \
  template Node<T> softmax(Node<T>);                                   \
  template Node<T> embedding_lookup(Node<T>, int);                     \
  template Node<T> cross_entropy(Node<T>, int);                        \
  template Node<T> slice(Node<T>, int, int);                           \
  template Node<T> sum(Node<T>);                                       \
  template Node<T> scale(Node<T>, double);

INSMT_INSTANTIATE_GRAPH(float)
INSMT_INSTANTIATE_GRAPH(double)
INSMT_INSTANTIATE_GRAPH(long double)

#undef INSMT_INSTANTIATE_GRAPH

}  // namespace insmt
