#ifndef FBF_AUTODIFF_HPP
#define FBF_AUTODIFF_HPP

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "fbf/tensor.hpp"

namespace fbf::ad {

/// Named tensor slots with deterministic iteration order (insertion order).
class ParameterStore {
 public:
  struct Slot {
    std::string name;
    Tensor value;
    bool trainable = true;
  };

  /// Returns the slot index. Duplicate names are rejected.
  int add(std::string name, Tensor value, bool trainable = true);

  bool contains(std::string_view name) const;
  Tensor& at(std::string_view name);
  const Tensor& at(std::string_view name) const;

  std::vector<Slot>& slots() { return slots_; }
  const std::vector<Slot>& slots() const { return slots_; }

 private:
  std::vector<Slot> slots_;
  std::map<std::string, int, std::less<>> index_;
};

enum class Op : std::uint8_t {
  kLeaf,
  kAdd,
  kAddRow,
  kSub,
  kMul,
  kDiv,
  kScale,
  kMatMul,
  kTanh,
  kRelu,
  kSoftplus,
  kExp,
  kLog,
  kSum,
  kMean,
  kSumLast,
  kConcat,
  kReshape,
  kTranspose,
  kGather,
};

class Tape;

/// Handle to a value recorded on a tape.
struct Var {
  Tape* tape = nullptr;
  std::int32_t index = -1;
};

using GradientMap = std::map<std::string, Tensor, std::less<>>;

/// Record of recorded primitives in execution order. Backward replays the
/// record once in reverse; a consumed tape refuses a second backward pass.
class Tape {
 public:
  struct Node {
    Op op = Op::kLeaf;
    Tensor value;
    std::int32_t a = -1;
    std::int32_t b = -1;
    double alpha = 0.0;
    std::vector<Eigen::Index> aux;
    std::string param;
  };

  Var constant(Tensor t);
  /// Records the named slot's current value; repeated calls for the same name
  /// return the same node so gradients accumulate per parameter.
  Var param(const ParameterStore& store, std::string_view name);

  const Tensor& value(Var v) const;

  /// Gradient of a scalar output w.r.t. every parameter reached by the graph.
  GradientMap backward(Var output);
  GradientMap backward(Var output, const Tensor& seed);

  Var push(Node&& node);
  const Node& node(std::int32_t i) const { return nodes_[i]; }
  std::size_t size() const { return nodes_.size(); }

 private:
  std::vector<Node> nodes_;
  std::map<std::string, Var, std::less<>> param_cache_;
  bool consumed_ = false;
};

Var add(Var a, Var b);
/// matrix[r x c] + row[c], the only tensor-tensor broadcast.
Var add_row(Var mat, Var row);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var div(Var a, Var b);
Var scale(Var a, double alpha);
/// Rank rules follow vector/matrix algebra: 2x2 -> 2, 2x1 -> 1, 1x2 -> 1,
/// 1x1 -> scalar (dot product).
Var matmul(Var a, Var b);
Var tanh(Var a);
Var relu(Var a);
Var softplus(Var a);
Var exp(Var a);
Var log(Var a);
Var sum(Var a);
Var mean(Var a);
/// Sums over the last axis: rank-2 r x c -> rank-1 r; rank-1 -> scalar.
Var sum_last(Var a);
Var concat(Var a, Var b);
Var reshape(Var a, std::vector<Eigen::Index> shape);
Var transpose(Var a);
/// out[i] = a[idx[i]] over a rank-1 tensor; indices may repeat.
Var gather(Var a, std::vector<Eigen::Index> idx);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(double alpha, Var a) { return scale(a, alpha); }

/// Worst-case floored relative error between analytic gradients and central
/// finite differences over every element of every trainable slot:
/// |analytic - numeric| / max(|analytic|, |numeric|, 1e-8). Slot values are
/// perturbed in place and restored.
double grad_check(const std::function<Var(Tape&, const ParameterStore&)>& fn,
                  ParameterStore& params, double h = 1e-5);

}  // namespace fbf::ad

#endif  // FBF_AUTODIFF_HPP
