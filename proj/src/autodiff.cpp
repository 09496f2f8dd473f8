#include "fbf/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <utility>

namespace fbf::ad {

namespace {

const char* op_name(Op op) {
  switch (op) {
    case Op::kLeaf: return "leaf";
    case Op::kAdd: return "add";
    case Op::kAddRow: return "add_row";
    case Op::kSub: return "sub";
    case Op::kMul: return "mul";
    case Op::kDiv: return "div";
    case Op::kScale: return "scale";
    case Op::kMatMul: return "matmul";
    case Op::kTanh: return "tanh";
    case Op::kRelu: return "relu";
    case Op::kSoftplus: return "softplus";
    case Op::kExp: return "exp";
    case Op::kLog: return "log";
    case Op::kSum: return "sum";
    case Op::kMean: return "mean";
    case Op::kSumLast: return "sum_last";
    case Op::kConcat: return "concat";
    case Op::kReshape: return "reshape";
    case Op::kTranspose: return "transpose";
    case Op::kGather: return "gather";
  }
  return "?";
}

void expect(bool ok, const std::string& msg) {
  if (!ok) throw ConfigError(msg);
}

Tape* tape_of(Var a) {
  if (a.tape == nullptr) throw std::logic_error("var has no tape");
  return a.tape;
}

Tape* common_tape(Var a, Var b) {
  if (a.tape == nullptr || a.tape != b.tape)
    throw std::logic_error("operands recorded on different tapes");
  return a.tape;
}

double stable_softplus(double x) {
  return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

double stable_sigmoid(double x) {
  if (x >= 0.0) {
    double e = std::exp(-x);
    return 1.0 / (1.0 + e);
  }
  double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

int ParameterStore::add(std::string name, Tensor value, bool trainable) {
  if (index_.count(name))
    throw ConfigError("duplicate parameter name: " + name);
  int idx = static_cast<int>(slots_.size());
  index_.emplace(name, idx);
  slots_.push_back({std::move(name), std::move(value), trainable});
  return idx;
}

bool ParameterStore::contains(std::string_view name) const {
  return index_.find(name) != index_.end();
}

Tensor& ParameterStore::at(std::string_view name) {
  auto it = index_.find(name);
  if (it == index_.end())
    throw ConfigError("unknown parameter: " + std::string(name));
  return slots_[it->second].value;
}

const Tensor& ParameterStore::at(std::string_view name) const {
  auto it = index_.find(name);
  if (it == index_.end())
    throw ConfigError("unknown parameter: " + std::string(name));
  return slots_[it->second].value;
}

Var Tape::push(Node&& node) {
  if (!node.value.all_finite())
    throw NumericError(std::string("non-finite result from op ") +
                       op_name(node.op));
  nodes_.push_back(std::move(node));
  return Var{this, static_cast<std::int32_t>(nodes_.size() - 1)};
}

Var Tape::constant(Tensor t) {
  Node n;
  n.op = Op::kLeaf;
  n.value = std::move(t);
  return push(std::move(n));
}

Var Tape::param(const ParameterStore& store, std::string_view name) {
  auto it = param_cache_.find(name);
  if (it != param_cache_.end()) return it->second;
  Node n;
  n.op = Op::kLeaf;
  n.value = store.at(name);
  n.param = std::string(name);
  Var v = push(std::move(n));
  param_cache_.emplace(std::string(name), v);
  return v;
}

const Tensor& Tape::value(Var v) const {
  if (v.tape != this || v.index < 0 ||
      v.index >= static_cast<std::int32_t>(nodes_.size()))
    throw std::logic_error("var does not belong to this tape");
  return nodes_[v.index].value;
}

GradientMap Tape::backward(Var output) {
  if (value(output).size() != 1)
    throw ConfigError("default backward seed requires a scalar output");
  return backward(output, Tensor::scalar(1.0));
}

GradientMap Tape::backward(Var output, const Tensor& seed) {
  const Tensor& out_value = value(output);
  if (!seed.same_shape(out_value))
    throw ConfigError("backward seed shape does not match output shape");
  if (consumed_) throw std::logic_error("tape already consumed by backward");
  consumed_ = true;

  std::vector<Tensor::Storage> grads(output.index + 1);
  auto touch = [&](std::int32_t i) -> Tensor::Storage& {
    if (grads[i].size() == 0) {
      const Tensor& v = nodes_[i].value;
      grads[i] = Tensor::Storage::Zero(v.data().rows(), v.data().cols());
    }
    return grads[i];
  };
  touch(output.index) = seed.data();

  for (std::int32_t i = output.index; i >= 0; --i) {
    if (grads[i].size() == 0) continue;
    const Node& n = nodes_[i];
    const Tensor::Storage& g = grads[i];
    switch (n.op) {
      case Op::kLeaf:
        break;
      case Op::kAdd:
        touch(n.a) += g;
        touch(n.b) += g;
        break;
      case Op::kAddRow:
        touch(n.a) += g;
        touch(n.b).row(0) += g.colwise().sum();
        break;
      case Op::kSub:
        touch(n.a) += g;
        touch(n.b) -= g;
        break;
      case Op::kMul:
        touch(n.a) += g.cwiseProduct(nodes_[n.b].value.data());
        touch(n.b) += g.cwiseProduct(nodes_[n.a].value.data());
        break;
      case Op::kDiv:
        touch(n.a) += g.cwiseQuotient(nodes_[n.b].value.data());
        touch(n.b) -=
            g.cwiseProduct(n.value.data()).cwiseQuotient(nodes_[n.b].value.data());
        break;
      case Op::kScale:
        touch(n.a) += n.alpha * g;
        break;
      case Op::kMatMul: {
        const Tensor& ta = nodes_[n.a].value;
        const Tensor& tb = nodes_[n.b].value;
        const Tensor::Storage& va = ta.data();
        const Tensor::Storage& vb = tb.data();
        if (ta.rank() == 2 && tb.rank() == 2) {
          touch(n.a) += g * vb.transpose();
          touch(n.b) += va.transpose() * g;
        } else if (ta.rank() == 2 && tb.rank() == 1) {
          touch(n.a) += g.transpose() * vb;
          touch(n.b) += g * va;
        } else if (ta.rank() == 1 && tb.rank() == 2) {
          touch(n.a) += g * vb.transpose();
          touch(n.b) += va.transpose() * g;
        } else {
          touch(n.a) += g(0, 0) * vb;
          touch(n.b) += g(0, 0) * va;
        }
        break;
      }
      case Op::kTanh:
        touch(n.a) += g.cwiseProduct(
            (1.0 - n.value.data().array().square()).matrix());
        break;
      case Op::kRelu:
        touch(n.a) += g.cwiseProduct(
            (nodes_[n.a].value.data().array() > 0.0).cast<double>().matrix());
        break;
      case Op::kSoftplus:
        touch(n.a) += g.cwiseProduct(nodes_[n.a]
                                         .value.data()
                                         .unaryExpr([](double x) {
                                           return stable_sigmoid(x);
                                         }));
        break;
      case Op::kExp:
        touch(n.a) += g.cwiseProduct(n.value.data());
        break;
      case Op::kLog:
        touch(n.a) += g.cwiseQuotient(nodes_[n.a].value.data());
        break;
      case Op::kSum: {
        Tensor::Storage& ga = touch(n.a);
        ga.array() += g(0, 0);
        break;
      }
      case Op::kMean: {
        Tensor::Storage& ga = touch(n.a);
        ga.array() += g(0, 0) / static_cast<double>(ga.size());
        break;
      }
      case Op::kSumLast: {
        Tensor::Storage& ga = touch(n.a);
        if (nodes_[n.a].value.rank() == 2) {
          ga.colwise() += g.row(0).transpose();
        } else {
          ga.array() += g(0, 0);
        }
        break;
      }
      case Op::kConcat: {
        Eigen::Index p = nodes_[n.a].value.size();
        Eigen::Index q = nodes_[n.b].value.size();
        touch(n.a) += g.leftCols(p);
        touch(n.b) += g.rightCols(q);
        break;
      }
      case Op::kReshape: {
        const Tensor::Storage& pv = nodes_[n.a].value.data();
        touch(n.a) += Eigen::Map<const Tensor::Storage>(g.data(), pv.rows(),
                                                        pv.cols());
        break;
      }
      case Op::kTranspose:
        touch(n.a) += g.transpose();
        break;
      case Op::kGather: {
        Tensor::Storage& ga = touch(n.a);
        for (Eigen::Index j = 0; j < g.cols(); ++j)
          ga(0, n.aux[j]) += g(0, j);
        break;
      }
    }
  }

  GradientMap result;
  for (std::int32_t i = 0; i <= output.index; ++i) {
    const Node& n = nodes_[i];
    if (n.op == Op::kLeaf && !n.param.empty() && grads[i].size() != 0)
      result.emplace(n.param,
                     Tensor::with_shape(n.value.shape(), std::move(grads[i])));
  }
  return result;
}

namespace {

Var elementwise2(Op op, Var a, Var b) {
  Tape* t = common_tape(a, b);
  const Tensor& ta = t->value(a);
  const Tensor& tb = t->value(b);
  expect(ta.same_shape(tb),
         std::string(op_name(op)) + ": operand shapes differ");
  Tape::Node n;
  n.op = op;
  n.a = a.index;
  n.b = b.index;
  Tensor::Storage s;
  switch (op) {
    case Op::kAdd: s = ta.data() + tb.data(); break;
    case Op::kSub: s = ta.data() - tb.data(); break;
    case Op::kMul: s = ta.data().cwiseProduct(tb.data()); break;
    case Op::kDiv: s = ta.data().cwiseQuotient(tb.data()); break;
    default: throw std::logic_error("not an elementwise op");
  }
  n.value = Tensor::with_shape(ta.shape(), std::move(s));
  return t->push(std::move(n));
}

Var elementwise1(Op op, Var a) {
  Tape* t = tape_of(a);
  const Tensor& ta = t->value(a);
  Tape::Node n;
  n.op = op;
  n.a = a.index;
  Tensor::Storage s;
  switch (op) {
    case Op::kTanh:
      s = ta.data().array().tanh().matrix();
      break;
    case Op::kRelu:
      s = ta.data().cwiseMax(0.0);
      break;
    case Op::kSoftplus:
      s = ta.data().unaryExpr([](double x) { return stable_softplus(x); });
      break;
    case Op::kExp:
      s = ta.data().array().exp().matrix();
      break;
    case Op::kLog:
      s = ta.data().array().log().matrix();
      break;
    default:
      throw std::logic_error("not a unary op");
  }
  n.value = Tensor::with_shape(ta.shape(), std::move(s));
  return t->push(std::move(n));
}

}  // namespace

Var add(Var a, Var b) { return elementwise2(Op::kAdd, a, b); }
Var sub(Var a, Var b) { return elementwise2(Op::kSub, a, b); }
Var mul(Var a, Var b) { return elementwise2(Op::kMul, a, b); }
Var div(Var a, Var b) { return elementwise2(Op::kDiv, a, b); }

Var add_row(Var mat, Var row) {
  Tape* t = common_tape(mat, row);
  const Tensor& tm = t->value(mat);
  const Tensor& tr = t->value(row);
  expect(tm.rank() == 2 && tr.rank() == 1 && tr.shape()[0] == tm.shape()[1],
         "add_row: need matrix[r x c] + row[c]");
  Tape::Node n;
  n.op = Op::kAddRow;
  n.a = mat.index;
  n.b = row.index;
  Tensor::Storage s = tm.data();
  s.rowwise() += tr.data().row(0);
  n.value = Tensor::with_shape(tm.shape(), std::move(s));
  return t->push(std::move(n));
}

Var scale(Var a, double alpha) {
  Tape* t = tape_of(a);
  const Tensor& ta = t->value(a);
  Tape::Node n;
  n.op = Op::kScale;
  n.a = a.index;
  n.alpha = alpha;
  n.value = Tensor::with_shape(ta.shape(), alpha * ta.data());
  return t->push(std::move(n));
}

Var matmul(Var a, Var b) {
  Tape* t = common_tape(a, b);
  const Tensor& ta = t->value(a);
  const Tensor& tb = t->value(b);
  Tape::Node n;
  n.op = Op::kMatMul;
  n.a = a.index;
  n.b = b.index;
  if (ta.rank() == 2 && tb.rank() == 2) {
    expect(ta.shape()[1] == tb.shape()[0], "matmul: inner extents differ");
    n.value = Tensor::with_shape({ta.shape()[0], tb.shape()[1]},
                                 ta.data() * tb.data());
  } else if (ta.rank() == 2 && tb.rank() == 1) {
    expect(ta.shape()[1] == tb.shape()[0], "matmul: inner extents differ");
    n.value = Tensor::with_shape({ta.shape()[0]},
                                 tb.data() * ta.data().transpose());
  } else if (ta.rank() == 1 && tb.rank() == 2) {
    expect(ta.shape()[0] == tb.shape()[0], "matmul: inner extents differ");
    n.value = Tensor::with_shape({tb.shape()[1]}, ta.data() * tb.data());
  } else {
    expect(ta.shape()[0] == tb.shape()[0], "matmul: inner extents differ");
    Tensor::Storage s(1, 1);
    s(0, 0) = ta.data().row(0).dot(tb.data().row(0));
    n.value = Tensor::with_shape({1}, std::move(s));
  }
  return t->push(std::move(n));
}

Var tanh(Var a) { return elementwise1(Op::kTanh, a); }
Var relu(Var a) { return elementwise1(Op::kRelu, a); }
Var softplus(Var a) { return elementwise1(Op::kSoftplus, a); }
Var exp(Var a) { return elementwise1(Op::kExp, a); }
Var log(Var a) { return elementwise1(Op::kLog, a); }

Var sum(Var a) {
  Tape* t = tape_of(a);
  Tape::Node n;
  n.op = Op::kSum;
  n.a = a.index;
  n.value = Tensor::scalar(t->value(a).data().sum());
  return t->push(std::move(n));
}

Var mean(Var a) {
  Tape* t = tape_of(a);
  Tape::Node n;
  n.op = Op::kMean;
  n.a = a.index;
  n.value = Tensor::scalar(t->value(a).data().mean());
  return t->push(std::move(n));
}

Var sum_last(Var a) {
  Tape* t = tape_of(a);
  const Tensor& ta = t->value(a);
  Tape::Node n;
  n.op = Op::kSumLast;
  n.a = a.index;
  if (ta.rank() == 2) {
    Tensor::Storage s = ta.data().rowwise().sum().transpose();
    n.value = Tensor::with_shape({ta.shape()[0]}, std::move(s));
  } else {
    n.value = Tensor::scalar(ta.data().sum());
  }
  return t->push(std::move(n));
}

Var concat(Var a, Var b) {
  Tape* t = common_tape(a, b);
  const Tensor& ta = t->value(a);
  const Tensor& tb = t->value(b);
  expect(ta.rank() == 1 && tb.rank() == 1, "concat: rank-1 operands required");
  Tape::Node n;
  n.op = Op::kConcat;
  n.a = a.index;
  n.b = b.index;
  Tensor::Storage s(1, ta.size() + tb.size());
  s.leftCols(ta.size()) = ta.data();
  s.rightCols(tb.size()) = tb.data();
  n.value = Tensor::with_shape({ta.size() + tb.size()}, std::move(s));
  return t->push(std::move(n));
}

Var reshape(Var a, std::vector<Eigen::Index> shape) {
  Tape* t = tape_of(a);
  const Tensor& ta = t->value(a);
  Tensor target = Tensor::zeros(shape);
  expect(target.size() == ta.size(), "reshape: element count differs");
  Tape::Node n;
  n.op = Op::kReshape;
  n.a = a.index;
  target.data() = Eigen::Map<const Tensor::Storage>(
      ta.data().data(), target.data().rows(), target.data().cols());
  n.value = std::move(target);
  return t->push(std::move(n));
}

Var transpose(Var a) {
  Tape* t = tape_of(a);
  const Tensor& ta = t->value(a);
  expect(ta.rank() == 2, "transpose: rank-2 operand required");
  Tape::Node n;
  n.op = Op::kTranspose;
  n.a = a.index;
  n.value = Tensor::with_shape({ta.shape()[1], ta.shape()[0]},
                               ta.data().transpose());
  return t->push(std::move(n));
}

Var gather(Var a, std::vector<Eigen::Index> idx) {
  Tape* t = tape_of(a);
  const Tensor& ta = t->value(a);
  expect(ta.rank() == 1, "gather: rank-1 operand required");
  expect(!idx.empty(), "gather: index list must be non-empty");
  Tensor::Storage s(1, static_cast<Eigen::Index>(idx.size()));
  for (std::size_t j = 0; j < idx.size(); ++j) {
    expect(idx[j] >= 0 && idx[j] < ta.size(), "gather: index out of range");
    s(0, static_cast<Eigen::Index>(j)) = ta.data()(0, idx[j]);
  }
  const auto count = static_cast<Eigen::Index>(idx.size());
  Tape::Node n;
  n.op = Op::kGather;
  n.a = a.index;
  n.aux = std::move(idx);
  n.value = Tensor::with_shape({count}, std::move(s));
  return t->push(std::move(n));
}

double grad_check(const std::function<Var(Tape&, const ParameterStore&)>& fn,
                  ParameterStore& params, double h) {
  GradientMap analytic;
  {
    Tape tape;
    Var out = fn(tape, params);
    if (tape.value(out).size() != 1)
      throw ConfigError("grad_check: fn must produce a scalar");
    analytic = tape.backward(out);
  }
  auto eval = [&]() {
    Tape tape;
    return tape.value(fn(tape, params)).scalar_value();
  };
  double worst = 0.0;
  for (auto& slot : params.slots()) {
    if (!slot.trainable) continue;
    auto it = analytic.find(slot.name);
    const Tensor* grad = it == analytic.end() ? nullptr : &it->second;
    Tensor::Storage& v = slot.value.data();
    for (Eigen::Index r = 0; r < v.rows(); ++r) {
      for (Eigen::Index c = 0; c < v.cols(); ++c) {
        double orig = v(r, c);
        v(r, c) = orig + h;
        double fp = eval();
        v(r, c) = orig - h;
        double fm = eval();
        v(r, c) = orig;
        double numeric = (fp - fm) / (2.0 * h);
        double a = grad ? grad->data()(r, c) : 0.0;
        double denom =
            std::max({std::abs(a), std::abs(numeric), 1e-8});
        worst = std::max(worst, std::abs(a - numeric) / denom);
      }
    }
  }
  return worst;
}

}  // namespace fbf::ad
