#include "slowflow/tape.hpp"

#include <cmath>
#include <string>

#include "slowflow/errors.hpp"

namespace slowflow::ad {

ValueId Tape::push(Node n) {
  grads_ready_ = false;
  nodes_.push_back(std::move(n));
  return ValueId{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

const Tape::Node& Tape::at(ValueId id) const { return nodes_[id.index]; }

void Tape::check(ValueId id, const char* primitive) const {
  if (!id.valid() || id.index >= nodes_.size()) {
    throw ContractViolation(std::string(primitive) + ": operand is not a node of this tape");
  }
}

ValueId Tape::leaf(Matrix value) {
  Node n;
  n.op = Op::kLeaf;
  n.value = std::move(value);
  return push(std::move(n));
}

ValueId Tape::matmul(ValueId a, ValueId b) {
  check(a, "matmul");
  check(b, "matmul");
  Node n;
  n.op = Op::kMatMul;
  n.a = a.index;
  n.b = b.index;
  n.value = slowflow::matmul(at(a).value, at(b).value);
  return push(std::move(n));
}

ValueId Tape::add(ValueId a, ValueId b) {
  check(a, "add");
  check(b, "add");
  Node n;
  n.op = Op::kAdd;
  n.a = a.index;
  n.b = b.index;
  n.value = slowflow::add(at(a).value, at(b).value);
  return push(std::move(n));
}

ValueId Tape::add_row(ValueId a, ValueId row) {
  check(a, "add_row");
  check(row, "add_row");
  Node n;
  n.op = Op::kAddRow;
  n.a = a.index;
  n.b = row.index;
  n.value = slowflow::add_row(at(a).value, at(row).value);
  return push(std::move(n));
}

ValueId Tape::sub(ValueId a, ValueId b) {
  check(a, "sub");
  check(b, "sub");
  Node n;
  n.op = Op::kSub;
  n.a = a.index;
  n.b = b.index;
  n.value = slowflow::sub(at(a).value, at(b).value);
  return push(std::move(n));
}

ValueId Tape::mul(ValueId a, ValueId b) {
  check(a, "mul");
  check(b, "mul");
  Node n;
  n.op = Op::kMul;
  n.a = a.index;
  n.b = b.index;
  n.value = slowflow::hadamard(at(a).value, at(b).value);
  return push(std::move(n));
}

ValueId Tape::scale(ValueId a, double c) {
  check(a, "scale");
  Node n;
  n.op = Op::kScale;
  n.a = a.index;
  n.c = c;
  n.value = slowflow::scale(at(a).value, c);
  return push(std::move(n));
}

ValueId Tape::tanh(ValueId a) {
  check(a, "tanh");
  Node n;
  n.op = Op::kTanh;
  n.a = a.index;
  n.value = map_tanh(at(a).value);
  return push(std::move(n));
}

ValueId Tape::exp(ValueId a) {
  check(a, "exp");
  Node n;
  n.op = Op::kExp;
  n.a = a.index;
  n.value = map_exp(at(a).value);
  return push(std::move(n));
}

ValueId Tape::log(ValueId a) {
  check(a, "log");
  Node n;
  n.op = Op::kLog;
  n.a = a.index;
  n.value = map_log(at(a).value);
  return push(std::move(n));
}

ValueId Tape::square(ValueId a) {
  check(a, "square");
  Node n;
  n.op = Op::kSquare;
  n.a = a.index;
  n.value = map_square(at(a).value);
  return push(std::move(n));
}

ValueId Tape::sum(ValueId a) {
  check(a, "sum");
  Node n;
  n.op = Op::kSum;
  n.a = a.index;
  n.value = Matrix(1, 1, slowflow::sum(at(a).value));
  return push(std::move(n));
}

ValueId Tape::mean(ValueId a) {
  check(a, "mean");
  Node n;
  n.op = Op::kMean;
  n.a = a.index;
  n.value = Matrix(1, 1, slowflow::mean(at(a).value));
  return push(std::move(n));
}

ValueId Tape::time_diff(ValueId a, std::size_t block) {
  check(a, "time_diff");
  const Matrix& x = at(a).value;
  if (block == 0 || x.rows() % block != 0) {
    throw DimensionError("time_diff: " + std::to_string(x.rows()) +
                         " rows not divisible into blocks of " + std::to_string(block));
  }
  Node n;
  n.op = Op::kTimeDiff;
  n.a = a.index;
  n.block = static_cast<std::uint32_t>(block);
  Matrix out(x.rows(), x.cols());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const bool block_start = (r % block) == 0;
    for (std::size_t j = 0; j < x.cols(); ++j) {
      out(r, j) = block_start ? x(r, j) : x(r, j) - x(r - 1, j);
    }
  }
  n.value = std::move(out);
  return push(std::move(n));
}

void Tape::backward(ValueId loss) {
  check(loss, "backward");
  const Matrix& lv = at(loss).value;
  if (lv.rows() != 1 || lv.cols() != 1) {
    throw ContractViolation("backward: loss must be scalar (1x1), got " + shape_str(lv));
  }
  for (auto& n : nodes_) {
    n.grad = Matrix(n.value.rows(), n.value.cols());
  }
  nodes_[loss.index].grad(0, 0) = 1.0;
  last_backward_visits_ = 0;

  // Single reverse sweep; append-only recording guarantees topological order.
  for (std::size_t i = nodes_.size(); i-- > 0;) {
    Node& n = nodes_[i];
    ++last_backward_visits_;
    const Matrix& g = n.grad;
    switch (n.op) {
      case Op::kLeaf:
        break;
      case Op::kMatMul: {
        Matrix& ga = nodes_[n.a].grad;
        Matrix& gb = nodes_[n.b].grad;
        Matrix da = matmul(g, transpose(nodes_[n.b].value));
        Matrix db = matmul(transpose(nodes_[n.a].value), g);
        for (std::size_t k = 0; k < ga.size(); ++k) ga.data()[k] += da.data()[k];
        for (std::size_t k = 0; k < gb.size(); ++k) gb.data()[k] += db.data()[k];
        break;
      }
      case Op::kAdd: {
        Matrix& ga = nodes_[n.a].grad;
        Matrix& gb = nodes_[n.b].grad;
        for (std::size_t k = 0; k < g.size(); ++k) {
          ga.data()[k] += g.data()[k];
          gb.data()[k] += g.data()[k];
        }
        break;
      }
      case Op::kAddRow: {
        Matrix& ga = nodes_[n.a].grad;
        Matrix& gr = nodes_[n.b].grad;
        for (std::size_t k = 0; k < g.size(); ++k) ga.data()[k] += g.data()[k];
        const std::size_t cols = g.cols();
        for (std::size_t r = 0; r < g.rows(); ++r)
          for (std::size_t j = 0; j < cols; ++j) gr(0, j) += g(r, j);
        break;
      }
      case Op::kSub: {
        Matrix& ga = nodes_[n.a].grad;
        Matrix& gb = nodes_[n.b].grad;
        for (std::size_t k = 0; k < g.size(); ++k) {
          ga.data()[k] += g.data()[k];
          gb.data()[k] -= g.data()[k];
        }
        break;
      }
      case Op::kMul: {
        Matrix& ga = nodes_[n.a].grad;
        Matrix& gb = nodes_[n.b].grad;
        const Matrix& av = nodes_[n.a].value;
        const Matrix& bv = nodes_[n.b].value;
        for (std::size_t k = 0; k < g.size(); ++k) {
          ga.data()[k] += g.data()[k] * bv.data()[k];
          gb.data()[k] += g.data()[k] * av.data()[k];
        }
        break;
      }
      case Op::kScale: {
        Matrix& ga = nodes_[n.a].grad;
        for (std::size_t k = 0; k < g.size(); ++k) ga.data()[k] += n.c * g.data()[k];
        break;
      }
      case Op::kTanh: {
        Matrix& ga = nodes_[n.a].grad;
        for (std::size_t k = 0; k < g.size(); ++k) {
          const double y = n.value.data()[k];
          ga.data()[k] += g.data()[k] * (1.0 - y * y);
        }
        break;
      }
      case Op::kExp: {
        Matrix& ga = nodes_[n.a].grad;
        for (std::size_t k = 0; k < g.size(); ++k)
          ga.data()[k] += g.data()[k] * n.value.data()[k];
        break;
      }
      case Op::kLog: {
        Matrix& ga = nodes_[n.a].grad;
        const Matrix& av = nodes_[n.a].value;
        for (std::size_t k = 0; k < g.size(); ++k)
          ga.data()[k] += g.data()[k] / av.data()[k];
        break;
      }
      case Op::kSquare: {
        Matrix& ga = nodes_[n.a].grad;
        const Matrix& av = nodes_[n.a].value;
        for (std::size_t k = 0; k < g.size(); ++k)
          ga.data()[k] += 2.0 * g.data()[k] * av.data()[k];
        break;
      }
      case Op::kSum: {
        Matrix& ga = nodes_[n.a].grad;
        const double gs = g(0, 0);
        for (std::size_t k = 0; k < ga.size(); ++k) ga.data()[k] += gs;
        break;
      }
      case Op::kMean: {
        Matrix& ga = nodes_[n.a].grad;
        const double gs = g(0, 0) / static_cast<double>(ga.size());
        for (std::size_t k = 0; k < ga.size(); ++k) ga.data()[k] += gs;
        break;
      }
      case Op::kTimeDiff: {
        Matrix& ga = nodes_[n.a].grad;
        const std::size_t block = n.block;
        const std::size_t cols = g.cols();
        // Adjoint of y_t = x_t - x_{t-1}: dx_t = g_t - g_{t+1} within a block.
        for (std::size_t r = 0; r < g.rows(); ++r) {
          const bool block_end = (r % block) == block - 1;
          for (std::size_t j = 0; j < cols; ++j) {
            ga(r, j) += g(r, j) - (block_end ? 0.0 : g(r + 1, j));
          }
        }
        break;
      }
    }
  }
  grads_ready_ = true;
}

const Matrix& Tape::value(ValueId id) const {
  check(id, "value");
  return at(id).value;
}

const Matrix& Tape::grad(ValueId id) const {
  check(id, "grad");
  if (!grads_ready_) throw ContractViolation("grad: backward() has not run on this tape");
  return at(id).grad;
}

void Tape::clear() {
  nodes_.clear();
  grads_ready_ = false;
  last_backward_visits_ = 0;
}

}  // namespace slowflow::ad
