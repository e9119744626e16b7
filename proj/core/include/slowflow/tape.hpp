#pragma once

#include <cstdint>
#include <vector>

#include "slowflow/matrix.hpp"

namespace slowflow::ad {

/// Handle to a node on a Tape. Only meaningful for the tape that produced it.
struct ValueId {
  std::uint32_t index = UINT32_MAX;
  bool valid() const { return index != UINT32_MAX; }
};

/// Reverse-mode automatic differentiation over dense matrices.
///
/// Operations are recorded in topological order as they execute; backward()
/// walks the record once in reverse, accumulating adjoints. One tape per
/// scalar loss; tapes are not shared across threads mid-computation.
class Tape {
 public:
  /// Registers an input/parameter matrix. Leaves receive gradients too.
  ValueId leaf(Matrix value);

  ValueId matmul(ValueId a, ValueId b);
  ValueId add(ValueId a, ValueId b);
  /// a + row, where row is 1 x cols, broadcast over the rows of a.
  ValueId add_row(ValueId a, ValueId row);
  ValueId sub(ValueId a, ValueId b);
  /// Elementwise product.
  ValueId mul(ValueId a, ValueId b);
  ValueId scale(ValueId a, double c);
  ValueId tanh(ValueId a);
  ValueId exp(ValueId a);
  ValueId log(ValueId a);
  ValueId square(ValueId a);
  /// Sum of all entries, as a 1x1 matrix.
  ValueId sum(ValueId a);
  /// Mean of all entries, as a 1x1 matrix.
  ValueId mean(ValueId a);
  /// Temporal differencing applied independently to each contiguous block of
  /// `block` rows: within a block, out_t = in_t - in_{t-1} and the first row
  /// passes through (the Z_0 = 0 convention). rows % block must be 0.
  ValueId time_diff(ValueId a, std::size_t block);

  /// Computes all adjoints of a scalar (1x1) loss node.
  void backward(ValueId loss);

  const Matrix& value(ValueId id) const;
  /// Adjoint of the node; zero matrix if the node does not influence the loss.
  /// Only valid after backward().
  const Matrix& grad(ValueId id) const;

  /// Number of recorded nodes, leaves included.
  std::size_t size() const { return nodes_.size(); }
  /// Nodes visited by the last backward() call.
  std::size_t last_backward_visits() const { return last_backward_visits_; }

  void clear();

 private:
  enum class Op : std::uint8_t {
    kLeaf,
    kMatMul,
    kAdd,
    kAddRow,
    kSub,
    kMul,
    kScale,
    kTanh,
    kExp,
    kLog,
    kSquare,
    kSum,
    kMean,
    kTimeDiff,
  };

  struct Node {
    Op op;
    std::uint32_t a = UINT32_MAX;
    std::uint32_t b = UINT32_MAX;
    double c = 0.0;         // scale factor
    std::uint32_t block = 0;  // time_diff block length
    Matrix value;
    Matrix grad;
  };

  ValueId push(Node n);
  const Node& at(ValueId id) const;
  void check(ValueId id, const char* primitive) const;

  std::vector<Node> nodes_;
  bool grads_ready_ = false;
  std::size_t last_backward_visits_ = 0;
};

}  // namespace slowflow::ad
