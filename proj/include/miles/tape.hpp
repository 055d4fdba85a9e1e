#ifndef MILES_TAPE_HPP
#define MILES_TAPE_HPP

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "miles/tensor.hpp"

namespace miles {

class GradientTape;

/// Handle to a value recorded on a GradientTape.
struct Var {
  std::size_t id = 0;
};

/// Records operations in execution order and replays their pullbacks in
/// reverse. Node ids are assigned in recording order, so reverse id order is
/// a valid topological order and every node is visited exactly once.
class GradientTape {
 public:
  /// Receives the gradient of the node and accumulates into its inputs.
  using Pullback = std::function<void(GradientTape&, const Tensor& grad_out)>;

  GradientTape() = default;
  GradientTape(const GradientTape&) = delete;
  GradientTape& operator=(const GradientTape&) = delete;

  /// Records an input. Leaves have no pullback; parameters are leaves.
  Var leaf(Tensor value);
  Var record(Tensor value, Pullback pullback);

  const Tensor& value(Var v) const { return nodes_[v.id].value; }
  const Tensor& grad(Var v) const { return nodes_[v.id].grad; }
  std::size_t size() const { return nodes_.size(); }

  template <typename Derived>
  void accumulate(Var v, const Eigen::MatrixBase<Derived>& delta) {
    nodes_[v.id].grad += delta;
  }

  /// Seeds d(loss)/d(loss) = 1 and propagates to every node recorded before
  /// `loss`. Gradients from a previous call are discarded first.
  /// Throws ShapeError if loss is not 1x1 and NumericError if it is not finite.
  void backward(Var loss);

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    Pullback pullback;
  };
  std::vector<Node> nodes_;
};

/// y = x W + b with b broadcast across rows (b is 1 x d_out).
Var dense(GradientTape& tape, Var x, Var weight, Var bias);
Var relu(GradientTape& tape, Var x);
/// Columns of `left` followed by columns of `right`.
Var concat_columns(GradientTape& tape, Var left, Var right);
Var add(GradientTape& tape, Var a, Var b);

/// Mean over rows of -log softmax(logits)[label]. Returns a 1x1 node.
Var softmax_cross_entropy(GradientTape& tape, Var logits, std::span<const int> labels);

/// Loss value only, no tape. Same arithmetic as the recorded op.
real softmax_cross_entropy_value(const Tensor& logits, std::span<const int> labels);

}  // namespace miles

#endif  // MILES_TAPE_HPP
