#include "miles/tape.hpp"

#include <cmath>
#include <string>

#include "miles/errors.hpp"

namespace miles {

Var GradientTape::leaf(Tensor value) { return record(std::move(value), nullptr); }

Var GradientTape::record(Tensor value, Pullback pullback) {
  Tensor grad = Tensor::Zero(value.rows(), value.cols());
  nodes_.push_back(Node{std::move(value), std::move(grad), std::move(pullback)});
  return Var{nodes_.size() - 1};
}

void GradientTape::backward(Var loss) {
  const Tensor& out = nodes_.at(loss.id).value;
  if (out.rows() != 1 || out.cols() != 1) {
    throw ShapeError("backward: loss must be a scalar, got " + shape_string(out));
  }
  if (!std::isfinite(out(0, 0))) throw NumericError("backward: loss is not finite");

  for (auto& node : nodes_) node.grad.setZero();
  nodes_[loss.id].grad(0, 0) = 1.0;
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    Node& node = nodes_[i];
    // Ops never feed their own output back, so grad is stable during the call.
    if (node.pullback) node.pullback(*this, node.grad);
  }
}

Var dense(GradientTape& tape, Var x, Var weight, Var bias) {
  const Tensor& xv = tape.value(x);
  const Tensor& wv = tape.value(weight);
  const Tensor& bv = tape.value(bias);
  if (xv.cols() != wv.rows()) {
    throw ShapeError("dense: input " + shape_string(xv) + " incompatible with weight " +
                     shape_string(wv));
  }
  if (bv.rows() != 1 || bv.cols() != wv.cols()) {
    throw ShapeError("dense: bias " + shape_string(bv) + " incompatible with weight " +
                     shape_string(wv));
  }
  Tensor y = xv * wv;
  y.rowwise() += bv.row(0);
  return tape.record(std::move(y), [x, weight, bias](GradientTape& t, const Tensor& g) {
    t.accumulate(x, g * t.value(weight).transpose());
    t.accumulate(weight, t.value(x).transpose() * g);
    t.accumulate(bias, g.colwise().sum());
  });
}

Var relu(GradientTape& tape, Var x) {
  Tensor y = tape.value(x).cwiseMax(0.0);
  return tape.record(std::move(y), [x](GradientTape& t, const Tensor& g) {
    const Tensor mask = (t.value(x).array() > 0.0).cast<real>();
    t.accumulate(x, g.cwiseProduct(mask));
  });
}

Var concat_columns(GradientTape& tape, Var left, Var right) {
  const Tensor& lv = tape.value(left);
  const Tensor& rv = tape.value(right);
  if (lv.rows() != rv.rows()) {
    throw ShapeError("concat: row counts differ, " + shape_string(lv) + " vs " +
                     shape_string(rv));
  }
  Tensor y(lv.rows(), lv.cols() + rv.cols());
  y << lv, rv;
  const auto left_cols = lv.cols();
  const auto right_cols = rv.cols();
  return tape.record(std::move(y), [=](GradientTape& t, const Tensor& g) {
    t.accumulate(left, g.leftCols(left_cols));
    t.accumulate(right, g.rightCols(right_cols));
  });
}

Var add(GradientTape& tape, Var a, Var b) {
  const Tensor& av = tape.value(a);
  const Tensor& bv = tape.value(b);
  if (av.rows() != bv.rows() || av.cols() != bv.cols()) {
    throw ShapeError("add: " + shape_string(av) + " vs " + shape_string(bv));
  }
  return tape.record(av + bv, [a, b](GradientTape& t, const Tensor& g) {
    t.accumulate(a, g);
    t.accumulate(b, g);
  });
}

namespace {

void check_labels(const Tensor& logits, std::span<const int> labels) {
  if (logits.cols() < 2) {
    throw InputError("softmax_cross_entropy: need at least 2 classes, got " +
                     std::to_string(logits.cols()));
  }
  if (logits.rows() == 0 || static_cast<std::size_t>(logits.rows()) != labels.size()) {
    throw InputError("softmax_cross_entropy: " + std::to_string(labels.size()) +
                     " labels for logits " + shape_string(logits));
  }
  for (const int label : labels) {
    if (label < 0 || label >= logits.cols()) {
      throw InputError("softmax_cross_entropy: label " + std::to_string(label) +
                       " outside [0, " + std::to_string(logits.cols()) + ")");
    }
  }
}

// Row-wise softmax with max subtraction; also returns the mean loss.
real stable_softmax(const Tensor& logits, std::span<const int> labels, Tensor* probs) {
  real total = 0.0;
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const real peak = logits.row(i).maxCoeff();
    const RowVectorX<real> shifted = logits.row(i).array() - peak;
    const real log_norm = std::log(shifted.array().exp().sum());
    total += log_norm - shifted(labels[static_cast<std::size_t>(i)]);
    if (probs != nullptr) probs->row(i) = (shifted.array() - log_norm).exp();
  }
  return total / static_cast<real>(logits.rows());
}

}  // namespace

real softmax_cross_entropy_value(const Tensor& logits, std::span<const int> labels) {
  check_labels(logits, labels);
  return stable_softmax(logits, labels, nullptr);
}

Var softmax_cross_entropy(GradientTape& tape, Var logits, std::span<const int> labels) {
  const Tensor& lv = tape.value(logits);
  check_labels(lv, labels);
  Tensor probs(lv.rows(), lv.cols());
  const real loss = stable_softmax(lv, labels, &probs);
  std::vector<int> owned(labels.begin(), labels.end());
  Tensor out(1, 1);
  out(0, 0) = loss;
  return tape.record(std::move(out), [logits, probs = std::move(probs), owned = std::move(owned)](
                                         GradientTape& t, const Tensor& g) {
    Tensor d = probs;
    for (std::size_t i = 0; i < owned.size(); ++i) d(static_cast<Eigen::Index>(i), owned[i]) -= 1.0;
    d *= g(0, 0) / static_cast<real>(owned.size());
    t.accumulate(logits, d);
  });
}

}  // namespace miles
