#ifndef MILES_METRICS_HPP
#define MILES_METRICS_HPP

#include <cmath>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "miles/tensor.hpp"

namespace miles {

enum class MetricKind { Accuracy, MacroF1 };
enum class Split { Train, Validation, Test };

std::string_view to_string(MetricKind kind);
std::string_view to_string(Split split);
MetricKind parse_metric_kind(std::string_view text);
Split parse_split(std::string_view text);

/// Fraction of exact matches. Throws InputError on empty or unequal inputs.
real accuracy(std::span<const int> predictions, std::span<const int> labels);

/// Unweighted mean of per-class F1 over all `classes` classes. A class that is
/// neither present nor predicted contributes 0.
real macro_f1(std::span<const int> predictions, std::span<const int> labels, int classes);

real evaluate_metric(MetricKind kind, std::span<const int> predictions,
                     std::span<const int> labels, int classes);

/// Row-wise argmax; ties resolve to the lowest class index.
std::vector<int> argmax_rows(const Tensor& logits);

template <typename Scalar>
struct Utilization {
  Scalar u_a{};
  Scalar u_b{};
};

/// u_A = (M_AB - M_B) / M_AB and u_B = (M_AB - M_A) / M_AB. A zero fused
/// metric gives (0, 0).
template <typename Scalar>
Utilization<Scalar> conditional_utilization(Scalar fused, Scalar metric_a, Scalar metric_b) {
  if (fused == Scalar(0)) return {Scalar(0), Scalar(0)};
  return {(fused - metric_b) / fused, (fused - metric_a) / fused};
}

template <typename Scalar>
Scalar utilization_delta(Scalar u_a, Scalar u_b) {
  using std::abs;
  return abs(u_a - u_b);
}

/// Designated-stronger encoder metric minus the other one; keeps the sign.
template <typename Scalar>
Scalar encoder_gap(Scalar stronger, Scalar weaker) {
  return stronger - weaker;
}

}  // namespace miles

#endif  // MILES_METRICS_HPP
