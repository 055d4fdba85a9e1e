#include "miles/metrics.hpp"

#include <string>

#include "miles/errors.hpp"

namespace miles {

std::string_view to_string(MetricKind kind) {
  return kind == MetricKind::Accuracy ? "accuracy" : "macro_f1";
}

std::string_view to_string(Split split) {
  switch (split) {
    case Split::Train: return "train";
    case Split::Validation: return "val";
    case Split::Test: return "test";
  }
  return "?";
}

MetricKind parse_metric_kind(std::string_view text) {
  if (text == "accuracy") return MetricKind::Accuracy;
  if (text == "macro_f1") return MetricKind::MacroF1;
  throw ConfigError("unknown metric '" + std::string(text) + "' (expected accuracy|macro_f1)");
}

Split parse_split(std::string_view text) {
  if (text == "train") return Split::Train;
  if (text == "val" || text == "validation") return Split::Validation;
  if (text == "test") return Split::Test;
  throw ConfigError("unknown split '" + std::string(text) + "' (expected train|validation|test)");
}

namespace {

void check_pair(std::span<const int> predictions, std::span<const int> labels) {
  if (predictions.empty()) throw InputError("metric: empty input");
  if (predictions.size() != labels.size()) {
    throw InputError("metric: " + std::to_string(predictions.size()) + " predictions for " +
                     std::to_string(labels.size()) + " labels");
  }
}

}  // namespace

real accuracy(std::span<const int> predictions, std::span<const int> labels) {
  check_pair(predictions, labels);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) hits += predictions[i] == labels[i];
  return static_cast<real>(hits) / static_cast<real>(labels.size());
}

real macro_f1(std::span<const int> predictions, std::span<const int> labels, int classes) {
  check_pair(predictions, labels);
  if (classes < 2) throw InputError("macro_f1: need at least 2 classes");
  std::vector<long> true_pos(classes, 0), predicted(classes, 0), actual(classes, 0);
  auto in_range = [classes](int c) { return c >= 0 && c < classes; };
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int p = predictions[i];
    const int y = labels[i];
    if (!in_range(p) || !in_range(y)) {
      throw InputError("macro_f1: class index outside [0, " + std::to_string(classes) + ")");
    }
    ++predicted[p];
    ++actual[y];
    if (p == y) ++true_pos[p];
  }
  real sum = 0.0;
  for (int c = 0; c < classes; ++c) {
    // F1 = 2TP / (2TP + FP + FN) = 2TP / (predicted + actual)
    const long denom = predicted[c] + actual[c];
    if (denom > 0) sum += 2.0 * static_cast<real>(true_pos[c]) / static_cast<real>(denom);
  }
  return sum / static_cast<real>(classes);
}

real evaluate_metric(MetricKind kind, std::span<const int> predictions,
                     std::span<const int> labels, int classes) {
  return kind == MetricKind::Accuracy ? accuracy(predictions, labels)
                                      : macro_f1(predictions, labels, classes);
}

std::vector<int> argmax_rows(const Tensor& logits) {
  std::vector<int> out(static_cast<std::size_t>(logits.rows()));
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < logits.cols(); ++c) {
      if (logits(i, c) > logits(i, best)) best = c;
    }
    out[static_cast<std::size_t>(i)] = static_cast<int>(best);
  }
  return out;
}

}  // namespace miles
