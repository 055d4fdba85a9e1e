#include <algorithm>
#include <cmath>
#include <vector>

#include <doctest.h>

#include "miles/errors.hpp"
#include "miles/metrics.hpp"
#include "miles/rng.hpp"

using namespace miles;

TEST_CASE("accuracy") {
  const std::vector<int> labels = {0, 1, 2, 1};
  CHECK(accuracy(labels, labels) == 1.0);
  CHECK(accuracy(std::vector<int>{1, 2, 0, 0}, labels) == 0.0);
  CHECK(accuracy(std::vector<int>{0, 1, 2, 0}, labels) == 0.75);
  CHECK_THROWS_AS(accuracy(std::vector<int>{}, std::vector<int>{}), InputError);
  CHECK_THROWS_AS(accuracy(std::vector<int>{0}, labels), InputError);
}

TEST_CASE("macro F1") {
  CHECK(macro_f1(std::vector<int>{0, 1, 2}, std::vector<int>{0, 1, 2}, 3) == 1.0);
  // class 0: P=1, R=1/2 -> 2/3; class 1: P=2/3, R=1 -> 4/5
  const double m = macro_f1(std::vector<int>{0, 1, 1, 1}, std::vector<int>{0, 0, 1, 1}, 2);
  CHECK(m == doctest::Approx(11.0 / 15.0).epsilon(1e-15));
  // Class 2 absent and never predicted contributes 0.
  const std::vector<int> labels = {0, 0, 1, 1};
  const std::vector<int> preds = {0, 1, 1, 1};
  CHECK(macro_f1(preds, labels, 3) == doctest::Approx((2.0 / 3.0 + 4.0 / 5.0 + 0.0) / 3.0));
  CHECK(macro_f1(labels, labels, 3) < 1.0);
  CHECK_THROWS_AS(macro_f1(std::vector<int>{}, std::vector<int>{}, 2), InputError);
  CHECK_THROWS_AS(macro_f1(std::vector<int>{5}, std::vector<int>{0}, 2), InputError);
}

TEST_CASE("metrics are bounded, permutation invariant, and F1 = 1 only for perfect predictions") {
  Rng rng(8);
  for (int trial = 0; trial < 300; ++trial) {
    const int classes = 2 + static_cast<int>(rng.below(4));
    const std::size_t n = 1 + rng.below(30);
    std::vector<int> labels(n), preds(n);
    for (std::size_t i = 0; i < n; ++i) {
      labels[i] = static_cast<int>(rng.below(static_cast<std::uint64_t>(classes)));
      preds[i] = rng.uniform() < 0.5 ? labels[i]
                                     : static_cast<int>(rng.below(static_cast<std::uint64_t>(classes)));
    }
    const double acc = accuracy(preds, labels);
    const double f1 = macro_f1(preds, labels, classes);
    CHECK((acc >= 0.0 && acc <= 1.0));
    CHECK((f1 >= 0.0 && f1 <= 1.0));

    bool all_present = true;
    for (int c = 0; c < classes; ++c) {
      all_present &= std::find(labels.begin(), labels.end(), c) != labels.end();
    }
    CHECK((f1 == 1.0) == (preds == labels && all_present));

    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;
    rng.shuffle(std::span<std::size_t>(perm));
    std::vector<int> pl(n), pp(n);
    for (std::size_t i = 0; i < n; ++i) {
      pl[i] = labels[perm[i]];
      pp[i] = preds[perm[i]];
    }
    CHECK(accuracy(pp, pl) == acc);
    CHECK(macro_f1(pp, pl, classes) == doctest::Approx(f1).epsilon(1e-15));
  }
}

TEST_CASE("conditional utilization examples") {
  auto u = conditional_utilization(0.8, 0.6, 0.4);
  CHECK(u.u_a == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(u.u_b == doctest::Approx(0.25).epsilon(1e-15));
  u = conditional_utilization(0.9, 0.9, 0.9);
  CHECK(u.u_a == 0.0);
  CHECK(u.u_b == 0.0);
  u = conditional_utilization(0.5, 0.7, 0.6);
  CHECK(u.u_a == doctest::Approx(-0.2).epsilon(1e-14));
  CHECK(u.u_b == doctest::Approx(-0.4).epsilon(1e-14));
  u = conditional_utilization(0.0, 0.4, 0.3);
  CHECK(u.u_a == 0.0);
  CHECK(u.u_b == 0.0);
  // The delta bound is not enforced: a strong unimodal head can push it past 1.
  u = conditional_utilization(0.4, 1.0, 0.0);
  CHECK(utilization_delta(u.u_a, u.u_b) == doctest::Approx(2.5));
  // Works for other scalar types too.
  const auto uf = conditional_utilization(0.8f, 0.6f, 0.4f);
  CHECK(uf.u_a == doctest::Approx(0.5f));
}

TEST_CASE("utilization delta") {
  CHECK(utilization_delta(0.5, 0.25) == 0.25);
  CHECK(utilization_delta(0.37, 0.37) == 0.0);
  CHECK(utilization_delta(-0.2, -0.4) == doctest::Approx(0.2).epsilon(1e-15));
  CHECK(utilization_delta(-0.4, -0.2) == utilization_delta(-0.2, -0.4));
}

TEST_CASE("encoder gap keeps the sign") {
  CHECK(encoder_gap(0.6, 0.4) == doctest::Approx(0.2));
  CHECK(encoder_gap(0.5, 0.5) == 0.0);
  CHECK(encoder_gap(0.599, 0.608) == doctest::Approx(-0.009).epsilon(1e-12));
}

TEST_CASE("argmax picks the first maximum") {
  const Tensor logits{{0.1, 0.5, 0.5}, {2.0, 1.0, 0.0}, {0.0, 0.0, 0.0}};
  CHECK(argmax_rows(logits) == std::vector<int>{1, 0, 0});
}

TEST_CASE("enum parsing") {
  CHECK(parse_metric_kind("macro_f1") == MetricKind::MacroF1);
  CHECK(parse_split("validation") == Split::Validation);
  CHECK(parse_split("val") == Split::Validation);
  CHECK_THROWS_AS(parse_metric_kind("auroc"), ConfigError);
}
