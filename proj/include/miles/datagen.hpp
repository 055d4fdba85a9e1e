#ifndef MILES_DATAGEN_HPP
#define MILES_DATAGEN_HPP

#include <array>
#include <cstdint>
#include <filesystem>
#include <string_view>
#include <vector>

#include "miles/metrics.hpp"
#include "miles/tensor.hpp"

namespace miles {

enum class SignalMode : std::uint8_t { SharedSignal = 0, ComplementarySignal = 1 };

std::string_view to_string(SignalMode mode);
SignalMode parse_signal_mode(std::string_view text);

struct SyntheticSpec {
  SignalMode mode = SignalMode::SharedSignal;
  int classes = 10;
  int n_train = 2000;
  int n_val = 500;
  int n_test = 1000;
  int dim_a = 32;
  int dim_b = 32;
  real sigma_a = 0.3;
  real sigma_b = 1.2;
  bool nonlinear_b = true;
  /// Expected distance between two class prototypes of one modality.
  real prototype_scale = 3.0;
  /// ComplementarySignal factor sizes; classes must equal factor_a * factor_b.
  int factor_a = 2;
  int factor_b = 2;
  /// Largest / smallest class count. 1 gives stratified equal counts.
  real imbalance_ratio = 1.0;
  std::uint64_t seed = 7;

  void validate() const;
  int split_size(Split split) const;
};

struct SplitData {
  Tensor features_a;
  Tensor features_b;
  std::vector<int> labels;

  std::size_t size() const { return labels.size(); }
};

struct BimodalDataset {
  SyntheticSpec spec;
  std::array<SplitData, 3> splits;

  SplitData& split(Split s) { return splits[static_cast<std::size_t>(s)]; }
  const SplitData& split(Split s) const { return splits[static_cast<std::size_t>(s)]; }
};

/// Per-class sample counts for one split.
std::vector<int> class_counts(int n, int classes, real imbalance_ratio);

/// Pure function of the spec. Draw order from Rng(spec.seed): modality A
/// prototypes, modality B prototypes, the B map (if nonlinear), then for each
/// split in train/val/test order a label shuffle followed by per-sample A
/// and B noise.
BimodalDataset generate(const SyntheticSpec& spec);

/// MILESDS1 layout, all little-endian:
///   "MILESDS1"
///   u32 classes, dim_a, dim_b, n_train, n_val, n_test; u8 mode
///   for each split (train, val, test): A block then B block, f64 row-major
///   labels of train, val, test as u16
void save(const BimodalDataset& dataset, const std::filesystem::path& path);

/// Throws FormatError on a bad magic or header, CorruptionError when the
/// file is shorter than the header promises, IoError if it cannot be opened.
BimodalDataset load(const std::filesystem::path& path);

}  // namespace miles

#endif  // MILES_DATAGEN_HPP
