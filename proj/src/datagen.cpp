#include "miles/datagen.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <numeric>
#include <string>

#include "miles/errors.hpp"
#include "miles/rng.hpp"

namespace miles {

std::string_view to_string(SignalMode mode) {
  return mode == SignalMode::SharedSignal ? "shared" : "complementary";
}

SignalMode parse_signal_mode(std::string_view text) {
  if (text == "shared") return SignalMode::SharedSignal;
  if (text == "complementary") return SignalMode::ComplementarySignal;
  throw ConfigError("unknown data mode '" + std::string(text) + "' (expected shared|complementary)");
}

void SyntheticSpec::validate() const {
  if (classes < 2) throw ConfigError("data: classes must be >= 2");
  if (classes > 65535) throw ConfigError("data: classes must fit in 16 bits");
  if (dim_a < 1 || dim_b < 1) throw ConfigError("data: dimensions must be >= 1");
  if (n_train < 1 || n_val < 1 || n_test < 1) throw ConfigError("data: split sizes must be >= 1");
  if (!(sigma_a >= 0.0) || !(sigma_b >= 0.0)) throw ConfigError("data: sigma must be >= 0");
  if (!(prototype_scale > 0.0)) throw ConfigError("data: prototype_scale must be positive");
  if (!(imbalance_ratio >= 1.0)) throw ConfigError("data: imbalance_ratio must be >= 1");
  if (mode == SignalMode::ComplementarySignal) {
    if (factor_a < 2 || factor_b < 2 || factor_a * factor_b != classes) {
      throw ConfigError("data: complementary mode needs classes = factor_a * factor_b with "
                        "factors >= 2, got " + std::to_string(classes) + " = " +
                        std::to_string(factor_a) + " x " + std::to_string(factor_b));
    }
  }
}

int SyntheticSpec::split_size(Split split) const {
  switch (split) {
    case Split::Train: return n_train;
    case Split::Validation: return n_val;
    case Split::Test: return n_test;
  }
  return 0;
}

std::vector<int> class_counts(int n, int classes, real imbalance_ratio) {
  std::vector<int> counts(static_cast<std::size_t>(classes), n / classes);
  if (imbalance_ratio == 1.0) {
    for (int c = 0; c < n % classes; ++c) ++counts[static_cast<std::size_t>(c)];
    return counts;
  }
  // Geometric decay from class 0 down to 1/ratio; largest remainders first.
  std::vector<real> weight(counts.size());
  for (int c = 0; c < classes; ++c) {
    weight[static_cast<std::size_t>(c)] =
        std::pow(imbalance_ratio, -static_cast<real>(c) / static_cast<real>(classes - 1));
  }
  const real total = std::accumulate(weight.begin(), weight.end(), 0.0);
  std::vector<real> remainder(counts.size());
  int assigned = 0;
  for (std::size_t c = 0; c < counts.size(); ++c) {
    const real exact = static_cast<real>(n) * weight[c] / total;
    counts[c] = static_cast<int>(std::floor(exact));
    remainder[c] = exact - counts[c];
    assigned += counts[c];
  }
  std::vector<std::size_t> order(counts.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t l, std::size_t r) { return remainder[l] > remainder[r]; });
  for (int k = 0; k < n - assigned; ++k) ++counts[order[static_cast<std::size_t>(k)]];
  return counts;
}

namespace {

// Rows are prototypes; E|p_i - p_j|^2 = scale^2.
Tensor draw_prototypes(Rng& rng, int count, int dim, real scale) {
  const real sd = scale / std::sqrt(2.0 * dim);
  Tensor p(count, dim);
  for (Eigen::Index i = 0; i < p.size(); ++i) p.data()[i] = sd * rng.normal();
  return p;
}

real mean_pairwise_distance(const Tensor& p) {
  real sum = 0.0;
  int pairs = 0;
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    for (Eigen::Index j = i + 1; j < p.rows(); ++j) {
      sum += (p.row(i) - p.row(j)).norm();
      ++pairs;
    }
  }
  return pairs > 0 ? sum / pairs : 0.0;
}

// tanh(M p) with M ~ N(0, 1/dim) applied to unit-variance inputs, then
// rescaled so the mean prototype distance matches the untransformed set.
Tensor warp_prototypes(Rng& rng, const Tensor& prototypes, real scale) {
  const auto dim = prototypes.cols();
  Tensor map(dim, dim);
  for (Eigen::Index i = 0; i < map.size(); ++i) {
    map.data()[i] = rng.normal() / std::sqrt(static_cast<real>(dim));
  }
  const real unit = std::sqrt(2.0 * static_cast<real>(dim)) / scale;
  Tensor warped = ((prototypes * unit) * map.transpose()).array().tanh().matrix();
  const real before = mean_pairwise_distance(prototypes);
  const real after = mean_pairwise_distance(warped);
  if (after > 0.0) warped *= before / after;
  return warped;
}

SplitData draw_split(Rng& rng, const SyntheticSpec& spec, int n, const Tensor& protos_a,
                     const Tensor& protos_b) {
  SplitData out;
  const auto counts = class_counts(n, spec.classes, spec.imbalance_ratio);
  out.labels.reserve(static_cast<std::size_t>(n));
  for (int c = 0; c < spec.classes; ++c) {
    out.labels.insert(out.labels.end(), static_cast<std::size_t>(counts[static_cast<std::size_t>(c)]), c);
  }
  rng.shuffle(std::span<int>(out.labels));

  out.features_a.resize(n, spec.dim_a);
  out.features_b.resize(n, spec.dim_b);
  const bool complementary = spec.mode == SignalMode::ComplementarySignal;
  for (int i = 0; i < n; ++i) {
    const int y = out.labels[static_cast<std::size_t>(i)];
    const int row_a = complementary ? y / spec.factor_b : y;
    const int row_b = complementary ? y % spec.factor_b : y;
    for (int k = 0; k < spec.dim_a; ++k) {
      out.features_a(i, k) = protos_a(row_a, k) + spec.sigma_a * rng.normal();
    }
    for (int k = 0; k < spec.dim_b; ++k) {
      out.features_b(i, k) = protos_b(row_b, k) + spec.sigma_b * rng.normal();
    }
  }
  return out;
}

}  // namespace

BimodalDataset generate(const SyntheticSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  const bool complementary = spec.mode == SignalMode::ComplementarySignal;
  const int count_a = complementary ? spec.factor_a : spec.classes;
  const int count_b = complementary ? spec.factor_b : spec.classes;
  const Tensor protos_a = draw_prototypes(rng, count_a, spec.dim_a, spec.prototype_scale);
  Tensor protos_b = draw_prototypes(rng, count_b, spec.dim_b, spec.prototype_scale);
  if (spec.nonlinear_b) protos_b = warp_prototypes(rng, protos_b, spec.prototype_scale);

  BimodalDataset ds;
  ds.spec = spec;
  for (Split s : {Split::Train, Split::Validation, Split::Test}) {
    ds.split(s) = draw_split(rng, spec, spec.split_size(s), protos_a, protos_b);
  }
  return ds;
}

namespace {

constexpr char kMagic[8] = {'M', 'I', 'L', 'E', 'S', 'D', 'S', '1'};
constexpr std::array<Split, 3> kSplitOrder = {Split::Train, Split::Validation, Split::Test};

class LeWriter {
 public:
  explicit LeWriter(std::ostream& out) : out_(out) {}

  void bytes(const void* data, std::size_t n) {
    out_.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
  }
  template <typename U>
  void uint(U value) {
    unsigned char buf[sizeof(U)];
    for (std::size_t i = 0; i < sizeof(U); ++i) buf[i] = static_cast<unsigned char>(value >> (8 * i));
    bytes(buf, sizeof(U));
  }
  void f64(double value) { uint(std::bit_cast<std::uint64_t>(value)); }

 private:
  std::ostream& out_;
};

class LeReader {
 public:
  LeReader(std::istream& in, const std::filesystem::path& path) : in_(in), path_(path) {}

  void bytes(void* data, std::size_t n) {
    in_.read(static_cast<char*>(data), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n) {
      throw CorruptionError("load: " + path_.string() + " is truncated");
    }
  }
  template <typename U>
  U uint() {
    unsigned char buf[sizeof(U)];
    bytes(buf, sizeof(U));
    U value = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) value |= static_cast<U>(static_cast<U>(buf[i]) << (8 * i));
    return value;
  }
  double f64() { return std::bit_cast<double>(uint<std::uint64_t>()); }

 private:
  std::istream& in_;
  const std::filesystem::path& path_;
};

}  // namespace

void save(const BimodalDataset& dataset, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("save: cannot open " + path.string() + " for writing");
  const SyntheticSpec& spec = dataset.spec;
  if (spec.classes > 65535) throw ConfigError("save: classes must fit in 16 bits");

  LeWriter w(out);
  w.bytes(kMagic, sizeof(kMagic));
  w.uint<std::uint32_t>(static_cast<std::uint32_t>(spec.classes));
  w.uint<std::uint32_t>(static_cast<std::uint32_t>(spec.dim_a));
  w.uint<std::uint32_t>(static_cast<std::uint32_t>(spec.dim_b));
  for (Split s : kSplitOrder) w.uint<std::uint32_t>(static_cast<std::uint32_t>(dataset.split(s).size()));
  w.uint<std::uint8_t>(static_cast<std::uint8_t>(spec.mode));
  for (Split s : kSplitOrder) {
    const SplitData& d = dataset.split(s);
    for (Eigen::Index i = 0; i < d.features_a.size(); ++i) w.f64(d.features_a.data()[i]);
    for (Eigen::Index i = 0; i < d.features_b.size(); ++i) w.f64(d.features_b.data()[i]);
  }
  for (Split s : kSplitOrder) {
    for (int label : dataset.split(s).labels) w.uint<std::uint16_t>(static_cast<std::uint16_t>(label));
  }
  out.flush();
  if (!out) throw IoError("save: write to " + path.string() + " failed");
}

BimodalDataset load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("load: cannot open " + path.string());
  LeReader r(in, path);

  char magic[8] = {};
  in.read(magic, sizeof(magic));
  if (in.gcount() != static_cast<std::streamsize>(sizeof(magic)) ||
      !std::equal(std::begin(magic), std::end(magic), std::begin(kMagic))) {
    throw FormatError("load: " + path.string() + " is not a MILESDS1 file");
  }

  BimodalDataset ds;
  SyntheticSpec& spec = ds.spec;
  spec.classes = static_cast<int>(r.uint<std::uint32_t>());
  spec.dim_a = static_cast<int>(r.uint<std::uint32_t>());
  spec.dim_b = static_cast<int>(r.uint<std::uint32_t>());
  spec.n_train = static_cast<int>(r.uint<std::uint32_t>());
  spec.n_val = static_cast<int>(r.uint<std::uint32_t>());
  spec.n_test = static_cast<int>(r.uint<std::uint32_t>());
  const auto mode = r.uint<std::uint8_t>();
  if (mode > 1) throw FormatError("load: unknown mode byte " + std::to_string(mode));
  spec.mode = static_cast<SignalMode>(mode);
  if (spec.classes < 2 || spec.classes > 65535 || spec.dim_a < 1 || spec.dim_b < 1 ||
      spec.n_train < 0 || spec.n_val < 0 || spec.n_test < 0) {
    throw FormatError("load: implausible header in " + path.string());
  }

  // Compare the promised payload against the file length before allocating.
  const auto header_end = in.tellg();
  in.seekg(0, std::ios::end);
  const auto file_end = in.tellg();
  in.seekg(header_end);
  std::uintmax_t samples = 0, feature_values = 0;
  for (Split s : kSplitOrder) {
    const auto n = static_cast<std::uintmax_t>(spec.split_size(s));
    samples += n;
    feature_values += n * static_cast<std::uintmax_t>(spec.dim_a + spec.dim_b);
  }
  if (static_cast<std::uintmax_t>(file_end - header_end) < 8 * feature_values + 2 * samples) {
    throw CorruptionError("load: " + path.string() + " is shorter than its header promises");
  }

  for (Split s : kSplitOrder) {
    SplitData& d = ds.split(s);
    const int n = spec.split_size(s);
    d.features_a.resize(n, spec.dim_a);
    d.features_b.resize(n, spec.dim_b);
    for (Eigen::Index i = 0; i < d.features_a.size(); ++i) d.features_a.data()[i] = r.f64();
    for (Eigen::Index i = 0; i < d.features_b.size(); ++i) d.features_b.data()[i] = r.f64();
  }
  for (Split s : kSplitOrder) {
    SplitData& d = ds.split(s);
    d.labels.resize(static_cast<std::size_t>(spec.split_size(s)));
    for (int& label : d.labels) {
      label = r.uint<std::uint16_t>();
      if (label >= spec.classes) {
        throw FormatError("load: label " + std::to_string(label) + " outside class range");
      }
    }
  }
  return ds;
}

}  // namespace miles
