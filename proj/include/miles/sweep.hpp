#ifndef MILES_SWEEP_HPP
#define MILES_SWEEP_HPP

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "miles/experiment.hpp"

namespace miles {

struct SweepGrid {
  std::vector<real> taus;
  std::vector<real> mus;
  std::vector<std::uint64_t> seeds;

  /// Reads `sweep.tau`, `sweep.mu` and `sweep.seeds` (comma lists).
  static SweepGrid from_config(const KeyValueConfig& cfg, const RunConfig& base);
  std::size_t cell_count() const { return taus.size() * mus.size() * seeds.size(); }
};

struct SweepCell {
  real tau = 0.0;
  real mu = 0.0;
  std::uint64_t seed = 0;
  std::optional<RunSummary> summary;
  std::string error;
};

/// Medians over the seeds of one (tau, mu) pair that finished.
struct SweepRow {
  real tau = 0.0;
  real mu = 0.0;
  int runs = 0;
  real val_fused = 0.0;
  real test_fused = 0.0;
  real test_a = 0.0;
  real test_b = 0.0;
  real gap = 0.0;
};

struct SweepResult {
  /// Cell order: tau outermost, then mu, then seed.
  std::vector<SweepCell> cells;
  /// One row per (tau, mu) in grid order.
  std::vector<SweepRow> rows;
  /// Row with the highest median validation fused metric (earliest on ties);
  /// -1 when no cell finished.
  int best_row = -1;
};

/// Runs every (tau, mu, seed) cell of MILES on one shared dataset. Cells may
/// run on `threads` workers; results are stored by cell index. A failing
/// cell records its error and does not stop the others. When
/// base.output_dir is set each cell writes cell_<index>.csv there.
SweepResult sweep(const RunConfig& base, const SweepGrid& grid, unsigned threads = 0);

void write_sweep_csv(const SweepResult& result, std::ostream& out);

/// Median; the mean of the two middle values for even counts.
real median(std::vector<real> values);

struct CompareRow {
  std::string method;
  int runs = 0;
  real fused = 0.0;
  real a = 0.0;
  real b = 0.0;
  real gap = 0.0;
};

/// Vanilla, MSLR-K/S/D, MSES and MILES on one dataset; per method the
/// median over seeds of the best-epoch test metrics.
std::vector<CompareRow> compare_methods(const RunConfig& base, std::span<const std::uint64_t> seeds,
                                        unsigned threads = 0);

/// Columns: method,M_fused,M_A,M_B,gap
void write_compare_csv(std::span<const CompareRow> rows, std::ostream& out);

}  // namespace miles

#endif  // MILES_SWEEP_HPP
