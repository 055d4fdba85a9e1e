#include "miles/sweep.hpp"

#include <algorithm>
#include <atomic>
#include <functional>
#include <ostream>
#include <thread>

#include "miles/errors.hpp"

namespace miles {

SweepGrid SweepGrid::from_config(const KeyValueConfig& cfg, const RunConfig& base) {
  SweepGrid grid;
  grid.taus = cfg.get_real_list("sweep.tau", {base.scheduler.miles.tau});
  grid.mus = cfg.get_real_list("sweep.mu", {base.scheduler.miles.mu});
  for (long long s : cfg.get_int_list("sweep.seeds", {static_cast<long long>(base.seed)})) {
    grid.seeds.push_back(static_cast<std::uint64_t>(s));
  }
  if (grid.taus.empty() || grid.mus.empty() || grid.seeds.empty()) {
    throw ConfigError("sweep: tau, mu and seed lists must be nonempty");
  }
  return grid;
}

real median(std::vector<real> values) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const std::size_t mid = values.size() / 2;
  return values.size() % 2 ? values[mid] : 0.5 * (values[mid - 1] + values[mid]);
}

namespace {

// Runs job(i) for i in [0, count) on up to `threads` workers.
void parallel_for(std::size_t count, unsigned threads, const std::function<void(std::size_t)>& job) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, count));
  if (threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) job(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> workers;
  for (unsigned t = 0; t < threads; ++t) {
    workers.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) job(i);
    });
  }
}

}  // namespace

SweepResult sweep(const RunConfig& base, const SweepGrid& grid, unsigned threads) {
  if (grid.cell_count() == 0) throw ConfigError("sweep: empty grid");
  const BimodalDataset dataset = load_or_generate(base);

  SweepResult result;
  for (real tau : grid.taus) {
    for (real mu : grid.mus) {
      for (std::uint64_t seed : grid.seeds) result.cells.push_back({tau, mu, seed, std::nullopt, {}});
    }
  }
  if (!base.output_dir.empty()) std::filesystem::create_directories(base.output_dir);

  parallel_for(result.cells.size(), threads, [&](std::size_t i) {
    SweepCell& cell = result.cells[i];
    try {
      RunConfig rc = base;
      rc.scheduler.kind = SchedulerKind::Miles;
      rc.scheduler.miles.tau = cell.tau;
      rc.scheduler.miles.mu = cell.mu;
      rc.seed = cell.seed;
      const RunLog log = run_experiment(rc, dataset);
      if (!base.output_dir.empty()) {
        write_runlog_csv(log, base.output_dir / ("cell_" + std::to_string(i) + ".csv"));
      }
      if (log.abort_reason) {
        cell.error = *log.abort_reason;
      } else {
        cell.summary = summarize(log, base.stronger);
      }
    } catch (const std::exception& e) {
      cell.error = e.what();
    }
  });

  const std::size_t per_row = grid.seeds.size();
  for (std::size_t r = 0; r * per_row < result.cells.size(); ++r) {
    SweepRow row;
    row.tau = result.cells[r * per_row].tau;
    row.mu = result.cells[r * per_row].mu;
    std::vector<real> val, fused, a, b, gap;
    for (std::size_t k = 0; k < per_row; ++k) {
      const SweepCell& c = result.cells[r * per_row + k];
      if (!c.summary) continue;
      val.push_back(c.summary->val_fused);
      fused.push_back(c.summary->test_fused);
      a.push_back(c.summary->test_a);
      b.push_back(c.summary->test_b);
      gap.push_back(c.summary->gap);
    }
    row.runs = static_cast<int>(val.size());
    row.val_fused = median(val);
    row.test_fused = median(fused);
    row.test_a = median(a);
    row.test_b = median(b);
    row.gap = median(gap);
    if (row.runs > 0 && (result.best_row < 0 ||
                         row.val_fused > result.rows[static_cast<std::size_t>(result.best_row)].val_fused)) {
      result.best_row = static_cast<int>(result.rows.size());
    }
    result.rows.push_back(row);
  }
  return result;
}

void write_sweep_csv(const SweepResult& result, std::ostream& out) {
  out << "tau,mu,runs,val_fused,test_fused,test_A,test_B,gap,best\n";
  for (std::size_t i = 0; i < result.rows.size(); ++i) {
    const SweepRow& r = result.rows[i];
    out << format_real(r.tau) << ',' << format_real(r.mu) << ',' << r.runs << ','
        << format_real(r.val_fused) << ',' << format_real(r.test_fused) << ','
        << format_real(r.test_a) << ',' << format_real(r.test_b) << ',' << format_real(r.gap)
        << ',' << (static_cast<int>(i) == result.best_row ? 1 : 0) << '\n';
  }
}

std::vector<CompareRow> compare_methods(const RunConfig& base, std::span<const std::uint64_t> seeds,
                                        unsigned threads) {
  if (seeds.empty()) throw ConfigError("compare: need at least one seed");
  const BimodalDataset dataset = load_or_generate(base);
  const std::array<SchedulerKind, 6> methods = {SchedulerKind::Vanilla, SchedulerKind::MslrK,
                                                SchedulerKind::MslrS,   SchedulerKind::MslrD,
                                                SchedulerKind::Mses,    SchedulerKind::Miles};
  std::vector<std::optional<RunSummary>> summaries(methods.size() * seeds.size());
  std::vector<std::string> errors(summaries.size());
  parallel_for(summaries.size(), threads, [&](std::size_t i) {
    RunConfig rc = base;
    rc.scheduler.kind = methods[i / seeds.size()];
    rc.seed = seeds[i % seeds.size()];
    try {
      const RunLog log = run_experiment(rc, dataset);
      if (log.abort_reason) {
        errors[i] = *log.abort_reason;
      } else {
        summaries[i] = summarize(log, base.stronger);
      }
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  });

  std::vector<CompareRow> rows;
  for (std::size_t m = 0; m < methods.size(); ++m) {
    CompareRow row;
    row.method = std::string(to_string(methods[m]));
    std::vector<real> fused, a, b, gap;
    for (std::size_t k = 0; k < seeds.size(); ++k) {
      const auto& s = summaries[m * seeds.size() + k];
      if (!s) continue;
      fused.push_back(s->test_fused);
      a.push_back(s->test_a);
      b.push_back(s->test_b);
      gap.push_back(s->gap);
    }
    if (fused.empty()) {
      throw Error("compare: every run of " + row.method + " failed: " + errors[m * seeds.size()]);
    }
    row.runs = static_cast<int>(fused.size());
    row.fused = median(fused);
    row.a = median(a);
    row.b = median(b);
    row.gap = median(gap);
    rows.push_back(row);
  }
  return rows;
}

void write_compare_csv(std::span<const CompareRow> rows, std::ostream& out) {
  out << "method,M_fused,M_A,M_B,gap\n";
  for (const CompareRow& r : rows) {
    out << r.method << ',' << format_real(r.fused) << ',' << format_real(r.a) << ','
        << format_real(r.b) << ',' << format_real(r.gap) << '\n';
  }
}

}  // namespace miles
