#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <regex>
#include <sstream>
#include <string>
#include <vector>

#include <doctest.h>

#include "miles/errors.hpp"
#include "miles/experiment.hpp"
#include "miles/svg_plot.hpp"
#include "miles/sweep.hpp"

using namespace miles;
namespace fs = std::filesystem;

namespace {

RunConfig tiny(SchedulerKind kind = SchedulerKind::Miles, int epochs = 5) {
  RunConfig rc;
  rc.data.classes = 4;
  rc.data.n_train = 160;
  rc.data.n_val = 48;
  rc.data.n_test = 48;
  rc.data.dim_a = 6;
  rc.data.dim_b = 5;
  rc.data.seed = 11;
  rc.model.hidden_a = {8};
  rc.model.hidden_b = {8};
  rc.model.latent_a = 4;
  rc.model.latent_b = 4;
  rc.scheduler.kind = kind;
  rc.epochs = epochs;
  rc.batch_size = 32;
  rc.lr = 5e-3;
  return rc;
}

std::string csv_of(const RunLog& log) {
  std::ostringstream out;
  write_runlog_csv(log, out);
  return out.str();
}

bool same_bits(double x, double y) { return std::memcmp(&x, &y, sizeof x) == 0; }

// Every trained quantity, ignoring the scheduler's bookkeeping columns.
bool same_training(const RunLog& x, const RunLog& y) {
  if (x.epochs.size() != y.epochs.size()) return false;
  for (std::size_t e = 0; e < x.epochs.size(); ++e) {
    const EpochRecord& a = x.epochs[e];
    const EpochRecord& b = y.epochs[e];
    for (std::size_t s = 0; s < 3; ++s) {
      if (!same_bits(a.metrics[s].fused, b.metrics[s].fused) || !same_bits(a.metrics[s].a, b.metrics[s].a) ||
          !same_bits(a.metrics[s].b, b.metrics[s].b) || !same_bits(a.loss[s].total, b.loss[s].total) ||
          !same_bits(a.loss[s].fused, b.loss[s].fused) || !same_bits(a.loss[s].a, b.loss[s].a) ||
          !same_bits(a.loss[s].b, b.loss[s].b)) {
        return false;
      }
    }
    if (!same_bits(a.alpha_a, b.alpha_a) || !same_bits(a.alpha_b, b.alpha_b)) return false;
  }
  return true;
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

// Minimal well-formedness check: every element closes in order.
bool balanced_xml(const std::string& text) {
  std::vector<std::string> stack;
  std::size_t pos = 0;
  while ((pos = text.find('<', pos)) != std::string::npos) {
    const std::size_t end = text.find('>', pos);
    if (end == std::string::npos) return false;
    const std::string tag = text.substr(pos + 1, end - pos - 1);
    pos = end + 1;
    if (tag.empty()) return false;
    if (tag[0] == '?' || tag[0] == '!') continue;
    if (tag[0] == '/') {
      if (stack.empty() || stack.back() != tag.substr(1)) return false;
      stack.pop_back();
      continue;
    }
    if (tag.back() == '/') continue;
    stack.push_back(tag.substr(0, tag.find_first_of(" \n\t")));
  }
  return stack.empty();
}

std::vector<std::pair<double, double>> polyline_points(const std::string& svg, const std::string& label) {
  const std::string key = "data-label=\"" + label + "\"";
  const std::size_t at = svg.find(key);
  REQUIRE(at != std::string::npos);
  const std::size_t p = svg.find("points=\"", at) + 8;
  const std::string pts = svg.substr(p, svg.find('"', p) - p);
  std::vector<std::pair<double, double>> out;
  std::istringstream in(pts);
  for (std::string pair; in >> pair;) {
    const auto comma = pair.find(',');
    out.emplace_back(std::stod(pair.substr(0, comma)), std::stod(pair.substr(comma + 1)));
  }
  return out;
}

std::size_t count_of(const std::string& text, const std::string& needle) {
  std::size_t n = 0;
  for (std::size_t p = text.find(needle); p != std::string::npos; p = text.find(needle, p + 1)) ++n;
  return n;
}

}  // namespace

TEST_CASE("one record per epoch with consistent rate bookkeeping") {
  const RunConfig rc = tiny(SchedulerKind::Miles, 6);
  const RunLog log = run_experiment(rc);
  REQUIRE(log.epochs.size() == 6);
  CHECK_FALSE(log.abort_reason);
  CHECK(log.epochs.front().alpha_a == rc.lr);
  CHECK(log.epochs.front().alpha_b == rc.lr);
  for (std::size_t e = 0; e < log.epochs.size(); ++e) {
    const EpochRecord& r = log.epochs[e];
    CHECK(r.epoch == static_cast<int>(e) + 1);
    CHECK(r.alpha_ab == rc.lr);
    const HeadMetrics& obs = r.metrics[static_cast<std::size_t>(Split::Validation)];
    const auto u = conditional_utilization(obs.fused, obs.a, obs.b);
    CHECK(r.u_a == u.u_a);
    CHECK(r.u_b == u.u_b);
    CHECK(r.delta == std::abs(u.u_a - u.u_b));
    if (e + 1 < log.epochs.size()) {
      CHECK(log.epochs[e + 1].alpha_a == r.next_alpha_a);
      CHECK(log.epochs[e + 1].alpha_b == r.next_alpha_b);
    }
    for (const auto& m : r.metrics) {
      CHECK((m.fused >= 0.0 && m.fused <= 1.0));
    }
  }
  CHECK(log.best_epoch == select_best_epoch(log.epochs));
}

TEST_CASE("best epoch selection prefers the earliest tie") {
  std::vector<EpochRecord> epochs(4);
  const double val[] = {0.5, 0.7, 0.7, 0.6};
  for (std::size_t i = 0; i < 4; ++i) {
    epochs[i].epoch = static_cast<int>(i) + 1;
    epochs[i].metrics[static_cast<std::size_t>(Split::Validation)].fused = val[i];
    epochs[i].metrics[static_cast<std::size_t>(Split::Test)].fused = 1.0 - val[i];
  }
  CHECK(select_best_epoch(epochs) == 1);
  CHECK(select_best_epoch({}) == -1);
}

TEST_CASE("neutralized MILES trains exactly like vanilla") {
  const RunLog vanilla = run_experiment(tiny(SchedulerKind::Vanilla));

  RunConfig mu_one = tiny();
  mu_one.scheduler.miles.mu = 1.0;
  CHECK(same_training(run_experiment(mu_one), vanilla));

  RunConfig high_tau = tiny();
  high_tau.scheduler.miles.tau = 10.0;
  high_tau.check_scheduler_ranges = false;
  const RunLog reset = run_experiment(high_tau);
  CHECK(same_training(reset, vanilla));
  for (const EpochRecord& r : reset.epochs) {
    CHECK(r.action == SchedulerAction::Reset);
    CHECK(r.next_alpha_a == high_tau.lr);
    CHECK(r.next_alpha_b == high_tau.lr);
  }
}

TEST_CASE("runs are deterministic and the CSV has four rows per epoch") {
  const RunConfig rc = tiny();
  const std::string first = csv_of(run_experiment(rc));
  CHECK(first == csv_of(run_experiment(rc)));

  const auto lines = lines_of(first);
  REQUIRE(lines.size() == 1 + 4 * 5);
  CHECK(lines[0] == kRunLogHeader);
  const char* kinds[] = {"train", "val", "test", "scheduler"};
  for (std::size_t i = 1; i < lines.size(); ++i) {
    CHECK(std::count(lines[i].begin(), lines[i].end(), ',') == 14);
    const std::string prefix = std::to_string((i - 1) / 4 + 1) + "," + kinds[(i - 1) % 4] + ",";
    CHECK(lines[i].rfind(prefix, 0) == 0);
  }

  RunConfig other = rc;
  other.seed = 2;
  CHECK(first != csv_of(run_experiment(other)));
}

TEST_CASE("RunLog CSV round trip") {
  for (Split obs : {Split::Validation, Split::Train}) {
    RunConfig rc = tiny();
    rc.scheduler.miles.utilization_split = obs;
    const RunLog log = run_experiment(rc);
    CHECK(log.observation_split == obs);
    const fs::path path = fs::temp_directory_path() / "miles_roundtrip_runlog.csv";
    write_runlog_csv(log, path);
    const RunLog back = read_runlog_csv(path);
    CHECK(back.observation_split == obs);
    CHECK(back.best_epoch == log.best_epoch);
    CHECK(csv_of(back) == csv_of(log));
  }
}

TEST_CASE("RunLog CSV errors") {
  const fs::path path = fs::temp_directory_path() / "miles_bad_runlog.csv";
  {
    std::ofstream out(path);
    out << "epoch,split\n1,train\n";
  }
  CHECK_THROWS_AS(read_runlog_csv(path), FormatError);
  {
    std::ofstream out(path);
    out << kRunLogHeader << "\n1,train,0.5,x,0.5,0,0,0,0.001,0.001,0.001,,1,1,1\n";
  }
  CHECK_THROWS_AS(read_runlog_csv(path), FormatError);
  {
    std::ofstream out(path);
    out << kRunLogHeader << "\n1,train,0.5\n";
  }
  CHECK_THROWS_AS(read_runlog_csv(path), FormatError);
  CHECK_THROWS_AS(read_runlog_csv(fs::temp_directory_path() / "miles_missing.csv"), IoError);
}

TEST_CASE("non-finite loss aborts with a partial log") {
  const RunConfig rc = tiny();
  BimodalDataset ds = generate(rc.data);
  ds.splits[static_cast<std::size_t>(Split::Train)].features_a(0, 0) = std::numeric_limits<double>::infinity();
  const RunLog log = run_experiment(rc, ds);
  REQUIRE(log.abort_reason);
  CHECK(log.epochs.size() < static_cast<std::size_t>(rc.epochs));
}

TEST_CASE("MSES stops once every stream has plateaued") {
  RunConfig rc = tiny(SchedulerKind::Mses, 40);
  rc.scheduler.mses.patience = 1;
  rc.scheduler.mses.tolerance = 1.0;  // nothing counts as an improvement
  const RunLog log = run_experiment(rc);
  CHECK(log.stopped_early);
  CHECK(log.epochs.size() < 40);
  for (std::size_t e = 1; e < log.epochs.size(); ++e) {
    const FreezeMask& before = log.epochs[e - 1].frozen;
    const FreezeMask& now = log.epochs[e].frozen;
    CHECK((!before.freeze_a || now.freeze_a));
    CHECK((!before.freeze_b || now.freeze_b));
    CHECK((!before.freeze_fusion || now.freeze_fusion));
  }
  CHECK(log.epochs.front().frozen.freeze_a == false);
}

TEST_CASE("SVG plot structure") {
  const RunLog log = run_experiment(tiny(SchedulerKind::Vanilla, 7));
  const std::string svg = render_svg(log);
  CHECK(balanced_xml(svg));
  CHECK(count_of(svg, "<polyline") == 9);
  for (const char* label : {"u_A", "u_B", "delta_AB", "alpha_A", "alpha_B", "alpha_AB", "AB", "A", "B"}) {
    CHECK(count_of(svg, std::string("data-label=\"") + label + "\"") == 1);
  }

  const auto ab = polyline_points(svg, "AB");
  REQUIRE(ab.size() == 7);
  for (std::size_t i = 0; i < ab.size(); ++i) {
    const double expected = PlotLayout::margin_left + static_cast<double>(i) / 6.0 * PlotLayout::plot_width();
    CHECK(ab[i].first == doctest::Approx(expected).epsilon(1e-3));
  }
  for (const char* label : {"alpha_A", "alpha_B", "alpha_AB"}) {
    const auto pts = polyline_points(svg, label);
    for (const auto& p : pts) CHECK(p.second == pts.front().second);
  }

  CHECK_THROWS_AS(render_svg(RunLog{}), InputError);
  CHECK_THROWS_AS(plot(log, fs::path("/nonexistent-dir/plot.svg")), IoError);
}

TEST_CASE("sweep covers the whole grid") {
  RunConfig base = tiny(SchedulerKind::Miles, 1);
  base.data.n_train = 64;
  base.data.n_val = 32;
  base.data.n_test = 32;
  SweepGrid grid;
  grid.taus = {0.05, 0.1, 0.2, 0.3, 0.5};
  grid.mus = {0.01, 0.1, 0.2, 0.3, 0.5, 0.7, 1.0};
  grid.seeds = {1, 2, 3};
  CHECK(grid.cell_count() == 105);

  const SweepResult result = sweep(base, grid, 2);
  REQUIRE(result.cells.size() == 105);
  REQUIRE(result.rows.size() == 35);
  for (const auto& cell : result.cells) {
    CHECK(cell.error.empty());
    CHECK(cell.summary.has_value());
  }
  CHECK(result.cells[0].tau == 0.05);
  CHECK(result.cells[3].mu == 0.1);
  CHECK(result.cells[104].seed == 3);

  int best = 0;
  for (std::size_t i = 0; i < result.rows.size(); ++i) {
    CHECK(result.rows[i].runs == 3);
    if (result.rows[i].val_fused > result.rows[static_cast<std::size_t>(best)].val_fused) best = static_cast<int>(i);
  }
  CHECK(result.best_row == best);

  std::vector<real> vals;
  for (std::size_t s = 0; s < 3; ++s) vals.push_back(result.cells[s].summary->test_b);
  CHECK(result.rows[0].test_b == median(vals));

  std::ostringstream a, b;
  write_sweep_csv(result, a);
  write_sweep_csv(sweep(base, grid, 1), b);
  CHECK(a.str() == b.str());
  const auto lines = lines_of(a.str());
  CHECK(lines.size() == 36);
  CHECK(lines[0] == "tau,mu,runs,val_fused,test_fused,test_A,test_B,gap,best");
}

TEST_CASE("median") {
  CHECK(median({3.0, 1.0, 2.0}) == 2.0);
  CHECK(median({4.0, 1.0, 3.0, 2.0}) == 2.5);
}

TEST_CASE("compare reports every method") {
  RunConfig base = tiny(SchedulerKind::Vanilla, 3);
  const std::vector<std::uint64_t> seeds = {1, 2};
  const auto rows = compare_methods(base, seeds, 1);
  REQUIRE(rows.size() == 6);
  const char* names[] = {"vanilla", "mslr_k", "mslr_s", "mslr_d", "mses", "miles"};
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(rows[i].method == names[i]);
    CHECK(rows[i].runs == 2);
  }
  std::ostringstream out;
  write_compare_csv(rows, out);
  const auto lines = lines_of(out.str());
  REQUIRE(lines.size() == 7);
  CHECK(lines[0] == "method,M_fused,M_A,M_B,gap");
  CHECK(lines[6].rfind("miles,", 0) == 0);
}
