#include "cli.hpp"

#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "miles/datagen.hpp"
#include "miles/errors.hpp"
#include "miles/experiment.hpp"
#include "miles/svg_plot.hpp"
#include "miles/sweep.hpp"

namespace miles::cli {
namespace {

// Flags shared by the config-driven subcommands. Each one maps onto a config
// key and is applied after the file, so the command line wins.
struct Overrides {
  std::vector<std::string> assignments;
  std::string out_dir;
  std::string scheduler;
  std::string fusion;
  std::string utilization_split;
  double lr = 0.0;
  double tau = -1.0;
  double mu = -1.0;
  long long epochs = 0;
  long long seed = -1;
  unsigned threads = 0;

  void attach(CLI::App* cmd) {
    cmd->add_option("--set", assignments, "Override a config key (key=value), repeatable");
    cmd->add_option("--out", out_dir, "Output directory (output.dir)");
    cmd->add_option("--scheduler", scheduler, "scheduler.kind");
    cmd->add_option("--fusion", fusion, "model.fusion");
    cmd->add_option("--utilization-split", utilization_split, "scheduler.utilization_split");
    cmd->add_option("--lr", lr, "train.lr");
    cmd->add_option("--tau", tau, "scheduler.tau");
    cmd->add_option("--mu", mu, "scheduler.mu");
    cmd->add_option("--epochs", epochs, "train.epochs");
    cmd->add_option("--seed", seed, "train.seed");
  }

  KeyValueConfig load(const std::string& path) const {
    KeyValueConfig cfg = KeyValueConfig::from_file(path);
    for (const auto& a : assignments) cfg.set_assignment(a);
    if (!out_dir.empty()) cfg.set("output.dir", out_dir);
    if (!scheduler.empty()) cfg.set("scheduler.kind", scheduler);
    if (!fusion.empty()) cfg.set("model.fusion", fusion);
    if (!utilization_split.empty()) cfg.set("scheduler.utilization_split", utilization_split);
    if (lr > 0.0) cfg.set("train.lr", format_real(lr));
    if (tau >= 0.0) cfg.set("scheduler.tau", format_real(tau));
    if (mu >= 0.0) cfg.set("scheduler.mu", format_real(mu));
    if (epochs > 0) cfg.set("train.epochs", std::to_string(epochs));
    if (seed >= 0) cfg.set("train.seed", std::to_string(seed));
    return cfg;
  }
};

void warn_unused(const KeyValueConfig& cfg, std::ostream& err) {
  for (const auto& key : cfg.unused_keys()) err << "warning: unknown config key '" << key << "'\n";
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw IoError("write to " + path.string() + " failed");
}

int run_gen_data(const std::string& spec_file, const std::string& out_path, std::ostream& out,
                 std::ostream& err) {
  const KeyValueConfig cfg = KeyValueConfig::from_file(spec_file);
  const RunConfig rc = RunConfig::from_config(cfg);
  warn_unused(cfg, err);
  const BimodalDataset ds = generate(rc.data);
  save(ds, out_path);
  out << "wrote " << out_path << " (" << ds.split(Split::Train).size() << "/"
      << ds.split(Split::Validation).size() << "/" << ds.split(Split::Test).size()
      << " samples, " << ds.spec.classes << " classes)\n";
  return kExitOk;
}

int run_train(const KeyValueConfig& cfg, std::ostream& out, std::ostream& err) {
  const RunConfig rc = RunConfig::from_config(cfg);
  warn_unused(cfg, err);
  const RunLog log = run_experiment(rc);
  write_run_outputs(rc, log);
  if (rc.output_dir.empty()) write_runlog_csv(log, out);
  if (log.abort_reason) {
    err << "error: training aborted: " << *log.abort_reason << "\n";
    return kExitRuntime;
  }
  const RunSummary s = summarize(log, rc.stronger);
  err << "best epoch " << s.best_epoch << ": val " << to_string(rc.metric) << " "
      << format_real(s.val_fused) << ", test fused " << format_real(s.test_fused) << ", A "
      << format_real(s.test_a) << ", B " << format_real(s.test_b) << "\n";
  return kExitOk;
}

int run_sweep(const KeyValueConfig& cfg, unsigned threads, std::ostream& out, std::ostream& err) {
  const RunConfig rc = RunConfig::from_config(cfg);
  const SweepGrid grid = SweepGrid::from_config(cfg, rc);
  warn_unused(cfg, err);
  const SweepResult result = sweep(rc, grid, threads);
  std::ostringstream csv;
  write_sweep_csv(result, csv);
  out << csv.str();
  if (!rc.output_dir.empty()) write_text(rc.output_dir / "sweep_summary.csv", csv.str());
  int failed = 0;
  for (const auto& cell : result.cells) {
    if (!cell.error.empty()) {
      ++failed;
      err << "cell tau=" << cell.tau << " mu=" << cell.mu << " seed=" << cell.seed
          << " failed: " << cell.error << "\n";
    }
  }
  return failed == static_cast<int>(result.cells.size()) ? kExitRuntime : kExitOk;
}

int run_compare(const KeyValueConfig& cfg, unsigned threads, std::ostream& out, std::ostream& err) {
  const RunConfig rc = RunConfig::from_config(cfg);
  std::vector<std::uint64_t> seeds;
  for (long long s : cfg.get_int_list("compare.seeds", {static_cast<long long>(rc.seed)})) {
    seeds.push_back(static_cast<std::uint64_t>(s));
  }
  warn_unused(cfg, err);
  const auto rows = compare_methods(rc, seeds, threads);
  std::ostringstream csv;
  write_compare_csv(rows, csv);
  out << csv.str();
  if (!rc.output_dir.empty()) {
    std::filesystem::create_directories(rc.output_dir);
    write_text(rc.output_dir / "compare.csv", csv.str());
  }
  return kExitOk;
}

}  // namespace

int cli_main(std::span<const std::string> args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Modality-informed learning-rate scheduling experiments"};
  app.name("miles_cli");
  app.require_subcommand(1);

  std::string spec_file, data_out;
  auto* gen = app.add_subcommand("gen-data", "Generate a synthetic bimodal dataset file");
  gen->add_option("spec-file", spec_file, "Config file with data.* keys")->required()->check(CLI::ExistingFile);
  gen->add_option("out", data_out, "Output MILESDS1 file")->required();

  std::string config_file;
  Overrides overrides;
  auto* train = app.add_subcommand("train", "Train one run and write its RunLog");
  train->add_option("config-file", config_file)->required()->check(CLI::ExistingFile);
  overrides.attach(train);

  auto* sweep_cmd = app.add_subcommand("sweep", "Grid over sweep.tau x sweep.mu x sweep.seeds");
  sweep_cmd->add_option("config-file", config_file)->required()->check(CLI::ExistingFile);
  overrides.attach(sweep_cmd);
  sweep_cmd->add_option("--threads", overrides.threads, "Worker threads (0 = hardware)");

  std::string runlog, svg_out;
  auto* plot_cmd = app.add_subcommand("plot", "Render learning dynamics of a RunLog as SVG");
  plot_cmd->add_option("runlog", runlog)->required()->check(CLI::ExistingFile);
  plot_cmd->add_option("out", svg_out)->required();

  auto* compare = app.add_subcommand("compare", "Vanilla, baselines and MILES on one dataset");
  compare->add_option("config-file", config_file)->required()->check(CLI::ExistingFile);
  overrides.attach(compare);
  compare->add_option("--threads", overrides.threads, "Worker threads (0 = hardware)");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  }

  try {
    if (*gen) return run_gen_data(spec_file, data_out, out, err);
    if (*train) return run_train(overrides.load(config_file), out, err);
    if (*sweep_cmd) return run_sweep(overrides.load(config_file), overrides.threads, out, err);
    if (*compare) return run_compare(overrides.load(config_file), overrides.threads, out, err);
    if (*plot_cmd) {
      plot(read_runlog_csv(runlog), svg_out);
      out << "wrote " << svg_out << "\n";
      return kExitOk;
    }
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace miles::cli
