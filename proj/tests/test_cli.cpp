#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <doctest.h>

#include "cli.hpp"
#include "miles/experiment.hpp"

namespace fs = std::filesystem;
using miles::cli::cli_main;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli_main(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch() {
  const fs::path dir = fs::temp_directory_path() / "miles_cli_test";
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void write(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
}

const char* kTiny =
    "data.classes = 3\n"
    "data.train = 90\n"
    "data.val = 30\n"
    "data.test = 30\n"
    "data.dim_a = 4\n"
    "data.dim_b = 4\n"
    "model.hidden_a = 6\n"
    "model.hidden_b = 6\n"
    "model.latent_a = 4\n"
    "model.latent_b = 4\n"
    "scheduler.kind = miles\n"
    "train.epochs = 3\n"
    "train.batch_size = 16\n";

}  // namespace

TEST_CASE("usage errors exit with 1") {
  CHECK(run({}).code == 1);
  CHECK(run({"frobnicate"}).code == 1);
  const Result missing = run({"train", "/nonexistent/run.conf"});
  CHECK(missing.code == 1);
  CHECK_FALSE(missing.err.empty());
  CHECK(run({"plot", "/nonexistent/runlog.csv", "x.svg"}).code == 1);
  CHECK(run({"--help"}).code == 0);
}

TEST_CASE("invalid configuration values exit with 1") {
  const fs::path dir = scratch();
  write(dir / "bad.conf", std::string(kTiny) + "scheduler.tau = 3\n");
  CHECK(run({"train", (dir / "bad.conf").string()}).code == 1);
  write(dir / "ok.conf", kTiny);
  CHECK(run({"train", (dir / "ok.conf").string(), "--mu", "0"}).code == 1);
}

TEST_CASE("gen-data, train and plot pipeline") {
  const fs::path dir = scratch();
  write(dir / "spec.conf", kTiny);
  const fs::path data = dir / "data.bin";
  const Result gen = run({"gen-data", (dir / "spec.conf").string(), data.string()});
  REQUIRE(gen.code == 0);
  REQUIRE(fs::exists(data));

  write(dir / "run.conf", std::string(kTiny) + "data.file = " + data.string() + "\n" + "typo.key = 1\n");
  const fs::path out = dir / "run";
  const Result train = run({"train", (dir / "run.conf").string(), "--out", out.string(), "--scheduler", "vanilla",
                            "--set", "train.epochs=4"});
  REQUIRE(train.code == 0);
  CHECK(train.err.find("typo.key") != std::string::npos);
  REQUIRE(fs::exists(out / "runlog.csv"));
  REQUIRE(fs::exists(out / "run_config.txt"));
  const miles::RunLog log = miles::read_runlog_csv(out / "runlog.csv");
  CHECK(log.epochs.size() == 4);
  for (const auto& r : log.epochs) CHECK(r.action == miles::SchedulerAction::None);

  std::ifstream cfg(out / "run_config.txt");
  const std::string cfg_text((std::istreambuf_iterator<char>(cfg)), std::istreambuf_iterator<char>());
  CHECK(cfg_text.find("scheduler.kind = vanilla") != std::string::npos);

  const Result plot = run({"plot", (out / "runlog.csv").string(), (dir / "run.svg").string()});
  CHECK(plot.code == 0);
  CHECK(fs::file_size(dir / "run.svg") > 0);

  const Result to_stdout = run({"train", (dir / "run.conf").string()});
  CHECK(to_stdout.code == 0);
  CHECK(to_stdout.out.rfind(miles::kRunLogHeader, 0) == 0);
}

TEST_CASE("corrupt dataset is a runtime error") {
  const fs::path dir = scratch();
  write(dir / "junk.bin", "MILESDS1 but not really");
  write(dir / "run.conf", std::string(kTiny) + "data.file = " + (dir / "junk.bin").string() + "\n");
  CHECK(run({"train", (dir / "run.conf").string()}).code == 2);
}

TEST_CASE("sweep and compare print one row per grid point and method") {
  const fs::path dir = scratch();
  write(dir / "sweep.conf", std::string(kTiny) + "sweep.tau = 0.1, 0.3\nsweep.mu = 0.5\nsweep.seeds = 1, 2\n");
  const Result sw = run({"sweep", (dir / "sweep.conf").string(), "--out", (dir / "sw").string()});
  REQUIRE(sw.code == 0);
  CHECK(sw.out.rfind("tau,mu,runs,", 0) == 0);
  CHECK(std::count(sw.out.begin(), sw.out.end(), '\n') == 3);
  CHECK(fs::exists(dir / "sw" / "sweep_summary.csv"));
  CHECK(fs::exists(dir / "sw" / "cell_3.csv"));

  write(dir / "compare.conf", std::string(kTiny) + "compare.seeds = 1\n");
  const Result cmp = run({"compare", (dir / "compare.conf").string()});
  REQUIRE(cmp.code == 0);
  CHECK(cmp.out.rfind("method,M_fused,M_A,M_B,gap\n", 0) == 0);
  for (const char* m : {"vanilla", "mslr_k", "mslr_s", "mslr_d", "mses", "miles"}) {
    CHECK(cmp.out.find(std::string("\n") + m + ",") != std::string::npos);
  }
}
