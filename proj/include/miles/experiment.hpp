#ifndef MILES_EXPERIMENT_HPP
#define MILES_EXPERIMENT_HPP

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "miles/config.hpp"
#include "miles/datagen.hpp"
#include "miles/fusion_model.hpp"
#include "miles/metrics.hpp"
#include "miles/schedulers.hpp"

namespace miles {

struct RunConfig {
  /// Dataset file; when unset the dataset is generated from `data`.
  std::optional<std::filesystem::path> dataset_file;
  SyntheticSpec data;
  /// Input widths and class count are taken from the dataset.
  ModelConfig model;
  SchedulerSpec scheduler;
  real lr = 1e-3;
  int epochs = 60;
  int batch_size = 64;
  std::uint64_t seed = 1;
  MetricKind metric = MetricKind::Accuracy;
  /// Modality treated as the stronger one when reporting the encoder gap.
  GroupId stronger = GroupId::ModalityA;
  /// Where `train` writes runlog.csv and run_config.txt; empty disables output.
  std::filesystem::path output_dir;
  /// Test hook: when false, scheduler hyper-parameters outside their
  /// documented ranges are accepted. Not reachable from config files.
  bool check_scheduler_ranges = true;

  void validate() const;

  /// Reads the `data.*`, `model.*`, `scheduler.*`, `train.*` and
  /// `output.*` keys; anything missing keeps its default.
  static RunConfig from_config(const KeyValueConfig& cfg);
  KeyValueConfig to_config() const;
};

struct HeadMetrics {
  real fused = 0.0;
  real a = 0.0;
  real b = 0.0;
};

struct EpochRecord {
  int epoch = 0;
  /// Run metric (RunConfig::metric) per split, indexed by Split.
  std::array<HeadMetrics, 3> metrics{};
  /// Accuracy and macro-F1 per split; empty in logs read back from CSV.
  std::array<HeadMetrics, 3> accuracy{};
  std::array<HeadMetrics, 3> macro_f1{};
  /// Train: mean minibatch loss over the epoch. Val/test: loss after the epoch.
  std::array<LossBreakdown, 3> loss{};
  /// Utilization on the scheduler's observation split.
  real u_a = 0.0;
  real u_b = 0.0;
  real delta = 0.0;
  /// Rates used while training this epoch.
  real alpha_a = 0.0;
  real alpha_b = 0.0;
  real alpha_ab = 0.0;
  /// Scheduler output for the next epoch.
  real next_alpha_a = 0.0;
  real next_alpha_b = 0.0;
  SchedulerAction action = SchedulerAction::None;
  /// Groups skipped by the optimizer during this epoch.
  FreezeMask frozen;
};

struct RunLog {
  KeyValueConfig config;
  MetricKind metric = MetricKind::Accuracy;
  Split observation_split = Split::Validation;
  std::vector<EpochRecord> epochs;
  /// Index into `epochs`; -1 when there are no records.
  int best_epoch = -1;
  bool stopped_early = false;
  /// Set when training aborted on a non-finite loss.
  std::optional<std::string> abort_reason;
};

/// Argmax of the validation fused metric; ties resolve to the earliest epoch.
int select_best_epoch(const std::vector<EpochRecord>& epochs);

BimodalDataset load_or_generate(const RunConfig& config);

/// Trains with the configured scheduler. Per epoch: shuffle the training
/// split, optimize the joint loss per minibatch with the current per-group
/// rates, evaluate all splits, then let the scheduler pick next-epoch rates.
RunLog run_experiment(const RunConfig& config);
RunLog run_experiment(const RunConfig& config, const BimodalDataset& dataset);

inline constexpr const char* kRunLogHeader =
    "epoch,split,metric_AB,metric_A,metric_B,u_A,u_B,delta,alpha_A,alpha_B,alpha_AB,action,"
    "loss_AB,loss_A,loss_B";

/// Rows per epoch: train, val, test, then a `scheduler` row carrying the
/// observation, the rates chosen for the next epoch and the action.
void write_runlog_csv(const RunLog& log, std::ostream& out);
void write_runlog_csv(const RunLog& log, const std::filesystem::path& path);
RunLog read_runlog_csv(const std::filesystem::path& path);

/// Test-split numbers at the best epoch.
struct RunSummary {
  int best_epoch = 0;
  real val_fused = 0.0;
  real test_fused = 0.0;
  real test_a = 0.0;
  real test_b = 0.0;
  /// Stronger minus weaker encoder, sign preserved.
  real gap = 0.0;
};

RunSummary summarize(const RunLog& log, GroupId stronger = GroupId::ModalityA);

/// Writes runlog.csv and run_config.txt into config.output_dir.
void write_run_outputs(const RunConfig& config, const RunLog& log);

std::string format_real(real value);

}  // namespace miles

#endif  // MILES_EXPERIMENT_HPP
