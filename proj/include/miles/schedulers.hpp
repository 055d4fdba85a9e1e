#ifndef MILES_SCHEDULERS_HPP
#define MILES_SCHEDULERS_HPP

#include <array>
#include <string_view>
#include <vector>

#include "miles/metrics.hpp"
#include "miles/tensor.hpp"

namespace miles {

enum class SchedulerKind { Vanilla, Miles, MslrK, MslrS, MslrD, Mses };
enum class SchedulerAction { None, ScaledA, ScaledB, Reset };
enum class MslrVariant { K, S, D };

std::string_view to_string(SchedulerKind kind);
std::string_view to_string(SchedulerAction action);
SchedulerKind parse_scheduler_kind(std::string_view text);
SchedulerAction parse_scheduler_action(std::string_view text);

struct MilesConfig {
  real tau = 0.2;
  real mu = 0.5;
  Split utilization_split = Split::Validation;

  /// Throws ConfigError unless 0 <= tau <= 1 and 0 < mu <= 1.
  void validate() const;
};

struct MslrConfig {
  /// Per-modality starting rates for K and S. Non-positive means "use alpha".
  real lr_a = 0.0;
  real lr_b = 0.0;
  real gamma = 0.1;
  int window = 3;
  real eta = 0.05;

  void validate(MslrVariant variant) const;
};

struct MsesConfig {
  int patience = 5;
  real tolerance = 1e-4;

  void validate() const;
};

/// Metrics of one epoch on one split plus the utilization derived from them.
struct EpochObservation {
  int epoch = 0;
  real fused = 0.0;
  real metric_a = 0.0;
  real metric_b = 0.0;
  real u_a = 0.0;
  real u_b = 0.0;
  real delta = 0.0;

  static EpochObservation from_metrics(int epoch, real fused, real metric_a, real metric_b);
};

/// Early-stopping bookkeeping for one monitored metric.
struct PlateauTracker {
  real best = 0.0;
  int stale_epochs = 0;
  bool seen = false;
  bool frozen = false;
  int frozen_at = 0;
};

struct FreezeMask {
  bool freeze_a = false;
  bool freeze_b = false;
  bool freeze_fusion = false;

  bool all() const { return freeze_a && freeze_b && freeze_fusion; }
};

struct SchedulerState {
  real alpha_ab = 0.0;
  real alpha_a = 0.0;
  real alpha_b = 0.0;
  SchedulerAction last_action = SchedulerAction::None;

  /// MSES trackers for M_A, M_B and M_AB.
  std::array<PlateauTracker, 3> plateau{};
  /// MSLR-D history of unimodal validation metrics.
  std::vector<real> history_a;
  std::vector<real> history_b;

  static SchedulerState initial(real alpha);
  FreezeMask freeze_mask() const;
};

struct MilesDecision {
  real alpha_a = 0.0;
  real alpha_b = 0.0;
  SchedulerAction action = SchedulerAction::None;
};

/// One pass of the modality-informed rule. Rates are always assigned from
/// alpha_ab (never compounded); a modality whose rate is not assigned in
/// this call keeps its previous value. Throws InputError on non-finite
/// utilization.
MilesDecision miles_step(const SchedulerState& state, const EpochObservation& obs,
                         const MilesConfig& config);

struct RatePair {
  real alpha_a = 0.0;
  real alpha_b = 0.0;
};

RatePair vanilla_step(const SchedulerState& state, const EpochObservation& obs);

/// MSLR family: K keeps the configured pair, S pulls both rates towards
/// their mean by gamma, D grows/shrinks each rate by eta when the mean
/// unimodal metric of the last `window` epochs beats/trails the window before.
SchedulerState mslr_step(const SchedulerState& state, const EpochObservation& obs,
                         MslrVariant variant, const MslrConfig& config);

struct MsesDecision {
  SchedulerState state;
  FreezeMask mask;
  bool stop = false;
};

/// Freezes a stream once its metric has not beaten its best by more than
/// the tolerance for `patience` consecutive epochs. Freezing is permanent.
MsesDecision mses_step(const SchedulerState& state, const EpochObservation& obs,
                       const MsesConfig& config);

/// Scheduler kind with its parameters; dispatches to the step functions.
struct SchedulerSpec {
  SchedulerKind kind = SchedulerKind::Vanilla;
  MilesConfig miles;
  MslrConfig mslr;
  MsesConfig mses;

  void validate() const;
  SchedulerState initial_state(real alpha) const;
  /// Split whose metrics feed step(); baselines always watch validation.
  Split observation_split() const;
  SchedulerState step(const SchedulerState& state, const EpochObservation& obs) const;
};

}  // namespace miles

#endif  // MILES_SCHEDULERS_HPP
