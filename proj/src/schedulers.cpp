#include "miles/schedulers.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "miles/errors.hpp"

namespace miles {

std::string_view to_string(SchedulerKind kind) {
  switch (kind) {
    case SchedulerKind::Vanilla: return "vanilla";
    case SchedulerKind::Miles: return "miles";
    case SchedulerKind::MslrK: return "mslr_k";
    case SchedulerKind::MslrS: return "mslr_s";
    case SchedulerKind::MslrD: return "mslr_d";
    case SchedulerKind::Mses: return "mses";
  }
  return "?";
}

std::string_view to_string(SchedulerAction action) {
  switch (action) {
    case SchedulerAction::None: return "none";
    case SchedulerAction::ScaledA: return "scaled_a";
    case SchedulerAction::ScaledB: return "scaled_b";
    case SchedulerAction::Reset: return "reset";
  }
  return "?";
}

SchedulerKind parse_scheduler_kind(std::string_view text) {
  for (auto kind : {SchedulerKind::Vanilla, SchedulerKind::Miles, SchedulerKind::MslrK,
                    SchedulerKind::MslrS, SchedulerKind::MslrD, SchedulerKind::Mses}) {
    if (text == to_string(kind)) return kind;
  }
  throw ConfigError("unknown scheduler '" + std::string(text) +
                    "' (expected vanilla|miles|mslr_k|mslr_s|mslr_d|mses)");
}

SchedulerAction parse_scheduler_action(std::string_view text) {
  for (auto action : {SchedulerAction::None, SchedulerAction::ScaledA, SchedulerAction::ScaledB,
                      SchedulerAction::Reset}) {
    if (text == to_string(action)) return action;
  }
  if (text.empty()) return SchedulerAction::None;
  throw FormatError("unknown scheduler action '" + std::string(text) + "'");
}

void MilesConfig::validate() const {
  if (!(tau >= 0.0 && tau <= 1.0)) {
    throw ConfigError("miles: tau must lie in [0, 1], got " + std::to_string(tau));
  }
  if (!(mu > 0.0 && mu <= 1.0)) {
    throw ConfigError("miles: mu must lie in (0, 1], got " + std::to_string(mu));
  }
}

void MslrConfig::validate(MslrVariant variant) const {
  if (variant == MslrVariant::S && !(gamma > 0.0 && gamma <= 1.0)) {
    throw ConfigError("mslr_s: gamma must lie in (0, 1]");
  }
  if (variant == MslrVariant::D) {
    if (window < 1) throw ConfigError("mslr_d: window must be >= 1");
    if (!(eta > 0.0)) throw ConfigError("mslr_d: eta must be positive");
  }
}

void MsesConfig::validate() const {
  if (patience < 1) throw ConfigError("mses: patience must be >= 1");
  if (!(tolerance >= 0.0)) throw ConfigError("mses: tolerance must be >= 0");
}

EpochObservation EpochObservation::from_metrics(int epoch, real fused, real metric_a,
                                                real metric_b) {
  EpochObservation obs;
  obs.epoch = epoch;
  obs.fused = fused;
  obs.metric_a = metric_a;
  obs.metric_b = metric_b;
  const auto u = conditional_utilization(fused, metric_a, metric_b);
  obs.u_a = u.u_a;
  obs.u_b = u.u_b;
  obs.delta = utilization_delta(u.u_a, u.u_b);
  return obs;
}

SchedulerState SchedulerState::initial(real alpha) {
  SchedulerState s;
  s.alpha_ab = s.alpha_a = s.alpha_b = alpha;
  return s;
}

FreezeMask SchedulerState::freeze_mask() const {
  return {plateau[0].frozen, plateau[1].frozen, plateau[2].frozen};
}

MilesDecision miles_step(const SchedulerState& state, const EpochObservation& obs,
                         const MilesConfig& config) {
  if (!std::isfinite(obs.u_a) || !std::isfinite(obs.u_b) || !std::isfinite(obs.delta)) {
    throw InputError("miles_step: non-finite utilization at epoch " + std::to_string(obs.epoch));
  }
  const real alpha = state.alpha_ab;
  const real u_a = obs.u_a;
  const real u_b = obs.u_b;
  MilesDecision out{state.alpha_a, state.alpha_b, SchedulerAction::Reset};

  if (obs.delta <= config.tau || (u_a < 0.0 && u_b < 0.0)) {
    out.alpha_a = alpha;
    out.alpha_b = alpha;
  } else if (u_a > 0.0 && u_b < 0.0) {
    out.alpha_a = config.mu * alpha;
    out.action = SchedulerAction::ScaledA;
  } else if (u_a < 0.0 && u_b > 0.0) {
    out.alpha_b = config.mu * alpha;
    out.action = SchedulerAction::ScaledB;
  } else if (u_a < u_b) {
    out.alpha_b = config.mu * alpha;
    out.action = SchedulerAction::ScaledB;
  } else {
    out.alpha_a = config.mu * alpha;
    out.action = SchedulerAction::ScaledA;
  }
  return out;
}

RatePair vanilla_step(const SchedulerState& state, const EpochObservation& /*obs*/) {
  return {state.alpha_ab, state.alpha_ab};
}

namespace {

real mean_of(std::vector<real>::const_iterator first, std::vector<real>::const_iterator last) {
  return std::accumulate(first, last, 0.0) / static_cast<real>(std::distance(first, last));
}

real window_trend(const std::vector<real>& history, real rate, int window, real eta) {
  const auto w = static_cast<std::ptrdiff_t>(window);
  if (static_cast<std::ptrdiff_t>(history.size()) < 2 * w) return rate;
  const real recent = mean_of(history.end() - w, history.end());
  const real before = mean_of(history.end() - 2 * w, history.end() - w);
  if (recent > before) return rate * (1.0 + eta);
  if (recent < before) return rate * (1.0 - eta);
  return rate;
}

void track_plateau(PlateauTracker& t, real metric, int epoch, const MsesConfig& config) {
  if (t.frozen) return;
  if (!t.seen || metric > t.best + config.tolerance) {
    t.best = metric;
    t.stale_epochs = 0;
    t.seen = true;
    return;
  }
  if (++t.stale_epochs >= config.patience) {
    t.frozen = true;
    t.frozen_at = epoch;
  }
}

}  // namespace

SchedulerState mslr_step(const SchedulerState& state, const EpochObservation& obs,
                         MslrVariant variant, const MslrConfig& config) {
  config.validate(variant);
  SchedulerState next = state;
  next.last_action = SchedulerAction::None;
  switch (variant) {
    case MslrVariant::K:
      break;
    case MslrVariant::S: {
      const real mean = 0.5 * (state.alpha_a + state.alpha_b);
      next.alpha_a = state.alpha_a + config.gamma * (mean - state.alpha_a);
      next.alpha_b = state.alpha_b + config.gamma * (mean - state.alpha_b);
      break;
    }
    case MslrVariant::D:
      next.history_a.push_back(obs.metric_a);
      next.history_b.push_back(obs.metric_b);
      next.alpha_a = window_trend(next.history_a, state.alpha_a, config.window, config.eta);
      next.alpha_b = window_trend(next.history_b, state.alpha_b, config.window, config.eta);
      break;
  }
  return next;
}

MsesDecision mses_step(const SchedulerState& state, const EpochObservation& obs,
                       const MsesConfig& config) {
  MsesDecision out{state, {}, false};
  out.state.last_action = SchedulerAction::None;
  track_plateau(out.state.plateau[0], obs.metric_a, obs.epoch, config);
  track_plateau(out.state.plateau[1], obs.metric_b, obs.epoch, config);
  track_plateau(out.state.plateau[2], obs.fused, obs.epoch, config);
  out.mask = out.state.freeze_mask();
  out.stop = out.mask.all();
  return out;
}

void SchedulerSpec::validate() const {
  switch (kind) {
    case SchedulerKind::Miles: miles.validate(); break;
    case SchedulerKind::MslrK: mslr.validate(MslrVariant::K); break;
    case SchedulerKind::MslrS: mslr.validate(MslrVariant::S); break;
    case SchedulerKind::MslrD: mslr.validate(MslrVariant::D); break;
    case SchedulerKind::Mses: mses.validate(); break;
    case SchedulerKind::Vanilla: break;
  }
}

SchedulerState SchedulerSpec::initial_state(real alpha) const {
  SchedulerState s = SchedulerState::initial(alpha);
  if (kind == SchedulerKind::MslrK || kind == SchedulerKind::MslrS) {
    if (mslr.lr_a > 0.0) s.alpha_a = mslr.lr_a;
    if (mslr.lr_b > 0.0) s.alpha_b = mslr.lr_b;
  }
  return s;
}

Split SchedulerSpec::observation_split() const {
  return kind == SchedulerKind::Miles ? miles.utilization_split : Split::Validation;
}

SchedulerState SchedulerSpec::step(const SchedulerState& state,
                                   const EpochObservation& obs) const {
  switch (kind) {
    case SchedulerKind::Vanilla: {
      SchedulerState next = state;
      const RatePair rates = vanilla_step(state, obs);
      next.alpha_a = rates.alpha_a;
      next.alpha_b = rates.alpha_b;
      next.last_action = SchedulerAction::None;
      return next;
    }
    case SchedulerKind::Miles: {
      SchedulerState next = state;
      const MilesDecision d = miles_step(state, obs, miles);
      next.alpha_a = d.alpha_a;
      next.alpha_b = d.alpha_b;
      next.last_action = d.action;
      return next;
    }
    case SchedulerKind::MslrK: return mslr_step(state, obs, MslrVariant::K, mslr);
    case SchedulerKind::MslrS: return mslr_step(state, obs, MslrVariant::S, mslr);
    case SchedulerKind::MslrD: return mslr_step(state, obs, MslrVariant::D, mslr);
    case SchedulerKind::Mses: return mses_step(state, obs, mses).state;
  }
  return state;
}

}  // namespace miles
