#include "miles/experiment.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "miles/errors.hpp"
#include "miles/rng.hpp"

namespace miles {

std::string format_real(real value) {
  // Shortest text that parses back to the same double.
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

namespace {

std::string join_ints(const std::vector<int>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(values[i]);
  }
  return out;
}

std::vector<int> to_ints(const std::vector<long long>& values) {
  return {values.begin(), values.end()};
}

std::vector<long long> to_longs(const std::vector<int>& values) {
  return {values.begin(), values.end()};
}

}  // namespace

void RunConfig::validate() const {
  if (epochs < 1) throw ConfigError("train: epochs must be >= 1");
  if (!(lr > 0.0) || !std::isfinite(lr)) throw ConfigError("train: lr must be positive");
  if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
  if (stronger == GroupId::Fusion) throw ConfigError("data: stronger must be a or b");
  if (!dataset_file) data.validate();
  if (check_scheduler_ranges) {
    scheduler.validate();
  } else if (scheduler.kind != SchedulerKind::Miles) {
    scheduler.validate();
  }
}

RunConfig RunConfig::from_config(const KeyValueConfig& cfg) {
  RunConfig rc;
  if (auto file = cfg.get("data.file"); file && !file->empty()) rc.dataset_file = *file;

  SyntheticSpec& d = rc.data;
  d.mode = parse_signal_mode(cfg.get_string("data.mode", std::string(to_string(d.mode))));
  d.classes = static_cast<int>(cfg.get_int("data.classes", d.classes));
  d.n_train = static_cast<int>(cfg.get_int("data.train", d.n_train));
  d.n_val = static_cast<int>(cfg.get_int("data.val", d.n_val));
  d.n_test = static_cast<int>(cfg.get_int("data.test", d.n_test));
  d.dim_a = static_cast<int>(cfg.get_int("data.dim_a", d.dim_a));
  d.dim_b = static_cast<int>(cfg.get_int("data.dim_b", d.dim_b));
  d.sigma_a = cfg.get_real("data.sigma_a", d.sigma_a);
  d.sigma_b = cfg.get_real("data.sigma_b", d.sigma_b);
  d.nonlinear_b = cfg.get_bool("data.nonlinear_b", d.nonlinear_b);
  d.prototype_scale = cfg.get_real("data.prototype_scale", d.prototype_scale);
  d.factor_a = static_cast<int>(cfg.get_int("data.factor_a", d.factor_a));
  d.factor_b = static_cast<int>(cfg.get_int("data.factor_b", d.factor_b));
  d.imbalance_ratio = cfg.get_real("data.imbalance_ratio", d.imbalance_ratio);
  d.seed = static_cast<std::uint64_t>(cfg.get_int("data.seed", static_cast<long long>(d.seed)));
  const auto stronger = cfg.get_string("data.stronger", "a");
  if (stronger != "a" && stronger != "b") throw ConfigError("data.stronger must be a or b");
  rc.stronger = stronger == "a" ? GroupId::ModalityA : GroupId::ModalityB;

  ModelConfig& m = rc.model;
  m.fusion = parse_fusion_kind(cfg.get_string("model.fusion", std::string(to_string(m.fusion))));
  m.hidden_a = to_ints(cfg.get_int_list("model.hidden_a", to_longs(m.hidden_a)));
  m.hidden_b = to_ints(cfg.get_int_list("model.hidden_b", to_longs(m.hidden_b)));
  m.latent_a = static_cast<int>(cfg.get_int("model.latent_a", m.latent_a));
  m.latent_b = static_cast<int>(cfg.get_int("model.latent_b", m.latent_b));

  SchedulerSpec& s = rc.scheduler;
  s.kind = parse_scheduler_kind(cfg.get_string("scheduler.kind", std::string(to_string(s.kind))));
  s.miles.tau = cfg.get_real("scheduler.tau", s.miles.tau);
  s.miles.mu = cfg.get_real("scheduler.mu", s.miles.mu);
  s.miles.utilization_split = parse_split(
      cfg.get_string("scheduler.utilization_split", std::string(to_string(s.miles.utilization_split))));
  s.mslr.lr_a = cfg.get_real("scheduler.lr_a", s.mslr.lr_a);
  s.mslr.lr_b = cfg.get_real("scheduler.lr_b", s.mslr.lr_b);
  s.mslr.gamma = cfg.get_real("scheduler.gamma", s.mslr.gamma);
  s.mslr.window = static_cast<int>(cfg.get_int("scheduler.window", s.mslr.window));
  s.mslr.eta = cfg.get_real("scheduler.eta", s.mslr.eta);
  s.mses.patience = static_cast<int>(cfg.get_int("scheduler.patience", s.mses.patience));
  s.mses.tolerance = cfg.get_real("scheduler.tolerance", s.mses.tolerance);

  rc.lr = cfg.get_real("train.lr", rc.lr);
  rc.epochs = static_cast<int>(cfg.get_int("train.epochs", rc.epochs));
  rc.batch_size = static_cast<int>(cfg.get_int("train.batch_size", rc.batch_size));
  rc.seed = static_cast<std::uint64_t>(cfg.get_int("train.seed", static_cast<long long>(rc.seed)));
  rc.metric = parse_metric_kind(cfg.get_string("train.metric", std::string(to_string(rc.metric))));
  rc.output_dir = cfg.get_string("output.dir", "");
  rc.validate();
  return rc;
}

KeyValueConfig RunConfig::to_config() const {
  KeyValueConfig c;
  if (dataset_file) c.set("data.file", dataset_file->string());
  c.set("data.mode", std::string(to_string(data.mode)));
  c.set("data.classes", std::to_string(data.classes));
  c.set("data.train", std::to_string(data.n_train));
  c.set("data.val", std::to_string(data.n_val));
  c.set("data.test", std::to_string(data.n_test));
  c.set("data.dim_a", std::to_string(data.dim_a));
  c.set("data.dim_b", std::to_string(data.dim_b));
  c.set("data.sigma_a", format_real(data.sigma_a));
  c.set("data.sigma_b", format_real(data.sigma_b));
  c.set("data.nonlinear_b", data.nonlinear_b ? "true" : "false");
  c.set("data.prototype_scale", format_real(data.prototype_scale));
  c.set("data.factor_a", std::to_string(data.factor_a));
  c.set("data.factor_b", std::to_string(data.factor_b));
  c.set("data.imbalance_ratio", format_real(data.imbalance_ratio));
  c.set("data.seed", std::to_string(data.seed));
  c.set("data.stronger", stronger == GroupId::ModalityA ? "a" : "b");
  c.set("model.fusion", std::string(to_string(model.fusion)));
  c.set("model.hidden_a", join_ints(model.hidden_a));
  c.set("model.hidden_b", join_ints(model.hidden_b));
  c.set("model.latent_a", std::to_string(model.latent_a));
  c.set("model.latent_b", std::to_string(model.latent_b));
  c.set("scheduler.kind", std::string(to_string(scheduler.kind)));
  c.set("scheduler.tau", format_real(scheduler.miles.tau));
  c.set("scheduler.mu", format_real(scheduler.miles.mu));
  c.set("scheduler.utilization_split", std::string(to_string(scheduler.miles.utilization_split)));
  c.set("scheduler.lr_a", format_real(scheduler.mslr.lr_a));
  c.set("scheduler.lr_b", format_real(scheduler.mslr.lr_b));
  c.set("scheduler.gamma", format_real(scheduler.mslr.gamma));
  c.set("scheduler.window", std::to_string(scheduler.mslr.window));
  c.set("scheduler.eta", format_real(scheduler.mslr.eta));
  c.set("scheduler.patience", std::to_string(scheduler.mses.patience));
  c.set("scheduler.tolerance", format_real(scheduler.mses.tolerance));
  c.set("train.lr", format_real(lr));
  c.set("train.epochs", std::to_string(epochs));
  c.set("train.batch_size", std::to_string(batch_size));
  c.set("train.seed", std::to_string(seed));
  c.set("train.metric", std::string(to_string(metric)));
  if (!output_dir.empty()) c.set("output.dir", output_dir.string());
  return c;
}

int select_best_epoch(const std::vector<EpochRecord>& epochs) {
  int best = -1;
  for (std::size_t i = 0; i < epochs.size(); ++i) {
    const real v = epochs[i].metrics[static_cast<std::size_t>(Split::Validation)].fused;
    if (best < 0 || v > epochs[static_cast<std::size_t>(best)]
                            .metrics[static_cast<std::size_t>(Split::Validation)]
                            .fused) {
      best = static_cast<int>(i);
    }
  }
  return best;
}

BimodalDataset load_or_generate(const RunConfig& config) {
  return config.dataset_file ? load(*config.dataset_file) : generate(config.data);
}

namespace {

constexpr std::array<Split, 3> kSplits = {Split::Train, Split::Validation, Split::Test};

std::size_t idx(Split s) { return static_cast<std::size_t>(s); }

Tensor gather_rows(const Tensor& source, std::span<const int> rows) {
  Tensor out(static_cast<Eigen::Index>(rows.size()), source.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = source.row(rows[i]);
  return out;
}

struct SplitEvaluation {
  HeadMetrics accuracy;
  HeadMetrics macro_f1;
  LossBreakdown loss;
};

SplitEvaluation evaluate(const MultimodalModel& model, const SplitData& data, int classes) {
  const PredictionBundle p = predict(model, data.features_a, data.features_b);
  const auto pred_ab = argmax_rows(p.logits_ab);
  const auto pred_a = argmax_rows(p.logits_a);
  const auto pred_b = argmax_rows(p.logits_b);
  SplitEvaluation e;
  e.accuracy = {accuracy(pred_ab, data.labels), accuracy(pred_a, data.labels),
                accuracy(pred_b, data.labels)};
  e.macro_f1 = {macro_f1(pred_ab, data.labels, classes), macro_f1(pred_a, data.labels, classes),
                macro_f1(pred_b, data.labels, classes)};
  e.loss = joint_loss(p, data.labels);
  return e;
}

}  // namespace

RunLog run_experiment(const RunConfig& config) {
  config.validate();
  return run_experiment(config, load_or_generate(config));
}

RunLog run_experiment(const RunConfig& config, const BimodalDataset& dataset) {
  config.validate();
  const SplitData& train = dataset.split(Split::Train);
  if (train.size() == 0) throw ConfigError("run: training split is empty");

  ModelConfig model_cfg = config.model;
  model_cfg.dim_a = static_cast<int>(train.features_a.cols());
  model_cfg.dim_b = static_cast<int>(train.features_b.cols());
  model_cfg.classes = dataset.spec.classes;
  model_cfg.seed = derive_seed(config.seed, 1);
  MultimodalModel model = init_parameters(model_cfg);
  Rng shuffle_rng(derive_seed(config.seed, 2));

  RunLog log;
  log.config = config.to_config();
  log.metric = config.metric;
  log.observation_split = config.scheduler.observation_split();

  const SchedulerSpec& scheduler = config.scheduler;
  SchedulerState state = scheduler.initial_state(config.lr);
  std::vector<int> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  const auto batch = static_cast<std::size_t>(config.batch_size);

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    EpochRecord rec;
    rec.epoch = epoch;
    rec.alpha_a = state.alpha_a;
    rec.alpha_b = state.alpha_b;
    rec.alpha_ab = state.alpha_ab;
    rec.frozen = state.freeze_mask();
    const std::array<real, 3> rates = {state.alpha_a, state.alpha_b, state.alpha_ab};
    const std::array<bool, 3> frozen = {rec.frozen.freeze_a, rec.frozen.freeze_b,
                                        rec.frozen.freeze_fusion};

    shuffle_rng.shuffle(std::span<int>(order));
    LossBreakdown running;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const auto rows = std::span<const int>(order).subspan(start, std::min(batch, order.size() - start));
      const Tensor xa = gather_rows(train.features_a, rows);
      const Tensor xb = gather_rows(train.features_b, rows);
      std::vector<int> labels(rows.size());
      for (std::size_t i = 0; i < rows.size(); ++i) labels[i] = train.labels[static_cast<std::size_t>(rows[i])];

      GradientTape tape;
      const ForwardPass pass = forward(model, xa, xb, tape);
      const JointLoss loss = joint_loss(tape, pass, labels);
      const LossBreakdown values = loss.values(tape);
      if (!std::isfinite(values.total)) {
        log.abort_reason = "non-finite loss at epoch " + std::to_string(epoch) + ", batch starting " +
                           std::to_string(start) + " (L_AB=" + format_real(values.fused) +
                           ", L_A=" + format_real(values.a) + ", L_B=" + format_real(values.b) + ")";
        log.best_epoch = select_best_epoch(log.epochs);
        return log;
      }
      const GroupGradients grads = backward(tape, loss.total, pass);
      for (GroupId id : kAllGroups) {
        const auto g = static_cast<std::size_t>(id);
        if (!frozen[g]) adam_step(model.group(id), grads[g], rates[g]);
      }
      const real weight = static_cast<real>(rows.size());
      running.total += weight * values.total;
      running.fused += weight * values.fused;
      running.a += weight * values.a;
      running.b += weight * values.b;
    }
    const real n = static_cast<real>(order.size());
    rec.loss[idx(Split::Train)] = {running.total / n, running.fused / n, running.a / n, running.b / n};

    for (Split s : kSplits) {
      const SplitEvaluation e = evaluate(model, dataset.split(s), model_cfg.classes);
      rec.accuracy[idx(s)] = e.accuracy;
      rec.macro_f1[idx(s)] = e.macro_f1;
      rec.metrics[idx(s)] = config.metric == MetricKind::Accuracy ? e.accuracy : e.macro_f1;
      if (s != Split::Train) rec.loss[idx(s)] = e.loss;
    }

    const HeadMetrics& seen = rec.metrics[idx(log.observation_split)];
    const EpochObservation obs = EpochObservation::from_metrics(epoch, seen.fused, seen.a, seen.b);
    rec.u_a = obs.u_a;
    rec.u_b = obs.u_b;
    rec.delta = obs.delta;

    bool stop = false;
    if (scheduler.kind == SchedulerKind::Mses) {
      const MsesDecision d = mses_step(state, obs, scheduler.mses);
      state = d.state;
      stop = d.stop;
    } else {
      state = scheduler.step(state, obs);
    }
    rec.next_alpha_a = state.alpha_a;
    rec.next_alpha_b = state.alpha_b;
    rec.action = state.last_action;
    log.epochs.push_back(rec);
    if (stop) {
      log.stopped_early = true;
      break;
    }
  }
  log.best_epoch = select_best_epoch(log.epochs);
  return log;
}

namespace {

void write_row(std::ostream& out, int epoch, std::string_view split, const HeadMetrics& m,
               real u_a, real u_b, real delta, real alpha_a, real alpha_b, real alpha_ab,
               std::string_view action, const LossBreakdown& loss) {
  out << epoch << ',' << split << ',' << format_real(m.fused) << ',' << format_real(m.a) << ','
      << format_real(m.b) << ',' << format_real(u_a) << ',' << format_real(u_b) << ','
      << format_real(delta) << ',' << format_real(alpha_a) << ',' << format_real(alpha_b) << ','
      << format_real(alpha_ab) << ',' << action << ',' << format_real(loss.fused) << ','
      << format_real(loss.a) << ',' << format_real(loss.b) << '\n';
}

}  // namespace

void write_runlog_csv(const RunLog& log, std::ostream& out) {
  out << kRunLogHeader << '\n';
  for (const EpochRecord& r : log.epochs) {
    for (Split s : kSplits) {
      const HeadMetrics& m = r.metrics[idx(s)];
      const auto u = conditional_utilization(m.fused, m.a, m.b);
      write_row(out, r.epoch, to_string(s), m, u.u_a, u.u_b, utilization_delta(u.u_a, u.u_b),
                r.alpha_a, r.alpha_b, r.alpha_ab, "", r.loss[idx(s)]);
    }
    write_row(out, r.epoch, "scheduler", r.metrics[idx(log.observation_split)], r.u_a, r.u_b,
              r.delta, r.next_alpha_a, r.next_alpha_b, r.alpha_ab, to_string(r.action),
              r.loss[idx(Split::Train)]);
  }
}

void write_runlog_csv(const RunLog& log, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  write_runlog_csv(log, out);
  if (!out) throw IoError("write to " + path.string() + " failed");
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

real parse_field(const std::string& text, const std::filesystem::path& path, std::size_t line) {
  std::size_t used = 0;
  real value = 0.0;
  try {
    value = std::stod(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != text.size() || text.empty()) {
    throw FormatError(path.string() + ":" + std::to_string(line) + ": bad number '" + text + "'");
  }
  return value;
}

}  // namespace

RunLog read_runlog_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != kRunLogHeader) {
    throw FormatError(path.string() + ": missing or unexpected RunLog header");
  }
  RunLog log;
  std::vector<HeadMetrics> observed;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != 15) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) + ": expected 15 fields");
    }
    const int epoch = static_cast<int>(parse_field(f[0], path, line_no));
    if (log.epochs.empty() || log.epochs.back().epoch != epoch) {
      log.epochs.push_back(EpochRecord{});
      log.epochs.back().epoch = epoch;
    }
    EpochRecord& r = log.epochs.back();
    auto num = [&](std::size_t i) { return parse_field(f[i], path, line_no); };
    const HeadMetrics m{num(2), num(3), num(4)};
    const LossBreakdown loss{num(12) + num(13) + num(14), num(12), num(13), num(14)};
    if (f[1] == "scheduler") {
      r.u_a = num(5);
      r.u_b = num(6);
      r.delta = num(7);
      r.next_alpha_a = num(8);
      r.next_alpha_b = num(9);
      r.action = parse_scheduler_action(f[11]);
      observed.resize(log.epochs.size());
      observed.back() = m;
    } else {
      const Split s = parse_split(f[1]);
      r.metrics[idx(s)] = m;
      r.loss[idx(s)] = loss;
      r.alpha_a = num(8);
      r.alpha_b = num(9);
      r.alpha_ab = num(10);
    }
  }
  // The scheduler rows repeat the metrics of the split it observed.
  auto matches = [&](Split s) {
    for (std::size_t i = 0; i < observed.size(); ++i) {
      const HeadMetrics& a = observed[i];
      const HeadMetrics& b = log.epochs[i].metrics[idx(s)];
      if (a.fused != b.fused || a.a != b.a || a.b != b.b) return false;
    }
    return true;
  };
  for (Split s : {Split::Validation, Split::Train, Split::Test}) {
    if (matches(s)) {
      log.observation_split = s;
      break;
    }
  }
  log.best_epoch = select_best_epoch(log.epochs);
  return log;
}

RunSummary summarize(const RunLog& log, GroupId stronger) {
  if (log.best_epoch < 0) throw InputError("summarize: run log has no epochs");
  const EpochRecord& r = log.epochs[static_cast<std::size_t>(log.best_epoch)];
  RunSummary s;
  s.best_epoch = r.epoch;
  s.val_fused = r.metrics[idx(Split::Validation)].fused;
  const HeadMetrics& t = r.metrics[idx(Split::Test)];
  s.test_fused = t.fused;
  s.test_a = t.a;
  s.test_b = t.b;
  s.gap = stronger == GroupId::ModalityA ? encoder_gap(t.a, t.b) : encoder_gap(t.b, t.a);
  return s;
}

void write_run_outputs(const RunConfig& config, const RunLog& log) {
  if (config.output_dir.empty()) return;
  std::error_code ec;
  std::filesystem::create_directories(config.output_dir, ec);
  if (ec) throw IoError("cannot create " + config.output_dir.string() + ": " + ec.message());
  write_runlog_csv(log, config.output_dir / "runlog.csv");
  const auto cfg_path = config.output_dir / "run_config.txt";
  std::ofstream cfg(cfg_path, std::ios::binary | std::ios::trunc);
  if (!cfg) throw IoError("cannot open " + cfg_path.string() + " for writing");
  cfg << log.config.to_string();
}

}  // namespace miles
