#include "miles/fusion_model.hpp"

#include <cmath>
#include <string>

#include "miles/errors.hpp"
#include "miles/rng.hpp"

namespace miles {

std::string_view to_string(FusionKind kind) {
  return kind == FusionKind::Concat ? "concat" : "sum";
}

FusionKind parse_fusion_kind(std::string_view text) {
  if (text == "concat") return FusionKind::Concat;
  if (text == "sum") return FusionKind::Sum;
  throw ConfigError("unknown fusion kind '" + std::string(text) + "' (expected concat|sum)");
}

void ModelConfig::validate() const {
  auto positive = [](int v, const char* name) {
    if (v < 1) throw ConfigError(std::string("model: ") + name + " must be >= 1");
  };
  positive(dim_a, "dim_a");
  positive(dim_b, "dim_b");
  positive(latent_a, "latent_a");
  positive(latent_b, "latent_b");
  for (int h : hidden_a) positive(h, "hidden_a entry");
  for (int h : hidden_b) positive(h, "hidden_b entry");
  if (classes < 2) throw ConfigError("model: classes must be >= 2");
  if (fusion == FusionKind::Sum && latent_a != latent_b) {
    throw ConfigError("model: sum fusion needs equal latent widths, got " +
                      std::to_string(latent_a) + " and " + std::to_string(latent_b));
  }
}

int ModelConfig::fused_width() const {
  return fusion == FusionKind::Concat ? latent_a + latent_b : latent_a;
}

std::size_t MultimodalModel::encoder_layers(GroupId modality) const {
  return (modality == GroupId::ModalityA ? config.hidden_a.size() : config.hidden_b.size()) + 1;
}

std::size_t MultimodalModel::head_index(GroupId id) const {
  return id == GroupId::Fusion ? 0 : 2 * encoder_layers(id);
}

std::size_t MultimodalModel::parameter_count() const {
  std::size_t count = 0;
  for (const auto& g : groups) count += g.parameter_count();
  return count;
}

namespace {

void add_dense(ParamGroup& group, Rng& rng, int fan_in, int fan_out) {
  const real bound = std::sqrt(6.0 / static_cast<real>(fan_in + fan_out));
  Tensor weight(fan_in, fan_out);
  for (Eigen::Index i = 0; i < weight.size(); ++i) weight.data()[i] = rng.uniform(-bound, bound);
  group.add(std::move(weight));
  group.add(Tensor::Zero(1, fan_out));
}

void add_branch(ParamGroup& group, Rng& rng, int input, const std::vector<int>& hidden,
                int latent, int classes) {
  int width = input;
  for (int h : hidden) {
    add_dense(group, rng, width, h);
    width = h;
  }
  add_dense(group, rng, width, latent);
  add_dense(group, rng, latent, classes);
}

// Encoder: dense+ReLU for every layer, including the latent one.
Var encode(GradientTape& tape, Var x, std::span<const Var> params, std::size_t layers) {
  for (std::size_t l = 0; l < layers; ++l) {
    x = relu(tape, dense(tape, x, params[2 * l], params[2 * l + 1]));
  }
  return x;
}

}  // namespace

MultimodalModel init_parameters(const ModelConfig& config) {
  config.validate();
  MultimodalModel model;
  model.config = config;
  model.group(GroupId::ModalityA).id = GroupId::ModalityA;
  model.group(GroupId::ModalityB).id = GroupId::ModalityB;
  model.group(GroupId::Fusion).id = GroupId::Fusion;

  Rng rng(config.seed);
  add_branch(model.group(GroupId::ModalityA), rng, config.dim_a, config.hidden_a,
             config.latent_a, config.classes);
  add_branch(model.group(GroupId::ModalityB), rng, config.dim_b, config.hidden_b,
             config.latent_b, config.classes);
  add_dense(model.group(GroupId::Fusion), rng, config.fused_width(), config.classes);
  return model;
}

Var fuse(GradientTape& tape, Var latent_a, Var latent_b, FusionKind kind) {
  if (kind == FusionKind::Concat) return concat_columns(tape, latent_a, latent_b);
  const auto wa = tape.value(latent_a).cols();
  const auto wb = tape.value(latent_b).cols();
  if (wa != wb) {
    throw ConfigError("fuse: sum fusion needs equal widths, got " + std::to_string(wa) +
                      " and " + std::to_string(wb));
  }
  return add(tape, latent_a, latent_b);
}

ForwardPass forward(const MultimodalModel& model, const Tensor& batch_a, const Tensor& batch_b,
                    GradientTape& tape) {
  const ModelConfig& cfg = model.config;
  if (batch_a.cols() != cfg.dim_a || batch_b.cols() != cfg.dim_b) {
    throw ShapeError("forward: batches " + shape_string(batch_a) + " and " +
                     shape_string(batch_b) + " do not match input widths " +
                     std::to_string(cfg.dim_a) + " and " + std::to_string(cfg.dim_b));
  }
  if (batch_a.rows() != batch_b.rows()) {
    throw ShapeError("forward: batch row counts differ, " + shape_string(batch_a) + " vs " +
                     shape_string(batch_b));
  }

  ForwardPass pass;
  for (GroupId id : kAllGroups) {
    auto& handles = pass.params[static_cast<std::size_t>(id)];
    for (const Tensor& p : model.group(id).parameters) handles.push_back(tape.leaf(p));
  }
  const auto& pa = pass.params[0];
  const auto& pb = pass.params[1];
  const auto& pf = pass.params[2];

  const Var input_a = tape.leaf(batch_a);
  const Var input_b = tape.leaf(batch_b);
  pass.latent_a = encode(tape, input_a, pa, model.encoder_layers(GroupId::ModalityA));
  pass.latent_b = encode(tape, input_b, pb, model.encoder_layers(GroupId::ModalityB));

  const std::size_t ha = model.head_index(GroupId::ModalityA);
  const std::size_t hb = model.head_index(GroupId::ModalityB);
  pass.logits_a = dense(tape, pass.latent_a, pa[ha], pa[ha + 1]);
  pass.logits_b = dense(tape, pass.latent_b, pb[hb], pb[hb + 1]);
  const Var fused = fuse(tape, pass.latent_a, pass.latent_b, cfg.fusion);
  pass.logits_ab = dense(tape, fused, pf[0], pf[1]);
  return pass;
}

PredictionBundle ForwardPass::values(const GradientTape& tape) const {
  return {tape.value(logits_ab), tape.value(logits_a), tape.value(logits_b)};
}

PredictionBundle predict(const MultimodalModel& model, const Tensor& batch_a,
                         const Tensor& batch_b) {
  GradientTape tape;
  return forward(model, batch_a, batch_b, tape).values(tape);
}

JointLoss joint_loss(GradientTape& tape, const ForwardPass& pass, std::span<const int> labels) {
  JointLoss loss;
  loss.fused = softmax_cross_entropy(tape, pass.logits_ab, labels);
  loss.a = softmax_cross_entropy(tape, pass.logits_a, labels);
  loss.b = softmax_cross_entropy(tape, pass.logits_b, labels);
  loss.total = add(tape, add(tape, loss.fused, loss.a), loss.b);
  return loss;
}

LossBreakdown JointLoss::values(const GradientTape& tape) const {
  return {tape.value(total)(0, 0), tape.value(fused)(0, 0), tape.value(a)(0, 0),
          tape.value(b)(0, 0)};
}

LossBreakdown joint_loss(const PredictionBundle& bundle, std::span<const int> labels) {
  LossBreakdown out;
  out.fused = softmax_cross_entropy_value(bundle.logits_ab, labels);
  out.a = softmax_cross_entropy_value(bundle.logits_a, labels);
  out.b = softmax_cross_entropy_value(bundle.logits_b, labels);
  out.total = (out.fused + out.a) + out.b;
  return out;
}

GroupGradients backward(GradientTape& tape, Var loss, const ForwardPass& pass) {
  tape.backward(loss);
  GroupGradients grads;
  for (std::size_t g = 0; g < grads.size(); ++g) {
    grads[g].reserve(pass.params[g].size());
    for (Var v : pass.params[g]) grads[g].push_back(tape.grad(v));
  }
  return grads;
}

}  // namespace miles
