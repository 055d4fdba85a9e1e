#ifndef MILES_FUSION_MODEL_HPP
#define MILES_FUSION_MODEL_HPP

#include <array>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "miles/adam.hpp"
#include "miles/tape.hpp"
#include "miles/tensor.hpp"

namespace miles {

enum class FusionKind { Concat, Sum };

std::string_view to_string(FusionKind kind);
FusionKind parse_fusion_kind(std::string_view text);

struct ModelConfig {
  int dim_a = 32;
  int dim_b = 32;
  std::vector<int> hidden_a = {64};
  std::vector<int> hidden_b = {64};
  int latent_a = 32;
  int latent_b = 32;
  int classes = 10;
  FusionKind fusion = FusionKind::Concat;
  std::uint64_t seed = 0;

  /// Throws ConfigError when a dimension is < 1, classes < 2, or Sum fusion
  /// is requested with unequal latent widths.
  void validate() const;
  int fused_width() const;
};

/// Two dense+ReLU encoders, a linear fusion head on the fused latents and a
/// linear auxiliary head per encoder.
///
/// Parameter layout per group, as (weight, bias) pairs:
///   ModalityA: encoder A layers in order, then head A
///   ModalityB: encoder B layers in order, then head B
///   Fusion:    fusion head
/// Weights are d_in x d_out, biases 1 x d_out.
struct MultimodalModel {
  ModelConfig config;
  std::array<ParamGroup, 3> groups;

  ParamGroup& group(GroupId id) { return groups[static_cast<std::size_t>(id)]; }
  const ParamGroup& group(GroupId id) const { return groups[static_cast<std::size_t>(id)]; }

  std::size_t encoder_layers(GroupId modality) const;
  /// Index of the head weight inside a group (the bias follows it).
  std::size_t head_index(GroupId id) const;
  std::size_t parameter_count() const;
};

/// Glorot-uniform weights drawn from config.seed, zero biases.
MultimodalModel init_parameters(const ModelConfig& config);

/// Logits of the three heads as plain values.
struct PredictionBundle {
  Tensor logits_ab;
  Tensor logits_a;
  Tensor logits_b;
};

/// Result of recording a forward pass on a tape.
struct ForwardPass {
  Var logits_ab;
  Var logits_a;
  Var logits_b;
  Var latent_a;
  Var latent_b;
  /// Leaf handle for every parameter, same layout as the model groups.
  std::array<std::vector<Var>, 3> params;

  PredictionBundle values(const GradientTape& tape) const;
};

Var fuse(GradientTape& tape, Var latent_a, Var latent_b, FusionKind kind);

/// Records the full network. Throws ShapeError if the batches do not match
/// the configured input widths or have different row counts.
ForwardPass forward(const MultimodalModel& model, const Tensor& batch_a, const Tensor& batch_b,
                    GradientTape& tape);

/// Convenience wrapper around forward() on a throwaway tape.
PredictionBundle predict(const MultimodalModel& model, const Tensor& batch_a,
                         const Tensor& batch_b);

struct LossBreakdown {
  real total = 0.0;
  real fused = 0.0;
  real a = 0.0;
  real b = 0.0;
};

/// Recorded joint loss: total = (L_AB + L_A) + L_B.
struct JointLoss {
  Var total;
  Var fused;
  Var a;
  Var b;

  LossBreakdown values(const GradientTape& tape) const;
};

JointLoss joint_loss(GradientTape& tape, const ForwardPass& pass, std::span<const int> labels);
LossBreakdown joint_loss(const PredictionBundle& bundle, std::span<const int> labels);

using GroupGradients = std::array<std::vector<Tensor>, 3>;

/// Runs the tape backward from `loss` and gathers parameter gradients per group.
GroupGradients backward(GradientTape& tape, Var loss, const ForwardPass& pass);

}  // namespace miles

#endif  // MILES_FUSION_MODEL_HPP
