#ifndef MILES_ADAM_HPP
#define MILES_ADAM_HPP

#include <array>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "miles/tensor.hpp"

namespace miles {

enum class GroupId { ModalityA = 0, ModalityB = 1, Fusion = 2 };

inline constexpr std::array<GroupId, 3> kAllGroups = {GroupId::ModalityA, GroupId::ModalityB,
                                                      GroupId::Fusion};

std::string_view to_string(GroupId id);

struct AdamConstants {
  static constexpr real beta1 = 0.9;
  static constexpr real beta2 = 0.999;
  static constexpr real epsilon = 1e-8;
};

struct AdamState {
  std::vector<Tensor> first_moment;
  std::vector<Tensor> second_moment;
  std::int64_t step = 0;
};

/// Parameters that share one learning rate, with their Adam moments.
struct ParamGroup {
  GroupId id = GroupId::Fusion;
  std::vector<Tensor> parameters;
  AdamState state;

  /// Appends a parameter and zero moments of the same shape.
  std::size_t add(Tensor parameter);
  std::size_t parameter_count() const;
};

/// Bias-corrected Adam update of every parameter in the group:
///   m <- b1 m + (1 - b1) g,  v <- b2 v + (1 - b2) g^2
///   p <- p - lr * m_hat / (sqrt(v_hat) + eps)
/// Throws ShapeError on a gradient/parameter mismatch, ConfigError if lr <= 0.
void adam_step(ParamGroup& group, std::span<const Tensor> gradients, real lr);

}  // namespace miles

#endif  // MILES_ADAM_HPP
