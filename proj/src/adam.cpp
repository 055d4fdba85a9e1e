#include "miles/adam.hpp"

#include <cmath>
#include <string>

#include "miles/errors.hpp"

namespace miles {

std::string_view to_string(GroupId id) {
  switch (id) {
    case GroupId::ModalityA: return "ModalityA";
    case GroupId::ModalityB: return "ModalityB";
    case GroupId::Fusion: return "Fusion";
  }
  return "?";
}

std::size_t ParamGroup::add(Tensor parameter) {
  state.first_moment.push_back(Tensor::Zero(parameter.rows(), parameter.cols()));
  state.second_moment.push_back(Tensor::Zero(parameter.rows(), parameter.cols()));
  parameters.push_back(std::move(parameter));
  return parameters.size() - 1;
}

std::size_t ParamGroup::parameter_count() const {
  std::size_t count = 0;
  for (const auto& p : parameters) count += static_cast<std::size_t>(p.size());
  return count;
}

void adam_step(ParamGroup& group, std::span<const Tensor> gradients, real lr) {
  if (!(lr > 0.0)) throw ConfigError("adam_step: learning rate must be positive");
  if (gradients.size() != group.parameters.size()) {
    throw ShapeError("adam_step: " + std::to_string(gradients.size()) + " gradients for " +
                     std::to_string(group.parameters.size()) + " parameters in group " +
                     std::string(to_string(group.id)));
  }
  for (std::size_t i = 0; i < gradients.size(); ++i) {
    if (gradients[i].rows() != group.parameters[i].rows() ||
        gradients[i].cols() != group.parameters[i].cols()) {
      throw ShapeError("adam_step: gradient " + shape_string(gradients[i]) +
                       " does not match parameter " + shape_string(group.parameters[i]));
    }
  }

  using C = AdamConstants;
  AdamState& st = group.state;
  ++st.step;
  const real correction1 = 1.0 - std::pow(C::beta1, static_cast<real>(st.step));
  const real correction2 = 1.0 - std::pow(C::beta2, static_cast<real>(st.step));
  for (std::size_t i = 0; i < gradients.size(); ++i) {
    const auto& g = gradients[i].array();
    auto m = st.first_moment[i].array();
    auto v = st.second_moment[i].array();
    m = C::beta1 * m + (1.0 - C::beta1) * g;
    v = C::beta2 * v + (1.0 - C::beta2) * g.square();
    group.parameters[i].array() -=
        lr * (m / correction1) / ((v / correction2).sqrt() + C::epsilon);
  }
}

}  // namespace miles
