#include "hcrl/nn.hpp"

namespace hcrl {

Activation parse_activation(std::string_view name) {
  if (name == "relu" || name == "ReLU") return Activation::ReLU;
  if (name == "elu" || name == "ELU") return Activation::ELU;
  throw UsageError("unknown activation '" + std::string(name) + "' (valid: relu, elu)");
}

std::string_view to_string(Activation a) { return a == Activation::ReLU ? "relu" : "elu"; }

void MLPSpec::validate() const {
  if (input_dim < 1 || output_dim < 1) throw ConfigError("MLPSpec: input/output dims must be >= 1");
  if (hidden.empty()) throw ConfigError("MLPSpec: at least one hidden layer is required");
  for (Index h : hidden) {
    if (h < 1) throw ConfigError("MLPSpec: hidden widths must be >= 1");
  }
}

std::vector<LayerLayout> MLPSpec::layout() const {
  std::vector<LayerLayout> out;
  out.reserve(hidden.size() + 1);
  Index offset = 0;
  Index fan_in = input_dim;
  auto push = [&](Index fan_out) {
    LayerLayout l{fan_in, fan_out, offset, offset + fan_in * fan_out};
    offset = l.bias_offset + fan_out;
    fan_in = fan_out;
    out.push_back(l);
  };
  for (Index h : hidden) push(h);
  push(output_dim);
  return out;
}

Index MLPSpec::param_count() const {
  Index n = 0;
  Index fan_in = input_dim;
  for (Index h : hidden) {
    n += fan_in * h + h;
    fan_in = h;
  }
  return n + fan_in * output_dim + output_dim;
}

}  // namespace hcrl
