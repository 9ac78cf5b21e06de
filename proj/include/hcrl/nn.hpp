#pragma once

// Dense feed-forward networks over a flat parameter vector.
//
// Layer l stores a column-major fan_out x fan_in weight block followed by a
// fan_out bias block. Hidden layers apply the spec's activation; the output
// layer is linear.

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "hcrl/errors.hpp"

namespace hcrl {

using Index = Eigen::Index;

template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

enum class Activation { ReLU, ELU };

Activation parse_activation(std::string_view name);
std::string_view to_string(Activation a);

struct LayerLayout {
  Index fan_in = 0;
  Index fan_out = 0;
  Index weight_offset = 0;
  Index bias_offset = 0;
};

struct MLPSpec {
  Index input_dim = 0;
  std::vector<Index> hidden;
  Index output_dim = 0;
  Activation activation = Activation::ReLU;

  /// Throws ConfigError unless every dimension is >= 1 and there is at
  /// least one hidden layer.
  void validate() const;
  std::vector<LayerLayout> layout() const;
  Index param_count() const;

  bool operator==(const MLPSpec&) const = default;
};

template <typename Scalar>
struct MLPParams {
  Vec<Scalar> flat;

  bool operator==(const MLPParams& other) const {
    return flat.size() == other.flat.size() && flat == other.flat;
  }
};

using Params = MLPParams<double>;

namespace detail {

template <typename Scalar>
inline Scalar activate(Activation act, Scalar z) {
  if (act == Activation::ReLU) return z > Scalar(0) ? z : Scalar(0);
  return z > Scalar(0) ? z : std::expm1(z);
}

// ReLU'(0) = 0, ELU'(0) = 1.
template <typename Scalar>
inline Scalar activate_deriv(Activation act, Scalar z) {
  if (act == Activation::ReLU) return z > Scalar(0) ? Scalar(1) : Scalar(0);
  return z >= Scalar(0) ? Scalar(1) : std::exp(z);
}

template <typename Scalar>
void check_params(const MLPParams<Scalar>& p, const MLPSpec& spec) {
  spec.validate();
  if (p.flat.size() != spec.param_count()) {
    throw ConfigError("mlp: parameter vector has " + std::to_string(p.flat.size()) +
                      " entries, spec needs " + std::to_string(spec.param_count()));
  }
}

template <typename Scalar>
Eigen::Map<const Mat<Scalar>> weight(const Vec<Scalar>& flat, const LayerLayout& l) {
  return {flat.data() + l.weight_offset, l.fan_out, l.fan_in};
}

template <typename Scalar>
Eigen::Map<const Vec<Scalar>> bias(const Vec<Scalar>& flat, const LayerLayout& l) {
  return {flat.data() + l.bias_offset, l.fan_out};
}

}  // namespace detail

/// Evaluates the network on every column of `x` (input_dim x batch).
template <typename Scalar>
Mat<Scalar> mlp_forward_batch(const MLPParams<Scalar>& params, const MLPSpec& spec,
                              const Mat<Scalar>& x) {
  detail::check_params(params, spec);
  if (x.rows() != spec.input_dim) {
    throw ConfigError("mlp_forward: input has " + std::to_string(x.rows()) + " rows, expected " +
                      std::to_string(spec.input_dim));
  }
  const auto layers = spec.layout();
  Mat<Scalar> a = x;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    Mat<Scalar> z = detail::weight(params.flat, layers[l]) * a;
    z.colwise() += detail::bias(params.flat, layers[l]);
    if (l + 1 < layers.size()) {
      z = z.unaryExpr([act = spec.activation](Scalar v) { return detail::activate(act, v); });
    }
    a = std::move(z);
  }
  return a;
}

template <typename Scalar>
Vec<Scalar> mlp_forward(const MLPParams<Scalar>& params, const MLPSpec& spec, const Vec<Scalar>& x) {
  if (x.size() != spec.input_dim) {
    throw ConfigError("mlp_forward: input has length " + std::to_string(x.size()) +
                      ", expected " + std::to_string(spec.input_dim));
  }
  Mat<Scalar> col = x;
  return mlp_forward_batch(params, spec, col).col(0);
}

template <typename Scalar>
struct MLPGrad {
  Vec<Scalar> params;  // summed over the batch
  Mat<Scalar> input;   // one column per sample
};

/// Adds the parameter gradient of sum_b upstream_b . f(x_b) to
/// `grad_params` (length param_count) and returns the input gradient, one
/// column per sample.
template <typename Scalar>
Mat<Scalar> mlp_backward_accumulate(const MLPParams<Scalar>& params, const MLPSpec& spec, const Mat<Scalar>& x,
                                    const Mat<Scalar>& upstream, Vec<Scalar>& grad_params) {
  detail::check_params(params, spec);
  if (x.rows() != spec.input_dim || upstream.rows() != spec.output_dim ||
      upstream.cols() != x.cols()) {
    throw ConfigError("mlp_grad: input/upstream shape mismatch");
  }
  if (grad_params.size() != params.flat.size()) throw ConfigError("mlp_grad: gradient buffer has the wrong length");
  const auto layers = spec.layout();
  const std::size_t n = layers.size();

  // acts[l] is the input to layer l; pre[l] the pre-activation of hidden layer l.
  std::vector<Mat<Scalar>> acts(n);
  std::vector<Mat<Scalar>> pre(n);
  acts[0] = x;
  for (std::size_t l = 0; l + 1 < n; ++l) {
    pre[l] = detail::weight(params.flat, layers[l]) * acts[l];
    pre[l].colwise() += detail::bias(params.flat, layers[l]);
    acts[l + 1] = pre[l].unaryExpr(
        [act = spec.activation](Scalar v) { return detail::activate(act, v); });
  }

  Mat<Scalar> delta = upstream;
  for (std::size_t l = n; l-- > 0;) {
    const auto& lay = layers[l];
    Eigen::Map<Mat<Scalar>> gw(grad_params.data() + lay.weight_offset, lay.fan_out, lay.fan_in);
    Eigen::Map<Vec<Scalar>> gb(grad_params.data() + lay.bias_offset, lay.fan_out);
    gw.noalias() += delta * acts[l].transpose();
    gb += delta.rowwise().sum();
    Mat<Scalar> back = detail::weight(params.flat, lay).transpose() * delta;
    if (l > 0) {
      back.array() *= pre[l - 1]
                          .unaryExpr([act = spec.activation](Scalar v) {
                            return detail::activate_deriv(act, v);
                          })
                          .array();
    }
    delta = std::move(back);
  }
  return delta;
}

/// Gradient of sum_b upstream_b . f(x_b) with respect to parameters and inputs.
template <typename Scalar>
MLPGrad<Scalar> mlp_grad_batch(const MLPParams<Scalar>& params, const MLPSpec& spec,
                               const Mat<Scalar>& x, const Mat<Scalar>& upstream) {
  MLPGrad<Scalar> g;
  g.params = Vec<Scalar>::Zero(params.flat.size());
  g.input = mlp_backward_accumulate(params, spec, x, upstream, g.params);
  return g;
}

template <typename Scalar>
MLPGrad<Scalar> mlp_grad(const MLPParams<Scalar>& params, const MLPSpec& spec, const Vec<Scalar>& x,
                         const Vec<Scalar>& upstream) {
  if (x.size() != spec.input_dim || upstream.size() != spec.output_dim) {
    throw ConfigError("mlp_grad: input/upstream length mismatch");
  }
  Mat<Scalar> xc = x;
  Mat<Scalar> uc = upstream;
  return mlp_grad_batch(params, spec, xc, uc);
}

/// Glorot-uniform weights, zero biases.
template <typename Scalar = double, typename Engine>
MLPParams<Scalar> xavier_init(const MLPSpec& spec, Engine& rng) {
  spec.validate();
  MLPParams<Scalar> p;
  p.flat = Vec<Scalar>::Zero(spec.param_count());
  for (const auto& lay : spec.layout()) {
    const double bound = std::sqrt(6.0 / static_cast<double>(lay.fan_in + lay.fan_out));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (Index i = 0; i < lay.fan_in * lay.fan_out; ++i) {
      p.flat[lay.weight_offset + i] = static_cast<Scalar>(dist(rng));
    }
  }
  return p;
}

template <typename Scalar = double>
MLPParams<Scalar> xavier_init(const MLPSpec& spec, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return xavier_init<Scalar>(spec, rng);
}

template <typename Scalar>
struct AdamState {
  Vec<Scalar> first_moment;
  Vec<Scalar> second_moment;
  std::int64_t step_count = 0;
  Scalar beta1 = Scalar(0.9);
  Scalar beta2 = Scalar(0.999);
  Scalar epsilon = Scalar(1e-8);

  AdamState() = default;
  explicit AdamState(Index n)
      : first_moment(Vec<Scalar>::Zero(n)), second_moment(Vec<Scalar>::Zero(n)) {}

  /// Extends both moments with zeros (new output heads).
  void grow(Index n) {
    const Index old = first_moment.size();
    if (n < old) throw ConfigError("adam: cannot shrink optimizer state");
    first_moment.conservativeResize(n);
    second_moment.conservativeResize(n);
    first_moment.tail(n - old).setZero();
    second_moment.tail(n - old).setZero();
  }
};

/// One bias-corrected Adam update of `params` in place.
template <typename Scalar>
void adam_step(AdamState<Scalar>& state, Vec<Scalar>& params, const Vec<Scalar>& grads, Scalar lr) {
  if (params.size() != grads.size() || state.first_moment.size() != params.size()) {
    throw ConfigError("adam_step: length mismatch");
  }
  if (!grads.allFinite()) throw DivergenceError("adam_step: non-finite gradient");
  state.step_count += 1;
  state.first_moment = state.beta1 * state.first_moment + (Scalar(1) - state.beta1) * grads;
  state.second_moment =
      state.beta2 * state.second_moment + (Scalar(1) - state.beta2) * grads.cwiseAbs2();
  const auto t = static_cast<Scalar>(state.step_count);
  const Scalar c1 = Scalar(1) - std::pow(state.beta1, t);
  const Scalar c2 = Scalar(1) - std::pow(state.beta2, t);
  params.array() -= lr * (state.first_moment.array() / c1) /
                    ((state.second_moment.array() / c2).sqrt() + state.epsilon);
}

}  // namespace hcrl
