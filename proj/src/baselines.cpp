#include "hcrl/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "hcrl/errors.hpp"

namespace hcrl {

MultiHeadNet::MultiHeadNet(MLPSpec spec, Engine& rng) : spec_(std::move(spec)) {
  spec_.validate();
  const auto layers = spec_.layout();
  trunk_size_ = layers.back().weight_offset;
  head_size_ = spec_.param_count() - trunk_size_;
  params_ = xavier_init(spec_, rng).flat.head(trunk_size_);
}

void MultiHeadNet::add_head(Engine& rng) {
  const auto last = spec_.layout().back();
  const double bound = std::sqrt(6.0 / static_cast<double>(last.fan_in + last.fan_out));
  std::uniform_real_distribution<double> dist(-bound, bound);
  const Index old = params_.size();
  params_.conservativeResize(old + head_size_);
  params_.tail(head_size_).setZero();
  for (Index i = 0; i < last.fan_in * last.fan_out; ++i) params_[old + i] = dist(rng);
  ++heads_;
}

Index MultiHeadNet::head_offset(int task) const {
  if (task < 1 || task > heads_) throw DataError("multi-head net: no head for task " + std::to_string(task));
  return trunk_size_ + static_cast<Index>(task - 1) * head_size_;
}

Params MultiHeadNet::task_params(int task) const {
  Params p;
  p.flat.resize(trunk_size_ + head_size_);
  p.flat << params_.head(trunk_size_), params_.segment(head_offset(task), head_size_);
  return p;
}

void MultiHeadNet::scatter(int task, const Eigen::VectorXd& net_grad, Eigen::VectorXd& full_grad) const {
  if (full_grad.size() != params_.size()) throw ConfigError("multi-head net: gradient size mismatch");
  full_grad.head(trunk_size_) += net_grad.head(trunk_size_);
  full_grad.segment(head_offset(task), head_size_) += net_grad.tail(head_size_);
}

void MultiHeadNet::restore(MLPSpec spec, Eigen::VectorXd params, int heads) {
  spec_ = std::move(spec);
  spec_.validate();
  trunk_size_ = spec_.layout().back().weight_offset;
  head_size_ = spec_.param_count() - trunk_size_;
  if (params.size() != trunk_size_ + heads * head_size_) {
    throw IntegrityError("multi-head net: stored parameter count does not match the layout");
  }
  params_ = std::move(params);
  heads_ = heads;
}

// --- EWC ----------------------------------------------------------------------

Eigen::VectorXd empirical_fisher(const MultiHeadNet& net, int task, const Normalizer& norm,
                                 const std::vector<Transition>& items, DynLoss kind) {
  if (items.empty()) throw PreconditionError("ewc: empty buffer");
  const DynamicsModel model{net.spec(), net.task_params(task), norm};
  Eigen::VectorXd fisher = Eigen::VectorXd::Zero(net.params().size());
  Eigen::VectorXd per_sample(net.params().size());
  for (const auto& t : items) {
    const DynLossGrad g = dyn_loss_and_grad(model, make_batch(std::vector<Transition>{t}), kind);
    per_sample.setZero();
    net.scatter(task, g.grad_theta, per_sample);
    fisher += per_sample.cwiseAbs2();
  }
  return fisher / static_cast<double>(items.size());
}

void ewc_consolidate(const MultiHeadNet& net, int task, const Normalizer& norm, const ReplayBuffer& buffer,
                     EWCState& state, DynLoss kind) {
  if (buffer.empty()) throw PreconditionError("ewc_consolidate: empty buffer");
  state.anchors.push_back(EWCAnchor{net.params(), empirical_fisher(net, task, norm, buffer.contents(), kind)});
}

double ewc_penalty(const Eigen::VectorXd& theta, const EWCState& state) {
  if (state.lambda == 0.0) return 0.0;
  double total = 0.0;
  for (const auto& a : state.anchors) {
    const Index n = a.theta_star.size();
    total += (a.fisher.array() * (theta.head(n) - a.theta_star).array().square()).sum();
  }
  return 0.5 * state.lambda * total;
}

void ewc_penalty_grad(const Eigen::VectorXd& theta, const EWCState& state, Eigen::VectorXd& grad) {
  if (state.lambda == 0.0) return;
  for (const auto& a : state.anchors) {
    const Index n = a.theta_star.size();
    grad.head(n).array() += state.lambda * a.fisher.array() * (theta.head(n) - a.theta_star).array();
  }
}

// --- SI -----------------------------------------------------------------------

SIState make_si(const Eigen::VectorXd& theta, double c, double xi) {
  SIState s;
  s.omega = Eigen::VectorXd::Zero(theta.size());
  s.theta_anchor = theta;
  s.path_accumulator = Eigen::VectorXd::Zero(theta.size());
  s.c = c;
  s.xi = xi;
  return s;
}

void si_grow(SIState& state, const Eigen::VectorXd& theta) {
  const Index old = state.omega.size();
  const Index n = theta.size();
  if (n < old) throw ConfigError("si: parameter vector shrank");
  state.omega.conservativeResize(n);
  state.omega.tail(n - old).setZero();
  state.path_accumulator.conservativeResize(n);
  state.path_accumulator.tail(n - old).setZero();
  state.theta_anchor.conservativeResize(n);
  state.theta_anchor.tail(n - old) = theta.tail(n - old);
}

void si_track(SIState& state, const Eigen::VectorXd& theta_before, const Eigen::VectorXd& theta_after,
              const Eigen::VectorXd& grad) {
  state.path_accumulator.array() -= grad.array() * (theta_after - theta_before).array();
}

void si_consolidate(SIState& state, const Eigen::VectorXd& theta_end) {
  const Eigen::ArrayXd delta = (theta_end - state.theta_anchor).array();
  state.omega.array() += state.path_accumulator.array().max(0.0) / (delta.square() + state.xi);
  state.theta_anchor = theta_end;
  state.path_accumulator.setZero();
}

double si_penalty(const Eigen::VectorXd& theta, const SIState& state) {
  if (state.c == 0.0) return 0.0;
  return state.c * (state.omega.array() * (theta - state.theta_anchor).array().square()).sum();
}

void si_penalty_grad(const Eigen::VectorXd& theta, const SIState& state, Eigen::VectorXd& grad) {
  if (state.c == 0.0) return;
  grad.array() += 2.0 * state.c * state.omega.array() * (theta - state.theta_anchor).array();
}

// --- rehearsal ----------------------------------------------------------------

std::size_t coreset_quota(std::size_t n, double fraction) {
  if (n == 0) return 0;
  const auto q = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n) - 1e-9));
  return std::clamp<std::size_t>(q, 1, n);
}

void coreset_update(Coreset& coreset, const ReplayBuffer& buffer, Engine& rng, double fraction) {
  const std::size_t quota = coreset_quota(buffer.size(), fraction);
  std::vector<std::size_t> all(buffer.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  std::vector<std::size_t> picked;
  picked.reserve(quota);
  std::sample(all.begin(), all.end(), std::back_inserter(picked), quota, rng);
  for (std::size_t i : picked) coreset.kept.push_back(buffer[i]);
  coreset.per_task.push_back(quota);
}

std::pair<Batch, Batch> mixed_batch(const ReplayBuffer& buffer, const std::vector<Transition>& past,
                                    Index batch_size, Engine& rng) {
  Batch current = buffer_sample(buffer, batch_size, rng);
  Batch old = past.empty() ? Batch{} : sample_with_replacement(past, batch_size, rng);
  return {std::move(current), std::move(old)};
}

}  // namespace hcrl
