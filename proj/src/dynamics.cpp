#include "hcrl/dynamics.hpp"

#include <string>

#include "hcrl/errors.hpp"

namespace hcrl {

namespace {

template <typename Get>
Batch stack(std::size_t n, Get get) {
  Batch b;
  if (n == 0) return b;
  const auto& first = get(0);
  const Index ds = first.s.size();
  const Index da = first.a.size();
  b.states.resize(ds, static_cast<Index>(n));
  b.actions.resize(da, static_cast<Index>(n));
  b.next_states.resize(ds, static_cast<Index>(n));
  b.task_ids.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Transition& t = get(i);
    const auto c = static_cast<Index>(i);
    b.states.col(c) = t.s;
    b.actions.col(c) = t.a;
    b.next_states.col(c) = t.s_next;
    b.task_ids[i] = t.task_id;
  }
  return b;
}

}  // namespace

Batch make_batch(const std::vector<Transition>& items) {
  return stack(items.size(), [&](std::size_t i) -> const Transition& { return items[i]; });
}

Batch make_batch(const std::vector<const Transition*>& items) {
  return stack(items.size(), [&](std::size_t i) -> const Transition& { return *items[i]; });
}

Batch select_task(const Batch& b, int task_id) {
  std::vector<Index> cols;
  for (std::size_t i = 0; i < b.task_ids.size(); ++i) {
    if (b.task_ids[i] == task_id) cols.push_back(static_cast<Index>(i));
  }
  Batch out;
  out.states = b.states(Eigen::all, cols);
  out.actions = b.actions(Eigen::all, cols);
  out.next_states = b.next_states(Eigen::all, cols);
  out.task_ids.assign(cols.size(), task_id);
  return out;
}

void ReplayBuffer::reset(int task_id) {
  items_.clear();
  task_id_ = task_id;
}

void ReplayBuffer::add(Transition t) {
  if (t.task_id != task_id_) {
    throw DataError("replay buffer for task " + std::to_string(task_id_) +
                    " received a transition from task " + std::to_string(t.task_id));
  }
  if (!t.s.allFinite() || !t.a.allFinite() || !t.s_next.allFinite()) {
    throw DataError("replay buffer: non-finite transition");
  }
  if (items_.size() == capacity_) items_.pop_front();
  items_.push_back(std::move(t));
}

Batch buffer_sample(const ReplayBuffer& buffer, Index batch_size, Engine& rng) {
  if (buffer.empty()) throw PreconditionError("buffer_sample: empty buffer");
  std::uniform_int_distribution<std::size_t> pick(0, buffer.size() - 1);
  std::vector<const Transition*> chosen(static_cast<std::size_t>(batch_size));
  for (auto& c : chosen) c = &buffer[pick(rng)];
  return make_batch(chosen);
}

Batch sample_with_replacement(const std::vector<Transition>& items, Index batch_size, Engine& rng) {
  if (items.empty()) throw PreconditionError("sample_with_replacement: empty store");
  std::uniform_int_distribution<std::size_t> pick(0, items.size() - 1);
  std::vector<const Transition*> chosen(static_cast<std::size_t>(batch_size));
  for (auto& c : chosen) c = &items[pick(rng)];
  return make_batch(chosen);
}

Eigen::VectorXd Normalizer::apply(const Eigen::VectorXd& s, const Eigen::VectorXd& a) const {
  Eigen::VectorXd x(s.size() + a.size());
  x << s, a;
  if (x.size() != mean.size()) throw ConfigError("normalizer: input dimension mismatch");
  return ((x - mean).array() / std.array()).matrix();
}

Eigen::MatrixXd Normalizer::apply_batch(const Eigen::MatrixXd& states,
                                        const Eigen::MatrixXd& actions) const {
  if (states.rows() + actions.rows() != mean.size() || states.cols() != actions.cols()) {
    throw ConfigError("normalizer: batch dimension mismatch");
  }
  Eigen::MatrixXd x(mean.size(), states.cols());
  x.topRows(states.rows()) = states;
  x.bottomRows(actions.rows()) = actions;
  x.colwise() -= mean;
  x.array().colwise() /= std.array();
  return x;
}

namespace {

template <typename Get>
Normalizer fit(std::size_t n, Get get) {
  if (n == 0) throw PreconditionError("normalizer_fit: empty buffer");
  const Index dim = get(0).s.size() + get(0).a.size();
  const Index sdim = get(0).s.size();
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(dim);
  Eigen::VectorXd dsum = Eigen::VectorXd::Zero(sdim);
  Eigen::VectorXd x(dim);
  for (std::size_t i = 0; i < n; ++i) {
    x << get(i).s, get(i).a;
    sum += x;
    dsum += get(i).s_next - get(i).s;
  }
  Normalizer out;
  out.count = n;
  out.mean = sum / static_cast<double>(n);
  const Eigen::VectorXd dmean = dsum / static_cast<double>(n);
  Eigen::VectorXd sq = Eigen::VectorXd::Zero(dim);
  Eigen::VectorXd dsq = Eigen::VectorXd::Zero(sdim);
  for (std::size_t i = 0; i < n; ++i) {
    x << get(i).s, get(i).a;
    sq += (x - out.mean).cwiseAbs2();
    dsq += (get(i).s_next - get(i).s - dmean).cwiseAbs2();
  }
  out.std = (sq / static_cast<double>(n)).cwiseSqrt().cwiseMax(kNormalizerStdFloor);
  out.delta_scale = (dsq / static_cast<double>(n)).cwiseSqrt().cwiseMax(kDeltaScaleFloor);
  return out;
}

}  // namespace

Normalizer normalizer_fit(const ReplayBuffer& buffer) {
  return fit(buffer.size(), [&](std::size_t i) -> const Transition& { return buffer[i]; });
}

Normalizer normalizer_fit(const std::vector<Transition>& items) {
  return fit(items.size(), [&](std::size_t i) -> const Transition& { return items[i]; });
}

MLPSpec target_spec(Index state_dim, Index action_dim, std::vector<Index> hidden) {
  MLPSpec spec{state_dim + action_dim, std::move(hidden), state_dim, Activation::ReLU};
  spec.validate();
  return spec;
}

Eigen::VectorXd DynamicsModel::predict_next(const Eigen::VectorXd& s,
                                            const Eigen::VectorXd& a) const {
  if (s.size() + a.size() != spec.input_dim || s.size() != spec.output_dim) {
    throw ConfigError("predict_next: state/action dimension mismatch");
  }
  Eigen::VectorXd d = mlp_forward(theta, spec, norm.apply(s, a));
  if (norm.delta_scale.size() != 0) d.array() *= norm.delta_scale.array();
  return s + d;
}

Eigen::MatrixXd DynamicsModel::predict_batch(const Eigen::MatrixXd& states,
                                             const Eigen::MatrixXd& actions) const {
  if (states.rows() != spec.output_dim) throw ConfigError("predict_batch: state dimension mismatch");
  Eigen::MatrixXd d = mlp_forward_batch(theta, spec, norm.apply_batch(states, actions));
  if (norm.delta_scale.size() != 0) d.array().colwise() *= norm.delta_scale.array();
  return states + d;
}

namespace {

Eigen::MatrixXd residuals(const DynamicsModel& model, const Batch& batch) {
  return model.predict_batch(batch.states, batch.actions) - batch.next_states;
}

}  // namespace

double dyn_loss(const DynamicsModel& model, const Batch& batch, DynLoss kind) {
  if (batch.empty()) throw PreconditionError("dyn_loss: empty batch");
  const Eigen::MatrixXd r = residuals(model, batch);
  const double n = static_cast<double>(batch.size());
  if (kind == DynLoss::MeanSquaredNorm) return r.colwise().squaredNorm().sum() / n;
  return r.colwise().norm().sum() / n;
}

DynLossGrad dyn_loss_and_grad(const DynamicsModel& model, const Batch& batch, DynLoss kind,
                              double weight) {
  if (batch.empty()) throw PreconditionError("dyn_loss: empty batch");
  const Eigen::MatrixXd x = model.norm.apply_batch(batch.states, batch.actions);
  const bool scaled = model.norm.delta_scale.size() != 0;
  Eigen::MatrixXd r = mlp_forward_batch(model.theta, model.spec, x);
  if (scaled) r.array().colwise() *= model.norm.delta_scale.array();
  r += batch.states - batch.next_states;
  const double scale = weight / static_cast<double>(batch.size());

  DynLossGrad out;
  Eigen::MatrixXd upstream(r.rows(), r.cols());
  if (kind == DynLoss::MeanSquaredNorm) {
    out.loss = scale * r.colwise().squaredNorm().sum();
    upstream = 2.0 * scale * r;
  } else {
    double total = 0.0;
    for (Index c = 0; c < r.cols(); ++c) {
      const double norm = r.col(c).norm();
      total += norm;
      // Subgradient 0 at an exact prediction.
      if (norm > 0.0) {
        upstream.col(c) = (scale / norm) * r.col(c);
      } else {
        upstream.col(c).setZero();
      }
    }
    out.loss = scale * total;
  }
  if (scaled) upstream.array().colwise() *= model.norm.delta_scale.array();
  out.grad_theta = mlp_grad_batch(model.theta, model.spec, x, upstream).params;
  return out;
}

}  // namespace hcrl
