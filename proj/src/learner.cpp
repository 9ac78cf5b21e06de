#include "hcrl/learner.hpp"

#include <algorithm>
#include <set>

#include "hcrl/errors.hpp"

namespace hcrl {

namespace {

struct MethodName {
  Method method;
  const char* name;
};

constexpr MethodName kMethods[] = {
    {Method::HyperCRL, "hypercrl"}, {Method::Finetune, "finetune"},   {Method::EWC, "ewc"},
    {Method::SI, "si"},             {Method::Coreset, "coreset"},     {Method::Multitask, "multitask"},
    {Method::HyperCRLMT, "hypercrl-mt"}, {Method::Single, "single"},
};

}  // namespace

const std::vector<std::string>& method_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> v;
    for (const auto& m : kMethods) v.emplace_back(m.name);
    return v;
  }();
  return names;
}

Method parse_method(std::string_view name) {
  for (const auto& m : kMethods) {
    if (name == m.name) return m.method;
  }
  std::string valid;
  for (const auto& n : method_names()) valid += (valid.empty() ? "" : ", ") + n;
  throw UsageError("unknown method '" + std::string(name) + "' (valid: " + valid + ")");
}

std::string_view to_string(Method m) {
  for (const auto& entry : kMethods) {
    if (entry.method == m) return entry.name;
  }
  return "?";
}

bool replays_past(Method m) {
  return m == Method::Coreset || m == Method::Multitask || m == Method::HyperCRLMT;
}

// --- archive helpers -----------------------------------------------------------

void save_transitions(Archive& out, const std::string& prefix, const std::vector<Transition>& items) {
  const auto n = static_cast<Index>(items.size());
  out.put(prefix + ".count", static_cast<std::int64_t>(n));
  if (n == 0) return;
  const Batch b = make_batch(items);
  out.put_matrix(prefix + ".s", b.states);
  out.put_matrix(prefix + ".a", b.actions);
  out.put_matrix(prefix + ".s_next", b.next_states);
  Eigen::VectorXd ids(n);
  for (Index i = 0; i < n; ++i) ids[i] = b.task_ids[static_cast<std::size_t>(i)];
  out.put(prefix + ".task", std::move(ids));
}

std::vector<Transition> load_transitions(const Archive& in, const std::string& prefix) {
  const auto n = static_cast<Index>(in.get_i64(prefix + ".count"));
  std::vector<Transition> items;
  if (n == 0) return items;
  const Eigen::MatrixXd s = in.get_matrix(prefix + ".s");
  const Eigen::MatrixXd a = in.get_matrix(prefix + ".a");
  const Eigen::MatrixXd sn = in.get_matrix(prefix + ".s_next");
  const Eigen::VectorXd& ids = in.get_vec(prefix + ".task");
  if (s.cols() != n || a.cols() != n || sn.cols() != n || ids.size() != n) {
    throw IntegrityError("checkpoint: transition store '" + prefix + "' is inconsistent");
  }
  items.reserve(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) items.push_back(Transition{s.col(i), a.col(i), sn.col(i), static_cast<int>(ids[i])});
  return items;
}

void save_normalizers(Archive& out, const std::vector<Normalizer>& norms) {
  out.put("norm.count", static_cast<std::int64_t>(norms.size()));
  for (std::size_t i = 0; i < norms.size(); ++i) {
    const std::string p = "norm." + std::to_string(i + 1);
    out.put(p + ".mean", norms[i].mean);
    out.put(p + ".std", norms[i].std);
    out.put(p + ".delta", norms[i].delta_scale);
    out.put(p + ".n", static_cast<std::int64_t>(norms[i].count));
  }
}

std::vector<Normalizer> load_normalizers(const Archive& in) {
  std::vector<Normalizer> norms(static_cast<std::size_t>(in.get_i64("norm.count")));
  for (std::size_t i = 0; i < norms.size(); ++i) {
    const std::string p = "norm." + std::to_string(i + 1);
    norms[i].mean = in.get_vec(p + ".mean");
    norms[i].std = in.get_vec(p + ".std");
    norms[i].delta_scale = in.get_vec(p + ".delta");
    norms[i].count = static_cast<std::size_t>(in.get_i64(p + ".n"));
  }
  return norms;
}

namespace {

void save_adam(Archive& out, const std::string& p, const AdamState<double>& s) {
  out.put(p + ".m", s.first_moment);
  out.put(p + ".v", s.second_moment);
  out.put(p + ".step", static_cast<std::int64_t>(s.step_count));
}

void load_adam(const Archive& in, const std::string& p, AdamState<double>& s) {
  s.first_moment = in.get_vec(p + ".m");
  s.second_moment = in.get_vec(p + ".v");
  s.step_count = in.get_i64(p + ".step");
}

AdamState<double> fresh_adam(Index n) {
  AdamState<double> s;
  s.grow(n);
  return s;
}

void check_current(const Batch& b, int task) {
  for (int id : b.task_ids) {
    if (id != task) throw DataError("learner: current batch holds data from task " + std::to_string(id));
  }
}

std::vector<int> distinct_tasks(const Batch& b) {
  std::set<int> ids(b.task_ids.begin(), b.task_ids.end());
  return {ids.begin(), ids.end()};
}

// --- hypernetwork learners -----------------------------------------------------

class HypernetLearner final : public Learner {
 public:
  HypernetLearner(const LearnerOptions& o, const RngStreams& streams)
      : opts_(o), streams_(streams), target_(target_spec(o.state_dim, o.action_dim, o.target_hidden)) {
    Engine rng = streams_.engine("init");
    const double beta = o.method == Method::HyperCRLMT ? 0.0 : o.beta_reg;
    state_ = make_hypernet(target_, o.hnet_hidden, o.hnet_activation, beta, rng);
  }

  Method method() const override { return opts_.method; }
  int tasks() const override { return state_.task_index(); }
  const HypernetState& state() const { return state_; }

  void begin_task(int task_id) override {
    Engine rng = streams_.engine("embedding", static_cast<std::uint64_t>(task_id));
    hcrl::begin_task(state_, new_task_embedding(rng, task_id));
    norms_.emplace_back(target_.input_dim);
    theta_opt_ = fresh_adam(state_.theta.flat.size());
    e_opt_ = fresh_adam(kEmbeddingDim);
  }

  void fit_normalizer(const ReplayBuffer& buffer) override { norms_.at(current_index()) = normalizer_fit(buffer); }

  void update(const Batch& current, const Batch& past) override {
    const int t = tasks();
    check_current(current, t);
    std::vector<Batch> slices;
    std::vector<TaskBatch> parts{TaskBatch{t, &current, &norms_[current_index()], 1.0}};
    const bool mt = opts_.method == Method::HyperCRLMT;
    if (!past.empty()) {
      if (!mt) throw DataError("hypercrl: received past-task data");
      const std::vector<int> ids = distinct_tasks(past);
      slices.reserve(ids.size());
      for (int id : ids) {
        if (id < 1 || id >= t) throw DataError("hypercrl-mt: past batch holds task " + std::to_string(id));
        slices.push_back(select_task(past, id));
      }
      for (std::size_t k = 0; k < ids.size(); ++k) {
        const double w = static_cast<double>(slices[k].size()) / static_cast<double>(past.size());
        parts.push_back(TaskBatch{ids[k], &slices[k], &norms_[static_cast<std::size_t>(ids[k] - 1)], w});
      }
    }
    hypernet_loss_and_grads(state_, target_, parts, opts_.loss, !mt, work_);
    adam_step(theta_opt_, state_.theta.flat, work_.grad_theta, opts_.alpha_theta);
    adam_step(e_opt_, state_.embeddings.back().values, work_.grad_e, opts_.alpha_e);
  }

  void end_task(const ReplayBuffer& buffer) override {
    if (opts_.method != Method::HyperCRLMT) return;
    const auto items = buffer.contents();
    history_.insert(history_.end(), items.begin(), items.end());
  }

  const std::vector<Transition>& past_store() const override { return history_; }

  DynamicsModel model_for(int task_id) const override {
    return DynamicsModel{target_, generate(state_, state_.embedding(task_id)),
                         norms_.at(static_cast<std::size_t>(task_id - 1))};
  }

  void save(Archive& out) const override {
    out.put("hnet.theta", state_.theta.flat);
    Eigen::MatrixXd embeds(kEmbeddingDim, tasks());
    for (int i = 0; i < tasks(); ++i) embeds.col(i) = state_.embeddings[static_cast<std::size_t>(i)].values;
    out.put_matrix("hnet.embeddings", embeds);
    out.put("hnet.has_snapshot", static_cast<std::int64_t>(state_.snapshot.has_value()));
    if (state_.snapshot) out.put("hnet.snapshot", state_.snapshot->flat);
    out.put_matrix("hnet.snapshot_outputs", state_.snapshot_outputs);
    save_adam(out, "hnet.adam_theta", theta_opt_);
    save_adam(out, "hnet.adam_e", e_opt_);
    save_normalizers(out, norms_);
    save_transitions(out, "history", history_);
  }

  void load(const Archive& in) override {
    const Eigen::VectorXd& theta = in.get_vec("hnet.theta");
    if (theta.size() != state_.theta.flat.size()) {
      throw IntegrityError("checkpoint: hypernetwork size does not match the configuration");
    }
    state_.theta.flat = theta;
    const Eigen::MatrixXd embeds = in.get_matrix("hnet.embeddings");
    state_.embeddings.clear();
    for (Index i = 0; i < embeds.cols(); ++i) {
      state_.embeddings.push_back(TaskEmbedding{embeds.col(i), static_cast<int>(i + 1), i + 1 == embeds.cols()});
    }
    if (in.get_i64("hnet.has_snapshot") != 0) {
      state_.snapshot = Params{in.get_vec("hnet.snapshot")};
    } else {
      state_.snapshot.reset();
    }
    state_.snapshot_outputs = in.get_matrix("hnet.snapshot_outputs");
    load_adam(in, "hnet.adam_theta", theta_opt_);
    load_adam(in, "hnet.adam_e", e_opt_);
    norms_ = load_normalizers(in);
    history_ = load_transitions(in, "history");
  }

 private:
  std::size_t current_index() const {
    if (tasks() == 0) throw StateError("learner: no task has started");
    return static_cast<std::size_t>(tasks() - 1);
  }

  LearnerOptions opts_;
  RngStreams streams_;
  MLPSpec target_;
  HypernetState state_;
  std::vector<Normalizer> norms_;
  AdamState<double> theta_opt_;
  AdamState<double> e_opt_;
  std::vector<Transition> history_;
  HypernetLossGrads work_;
};

// --- multi-head baselines ------------------------------------------------------

class MultiHeadLearner final : public Learner {
 public:
  MultiHeadLearner(const LearnerOptions& o, const RngStreams& streams) : opts_(o), streams_(streams) {
    Engine rng = streams_.engine("init");
    net_ = MultiHeadNet(target_spec(o.state_dim, o.action_dim, o.target_hidden), rng);
    ewc_.lambda = o.method == Method::EWC ? o.ewc_lambda : 0.0;
    si_ = make_si(net_.params(), o.method == Method::SI ? o.si_c : 0.0, o.si_xi);
  }

  Method method() const override { return opts_.method; }
  int tasks() const override { return net_.heads(); }

  void begin_task(int task_id) override {
    if (task_id != tasks() + 1) {
      throw StateError("learner: expected task " + std::to_string(tasks() + 1) + ", got " + std::to_string(task_id));
    }
    Engine rng = streams_.engine("head", static_cast<std::uint64_t>(task_id));
    net_.add_head(rng);
    norms_.emplace_back(net_.spec().input_dim);
    opt_ = fresh_adam(net_.params().size());
    if (opts_.method == Method::SI) si_grow(si_, net_.params());
  }

  void fit_normalizer(const ReplayBuffer& buffer) override {
    if (tasks() == 0) throw StateError("learner: no task has started");
    norms_.back() = normalizer_fit(buffer);
  }

  void update(const Batch& current, const Batch& past) override {
    const int t = tasks();
    check_current(current, t);
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(net_.params().size());
    add_task_term(t, current, 1.0, grad);
    if (!past.empty()) {
      if (!replays_past(opts_.method)) throw DataError("learner: received past-task data");
      for (int id : distinct_tasks(past)) {
        if (id < 1 || id >= t) throw DataError("learner: past batch holds task " + std::to_string(id));
        const Batch slice = select_task(past, id);
        add_task_term(id, slice, static_cast<double>(slice.size()) / static_cast<double>(past.size()), grad);
      }
    }
    ewc_penalty_grad(net_.params(), ewc_, grad);
    si_penalty_grad(net_.params(), si_, grad);

    if (opts_.method == Method::SI) {
      const Eigen::VectorXd before = net_.params();
      adam_step(opt_, net_.params(), grad, opts_.alpha_theta);
      si_track(si_, before, net_.params(), grad);
    } else {
      adam_step(opt_, net_.params(), grad, opts_.alpha_theta);
    }
  }

  void end_task(const ReplayBuffer& buffer) override {
    const int t = tasks();
    switch (opts_.method) {
      case Method::EWC:
        if (ewc_.lambda != 0.0) ewc_consolidate(net_, t, norms_.back(), buffer, ewc_, opts_.loss);
        break;
      case Method::SI:
        si_consolidate(si_, net_.params());
        break;
      case Method::Coreset: {
        Engine rng = streams_.engine("coreset", static_cast<std::uint64_t>(t));
        coreset_update(coreset_, buffer, rng);
        break;
      }
      case Method::Multitask: {
        const auto items = buffer.contents();
        history_.insert(history_.end(), items.begin(), items.end());
        break;
      }
      default:
        break;
    }
  }

  const std::vector<Transition>& past_store() const override {
    return opts_.method == Method::Coreset ? coreset_.kept : history_;
  }

  DynamicsModel model_for(int task_id) const override {
    return DynamicsModel{net_.spec(), net_.task_params(task_id), norms_.at(static_cast<std::size_t>(task_id - 1))};
  }

  const MultiHeadNet& net() const { return net_; }
  const EWCState& ewc() const { return ewc_; }
  const SIState& si() const { return si_; }
  const Coreset& coreset() const { return coreset_; }

  void save(Archive& out) const override {
    out.put("net.params", net_.params());
    out.put("net.heads", net_.heads());
    save_adam(out, "net.adam", opt_);
    save_normalizers(out, norms_);
    out.put("ewc.count", static_cast<std::int64_t>(ewc_.anchors.size()));
    for (std::size_t i = 0; i < ewc_.anchors.size(); ++i) {
      out.put("ewc." + std::to_string(i + 1) + ".theta", ewc_.anchors[i].theta_star);
      out.put("ewc." + std::to_string(i + 1) + ".fisher", ewc_.anchors[i].fisher);
    }
    out.put("si.omega", si_.omega);
    out.put("si.anchor", si_.theta_anchor);
    out.put("si.path", si_.path_accumulator);
    save_transitions(out, "coreset", coreset_.kept);
    Eigen::VectorXd quota(static_cast<Index>(coreset_.per_task.size()));
    for (std::size_t i = 0; i < coreset_.per_task.size(); ++i) quota[static_cast<Index>(i)] = coreset_.per_task[i];
    out.put("coreset.quota", std::move(quota));
    save_transitions(out, "history", history_);
  }

  void load(const Archive& in) override {
    net_.restore(net_.spec(), in.get_vec("net.params"), static_cast<int>(in.get_i64("net.heads")));
    load_adam(in, "net.adam", opt_);
    norms_ = load_normalizers(in);
    ewc_.anchors.clear();
    const auto anchors = in.get_i64("ewc.count");
    for (std::int64_t i = 1; i <= anchors; ++i) {
      ewc_.anchors.push_back(EWCAnchor{in.get_vec("ewc." + std::to_string(i) + ".theta"),
                                       in.get_vec("ewc." + std::to_string(i) + ".fisher")});
    }
    si_.omega = in.get_vec("si.omega");
    si_.theta_anchor = in.get_vec("si.anchor");
    si_.path_accumulator = in.get_vec("si.path");
    coreset_.kept = load_transitions(in, "coreset");
    coreset_.per_task.clear();
    for (double q : in.get_vec("coreset.quota")) coreset_.per_task.push_back(static_cast<std::size_t>(q));
    history_ = load_transitions(in, "history");
  }

 private:
  void add_task_term(int task, const Batch& b, double weight, Eigen::VectorXd& grad) const {
    const DynamicsModel model{net_.spec(), net_.task_params(task), norms_.at(static_cast<std::size_t>(task - 1))};
    const DynLossGrad dg = dyn_loss_and_grad(model, b, opts_.loss, weight);
    if (!std::isfinite(dg.loss)) throw DivergenceError("learner: non-finite dynamics loss");
    net_.scatter(task, dg.grad_theta, grad);
  }

  LearnerOptions opts_;
  RngStreams streams_;
  MultiHeadNet net_;
  std::vector<Normalizer> norms_;
  AdamState<double> opt_;
  EWCState ewc_;
  SIState si_;
  Coreset coreset_;
  std::vector<Transition> history_;
};

}  // namespace

std::unique_ptr<Learner> make_learner(const LearnerOptions& options, const RngStreams& streams) {
  if (options.state_dim < 1 || options.action_dim < 1) throw ConfigError("learner: state/action dims must be >= 1");
  if (!(options.alpha_theta > 0.0) || !(options.alpha_e > 0.0)) throw ConfigError("learner: learning rates must be > 0");
  if (options.beta_reg < 0.0 || options.ewc_lambda < 0.0 || options.si_c < 0.0 || !(options.si_xi > 0.0)) {
    throw ConfigError("learner: regularization strengths must be >= 0 (si_xi > 0)");
  }
  switch (options.method) {
    case Method::HyperCRL:
    case Method::HyperCRLMT:
      return std::make_unique<HypernetLearner>(options, streams);
    default:
      return std::make_unique<MultiHeadLearner>(options, streams);
  }
}

}  // namespace hcrl
