#pragma once

// One interface over every continual-learning method the runner drives.

#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "hcrl/baselines.hpp"
#include "hcrl/checkpoint.hpp"
#include "hcrl/dynamics.hpp"
#include "hcrl/hypernet.hpp"
#include "hcrl/rng.hpp"

namespace hcrl {

enum class Method { HyperCRL, HyperCRLMT, Finetune, EWC, SI, Coreset, Multitask, Single };

Method parse_method(std::string_view name);
std::string_view to_string(Method m);
const std::vector<std::string>& method_names();
/// Methods that may read transitions of earlier tasks.
bool replays_past(Method m);

struct LearnerOptions {
  Method method = Method::HyperCRL;
  Index state_dim = 0;
  Index action_dim = 0;
  std::vector<Index> target_hidden{200, 200};
  std::vector<Index> hnet_hidden{50, 50};
  Activation hnet_activation = Activation::ReLU;
  double beta_reg = 0.5;
  double alpha_theta = 1e-4;
  double alpha_e = 1e-4;
  double ewc_lambda = 100.0;
  double si_c = 0.1;
  double si_xi = 0.1;
  DynLoss loss = DynLoss::MeanNorm;
};

class Learner {
 public:
  virtual ~Learner() = default;

  virtual Method method() const = 0;
  /// Number of tasks begun so far.
  virtual int tasks() const = 0;

  /// Task boundary: new embedding or head, snapshot, fresh optimizer state.
  virtual void begin_task(int task_id) = 0;
  virtual void fit_normalizer(const ReplayBuffer& buffer) = 0;
  /// One gradient step. `past` is empty for non-replay methods.
  virtual void update(const Batch& current, const Batch& past) = 0;
  /// Consolidation after the last update of a task (EWC anchors, SI
  /// importances, coreset or history growth).
  virtual void end_task(const ReplayBuffer& buffer) = 0;

  /// Past transitions available for rehearsal; empty for non-replay methods.
  virtual const std::vector<Transition>& past_store() const = 0;
  /// Frozen dynamics model for an already begun task.
  virtual DynamicsModel model_for(int task_id) const = 0;

  virtual void save(Archive& out) const = 0;
  virtual void load(const Archive& in) = 0;
};

std::unique_ptr<Learner> make_learner(const LearnerOptions& options, const RngStreams& streams);

/// Pieces shared by the concrete learners; exposed for tests.
void save_transitions(Archive& out, const std::string& prefix, const std::vector<Transition>& items);
std::vector<Transition> load_transitions(const Archive& in, const std::string& prefix);
void save_normalizers(Archive& out, const std::vector<Normalizer>& norms);
std::vector<Normalizer> load_normalizers(const Archive& in);

}  // namespace hcrl
