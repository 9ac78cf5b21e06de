#pragma once

#include <stdexcept>
#include <string>

namespace hcrl {

/// Dimension or layout mismatch between a network description and its data.
struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// A caller broke an operation's documented precondition (empty batch, ...).
struct PreconditionError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Learner state is inconsistent with the requested operation.
struct StateError : std::logic_error {
  using std::logic_error::logic_error;
};

/// Non-finite gradients or losses during an update session.
struct DivergenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Every CEM candidate produced a non-finite rollout.
struct PlannerFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Transitions that do not belong where they were routed.
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Corrupt or incompatible checkpoint.
struct IntegrityError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Bad command line or configuration value; the message names the key.
struct UsageError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

}  // namespace hcrl
