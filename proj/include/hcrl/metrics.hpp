#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hcrl/runner.hpp"

namespace hcrl {

inline constexpr double kRatioGuard = 1e-6;

/// A percentage ratio 100 * num / den. `defined` is false when the
/// denominator is missing or below the guard floor.
struct Ratio {
  double value = std::numeric_limits<double>::quiet_NaN();
  bool defined = false;
  bool negative_denominator = false;
};

/// 100 * num / den, undefined when |den| < guard * scale.
Ratio guarded_ratio(double num, double den, double scale);

/// Largest |r| over the populated cells of an evaluation matrix.
double reward_scale(const Eigen::MatrixXd& eval);

struct TransferResult {
  std::vector<Ratio> per_task;  // retention: tasks 1..T-1; forward: tasks 2..T
  Ratio average;                // undefined if any per-task entry is
};

/// f_i = 100 r[i][T] / r[i][i] for i = 1..T-1.
TransferResult retention(const Eigen::MatrixXd& eval);
inline TransferResult retention(const RunRecord& record) { return retention(record.eval); }

/// I_i = 100 r[i][i] / r*_i for i = 2..T. `r_star[i-1]` belongs to task i;
/// a missing entry (NaN) makes that ratio undefined.
TransferResult forward_transfer(const Eigen::MatrixXd& eval, const std::vector<double>& r_star);
inline TransferResult forward_transfer(const RunRecord& record, const std::vector<double>& r_star) {
  return forward_transfer(record.eval, r_star);
}

/// Episode reward divided by the single-task baseline reward.
double normalized_reward(double reward, double r_star);

struct MetricRow {
  std::string method;
  std::string metric;  // "retention" or "forward"
  std::string task;    // "1".."T" or "avg"
  double mean = std::numeric_limits<double>::quiet_NaN();
  double std = std::numeric_limits<double>::quiet_NaN();  // NaN when fewer than 2 seeds
  int seeds = 0;
  bool negative_denominator = false;
};

struct MetricsTable {
  std::string env;
  std::vector<MetricRow> rows;

  const MetricRow* find(const std::string& method, const std::string& metric, const std::string& task) const;
};

struct MethodRuns {
  std::string method;
  std::vector<Eigen::MatrixXd> evals;  // one per seed
};

/// Mean and population std across seeds of every retention and (when
/// r* is given) forward-transfer entry. Undefined seeds are left out; a
/// cell with no defined seed stays undefined.
MetricsTable aggregate(const std::string& env, const std::vector<MethodRuns>& runs,
                       const std::optional<std::vector<double>>& r_star = std::nullopt);

/// Plain-text tables, one per metric, methods as rows and tasks as columns.
std::string format_report(const MetricsTable& table);

}  // namespace hcrl
