#include "hcrl/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "hcrl/errors.hpp"

namespace hcrl {

Ratio guarded_ratio(double num, double den, double scale) {
  Ratio r;
  if (!std::isfinite(num) || !std::isfinite(den) || !(scale > 0.0)) return r;
  if (std::abs(den) < kRatioGuard * scale) return r;
  r.value = 100.0 * num / den;
  r.defined = true;
  r.negative_denominator = den < 0.0;
  return r;
}

double reward_scale(const Eigen::MatrixXd& eval) {
  double s = 0.0;
  for (Index j = 0; j < eval.cols(); ++j) {
    for (Index i = 0; i < eval.rows(); ++i) {
      if (std::isfinite(eval(i, j))) s = std::max(s, std::abs(eval(i, j)));
    }
  }
  return s;
}

namespace {

Ratio average_of(const std::vector<Ratio>& items) {
  Ratio avg;
  if (items.empty()) return avg;
  double sum = 0.0;
  for (const auto& r : items) {
    if (!r.defined) return Ratio{};
    sum += r.value;
    avg.negative_denominator = avg.negative_denominator || r.negative_denominator;
  }
  avg.value = sum / static_cast<double>(items.size());
  avg.defined = true;
  return avg;
}

void require_square(const Eigen::MatrixXd& eval) {
  if (eval.rows() != eval.cols() || eval.rows() < 1) throw DataError("metrics: evaluation matrix must be T x T");
}

}  // namespace

TransferResult retention(const Eigen::MatrixXd& eval) {
  require_square(eval);
  const Index T = eval.rows();
  const double scale = reward_scale(eval);
  TransferResult out;
  for (Index i = 0; i + 1 < T; ++i) out.per_task.push_back(guarded_ratio(eval(i, T - 1), eval(i, i), scale));
  out.average = average_of(out.per_task);
  return out;
}

TransferResult forward_transfer(const Eigen::MatrixXd& eval, const std::vector<double>& r_star) {
  require_square(eval);
  const Index T = eval.rows();
  double scale = reward_scale(eval);
  for (double r : r_star) {
    if (std::isfinite(r)) scale = std::max(scale, std::abs(r));
  }
  TransferResult out;
  for (Index i = 1; i < T; ++i) {
    const double den = static_cast<std::size_t>(i) < r_star.size() ? r_star[static_cast<std::size_t>(i)]
                                                                    : std::numeric_limits<double>::quiet_NaN();
    out.per_task.push_back(guarded_ratio(eval(i, i), den, scale));
  }
  out.average = average_of(out.per_task);
  return out;
}

double normalized_reward(double reward, double r_star) {
  if (!std::isfinite(r_star) || r_star == 0.0) return std::numeric_limits<double>::quiet_NaN();
  return reward / r_star;
}

const MetricRow* MetricsTable::find(const std::string& method, const std::string& metric,
                                    const std::string& task) const {
  for (const auto& r : rows) {
    if (r.method == method && r.metric == metric && r.task == task) return &r;
  }
  return nullptr;
}

namespace {

MetricRow summarize(const std::string& method, const std::string& metric, const std::string& task,
                    const std::vector<Ratio>& seeds) {
  MetricRow row{method, metric, task};
  std::vector<double> vals;
  for (const auto& r : seeds) {
    if (!r.defined) continue;
    vals.push_back(r.value);
    row.negative_denominator = row.negative_denominator || r.negative_denominator;
  }
  row.seeds = static_cast<int>(vals.size());
  if (vals.empty()) return row;
  double sum = 0.0;
  for (double v : vals) sum += v;
  row.mean = sum / static_cast<double>(vals.size());
  if (vals.size() >= 2) {
    double ss = 0.0;
    for (double v : vals) ss += (v - row.mean) * (v - row.mean);
    row.std = std::sqrt(ss / static_cast<double>(vals.size()));
  }
  return row;
}

void add_metric(MetricsTable& table, const std::string& method, const std::string& metric,
                const std::vector<TransferResult>& seeds, int first_task) {
  if (seeds.empty()) return;
  const std::size_t n = seeds.front().per_task.size();
  for (std::size_t k = 0; k < n; ++k) {
    std::vector<Ratio> col;
    for (const auto& s : seeds) col.push_back(s.per_task[k]);
    table.rows.push_back(summarize(method, metric, std::to_string(first_task + static_cast<int>(k)), col));
  }
  std::vector<Ratio> avg;
  for (const auto& s : seeds) avg.push_back(s.average);
  table.rows.push_back(summarize(method, metric, "avg", avg));
}

}  // namespace

MetricsTable aggregate(const std::string& env, const std::vector<MethodRuns>& runs,
                       const std::optional<std::vector<double>>& r_star) {
  MetricsTable table;
  table.env = env;
  for (const auto& m : runs) {
    std::vector<TransferResult> ret;
    for (const auto& e : m.evals) ret.push_back(retention(e));
    add_metric(table, m.method, "retention", ret, 1);
  }
  if (r_star) {
    for (const auto& m : runs) {
      std::vector<TransferResult> fwd;
      for (const auto& e : m.evals) fwd.push_back(forward_transfer(e, *r_star));
      add_metric(table, m.method, "forward", fwd, 2);
    }
  }
  return table;
}

namespace {

std::string cell(const MetricRow& r) {
  if (r.seeds == 0) return "undefined";
  char buf[64];
  if (std::isfinite(r.std)) {
    std::snprintf(buf, sizeof(buf), "%.1f +/- %.1f", r.mean, r.std);
  } else {
    std::snprintf(buf, sizeof(buf), "%.1f +/- n/a", r.mean);
  }
  std::string s(buf);
  if (r.negative_denominator) s += "*";
  return s;
}

std::string pad(std::string s, std::size_t width) {
  if (s.size() < width) s.append(width - s.size(), ' ');
  return s;
}

}  // namespace

std::string format_report(const MetricsTable& table) {
  std::string out;
  bool any_negative = false;
  std::vector<std::string> notes;

  for (const std::string metric : {"retention", "forward"}) {
    std::vector<std::string> methods;
    std::vector<std::string> tasks;
    for (const auto& r : table.rows) {
      if (r.metric != metric) continue;
      if (std::find(methods.begin(), methods.end(), r.method) == methods.end()) methods.push_back(r.method);
      if (std::find(tasks.begin(), tasks.end(), r.task) == tasks.end()) tasks.push_back(r.task);
    }
    if (methods.empty()) continue;

    const bool ret = metric == "retention";
    out += ret ? "Retention (%)" : "Forward transfer (%)";
    out += " on " + table.env + "\n";
    std::size_t name_w = 8;
    for (const auto& m : methods) name_w = std::max(name_w, m.size() + 2);
    constexpr std::size_t kCellW = 20;

    out += pad("method", name_w);
    for (const auto& t : tasks) out += pad(t == "avg" ? "avg" : (ret ? "f_" : "I_") + t, kCellW);
    out += "seeds\n";
    for (const auto& m : methods) {
      std::string line = pad(m, name_w);
      int seeds = 0;
      for (const auto& t : tasks) {
        const MetricRow* r = table.find(m, metric, t);
        line += pad(r ? cell(*r) : "undefined", kCellW);
        if (r) {
          any_negative = any_negative || r->negative_denominator;
          if (t == "avg") {
            seeds = r->seeds;
            if (r->seeds > 0 && r->mean > 100.0) {
              notes.push_back(m + ": positive " + std::string(ret ? "backward" : "forward") + " transfer (avg " +
                              cell(*r) + ")");
            }
          }
        }
      }
      out += line + std::to_string(seeds) + "\n";
    }
    out += "\n";
  }
  if (!notes.empty()) {
    out += "Notes\n";
    for (const auto& n : notes) out += "  " + n + "\n";
  }
  if (any_negative) out += "* at least one seed had a negative denominator\n";
  return out;
}

}  // namespace hcrl
