#include "hcrl/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "hcrl/errors.hpp"

namespace hcrl {

std::string format_g6(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("I/O error: cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("I/O error: short write to " + path.string());
}

std::string trace_csv(const RunRecord& record) {
  std::string out = "episode,task,reward\n";
  for (const auto& e : record.trace) {
    out += std::to_string(e.episode) + "," + std::to_string(e.task) + "," + format_g6(e.reward) + "\n";
  }
  return out;
}

std::string eval_csv(const std::vector<RunRecord>& records) {
  std::string out = "env,method,seed,task_eval,task_trained,reward\n";
  for (const auto& r : records) {
    for (Index j = 0; j < r.eval.cols(); ++j) {
      for (Index i = 0; i <= j && i < r.eval.rows(); ++i) {
        if (!std::isfinite(r.eval(i, j))) continue;
        out += std::string(to_string(r.env)) + "," + std::string(to_string(r.method)) + "," +
               std::to_string(r.seed) + "," + std::to_string(i + 1) + "," + std::to_string(j + 1) + "," +
               format_g6(r.eval(i, j)) + "\n";
      }
    }
  }
  return out;
}

std::string summary_csv(const MetricsTable& table) {
  std::string out = "method,metric,task,mean,std\n";
  for (const auto& r : table.rows) {
    out += r.method + "," + r.metric + "," + r.task + "," + (r.seeds ? format_g6(r.mean) : "undefined") + "," +
           (std::isfinite(r.std) ? format_g6(r.std) : "n/a") + "\n";
  }
  return out;
}

std::string rstar_csv(const std::vector<RStarRow>& rows) {
  std::string out = "env,task,seed,r_star\n";
  for (const auto& r : rows) {
    out += r.env + "," + std::to_string(r.task) + "," + std::to_string(r.seed) + "," + format_g6(r.r_star) + "\n";
  }
  return out;
}

namespace {

std::vector<std::vector<std::string>> read_rows(const std::filesystem::path& path, const std::string& header) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != header) {
    throw DataError(path.string() + ": expected header '" + header + "'");
  }
  const std::size_t columns = static_cast<std::size_t>(std::count(header.begin(), header.end(), ',')) + 1;
  std::vector<std::vector<std::string>> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string c;
    while (std::getline(ss, c, ',')) cells.push_back(c);
    if (cells.size() != columns) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": expected " + std::to_string(columns) +
                      " columns");
    }
    rows.push_back(std::move(cells));
  }
  return rows;
}

double parse_real(const std::string& s, const std::filesystem::path& path) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw DataError(path.string() + ": bad number '" + s + "'");
  }
}

int parse_int(const std::string& s, const std::filesystem::path& path) {
  const double v = parse_real(s, path);
  if (v != std::floor(v)) throw DataError(path.string() + ": bad integer '" + s + "'");
  return static_cast<int>(v);
}

}  // namespace

EvalTable read_eval_csv(const std::vector<std::filesystem::path>& paths) {
  struct Cell {
    int i, j;
    double r;
  };
  EvalTable table;
  std::vector<std::string> method_order;
  std::map<std::string, std::vector<std::string>> seed_order;
  std::map<std::pair<std::string, std::string>, std::vector<Cell>> cells;

  for (const auto& path : paths) {
    for (const auto& row : read_rows(path, "env,method,seed,task_eval,task_trained,reward")) {
      if (table.env.empty()) table.env = row[0];
      if (row[0] != table.env) throw DataError(path.string() + ": rows from several environments");
      const std::string& method = row[1];
      if (std::find(method_order.begin(), method_order.end(), method) == method_order.end()) {
        method_order.push_back(method);
      }
      auto& seeds = seed_order[method];
      if (std::find(seeds.begin(), seeds.end(), row[2]) == seeds.end()) seeds.push_back(row[2]);
      cells[{method, row[2]}].push_back(Cell{parse_int(row[3], path), parse_int(row[4], path), parse_real(row[5], path)});
    }
  }

  for (const auto& method : method_order) {
    MethodRuns runs{method, {}};
    for (const auto& seed : seed_order[method]) {
      const auto& cs = cells[{method, seed}];
      int T = 0;
      for (const auto& c : cs) T = std::max({T, c.i, c.j});
      Eigen::MatrixXd eval = Eigen::MatrixXd::Constant(T, T, std::numeric_limits<double>::quiet_NaN());
      for (const auto& c : cs) {
        if (c.i < 1 || c.j < c.i) throw DataError("eval csv: invalid cell (" + std::to_string(c.i) + ", " +
                                                  std::to_string(c.j) + ")");
        eval(c.i - 1, c.j - 1) = c.r;
      }
      runs.evals.push_back(std::move(eval));
    }
    table.runs.push_back(std::move(runs));
  }
  return table;
}

std::vector<double> read_rstar_csv(const std::filesystem::path& path, int tasks) {
  std::vector<double> sum(static_cast<std::size_t>(tasks), 0.0);
  std::vector<int> count(static_cast<std::size_t>(tasks), 0);
  for (const auto& row : read_rows(path, "env,task,seed,r_star")) {
    const int t = parse_int(row[1], path);
    if (t < 1 || t > tasks) continue;
    sum[static_cast<std::size_t>(t - 1)] += parse_real(row[3], path);
    ++count[static_cast<std::size_t>(t - 1)];
  }
  std::vector<double> out(static_cast<std::size_t>(tasks), std::numeric_limits<double>::quiet_NaN());
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (count[i] > 0) out[i] = sum[i] / count[i];
  }
  return out;
}

}  // namespace hcrl
