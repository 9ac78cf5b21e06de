#include "hcrl/config.hpp"

#include <algorithm>
#include <charconv>
#include <functional>
#include <map>
#include <sstream>

#include <yaml-cpp/yaml.h>

#include "hcrl/errors.hpp"

namespace hcrl {

void Schedule::validate() const {
  if (P < 0) throw ConfigError("schedule: P must be >= 0");
  if (M < 0) throw ConfigError("schedule: M must be >= 0");
  if (P + M < 1) throw ConfigError("schedule: P + M must be >= 1");
  if (K < 1) throw ConfigError("schedule: K must be >= 1");
  if (S < 0) throw ConfigError("schedule: S must be >= 0");
  if (B < 1) throw ConfigError("schedule: B must be >= 1");
  if (!(alpha_theta > 0.0) || !(alpha_e > 0.0)) throw ConfigError("schedule: learning rates must be > 0");
  if (eval_episodes < 1) throw ConfigError("schedule: eval_episodes must be >= 1");
}

Profile parse_profile(std::string_view name) {
  if (name == "desk") return Profile::Desk;
  if (name == "paper") return Profile::Paper;
  throw UsageError("unknown profile '" + std::string(name) + "' (valid: desk, paper)");
}

std::string_view to_string(Profile p) { return p == Profile::Desk ? "desk" : "paper"; }

void RunConfig::validate() const {
  schedule.validate();
  if (tasks < 1 || tasks > 5) throw ConfigError("config: tasks must be in 1..5");
  if (seeds.empty()) throw ConfigError("config: at least one seed is required");
  if (methods.empty()) throw ConfigError("config: at least one method is required");
  if (horizon < 1 || population < 2 || cem_iterations < 1) throw ConfigError("config: invalid planner budget");
  if (!(elite_frac > 0.0 && elite_frac <= 1.0)) throw ConfigError("config: elite_frac must be in (0, 1]");
  if (static_cast<int>(std::ceil(elite_frac * population - 1e-9)) < 2) {
    throw ConfigError("config: elite_frac * population must leave at least two elites");
  }
  if (beta_reg < 0.0 || ewc_lambda < 0.0 || si_c < 0.0 || !(si_xi > 0.0)) {
    throw ConfigError("config: regularization strengths must be >= 0 (si_xi > 0)");
  }
  if (target_hidden.empty() || hnet_hidden.empty()) throw ConfigError("config: hidden layer lists must be non-empty");
  for (Index h : target_hidden) {
    if (h < 1) throw ConfigError("config: hidden sizes must be >= 1");
  }
  for (Index h : hnet_hidden) {
    if (h < 1) throw ConfigError("config: hidden sizes must be >= 1");
  }
  if (jobs < 1) throw ConfigError("config: jobs must be >= 1");
}

RunConfig default_config(EnvName env, Profile profile) {
  RunConfig c;
  c.env = env;
  c.profile = profile;
  c.schedule.K = default_env_spec(env).K;

  switch (env) {
    case EnvName::Slide:
      c.schedule.M = 100;
      c.schedule.S = 500;
      c.beta_reg = 0.5;
      c.hnet_hidden = {50, 50};
      c.hnet_activation = Activation::ReLU;
      break;
    case EnvName::Push:
      c.schedule.M = 20;
      c.schedule.S = 2000;
      c.beta_reg = 0.05;
      c.hnet_hidden = {50, 50};
      c.hnet_activation = Activation::ELU;
      break;
    case EnvName::Latch:
      c.schedule.M = 300;
      c.schedule.S = 200;
      c.beta_reg = 0.5;
      c.hnet_hidden = {256, 256};
      c.hnet_activation = Activation::ReLU;
      c.target_hidden = {200, 200, 200, 200};
      c.horizon = 10;
      c.population = 2000;
      break;
  }
  if (profile == Profile::Paper) return c;

  c.target_hidden = {64, 64};
  c.schedule.alpha_theta = 1e-3;
  c.schedule.alpha_e = 1e-3;
  c.schedule.eval_episodes = 3;
  c.population = 100;
  c.cem_iterations = 10;
  c.loss = DynLoss::MeanSquaredNorm;
  switch (env) {
    case EnvName::Slide:
      c.schedule.M = 30;
      c.schedule.S = 100;
      break;
    case EnvName::Push:
      c.schedule.M = 10;
      c.schedule.S = 200;
      break;
    case EnvName::Latch:
      c.hnet_hidden = {50, 50};
      c.schedule.M = 20;
      c.schedule.S = 100;
      c.population = 200;
      break;
  }
  return c;
}

namespace {

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const std::string& expected) {
  throw UsageError("config key '" + key + "': expected " + expected + ", got '" + value + "'");
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& text) {
  std::string s = trim(text);
  if (s.size() >= 2 && s.front() == '[' && s.back() == ']') s = s.substr(1, s.size() - 2);
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

long long to_integer(const std::string& key, const std::string& value) {
  const std::string v = trim(value);
  long long out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size() || v.empty()) bad_value(key, value, "an integer");
  return out;
}

int to_int(const std::string& key, const std::string& value) {
  const long long v = to_integer(key, value);
  if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max()) {
    bad_value(key, value, "an integer in range");
  }
  return static_cast<int>(v);
}

double to_real(const std::string& key, const std::string& value) {
  const std::string v = trim(value);
  double out = 0.0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size() || v.empty() || !std::isfinite(out)) {
    bad_value(key, value, "a real number");
  }
  return out;
}

std::vector<Index> to_sizes(const std::string& key, const std::string& value) {
  std::vector<Index> out;
  for (const auto& item : split_list(value)) out.push_back(to_integer(key, item));
  if (out.empty()) bad_value(key, value, "a non-empty list of layer sizes");
  return out;
}

template <typename F>
auto wrap_enum(const std::string& key, F&& parse) {
  try {
    return parse();
  } catch (const std::invalid_argument& e) {
    throw UsageError("config key '" + key + "': " + e.what());
  }
}

std::string fmt_real(double v) {
  char buf[64];
  const auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, p);
}

template <typename T>
std::string fmt_list(const std::vector<T>& items) {
  std::string s = "[";
  for (std::size_t i = 0; i < items.size(); ++i) s += (i ? ", " : "") + std::to_string(items[i]);
  return s + "]";
}

using Setter = std::function<void(RunConfig&, const std::string&, const std::string&)>;
using Getter = std::function<std::string(const RunConfig&)>;

struct Field {
  std::string key;
  Setter set;
  Getter get;
};

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      {"env",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.env = wrap_enum(k, [&] { return parse_env_name(trim(v)); });
       },
       [](const RunConfig& c) { return std::string(to_string(c.env)); }},
      {"profile",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.profile = wrap_enum(k, [&] { return parse_profile(trim(v)); });
       },
       [](const RunConfig& c) { return std::string(to_string(c.profile)); }},
      {"method",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.method = wrap_enum(k, [&] { return parse_method(trim(v)); });
       },
       [](const RunConfig& c) { return std::string(to_string(c.method)); }},
      {"methods",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         std::vector<Method> ms;
         for (const auto& item : split_list(v)) ms.push_back(wrap_enum(k, [&] { return parse_method(item); }));
         if (ms.empty()) bad_value(k, v, "a non-empty method list");
         c.methods = ms;
       },
       [](const RunConfig& c) {
         std::string s = "[";
         for (std::size_t i = 0; i < c.methods.size(); ++i) s += (i ? ", " : "") + std::string(to_string(c.methods[i]));
         return s + "]";
       }},
      {"seeds",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         try {
           c.seeds = parse_seeds(v);
         } catch (const UsageError& e) {
           throw UsageError("config key '" + k + "': " + e.what());
         }
       },
       [](const RunConfig& c) { return fmt_list(c.seeds); }},
      {"tasks", [](RunConfig& c, const std::string& k, const std::string& v) { c.tasks = to_int(k, v); },
       [](const RunConfig& c) { return std::to_string(c.tasks); }},
      {"P", [](RunConfig& c, const std::string& k, const std::string& v) { c.schedule.P = to_int(k, v); },
       [](const RunConfig& c) { return std::to_string(c.schedule.P); }},
      {"M", [](RunConfig& c, const std::string& k, const std::string& v) { c.schedule.M = to_int(k, v); },
       [](const RunConfig& c) { return std::to_string(c.schedule.M); }},
      {"K", [](RunConfig& c, const std::string& k, const std::string& v) { c.schedule.K = to_int(k, v); },
       [](const RunConfig& c) { return std::to_string(c.schedule.K); }},
      {"S", [](RunConfig& c, const std::string& k, const std::string& v) { c.schedule.S = to_int(k, v); },
       [](const RunConfig& c) { return std::to_string(c.schedule.S); }},
      {"B", [](RunConfig& c, const std::string& k, const std::string& v) { c.schedule.B = to_int(k, v); },
       [](const RunConfig& c) { return std::to_string(c.schedule.B); }},
      {"alpha_theta",
       [](RunConfig& c, const std::string& k, const std::string& v) { c.schedule.alpha_theta = to_real(k, v); },
       [](const RunConfig& c) { return fmt_real(c.schedule.alpha_theta); }},
      {"alpha_e", [](RunConfig& c, const std::string& k, const std::string& v) { c.schedule.alpha_e = to_real(k, v); },
       [](const RunConfig& c) { return fmt_real(c.schedule.alpha_e); }},
      {"eval_episodes",
       [](RunConfig& c, const std::string& k, const std::string& v) { c.schedule.eval_episodes = to_int(k, v); },
       [](const RunConfig& c) { return std::to_string(c.schedule.eval_episodes); }},
      {"horizon", [](RunConfig& c, const std::string& k, const std::string& v) { c.horizon = to_int(k, v); },
       [](const RunConfig& c) { return std::to_string(c.horizon); }},
      {"population", [](RunConfig& c, const std::string& k, const std::string& v) { c.population = to_int(k, v); },
       [](const RunConfig& c) { return std::to_string(c.population); }},
      {"cem_iterations",
       [](RunConfig& c, const std::string& k, const std::string& v) { c.cem_iterations = to_int(k, v); },
       [](const RunConfig& c) { return std::to_string(c.cem_iterations); }},
      {"elite_frac", [](RunConfig& c, const std::string& k, const std::string& v) { c.elite_frac = to_real(k, v); },
       [](const RunConfig& c) { return fmt_real(c.elite_frac); }},
      {"beta_reg", [](RunConfig& c, const std::string& k, const std::string& v) { c.beta_reg = to_real(k, v); },
       [](const RunConfig& c) { return fmt_real(c.beta_reg); }},
      {"target_hidden",
       [](RunConfig& c, const std::string& k, const std::string& v) { c.target_hidden = to_sizes(k, v); },
       [](const RunConfig& c) { return fmt_list(c.target_hidden); }},
      {"hnet_hidden", [](RunConfig& c, const std::string& k, const std::string& v) { c.hnet_hidden = to_sizes(k, v); },
       [](const RunConfig& c) { return fmt_list(c.hnet_hidden); }},
      {"hnet_activation",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.hnet_activation = wrap_enum(k, [&] { return parse_activation(trim(v)); });
       },
       [](const RunConfig& c) { return std::string(to_string(c.hnet_activation)); }},
      {"loss",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         const std::string t = trim(v);
         if (t == "norm") {
           c.loss = DynLoss::MeanNorm;
         } else if (t == "squared") {
           c.loss = DynLoss::MeanSquaredNorm;
         } else {
           bad_value(k, v, "one of norm, squared");
         }
       },
       [](const RunConfig& c) { return std::string(c.loss == DynLoss::MeanNorm ? "norm" : "squared"); }},
      {"ewc_lambda", [](RunConfig& c, const std::string& k, const std::string& v) { c.ewc_lambda = to_real(k, v); },
       [](const RunConfig& c) { return fmt_real(c.ewc_lambda); }},
      {"si_c", [](RunConfig& c, const std::string& k, const std::string& v) { c.si_c = to_real(k, v); },
       [](const RunConfig& c) { return fmt_real(c.si_c); }},
      {"si_xi", [](RunConfig& c, const std::string& k, const std::string& v) { c.si_xi = to_real(k, v); },
       [](const RunConfig& c) { return fmt_real(c.si_xi); }},
      {"output_dir", [](RunConfig& c, const std::string&, const std::string& v) { c.output_dir = trim(v); },
       [](const RunConfig& c) { return c.output_dir; }},
      {"jobs", [](RunConfig& c, const std::string& k, const std::string& v) { c.jobs = to_int(k, v); },
       [](const RunConfig& c) { return std::to_string(c.jobs); }},
  };
  return table;
}

const Field& field(const std::string& key) {
  for (const auto& f : fields()) {
    if (f.key == key) return f;
  }
  std::string valid;
  for (const auto& f : fields()) valid += (valid.empty() ? "" : ", ") + f.key;
  throw UsageError("unknown config key '" + key + "' (valid: " + valid + ")");
}

Settings from_yaml(const YAML::Node& root) {
  Settings out;
  if (root.IsNull()) return out;
  if (!root.IsMap()) throw UsageError("config file: top level must be a key: value mapping");
  for (const auto& kv : root) {
    const std::string key = kv.first.as<std::string>();
    const YAML::Node& v = kv.second;
    if (v.IsScalar()) {
      out.emplace_back(key, v.as<std::string>());
    } else if (v.IsSequence()) {
      std::string joined;
      for (const auto& item : v) {
        if (!item.IsScalar()) throw UsageError("config key '" + key + "': nested values are not supported");
        joined += (joined.empty() ? "" : ",") + item.as<std::string>();
      }
      out.emplace_back(key, joined);
    } else if (v.IsNull()) {
      throw UsageError("config key '" + key + "': missing value");
    } else {
      throw UsageError("config key '" + key + "': nested values are not supported");
    }
  }
  return out;
}

std::optional<std::string> last_value(const Settings& s, const std::string& key) {
  std::optional<std::string> out;
  for (const auto& [k, v] : s) {
    if (k == key) out = v;
  }
  return out;
}

}  // namespace

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> v;
    for (const auto& f : fields()) v.push_back(f.key);
    return v;
  }();
  return keys;
}

void apply_setting(RunConfig& config, const std::string& key, const std::string& value) {
  field(key).set(config, key, value);
}

std::vector<std::uint64_t> parse_seeds(const std::string& text) {
  const std::string t = trim(text);
  std::vector<std::uint64_t> out;
  auto number = [&](const std::string& s) {
    const std::string v = trim(s);
    std::uint64_t n = 0;
    const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), n);
    if (ec != std::errc() || p != v.data() + v.size() || v.empty()) {
      throw UsageError("invalid seed list '" + text + "' (use 0..3 or 0,1,2)");
    }
    return n;
  };
  if (const auto dots = t.find(".."); dots != std::string::npos) {
    const std::uint64_t lo = number(t.substr(0, dots));
    const std::uint64_t hi = number(t.substr(dots + 2));
    if (hi < lo) throw UsageError("invalid seed range '" + text + "'");
    for (std::uint64_t s = lo; s <= hi; ++s) out.push_back(s);
    return out;
  }
  for (const auto& item : split_list(t)) out.push_back(number(item));
  if (out.empty()) throw UsageError("empty seed list");
  return out;
}

Settings parse_config_text(const std::string& text) {
  try {
    return from_yaml(YAML::Load(text));
  } catch (const YAML::Exception& e) {
    throw UsageError(std::string("config file: ") + e.what());
  }
}

Settings read_config_file(const std::filesystem::path& path) {
  try {
    return from_yaml(YAML::LoadFile(path.string()));
  } catch (const YAML::BadFile&) {
    throw UsageError("cannot read config file " + path.string());
  } catch (const YAML::Exception& e) {
    throw UsageError("config file " + path.string() + ": " + e.what());
  }
}

RunConfig resolve_config(const Settings& file, const Settings& flags) {
  RunConfig probe;
  for (const auto& key : {std::string("env"), std::string("profile")}) {
    if (auto v = last_value(file, key)) apply_setting(probe, key, *v);
    if (auto v = last_value(flags, key)) apply_setting(probe, key, *v);
  }
  RunConfig c = default_config(probe.env, probe.profile);
  for (const auto& [k, v] : file) apply_setting(c, k, v);
  for (const auto& [k, v] : flags) apply_setting(c, k, v);
  try {
    c.validate();
  } catch (const ConfigError& e) {
    throw UsageError(e.what());
  }
  return c;
}

std::string to_yaml(const RunConfig& config) {
  std::string out;
  for (const auto& f : fields()) out += f.key + ": " + f.get(config) + "\n";
  return out;
}

LearnerOptions learner_options(const RunConfig& config, Method method) {
  const EnvSpec spec = default_env_spec(config.env);
  LearnerOptions o;
  o.method = method;
  o.state_dim = spec.state_dim;
  o.action_dim = spec.action_dim;
  o.target_hidden = config.target_hidden;
  o.hnet_hidden = config.hnet_hidden;
  o.hnet_activation = config.hnet_activation;
  o.beta_reg = config.beta_reg;
  o.alpha_theta = config.schedule.alpha_theta;
  o.alpha_e = config.schedule.alpha_e;
  o.ewc_lambda = config.ewc_lambda;
  o.si_c = config.si_c;
  o.si_xi = config.si_xi;
  o.loss = config.loss;
  return o;
}

CEMConfig cem_config(const RunConfig& config, const Env& env) {
  return CEMConfig::for_env(env, config.horizon, config.population, config.cem_iterations, config.elite_frac);
}

}  // namespace hcrl
