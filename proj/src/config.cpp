#include "bacr/config.hpp"

#include <fstream>
#include <functional>
#include <sstream>

namespace bacr {

namespace {

using nlohmann::json;

struct Field {
  std::string key;
  std::function<void(TrainConfig&, const json&)> set;
  std::function<json(const TrainConfig&)> get;
};

template <typename T>
T as(const json& v) {
  if constexpr (std::is_same_v<T, bool>) {
    if (!v.is_boolean()) throw std::invalid_argument("expected true or false");
  } else if constexpr (std::is_integral_v<T>) {
    if (!v.is_number_integer()) throw std::invalid_argument("expected an integer");
  } else if constexpr (std::is_floating_point_v<T>) {
    if (!v.is_number()) throw std::invalid_argument("expected a number");
  } else {
    if (v.is_number_integer()) return T{v.get<int>()};  // one-element list written without commas
    if (!v.is_array()) throw std::invalid_argument("expected a list");
    for (const auto& e : v)
      if (!e.is_number_integer()) throw std::invalid_argument("expected a list of integers");
  }
  return v.get<T>();
}

template <typename T>
Field field(std::string key, T TrainConfig::*member) {
  return {key, [member](TrainConfig& c, const json& v) { c.*member = as<T>(v); },
          [member](const TrainConfig& c) { return json(c.*member); }};
}

template <typename T>
Field field(std::string key, std::function<T&(TrainConfig&)> ref) {
  return {key, [ref](TrainConfig& c, const json& v) { ref(c) = as<T>(v); },
          [ref](const TrainConfig& c) { return json(ref(const_cast<TrainConfig&>(c))); }};
}

const std::vector<Field>& fields() {
  static const std::vector<Field> all = [] {
    using C = TrainConfig;
    std::vector<Field> f;
    f.push_back(field("alpha", &C::alpha));
    f.push_back(field("beta", &C::beta));
    f.push_back(field("lambda", &C::lambda));
    f.push_back(field("eps_clip", &C::eps_clip));
    f.push_back(field("c_v", &C::c_v));
    f.push_back(field("c_h", &C::c_h));
    f.push_back(field("eta", &C::eta));
    f.push_back(field("sigma_fraction", &C::sigma_fraction));
    f.push_back(field("mu0", &C::mu0));
    f.push_back(field("adv_eps", &C::adv_eps));
    f.push_back(field("group_size", &C::group_size));
    f.push_back(field("truncation_points", &C::truncation_points));
    f.push_back(field<double>("b_min", [](C& c) -> double& { return c.range.min; }));
    f.push_back(field<double>("b_max", [](C& c) -> double& { return c.range.max; }));
    f.push_back(field("budget_levels", &C::budget_levels));
    f.push_back(field("pass_rate_rollouts", &C::pass_rate_rollouts));
    f.push_back(field<int>("groups", [](C& c) -> int& { return c.taskset.groups; }));
    f.push_back(field<int>("tasks_per_group", [](C& c) -> int& { return c.taskset.tasks_per_group; }));
    f.push_back(field<std::vector<int>>("step_requirements",
                                        [](C& c) -> std::vector<int>& { return c.taskset.step_requirements; }));
    f.push_back(field<std::uint64_t>("taskset_seed", [](C& c) -> std::uint64_t& { return c.taskset.seed; }));
    f.push_back(field<double>("feature_noise", [](C& c) -> double& { return c.taskset.noise_std; }));
    f.push_back(field("epochs", &C::epochs));
    f.push_back(field("iters_per_epoch", &C::iters_per_epoch));
    f.push_back(field("minibatch", &C::minibatch));
    f.push_back(field("ppo_epochs", &C::ppo_epochs));
    f.push_back(field("learning_rate", &C::learning_rate));
    f.push_back(field("max_grad_norm", &C::max_grad_norm));
    f.push_back(field("hidden", &C::hidden));
    f.push_back(field("embed_dim", &C::embed_dim));
    f.push_back(field("pos_dim", &C::pos_dim));
    f.push_back(field("value_hidden", &C::value_hidden));
    f.push_back(field("eval_grid", &C::eval_grid));
    f.push_back(field("eval_samples", &C::eval_samples));
    f.push_back(field("eval_greedy", &C::eval_greedy));
    f.push_back(field("eval_every", &C::eval_every));
    f.push_back(field<bool>("bup", [](C& c) -> bool& { return c.flags.bup; }));
    f.push_back(field<bool>("cas", [](C& c) -> bool& { return c.flags.cas; }));
    f.push_back(field<bool>("tdr", [](C& c) -> bool& { return c.flags.tdr; }));
    f.push_back(field<bool>("bcae", [](C& c) -> bool& { return c.flags.bcae; }));
    f.push_back(field("fixed_budget", &C::fixed_budget));
    f.push_back(field("seed", &C::seed));
    f.push_back(field("workers", &C::workers));
    return f;
  }();
  return all;
}

std::string canonical(const std::string& key) {
  if (key == "G") return "group_size";
  if (key == "M") return "truncation_points";
  if (key == "K") return "groups";
  return key;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

json text_value(const std::string& text) {
  if (text.empty()) throw std::invalid_argument("empty value");
  if (text.find(',') != std::string::npos || text.front() == '[') {
    const std::string body = text.front() == '[' ? text : "[" + text + "]";
    return json::parse(body);
  }
  return json::parse(text);
}

TrainConfig validated(TrainConfig cfg) {
  try {
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return cfg;
}

void flatten_json(const json& j, const std::string& prefix, TrainConfig& cfg) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string key = prefix.empty() ? it.key() : prefix + "." + it.key();
    if (it->is_object()) {
      flatten_json(*it, key, cfg);
    } else {
      set_config_value(cfg, key, *it);
    }
  }
}

}  // namespace

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto& f : fields()) keys.push_back(f.key);
  return keys;
}

void set_config_value(TrainConfig& cfg, const std::string& key, const json& value) {
  const std::string name = canonical(key);
  for (const auto& f : fields()) {
    if (f.key != name) continue;
    try {
      f.set(cfg, value);
    } catch (const std::exception& e) {
      throw ConfigError(key + ": " + e.what());
    }
    return;
  }
  throw ConfigError(key + ": unknown key");
}

void set_config_text(TrainConfig& cfg, const std::string& key, const std::string& text) {
  json value;
  try {
    value = text_value(text);
  } catch (const std::exception&) {
    throw ConfigError(key + ": cannot parse value '" + text + "'");
  }
  set_config_value(cfg, key, value);
}

TrainConfig parse_config_text(const std::string& text, const TrainConfig& base) {
  TrainConfig cfg = base;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(lineno) + ": expected key=value, got '" + line + "'");
    set_config_text(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return validated(cfg);
}

TrainConfig parse_config_json(const json& j, const TrainConfig& base) {
  if (!j.is_object()) throw ConfigError("<root>: expected a JSON object");
  TrainConfig cfg = base;
  flatten_json(j, "", cfg);
  return validated(cfg);
}

TrainConfig parse_config(const std::string& path, const TrainConfig& base) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path + ": cannot open config file");
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '{') {
    json j;
    try {
      j = json::parse(text);
    } catch (const json::parse_error& e) {
      throw ConfigError(path + ": malformed JSON: " + e.what());
    }
    return parse_config_json(j, base);
  }
  return parse_config_text(text, base);
}

std::string config_to_text(const TrainConfig& cfg) {
  std::ostringstream out;
  for (const auto& f : fields()) {
    const json v = f.get(cfg);
    out << f.key << '=';
    if (v.is_array()) {
      for (std::size_t i = 0; i < v.size(); ++i) out << (i ? "," : "") << v[i].dump();
    } else {
      out << v.dump();
    }
    out << '\n';
  }
  return out.str();
}

json config_to_json(const TrainConfig& cfg) {
  json j = json::object();
  for (const auto& f : fields()) j[f.key] = f.get(cfg);
  return j;
}

bool operator==(const TrainConfig& a, const TrainConfig& b) { return config_to_json(a) == config_to_json(b); }

}  // namespace bacr
