#include "alas/config.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "alas/rng.hpp"

namespace alas::io {

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

std::string fmt_d(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

Config Config::defaults() {
  Config c;
  auto& kv = c.kv_;

  kv["run.task"] = "lh1";
  kv["run.variant"] = "full";
  kv["run.seed"] = "0";
  kv["run.out"] = "runs/out";
  kv["run.threads"] = "0";  // 0 = defer to ALAS_THREADS / hardware

  // simulator; step_budget 0 defers to the task's own budget
  env::EnvConfig e;
  kv["env.dt"] = fmt_d(e.dt);
  kv["env.v_max"] = fmt_d(e.v_max);
  kv["env.dz_rate"] = fmt_d(e.dz_rate);
  kv["env.z_max"] = fmt_d(e.z_max);
  kv["env.dz_noise"] = fmt_d(e.dz_noise);
  kv["env.leak_lo"] = fmt_d(e.leak_lo);
  kv["env.leak_hi"] = fmt_d(e.leak_hi);
  kv["env.reach_radius"] = fmt_d(e.reach_radius);
  kv["env.waypoint_radius"] = fmt_d(e.waypoint_radius);
  kv["env.follow_dev_max"] = fmt_d(e.follow_dev_max);
  kv["env.sit_band"] = fmt_d(e.sit_band);
  kv["env.sit_capture_band"] = fmt_d(e.sit_capture_band);
  kv["env.sit_release_thrust"] = fmt_d(e.sit_release_thrust);
  kv["env.sit_fall_margin"] = fmt_d(e.sit_fall_margin);
  kv["env.climb_fall_margin"] = fmt_d(e.climb_fall_margin);
  kv["env.sit_settle_steps"] = std::to_string(e.sit_settle_steps);
  kv["env.step_budget"] = "0";
  kv["env.step_penalty"] = fmt_d(e.step_penalty);
  kv["env.sit_rest_bonus"] = fmt_d(e.sit_rest_bonus);
  kv["env.shaping_scale"] = fmt_d(e.shaping_scale);
  kv["env.skill_bonus"] = fmt_d(e.skill_bonus);
  kv["env.sequence_bonus"] = fmt_d(e.sequence_bonus);
  kv["env.fall_penalty"] = fmt_d(e.fall_penalty);
  kv["env.follow_violation_terminates"] = "false";

  model::ModelConfig m;
  kv["model.window"] = std::to_string(m.window);
  kv["model.kernels"] = "1,3,5";
  kv["model.conv_channels"] = std::to_string(m.conv_channels);
  kv["model.gru_hidden"] = std::to_string(m.gru_hidden);
  kv["model.d_model"] = std::to_string(m.d_model);
  kv["model.attn_heads"] = std::to_string(m.attn_heads);
  kv["model.trunk_layers"] = std::to_string(m.trunk_layers);
  kv["model.trunk_heads"] = std::to_string(m.trunk_heads);
  kv["model.logstd_init"] = fmt_d(m.logstd_init);

  kv["train.stage1_iters"] = "60";
  kv["train.stage2_iters"] = "40";
  kv["train.stage3_iters"] = "100";
  kv["train.stage1_episodes"] = "200";
  kv["train.stage1_batch"] = "64";
  kv["train.lr"] = fmt_d(3e-4);
  kv["train.gamma"] = fmt_d(0.99);
  kv["train.gae_lambda"] = fmt_d(0.95);
  kv["train.clip_eps"] = fmt_d(0.2);
  kv["train.entropy_coef"] = fmt_d(0.01);
  kv["train.value_coef"] = fmt_d(0.5);
  kv["train.rollout_steps"] = "2048";
  kv["train.minibatch"] = "256";
  kv["train.ppo_epochs"] = "4";
  kv["train.max_grad_norm"] = fmt_d(0.5);
  kv["train.lambda_quality"] = fmt_d(0.1);
  kv["train.lambda_disentangle"] = fmt_d(0.01);
  kv["train.lambda_mi"] = fmt_d(0.01);
  kv["train.lambda_r1"] = fmt_d(1e-3);
  kv["train.lambda_r2"] = fmt_d(1e-3);
  kv["train.lambda_r3"] = fmt_d(1e-4);
  kv["train.r3_as_written"] = "true";
  kv["train.checkpoint_every"] = "25";
  kv["train.eval_every"] = "25";

  kv["eval.n_trials"] = "5";
  kv["eval.n_seeds"] = "20";

  return c;
}

Config Config::parse(const std::string& text) {
  Config c = defaults();
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    lineno += 1;
    size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error("config line " + std::to_string(lineno) + ": expected key = value");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw std::runtime_error("config line " + std::to_string(lineno) + ": empty key");
    auto it = c.kv_.find(key);
    if (it == c.kv_.end())
      throw std::runtime_error("config line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    it->second = value;
  }
  return c;
}

Config Config::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

void Config::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write config: " + path);
  out << serialize();
  if (!out) throw std::runtime_error("write failed: " + path);
}

std::string Config::serialize() const {
  std::ostringstream os;
  for (const auto& [k, v] : kv_) os << k << " = " << v << "\n";
  return os.str();
}

uint64_t Config::hash() const {
  std::ostringstream os;
  for (const auto& [k, v] : kv_) {
    if (k == "run.out") continue;  // where results land does not change them
    os << k << "=" << v << ";";
  }
  return fnv1a(os.str());
}

const std::string& Config::get(const std::string& key) const {
  auto it = kv_.find(key);
  if (it == kv_.end()) throw std::runtime_error("unknown config key: " + key);
  return it->second;
}

double Config::get_d(const std::string& key) const {
  const std::string& s = get(key);
  try {
    size_t pos = 0;
    double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw std::runtime_error("config key " + key + ": '" + s + "' is not a number");
  }
}

long long Config::get_ll(const std::string& key) const {
  const std::string& s = get(key);
  try {
    size_t pos = 0;
    long long v = std::stoll(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw std::runtime_error("config key " + key + ": '" + s + "' is not an integer");
  }
}

int Config::get_i(const std::string& key) const { return static_cast<int>(get_ll(key)); }

bool Config::get_b(const std::string& key) const {
  const std::string& s = get(key);
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0") return false;
  throw std::runtime_error("config key " + key + ": '" + s + "' is not a boolean");
}

std::vector<int> Config::get_ints(const std::string& key) const {
  const std::string& s = get(key);
  std::vector<int> out;
  std::istringstream in(s);
  std::string tok;
  while (std::getline(in, tok, ',')) {
    tok = trim(tok);
    if (tok.empty()) continue;
    try {
      size_t pos = 0;
      out.push_back(std::stoi(tok, &pos));
      if (pos != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw std::runtime_error("config key " + key + ": '" + tok + "' is not an integer");
    }
  }
  if (out.empty()) throw std::runtime_error("config key " + key + ": empty list");
  return out;
}

void Config::set(const std::string& key, const std::string& value) {
  auto it = kv_.find(key);
  if (it == kv_.end()) throw std::runtime_error("unknown config key: " + key);
  it->second = value;
}

void Config::set_d(const std::string& key, double v) { set(key, fmt_d(v)); }
void Config::set_i(const std::string& key, long long v) { set(key, std::to_string(v)); }
void Config::set_b(const std::string& key, bool v) { set(key, v ? "true" : "false"); }

env::EnvConfig to_env_config(const Config& c) {
  env::EnvConfig e;
  e.dt = c.get_d("env.dt");
  e.v_max = c.get_d("env.v_max");
  e.dz_rate = c.get_d("env.dz_rate");
  e.z_max = c.get_d("env.z_max");
  e.dz_noise = c.get_d("env.dz_noise");
  e.leak_lo = c.get_d("env.leak_lo");
  e.leak_hi = c.get_d("env.leak_hi");
  e.reach_radius = c.get_d("env.reach_radius");
  e.waypoint_radius = c.get_d("env.waypoint_radius");
  e.follow_dev_max = c.get_d("env.follow_dev_max");
  e.sit_band = c.get_d("env.sit_band");
  e.sit_capture_band = c.get_d("env.sit_capture_band");
  e.sit_release_thrust = c.get_d("env.sit_release_thrust");
  e.sit_fall_margin = c.get_d("env.sit_fall_margin");
  e.climb_fall_margin = c.get_d("env.climb_fall_margin");
  e.sit_settle_steps = c.get_i("env.sit_settle_steps");
  e.step_penalty = c.get_d("env.step_penalty");
  e.sit_rest_bonus = c.get_d("env.sit_rest_bonus");
  e.shaping_scale = c.get_d("env.shaping_scale");
  e.skill_bonus = c.get_d("env.skill_bonus");
  e.sequence_bonus = c.get_d("env.sequence_bonus");
  e.fall_penalty = c.get_d("env.fall_penalty");
  e.follow_violation_terminates = c.get_b("env.follow_violation_terminates");
  return e;
}

model::ModelConfig to_model_config(const Config& c) {
  model::ModelConfig m;
  m.window = c.get_i("model.window");
  m.kernels = c.get_ints("model.kernels");
  m.conv_channels = c.get_i("model.conv_channels");
  m.gru_hidden = c.get_i("model.gru_hidden");
  m.d_model = c.get_i("model.d_model");
  m.attn_heads = c.get_i("model.attn_heads");
  m.trunk_layers = c.get_i("model.trunk_layers");
  m.trunk_heads = c.get_i("model.trunk_heads");
  m.logstd_init = c.get_d("model.logstd_init");
  m.variant = c.get("run.variant");
  m.validate();
  return m;
}

}  // namespace alas::io
