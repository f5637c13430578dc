#include "alas/replay.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "alas/checkpoint.hpp"  // hex16 / parse_hex16

namespace alas::io {

namespace {

constexpr const char* kMagic = "ALASREPLAY v1";

// %.17g round-trips doubles exactly
std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return std::string(buf);
}

// from_chars, not stod: stod refuses subnormals and a policy can emit one
double parse_double(const std::string& s, const std::string& path) {
  double v = 0.0;
  auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || end != s.data() + s.size())
    throw std::runtime_error("replay " + path + ": bad number '" + s + "'");
  return v;
}

[[noreturn]] void bad(const std::string& path, const std::string& what) {
  throw std::runtime_error("replay " + path + ": " + what);
}

}  // namespace

ReplayLog record_episode(const std::string& task, uint64_t seed, const env::EnvConfig& cfg,
                         const PolicyFn& policy) {
  ReplayLog log;
  log.task = task;
  log.seed = seed;
  log.cfg = cfg;

  env::Env e(cfg);
  e.reset(env::make_task(task), seed);
  while (!e.done()) {
    auto a = policy(e);
    log.actions.push_back(a);
    e.step(a);
  }
  log.final_hash = e.state_hash();
  return log;
}

void save_replay(const std::string& path, const ReplayLog& log) {
  std::ofstream out(path);
  if (!out) bad(path, "cannot open for writing");
  const auto& c = log.cfg;
  out << kMagic << "\n";
  out << "task " << log.task << "\n";
  out << "seed " << log.seed << "\n";
  out << "env.dt " << fmt(c.dt) << "\n";
  out << "env.v_max " << fmt(c.v_max) << "\n";
  out << "env.dz_rate " << fmt(c.dz_rate) << "\n";
  out << "env.z_max " << fmt(c.z_max) << "\n";
  out << "env.dz_noise " << fmt(c.dz_noise) << "\n";
  out << "env.leak_lo " << fmt(c.leak_lo) << "\n";
  out << "env.leak_hi " << fmt(c.leak_hi) << "\n";
  out << "env.reach_radius " << fmt(c.reach_radius) << "\n";
  out << "env.waypoint_radius " << fmt(c.waypoint_radius) << "\n";
  out << "env.follow_dev_max " << fmt(c.follow_dev_max) << "\n";
  out << "env.sit_band " << fmt(c.sit_band) << "\n";
  out << "env.sit_capture_band " << fmt(c.sit_capture_band) << "\n";
  out << "env.sit_release_thrust " << fmt(c.sit_release_thrust) << "\n";
  out << "env.sit_fall_margin " << fmt(c.sit_fall_margin) << "\n";
  out << "env.climb_fall_margin " << fmt(c.climb_fall_margin) << "\n";
  out << "env.sit_settle_steps " << c.sit_settle_steps << "\n";
  out << "env.step_penalty " << fmt(c.step_penalty) << "\n";
  out << "env.sit_rest_bonus " << fmt(c.sit_rest_bonus) << "\n";
  out << "env.shaping_scale " << fmt(c.shaping_scale) << "\n";
  out << "env.skill_bonus " << fmt(c.skill_bonus) << "\n";
  out << "env.sequence_bonus " << fmt(c.sequence_bonus) << "\n";
  out << "env.fall_penalty " << fmt(c.fall_penalty) << "\n";
  out << "env.follow_violation_terminates " << (c.follow_violation_terminates ? 1 : 0) << "\n";
  out << "steps " << log.actions.size() << "\n";
  out << "final_hash " << hex16(log.final_hash) << "\n";
  for (const auto& a : log.actions)
    out << fmt(a[0]) << " " << fmt(a[1]) << " " << fmt(a[2]) << " " << fmt(a[3]) << "\n";
  if (!out) bad(path, "write failed");
}

ReplayLog load_replay(const std::string& path) {
  std::ifstream in(path);
  if (!in) bad(path, "cannot open");
  std::string line;
  if (!std::getline(in, line) || line != kMagic) bad(path, "bad magic");

  ReplayLog log;
  std::map<std::string, std::string> kv;
  size_t steps = 0;
  bool have_steps = false, have_hash = false;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string key, value;
    ls >> key >> value;
    if (key.empty() || value.empty()) bad(path, "malformed header line '" + line + "'");
    if (key == "steps") {
      steps = static_cast<size_t>(std::stoull(value));
      have_steps = true;
    } else if (key == "final_hash") {
      log.final_hash = parse_hex16(value);
      have_hash = true;
      break;  // actions follow
    } else {
      kv[key] = value;
    }
  }
  if (!have_steps || !have_hash) bad(path, "truncated header");

  auto take = [&](const std::string& key) -> std::string {
    auto it = kv.find(key);
    if (it == kv.end()) bad(path, "missing header field '" + key + "'");
    std::string v = it->second;
    kv.erase(it);
    return v;
  };
  log.task = take("task");
  log.seed = std::stoull(take("seed"));
  auto& c = log.cfg;
  c.dt = parse_double(take("env.dt"), path);
  c.v_max = parse_double(take("env.v_max"), path);
  c.dz_rate = parse_double(take("env.dz_rate"), path);
  c.z_max = parse_double(take("env.z_max"), path);
  c.dz_noise = parse_double(take("env.dz_noise"), path);
  c.leak_lo = parse_double(take("env.leak_lo"), path);
  c.leak_hi = parse_double(take("env.leak_hi"), path);
  c.reach_radius = parse_double(take("env.reach_radius"), path);
  c.waypoint_radius = parse_double(take("env.waypoint_radius"), path);
  c.follow_dev_max = parse_double(take("env.follow_dev_max"), path);
  c.sit_band = parse_double(take("env.sit_band"), path);
  c.sit_capture_band = parse_double(take("env.sit_capture_band"), path);
  c.sit_release_thrust = parse_double(take("env.sit_release_thrust"), path);
  c.sit_fall_margin = parse_double(take("env.sit_fall_margin"), path);
  c.climb_fall_margin = parse_double(take("env.climb_fall_margin"), path);
  c.sit_settle_steps = std::stoi(take("env.sit_settle_steps"));
  c.step_penalty = parse_double(take("env.step_penalty"), path);
  c.sit_rest_bonus = parse_double(take("env.sit_rest_bonus"), path);
  c.shaping_scale = parse_double(take("env.shaping_scale"), path);
  c.skill_bonus = parse_double(take("env.skill_bonus"), path);
  c.sequence_bonus = parse_double(take("env.sequence_bonus"), path);
  c.fall_penalty = parse_double(take("env.fall_penalty"), path);
  c.follow_violation_terminates = take("env.follow_violation_terminates") == "1";
  if (!kv.empty()) bad(path, "unknown header field '" + kv.begin()->first + "'");

  log.actions.reserve(steps);
  for (size_t i = 0; i < steps; ++i) {
    if (!std::getline(in, line)) bad(path, "expected " + std::to_string(steps) + " action lines");
    std::istringstream ls(line);
    std::string t0, t1, t2, t3;
    ls >> t0 >> t1 >> t2 >> t3;
    if (t3.empty()) bad(path, "action line " + std::to_string(i) + " needs four numbers");
    log.actions.push_back({parse_double(t0, path), parse_double(t1, path), parse_double(t2, path),
                           parse_double(t3, path)});
  }
  while (std::getline(in, line))
    if (!line.empty()) bad(path, "trailing content after actions");
  return log;
}

bool verify_replay(const ReplayLog& log, std::string* why) {
  env::Env e(log.cfg);
  e.reset(env::make_task(log.task), log.seed);
  size_t applied = 0;
  for (const auto& a : log.actions) {
    if (e.done()) {
      if (why)
        *why = "episode ended after " + std::to_string(applied) + " of " +
               std::to_string(log.actions.size()) + " recorded steps";
      return false;
    }
    e.step(a);
    applied += 1;
  }
  uint64_t h = e.state_hash();
  if (h != log.final_hash) {
    if (why) *why = "terminal hash " + hex16(h) + " != recorded " + hex16(log.final_hash);
    return false;
  }
  if (why) why->clear();
  return true;
}

}  // namespace alas::io
