#pragma once
#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "alas/dsp.hpp"
#include "alas/rng.hpp"

// Skill-chain environment suite: 2-D kinematics plus a pelvis-height channel,
// with Follow / Carry / Climb / Sit skills chained into long-horizon tasks.

namespace alas::env {

struct Vec2 {
  double x = 0, y = 0;
};

inline Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
inline Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
inline Vec2 operator*(Vec2 a, double s) { return {a.x * s, a.y * s}; }
inline double norm(Vec2 a) { return std::sqrt(a.x * a.x + a.y * a.y); }
inline double dist(Vec2 a, Vec2 b) { return norm(a - b); }

// axis-aligned box; extents are full side lengths
struct Rect {
  Vec2 center;
  Vec2 extents;

  bool contains(Vec2 p) const {
    return std::abs(p.x - center.x) <= extents.x * 0.5 && std::abs(p.y - center.y) <= extents.y * 0.5;
  }
  // distance from p to the rectangle (0 inside)
  double outside_dist(Vec2 p) const {
    double dx = std::max(std::abs(p.x - center.x) - extents.x * 0.5, 0.0);
    double dy = std::max(std::abs(p.y - center.y) - extents.y * 0.5, 0.0);
    return std::sqrt(dx * dx + dy * dy);
  }
};

// distance from point p to segment a-b
double segment_dist(Vec2 p, Vec2 a, Vec2 b);

enum class Skill { Follow, Carry, Climb, Sit };
const char* skill_name(Skill s);

struct PlatformSpec {
  Rect footprint;
  double height = 0;
};

struct SeatSpec {
  Rect footprint;
  double surface_h = 0;
  std::string kind;  // chair | sofa | bed
};

struct SceneLayout {
  Vec2 start;
  std::vector<Vec2> waypoints;                   // all follow waypoints, in visit order
  std::vector<std::pair<int, int>> follow_legs;  // [begin,end) into waypoints, one per Follow skill
  bool has_box = false;
  Vec2 box_pos;
  Vec2 box_extents;
  Rect zone;
  bool has_platform = false;
  PlatformSpec platform;
  bool has_seat = false;
  SeatSpec seat;
  // support leak of the pelvis-height actuator, per second; drawn per layout
  // seed and deliberately absent from the observation vector
  double leak_rate = 1.2;
};

struct TaskSpec {
  std::string name;
  std::vector<Skill> skills;
  int step_budget = 1200;
};

// follow | carry | climb | sit | lh1 | lh2 | lh3; throws on anything else
TaskSpec make_task(const std::string& name);

struct AgentState {
  Vec2 pos;
  Vec2 vel;
  double pelvis_h = 0;
  bool grasping = false;
  std::array<double, 4> proprio{};  // low-pass filtered action history
};

struct EpisodeResult {
  std::vector<double> per_skill_credit;  // one of {0, 0.5, 1} per skill
  int steps_used = 0;
  bool sequence_success = false;
  double sim_time_s = 0;
};

struct EnvConfig {
  double dt = 0.1;
  double v_max = 2.0;
  double dz_rate = 2.5;    // pelvis actuator, m/s at full command
  double z_max = 2.0;
  double dz_noise = 0.15;  // uniform actuation noise on the pelvis command
  double leak_lo = 0.6, leak_hi = 2.4;
  double reach_radius = 0.5;
  double waypoint_radius = 0.15;
  double follow_dev_max = 0.3;
  double sit_band = 0.05;
  double sit_capture_band = 0.1;     // seat catches a non-thrusting pelvis this close
  double sit_release_thrust = 0.2;   // push-off threshold that breaks the seated state
  double sit_fall_margin = 1.0;
  double climb_fall_margin = 0.15;
  int sit_settle_steps = 4;
  double step_penalty = 0.01;
  double sit_rest_bonus = 0.1;  // per-step reward while the seat holds the pelvis
  double shaping_scale = 1.0;
  double skill_bonus = 5.0;
  double sequence_bonus = 10.0;
  double fall_penalty = 5.0;
  // spec'd behaviour is to let a blown corridor run out the clock; training
  // configs can end such episodes early for throughput
  bool follow_violation_terminates = false;
};

class Env {
 public:
  static constexpr int kEnvChannels = 22;
  static constexpr int kSelfChannels = 8;
  static constexpr int kRawChannels = kEnvChannels + kSelfChannels;

  explicit Env(EnvConfig cfg = {}) : cfg_(cfg) {}

  // channel partition of the raw observation (environment block first)
  static dsp::SplitLayout obs_layout();

  std::vector<double> reset(const TaskSpec& spec, uint64_t seed);

  struct Step {
    std::vector<double> obs;
    double reward = 0;
    bool done = false;
  };
  Step step(const std::array<double, 4>& action);

  std::vector<double> observe() const;

  bool done() const { return done_; }
  const EpisodeResult& result() const;
  const TaskSpec& task() const { return spec_; }
  const SceneLayout& scene() const { return scene_; }
  const AgentState& agent() const { return agent_; }
  const EnvConfig& config() const { return cfg_; }
  Vec2 box_pos() const { return box_; }
  // target of the active follow leg; throws when no follow skill is active
  Vec2 current_waypoint() const;
  const std::vector<double>& credits() const { return credits_; }
  // index of the skill the pointer is on; == skills.size() once the chain is done
  int active_skill() const { return active_; }
  int steps_used() const { return steps_; }
  double sim_time_s() const { return steps_ * cfg_.dt; }
  bool fell() const { return fell_; }
  bool follow_violated() const { return follow_violated_; }
  uint64_t seed() const { return seed_; }
  // FNV-1a digest over the kinematic and progress state; replay verification
  uint64_t state_hash() const;

 private:
  void advance_skill();
  double potential() const;
  int phase_id() const;
  bool inside_any_footprint(Vec2 p) const;
  Vec2 active_waypoint() const;
  bool follow_active() const { return active_ < int(spec_.skills.size()) && spec_.skills[size_t(active_)] == Skill::Follow; }

  EnvConfig cfg_;
  TaskSpec spec_;
  SceneLayout scene_;
  AgentState agent_;
  Vec2 box_;
  Rng noise_rng_;
  uint64_t seed_ = 0;

  std::vector<double> credits_;
  int active_ = 0;
  int wp_ptr_ = 0;         // index into scene_.waypoints for the active leg
  Vec2 leg_anchor_;        // segment start for corridor checks
  bool follow_violated_ = false;
  int sit_streak_ = 0;
  bool seated_ = false;
  int steps_ = 0;
  bool done_ = false;
  bool fell_ = false;
  bool started_ = false;

  int prev_phase_ = -1;
  double prev_potential_ = 0;

  EpisodeResult result_;
};

// Fixed-length observation history, zero-padded at episode start. Rows are
// oldest-first; the encoders treat the row axis as time.
class ObsWindow {
 public:
  ObsWindow(int t, int d) : t_(t), d_(d), rows_(size_t(t) * size_t(d), 0.f) {}

  void reset() { std::fill(rows_.begin(), rows_.end(), 0.f); }

  void push(const std::vector<double>& row) {
    if (int(row.size()) != d_) throw std::runtime_error("obs window: row width mismatch");
    std::copy(rows_.begin() + d_, rows_.end(), rows_.begin());
    for (int i = 0; i < d_; ++i) rows_[size_t(t_ - 1) * d_ + i] = float(row[size_t(i)]);
  }

  const std::vector<float>& rows() const { return rows_; }
  int t() const { return t_; }
  int d() const { return d_; }

 private:
  int t_, d_;
  std::vector<float> rows_;
};

// Scripted controller that solves every task; doubles as the solvability
// check and as the data source for representation pretraining. Reads the
// simulator's hidden actuator state, which a learned policy cannot.
std::array<double, 4> oracle_action(const Env& e);

// Scripted controller that ignores pelvis feedback and the hidden actuator
// state: navigates by scene geometry alone and drives the pelvis open-loop.
// Used to demonstrate that height control is unreliable without self-state.
std::array<double, 4> blind_height_action(const Env& e);

}  // namespace alas::env
