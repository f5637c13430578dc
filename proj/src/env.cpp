#include "alas/env.hpp"

#include <algorithm>
#include <cstring>
#include <stdexcept>

namespace alas::env {

double segment_dist(Vec2 p, Vec2 a, Vec2 b) {
  Vec2 ab = b - a;
  double len2 = ab.x * ab.x + ab.y * ab.y;
  if (len2 < 1e-18) return dist(p, a);
  double t = ((p.x - a.x) * ab.x + (p.y - a.y) * ab.y) / len2;
  t = std::clamp(t, 0.0, 1.0);
  return dist(p, a + ab * t);
}

const char* skill_name(Skill s) {
  switch (s) {
    case Skill::Follow: return "follow";
    case Skill::Carry: return "carry";
    case Skill::Climb: return "climb";
    case Skill::Sit: return "sit";
  }
  return "?";
}

TaskSpec make_task(const std::string& name) {
  TaskSpec t;
  t.name = name;
  t.step_budget = 1200;
  if (name == "follow") {
    t.skills = {Skill::Follow};
  } else if (name == "carry") {
    t.skills = {Skill::Carry};
  } else if (name == "climb") {
    t.skills = {Skill::Climb};
  } else if (name == "sit") {
    t.skills = {Skill::Sit};
  } else if (name == "lh1") {
    t.skills = {Skill::Follow, Skill::Carry, Skill::Climb, Skill::Sit};
  } else if (name == "lh2") {
    t.skills = {Skill::Follow, Skill::Carry, Skill::Follow, Skill::Sit};
  } else if (name == "lh3") {
    t.skills = {Skill::Follow, Skill::Carry, Skill::Follow, Skill::Climb, Skill::Sit};
  } else {
    throw std::runtime_error("unknown task name: " + name);
  }
  return t;
}

namespace {

Vec2 jit2(Rng& r, Vec2 base, double a) { return {base.x + r.uniform(-a, a), base.y + r.uniform(-a, a)}; }

// Scene generation. Draw order is fixed: actuator leak, box variant, then
// geometry; changing it would silently re-seed every layout.
SceneLayout make_layout(const TaskSpec& spec, uint64_t seed, const EnvConfig& cfg) {
  Rng r(seed, "layout:" + spec.name);
  SceneLayout sc;
  sc.leak_rate = r.uniform(cfg.leak_lo, cfg.leak_hi);
  int variant = int(seed % 9);
  Vec2 box_ext{0.25 + 0.1 * (variant % 3), 0.25 + 0.1 * (variant / 3)};
  sc.start = jit2(r, {1.0, 5.0}, 0.05);

  auto add_leg = [&](std::vector<Vec2> wps) {
    int b = int(sc.waypoints.size());
    for (auto& w : wps) sc.waypoints.push_back(jit2(r, w, 0.03));
    sc.follow_legs.emplace_back(b, int(sc.waypoints.size()));
  };
  auto add_box = [&](Vec2 pos, Vec2 zone_c) {
    sc.has_box = true;
    sc.box_pos = jit2(r, pos, 0.05);
    sc.box_extents = box_ext;
    sc.zone = {jit2(r, zone_c, 0.05), {1.0, 1.0}};
  };
  auto add_platform = [&](Vec2 c) {
    sc.has_platform = true;
    sc.platform.footprint = {jit2(r, c, 0.05), {1.4, 1.4}};
    sc.platform.height = 0.85 + r.uniform(-0.08, 0.08);
  };
  auto add_seat = [&](Vec2 c, Vec2 ext, double h, const char* kind) {
    sc.has_seat = true;
    sc.seat.footprint = {jit2(r, c, 0.05), ext};
    sc.seat.surface_h = h + r.uniform(-0.04, 0.04);
    sc.seat.kind = kind;
  };

  if (spec.name == "follow") {
    add_leg({{3.0, 5.0}, {5.0, 5.0}});
  } else if (spec.name == "carry") {
    add_box({3.5, 5.0}, {6.0, 5.0});
  } else if (spec.name == "climb") {
    add_platform({4.0, 5.0});
  } else if (spec.name == "sit") {
    add_seat({4.0, 5.0}, {0.9, 0.9}, 0.45, "chair");
  } else if (spec.name == "lh1") {
    add_leg({{2.5, 5.0}, {4.0, 5.0}});
    add_box({4.5, 5.0}, {6.0, 5.0});
    add_platform({7.5, 5.0});
    add_seat({7.5, 3.2}, {0.9, 0.9}, 0.45, "chair");
  } else if (spec.name == "lh2") {
    add_leg({{2.5, 5.0}, {4.0, 5.0}});
    add_box({4.5, 5.0}, {6.0, 5.0});
    add_leg({{6.8, 4.2}, {7.2, 3.6}});
    add_seat({7.2, 3.0}, {1.6, 0.9}, 0.42, "sofa");
  } else if (spec.name == "lh3") {
    // The opening leg is displaced by a per-seed offset, so the first half of
    // the route only occasionally coincides with the lh1 corridor; the climb
    // and sit area is shared with lh1.
    double dy = r.uniform(0.0, 1.6);
    add_leg({{2.5, 5.0 + dy}, {4.0, 5.0 + dy}});
    add_box({4.5, 5.0 + dy}, {6.0, 5.0 + dy});
    Vec2 zone_c = sc.zone.center;
    Vec2 plat_c{7.5, 5.0};
    Vec2 d = plat_c - zone_c;
    add_leg({zone_c + d * 0.5, zone_c + d * 0.85});
    add_platform(plat_c);
    add_seat({7.5, 3.0}, {2.0, 1.4}, 0.45, "bed");
  }
  return sc;
}

inline void fnv_bytes(uint64_t& h, const void* p, size_t n) {
  const unsigned char* b = static_cast<const unsigned char*>(p);
  for (size_t i = 0; i < n; ++i) {
    h ^= b[i];
    h *= 0x100000001b3ull;
  }
}

inline void fnv_f64(uint64_t& h, double v) { fnv_bytes(h, &v, sizeof v); }
inline void fnv_i64(uint64_t& h, int64_t v) { fnv_bytes(h, &v, sizeof v); }

}  // namespace

dsp::SplitLayout Env::obs_layout() {
  dsp::SplitLayout lay;
  lay.d_raw = kRawChannels;
  for (int i = 0; i < kEnvChannels; ++i) lay.env_idx.push_back(i);
  for (int i = kEnvChannels; i < kRawChannels; ++i) lay.self_idx.push_back(i);
  return lay;
}

std::vector<double> Env::reset(const TaskSpec& spec, uint64_t seed) {
  if (spec.skills.empty()) throw std::runtime_error("task has no skills");
  if (spec.step_budget <= 0) throw std::runtime_error("step budget must be positive");
  spec_ = spec;
  seed_ = seed;
  scene_ = make_layout(spec, seed, cfg_);
  agent_ = AgentState{};
  agent_.pos = scene_.start;
  box_ = scene_.box_pos;
  noise_rng_ = Rng(seed, "dz-noise:" + spec.name);

  credits_.assign(spec.skills.size(), 0.0);
  active_ = 0;
  wp_ptr_ = 0;
  leg_anchor_ = agent_.pos;
  if (follow_active()) {
    auto leg = scene_.follow_legs.at(0);
    wp_ptr_ = leg.first;
  }
  follow_violated_ = false;
  sit_streak_ = 0;
  seated_ = false;
  steps_ = 0;
  done_ = false;
  fell_ = false;
  started_ = true;
  result_ = EpisodeResult{};

  prev_phase_ = phase_id();
  prev_potential_ = potential();
  return observe();
}

Vec2 Env::active_waypoint() const { return scene_.waypoints.at(size_t(wp_ptr_)); }

Vec2 Env::current_waypoint() const {
  if (!follow_active()) throw std::runtime_error("no follow skill active");
  return active_waypoint();
}

bool Env::inside_any_footprint(Vec2 p) const {
  if (scene_.has_platform && scene_.platform.footprint.contains(p)) return true;
  if (scene_.has_seat && scene_.seat.footprint.contains(p)) return true;
  return false;
}

int Env::phase_id() const {
  if (active_ >= int(spec_.skills.size())) return -1;
  int sub = (spec_.skills[size_t(active_)] == Skill::Carry && agent_.grasping) ? 1 : 0;
  return active_ * 2 + sub;
}

double Env::potential() const {
  if (active_ >= int(spec_.skills.size())) return 0.0;
  switch (spec_.skills[size_t(active_)]) {
    case Skill::Follow:
      return dist(agent_.pos, active_waypoint());
    case Skill::Carry:
      return agent_.grasping ? dist(box_, scene_.zone.center) : dist(agent_.pos, box_);
    case Skill::Climb:
      return scene_.platform.footprint.outside_dist(agent_.pos) +
             std::max(scene_.platform.height - agent_.pelvis_h, 0.0);
    case Skill::Sit:
      return scene_.seat.footprint.outside_dist(agent_.pos) +
             std::abs(agent_.pelvis_h - scene_.seat.surface_h);
  }
  return 0.0;
}

void Env::advance_skill() {
  active_ += 1;
  sit_streak_ = 0;
  follow_violated_ = false;
  if (active_ < int(spec_.skills.size()) && follow_active()) {
    int leg_no = 0;
    for (int i = 0; i < active_; ++i)
      if (spec_.skills[size_t(i)] == Skill::Follow) ++leg_no;
    auto leg = scene_.follow_legs.at(size_t(leg_no));
    wp_ptr_ = leg.first;
    leg_anchor_ = agent_.pos;
  }
}

Env::Step Env::step(const std::array<double, 4>& action) {
  if (!started_) throw std::runtime_error("reset before stepping");
  if (done_) throw std::runtime_error("step after episode end");

  std::array<double, 4> a{};
  for (int i = 0; i < 4; ++i) {
    double v = action[size_t(i)];
    a[size_t(i)] = std::isfinite(v) ? std::clamp(v, -1.0, 1.0) : 0.0;
  }

  // planar kinematics, speed capped at v_max
  Vec2 v{a[0], a[1]};
  double m = norm(v);
  if (m > 1.0) v = v * (1.0 / m);
  agent_.vel = v * cfg_.v_max;
  agent_.pos = agent_.pos + agent_.vel * cfg_.dt;
  if (agent_.grasping) box_ = agent_.pos;

  // pelvis height: leaky actuator with bounded noise inside a footprint,
  // settles to the ground elsewhere; the noise stream advances every step so
  // draws line up with step indices
  double n = noise_rng_.uniform(-cfg_.dz_noise, cfg_.dz_noise);
  bool rested = false;
  if (inside_any_footprint(agent_.pos)) {
    // a seat catches a slow descent near surface level and then carries the
    // pelvis until the agent pushes off; holding thrust mid-air never counts
    // as seated
    bool on_seat = scene_.has_seat && scene_.seat.footprint.contains(agent_.pos);
    double over = agent_.pelvis_h - scene_.seat.surface_h;  // catch only from above the lip
    bool catches = seated_ ? a[2] <= cfg_.sit_release_thrust
                           : a[2] <= 0.0 && over >= -1e-9 && over <= cfg_.sit_capture_band;
    if (on_seat && catches) {
      agent_.pelvis_h = scene_.seat.surface_h;
      seated_ = true;
      rested = true;
    } else {
      seated_ = false;
      double h = agent_.pelvis_h * (1.0 - scene_.leak_rate * cfg_.dt);
      h += (a[2] + n) * cfg_.dz_rate * cfg_.dt;
      agent_.pelvis_h = std::clamp(h, 0.0, cfg_.z_max);
    }
  } else {
    seated_ = false;
    // off any support the pelvis settles at the same hidden leak rate, so
    // arrival height after a dismount cannot be timed without feedback
    agent_.pelvis_h = std::max(0.0, agent_.pelvis_h * (1.0 - scene_.leak_rate * cfg_.dt));
  }

  // grasp is level-triggered: latches while the command stays positive
  if (!agent_.grasping) {
    if (a[3] > 0.0 && scene_.has_box && dist(agent_.pos, box_) <= cfg_.reach_radius) {
      agent_.grasping = true;
      box_ = agent_.pos;
    }
  } else if (a[3] <= 0.0) {
    agent_.grasping = false;
  }

  for (int i = 0; i < 4; ++i) agent_.proprio[size_t(i)] = 0.8 * agent_.proprio[size_t(i)] + 0.2 * a[size_t(i)];

  steps_ += 1;
  double reward = -cfg_.step_penalty;
  bool fell_now = false;

  if (active_ < int(spec_.skills.size())) {
    Skill sk = spec_.skills[size_t(active_)];
    double& credit = credits_[size_t(active_)];
    switch (sk) {
      case Skill::Follow: {
        auto leg_end = [&] {
          int leg_no = 0;
          for (int i = 0; i < active_; ++i)
            if (spec_.skills[size_t(i)] == Skill::Follow) ++leg_no;
          return scene_.follow_legs.at(size_t(leg_no)).second;
        }();
        while (dist(agent_.pos, active_waypoint()) <= cfg_.waypoint_radius) {
          if (wp_ptr_ + 1 == leg_end) {
            // a blown corridor leaves the leg pointed at its last waypoint;
            // the credit is forfeit no matter how the rest of the run goes
            if (!follow_violated_) {
              credit = 1.0;
              reward += cfg_.skill_bonus;
              advance_skill();
            }
            break;
          }
          leg_anchor_ = active_waypoint();
          wp_ptr_ += 1;
        }
        if (active_ < int(spec_.skills.size()) && spec_.skills[size_t(active_)] == Skill::Follow) {
          if (segment_dist(agent_.pos, leg_anchor_, active_waypoint()) > cfg_.follow_dev_max)
            follow_violated_ = true;
        }
        break;
      }
      case Skill::Carry: {
        double before = credit;
        if (agent_.grasping && credit < 0.5) credit = 0.5;
        if (scene_.zone.contains(box_)) credit = 1.0;
        if (credit > before) reward += (credit - before) * cfg_.skill_bonus;
        if (credit == 1.0) advance_skill();
        break;
      }
      case Skill::Climb: {
        if (scene_.platform.footprint.contains(agent_.pos)) {
          if (agent_.pelvis_h > scene_.platform.height + cfg_.climb_fall_margin) {
            fell_now = true;
          } else if (agent_.pelvis_h >= scene_.platform.height) {
            credit = 1.0;
            reward += cfg_.skill_bonus;
            advance_skill();
          }
        }
        break;
      }
      case Skill::Sit: {
        if (scene_.seat.footprint.contains(agent_.pos)) {
          if (agent_.pelvis_h > scene_.seat.surface_h + cfg_.sit_fall_margin) {
            fell_now = true;
          } else if (rested) {
            reward += cfg_.sit_rest_bonus;
            sit_streak_ += 1;
            if (sit_streak_ >= cfg_.sit_settle_steps) {
              credit = 1.0;
              reward += cfg_.skill_bonus;
              advance_skill();
            }
          } else {
            sit_streak_ = 0;
          }
        } else {
          sit_streak_ = 0;
        }
        break;
      }
    }
  }

  bool sequence_done = active_ >= int(spec_.skills.size());
  if (sequence_done && !done_) {
    reward += cfg_.sequence_bonus;
    done_ = true;
  }
  if (fell_now) {
    fell_ = true;
    reward -= cfg_.fall_penalty;
    done_ = true;
  }
  if (steps_ >= spec_.step_budget) done_ = true;
  if (cfg_.follow_violation_terminates && follow_violated_) done_ = true;

  // potential-based progress shaping, reset whenever the subgoal changes
  int phase = phase_id();
  double pot = potential();
  if (phase == prev_phase_) reward += cfg_.shaping_scale * (prev_potential_ - pot);
  prev_phase_ = phase;
  prev_potential_ = pot;

  if (done_) {
    result_.per_skill_credit = credits_;
    result_.steps_used = steps_;
    result_.sequence_success = sequence_done;
    result_.sim_time_s = steps_ * cfg_.dt;
  }
  return {observe(), reward, done_};
}

std::vector<double> Env::observe() const {
  if (!started_) throw std::runtime_error("reset before observing");
  std::vector<double> o(kRawChannels, 0.0);
  const Vec2 p = agent_.pos;
  if (follow_active()) {
    Vec2 w = active_waypoint();
    o[0] = w.x - p.x;
    o[1] = w.y - p.y;
  }
  if (scene_.has_box) {
    o[2] = box_.x - p.x;
    o[3] = box_.y - p.y;
    o[4] = scene_.box_extents.x;
    o[5] = scene_.box_extents.y;
    o[6] = scene_.zone.center.x - p.x;
    o[7] = scene_.zone.center.y - p.y;
  }
  if (scene_.has_platform) {
    o[8] = scene_.platform.footprint.center.x - p.x;
    o[9] = scene_.platform.footprint.center.y - p.y;
    o[10] = scene_.platform.height;
    o[11] = scene_.platform.footprint.extents.x;
    o[12] = scene_.platform.footprint.extents.y;
  }
  if (scene_.has_seat) {
    o[13] = scene_.seat.footprint.center.x - p.x;
    o[14] = scene_.seat.footprint.center.y - p.y;
    o[15] = scene_.seat.surface_h;
    o[16] = scene_.seat.footprint.extents.x;
    o[17] = scene_.seat.footprint.extents.y;
  }
  if (active_ < int(spec_.skills.size())) o[18 + int(spec_.skills[size_t(active_)])] = 1.0;

  o[22] = agent_.vel.x;
  o[23] = agent_.vel.y;
  o[24] = agent_.pelvis_h;
  o[25] = agent_.grasping ? 1.0 : 0.0;
  for (int i = 0; i < 4; ++i) o[size_t(26 + i)] = agent_.proprio[size_t(i)];
  return o;
}

const EpisodeResult& Env::result() const {
  if (!done_) throw std::runtime_error("episode still running");
  return result_;
}

uint64_t Env::state_hash() const {
  uint64_t h = 0xcbf29ce484222325ull;
  fnv_f64(h, agent_.pos.x);
  fnv_f64(h, agent_.pos.y);
  fnv_f64(h, agent_.vel.x);
  fnv_f64(h, agent_.vel.y);
  fnv_f64(h, agent_.pelvis_h);
  fnv_i64(h, agent_.grasping ? 1 : 0);
  for (double p : agent_.proprio) fnv_f64(h, p);
  fnv_f64(h, box_.x);
  fnv_f64(h, box_.y);
  for (double c : credits_) fnv_f64(h, c);
  fnv_i64(h, steps_);
  fnv_i64(h, active_);
  fnv_i64(h, seated_ ? 1 : 0);
  fnv_i64(h, done_ ? 1 : 0);
  fnv_i64(h, fell_ ? 1 : 0);
  return h;
}

}  // namespace alas::env
