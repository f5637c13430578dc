#include <algorithm>

#include "alas/env.hpp"

// Scripted controllers. The oracle solves every task by reading the
// simulator's hidden actuator state; the blind variant keeps the same
// navigation but drives the pelvis without feedback, which is the capability
// ceiling of a policy that cannot see its own body.

namespace alas::env {

namespace {

// heading that covers at most step_len toward the target
Vec2 steer(Vec2 pos, Vec2 target, double step_len) {
  Vec2 d = target - pos;
  double n = norm(d);
  if (n < 1e-12) return {0, 0};
  return d * (std::min(1.0, n / step_len) / n);
}

// pelvis command whose intended post-leak height is target_h
double feedback_dz(const Env& e, double target_h, double lo) {
  const auto& cfg = e.config();
  double settled = e.agent().pelvis_h * (1.0 - e.scene().leak_rate * cfg.dt);
  double dz = (target_h - settled) / (cfg.dz_rate * cfg.dt);
  return std::clamp(dz, lo, 1.0);
}

}  // namespace

std::array<double, 4> oracle_action(const Env& e) {
  const auto& sc = e.scene();
  const auto& ag = e.agent();
  const double step_len = e.config().v_max * e.config().dt;
  std::array<double, 4> a{0, 0, 0, -1};

  int idx = e.active_skill();
  if (idx >= int(e.task().skills.size())) return a;

  switch (e.task().skills[size_t(idx)]) {
    case Skill::Follow: {
      Vec2 cmd = steer(ag.pos, e.current_waypoint(), step_len);
      a[0] = cmd.x;
      a[1] = cmd.y;
      break;
    }
    case Skill::Carry: {
      a[3] = 1;
      Vec2 target = ag.grasping ? sc.zone.center : e.box_pos();
      Vec2 cmd = steer(ag.pos, target, step_len);
      a[0] = cmd.x;
      a[1] = cmd.y;
      break;
    }
    case Skill::Climb: {
      Vec2 cmd = steer(ag.pos, sc.platform.footprint.center, step_len);
      a[0] = cmd.x;
      a[1] = cmd.y;
      if (sc.platform.footprint.contains(ag.pos))
        a[2] = feedback_dz(e, sc.platform.height + 0.03, 0.0);
      break;
    }
    case Skill::Sit: {
      bool inside = sc.seat.footprint.contains(ag.pos);
      // pause at the edge while still above surface level: stepping onto the
      // seat from a height counts as a fall
      if (!inside && ag.pelvis_h > sc.seat.surface_h + e.config().sit_band) break;
      Vec2 cmd = steer(ag.pos, sc.seat.footprint.center, step_len);
      a[0] = cmd.x;
      a[1] = cmd.y;
      if (inside) {
        // settle into the catch window above the surface, then release so the
        // seat takes the weight; from under the lip, climb back over it first
        double over = ag.pelvis_h - sc.seat.surface_h;
        if (over >= 0.0 && over <= e.config().sit_capture_band)
          a[2] = 0.0;
        else
          a[2] = feedback_dz(e, sc.seat.surface_h + 0.5 * e.config().sit_capture_band,
                             over < 0.0 ? 0.0 : -1.0);
      }
      break;
    }
  }
  return a;
}

std::array<double, 4> blind_height_action(const Env& e) {
  const auto& sc = e.scene();
  const auto& ag = e.agent();
  const double step_len = e.config().v_max * e.config().dt;
  std::array<double, 4> a{0, 0, 0, -1};

  int idx = e.active_skill();
  if (idx >= int(e.task().skills.size())) return a;

  switch (e.task().skills[size_t(idx)]) {
    case Skill::Follow: {
      Vec2 cmd = steer(ag.pos, e.current_waypoint(), step_len);
      a[0] = cmd.x;
      a[1] = cmd.y;
      break;
    }
    case Skill::Carry: {
      a[3] = 1;
      Vec2 target = ag.grasping ? sc.zone.center : e.box_pos();
      Vec2 cmd = steer(ag.pos, target, step_len);
      a[0] = cmd.x;
      a[1] = cmd.y;
      break;
    }
    case Skill::Climb: {
      Vec2 cmd = steer(ag.pos, sc.platform.footprint.center, step_len);
      a[0] = cmd.x;
      a[1] = cmd.y;
      if (sc.platform.footprint.contains(ag.pos)) a[2] = 1.0;
      break;
    }
    case Skill::Sit: {
      Vec2 cmd = steer(ag.pos, sc.seat.footprint.center, step_len);
      a[0] = cmd.x;
      a[1] = cmd.y;
      // pulse-and-release schedule: push for most of a cycle, then let go and
      // hope the pelvis happens to be at surface level; without height
      // feedback there is no way to time the release against the actual leak
      if (sc.seat.footprint.contains(ag.pos)) a[2] = (e.steps_used() % 12 < 8) ? 0.55 : 0.0;
      break;
    }
  }
  return a;
}

}  // namespace alas::env
