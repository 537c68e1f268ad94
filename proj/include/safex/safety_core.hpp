#pragma once

#include "safex/types.hpp"
#include "safex/visibility.hpp"

#include <optional>
#include <string>

namespace safex {

/// Default rule table: Proximity -> Stop, Visibility -> Pause,
/// GuidanceZone -> ManualFollow.
constexpr Behavior mapped_behavior(ConstraintId c) {
  switch (c) {
    case ConstraintId::Proximity: return Behavior::Stop;
    case ConstraintId::Visibility: return Behavior::Pause;
    case ConstraintId::GuidanceZone: return Behavior::ManualFollow;
  }
  return Behavior::Stop;
}

// Zone membership is inclusive ("within"); the tolerance absorbs rounding when a
// worker is placed exactly on the zone radius along a rotated heading.
inline constexpr double kZoneTolerance = 1e-9;

/// Unit normal pointing to the configured side of the robot's heading.
inline Vec2 side_normal(double heading, Side side) {
  const Vec2 h = unit_from_heading(heading);
  return side == Side::Right ? Vec2{h.y, -h.x} : Vec2{-h.y, h.x};
}

/// Half-disc of radius max_distance centred on the robot, restricted to the
/// configured side of the heading (strictly off the heading line).
inline bool in_guidance_zone(const RobotState& robot, Vec2 worker, const GuidanceZoneSpec& zone) {
  const Vec2 rel = worker - robot.position;
  if (norm(rel) > zone.max_distance + kZoneTolerance) return false;
  const double c = cross(unit_from_heading(robot.heading), rel);
  return zone.side == Side::Left ? c > 0.0 : c < 0.0;
}

/// Throws Error(Validation) naming the first invalid field.
inline void validate_state(const SafetyState& s) {
  auto need = [](bool ok, const char* msg, const std::string& path) {
    if (!ok) throw Error(ErrorCode::Validation, msg, path);
  };
  need(s.params != nullptr, "state carries no safety parameters", "params");
  need(s.tick >= 0, "tick must be non-negative", "tick");
  need(is_finite(s.human.position), "non-finite coordinate", "human.position");
  need(is_finite(s.human.velocity), "non-finite coordinate", "human.velocity");
  need(is_finite(s.robot.position), "non-finite coordinate", "robot.position");
  need(std::isfinite(s.robot.heading), "non-finite heading", "robot.heading");
  need(std::isfinite(s.robot.speed) && s.robot.speed >= 0.0, "speed must be finite and >= 0",
       "robot.speed");
  for (std::size_t i = 0; i < s.env.occluders.size(); ++i) {
    const auto& o = s.env.occluders[i];
    const std::string base = "env.occluders[" + std::to_string(i) + "]";
    need(is_finite(o.position), "non-finite coordinate", base + ".position");
    need(is_finite(o.velocity), "non-finite coordinate", base + ".velocity");
    for (std::size_t j = i + 1; j < s.env.occluders.size(); ++j)
      need(o.occluder_id != s.env.occluders[j].occluder_id, "duplicate occluder id",
           base + ".id");
  }
  for (const auto& [id, v] : s.env.visibility)
    need(std::isfinite(v) && v >= 0.0 && v <= 1.0, "visibility must lie in [0, 1]",
         "env.visibility." + id);
}

/// Returns exactly the constraints whose predicates hold on `state`, ordered
/// Proximity, Visibility, GuidanceZone.
inline ConstraintSet evaluate_constraints(const SafetyState& state) {
  validate_state(state);
  const SafetyParams& p = *state.params;
  ConstraintSet out;

  const double d = distance(state.human.position, state.robot.position);
  if (d < p.d_min())
    out.push_back({ConstraintId::Proximity, d, p.d_min(), d - p.d_min(), {state.human.worker_id}});

  const double v = state.worker_visibility();
  if (v < p.v_min()) {
    ActiveConstraint c{ConstraintId::Visibility, v, p.v_min(), v - p.v_min(), {state.human.worker_id}};
    for (auto& id : attribute_occlusion(state.robot, state.human, state.env.occluders))
      c.subjects.push_back(std::move(id));
    out.push_back(std::move(c));
  }

  if (in_guidance_zone(state.robot, state.human.position, p.guidance_zone())) {
    // Enabling constraint: measured is the worker distance, margin the slack left.
    const double t = p.guidance_zone().max_distance;
    out.push_back({ConstraintId::GuidanceZone, d, t, t - d, {state.human.worker_id}});
  }
  return out;
}

/// The constraint that decides arbitration, if any.
///
/// Without the guided flag, GuidanceZone is an enabling constraint only and
/// never binds: the highest-priority Proximity/Visibility constraint wins. With
/// the guided flag (robot already in manual-follow, or a commanded transition)
/// and the worker inside the guidance zone, separation is controlled:
/// Proximity drops out and GuidanceZone competes under its priority rank. A
/// worker within d_min but outside the zone still binds Proximity.
inline std::optional<ConstraintId> binding_constraint(const ConstraintSet& active,
                                                      const SafetyParams& params, bool guided) {
  const bool controlled = guided && contains(active, ConstraintId::GuidanceZone);
  std::optional<ConstraintId> best;
  for (const auto& c : active) {
    if (c.id == ConstraintId::GuidanceZone && !controlled) continue;
    if (c.id == ConstraintId::Proximity && controlled) continue;
    if (!best || params.rank(c.id) < params.rank(*best)) best = c.id;
  }
  return best;
}

/// Priority-ordered arbitration: the binding constraint's mapped behavior, or
/// the nominal action when nothing binds (Pause for a manual-follow nominal).
inline Behavior select_behavior(const ConstraintSet& active, Behavior nominal,
                                const SafetyParams& params, bool guided = false) {
  const auto best = binding_constraint(active, params, guided);
  if (best) return mapped_behavior(*best);
  // Only the guidance zone grants manual-follow; asked for without it, hold.
  return nominal == Behavior::ManualFollow ? Behavior::Pause : nominal;
}

/// Guided flag derived from the state: the robot is currently following.
inline bool guided_context(const SafetyState& state, bool commanded_follow) {
  return commanded_follow || state.robot.mode == Behavior::ManualFollow;
}

/// Composes evaluation and selection into a trace record. The record holds a
/// deep copy of the state; the input is not modified.
inline DecisionRecord make_decision(const SafetyState& state, Behavior nominal,
                                    std::optional<bool> guided = std::nullopt) {
  DecisionRecord r;
  r.active = evaluate_constraints(state);
  r.tick = state.tick;
  r.state = state;
  r.nominal = nominal;
  r.guided = guided.value_or(guided_context(state, false));
  r.selected = select_behavior(r.active, nominal, *state.params, r.guided);
  return r;
}

}  // namespace safex
