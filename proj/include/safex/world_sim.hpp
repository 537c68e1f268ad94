#pragma once

#include "safex/safety_core.hpp"
#include "safex/visibility.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace safex {

// ---------------------------------------------------------------------------
// Scenario
// ---------------------------------------------------------------------------

struct OccluderSpec {
  Occluder occluder;   // velocity is derived while moving; initial value ignored
  double speed = 0.0;  // m/s toward its waypoint
  friend bool operator==(const OccluderSpec&, const OccluderSpec&) = default;
};

namespace event {
struct SetWorkerWaypoint { Vec2 point; friend bool operator==(const SetWorkerWaypoint&, const SetWorkerWaypoint&) = default; };
struct SetOccluderWaypoint { std::string id; Vec2 point; friend bool operator==(const SetOccluderWaypoint&, const SetOccluderWaypoint&) = default; };
struct SpawnOccluder { OccluderSpec spec; friend bool operator==(const SpawnOccluder&, const SpawnOccluder&) = default; };
struct RemoveOccluder { std::string id; friend bool operator==(const RemoveOccluder&, const RemoveOccluder&) = default; };
struct SetNominal { Behavior behavior = Behavior::Continue; friend bool operator==(const SetNominal&, const SetNominal&) = default; };
}  // namespace event

using EventAction = std::variant<event::SetWorkerWaypoint, event::SetOccluderWaypoint,
                                 event::SpawnOccluder, event::RemoveOccluder, event::SetNominal>;

struct Event {
  long long tick = 0;
  EventAction action;
  friend bool operator==(const Event&, const Event&) = default;
};

struct Scenario {
  std::string name;
  double tick_duration = 0.1;  // seconds
  long long horizon = 0;       // ticks
  std::uint64_t seed = 0;
  ParamsPtr params;

  Vec2 robot_position;
  double robot_heading = 0.0;
  double cruise_speed = 0.5;  // m/s
  Load robot_load = Load::CarryingBeam;

  std::string worker_id = "worker1";
  std::string worker_role;
  Vec2 worker_position;
  double worker_speed = 1.0;  // m/s

  std::vector<OccluderSpec> occluders;
  std::vector<Event> events;                // sorted by tick
  std::map<long long, Behavior> nominal;    // per-tick overrides, default Continue
};

// ---------------------------------------------------------------------------
// Live world
// ---------------------------------------------------------------------------

struct MovingOccluder {
  Occluder occluder;
  double speed = 0.0;
  std::optional<Vec2> waypoint;
};

/// Mutable simulation state. Single writer; readers only ever see SafetyState
/// snapshots.
struct WorldState {
  long long tick = 0;
  HumanState human;
  RobotState robot;
  std::vector<MovingOccluder> occluders;
  std::optional<Vec2> worker_waypoint;
  double worker_speed = 0.0;
  double cruise_speed = 0.0;
  Behavior default_nominal = Behavior::Continue;
  std::size_t next_event = 0;
  ParamsPtr params;

  MovingOccluder* find_occluder(std::string_view id) {
    for (auto& o : occluders)
      if (o.occluder.occluder_id == id) return &o;
    return nullptr;
  }
};

inline std::vector<Occluder> occluder_list(const WorldState& w) {
  std::vector<Occluder> out;
  out.reserve(w.occluders.size());
  for (const auto& o : w.occluders) out.push_back(o.occluder);
  return out;
}

/// Immutable S_t view of the world at its current tick.
inline SafetyState snapshot(const WorldState& w) {
  SafetyState s;
  s.tick = w.tick;
  s.human = w.human;
  s.robot = w.robot;
  s.env.occluders = occluder_list(w);
  s.env.visibility[w.human.worker_id] = compute_visibility(w.robot, w.human, s.env.occluders);
  s.params = w.params;
  return s;
}

namespace detail {

inline void apply_event(WorldState& w, const EventAction& action) {
  std::visit(
      [&](const auto& e) {
        using T = std::decay_t<decltype(e)>;
        if constexpr (std::is_same_v<T, event::SetWorkerWaypoint>) {
          w.worker_waypoint = e.point;
        } else if constexpr (std::is_same_v<T, event::SetOccluderWaypoint>) {
          auto* o = w.find_occluder(e.id);
          if (!o) throw Error(ErrorCode::Referent, "event references unknown occluder '" + e.id + "'", e.id);
          o->waypoint = e.point;
        } else if constexpr (std::is_same_v<T, event::SpawnOccluder>) {
          if (w.find_occluder(e.spec.occluder.occluder_id))
            throw Error(ErrorCode::Referent, "occluder '" + e.spec.occluder.occluder_id + "' already exists",
                        e.spec.occluder.occluder_id);
          w.occluders.push_back({e.spec.occluder, e.spec.speed, std::nullopt});
          w.occluders.back().occluder.velocity = {};
        } else if constexpr (std::is_same_v<T, event::RemoveOccluder>) {
          auto it = std::find_if(w.occluders.begin(), w.occluders.end(),
                                 [&](const auto& o) { return o.occluder.occluder_id == e.id; });
          if (it == w.occluders.end())
            throw Error(ErrorCode::Referent, "event references unknown occluder '" + e.id + "'", e.id);
          w.occluders.erase(it);
        } else {
          w.default_nominal = e.behavior;
        }
      },
      action);
}

/// Constant-speed move toward a waypoint. Returns the new position and sets
/// `velocity`; clears the waypoint and zeroes velocity on arrival.
inline Vec2 advance(Vec2 pos, std::optional<Vec2>& waypoint, double speed, double dt, Vec2& velocity) {
  if (!waypoint) {
    velocity = {};
    return pos;
  }
  const Vec2 to = *waypoint - pos;
  const double remaining = norm(to);
  const double step = speed * dt;
  if (remaining <= step || remaining == 0.0) {
    const Vec2 arrived = *waypoint;
    waypoint.reset();
    velocity = {};
    return arrived;
  }
  const Vec2 dir = (1.0 / remaining) * to;
  velocity = speed * dir;
  return pos + step * dir;
}

inline void apply_due_events(WorldState& w, const Scenario& sc) {
  while (w.next_event < sc.events.size() && sc.events[w.next_event].tick <= w.tick) {
    apply_event(w, sc.events[w.next_event].action);
    ++w.next_event;
  }
}

}  // namespace detail

/// World at tick 0 with tick-0 events applied.
inline WorldState initial_world(const Scenario& sc) {
  WorldState w;
  w.params = sc.params;
  w.human.worker_id = sc.worker_id;
  w.human.role = sc.worker_role;
  w.human.position = sc.worker_position;
  w.worker_speed = sc.worker_speed;
  w.robot.position = sc.robot_position;
  w.robot.heading = normalize_angle(sc.robot_heading);
  w.robot.load = sc.robot_load;
  w.robot.mode = Behavior::Continue;
  w.cruise_speed = sc.cruise_speed;
  for (const auto& o : sc.occluders) {
    w.occluders.push_back({o.occluder, o.speed, std::nullopt});
    w.occluders.back().occluder.velocity = {};
  }
  detail::apply_due_events(w, sc);
  return w;
}

/// Nominal task action at the world's current tick.
inline Behavior nominal_at(const WorldState& w, const Scenario& sc) {
  auto it = sc.nominal.find(w.tick);
  return it != sc.nominal.end() ? it->second : w.default_nominal;
}

/// Robot speed commanded by a behavior.
inline double mode_speed(Behavior mode, double cruise) {
  switch (mode) {
    case Behavior::Continue: return cruise;
    case Behavior::SlowDown: return 0.5 * cruise;
    case Behavior::Pause:
    case Behavior::Stop: return 0.0;
    case Behavior::ManualFollow: return cruise;
  }
  return 0.0;
}

/// Advances the world one tick: due events, entity kinematics, robot motion
/// under its current mode, visibility. Returns the snapshot for the new tick.
inline SafetyState step(WorldState& w, const Scenario& sc) {
  if (w.tick >= sc.horizon)
    throw Error(ErrorCode::EndOfScenario, "scenario horizon reached at tick " + std::to_string(sc.horizon));
  const double dt = sc.tick_duration;
  ++w.tick;
  detail::apply_due_events(w, sc);

  w.human.position = detail::advance(w.human.position, w.worker_waypoint, w.worker_speed, dt, w.human.velocity);
  for (auto& o : w.occluders)
    o.occluder.position = detail::advance(o.occluder.position, o.waypoint, o.speed, dt, o.occluder.velocity);

  RobotState& r = w.robot;
  if (r.mode == Behavior::ManualFollow) {
    const auto& zone = w.params->guidance_zone();
    std::optional<Vec2> target = w.human.position - zone.max_distance * side_normal(r.heading, zone.side);
    Vec2 vel;
    r.position = detail::advance(r.position, target, w.cruise_speed, dt, vel);
    r.speed = norm(vel);
  } else {
    r.speed = mode_speed(r.mode, w.cruise_speed);
    r.position = r.position + (r.speed * dt) * unit_from_heading(r.heading);
  }
  return snapshot(w);
}

/// Advances the clock one tick and applies due events without moving anything.
/// Used for command records, which are judged on the state as it stands.
inline SafetyState hold(WorldState& w, const Scenario& sc) {
  if (w.tick >= sc.horizon)
    throw Error(ErrorCode::EndOfScenario, "scenario horizon reached at tick " + std::to_string(sc.horizon));
  ++w.tick;
  detail::apply_due_events(w, sc);
  return snapshot(w);
}

}  // namespace safex
