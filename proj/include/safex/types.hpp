#pragma once

#include "safex/error.hpp"
#include "safex/geometry.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace safex {

// ---------------------------------------------------------------------------
// Closed enumerations
// ---------------------------------------------------------------------------

enum class ConstraintId { Proximity, Visibility, GuidanceZone };
enum class Behavior { Continue, SlowDown, Pause, Stop, ManualFollow };
enum class Side { Left, Right };
enum class Load { Unloaded, CarryingBeam };

inline constexpr std::array<ConstraintId, 3> kAllConstraints = {
    ConstraintId::Proximity, ConstraintId::Visibility, ConstraintId::GuidanceZone};
inline constexpr std::array<Behavior, 5> kAllBehaviors = {
    Behavior::Continue, Behavior::SlowDown, Behavior::Pause, Behavior::Stop, Behavior::ManualFollow};

constexpr std::string_view to_string(ConstraintId c) {
  switch (c) {
    case ConstraintId::Proximity: return "proximity";
    case ConstraintId::Visibility: return "visibility";
    case ConstraintId::GuidanceZone: return "guidance_zone";
  }
  return "?";
}

// Behavior names double as grammar keywords and wire values.
constexpr std::string_view to_string(Behavior b) {
  switch (b) {
    case Behavior::Continue: return "continue";
    case Behavior::SlowDown: return "slowdown";
    case Behavior::Pause: return "pause";
    case Behavior::Stop: return "stop";
    case Behavior::ManualFollow: return "manual";
  }
  return "?";
}

constexpr std::string_view to_string(Side s) { return s == Side::Left ? "left" : "right"; }
constexpr std::string_view to_string(Load l) { return l == Load::Unloaded ? "unloaded" : "carrying_beam"; }

inline std::optional<ConstraintId> constraint_from_string(std::string_view s) {
  for (auto c : kAllConstraints)
    if (to_string(c) == s) return c;
  return std::nullopt;
}

inline std::optional<Behavior> behavior_from_string(std::string_view s) {
  for (auto b : kAllBehaviors)
    if (to_string(b) == s) return b;
  return std::nullopt;
}

inline std::optional<Side> side_from_string(std::string_view s) {
  if (s == "left") return Side::Left;
  if (s == "right") return Side::Right;
  return std::nullopt;
}

inline std::optional<Load> load_from_string(std::string_view s) {
  if (s == "unloaded") return Load::Unloaded;
  if (s == "carrying_beam") return Load::CarryingBeam;
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Safety parameters (the certified envelope)
// ---------------------------------------------------------------------------

struct GuidanceZoneSpec {
  Side side = Side::Right;
  double max_distance = 1.0;  // meters
  friend bool operator==(const GuidanceZoneSpec&, const GuidanceZoneSpec&) = default;
};

/// Immutable once constructed: there are no setters, and sessions hold it
/// through `std::shared_ptr<const SafetyParams>`.
class SafetyParams {
public:
  using Priorities = std::array<ConstraintId, 3>;  // highest priority first

  static constexpr Priorities kDefaultPriorities = {
      ConstraintId::Proximity, ConstraintId::Visibility, ConstraintId::GuidanceZone};

  SafetyParams() = default;

  /// Validating factory; throws Error(Validation) naming the offending field.
  static SafetyParams make(double d_min, double v_min, GuidanceZoneSpec zone,
                           std::vector<ConstraintId> priorities) {
    if (!std::isfinite(d_min) || d_min <= 0.0)
      throw Error(ErrorCode::Validation, "d_min must be a finite value > 0", "params.d_min");
    if (!std::isfinite(v_min) || v_min <= 0.0 || v_min > 1.0)
      throw Error(ErrorCode::Validation, "v_min must lie in (0, 1]", "params.v_min");
    if (!std::isfinite(zone.max_distance) || zone.max_distance <= 0.0)
      throw Error(ErrorCode::Validation, "guidance_zone.max_distance must be > 0",
                  "params.guidance_zone.max_distance");
    if (priorities.size() != kAllConstraints.size())
      throw Error(ErrorCode::Validation,
                  "priorities must list every constraint exactly once", "params.priorities");
    for (auto c : kAllConstraints) {
      if (std::count(priorities.begin(), priorities.end(), c) != 1)
        throw Error(ErrorCode::Validation,
                    "priorities must list every constraint exactly once (problem with '" +
                        std::string(to_string(c)) + "')",
                    "params.priorities");
    }
    SafetyParams p;
    p.d_min_ = d_min;
    p.v_min_ = v_min;
    p.zone_ = zone;
    std::copy(priorities.begin(), priorities.end(), p.priorities_.begin());
    return p;
  }

  double d_min() const { return d_min_; }
  double v_min() const { return v_min_; }
  const GuidanceZoneSpec& guidance_zone() const { return zone_; }
  const Priorities& priorities() const { return priorities_; }

  /// Position of `c` in the priority order; 0 is the highest priority.
  int rank(ConstraintId c) const {
    return static_cast<int>(std::find(priorities_.begin(), priorities_.end(), c) -
                            priorities_.begin());
  }

  friend bool operator==(const SafetyParams&, const SafetyParams&) = default;

private:
  double d_min_ = 1.5;
  double v_min_ = 0.6;
  GuidanceZoneSpec zone_{};
  Priorities priorities_ = kDefaultPriorities;
};

using ParamsPtr = std::shared_ptr<const SafetyParams>;

// ---------------------------------------------------------------------------
// Safety state S_t = <H_t, R_t, E_t, P>
// ---------------------------------------------------------------------------

struct HumanState {
  std::string worker_id;
  Vec2 position;
  Vec2 velocity;
  std::string role;  // carried, consumed by no rule
  friend bool operator==(const HumanState&, const HumanState&) = default;
};

struct RobotState {
  Vec2 position;
  double heading = 0.0;  // radians, [-pi, pi]
  double speed = 0.0;    // m/s, >= 0
  Load load = Load::Unloaded;
  Behavior mode = Behavior::Continue;  // behavior in force while this state was produced
  friend bool operator==(const RobotState&, const RobotState&) = default;
};

struct Occluder {
  std::string occluder_id;
  std::string kind;
  Shape shape;       // local frame
  Vec2 position;     // world offset of the local frame
  Vec2 velocity;
  std::string zone;  // cosmetic label used in explanation text, may be empty
  friend bool operator==(const Occluder&, const Occluder&) = default;
};

struct EnvState {
  std::vector<Occluder> occluders;
  std::map<std::string, double> visibility;  // worker_id -> confidence in [0, 1]
  friend bool operator==(const EnvState&, const EnvState&) = default;
};

struct SafetyState {
  long long tick = 0;
  HumanState human;
  RobotState robot;
  EnvState env;
  ParamsPtr params;

  double worker_visibility() const {
    auto it = env.visibility.find(human.worker_id);
    return it == env.visibility.end() ? 1.0 : it->second;
  }

  const Occluder* find_occluder(std::string_view id) const {
    for (const auto& o : env.occluders)
      if (o.occluder_id == id) return &o;
    return nullptr;
  }

  friend bool operator==(const SafetyState& a, const SafetyState& b) {
    const bool same_params = a.params == b.params || (a.params && b.params && *a.params == *b.params);
    return a.tick == b.tick && a.human == b.human && a.robot == b.robot && a.env == b.env &&
           same_params;
  }
};

// ---------------------------------------------------------------------------
// Constraints and decisions
// ---------------------------------------------------------------------------

struct ActiveConstraint {
  ConstraintId id = ConstraintId::Proximity;
  double measured = 0.0;   // meters | confidence | 1.0 for a satisfied boolean predicate
  double threshold = 0.0;  // governing parameter from P
  double margin = 0.0;     // measured - threshold
  std::vector<std::string> subjects;
  friend bool operator==(const ActiveConstraint&, const ActiveConstraint&) = default;
};

/// Ordered by ConstraintId; at most one entry per id.
using ConstraintSet = std::vector<ActiveConstraint>;

inline const ActiveConstraint* find(const ConstraintSet& set, ConstraintId id) {
  for (const auto& c : set)
    if (c.id == id) return &c;
  return nullptr;
}

inline bool contains(const ConstraintSet& set, ConstraintId id) { return find(set, id) != nullptr; }

/// D_t = {S_t, u_t, C_t} plus the nominal action and the guided flag used in
/// arbitration (manual-follow context: robot already following, or a commanded
/// transition).
struct DecisionRecord {
  long long tick = 0;
  SafetyState state;
  Behavior nominal = Behavior::Continue;
  Behavior selected = Behavior::Continue;
  ConstraintSet active;
  bool guided = false;
  friend bool operator==(const DecisionRecord&, const DecisionRecord&) = default;
};

}  // namespace safex
