#pragma once

// Explanation engine: answers Why / Why-not / What-if / Confirm queries
// against a recorded decision, keeps the per-session dialogue memory, and
// renders answers through fixed templates.
//
// Every verdict is produced by the same evaluate_constraints/select_behavior
// pair that drives the controller, under the record's own (immutable)
// SafetyParams. Dialogue memory only resolves "it" and picks surface wording.

#include "safex/query.hpp"
#include "safex/safety_core.hpp"
#include "safex/visibility.hpp"
#include "safex/wire.hpp"

#include <cstdio>
#include <deque>
#include <optional>
#include <string>
#include <vector>

namespace safex {

// ---------------------------------------------------------------------------
// Dialogue memory
// ---------------------------------------------------------------------------

inline constexpr std::size_t kMaxSalientEntities = 8;

struct WhatIfMemo {
  std::vector<StateDelta> deltas;
  Behavior verdict = Behavior::Continue;
  friend bool operator==(const WhatIfMemo&, const WhatIfMemo&) = default;
};

struct DialogueMemory {
  std::string session_id;
  std::deque<std::string> salient_entities;  // most recent first, LRU-bounded
  std::optional<ConstraintId> last_constraint;
  std::optional<WhatIfMemo> last_whatif;
  long long turn_count = 0;

  /// Moves `id` to the front, evicting the least recently used entry.
  void touch(const std::string& id) {
    if (id.empty()) return;
    auto it = std::find(salient_entities.begin(), salient_entities.end(), id);
    if (it != salient_entities.end()) salient_entities.erase(it);
    salient_entities.push_front(id);
    while (salient_entities.size() > kMaxSalientEntities) salient_entities.pop_back();
  }

  std::optional<std::string> most_salient() const {
    if (salient_entities.empty()) return std::nullopt;
    return salient_entities.front();
  }

  friend bool operator==(const DialogueMemory&, const DialogueMemory&) = default;
};

// ---------------------------------------------------------------------------
// Explanation
// ---------------------------------------------------------------------------

enum class ExplanationKind { Causal, Contrastive, Counterfactual, Confirmation, CommandAck, Refusal };

constexpr std::string_view to_string(ExplanationKind k) {
  switch (k) {
    case ExplanationKind::Causal: return "causal";
    case ExplanationKind::Contrastive: return "contrastive";
    case ExplanationKind::Counterfactual: return "counterfactual";
    case ExplanationKind::Confirmation: return "confirmation";
    case ExplanationKind::CommandAck: return "command_ack";
    case ExplanationKind::Refusal: return "refusal";
  }
  return "?";
}

struct Verdict {
  Behavior behavior = Behavior::Continue;
  ConstraintSet active;
  friend bool operator==(const Verdict&, const Verdict&) = default;
};

/// Values the templates need beyond the citations themselves.
struct RenderFacts {
  Behavior behavior = Behavior::Continue;  // selected / alternative / commanded
  Behavior selected = Behavior::Continue;  // what the record actually did
  std::optional<ConstraintId> target;      // Why target
  bool target_active = true;
  std::vector<StateDelta> deltas;          // counterfactual premise
  std::optional<double> distance;          // (hypothetical) worker distance
  std::optional<double> visibility;        // (hypothetical) visibility
  std::string referent;                    // confirmation subject
  std::string referent_zone;
  bool referent_known = true;
  bool controlled_proximity = false;
  GuidanceZoneSpec zone;
  double d_min = 0.0;
  double v_min = 0.0;
  long long tick = 0;
  friend bool operator==(const RenderFacts&, const RenderFacts&) = default;
};

struct Explanation {
  ExplanationKind kind = ExplanationKind::Causal;
  long long tick = 0;
  ConstraintSet cited;                      // binding first, then secondary
  std::optional<ConstraintId> binding;
  std::vector<ConstraintId> unmet;          // enabling constraints that do not hold
  std::vector<std::string> attribution;     // occluder ids
  std::optional<Verdict> verdict;
  std::optional<std::vector<StateDelta>> enabling_condition;
  std::optional<bool> affirmative;          // Confirmation
  bool diagnostic = false;                  // a SetVisibility override was used
  RenderFacts facts;
  std::string text;
};

inline bool is_restrictive(Behavior b) { return b == Behavior::Stop || b == Behavior::Pause; }

// ---------------------------------------------------------------------------
// Template rendering
// ---------------------------------------------------------------------------

namespace detail {

inline std::string f2(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

inline std::string verb(Behavior b) {
  switch (b) {
    case Behavior::Continue: return "continue";
    case Behavior::SlowDown: return "slow down";
    case Behavior::Pause: return "pause";
    case Behavior::Stop: return "stop";
    case Behavior::ManualFollow: return "switch to manual-follow";
  }
  return "?";
}

inline std::string past(Behavior b) {
  switch (b) {
    case Behavior::Continue: return "continued";
    case Behavior::SlowDown: return "slowed down";
    case Behavior::Pause: return "paused";
    case Behavior::Stop: return "stopped";
    case Behavior::ManualFollow: return "switched to manual-follow";
  }
  return "?";
}

inline std::string zone_phrase(const GuidanceZoneSpec& z) {
  return "within " + f2(z.max_distance) + " m on my " + std::string(to_string(z.side)) + " side";
}

inline std::string refer(const std::string& id, const DialogueMemory& memory) {
  return memory.most_salient() == id ? "it" : id;
}

/// Sentence-initial form of a reference; entity ids keep their spelling.
inline std::string capitalize(std::string s) { return s == "it" ? "It" : s; }

inline std::string join(const std::vector<std::string>& parts, const std::string& sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) out += (i ? sep : "") + parts[i];
  return out;
}

inline std::string secondary_phrase(const ActiveConstraint& c, const RenderFacts& f) {
  switch (c.id) {
    case ConstraintId::Proximity:
      return "proximity (" + f2(c.measured) + " m < " + f2(c.threshold) + " m" +
             (f.controlled_proximity ? ", controlled by the guidance zone)" : ")");
    case ConstraintId::Visibility:
      return "visibility (" + f2(c.measured) + " < " + f2(c.threshold) + ")";
    case ConstraintId::GuidanceZone:
      return "guidance zone (worker at " + f2(c.measured) + " m, " + zone_phrase(f.zone) + ")";
  }
  return "?";
}

/// Why-not / refusal wording for one blocking constraint.
inline std::string violation_phrase(const ActiveConstraint& c, const RenderFacts& f) {
  switch (c.id) {
    case ConstraintId::Proximity:
      return "the worker is " + f2(c.measured) + " m away, below the minimum separation d_min = " +
             f2(c.threshold) + " m (shortfall " + f2(-c.margin) + " m)";
    case ConstraintId::Visibility:
      return "my visibility confidence " + f2(c.measured) + " is below v_min = " + f2(c.threshold) +
             " (shortfall " + f2(-c.margin) + ")";
    case ConstraintId::GuidanceZone:
      return "the worker is " + f2(c.measured) + " m away, " + zone_phrase(f.zone);
  }
  return "?";
}

inline std::string describe(const StateDelta& d, const RenderFacts& f, const DialogueMemory& memory) {
  return std::visit(
      [&](const auto& x) -> std::string {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, delta::SetWorkerPosition>)
          return "the worker stands at (" + f2(x.point.x) + ", " + f2(x.point.y) + ")";
        else if constexpr (std::is_same_v<T, delta::MoveWorkerBy>)
          return "the worker moves by (" + f2(x.offset.x) + ", " + f2(x.offset.y) + ")";
        else if constexpr (std::is_same_v<T, delta::MoveWorkerAway>)
          return x.meters >= 0 ? "the worker moves " + f2(x.meters) + " m away"
                               : "the worker moves " + f2(-x.meters) + " m closer";
        else if constexpr (std::is_same_v<T, delta::SetWorkerDistance>)
          return "the worker stands " + f2(x.meters) + " m from me";
        else if constexpr (std::is_same_v<T, delta::RemoveOccluder>)
          return refer(x.id.value_or("it"), memory) + " is removed";
        else if constexpr (std::is_same_v<T, delta::MoveOccluderBy>)
          return refer(x.id.value_or("it"), memory) + " moves by (" + f2(x.offset.x) + ", " + f2(x.offset.y) + ")";
        else if constexpr (std::is_same_v<T, delta::EnterGuidanceZone>)
          return "you remain within " + f2(f.zone.max_distance) + " m on my " + std::string(to_string(x.side)) +
                 " side";
        else
          return "visibility is " + f2(x.confidence) + " (diagnostic override)";
      },
      d);
}

inline bool moves_worker(const StateDelta& d) {
  return std::holds_alternative<delta::SetWorkerPosition>(d) || std::holds_alternative<delta::MoveWorkerBy>(d) ||
         std::holds_alternative<delta::MoveWorkerAway>(d) || std::holds_alternative<delta::SetWorkerDistance>(d);
}

inline bool touches_sightline(const StateDelta& d) {
  return std::holds_alternative<delta::RemoveOccluder>(d) || std::holds_alternative<delta::MoveOccluderBy>(d) ||
         std::holds_alternative<delta::SetVisibility>(d);
}

inline std::string render_causal(const Explanation& e, const DialogueMemory&) {
  const RenderFacts& f = e.facts;
  std::string s;
  if (f.target && !f.target_active)
    s += "The " + std::string(to_string(*f.target)) + " constraint was not active at tick " + std::to_string(f.tick) +
         ". ";
  if (!e.binding) {
    s += e.cited.empty() ? "No safety constraint is active; I am executing the nominal action (" +
                               std::string(to_string(f.selected)) + ")."
                         : "No safety constraint overrides the task; I am executing the nominal action (" +
                               std::string(to_string(f.selected)) + ").";
  } else {
    const ActiveConstraint& b = e.cited.front();
    switch (b.id) {
      case ConstraintId::Visibility:
        s += "My visibility confidence (" + f2(b.measured) + ") dropped below the required threshold (" +
             f2(b.threshold) + ")";
        s += e.attribution.empty() ? "." : " due to occlusion by " + join(e.attribution, ", ") + ".";
        break;
      case ConstraintId::Proximity:
        s += "I " + past(f.selected) + " because the worker is " + f2(b.measured) + " m away, inside the " +
             f2(b.threshold) + " m minimum separation (d_min).";
        break;
      case ConstraintId::GuidanceZone:
        s += "I am in manual-follow mode because you are " + zone_phrase(f.zone) + " (" + f2(b.measured) +
             " m, limit " + f2(b.threshold) + " m).";
        break;
    }
  }
  std::vector<std::string> rest;
  for (std::size_t i = e.binding ? 1 : 0; i < e.cited.size(); ++i) rest.push_back(secondary_phrase(e.cited[i], f));
  if (!rest.empty()) s += " Also active: " + join(rest, "; ") + ".";
  return s;
}

inline std::string render_contrastive(const Explanation& e, const DialogueMemory&) {
  const RenderFacts& f = e.facts;
  if (e.cited.empty() && e.unmet.empty())
    return "No safety constraint prevents me from choosing to " + verb(f.behavior) + "; the task policy chose " +
           std::string(to_string(f.selected)) + " instead.";
  std::vector<std::string> why;
  for (const auto& c : e.cited) why.push_back(violation_phrase(c, f));
  for (auto u : e.unmet)
    if (u == ConstraintId::GuidanceZone) why.push_back("you are not " + zone_phrase(f.zone));
  return "I cannot " + verb(f.behavior) + ": " + join(why, "; and ") + ".";
}

inline std::string render_counterfactual(const Explanation& e, const DialogueMemory& memory) {
  const RenderFacts& f = e.facts;
  std::vector<std::string> premise;
  for (const auto& d : f.deltas) premise.push_back(describe(d, f, memory));
  std::string s = "If " + join(premise, " and ") + ", ";

  const Behavior u = e.verdict ? e.verdict->behavior : f.behavior;
  const bool any_worker = std::any_of(f.deltas.begin(), f.deltas.end(), moves_worker);
  const bool any_sight = std::any_of(f.deltas.begin(), f.deltas.end(), touches_sightline);
  std::vector<std::string> effects;
  if (u != Behavior::ManualFollow) {
    const ActiveConstraint* prox = e.verdict ? find(e.verdict->active, ConstraintId::Proximity) : nullptr;
    if (f.distance && (any_worker || prox))
      effects.push_back("distance becomes " + f2(*f.distance) + " m " + (*f.distance < f.d_min ? "< " : "≥ ") +
                        f2(f.d_min) + " m");
    const ActiveConstraint* vis = e.verdict ? find(e.verdict->active, ConstraintId::Visibility) : nullptr;
    if (f.visibility && (any_sight || vis))
      effects.push_back("visibility becomes " + f2(*f.visibility) + " " + (*f.visibility < f.v_min ? "< " : "≥ ") +
                        f2(f.v_min));
  }
  if (!effects.empty()) s += join(effects, " and ");

  auto lead = [&](const std::string& tail) { return effects.empty() ? tail : " and " + tail; };
  if (u == Behavior::ManualFollow) {
    s += lead("I can switch to manual-follow mode while maintaining safe clearance.");
  } else if (!e.cited.empty()) {
    const ActiveConstraint& b = e.cited.front();
    std::string still = "so I would still " + std::string(u == f.selected ? "" : "have to ") + verb(u);
    if (b.id == ConstraintId::Proximity) still += " (shortfall " + f2(-b.margin) + " m)";
    if (b.id == ConstraintId::Visibility) still += " (shortfall " + f2(-b.margin) + ")";
    s += (effects.empty() ? "" : ", ") + still + ".";
  } else if (is_restrictive(u)) {
    s += lead("no safety constraint would be active, but the task action is " + std::string(to_string(u)) + ".");
  } else {
    s += lead("I can " + verb(u) + ".");
  }
  if (e.enabling_condition) {
    std::vector<std::string> cond;
    for (const auto& d : *e.enabling_condition) cond.push_back(describe(d, f, memory));
    s += " I could " + verb(f.behavior) + " if " + join(cond, " and ") + ".";
  }
  if (e.diagnostic) s += " [diagnostic visibility override]";
  return s;
}

inline std::string render_confirmation(const Explanation& e, const DialogueMemory& memory) {
  const RenderFacts& f = e.facts;
  if (f.referent.empty()) return "I am already executing " + std::string(to_string(f.behavior)) + ".";
  const std::string who = refer(f.referent, memory);
  if (!f.referent_known)
    return "No. I have no record of " + f.referent + " at tick " + std::to_string(f.tick) + ".";
  if (e.affirmative.value_or(false)) {
    if (!e.attribution.empty() && std::find(e.attribution.begin(), e.attribution.end(), f.referent) != e.attribution.end())
      return "Yes. " + capitalize(who) + " obstructed my field of view" +
             (f.referent_zone.empty() ? "" : " in Zone " + f.referent_zone) + " and reduced sensing reliability.";
    return "Yes. " + capitalize(who) + " is implicated in the active " +
           std::string(to_string(e.cited.empty() ? ConstraintId::Proximity : e.cited.front().id)) + " constraint.";
  }
  std::string s = "No. " + capitalize(who) + " was not implicated in my decision at tick " + std::to_string(f.tick) + ".";
  if (!e.attribution.empty()) s += " The occlusion was caused by " + join(e.attribution, ", ") + ".";
  return s;
}

inline std::string render_command(const Explanation& e) {
  const RenderFacts& f = e.facts;
  if (e.kind == ExplanationKind::CommandAck) {
    if (f.behavior == Behavior::ManualFollow) return "Switching to manual-follow. Please remain within the guidance zone.";
    return "Resuming: " + std::string(to_string(f.behavior)) + ".";
  }
  std::vector<std::string> why;
  for (auto u : e.unmet)
    if (u == ConstraintId::GuidanceZone) why.push_back("you are not " + zone_phrase(f.zone));
  for (const auto& c : e.cited) why.push_back(violation_phrase(c, f));
  if (why.empty()) why.push_back("the scenario has finished");
  return "I cannot " + verb(f.behavior) + ": " + join(why, "; and ") + ".";
}

}  // namespace detail

/// Fills the template for the explanation's kind. Numbers print with two
/// decimals; "it" replaces an entity only when it is the most salient one.
inline std::string render(const Explanation& e, const DialogueMemory& memory) {
  switch (e.kind) {
    case ExplanationKind::Causal: return detail::render_causal(e, memory);
    case ExplanationKind::Contrastive: return detail::render_contrastive(e, memory);
    case ExplanationKind::Counterfactual: return detail::render_counterfactual(e, memory);
    case ExplanationKind::Confirmation: return detail::render_confirmation(e, memory);
    case ExplanationKind::CommandAck:
    case ExplanationKind::Refusal: return detail::render_command(e);
  }
  return {};
}

// ---------------------------------------------------------------------------
// Counterfactual state construction
// ---------------------------------------------------------------------------

namespace detail {

inline Vec2 bearing(const SafetyState& s) {
  const Vec2 rel = s.human.position - s.robot.position;
  const double n = norm(rel);
  return n > 0.0 ? (1.0 / n) * rel : unit_from_heading(s.robot.heading);
}

inline const std::string& require_id(const Referent& r) {
  if (!r) throw Error(ErrorCode::Referent, "unresolved anaphor 'it'", "it");
  return *r;
}

}  // namespace detail

/// Builds the hypothetical S' by applying `deltas` in order. Distance and
/// visibility are recomputed from the new geometry (unless a diagnostic
/// SetVisibility overrides the latter); the params pointer is carried over
/// unchanged.
inline SafetyState apply_delta(const SafetyState& state, const std::vector<StateDelta>& deltas) {
  int placements = 0;
  int overrides = 0;
  for (const auto& d : deltas) {
    placements += std::holds_alternative<delta::SetWorkerPosition>(d) ||
                  std::holds_alternative<delta::SetWorkerDistance>(d) ||
                  std::holds_alternative<delta::EnterGuidanceZone>(d);
    overrides += std::holds_alternative<delta::SetVisibility>(d);
  }
  if (placements > 1)
    throw Error(ErrorCode::Conflict, "conflicting deltas: the worker can be placed only once", "deltas");
  if (overrides > 1) throw Error(ErrorCode::Conflict, "conflicting deltas: more than one visibility override", "deltas");

  SafetyState s = state;
  std::optional<double> visibility_override;
  for (const auto& d : deltas) {
    std::visit(
        [&](const auto& x) {
          using T = std::decay_t<decltype(x)>;
          if constexpr (std::is_same_v<T, delta::SetWorkerPosition>) {
            s.human.position = x.point;
          } else if constexpr (std::is_same_v<T, delta::MoveWorkerBy>) {
            s.human.position = s.human.position + x.offset;
          } else if constexpr (std::is_same_v<T, delta::MoveWorkerAway>) {
            s.human.position = s.human.position + x.meters * detail::bearing(s);
          } else if constexpr (std::is_same_v<T, delta::SetWorkerDistance>) {
            s.human.position = s.robot.position + x.meters * detail::bearing(s);
          } else if constexpr (std::is_same_v<T, delta::RemoveOccluder>) {
            const std::string& id = detail::require_id(x.id);
            auto it = std::find_if(s.env.occluders.begin(), s.env.occluders.end(),
                                   [&](const Occluder& o) { return o.occluder_id == id; });
            if (it == s.env.occluders.end()) throw Error(ErrorCode::Referent, "unknown occluder '" + id + "'", id);
            s.env.occluders.erase(it);
          } else if constexpr (std::is_same_v<T, delta::MoveOccluderBy>) {
            const std::string& id = detail::require_id(x.id);
            auto it = std::find_if(s.env.occluders.begin(), s.env.occluders.end(),
                                   [&](const Occluder& o) { return o.occluder_id == id; });
            if (it == s.env.occluders.end()) throw Error(ErrorCode::Referent, "unknown occluder '" + id + "'", id);
            it->position = it->position + x.offset;
          } else if constexpr (std::is_same_v<T, delta::EnterGuidanceZone>) {
            const double r = s.params->guidance_zone().max_distance;
            s.human.position = s.robot.position + r * side_normal(s.robot.heading, x.side);
          } else {
            visibility_override = x.confidence;
          }
        },
        d);
  }
  if (!is_finite(s.human.position))
    throw Error(ErrorCode::Validation, "hypothetical worker position is not finite", "human.position");
  s.env.visibility[s.human.worker_id] =
      visibility_override ? *visibility_override : compute_visibility(s.robot, s.human, s.env.occluders);
  return s;
}

/// Guided flag for a hypothetical: inherited from the record, or raised by a
/// guidance-zone delta (a proposed commanded transition).
inline bool whatif_guided(const DecisionRecord& record, const std::vector<StateDelta>& deltas) {
  return record.guided || std::any_of(deltas.begin(), deltas.end(), [](const StateDelta& d) {
           return std::holds_alternative<delta::EnterGuidanceZone>(d);
         });
}

/// Core of every counterfactual: S', C', u'.
struct Counterfactual {
  SafetyState state;
  ConstraintSet active;
  Behavior behavior = Behavior::Continue;
  bool guided = false;
};

inline Counterfactual evaluate_what_if(const DecisionRecord& record, const std::vector<StateDelta>& deltas,
                                       const SafetyParams& params) {
  Counterfactual cf;
  cf.state = apply_delta(record.state, deltas);
  cf.active = evaluate_constraints(cf.state);
  cf.guided = whatif_guided(record, deltas);
  cf.behavior = select_behavior(cf.active, record.nominal, params, cf.guided);
  return cf;
}

// ---------------------------------------------------------------------------
// Answers
// ---------------------------------------------------------------------------

namespace detail {

inline void check_envelope(const DecisionRecord& record, const SafetyParams& params) {
  if (!record.state.params || !(*record.state.params == params))
    throw Error(ErrorCode::EnvelopeViolation, "record was produced under different safety parameters", "params");
}

inline RenderFacts base_facts(const DecisionRecord& record, const SafetyParams& params) {
  RenderFacts f;
  f.selected = record.selected;
  f.behavior = record.selected;
  f.zone = params.guidance_zone();
  f.d_min = params.d_min();
  f.v_min = params.v_min();
  f.tick = record.tick;
  f.distance = distance(record.state.human.position, record.state.robot.position);
  f.visibility = record.state.worker_visibility();
  return f;
}

/// Active constraints that stop `alternative` from being selected on their own.
inline ConstraintSet blocking_constraints(const ConstraintSet& active, Behavior alternative,
                                          const SafetyParams& params, bool guided) {
  ConstraintSet out;
  const bool controlled = guided && contains(active, ConstraintId::GuidanceZone);
  for (const auto& c : active) {
    if (c.id == ConstraintId::GuidanceZone) continue;
    if (c.id == ConstraintId::Proximity && controlled) continue;
    if (mapped_behavior(c.id) == alternative) continue;
    // Outranks the alternative: c binds over every constraint that could yield it.
    if (alternative == Behavior::ManualFollow && controlled &&
        params.rank(c.id) > params.rank(ConstraintId::GuidanceZone))
      continue;
    out.push_back(c);
  }
  return out;
}

}  // namespace detail

/// Causal answer: the binding constraint first, then the rest of C_t.
inline Explanation answer_why(const DecisionRecord& record, const SafetyParams& params,
                              std::optional<ConstraintId> target = std::nullopt) {
  Explanation e;
  e.kind = ExplanationKind::Causal;
  e.tick = record.tick;
  e.facts = detail::base_facts(record, params);
  e.facts.target = target;
  e.facts.target_active = !target || contains(record.active, *target);
  e.binding = binding_constraint(record.active, params, record.guided);
  e.facts.controlled_proximity =
      record.guided && contains(record.active, ConstraintId::GuidanceZone) && contains(record.active, ConstraintId::Proximity);
  if (e.binding) e.cited.push_back(*find(record.active, *e.binding));
  std::vector<ActiveConstraint> rest;
  for (const auto& c : record.active)
    if (!e.binding || c.id != *e.binding) rest.push_back(c);
  std::sort(rest.begin(), rest.end(), [&](const auto& a, const auto& b) { return params.rank(a.id) < params.rank(b.id); });
  e.cited.insert(e.cited.end(), rest.begin(), rest.end());
  if (contains(record.active, ConstraintId::Visibility))
    e.attribution = attribute_occlusion(record.state.robot, record.state.human, record.state.env.occluders);
  return e;
}

/// Contrastive answer. The alternative is admissible iff arbitration with it as
/// the nominal action would select it.
inline Explanation answer_why_not(const DecisionRecord& record, Behavior alternative, const SafetyParams& params) {
  Explanation e;
  e.tick = record.tick;
  e.facts = detail::base_facts(record, params);
  e.facts.behavior = alternative;
  if (alternative == record.selected) {
    e.kind = ExplanationKind::Confirmation;
    e.affirmative = true;
    return e;
  }
  e.kind = ExplanationKind::Contrastive;
  const bool guided = alternative == Behavior::ManualFollow;
  const bool admissible = select_behavior(record.active, alternative, params, guided) == alternative;
  if (admissible) return e;
  e.cited = detail::blocking_constraints(record.active, alternative, params, guided);
  if (alternative == Behavior::ManualFollow && !contains(record.active, ConstraintId::GuidanceZone))
    e.unmet.push_back(ConstraintId::GuidanceZone);
  if (!e.cited.empty()) e.binding = e.cited.front().id;
  if (contains(e.cited, ConstraintId::Visibility))
    e.attribution = attribute_occlusion(record.state.robot, record.state.human, record.state.env.occluders);
  return e;
}

/// Searches the fixed template library for deltas that make `target` the
/// selected behavior. Template order: worker steps back 0.5..5.0 m (0.5 m
/// grid); guide left; guide right; remove each attributed occluder; then every
/// pair of those singletons in the same order. Not minimal.
inline std::optional<std::vector<StateDelta>> suggest_enabling_condition(const DecisionRecord& record, Behavior target,
                                                                          const SafetyParams& params) {
  if (target == record.selected) return std::nullopt;
  std::vector<StateDelta> singles;
  for (int i = 1; i <= 10; ++i) singles.push_back(delta::MoveWorkerAway{0.5 * i});
  singles.push_back(delta::EnterGuidanceZone{Side::Left});
  singles.push_back(delta::EnterGuidanceZone{Side::Right});
  for (auto& id : attribute_occlusion(record.state.robot, record.state.human, record.state.env.occluders))
    singles.push_back(delta::RemoveOccluder{std::move(id)});

  auto works = [&](const std::vector<StateDelta>& ds) {
    try {
      return evaluate_what_if(record, ds, params).behavior == target;
    } catch (const Error&) {
      return false;
    }
  };
  for (const auto& d : singles)
    if (works({d})) return std::vector<StateDelta>{d};
  for (std::size_t i = 0; i < singles.size(); ++i)
    for (std::size_t j = i + 1; j < singles.size(); ++j)
      if (works({singles[i], singles[j]})) return std::vector<StateDelta>{singles[i], singles[j]};
  return std::nullopt;
}

/// Counterfactual answer over resolved deltas (no anaphors left).
inline Explanation answer_what_if(const DecisionRecord& record, const std::vector<StateDelta>& deltas,
                                  const SafetyParams& params) {
  if (deltas.empty()) throw Error(ErrorCode::Validation, "a what-if needs at least one delta", "deltas");
  const Counterfactual cf = evaluate_what_if(record, deltas, params);
  Explanation e;
  e.kind = ExplanationKind::Counterfactual;
  e.tick = record.tick;
  e.facts = detail::base_facts(record, params);
  e.facts.deltas = deltas;
  e.facts.distance = distance(cf.state.human.position, cf.state.robot.position);
  e.facts.visibility = cf.state.worker_visibility();
  e.verdict = Verdict{cf.behavior, cf.active};
  e.diagnostic = std::any_of(deltas.begin(), deltas.end(),
                             [](const StateDelta& d) { return std::holds_alternative<delta::SetVisibility>(d); });
  e.binding = binding_constraint(cf.active, params, cf.guided);
  if (is_restrictive(cf.behavior) && e.binding) e.cited.push_back(*find(cf.active, *e.binding));
  if (contains(cf.active, ConstraintId::Visibility))
    e.attribution = attribute_occlusion(cf.state.robot, cf.state.human, cf.state.env.occluders);
  // Still blocked: offer a condition under which the task could resume.
  e.facts.behavior = record.nominal;
  if (is_restrictive(cf.behavior) && !is_restrictive(record.nominal))
    e.enabling_condition = suggest_enabling_condition(record, record.nominal, params);
  return e;
}

/// Affirms `referent` iff it is implicated in the record: attributed as an
/// occluder of the worker, or listed among the subjects of an active constraint.
inline Explanation answer_confirm(const DecisionRecord& record, const std::string& referent, const SafetyParams& params) {
  Explanation e;
  e.kind = ExplanationKind::Confirmation;
  e.tick = record.tick;
  e.facts = detail::base_facts(record, params);
  e.facts.referent = referent;
  e.attribution = attribute_occlusion(record.state.robot, record.state.human, record.state.env.occluders);
  const Occluder* occ = record.state.find_occluder(referent);
  if (occ) e.facts.referent_zone = occ->zone;
  e.facts.referent_known = occ || referent == record.state.human.worker_id;
  bool yes = contains(record.active, ConstraintId::Visibility) &&
             std::find(e.attribution.begin(), e.attribution.end(), referent) != e.attribution.end();
  for (const auto& c : record.active) {
    if (std::find(c.subjects.begin(), c.subjects.end(), referent) != c.subjects.end()) {
      yes = true;
      e.cited.push_back(c);
    }
  }
  if (!contains(record.active, ConstraintId::Visibility)) e.attribution.clear();
  e.affirmative = yes;
  return e;
}

/// Acknowledgment or refusal of a command, judged on the command's own record.
inline Explanation answer_command(const DecisionRecord& record, Behavior commanded, const SafetyParams& params) {
  Explanation e;
  e.tick = record.tick;
  e.facts = detail::base_facts(record, params);
  e.facts.behavior = commanded;
  if (record.selected == commanded) {
    e.kind = ExplanationKind::CommandAck;
    return e;
  }
  e.kind = ExplanationKind::Refusal;
  if (commanded == Behavior::ManualFollow && !contains(record.active, ConstraintId::GuidanceZone))
    e.unmet.push_back(ConstraintId::GuidanceZone);
  e.cited = detail::blocking_constraints(record.active, commanded, params, record.guided);
  if (!e.cited.empty()) e.binding = e.cited.front().id;
  return e;
}

// ---------------------------------------------------------------------------
// E = Explain(D_t, Q, M_t)
// ---------------------------------------------------------------------------

namespace detail {

inline std::string resolve(const Referent& r, const DialogueMemory& memory) {
  if (r) return *r;
  if (auto m = memory.most_salient()) return *m;
  throw Error(ErrorCode::Referent, "nothing to refer to with 'it' yet; name the entity", "it");
}

inline std::vector<StateDelta> resolve(const std::vector<StateDelta>& deltas, const DialogueMemory& memory) {
  std::vector<StateDelta> out;
  for (const auto& d : deltas) {
    if (const auto* r = std::get_if<delta::RemoveOccluder>(&d)) out.push_back(delta::RemoveOccluder{resolve(r->id, memory)});
    else if (const auto* m = std::get_if<delta::MoveOccluderBy>(&d))
      out.push_back(delta::MoveOccluderBy{resolve(m->id, memory), m->offset});
    else out.push_back(d);
  }
  return out;
}

inline void remember(DialogueMemory& m, const Explanation& e) {
  for (const auto& c : e.cited)
    for (const auto& s : c.subjects) m.touch(s);
  for (auto it = e.attribution.rbegin(); it != e.attribution.rend(); ++it) m.touch(*it);
  if (!e.facts.referent.empty()) m.touch(e.facts.referent);
  for (const auto& d : e.facts.deltas) {
    if (const auto* r = std::get_if<delta::RemoveOccluder>(&d)) m.touch(r->id.value_or(""));
    if (const auto* r = std::get_if<delta::MoveOccluderBy>(&d)) m.touch(r->id.value_or(""));
  }
  if (e.binding) m.last_constraint = e.binding;
  else if (!e.cited.empty()) m.last_constraint = e.cited.front().id;
  if (e.kind == ExplanationKind::Counterfactual && e.verdict) m.last_whatif = WhatIfMemo{e.facts.deltas, e.verdict->behavior};
  ++m.turn_count;
}

}  // namespace detail

/// Dispatches on the query kind. Text is rendered against the memory as it was
/// before this turn; the returned memory has the turn folded in.
inline std::pair<Explanation, DialogueMemory> explain(const DecisionRecord& record, const QueryAST& query,
                                                      const DialogueMemory& memory, const SafetyParams& params) {
  detail::check_envelope(record, params);
  Explanation e = std::visit(
      [&](const auto& q) -> Explanation {
        using T = std::decay_t<decltype(q)>;
        if constexpr (std::is_same_v<T, query::Why>) return answer_why(record, params, q.target);
        else if constexpr (std::is_same_v<T, query::WhyNot>) return answer_why_not(record, q.alternative, params);
        else if constexpr (std::is_same_v<T, query::WhatIf>)
          return answer_what_if(record, detail::resolve(q.deltas, memory), params);
        else if constexpr (std::is_same_v<T, query::Confirm>)
          return answer_confirm(record, detail::resolve(q.referent, memory), params);
        else
          throw Error(ErrorCode::Validation, "commands are executed by the session, not explained", "type");
      },
      query.kind);
  e.text = render(e, memory);
  DialogueMemory next = memory;
  detail::remember(next, e);
  return {std::move(e), std::move(next)};
}

// ---------------------------------------------------------------------------
// Wire form
// ---------------------------------------------------------------------------

inline json to_json(const Explanation& e) {
  json j{{"kind", std::string(to_string(e.kind))},
         {"tick", e.tick},
         {"cited", to_json(e.cited)},
         {"binding", e.binding ? json(std::string(to_string(*e.binding))) : json(nullptr)},
         {"attribution", e.attribution},
         {"diagnostic", e.diagnostic},
         {"text", e.text}};
  json unmet = json::array();
  for (auto u : e.unmet) unmet.push_back(std::string(to_string(u)));
  j["unmet"] = unmet;
  j["verdict"] = e.verdict ? json{{"behavior", std::string(to_string(e.verdict->behavior))},
                                  {"active", to_json(e.verdict->active)}}
                           : json(nullptr);
  json cond = json::array();
  if (e.enabling_condition)
    for (const auto& d : *e.enabling_condition) cond.push_back(to_json(d));
  j["enabling_condition"] = cond;
  if (e.affirmative) j["affirmative"] = *e.affirmative;
  return j;
}

}  // namespace safex
