#pragma once

// Shared fixtures for the test binaries: state builders, random generators and
// small independent oracles (nothing here calls into the code under test for
// the quantity it is used to check).

#include "safex/session.hpp"

#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>
#include <sys/wait.h>
#include <string>

namespace safex::testing {

inline const std::string kSourceDir = SAFEX_SOURCE_DIR;
inline const std::string kScenarioPath = kSourceDir + "/scenarios/beam_transport.scenario";
inline constexpr long long kTriggerTick = 32;

inline ParamsPtr default_params() { return std::make_shared<const SafetyParams>(); }

inline Occluder rect(std::string id, Vec2 at, double w, double h, std::string zone = "") {
  Occluder o;
  o.occluder_id = std::move(id);
  o.kind = "forklift";
  o.shape = Polygon{{{-w / 2, -h / 2}, {w / 2, -h / 2}, {w / 2, h / 2}, {-w / 2, h / 2}}};
  o.position = at;
  o.zone = std::move(zone);
  return o;
}

inline Occluder disc(std::string id, Vec2 at, double r) {
  Occluder o;
  o.occluder_id = std::move(id);
  o.kind = "column";
  o.shape = Disc{r};
  o.position = at;
  return o;
}

/// Robot at the origin heading +x unless told otherwise; visibility is
/// recomputed from the geometry.
inline SafetyState make_state(Vec2 worker, std::vector<Occluder> occluders = {}, ParamsPtr params = default_params(),
                              Vec2 robot = {0, 0}, double heading = 0.0, Behavior mode = Behavior::Continue) {
  SafetyState s;
  s.tick = 1;
  s.human.worker_id = "worker1";
  s.human.position = worker;
  s.robot.position = robot;
  s.robot.heading = heading;
  s.robot.mode = mode;
  s.env.occluders = std::move(occluders);
  s.env.visibility[s.human.worker_id] = compute_visibility(s.robot, s.human, s.env.occluders);
  s.params = std::move(params);
  return s;
}

/// Same, but with the visibility entry forced (no occluders needed).
inline SafetyState with_visibility(SafetyState s, double v) {
  s.env.visibility[s.human.worker_id] = v;
  return s;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary);
  out << bytes;
}

// ---------------------------------------------------------------------------
// Random states
// ---------------------------------------------------------------------------

inline Vec2 random_point(std::mt19937_64& rng, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  return {u(rng), u(rng)};
}

inline ParamsPtr random_params(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> d(0.5, 3.0), v(0.1, 0.95), z(0.5, 2.0);
  std::vector<ConstraintId> order(kAllConstraints.begin(), kAllConstraints.end());
  std::shuffle(order.begin(), order.end(), rng);
  GuidanceZoneSpec zone{rng() % 2 ? Side::Right : Side::Left, z(rng)};
  return std::make_shared<const SafetyParams>(SafetyParams::make(d(rng), v(rng), zone, order));
}

/// Robot anywhere, worker within a few meters, 0-3 occluders scattered around
/// the sightline. Visibility is recomputed from the geometry.
inline SafetyState random_state(std::mt19937_64& rng, ParamsPtr params) {
  std::uniform_real_distribution<double> ang(-std::numbers::pi, std::numbers::pi), dist(0.05, 4.5), t(0.15, 0.85),
      off(-0.8, 0.8), size(0.2, 1.6);
  const Vec2 robot = random_point(rng, -5, 5);
  const double bearing = ang(rng);
  const Vec2 worker = robot + dist(rng) * unit_from_heading(bearing);
  std::vector<Occluder> occ;
  const int n = static_cast<int>(rng() % 4);
  for (int i = 0; i < n; ++i) {
    const Vec2 along = robot + t(rng) * (worker - robot) + Vec2{off(rng), off(rng)};
    if (rng() % 2) occ.push_back(disc("col" + std::to_string(i), along, 0.5 * size(rng)));
    else occ.push_back(rect("fork" + std::to_string(i), along, size(rng), size(rng)));
  }
  const Behavior mode = rng() % 4 == 0 ? Behavior::ManualFollow : Behavior::Continue;
  SafetyState s = make_state(worker, std::move(occ), std::move(params), robot, ang(rng), mode);
  s.tick = static_cast<long long>(rng() % 1000);
  return s;
}

inline Behavior random_behavior(std::mt19937_64& rng) { return kAllBehaviors[rng() % kAllBehaviors.size()]; }

inline DecisionRecord random_record(std::mt19937_64& rng, ParamsPtr params) {
  const SafetyState s = random_state(rng, std::move(params));
  const Behavior nominal = rng() % 3 == 0 ? random_behavior(rng) : Behavior::Continue;
  return make_decision(s, nominal);
}

// ---------------------------------------------------------------------------
// Oracles
// ---------------------------------------------------------------------------

/// Orientation-based segment/segment intersection (touching counts).
inline bool oracle_segments_cross(Vec2 p1, Vec2 p2, Vec2 q1, Vec2 q2) {
  auto orient = [](Vec2 a, Vec2 b, Vec2 c) {
    const double v = (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
    return (v > 0) - (v < 0);
  };
  auto on_seg = [](Vec2 a, Vec2 b, Vec2 p) {
    return std::min(a.x, b.x) <= p.x && p.x <= std::max(a.x, b.x) && std::min(a.y, b.y) <= p.y &&
           p.y <= std::max(a.y, b.y);
  };
  const int o1 = orient(p1, p2, q1), o2 = orient(p1, p2, q2), o3 = orient(q1, q2, p1), o4 = orient(q1, q2, p2);
  if (o1 != o2 && o3 != o4) return true;
  if (o1 == 0 && on_seg(p1, p2, q1)) return true;
  if (o2 == 0 && on_seg(p1, p2, q2)) return true;
  if (o3 == 0 && on_seg(q1, q2, p1)) return true;
  if (o4 == 0 && on_seg(q1, q2, p2)) return true;
  return false;
}

/// Even-odd point-in-polygon (boundary excluded; callers avoid the boundary).
inline bool oracle_point_in_polygon(Vec2 p, const std::vector<Vec2>& poly) {
  bool in = false;
  for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
    const Vec2 a = poly[i], b = poly[j];
    if ((a.y > p.y) != (b.y > p.y) && p.x < (b.x - a.x) * (p.y - a.y) / (b.y - a.y) + a.x) in = !in;
  }
  return in;
}

/// Segment vs polygon by edge crossings plus containment of an endpoint.
inline bool oracle_segment_hits_polygon(Vec2 a, Vec2 b, std::vector<Vec2> poly, Vec2 offset) {
  for (auto& v : poly) v = v + offset;
  if (oracle_point_in_polygon(a, poly) || oracle_point_in_polygon(b, poly)) return true;
  for (std::size_t i = 0; i < poly.size(); ++i)
    if (oracle_segments_cross(a, b, poly[i], poly[(i + 1) % poly.size()])) return true;
  return false;
}

/// Segment vs disc by solving |a + t(b-a) - c|^2 = r^2 on t in [0, 1].
inline bool oracle_segment_hits_disc(Vec2 a, Vec2 b, Vec2 c, double r) {
  const double dx = b.x - a.x, dy = b.y - a.y, fx = a.x - c.x, fy = a.y - c.y;
  const double A = dx * dx + dy * dy, B = 2 * (fx * dx + fy * dy), C = fx * fx + fy * fy - r * r;
  if (C <= 0) return true;  // a inside
  if (A == 0) return false;
  const double disc = B * B - 4 * A * C;
  if (disc < 0) return false;
  const double s = std::sqrt(disc);
  const double t1 = (-B - s) / (2 * A), t2 = (-B + s) / (2 * A);
  return (t1 >= 0 && t1 <= 1) || (t2 >= 0 && t2 <= 1);
}

/// Andrew's monotone chain; counter-clockwise hull without collinear points.
inline std::vector<Vec2> oracle_convex_hull(std::vector<Vec2> pts) {
  std::sort(pts.begin(), pts.end(), [](Vec2 a, Vec2 b) { return a.x != b.x ? a.x < b.x : a.y < b.y; });
  if (pts.size() < 3) return pts;
  auto cr = [](Vec2 o, Vec2 a, Vec2 b) { return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x); };
  std::vector<Vec2> h(2 * pts.size());
  std::size_t k = 0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    while (k >= 2 && cr(h[k - 2], h[k - 1], pts[i]) <= 0) --k;
    h[k++] = pts[i];
  }
  for (std::size_t i = pts.size() - 1, t = k + 1; i > 0; --i) {
    while (k >= t && cr(h[k - 2], h[k - 1], pts[i - 1]) <= 0) --k;
    h[k++] = pts[i - 1];
  }
  h.resize(k - 1);
  return h;
}

/// Visibility from first principles: the same sample layout, blocking decided
/// by the oracle intersection tests above.
inline double oracle_visibility(Vec2 sensor, Vec2 worker, const std::vector<Occluder>& occ) {
  int visible = 0;
  for (const Vec2 p : worker_samples(worker)) {
    bool blocked = false;
    for (const auto& o : occ) {
      if (const auto* d = std::get_if<Disc>(&o.shape)) blocked = blocked || oracle_segment_hits_disc(sensor, p, o.position, d->radius);
      else blocked = blocked || oracle_segment_hits_polygon(sensor, p, std::get<Polygon>(o.shape).vertices, o.position);
    }
    visible += !blocked;
  }
  return static_cast<double>(visible) / kVisibilityRays;
}

/// Arbitration written out as a table walk: constraints in priority order; the
/// guidance zone counts only when guided, and then silences proximity.
inline Behavior oracle_select(const std::vector<ConstraintId>& active, Behavior nominal, const SafetyParams& p,
                              bool guided) {
  auto has = [&](ConstraintId c) { return std::find(active.begin(), active.end(), c) != active.end(); };
  const bool controlled = guided && has(ConstraintId::GuidanceZone);
  for (ConstraintId c : p.priorities()) {
    if (!has(c)) continue;
    if (c == ConstraintId::Proximity && !controlled) return Behavior::Stop;
    if (c == ConstraintId::Visibility) return Behavior::Pause;
    if (c == ConstraintId::GuidanceZone && controlled) return Behavior::ManualFollow;
  }
  return nominal == Behavior::ManualFollow ? Behavior::Pause : nominal;
}

/// Constraint predicates recomputed directly from a state.
inline bool oracle_proximity(const SafetyState& s) {
  const double dx = s.human.position.x - s.robot.position.x, dy = s.human.position.y - s.robot.position.y;
  return std::sqrt(dx * dx + dy * dy) < s.params->d_min();
}

inline bool oracle_visibility_low(const SafetyState& s) { return s.worker_visibility() < s.params->v_min(); }

inline bool oracle_in_zone(const SafetyState& s) {
  const auto& z = s.params->guidance_zone();
  const double dx = s.human.position.x - s.robot.position.x, dy = s.human.position.y - s.robot.position.y;
  if (std::sqrt(dx * dx + dy * dy) > z.max_distance + 1e-9) return false;
  const double hx = std::cos(s.robot.heading), hy = std::sin(s.robot.heading);
  const double c = hx * dy - hy * dx;  // > 0: left of heading
  return z.side == Side::Left ? c > 0 : c < 0;
}

// ---------------------------------------------------------------------------
// Processes
// ---------------------------------------------------------------------------

struct ProcessResult {
  int exit_code = -1;
  std::string out;
};

/// Runs a shell command, capturing stdout (stderr is folded in when asked).
inline ProcessResult run_command(const std::string& cmd, bool with_stderr = false) {
  ProcessResult r;
  FILE* p = popen((cmd + (with_stderr ? " 2>&1" : " 2>/dev/null")).c_str(), "r");
  if (!p) return r;
  char buf[4096];
  std::size_t n;
  while ((n = fread(buf, 1, sizeof buf, p)) > 0) r.out.append(buf, n);
  const int status = pclose(p);
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

inline std::string quote(const std::string& s) { return "'" + s + "'"; }

}  // namespace safex::testing
