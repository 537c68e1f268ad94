#pragma once

// JSON wire forms for the safety-core types. These are shared by the trace
// file format, the HTTP API and the CLI's --json output.

#include "safex/json_util.hpp"
#include "safex/types.hpp"

#include <string>
#include <vector>

namespace safex {

template <typename E, typename Parse>
E enum_field(const JsonReader& r, std::string_view key, Parse parse) {
  const std::string s = r.string(key);
  auto v = parse(s);
  if (!v) JsonReader::fail("unrecognized value '" + s + "'", r.at(key));
  return *v;
}

inline json vec_json(Vec2 v) { return json::array({v.x, v.y}); }

inline Vec2 vec_from(const json& j, const std::string& path) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number())
    JsonReader::fail("expected [x, y]", path);
  Vec2 v{j[0].get<double>(), j[1].get<double>()};
  if (!is_finite(v)) JsonReader::fail("expected finite coordinates", path);
  return v;
}

// --- params ---------------------------------------------------------------

inline json to_json(const SafetyParams& p) {
  json pri = json::array();
  for (auto c : p.priorities()) pri.push_back(std::string(to_string(c)));
  return json{{"d_min", p.d_min()},
              {"v_min", p.v_min()},
              {"guidance_zone",
               {{"side", std::string(to_string(p.guidance_zone().side))},
                {"max_distance", p.guidance_zone().max_distance}}},
              {"priorities", pri}};
}

inline SafetyParams params_from_json(const json& j, const std::string& path = "params") {
  JsonReader r(j, path);
  r.allow_only({"d_min", "v_min", "guidance_zone", "priorities"});
  const JsonReader gz = r.object("guidance_zone");
  gz.allow_only({"side", "max_distance"});
  GuidanceZoneSpec zone{enum_field<Side>(gz, "side", side_from_string), gz.number("max_distance")};
  std::vector<ConstraintId> pri;
  const json& arr = r.array("priorities");
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const std::string p = r.at("priorities") + "[" + std::to_string(i) + "]";
    if (!arr[i].is_string()) JsonReader::fail("expected a constraint name", p);
    auto c = constraint_from_string(arr[i].get<std::string>());
    if (!c) JsonReader::fail("unknown constraint '" + arr[i].get<std::string>() + "'", p);
    pri.push_back(*c);
  }
  return SafetyParams::make(r.number("d_min"), r.number("v_min"), zone, std::move(pri));
}

/// Content hash of the canonical (sorted-key, shortest round-trip number)
/// serialization: "sha256:" + hex digest.
inline std::string params_hash(const SafetyParams& p) { return "sha256:" + sha256_hex(to_json(p).dump()); }

// --- state ----------------------------------------------------------------

inline json to_json(const Shape& s) {
  if (const auto* d = std::get_if<Disc>(&s)) return json{{"type", "disc"}, {"radius", d->radius}};
  json pts = json::array();
  for (const auto& v : std::get<Polygon>(s).vertices) pts.push_back(vec_json(v));
  return json{{"type", "polygon"}, {"points", pts}};
}

inline Shape shape_from_json(const json& j, const std::string& path) {
  JsonReader r(j, path);
  const std::string type = r.string("type");
  if (type == "disc") {
    r.allow_only({"type", "radius"});
    return Disc{r.number("radius")};
  }
  if (type == "polygon") {
    r.allow_only({"type", "points"});
    Polygon p;
    const json& pts = r.array("points");
    for (std::size_t i = 0; i < pts.size(); ++i)
      p.vertices.push_back(vec_from(pts[i], r.at("points") + "[" + std::to_string(i) + "]"));
    return p;
  }
  JsonReader::fail("shape type must be 'disc' or 'polygon'", r.at("type"));
}

inline json to_json(const Occluder& o) {
  json j{{"id", o.occluder_id},   {"kind", o.kind},         {"shape", to_json(o.shape)},
         {"x", o.position.x},     {"y", o.position.y},      {"vx", o.velocity.x},
         {"vy", o.velocity.y}};
  if (!o.zone.empty()) j["zone"] = o.zone;
  return j;
}

inline Occluder occluder_from_json(const json& j, const std::string& path) {
  JsonReader r(j, path);
  r.allow_only({"id", "kind", "shape", "x", "y", "vx", "vy", "zone"});
  Occluder o;
  o.occluder_id = r.string("id");
  o.kind = r.string("kind");
  o.shape = shape_from_json(r.field("shape"), r.at("shape"));
  o.position = {r.number("x"), r.number("y")};
  o.velocity = {r.number("vx"), r.number("vy")};
  o.zone = r.string_or("zone", "");
  return o;
}

inline json to_json(const SafetyState& s) {
  json occ = json::array();
  for (const auto& o : s.env.occluders) occ.push_back(to_json(o));
  json vis = json::object();
  for (const auto& [id, v] : s.env.visibility) vis[id] = v;
  return json{
      {"tick", s.tick},
      {"human",
       {{"id", s.human.worker_id},
        {"x", s.human.position.x},
        {"y", s.human.position.y},
        {"vx", s.human.velocity.x},
        {"vy", s.human.velocity.y},
        {"role", s.human.role}}},
      {"robot",
       {{"x", s.robot.position.x},
        {"y", s.robot.position.y},
        {"heading", s.robot.heading},
        {"speed", s.robot.speed},
        {"load", std::string(to_string(s.robot.load))},
        {"mode", std::string(to_string(s.robot.mode))}}},
      {"env", {{"occluders", occ}, {"visibility", vis}}},
      {"params_hash", s.params ? params_hash(*s.params) : std::string()}};
}

/// Rebuilds a state and attaches the session parameters. The embedded
/// params_hash must match `params`, otherwise an envelope violation is raised.
inline SafetyState state_from_json(const json& j, const ParamsPtr& params, const std::string& path) {
  JsonReader r(j, path);
  r.allow_only({"tick", "human", "robot", "env", "params_hash"});
  SafetyState s;
  s.tick = r.integer("tick");
  const JsonReader h = r.object("human");
  h.allow_only({"id", "x", "y", "vx", "vy", "role"});
  s.human.worker_id = h.string("id");
  s.human.position = {h.number("x"), h.number("y")};
  s.human.velocity = {h.number("vx"), h.number("vy")};
  s.human.role = h.string_or("role", "");
  const JsonReader rb = r.object("robot");
  rb.allow_only({"x", "y", "heading", "speed", "load", "mode"});
  s.robot.position = {rb.number("x"), rb.number("y")};
  s.robot.heading = rb.number("heading");
  s.robot.speed = rb.number("speed");
  s.robot.load = enum_field<Load>(rb, "load", load_from_string);
  s.robot.mode = enum_field<Behavior>(rb, "mode", behavior_from_string);
  const JsonReader env = r.object("env");
  env.allow_only({"occluders", "visibility"});
  const json& occ = env.array("occluders");
  for (std::size_t i = 0; i < occ.size(); ++i)
    s.env.occluders.push_back(occluder_from_json(occ[i], env.at("occluders") + "[" + std::to_string(i) + "]"));
  const JsonReader vis = env.object("visibility");
  for (auto it = vis.raw().begin(); it != vis.raw().end(); ++it) s.env.visibility[it.key()] = vis.number(it.key());
  const std::string hash = r.string("params_hash");
  if (!params || hash != params_hash(*params))
    throw Error(ErrorCode::EnvelopeViolation,
                "state params_hash does not match the session parameters", r.at("params_hash"));
  s.params = params;
  return s;
}

// --- constraints and records ----------------------------------------------

inline json to_json(const ActiveConstraint& c) {
  return json{{"id", std::string(to_string(c.id))},
              {"measured", c.measured},
              {"threshold", c.threshold},
              {"margin", c.margin},
              {"subjects", c.subjects}};
}

inline ActiveConstraint constraint_from_json(const json& j, const std::string& path) {
  JsonReader r(j, path);
  r.allow_only({"id", "measured", "threshold", "margin", "subjects"});
  ActiveConstraint c;
  c.id = enum_field<ConstraintId>(r, "id", constraint_from_string);
  c.measured = r.number("measured");
  c.threshold = r.number("threshold");
  c.margin = r.number("margin");
  const json& subj = r.array("subjects");
  for (std::size_t i = 0; i < subj.size(); ++i) {
    if (!subj[i].is_string())
      JsonReader::fail("expected a string", r.at("subjects") + "[" + std::to_string(i) + "]");
    c.subjects.push_back(subj[i].get<std::string>());
  }
  return c;
}

inline json to_json(const ConstraintSet& set) {
  json a = json::array();
  for (const auto& c : set) a.push_back(to_json(c));
  return a;
}

inline json to_json(const DecisionRecord& r) {
  return json{{"tick", r.tick},
              {"state", to_json(r.state)},
              {"nominal", std::string(to_string(r.nominal))},
              {"selected", std::string(to_string(r.selected))},
              {"guided", r.guided},
              {"active", to_json(r.active)}};
}

inline DecisionRecord record_from_json(const json& j, const ParamsPtr& params, const std::string& path,
                                       std::initializer_list<std::string_view> extra_keys = {}) {
  JsonReader r(j, path);
  std::vector<std::string_view> keys = {"tick", "state", "nominal", "selected", "guided", "active"};
  keys.insert(keys.end(), extra_keys.begin(), extra_keys.end());
  for (auto it = j.begin(); it != j.end(); ++it)
    if (std::find(keys.begin(), keys.end(), it.key()) == keys.end())
      JsonReader::fail("unknown field", r.at(it.key()));
  DecisionRecord d;
  d.tick = r.integer("tick");
  d.state = state_from_json(r.field("state"), params, r.at("state"));
  d.nominal = enum_field<Behavior>(r, "nominal", behavior_from_string);
  d.selected = enum_field<Behavior>(r, "selected", behavior_from_string);
  d.guided = r.boolean("guided");
  const json& act = r.array("active");
  for (std::size_t i = 0; i < act.size(); ++i)
    d.active.push_back(constraint_from_json(act[i], r.at("active") + "[" + std::to_string(i) + "]"));
  return d;
}

}  // namespace safex
