#pragma once

// Scenario documents are YAML. Every key is checked; unknown keys are
// rejected with the path of the offending field.

#include "safex/world_sim.hpp"

#include <yaml-cpp/yaml.h>

#include <charconv>
#include <fstream>
#include <set>
#include <sstream>
#include <string>

namespace safex {

namespace detail {

class YamlReader {
public:
  YamlReader(YAML::Node node, std::string path) : node_(std::move(node)), path_(std::move(path)) {
    if (!node_.IsMap()) fail("expected a mapping", path_);
  }

  std::string at(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
  bool has(const std::string& key) const { return static_cast<bool>(node_[key]); }

  YAML::Node field(const std::string& key) const {
    YAML::Node n = node_[key];
    if (!n) fail("missing required field", at(key));
    return n;
  }

  double number(const std::string& key) const { return as_number(field(key), at(key)); }
  double number_or(const std::string& key, double fallback) const { return has(key) ? number(key) : fallback; }

  long long integer(const std::string& key) const {
    const YAML::Node n = field(key);
    try {
      if (!n.IsScalar()) throw YAML::Exception(YAML::Mark::null_mark(), "");
      return n.as<long long>();
    } catch (const YAML::Exception&) {
      fail("expected an integer", at(key));
    }
  }

  std::string string(const std::string& key) const {
    const YAML::Node n = field(key);
    if (!n.IsScalar()) fail("expected a scalar string", at(key));
    return n.as<std::string>();
  }
  std::string string_or(const std::string& key, std::string fallback) const {
    return has(key) ? string(key) : fallback;
  }

  YAML::Node sequence(const std::string& key) const {
    const YAML::Node n = field(key);
    if (!n.IsSequence()) fail("expected a list", at(key));
    return n;
  }

  YamlReader map(const std::string& key) const { return YamlReader(field(key), at(key)); }

  void allow_only(std::initializer_list<const char*> keys) const {
    for (const auto& kv : node_) {
      const std::string k = kv.first.as<std::string>();
      bool known = false;
      for (const char* allowed : keys) known = known || k == allowed;
      if (!known) fail("unknown field", at(k));
    }
  }

  static double as_number(const YAML::Node& n, const std::string& path) {
    double d = 0.0;
    try {
      if (!n.IsScalar()) throw YAML::Exception(YAML::Mark::null_mark(), "");
      d = n.as<double>();
    } catch (const YAML::Exception&) {
      fail("expected a number", path);
    }
    if (!std::isfinite(d)) fail("expected a finite number", path);
    return d;
  }

  static Vec2 as_point(const YAML::Node& n, const std::string& path) {
    if (!n.IsSequence() || n.size() != 2) fail("expected [x, y]", path);
    return {as_number(n[0], path + "[0]"), as_number(n[1], path + "[1]")};
  }

  [[noreturn]] static void fail(const std::string& msg, const std::string& path) {
    throw Error(ErrorCode::Validation, msg + " at '" + path + "'", path);
  }

private:
  YAML::Node node_;
  std::string path_;
};

template <typename E, typename Parse>
E yaml_enum(const YamlReader& r, const std::string& key, Parse parse, const char* allowed) {
  const std::string s = r.string(key);
  auto v = parse(s);
  if (!v) YamlReader::fail("unrecognized value '" + s + "' (expected " + allowed + ")", r.at(key));
  return *v;
}

inline Shape read_shape(const YamlReader& r) {
  const std::string type = r.string("type");
  if (type == "disc") {
    r.allow_only({"type", "radius"});
    const double radius = r.number("radius");
    if (radius <= 0.0) YamlReader::fail("disc radius must be > 0", r.at("radius"));
    return Disc{radius};
  }
  if (type == "polygon") {
    r.allow_only({"type", "points"});
    Polygon p;
    const YAML::Node pts = r.sequence("points");
    for (std::size_t i = 0; i < pts.size(); ++i)
      p.vertices.push_back(YamlReader::as_point(pts[i], r.at("points") + "[" + std::to_string(i) + "]"));
    if (p.vertices.size() < 3 || !is_convex(p) || std::abs(signed_area(p)) <= 0.0)
      YamlReader::fail("polygon must be convex with positive area", r.at("points"));
    return p;
  }
  YamlReader::fail("shape type must be 'disc' or 'polygon'", r.at("type"));
}

inline OccluderSpec read_occluder(const YamlReader& r) {
  r.allow_only({"id", "kind", "zone", "shape", "x", "y", "speed"});
  OccluderSpec s;
  s.occluder.occluder_id = r.string("id");
  if (s.occluder.occluder_id.empty()) YamlReader::fail("occluder id must be non-empty", r.at("id"));
  s.occluder.kind = r.string_or("kind", "obstacle");
  s.occluder.zone = r.string_or("zone", "");
  s.occluder.shape = read_shape(r.map("shape"));
  s.occluder.position = {r.number("x"), r.number("y")};
  s.speed = r.number_or("speed", 0.0);
  if (s.speed < 0.0) YamlReader::fail("speed must be >= 0", r.at("speed"));
  return s;
}

inline const char* kBehaviorNames = "continue|slowdown|pause|stop|manual";

inline Event read_event(const YamlReader& r) {
  Event e;
  e.tick = r.integer("tick");
  if (e.tick < 0) YamlReader::fail("event tick must be >= 0", r.at("tick"));
  const std::string type = r.string("type");
  if (type == "worker_waypoint") {
    r.allow_only({"tick", "type", "x", "y"});
    e.action = event::SetWorkerWaypoint{{r.number("x"), r.number("y")}};
  } else if (type == "occluder_waypoint") {
    r.allow_only({"tick", "type", "id", "x", "y"});
    e.action = event::SetOccluderWaypoint{r.string("id"), {r.number("x"), r.number("y")}};
  } else if (type == "spawn_occluder") {
    r.allow_only({"tick", "type", "occluder"});
    e.action = event::SpawnOccluder{read_occluder(r.map("occluder"))};
  } else if (type == "remove_occluder") {
    r.allow_only({"tick", "type", "id"});
    e.action = event::RemoveOccluder{r.string("id")};
  } else if (type == "set_nominal") {
    r.allow_only({"tick", "type", "behavior"});
    e.action = event::SetNominal{yaml_enum<Behavior>(r, "behavior", behavior_from_string, kBehaviorNames)};
  } else {
    YamlReader::fail("unknown event type '" + type +
                         "' (expected worker_waypoint|occluder_waypoint|spawn_occluder|remove_occluder|set_nominal)",
                     r.at("type"));
  }
  return e;
}

inline SafetyParams read_params(const YamlReader& r) {
  r.allow_only({"d_min", "v_min", "guidance_zone", "priorities"});
  GuidanceZoneSpec zone;
  if (r.has("guidance_zone")) {
    const YamlReader gz = r.map("guidance_zone");
    gz.allow_only({"side", "max_distance"});
    if (gz.has("side")) zone.side = yaml_enum<Side>(gz, "side", side_from_string, "left|right");
    zone.max_distance = gz.number_or("max_distance", zone.max_distance);
  }
  std::vector<ConstraintId> pri(SafetyParams::kDefaultPriorities.begin(), SafetyParams::kDefaultPriorities.end());
  if (r.has("priorities")) {
    pri.clear();
    const YAML::Node list = r.sequence("priorities");
    for (std::size_t i = 0; i < list.size(); ++i) {
      const std::string path = r.at("priorities") + "[" + std::to_string(i) + "]";
      if (!list[i].IsScalar()) YamlReader::fail("expected a constraint name", path);
      auto c = constraint_from_string(list[i].as<std::string>());
      if (!c)
        throw Error(ErrorCode::Validation,
                    "unknown constraint '" + list[i].as<std::string>() +
                        "' in priorities (expected proximity|visibility|guidance_zone)",
                    r.at("priorities"));
      pri.push_back(*c);
    }
  }
  // SafetyParams::make reports paths rooted at "params".
  return SafetyParams::make(r.number_or("d_min", 1.5), r.number_or("v_min", 0.6), zone, std::move(pri));
}

/// Ids must exist when an event refers to them: replays spawn/remove in order.
inline void check_references(const Scenario& sc) {
  std::set<std::string> live;
  for (std::size_t i = 0; i < sc.occluders.size(); ++i) {
    const auto& id = sc.occluders[i].occluder.occluder_id;
    if (!live.insert(id).second)
      YamlReader::fail("duplicate occluder id '" + id + "'", "occluders[" + std::to_string(i) + "].id");
  }
  for (std::size_t i = 0; i < sc.events.size(); ++i) {
    const std::string path = "events[" + std::to_string(i) + "]";
    std::visit(
        [&](const auto& e) {
          using T = std::decay_t<decltype(e)>;
          auto require = [&](const std::string& id) {
            if (!live.count(id))
              throw Error(ErrorCode::Validation,
                          "event references unknown occluder '" + id + "' at '" + path + ".id'", path + ".id");
          };
          if constexpr (std::is_same_v<T, event::SetOccluderWaypoint>) {
            require(e.id);
          } else if constexpr (std::is_same_v<T, event::RemoveOccluder>) {
            require(e.id);
            live.erase(e.id);
          } else if constexpr (std::is_same_v<T, event::SpawnOccluder>) {
            if (!live.insert(e.spec.occluder.occluder_id).second)
              YamlReader::fail("spawned occluder id '" + e.spec.occluder.occluder_id + "' already exists",
                               path + ".occluder.id");
          }
        },
        sc.events[i].action);
  }
}

}  // namespace detail

/// Parses and fully validates a scenario document.
inline Scenario load_scenario(const std::string& text) {
  using detail::YamlReader;
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::Exception& e) {
    throw Error(ErrorCode::Validation, std::string("scenario is not valid YAML: ") + e.what(), "");
  }
  if (!root.IsMap()) throw Error(ErrorCode::Validation, "scenario document must be a mapping", "");
  const YamlReader r(root, "");
  r.allow_only({"name", "tick_duration", "horizon", "seed", "params", "robot", "worker", "occluders", "events",
                "nominal"});

  Scenario sc;
  sc.name = r.string("name");
  sc.tick_duration = r.number_or("tick_duration", 0.1);
  if (sc.tick_duration <= 0.0) YamlReader::fail("tick_duration must be > 0", "tick_duration");
  sc.horizon = r.integer("horizon");
  if (sc.horizon <= 0) YamlReader::fail("horizon must be > 0", "horizon");
  sc.seed = r.has("seed") ? static_cast<std::uint64_t>(r.integer("seed")) : 0;

  sc.params = std::make_shared<const SafetyParams>(
      r.has("params") ? detail::read_params(r.map("params")) : SafetyParams{});

  const YamlReader robot = r.map("robot");
  robot.allow_only({"x", "y", "heading", "cruise_speed", "load"});
  sc.robot_position = {robot.number("x"), robot.number("y")};
  sc.robot_heading = normalize_angle(robot.number_or("heading", 0.0));
  sc.cruise_speed = robot.number_or("cruise_speed", 0.5);
  if (sc.cruise_speed < 0.0) YamlReader::fail("cruise_speed must be >= 0", "robot.cruise_speed");
  if (robot.has("load")) sc.robot_load = detail::yaml_enum<Load>(robot, "load", load_from_string, "unloaded|carrying_beam");

  const YamlReader worker = r.map("worker");
  worker.allow_only({"id", "x", "y", "speed", "role"});
  sc.worker_id = worker.string_or("id", "worker1");
  sc.worker_role = worker.string_or("role", "");
  sc.worker_position = {worker.number("x"), worker.number("y")};
  sc.worker_speed = worker.number_or("speed", 1.0);
  if (sc.worker_speed < 0.0) YamlReader::fail("speed must be >= 0", "worker.speed");

  if (r.has("occluders")) {
    const YAML::Node list = r.sequence("occluders");
    for (std::size_t i = 0; i < list.size(); ++i)
      sc.occluders.push_back(detail::read_occluder(YamlReader(list[i], "occluders[" + std::to_string(i) + "]")));
  }
  if (r.has("events")) {
    const YAML::Node list = r.sequence("events");
    for (std::size_t i = 0; i < list.size(); ++i) {
      sc.events.push_back(detail::read_event(YamlReader(list[i], "events[" + std::to_string(i) + "]")));
      if (i > 0 && sc.events[i].tick < sc.events[i - 1].tick)
        YamlReader::fail("events must be sorted by tick", "events[" + std::to_string(i) + "].tick");
    }
  }
  if (r.has("nominal")) {
    const YAML::Node list = r.sequence("nominal");
    for (std::size_t i = 0; i < list.size(); ++i) {
      const YamlReader n(list[i], "nominal[" + std::to_string(i) + "]");
      n.allow_only({"tick", "behavior"});
      const long long t = n.integer("tick");
      if (t < 0) YamlReader::fail("tick must be >= 0", n.at("tick"));
      sc.nominal[t] = detail::yaml_enum<Behavior>(n, "behavior", behavior_from_string, detail::kBehaviorNames);
    }
  }
  detail::check_references(sc);
  return sc;
}

inline Scenario load_scenario_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Validation, "cannot open scenario file '" + path + "'", path);
  std::stringstream ss;
  ss << in.rdbuf();
  return load_scenario(ss.str());
}

namespace detail {

/// Shortest decimal that reads back to the same double.
inline std::string num(double v) {
  char buf[32];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

inline void emit_point(YAML::Emitter& out, Vec2 v) {
  out << YAML::Flow << YAML::BeginSeq << num(v.x) << num(v.y) << YAML::EndSeq;
}

inline void emit_occluder(YAML::Emitter& out, const OccluderSpec& s) {
  const Occluder& o = s.occluder;
  out << YAML::BeginMap;
  out << YAML::Key << "id" << YAML::Value << o.occluder_id;
  out << YAML::Key << "kind" << YAML::Value << o.kind;
  if (!o.zone.empty()) out << YAML::Key << "zone" << YAML::Value << o.zone;
  out << YAML::Key << "shape" << YAML::Value << YAML::BeginMap;
  if (const auto* d = std::get_if<Disc>(&o.shape)) {
    out << YAML::Key << "type" << YAML::Value << "disc" << YAML::Key << "radius" << YAML::Value << num(d->radius);
  } else {
    out << YAML::Key << "type" << YAML::Value << "polygon" << YAML::Key << "points" << YAML::Value
        << YAML::BeginSeq;
    for (const auto& v : std::get<Polygon>(o.shape).vertices) emit_point(out, v);
    out << YAML::EndSeq;
  }
  out << YAML::EndMap;
  out << YAML::Key << "x" << YAML::Value << num(o.position.x) << YAML::Key << "y" << YAML::Value << num(o.position.y);
  out << YAML::Key << "speed" << YAML::Value << num(s.speed);
  out << YAML::EndMap;
}

}  // namespace detail

/// Normalized form: every default made explicit, keys in schema order.
inline std::string scenario_to_yaml(const Scenario& sc) {
  using detail::num;
  YAML::Emitter out;
  out.SetDoublePrecision(17);
  const SafetyParams& p = *sc.params;
  out << YAML::BeginMap;
  out << YAML::Key << "name" << YAML::Value << sc.name;
  out << YAML::Key << "tick_duration" << YAML::Value << num(sc.tick_duration);
  out << YAML::Key << "horizon" << YAML::Value << sc.horizon;
  out << YAML::Key << "seed" << YAML::Value << sc.seed;
  out << YAML::Key << "params" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "d_min" << YAML::Value << num(p.d_min());
  out << YAML::Key << "v_min" << YAML::Value << num(p.v_min());
  out << YAML::Key << "guidance_zone" << YAML::Value << YAML::BeginMap << YAML::Key << "side" << YAML::Value
      << std::string(to_string(p.guidance_zone().side)) << YAML::Key << "max_distance" << YAML::Value
      << num(p.guidance_zone().max_distance) << YAML::EndMap;
  out << YAML::Key << "priorities" << YAML::Value << YAML::Flow << YAML::BeginSeq;
  for (auto c : p.priorities()) out << std::string(to_string(c));
  out << YAML::EndSeq << YAML::EndMap;
  out << YAML::Key << "robot" << YAML::Value << YAML::BeginMap << YAML::Key << "x" << YAML::Value
      << num(sc.robot_position.x) << YAML::Key << "y" << YAML::Value << num(sc.robot_position.y) << YAML::Key << "heading"
      << YAML::Value << num(sc.robot_heading) << YAML::Key << "cruise_speed" << YAML::Value << num(sc.cruise_speed)
      << YAML::Key << "load" << YAML::Value << std::string(to_string(sc.robot_load)) << YAML::EndMap;
  out << YAML::Key << "worker" << YAML::Value << YAML::BeginMap << YAML::Key << "id" << YAML::Value << sc.worker_id
      << YAML::Key << "x" << YAML::Value << num(sc.worker_position.x) << YAML::Key << "y" << YAML::Value
      << num(sc.worker_position.y) << YAML::Key << "speed" << YAML::Value << num(sc.worker_speed);
  if (!sc.worker_role.empty()) out << YAML::Key << "role" << YAML::Value << sc.worker_role;
  out << YAML::EndMap;
  out << YAML::Key << "occluders" << YAML::Value << YAML::BeginSeq;
  for (const auto& o : sc.occluders) detail::emit_occluder(out, o);
  out << YAML::EndSeq;
  out << YAML::Key << "events" << YAML::Value << YAML::BeginSeq;
  for (const auto& e : sc.events) {
    out << YAML::BeginMap << YAML::Key << "tick" << YAML::Value << e.tick;
    std::visit(
        [&](const auto& a) {
          using T = std::decay_t<decltype(a)>;
          if constexpr (std::is_same_v<T, event::SetWorkerWaypoint>) {
            out << YAML::Key << "type" << YAML::Value << "worker_waypoint" << YAML::Key << "x" << YAML::Value
                << num(a.point.x) << YAML::Key << "y" << YAML::Value << num(a.point.y);
          } else if constexpr (std::is_same_v<T, event::SetOccluderWaypoint>) {
            out << YAML::Key << "type" << YAML::Value << "occluder_waypoint" << YAML::Key << "id" << YAML::Value
                << a.id << YAML::Key << "x" << YAML::Value << num(a.point.x) << YAML::Key << "y" << YAML::Value
                << num(a.point.y);
          } else if constexpr (std::is_same_v<T, event::SpawnOccluder>) {
            out << YAML::Key << "type" << YAML::Value << "spawn_occluder" << YAML::Key << "occluder" << YAML::Value;
            detail::emit_occluder(out, a.spec);
          } else if constexpr (std::is_same_v<T, event::RemoveOccluder>) {
            out << YAML::Key << "type" << YAML::Value << "remove_occluder" << YAML::Key << "id" << YAML::Value
                << a.id;
          } else {
            out << YAML::Key << "type" << YAML::Value << "set_nominal" << YAML::Key << "behavior" << YAML::Value
                << std::string(to_string(a.behavior));
          }
        },
        e.action);
    out << YAML::EndMap;
  }
  out << YAML::EndSeq;
  out << YAML::Key << "nominal" << YAML::Value << YAML::BeginSeq;
  for (const auto& [t, b] : sc.nominal)
    out << YAML::Flow << YAML::BeginMap << YAML::Key << "tick" << YAML::Value << t << YAML::Key << "behavior"
        << YAML::Value << std::string(to_string(b)) << YAML::EndMap;
  out << YAML::EndSeq;
  out << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

}  // namespace safex
