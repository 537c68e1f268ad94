#pragma once

// Controlled query grammar (case-insensitive keywords):
//
//   query    := (why | whynot | whatif | confirm | command) [at]
//   why      := "why" ["stop" | "pause" | "slow" | "follow"]
//   whynot   := ("whynot" | "why" "not") behavior
//   whatif   := ("whatif" | "what" "if") delta {"and" delta}
//   delta    := "worker" ("to" point | "back" number | "distance" number)
//             | "remove" (ident | "it")
//             | "move" (ident | "it" | "worker") "by" point
//             | "guide" ("left" | "right")
//             | "visibility" number
//   confirm  := "was" "it" (ident | "it")
//   command  := "do" "it" | "follow" | "resume"
//   at       := "at" integer
//   behavior := "continue" | "slowdown" | "stop" | "pause" | "manual"
//   point    := ["("] number [","] number [")"]

#include "safex/json_util.hpp"
#include "safex/types.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace safex {

/// Entity reference; std::nullopt is the anaphor "it", resolved from dialogue memory.
using Referent = std::optional<std::string>;

namespace delta {
struct SetWorkerPosition { Vec2 point; friend bool operator==(const SetWorkerPosition&, const SetWorkerPosition&) = default; };
struct MoveWorkerBy { Vec2 offset; friend bool operator==(const MoveWorkerBy&, const MoveWorkerBy&) = default; };
/// Moves the worker along the robot->worker bearing (positive = farther away).
struct MoveWorkerAway { double meters = 0.0; friend bool operator==(const MoveWorkerAway&, const MoveWorkerAway&) = default; };
struct SetWorkerDistance { double meters = 0.0; friend bool operator==(const SetWorkerDistance&, const SetWorkerDistance&) = default; };
struct RemoveOccluder { Referent id; friend bool operator==(const RemoveOccluder&, const RemoveOccluder&) = default; };
struct MoveOccluderBy { Referent id; Vec2 offset; friend bool operator==(const MoveOccluderBy&, const MoveOccluderBy&) = default; };
struct EnterGuidanceZone { Side side = Side::Right; friend bool operator==(const EnterGuidanceZone&, const EnterGuidanceZone&) = default; };
/// Diagnostic override of the recomputed visibility; flagged in explanations.
struct SetVisibility { double confidence = 1.0; friend bool operator==(const SetVisibility&, const SetVisibility&) = default; };
}  // namespace delta

using StateDelta = std::variant<delta::SetWorkerPosition, delta::MoveWorkerBy, delta::MoveWorkerAway,
                                delta::SetWorkerDistance, delta::RemoveOccluder, delta::MoveOccluderBy,
                                delta::EnterGuidanceZone, delta::SetVisibility>;

namespace query {
struct Why { std::optional<ConstraintId> target; friend bool operator==(const Why&, const Why&) = default; };
struct WhyNot { Behavior alternative = Behavior::Continue; friend bool operator==(const WhyNot&, const WhyNot&) = default; };
struct WhatIf { std::vector<StateDelta> deltas; friend bool operator==(const WhatIf&, const WhatIf&) = default; };
struct Confirm { Referent referent; friend bool operator==(const Confirm&, const Confirm&) = default; };
/// behavior empty for "do it": the last offered what-if verdict.
struct Command { std::optional<Behavior> behavior; friend bool operator==(const Command&, const Command&) = default; };
}  // namespace query

struct QueryAST {
  std::variant<query::Why, query::WhyNot, query::WhatIf, query::Confirm, query::Command> kind;
  std::optional<long long> at;
  friend bool operator==(const QueryAST&, const QueryAST&) = default;
};

inline constexpr std::string_view kGrammarHelp =
    "accepted forms:\n"
    "  why [stop|pause|slow|follow]\n"
    "  why not <behavior>   (or: whynot <behavior>)\n"
    "  what if <delta> {and <delta>}   (or: whatif ...)\n"
    "  was it <id|it>\n"
    "  do it | follow | resume\n"
    "  any query may end with: at <tick>\n"
    "behaviors: continue | slowdown | stop | pause | manual\n"
    "deltas: worker to (x, y) | worker back <m> | worker distance <m> | remove <id|it>\n"
    "        | move <id|it|worker> by (dx, dy) | guide left|right | visibility <0..1>";

// ---------------------------------------------------------------------------
// Canonical text rendering
// ---------------------------------------------------------------------------

/// Shortest decimal text that parses back to the same double.
inline std::string format_number(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

namespace detail {
inline std::string render_point(Vec2 v) { return "(" + format_number(v.x) + ", " + format_number(v.y) + ")"; }
inline std::string render_ref(const Referent& r) { return r ? *r : "it"; }
}  // namespace detail

inline std::string render(const StateDelta& d) {
  return std::visit(
      [](const auto& x) -> std::string {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, delta::SetWorkerPosition>) return "worker to " + detail::render_point(x.point);
        else if constexpr (std::is_same_v<T, delta::MoveWorkerBy>) return "move worker by " + detail::render_point(x.offset);
        else if constexpr (std::is_same_v<T, delta::MoveWorkerAway>) return "worker back " + format_number(x.meters);
        else if constexpr (std::is_same_v<T, delta::SetWorkerDistance>) return "worker distance " + format_number(x.meters);
        else if constexpr (std::is_same_v<T, delta::RemoveOccluder>) return "remove " + detail::render_ref(x.id);
        else if constexpr (std::is_same_v<T, delta::MoveOccluderBy>)
          return "move " + detail::render_ref(x.id) + " by " + detail::render_point(x.offset);
        else if constexpr (std::is_same_v<T, delta::EnterGuidanceZone>) return "guide " + std::string(to_string(x.side));
        else return "visibility " + format_number(x.confidence);
      },
      d);
}

/// Canonical text form; parse(render(q)) == q.
inline std::string render(const QueryAST& q) {
  std::string s = std::visit(
      [](const auto& k) -> std::string {
        using T = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<T, query::Why>) {
          if (!k.target) return "why";
          switch (*k.target) {
            case ConstraintId::Proximity: return "why stop";
            case ConstraintId::Visibility: return "why pause";
            case ConstraintId::GuidanceZone: return "why follow";
          }
          return "why";
        } else if constexpr (std::is_same_v<T, query::WhyNot>) {
          return "why not " + std::string(to_string(k.alternative));
        } else if constexpr (std::is_same_v<T, query::WhatIf>) {
          std::string out = "what if";
          for (std::size_t i = 0; i < k.deltas.size(); ++i) out += (i ? " and " : " ") + render(k.deltas[i]);
          return out;
        } else if constexpr (std::is_same_v<T, query::Confirm>) {
          return "was it " + detail::render_ref(k.referent);
        } else {
          if (!k.behavior) return "do it";
          return *k.behavior == Behavior::ManualFollow ? "follow" : "resume";
        }
      },
      q.kind);
  if (q.at) s += " at " + std::to_string(*q.at);
  return s;
}

// ---------------------------------------------------------------------------
// Text parser
// ---------------------------------------------------------------------------

namespace detail {

struct Token {
  std::string text;   // original spelling
  std::string lower;  // keyword comparison form
  std::size_t pos = 0;
};

inline std::size_t edit_distance(std::string_view a, std::string_view b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j)
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

class QueryParser {
public:
  explicit QueryParser(std::string_view text) : text_(text) { tokenize(); }

  QueryAST parse() {
    if (toks_.empty()) fail(0, "empty query", {"why", "whynot", "whatif", "was", "do", "follow", "resume"});
    QueryAST q;
    const Token& t = next();
    if (t.lower == "why") {
      if (peek_is("not")) {
        ++i_;
        q.kind = query::WhyNot{behavior()};
      } else {
        query::Why w;
        if (peek_is("stop")) w.target = ConstraintId::Proximity, ++i_;
        else if (peek_is("pause") || peek_is("slow")) w.target = ConstraintId::Visibility, ++i_;
        else if (peek_is("follow")) w.target = ConstraintId::GuidanceZone, ++i_;
        q.kind = w;
      }
    } else if (t.lower == "whynot") {
      q.kind = query::WhyNot{behavior()};
    } else if (t.lower == "whatif" || t.lower == "what") {
      if (t.lower == "what") expect("if");
      query::WhatIf w;
      w.deltas.push_back(parse_delta());
      while (peek_is("and")) {
        ++i_;
        w.deltas.push_back(parse_delta());
      }
      q.kind = std::move(w);
    } else if (t.lower == "was") {
      expect("it");
      q.kind = query::Confirm{referent("an entity id or 'it'")};
    } else if (t.lower == "do") {
      expect("it");
      q.kind = query::Command{std::nullopt};
    } else if (t.lower == "follow") {
      q.kind = query::Command{Behavior::ManualFollow};
    } else if (t.lower == "resume") {
      q.kind = query::Command{Behavior::Continue};
    } else {
      fail(t.pos, "unknown query '" + t.text + "'", {"why", "whynot", "whatif", "was", "do", "follow", "resume"},
           t.lower);
    }
    if (peek_is("at")) {
      ++i_;
      q.at = integer();
    }
    if (i_ < toks_.size())
      fail(toks_[i_].pos, "unexpected trailing token '" + toks_[i_].text + "'", {"and", "at"}, toks_[i_].lower);
    return q;
  }

private:
  void tokenize() {
    std::size_t p = 0;
    while (p < text_.size()) {
      const unsigned char c = static_cast<unsigned char>(text_[p]);
      if (std::isspace(c)) {
        ++p;
        continue;
      }
      if (c == '(' || c == ')' || c == ',') {
        toks_.push_back({std::string(1, static_cast<char>(c)), std::string(1, static_cast<char>(c)), p});
        ++p;
        continue;
      }
      if (std::isalnum(c) || c == '_' || c == '-' || c == '.' || c == '+') {
        const std::size_t start = p;
        while (p < text_.size()) {
          const unsigned char d = static_cast<unsigned char>(text_[p]);
          if (!(std::isalnum(d) || d == '_' || d == '-' || d == '.' || d == '+')) break;
          ++p;
        }
        Token t{std::string(text_.substr(start, p - start)), {}, start};
        t.lower = t.text;
        std::transform(t.lower.begin(), t.lower.end(), t.lower.begin(),
                       [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
        toks_.push_back(std::move(t));
        continue;
      }
      throw Error(ErrorCode::Parse,
                  "unexpected character at position " + std::to_string(p) + "\n" + std::string(kGrammarHelp),
                  "position " + std::to_string(p));
    }
  }

  bool peek_is(std::string_view kw) const { return i_ < toks_.size() && toks_[i_].lower == kw; }

  const Token& next() {
    if (i_ >= toks_.size()) fail(text_.size(), "unexpected end of query", {});
    return toks_[i_++];
  }

  void expect(std::string_view kw) {
    if (i_ >= toks_.size()) fail(text_.size(), "expected '" + std::string(kw) + "'", {kw});
    const Token& t = toks_[i_];
    if (t.lower != kw) fail(t.pos, "expected '" + std::string(kw) + "' but found '" + t.text + "'", {kw}, t.lower);
    ++i_;
  }

  Behavior behavior() {
    static constexpr std::string_view names[] = {"continue", "slowdown", "stop", "pause", "manual"};
    if (i_ >= toks_.size())
      fail(text_.size(), "expected a behavior (continue|slowdown|stop|pause|manual)",
           {names[0], names[1], names[2], names[3], names[4]});
    const Token& t = toks_[i_++];
    if (auto b = behavior_from_string(t.lower)) return *b;
    fail(t.pos, "unknown behavior '" + t.text + "'; valid behaviors: continue|slowdown|stop|pause|manual",
         {names[0], names[1], names[2], names[3], names[4]}, t.lower);
  }

  double number(std::string_view what = "a number") {
    if (i_ >= toks_.size()) fail(text_.size(), "expected " + std::string(what), {});
    const Token& t = toks_[i_++];
    double v = 0.0;
    const char* b = t.text.data();
    const char* e = b + t.text.size();
    if (b != e && *b == '+') ++b;
    auto [ptr, ec] = std::from_chars(b, e, v);
    if (ec != std::errc() || ptr != e || !std::isfinite(v))
      throw Error(ErrorCode::Parse,
                  "malformed number '" + t.text + "' at position " + std::to_string(t.pos) + " (expected " +
                      std::string(what) + ")",
                  "position " + std::to_string(t.pos));
    return v;
  }

  long long integer() {
    if (i_ >= toks_.size()) fail(text_.size(), "expected a tick number after 'at'", {});
    const Token& t = toks_[i_++];
    long long v = 0;
    const char* b = t.text.data();
    const char* e = b + t.text.size();
    if (b != e && *b == '+') ++b;
    auto [ptr, ec] = std::from_chars(b, e, v);
    if (ec != std::errc() || ptr != e)
      throw Error(ErrorCode::Parse, "malformed integer '" + t.text + "' at position " + std::to_string(t.pos),
                  "position " + std::to_string(t.pos));
    return v;
  }

  Vec2 point() {
    const bool paren = peek_is("(");
    if (paren) ++i_;
    const double x = number("an x coordinate");
    if (peek_is(",")) ++i_;
    const double y = number("a y coordinate");
    if (paren) expect(")");
    return {x, y};
  }

  Referent referent(std::string_view what) {
    if (i_ >= toks_.size()) fail(text_.size(), "expected " + std::string(what), {"it"});
    const Token& t = toks_[i_++];
    if (t.lower == "it") return std::nullopt;
    if (!std::isalpha(static_cast<unsigned char>(t.text[0])) && t.text[0] != '_')
      fail(t.pos, "expected " + std::string(what) + " but found '" + t.text + "'", {"it"});
    return t.text;
  }

  StateDelta parse_delta() {
    static const std::vector<std::string_view> starts = {"worker", "remove", "move", "guide", "visibility"};
    if (i_ >= toks_.size()) fail(text_.size(), "expected a what-if delta", starts);
    const Token& t = toks_[i_++];
    if (t.lower == "worker") {
      if (peek_is("to")) return ++i_, delta::SetWorkerPosition{point()};
      if (peek_is("back")) return ++i_, delta::MoveWorkerAway{number("a distance in meters")};
      if (peek_is("distance")) {
        ++i_;
        const std::size_t pos = i_ < toks_.size() ? toks_[i_].pos : text_.size();
        const double m = number("a distance in meters");
        if (m < 0.0) throw Error(ErrorCode::Parse, "worker distance must be >= 0", "position " + std::to_string(pos));
        return delta::SetWorkerDistance{m};
      }
      const std::size_t pos = i_ < toks_.size() ? toks_[i_].pos : text_.size();
      fail(pos, "expected 'to', 'back' or 'distance' after 'worker'", {"to", "back", "distance"},
           i_ < toks_.size() ? toks_[i_].lower : "");
    }
    if (t.lower == "remove") return delta::RemoveOccluder{referent("an occluder id or 'it'")};
    if (t.lower == "move") {
      if (peek_is("worker")) {
        ++i_;
        expect("by");
        return delta::MoveWorkerBy{point()};
      }
      Referent id = referent("an occluder id, 'it' or 'worker'");
      expect("by");
      return delta::MoveOccluderBy{std::move(id), point()};
    }
    if (t.lower == "guide") {
      if (peek_is("left")) return ++i_, delta::EnterGuidanceZone{Side::Left};
      if (peek_is("right")) return ++i_, delta::EnterGuidanceZone{Side::Right};
      const std::size_t pos = i_ < toks_.size() ? toks_[i_].pos : text_.size();
      fail(pos, "expected 'left' or 'right' after 'guide'", {"left", "right"}, i_ < toks_.size() ? toks_[i_].lower : "");
    }
    if (t.lower == "visibility") {
      const std::size_t pos = i_ < toks_.size() ? toks_[i_].pos : text_.size();
      const double v = number("a confidence in [0, 1]");
      if (v < 0.0 || v > 1.0)
        throw Error(ErrorCode::Parse, "visibility must lie in [0, 1]", "position " + std::to_string(pos));
      return delta::SetVisibility{v};
    }
    fail(t.pos, "unknown delta '" + t.text + "'", starts, t.lower);
  }

  [[noreturn]] void fail(std::size_t pos, const std::string& msg, std::vector<std::string_view> expected,
                         std::string_view got = {}) const {
    std::string m = msg + " at position " + std::to_string(pos);
    if (!got.empty() && !expected.empty()) {
      std::string_view best;
      std::size_t best_d = 3;  // suggest only near misses
      for (auto e : expected) {
        const auto d = edit_distance(got, e);
        if (d < best_d) best_d = d, best = e;
      }
      if (!best.empty()) m += "; did you mean '" + std::string(best) + "'?";
    }
    m += "\n" + std::string(kGrammarHelp);
    throw Error(ErrorCode::Parse, m, "position " + std::to_string(pos));
  }

  std::string_view text_;
  std::vector<Token> toks_;
  std::size_t i_ = 0;
};

}  // namespace detail

inline QueryAST parse(std::string_view text) { return detail::QueryParser(text).parse(); }

// ---------------------------------------------------------------------------
// Structured (wire) form
// ---------------------------------------------------------------------------

namespace detail {
inline json ref_json(const Referent& r) { return r ? json(*r) : json("it"); }
inline Referent ref_from(const JsonReader& r, std::string_view key) {
  const std::string s = r.string(key);
  if (s.empty()) JsonReader::fail("expected a non-empty id", r.at(key));
  if (s == "it") return std::nullopt;
  return s;
}
}  // namespace detail

inline json to_json(const StateDelta& d) {
  return std::visit(
      [](const auto& x) -> json {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, delta::SetWorkerPosition>) return {{"op", "worker_to"}, {"x", x.point.x}, {"y", x.point.y}};
        else if constexpr (std::is_same_v<T, delta::MoveWorkerBy>) return {{"op", "worker_by"}, {"dx", x.offset.x}, {"dy", x.offset.y}};
        else if constexpr (std::is_same_v<T, delta::MoveWorkerAway>) return {{"op", "worker_back"}, {"meters", x.meters}};
        else if constexpr (std::is_same_v<T, delta::SetWorkerDistance>) return {{"op", "worker_distance"}, {"meters", x.meters}};
        else if constexpr (std::is_same_v<T, delta::RemoveOccluder>) return {{"op", "remove"}, {"id", detail::ref_json(x.id)}};
        else if constexpr (std::is_same_v<T, delta::MoveOccluderBy>)
          return {{"op", "move"}, {"id", detail::ref_json(x.id)}, {"dx", x.offset.x}, {"dy", x.offset.y}};
        else if constexpr (std::is_same_v<T, delta::EnterGuidanceZone>) return {{"op", "guide"}, {"side", std::string(to_string(x.side))}};
        else return {{"op", "visibility"}, {"value", x.confidence}};
      },
      d);
}

inline StateDelta delta_from_json(const json& j, const std::string& path) {
  JsonReader r(j, path);
  const std::string op = r.string("op");
  if (op == "worker_to") {
    r.allow_only({"op", "x", "y"});
    return delta::SetWorkerPosition{{r.number("x"), r.number("y")}};
  }
  if (op == "worker_by") {
    r.allow_only({"op", "dx", "dy"});
    return delta::MoveWorkerBy{{r.number("dx"), r.number("dy")}};
  }
  if (op == "worker_back") {
    r.allow_only({"op", "meters"});
    return delta::MoveWorkerAway{r.number("meters")};
  }
  if (op == "worker_distance") {
    r.allow_only({"op", "meters"});
    const double m = r.number("meters");
    if (m < 0.0) JsonReader::fail("worker distance must be >= 0", r.at("meters"));
    return delta::SetWorkerDistance{m};
  }
  if (op == "remove") {
    r.allow_only({"op", "id"});
    return delta::RemoveOccluder{detail::ref_from(r, "id")};
  }
  if (op == "move") {
    r.allow_only({"op", "id", "dx", "dy"});
    return delta::MoveOccluderBy{detail::ref_from(r, "id"), {r.number("dx"), r.number("dy")}};
  }
  if (op == "guide") {
    r.allow_only({"op", "side"});
    auto s = side_from_string(r.string("side"));
    if (!s) JsonReader::fail("side must be 'left' or 'right'", r.at("side"));
    return delta::EnterGuidanceZone{*s};
  }
  if (op == "visibility") {
    r.allow_only({"op", "value"});
    const double v = r.number("value");
    if (v < 0.0 || v > 1.0) JsonReader::fail("visibility must lie in [0, 1]", r.at("value"));
    return delta::SetVisibility{v};
  }
  JsonReader::fail("unknown delta op '" + op +
                       "' (expected worker_to|worker_by|worker_back|worker_distance|remove|move|guide|visibility)",
                   r.at("op"));
}

inline json to_json(const QueryAST& q) {
  json j = std::visit(
      [](const auto& k) -> json {
        using T = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<T, query::Why>) {
          json o{{"type", "why"}};
          if (k.target) o["target"] = std::string(to_string(*k.target));
          return o;
        } else if constexpr (std::is_same_v<T, query::WhyNot>) {
          return {{"type", "whynot"}, {"behavior", std::string(to_string(k.alternative))}};
        } else if constexpr (std::is_same_v<T, query::WhatIf>) {
          json d = json::array();
          for (const auto& x : k.deltas) d.push_back(to_json(x));
          return {{"type", "whatif"}, {"deltas", d}};
        } else if constexpr (std::is_same_v<T, query::Confirm>) {
          return {{"type", "confirm"}, {"referent", detail::ref_json(k.referent)}};
        } else {
          json o{{"type", "command"}};
          if (k.behavior) o["behavior"] = std::string(to_string(*k.behavior));
          return o;
        }
      },
      q.kind);
  if (q.at) j["at"] = *q.at;
  return j;
}

/// Machine form sent by the console and accepted by the API.
inline QueryAST parse_structured(const json& j, const std::string& path = "") {
  JsonReader r(j, path);
  const std::string type = r.string("type");
  QueryAST q;
  if (type == "why") {
    r.allow_only({"type", "target", "at"});
    query::Why w;
    if (r.has("target")) {
      auto c = constraint_from_string(r.string("target"));
      if (!c) JsonReader::fail("target must be proximity|visibility|guidance_zone", r.at("target"));
      w.target = c;
    }
    q.kind = w;
  } else if (type == "whynot") {
    r.allow_only({"type", "behavior", "at"});
    auto b = behavior_from_string(r.string("behavior"));
    if (!b) JsonReader::fail("behavior must be continue|slowdown|stop|pause|manual", r.at("behavior"));
    q.kind = query::WhyNot{*b};
  } else if (type == "whatif") {
    r.allow_only({"type", "deltas", "at"});
    query::WhatIf w;
    const json& arr = r.array("deltas");
    if (arr.empty()) JsonReader::fail("a what-if needs at least one delta", r.at("deltas"));
    for (std::size_t i = 0; i < arr.size(); ++i)
      w.deltas.push_back(delta_from_json(arr[i], r.at("deltas") + "[" + std::to_string(i) + "]"));
    q.kind = std::move(w);
  } else if (type == "confirm") {
    r.allow_only({"type", "referent", "at"});
    q.kind = query::Confirm{detail::ref_from(r, "referent")};
  } else if (type == "command") {
    r.allow_only({"type", "behavior", "at"});
    query::Command c;
    if (r.has("behavior")) {
      auto b = behavior_from_string(r.string("behavior"));
      if (!b || (*b != Behavior::ManualFollow && *b != Behavior::Continue))
        JsonReader::fail("command behavior must be manual or continue", r.at("behavior"));
      c.behavior = b;
    }
    q.kind = c;
  } else {
    JsonReader::fail("unknown query type '" + type + "' (expected why|whynot|whatif|confirm|command)", r.at("type"));
  }
  if (r.has("at")) q.at = r.integer("at");
  return q;
}

}  // namespace safex
