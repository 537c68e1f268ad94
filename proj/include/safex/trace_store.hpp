#pragma once

// Append-only decision trace and its JSON Lines persistence.
//
// Line 1 is a header {schema_version, session_id, params, params_hash}. Every
// following line is one DecisionRecord plus a "digest": the SHA-256 of the
// previous line's digest (the params hash for the first record) concatenated
// with the record's canonical JSON. Editing any value of a record therefore
// invalidates exactly that record's digest.

#include "safex/safety_core.hpp"
#include "safex/wire.hpp"

#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace safex {

inline constexpr int kTraceSchemaVersion = 1;

struct Trace {
  std::string session_id;
  ParamsPtr params;
  std::string params_hash;
  std::vector<DecisionRecord> records;

  Trace() = default;
  Trace(std::string id, ParamsPtr p)
      : session_id(std::move(id)), params(std::move(p)), params_hash(params_hash_of(params)) {}

  static std::string params_hash_of(const ParamsPtr& p) { return p ? safex::params_hash(*p) : std::string(); }

  friend bool operator==(const Trace& a, const Trace& b) {
    const bool same_params = a.params == b.params || (a.params && b.params && *a.params == *b.params);
    return a.session_id == b.session_id && same_params && a.params_hash == b.params_hash &&
           a.records == b.records;
  }
};

/// Appends in place; prior records are never touched.
inline void append(Trace& trace, DecisionRecord record) {
  if (!trace.records.empty() && record.tick <= trace.records.back().tick)
    throw Error(ErrorCode::Ordering,
                "record tick " + std::to_string(record.tick) + " does not follow last tick " +
                    std::to_string(trace.records.back().tick),
                "tick");
  if (record.tick != record.state.tick)
    throw Error(ErrorCode::Ordering, "record tick differs from its state tick", "tick");
  if (!record.state.params || params_hash(*record.state.params) != trace.params_hash)
    throw Error(ErrorCode::EnvelopeViolation,
                "record parameters do not match the session envelope " + trace.params_hash, "state.params");
  trace.records.push_back(std::move(record));
}

inline const DecisionRecord* get_at(const Trace& trace, long long tick) {
  auto it = std::lower_bound(trace.records.begin(), trace.records.end(), tick,
                             [](const DecisionRecord& r, long long t) { return r.tick < t; });
  return it != trace.records.end() && it->tick == tick ? &*it : nullptr;
}

inline const DecisionRecord* latest(const Trace& trace) {
  return trace.records.empty() ? nullptr : &trace.records.back();
}

/// Ticks closest to `tick`, for diagnostics (at most two: predecessor and successor).
inline std::vector<long long> nearest_ticks(const Trace& trace, long long tick) {
  std::vector<long long> out;
  auto it = std::lower_bound(trace.records.begin(), trace.records.end(), tick,
                             [](const DecisionRecord& r, long long t) { return r.tick < t; });
  if (it != trace.records.begin()) out.push_back(std::prev(it)->tick);
  if (it != trace.records.end()) out.push_back(it->tick);
  return out;
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

inline json trace_header(const Trace& t) {
  return json{{"schema_version", kTraceSchemaVersion},
              {"session_id", t.session_id},
              {"params", to_json(*t.params)},
              {"params_hash", t.params_hash}};
}

inline std::string record_digest(const std::string& previous, const json& record_without_digest) {
  return sha256_hex(previous + record_without_digest.dump());
}

/// Streaming writer; serialize() is this applied to every record.
class TraceWriter {
public:
  explicit TraceWriter(const Trace& t) : chain_(t.params_hash) {}

  std::string header_line(const Trace& t) const { return trace_header(t).dump() + "\n"; }

  std::string record_line(const DecisionRecord& r) {
    json j = to_json(r);
    chain_ = record_digest(chain_, j);
    j["digest"] = chain_;
    return j.dump() + "\n";
  }

private:
  std::string chain_;
};

inline std::string serialize(const Trace& t) {
  TraceWriter w(t);
  std::string out = w.header_line(t);
  for (const auto& r : t.records) out += w.record_line(r);
  return out;
}

struct TraceHeader {
  std::string session_id;
  ParamsPtr params;
  std::string params_hash;
};

namespace detail {

inline std::vector<std::string> split_lines(const std::string& bytes, bool& trailing_newline) {
  std::vector<std::string> lines;
  std::size_t pos = 0;
  while (pos < bytes.size()) {
    const auto nl = bytes.find('\n', pos);
    if (nl == std::string::npos) {
      lines.push_back(bytes.substr(pos));
      trailing_newline = false;
      return lines;
    }
    lines.push_back(bytes.substr(pos, nl - pos));
    pos = nl + 1;
  }
  trailing_newline = true;
  return lines;
}

inline json parse_line(const std::string& line, std::size_t line_no) {
  try {
    return json::parse(line);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::Format, "malformed JSON on line " + std::to_string(line_no) + ": " + e.what(),
                "line " + std::to_string(line_no));
  }
}

/// Parses and checks the header; the declared hash must match the params.
inline TraceHeader read_header(const std::string& line) {
  const json j = parse_line(line, 1);
  try {
    JsonReader r(j, "");
    r.allow_only({"schema_version", "session_id", "params", "params_hash"});
    if (r.integer("schema_version") != kTraceSchemaVersion)
      throw Error(ErrorCode::Format, "unsupported schema_version on line 1", "line 1.schema_version");
    TraceHeader h;
    h.session_id = r.string("session_id");
    h.params = std::make_shared<const SafetyParams>(params_from_json(r.field("params")));
    h.params_hash = r.string("params_hash");
    if (h.params_hash != params_hash(*h.params))
      throw Error(ErrorCode::EnvelopeViolation,
                  "header params_hash " + h.params_hash + " does not match params (" + params_hash(*h.params) + ")",
                  "line 1.params_hash");
    return h;
  } catch (const Error& e) {
    if (e.code() == ErrorCode::Validation)
      throw Error(ErrorCode::Format, std::string("invalid header on line 1: ") + e.what(), "line 1." + e.path());
    throw;
  }
}

}  // namespace detail

/// Strict reader: any malformed line, broken digest chain, ordering problem or
/// envelope mismatch aborts with an error citing the line.
inline Trace deserialize(const std::string& bytes) {
  bool trailing = true;
  const auto lines = detail::split_lines(bytes, trailing);
  if (lines.empty()) throw Error(ErrorCode::Format, "empty trace stream: missing header on line 1", "line 1");
  const TraceHeader h = detail::read_header(lines[0]);
  Trace t;
  t.session_id = h.session_id;
  t.params = h.params;
  t.params_hash = h.params_hash;
  std::string chain = t.params_hash;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const std::size_t line_no = i + 1;
    const std::string where = "line " + std::to_string(line_no);
    if (i + 1 == lines.size() && !trailing)
      throw Error(ErrorCode::Format, "truncated final record on " + where, where);
    json j = detail::parse_line(lines[i], line_no);
    if (!j.is_object() || !j.contains("digest") || !j["digest"].is_string())
      throw Error(ErrorCode::Format, "record on " + where + " lacks a digest", where);
    const std::string digest = j["digest"].get<std::string>();
    j.erase("digest");
    const std::string expected = record_digest(chain, j);
    if (digest != expected)
      throw Error(ErrorCode::Integrity, "record digest mismatch on " + where, where);
    chain = digest;
    DecisionRecord r;
    try {
      r = record_from_json(j, t.params, "");
    } catch (const Error& e) {
      if (e.code() == ErrorCode::Validation)
        throw Error(ErrorCode::Format, std::string("invalid record on ") + where + ": " + e.what(), where);
      throw;
    }
    try {
      append(t, std::move(r));
    } catch (const Error& e) {
      throw Error(e.code(), std::string(e.what()) + " (" + where + ")", where);
    }
  }
  return t;
}

// ---------------------------------------------------------------------------
// Replay verification
// ---------------------------------------------------------------------------

struct RecordVerdict {
  std::size_t line = 0;
  std::optional<long long> tick;
  bool pass = false;
  std::string reason;  // empty on PASS
};

struct VerifyReport {
  std::string session_id;
  std::string params_hash;
  std::vector<RecordVerdict> records;
  bool all_pass() const {
    return std::all_of(records.begin(), records.end(), [](const auto& r) { return r.pass; });
  }
};

/// Re-derives every record with the safety core and checks the digest chain.
/// Per-record problems become FAIL verdicts; a header whose params do not match
/// its hash (or a record bound to different params) throws EnvelopeViolation.
inline VerifyReport verify_trace(const std::string& bytes) {
  bool trailing = true;
  const auto lines = detail::split_lines(bytes, trailing);
  if (lines.empty()) throw Error(ErrorCode::Format, "empty trace stream: missing header on line 1", "line 1");
  const TraceHeader h = detail::read_header(lines[0]);
  VerifyReport rep{h.session_id, h.params_hash, {}};
  std::string chain = h.params_hash;
  std::optional<long long> last_tick;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    RecordVerdict v;
    v.line = i + 1;
    auto fail = [&](std::string why) {
      v.pass = false;
      v.reason = std::move(why);
      rep.records.push_back(v);
    };
    if (i + 1 == lines.size() && !trailing) {
      fail("truncated final line");
      continue;
    }
    json j;
    try {
      j = json::parse(lines[i]);
    } catch (const json::parse_error&) {
      fail("malformed JSON");
      continue;
    }
    if (!j.is_object() || !j.contains("digest") || !j["digest"].is_string()) {
      fail("missing digest");
      continue;
    }
    if (j.contains("tick") && j["tick"].is_number_integer()) v.tick = j["tick"].get<long long>();
    const std::string digest = j["digest"].get<std::string>();
    j.erase("digest");
    const bool digest_ok = digest == record_digest(chain, j);
    chain = digest;  // later records chain from the stored value
    DecisionRecord r;
    try {
      r = record_from_json(j, h.params, "");
    } catch (const Error& e) {
      if (e.code() == ErrorCode::EnvelopeViolation)
        throw Error(ErrorCode::EnvelopeViolation,
                    std::string(e.what()) + " (line " + std::to_string(v.line) + ")", e.path());
      fail(std::string("invalid record: ") + e.what());
      continue;
    }
    if (last_tick && r.tick <= *last_tick) {
      fail("tick " + std::to_string(r.tick) + " does not follow " + std::to_string(*last_tick));
      continue;
    }
    if (r.tick != r.state.tick) {
      fail("record tick differs from state tick");
      continue;
    }
    ConstraintSet recomputed;
    try {
      recomputed = evaluate_constraints(r.state);
    } catch (const Error& e) {
      fail(std::string("state invalid: ") + e.what());
      continue;
    }
    if (recomputed != r.active) {
      fail("active constraints do not match re-evaluation");
      continue;
    }
    if (select_behavior(recomputed, r.nominal, *h.params, r.guided) != r.selected) {
      fail("selected behavior does not match arbitration");
      continue;
    }
    if (!digest_ok) {
      fail("digest mismatch");
      continue;
    }
    // Ordering is checked against verified records only, so one bad record
    // does not drag its successor down with it.
    last_tick = r.tick;
    v.pass = true;
    rep.records.push_back(v);
  }
  return rep;
}

}  // namespace safex
