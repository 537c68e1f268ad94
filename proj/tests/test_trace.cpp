#include "support.hpp"

#include <gtest/gtest.h>

using namespace safex;
using namespace safex::testing;

namespace {

Trace bundled_trace(long long ticks = 150) {
  Session s("golden", load_scenario_file(kScenarioPath));
  s.run(ticks);
  return s.trace();
}

std::vector<std::string> lines_of(const std::string& bytes) {
  std::vector<std::string> out;
  std::stringstream ss(bytes);
  for (std::string l; std::getline(ss, l);) out.push_back(l);
  return out;
}

std::string join_lines(const std::vector<std::string>& lines) {
  std::string out;
  for (const auto& l : lines) out += l + "\n";
  return out;
}

/// Every numeric leaf of a JSON value, as JSON pointers.
void numeric_leaves(const json& j, const std::string& at, std::vector<std::string>& out) {
  if (j.is_object()) {
    for (auto it = j.begin(); it != j.end(); ++it) numeric_leaves(*it, at + "/" + it.key(), out);
  } else if (j.is_array()) {
    for (std::size_t i = 0; i < j.size(); ++i) numeric_leaves(j[i], at + "/" + std::to_string(i), out);
  } else if (j.is_number()) {
    out.push_back(at);
  }
}

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an error";
  return ErrorCode::Validation;
}

}  // namespace

TEST(Trace, AppendGetAtLatest) {
  Trace t("s", default_params());
  EXPECT_EQ(latest(t), nullptr);
  auto s = make_state({3, 0});
  for (long long tick : {1, 2, 5}) {
    s.tick = tick;
    append(t, make_decision(s, Behavior::Continue));
  }
  ASSERT_NE(get_at(t, 5), nullptr);
  EXPECT_EQ(get_at(t, 5)->tick, 5);
  EXPECT_EQ(get_at(t, 3), nullptr);
  EXPECT_EQ(latest(t)->tick, 5);
  EXPECT_EQ(nearest_ticks(t, 3), (std::vector<long long>{2, 5}));
  EXPECT_EQ(nearest_ticks(t, 9), (std::vector<long long>{5}));
}

TEST(Trace, RejectsOutOfOrderAndForeignParams) {
  Trace t("s", default_params());
  auto s = make_state({3, 0});
  s.tick = 4;
  append(t, make_decision(s, Behavior::Continue));
  EXPECT_EQ(code_of([&] { append(t, make_decision(s, Behavior::Continue)); }), ErrorCode::Ordering);
  s.tick = 3;
  EXPECT_EQ(code_of([&] { append(t, make_decision(s, Behavior::Continue)); }), ErrorCode::Ordering);
  auto other = make_state({3, 0}, {}, std::make_shared<const SafetyParams>(SafetyParams::make(
                                             2.0, 0.6, {}, {kAllConstraints.begin(), kAllConstraints.end()})));
  other.tick = 9;
  EXPECT_EQ(code_of([&] { append(t, make_decision(other, Behavior::Continue)); }), ErrorCode::EnvelopeViolation);
  EXPECT_EQ(t.records.size(), 1u);
}

TEST(Trace, EmptyTraceIsHeaderOnly) {
  Trace t("empty", default_params());
  const std::string bytes = serialize(t);
  EXPECT_EQ(lines_of(bytes).size(), 1u);
  EXPECT_EQ(deserialize(bytes), t);
  const json h = json::parse(lines_of(bytes)[0]);
  EXPECT_EQ(h["schema_version"], 1);
  EXPECT_EQ(h["params_hash"], params_hash(SafetyParams()));
  EXPECT_TRUE(verify_trace(bytes).all_pass());
}

TEST(Trace, RoundTripIsExact) {
  const Trace t = bundled_trace();
  const std::string bytes = serialize(t);
  const Trace back = deserialize(bytes);
  EXPECT_EQ(back, t);
  EXPECT_EQ(serialize(back), bytes);
}

TEST(TraceProperty, RandomRecordsRoundTrip) {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 50; ++trial) {
    const auto params = random_params(rng);
    Trace t("r" + std::to_string(trial), params);
    long long tick = 0;
    for (int i = 0; i < 20; ++i) {
      auto r = random_record(rng, params);
      tick += 1 + static_cast<long long>(rng() % 3);
      r.tick = r.state.tick = tick;
      append(t, r);
    }
    ASSERT_EQ(deserialize(serialize(t)), t);
  }
}

TEST(Trace, StreamingWriterMatchesSerialize) {
  const Trace t = bundled_trace(40);
  TraceWriter w(t);
  std::string out = w.header_line(t);
  for (const auto& r : t.records) out += w.record_line(r);
  EXPECT_EQ(out, serialize(t));
}

TEST(Trace, TruncatedLastLineCitesTheLine) {
  const std::string bytes = serialize(bundled_trace(10));
  const std::string cut = bytes.substr(0, bytes.size() - 20);
  try {
    deserialize(cut);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::Format);
    EXPECT_EQ(e.path(), "line 11");
  }
  const auto rep = verify_trace(cut);
  ASSERT_EQ(rep.records.size(), 10u);
  EXPECT_FALSE(rep.records.back().pass);
  EXPECT_EQ(rep.records.back().line, 11u);
}

TEST(Trace, HeaderHashMismatchIsEnvelopeViolation) {
  auto lines = lines_of(serialize(bundled_trace(5)));
  json h = json::parse(lines[0]);
  h["params"]["d_min"] = 1.0;  // relax the envelope, keep the old hash
  lines[0] = h.dump();
  EXPECT_EQ(code_of([&] { deserialize(join_lines(lines)); }), ErrorCode::EnvelopeViolation);
  EXPECT_EQ(code_of([&] { verify_trace(join_lines(lines)); }), ErrorCode::EnvelopeViolation);
}

TEST(Trace, RecordBoundToOtherParamsIsEnvelopeViolation) {
  auto lines = lines_of(serialize(bundled_trace(5)));
  json r = json::parse(lines[3]);
  r["state"]["params_hash"] = "sha256:" + std::string(64, '0');
  lines[3] = r.dump();
  EXPECT_EQ(code_of([&] { verify_trace(join_lines(lines)); }), ErrorCode::EnvelopeViolation);
}

TEST(Trace, ReorderedRecordsAreRejected) {
  auto lines = lines_of(serialize(bundled_trace(5)));
  std::swap(lines[2], lines[3]);
  EXPECT_NE(code_of([&] { deserialize(join_lines(lines)); }), ErrorCode::Validation);
  const auto rep = verify_trace(join_lines(lines));
  EXPECT_FALSE(rep.all_pass());
}

TEST(Trace, EditedSelectedBehaviorFailsReplay) {
  auto lines = lines_of(serialize(bundled_trace(40)));
  const std::size_t idx = kTriggerTick;  // line kTriggerTick + 1 holds tick kTriggerTick
  json r = json::parse(lines[idx]);
  ASSERT_EQ(r["tick"], kTriggerTick);
  r["selected"] = "continue";
  lines[idx] = r.dump();
  const auto rep = verify_trace(join_lines(lines));
  for (const auto& v : rep.records) EXPECT_EQ(v.pass, v.line != idx + 1) << v.line << " " << v.reason;
}

// Every numeric field of every record line, nudged: verification fails at
// exactly that record and nowhere else (or throws an envelope violation).
TEST(TraceProperty, AnySingleNumericEditIsCaughtAtThatRecord) {
  const std::string bytes = serialize(bundled_trace(40));
  const auto lines = lines_of(bytes);
  int edits = 0;
  for (std::size_t li = 1; li < lines.size(); li += 3) {
    const json rec = json::parse(lines[li]);
    std::vector<std::string> leaves;
    numeric_leaves(rec, "", leaves);
    for (const auto& ptr : leaves) {
      json mutated = rec;
      auto& v = mutated[json::json_pointer(ptr)];
      if (v.is_number_integer()) v = v.get<long long>() + 1;
      else v = v.get<double>() + 0.01;
      auto copy = lines;
      copy[li] = mutated.dump();
      ++edits;
      try {
        const auto rep = verify_trace(join_lines(copy));
        ASSERT_EQ(rep.records.size(), lines.size() - 1);
        for (const auto& r : rep.records) ASSERT_EQ(r.pass, r.line != li + 1) << "edit " << ptr << " on line " << li + 1;
      } catch (const Error& e) {
        ASSERT_EQ(e.code(), ErrorCode::EnvelopeViolation) << ptr;
      }
    }
  }
  EXPECT_GT(edits, 200);
}

TEST(TraceProperty, HeaderNumericEditIsEnvelopeViolation) {
  auto lines = lines_of(serialize(bundled_trace(5)));
  const json h = json::parse(lines[0]);
  std::vector<std::string> leaves;
  numeric_leaves(h, "", leaves);
  ASSERT_FALSE(leaves.empty());
  for (const auto& ptr : leaves) {
    json m = h;
    m[json::json_pointer(ptr)] = m[json::json_pointer(ptr)].get<double>() * 0.9;
    auto copy = lines;
    copy[0] = m.dump();
    ErrorCode c = code_of([&] { verify_trace(join_lines(copy)); });
    EXPECT_TRUE(c == ErrorCode::EnvelopeViolation || c == ErrorCode::Format) << ptr;
  }
}
