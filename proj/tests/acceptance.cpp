// Acceptance run: one PASS/FAIL line per criterion, non-zero exit on any FAIL.

#include "oracles.hpp"
#include "query_corpus.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <unistd.h>

using namespace safex;
using namespace safex::testing;

namespace {

const std::string kCli = SAFEX_CLI;
const std::string kGoldenTrace = kSourceDir + "/tests/golden/beam_transport.trace.jsonl";

int failures = 0;

void report(const char* name, bool pass, const std::string& detail) {
  std::printf("%s  %-30s %s\n", pass ? "PASS" : "FAIL", name, detail.c_str());
  std::fflush(stdout);
  failures += !pass;
}

/// Runs a check, turning an escaped exception into a FAIL line.
void check(const char* name, const std::function<std::pair<bool, std::string>()>& body) {
  try {
    const auto [pass, detail] = body();
    report(name, pass, detail);
  } catch (const std::exception& e) {
    report(name, false, std::string("exception: ") + e.what());
  }
}

std::string fmt(const char* f, auto... args) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
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

void numeric_leaves(const json& j, const std::string& at, std::vector<std::string>& out) {
  if (j.is_object()) {
    for (auto it = j.begin(); it != j.end(); ++it) numeric_leaves(*it, at + "/" + it.key(), out);
  } else if (j.is_array()) {
    for (std::size_t i = 0; i < j.size(); ++i) numeric_leaves(j[i], at + "/" + std::to_string(i), out);
  } else if (j.is_number()) {
    out.push_back(at);
  }
}

bool contains(const std::vector<std::string>& v, const std::string& x) {
  return std::find(v.begin(), v.end(), x) != v.end();
}

std::vector<ConstraintId> ids_of(const ConstraintSet& c) {
  std::vector<ConstraintId> out;
  for (const auto& a : c) out.push_back(a.id);
  return out;
}

std::pair<bool, std::string> episode() {
  const auto t0 = std::chrono::steady_clock::now();
  Session s("acceptance", load_scenario_file(kScenarioPath));
  s.run(1000);
  const Trace trace = s.trace();
  const auto* r = get_at(trace, kTriggerTick);
  if (!r) return {false, "no record at the trigger tick"};
  const auto why = explain(*r, parse("why"), DialogueMemory{}, *r->state.params).first;
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const bool one_visibility = r->active.size() == 1 && r->active[0].id == ConstraintId::Visibility;
  const double v = one_visibility ? r->active[0].measured : -1;
  const bool cites = why.cited.size() == 1 && why.cited[0].id == ConstraintId::Visibility &&
                     contains(why.cited[0].subjects, "forklift1") &&
                     why.text.find("forklift1") != std::string::npos;
  const bool pass = one_visibility && std::abs(v - 0.52) <= 0.005 && r->active[0].threshold == 0.6 &&
                    r->selected == Behavior::Pause && cites && secs < 5.0;
  return {pass, fmt("tick %lld v=%.3f threshold=%.2f selected=%s why cites forklift1=%s runtime=%.2fs", r->tick, v,
                    one_visibility ? r->active[0].threshold : -1.0, std::string(to_string(r->selected)).c_str(),
                    cites ? "yes" : "no", secs)};
}

std::pair<bool, std::string> proximity() {
  std::string detail;
  bool pass = true;
  for (const auto& [d, want] : {std::pair{1.4, Behavior::Stop}, {1.6, Behavior::Continue}, {1.5, Behavior::Continue}}) {
    const auto r = make_decision(make_state({d, 0}), Behavior::Continue);
    pass = pass && r.selected == want;
    detail += fmt("%.1f m->%s ", d, std::string(to_string(r.selected)).c_str());
  }
  return {pass, detail};
}

std::pair<bool, std::string> recovery() {
  Session paused("acceptance", load_scenario_file(kScenarioPath));
  paused.run(kTriggerTick);
  const auto offer = std::get<Explanation>(paused.ask("what if guide right"));
  const bool offer_ok = offer.verdict && offer.verdict->behavior == Behavior::ManualFollow;

  // The scripted worker stands in the right zone from tick 109.
  Session near("acceptance", load_scenario_file(kScenarioPath));
  near.run(109);
  const SafetyState& ns = near.current_state();
  const double near_d = distance(ns.human.position, ns.robot.position);
  const bool placed = oracle_in_zone(ns);
  const auto ok = near.command(Behavior::ManualFollow);

  Session far("acceptance", load_scenario_file(kScenarioPath));
  far.run(86);
  const auto no = far.command(Behavior::ManualFollow);
  const double far_d = distance(no.record.state.human.position, no.record.state.robot.position);
  const bool refused = !no.accepted && std::abs(far_d - 3.0) <= 0.01 &&
                       std::find(no.explanation.unmet.begin(), no.explanation.unmet.end(),
                                 ConstraintId::GuidanceZone) != no.explanation.unmet.end();

  const bool pass = offer_ok && placed && near_d <= 1.0 && ok.accepted && ok.record.selected == Behavior::ManualFollow &&
                    refused;
  return {pass, fmt("whatif->%s; in zone at %.2f m->%s; at %.2f m->%s citing guidance_zone=%s",
                    offer.verdict ? std::string(to_string(offer.verdict->behavior)).c_str() : "none", near_d,
                    ok.accepted ? "accepted" : "refused", far_d, no.accepted ? "accepted" : "refused",
                    refused ? "yes" : "no")};
}

std::pair<bool, std::string> counterfactuals() {
  std::mt19937_64 rng(20261018);
  int compared = 0, conflicts = 0, hash_changes = 0, mismatches = 0, skipped = 0;
  for (int i = 0; compared < 10000 && i < 40000; ++i) {
    const auto p = i % 2 ? default_params() : random_params(rng);
    const std::string hash_before = params_hash(*p);
    const DecisionRecord r = random_record(rng, p);
    const auto deltas = random_deltas(rng, r.state);
    Explanation e;
    try {
      e = answer_what_if(r, deltas, *p);
    } catch (const Error& err) {
      if (err.code() != ErrorCode::Conflict || !conflicting(deltas)) ++mismatches;
      ++conflicts;
      continue;
    }
    hash_changes += params_hash(*p) != hash_before || params_hash(*r.state.params) != hash_before;
    const auto oracle = oracle_what_if(r, deltas);
    if (!oracle) {
      ++skipped;
      continue;
    }
    std::vector<ConstraintId> got = ids_of(e.verdict->active);
    std::sort(got.begin(), got.end());
    mismatches += e.verdict->behavior != oracle->first || got != oracle->second;
    ++compared;
  }
  const bool pass = compared >= 10000 && hash_changes == 0 && mismatches == 0;
  return {pass, fmt("%d compared, %d hash changes, %d mismatches (%d conflicting, %d on a boundary)", compared,
                    hash_changes, mismatches, conflicts, skipped)};
}

std::pair<bool, std::string> arbitration() {
  const SafetyParams p;
  int cases = 0, violations = 0;
  for (int mask = 0; mask < 8; ++mask) {
    ConstraintSet active;
    for (int i = 0; i < 3; ++i)
      if (mask & (1 << i)) active.push_back({kAllConstraints[i], 0.0, 1.0, -1.0, {}});
    const bool prox = mask & 1, vis = mask & 2;
    for (Behavior n : kAllBehaviors) {
      // Priority-maximal mapping, unguided: proximity beats visibility; the
      // zone alone leaves the nominal action, which manual-follow cannot be.
      const Behavior want = prox ? Behavior::Stop
                            : vis ? Behavior::Pause
                            : n == Behavior::ManualFollow ? Behavior::Pause
                                                          : n;
      violations += select_behavior(active, n, p) != want;
      ++cases;
    }
  }
  return {cases == 40 && violations == 0, fmt("%d cases, %d violations", cases, violations)};
}

std::pair<bool, std::string> self_certification() {
  const auto replay = run_command(quote(kCli) + " replay --verify --trace " + quote(kGoldenTrace));
  const auto out = lines_of(replay.out);
  const bool golden_ok = replay.exit_code == 0 && !out.empty() && out.back() == "PASS 150/150 records";

  // Every numeric field of every line, nudged one at a time.
  const auto lines = lines_of(read_file(kGoldenTrace));
  int edits = 0, local = 0, envelope = 0, header = 0, bad = 0;
  for (std::size_t li = 0; li < lines.size(); ++li) {
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
        bool exact = li > 0 && rep.records.size() == lines.size() - 1;
        for (const auto& r : rep.records) exact = exact && r.pass == (r.line != li + 1);
        exact ? ++local : ++bad;
      } catch (const Error& e) {
        // A header the reader cannot accept at all (schema version) rejects the whole file.
        if (e.code() == ErrorCode::EnvelopeViolation) ++envelope;
        else if (li == 0 && e.code() == ErrorCode::Format) ++header;
        else ++bad;
      }
    }
  }

  // The same through the replay tool: a record edit and a header edit.
  const auto dir = std::filesystem::temp_directory_path() / ("safex-acceptance-" + std::to_string(getpid()));
  std::filesystem::create_directories(dir);
  auto copy = lines;
  json rec = json::parse(copy[kTriggerTick]);
  rec["state"]["env"]["visibility"]["worker1"] = 0.9;
  copy[kTriggerTick] = rec.dump();
  write_file((dir / "record.jsonl").string(), join_lines(copy));
  const auto rec_run = run_command(quote(kCli) + " replay --verify --trace " + quote((dir / "record.jsonl").string()));
  int rec_fails = 0;
  bool rec_at = false;
  for (const auto& l : lines_of(rec_run.out))
    if (l.find(" FAIL") != std::string::npos) {
      ++rec_fails;
      rec_at = l.rfind(fmt("line %lld tick %lld FAIL", kTriggerTick + 1, kTriggerTick), 0) == 0;
    }
  copy = lines;
  json h = json::parse(copy[0]);
  h["params"]["d_min"] = 1.0;
  copy[0] = h.dump();
  write_file((dir / "header.jsonl").string(), join_lines(copy));
  const auto hdr_run =
      run_command(quote(kCli) + " replay --verify --trace " + quote((dir / "header.jsonl").string()), true);
  std::filesystem::remove_all(dir);
  const bool tool_ok = rec_run.exit_code == 1 && rec_fails == 1 && rec_at && hdr_run.exit_code == 2 &&
                       hdr_run.out.find("envelope") != std::string::npos;

  const bool pass = golden_ok && bad == 0 && tool_ok;
  return {pass, fmt("golden %s; %d single-field edits: %d fail at that record, %d envelope violations, "
                    "%d unreadable header, %d missed; replay tool %s",
                    golden_ok ? "PASS 150/150" : "not verified", edits, local, envelope, header, bad,
                    tool_ok ? "agrees" : "disagrees")};
}

std::pair<bool, std::string> determinism() {
  const auto dir = std::filesystem::temp_directory_path() / ("safex-determinism-" + std::to_string(getpid()));
  std::filesystem::create_directories(dir);
  const std::string a = (dir / "a.jsonl").string(), b = (dir / "b.jsonl").string();
  const auto ra = run_command(quote(kCli) + " run --scenario " + quote(kScenarioPath) + " --trace " + quote(a));
  const auto rb = run_command(quote(kCli) + " run --scenario " + quote(kScenarioPath) + " --trace " + quote(b));
  const std::string ta = read_file(a), tb = read_file(b);
  std::filesystem::remove_all(dir);
  const bool pass = ra.exit_code == 0 && rb.exit_code == 0 && !ta.empty() && ta == tb && ra.out == rb.out;
  return {pass, fmt("two runs, %zu bytes each, %s; golden %s", ta.size(), ta == tb ? "identical" : "different",
                    ta == read_file(kGoldenTrace) ? "matches" : "differs")};
}

std::pair<bool, std::string> parser() {
  int paired = 0, corpus_bad = 0;
  for (const auto& [text, structured] : corpus()) {
    if (structured.is_null()) continue;
    const QueryAST a = parse(text), b = parse_structured(structured);
    corpus_bad += !(a == b) || to_json(a) != to_json(b);
    ++paired;
  }
  std::mt19937_64 rng(20261018);
  const std::string alphabet = "abcdefghijklmnopqrstuvwxyz ()-.,+0123456789_\t?;!\"'\\\x01\xff";
  int parsed = 0, diagnostics = 0, escaped = 0;
  for (int i = 0; i < 100000; ++i) {
    std::string s(rng() % 24, ' ');
    for (auto& c : s) c = alphabet[rng() % alphabet.size()];
    try {
      parse(s);
      ++parsed;
    } catch (const Error& e) {
      e.code() == ErrorCode::Parse ? ++diagnostics : ++escaped;
    } catch (...) {
      ++escaped;
    }
  }
  const bool pass = paired >= 30 && corpus_bad == 0 && escaped == 0;
  return {pass, fmt("corpus %d pairs, %d mismatches; fuzz 100000 strings: %d parsed, %d diagnostics, %d other",
                    paired, corpus_bad, parsed, diagnostics, escaped)};
}

std::pair<bool, std::string> groundedness() {
  std::mt19937_64 rng(20261018);
  int violations = 0, why_cited = 0, why_not_cited = 0;
  for (int i = 0; i < 1000; ++i) {
    const auto p = i % 2 ? default_params() : random_params(rng);
    const DecisionRecord r = random_record(rng, p);
    for (const auto& c : answer_why(r, *p).cited) {
      ++why_cited;
      violations += std::find(r.active.begin(), r.active.end(), c) == r.active.end();
    }
    const auto wn = answer_why_not(r, random_behavior(rng), *p);
    for (const auto& c : wn.cited) {
      ++why_not_cited;
      bool holds = std::find(r.active.begin(), r.active.end(), c) != r.active.end();
      switch (c.id) {
        case ConstraintId::Proximity: holds = holds && oracle_proximity(r.state); break;
        case ConstraintId::Visibility: holds = holds && oracle_visibility_low(r.state); break;
        case ConstraintId::GuidanceZone: holds = false; break;
      }
      violations += !holds;
    }
  }
  return {violations == 0, fmt("1000 records, %d why citations, %d why-not citations, %d violations", why_cited,
                               why_not_cited, violations)};
}

}  // namespace

int main() {
  check("episode reproduction", episode);
  check("proximity rule", proximity);
  check("recovery path", recovery);
  check("counterfactual boundedness", counterfactuals);
  check("arbitration dominance", arbitration);
  check("trace self-certification", self_certification);
  check("determinism", determinism);
  check("parser totality", parser);
  check("explanation groundedness", groundedness);
  std::printf("%s: %d of 9 criteria failed\n", failures ? "FAIL" : "PASS", failures);
  return failures ? 1 : 0;
}
