// safex: run scenarios, interrogate and verify traces, validate scenario files.
//
// Exit codes: 0 success, 1 validation error (bad input, unknown tick, failed
// verification), 2 runtime error (envelope/integrity violations, I/O).

#include "safex/session.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

namespace {

using namespace safex;

int exit_code(ErrorCode c) {
  switch (c) {
    case ErrorCode::EnvelopeViolation:
    case ErrorCode::Integrity:
    case ErrorCode::EndOfScenario: return 2;
    default: return 1;
  }
}

int report(const Error& e) {
  std::cerr << "error: " << to_string(e.code());
  if (!e.path().empty()) std::cerr << " at " << e.path();
  std::cerr << ": " << e.what() << "\n";
  return exit_code(e.code());
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Validation, "cannot open '" + path + "'", path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string summary_line(const DecisionRecord& r) {
  std::string active;
  for (const auto& c : r.active) active += (active.empty() ? "" : ",") + std::string(to_string(c.id));
  if (active.empty()) active = "-";
  char buf[256];
  std::snprintf(buf, sizeof buf, "tick=%lld d=%.2f v=%.2f active=%s selected=%s", r.tick,
                distance(r.state.human.position, r.state.robot.position), r.state.worker_visibility(), active.c_str(),
                std::string(to_string(r.selected)).c_str());
  return buf;
}

int cmd_run(const std::string& scenario_path, std::optional<long long> ticks, const std::string& trace_path, bool as_json) {
  Scenario sc = load_scenario_file(scenario_path);
  const long long n = ticks.value_or(sc.horizon);
  if (n < 0) throw Error(ErrorCode::Validation, "--ticks must be >= 0", "--ticks");
  const std::string id = "run-" + sc.name;
  Session session(id, std::move(sc));
  const auto records = session.run(n);
  for (const auto& r : records) std::cout << (as_json ? to_json(r).dump() : summary_line(r)) << "\n";
  std::ofstream out(trace_path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Validation, "cannot write trace '" + trace_path + "'", trace_path);
  out << serialize(session.trace());
  if (!out.flush()) throw Error(ErrorCode::Integrity, "failed writing trace '" + trace_path + "'", trace_path);
  return 0;
}

int cmd_ask(const std::string& trace_path, std::optional<long long> at, const std::vector<std::string>& queries,
            bool as_json) {
  const Trace trace = deserialize(read_file(trace_path));
  DialogueMemory memory;
  memory.session_id = trace.session_id;
  for (const auto& text : queries) {
    QueryAST q = parse(text);
    if (std::holds_alternative<query::Command>(q.kind))
      throw Error(ErrorCode::Validation, "commands need a live session; a recorded trace cannot be commanded", "--query");
    if (!q.at) q.at = at;
    const DecisionRecord* record = q.at ? get_at(trace, *q.at) : latest(trace);
    if (!record) {
      if (!q.at) throw Error(ErrorCode::UnknownTick, "the trace has no records", "--at");
      std::string near;
      for (auto t : nearest_ticks(trace, *q.at)) near += (near.empty() ? "" : ", ") + std::to_string(t);
      throw Error(ErrorCode::UnknownTick,
                  "no record at tick " + std::to_string(*q.at) + (near.empty() ? "" : "; nearest recorded ticks: " + near),
                  "--at");
    }
    auto [e, next] = explain(*record, q, memory, *trace.params);
    memory = std::move(next);
    std::cout << (as_json ? to_json(e).dump() : e.text) << "\n";
  }
  return 0;
}

int cmd_replay(const std::string& trace_path, bool verify) {
  const std::string bytes = read_file(trace_path);
  if (!verify) {
    const Trace t = deserialize(bytes);
    std::cout << "session " << t.session_id << " " << t.params_hash << " records=" << t.records.size() << "\n";
    for (const auto& r : t.records) std::cout << summary_line(r) << "\n";
    return 0;
  }
  const VerifyReport rep = verify_trace(bytes);
  std::size_t failed = 0;
  for (const auto& v : rep.records) {
    std::cout << "line " << v.line << " tick " << (v.tick ? std::to_string(*v.tick) : std::string("?")) << " "
              << (v.pass ? "PASS" : "FAIL: " + v.reason) << "\n";
    failed += !v.pass;
  }
  std::cout << (failed ? "FAIL" : "PASS") << " " << rep.records.size() - failed << "/" << rep.records.size()
            << " records\n";
  return failed ? 1 : 0;
}

int cmd_validate(const std::string& scenario_path) {
  const Scenario sc = load_scenario_file(scenario_path);
  std::cout << scenario_to_yaml(sc) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"safex: constraint-grounded safety explanations"};
  app.require_subcommand(1);

  std::string scenario, trace;
  std::optional<long long> ticks, at;
  std::vector<std::string> queries;
  bool as_json = false, verify = false;

  auto* run = app.add_subcommand("run", "simulate a scenario and write its trace");
  run->add_option("--scenario", scenario)->required();
  run->add_option("--ticks", ticks, "ticks to run (default: scenario horizon)");
  run->add_option("--trace", trace)->required();
  run->add_flag("--json", as_json, "print records as JSON lines");

  auto* ask = app.add_subcommand("ask", "answer queries against a recorded trace");
  ask->add_option("--trace", trace)->required();
  ask->add_option("--at", at, "tick (default: latest record)");
  ask->add_option("--query", queries)->required()->take_all();
  ask->add_flag("--json", as_json, "print explanations as JSON");

  auto* replay = app.add_subcommand("replay", "read a trace back, optionally re-deriving every record");
  replay->add_option("--trace", trace)->required();
  replay->add_flag("--verify", verify);

  auto* validate = app.add_subcommand("validate", "check a scenario file and print it normalized");
  validate->add_option("--scenario", scenario)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (*run) return cmd_run(scenario, ticks, trace, as_json);
    if (*ask) return cmd_ask(trace, at, queries, as_json);
    if (*replay) return cmd_replay(trace, verify);
    return cmd_validate(scenario);
  } catch (const Error& e) {
    return report(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
