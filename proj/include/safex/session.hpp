#pragma once

// Session orchestration: the tick loop (step -> decide -> append -> publish),
// queries against the trace, and commands. All operations on one session are
// serialized by its mutex; sessions are independent of each other.

#include "safex/explain.hpp"
#include "safex/scenario_io.hpp"
#include "safex/trace_store.hpp"
#include "safex/world_sim.hpp"

#include <chrono>
#include <condition_variable>
#include <cstdio>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <variant>

namespace safex {

enum class RunStatus { Idle, Running, Finished };

constexpr std::string_view to_string(RunStatus s) {
  switch (s) {
    case RunStatus::Idle: return "idle";
    case RunStatus::Running: return "running";
    case RunStatus::Finished: return "finished";
  }
  return "?";
}

/// One published stream event. `seq` is dense per session.
struct StreamEvent {
  std::uint64_t seq = 0;
  std::string type;  // "tick" | "explanation" | "command"
  json data;
};

inline json tick_event(const DecisionRecord& r) {
  return json{{"tick", r.tick},
              {"state", to_json(r.state)},
              {"nominal", std::string(to_string(r.nominal))},
              {"selected", std::string(to_string(r.selected))},
              {"guided", r.guided},
              {"active", to_json(r.active)}};
}

/// Outcome of a command: the record it produced and the ack/refusal.
struct CommandResult {
  bool accepted = false;
  DecisionRecord record;
  Explanation explanation;
};

/// Result of ask(): text queries that parse to a command are executed.
using AskResult = std::variant<Explanation, CommandResult>;

/// Bounded event log. Consumers that fall more than `capacity` events behind
/// skip ahead to what is retained; the producer never blocks.
class EventLog {
public:
  explicit EventLog(std::size_t capacity = 4096) : capacity_(capacity) {}

  void publish(std::string type, json data) {
    {
      std::lock_guard lock(mu_);
      events_.push_back({next_seq_++, std::move(type), std::move(data)});
      while (events_.size() > capacity_) events_.pop_front();
    }
    cv_.notify_all();
  }

  /// Events with seq >= from, waiting up to `timeout` when none are ready yet.
  std::vector<StreamEvent> read_from(std::uint64_t from, std::chrono::milliseconds timeout) {
    std::unique_lock lock(mu_);
    cv_.wait_for(lock, timeout, [&] { return next_seq_ > from || closed_; });
    std::vector<StreamEvent> out;
    for (const auto& e : events_)
      if (e.seq >= from) out.push_back(e);
    return out;
  }

  std::uint64_t next_seq() const {
    std::lock_guard lock(mu_);
    return next_seq_;
  }

  void close() {
    {
      std::lock_guard lock(mu_);
      closed_ = true;
    }
    cv_.notify_all();
  }

  bool closed() const {
    std::lock_guard lock(mu_);
    return closed_;
  }

private:
  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::deque<StreamEvent> events_;
  std::uint64_t next_seq_ = 0;
  std::size_t capacity_;
  bool closed_ = false;
};

class Session {
public:
  Session(std::string id, Scenario scenario)
      : id_(std::move(id)),
        scenario_(std::move(scenario)),
        world_(initial_world(scenario_)),
        trace_(id_, scenario_.params) {
    memory_.session_id = id_;
  }

  const std::string& id() const { return id_; }

  /// Runs up to n ticks. Past the horizon the session turns Finished and the
  /// remaining ticks are no-ops.
  std::vector<DecisionRecord> run(long long n) {
    std::lock_guard lock(mu_);
    std::vector<DecisionRecord> out;
    for (long long i = 0; i < n; ++i) {
      if (world_.tick >= scenario_.horizon) {
        status_ = RunStatus::Finished;
        break;
      }
      status_ = RunStatus::Running;
      out.push_back(tick_locked());
    }
    if (world_.tick >= scenario_.horizon) status_ = RunStatus::Finished;
    return out;
  }

  /// Answers a query against record `at` (or the latest). Never advances the
  /// world, except that a parsed command is executed as a command.
  AskResult ask(const QueryAST& q) {
    if (const auto* c = std::get_if<query::Command>(&q.kind)) {
      std::lock_guard lock(mu_);
      return command_locked(resolve_command(*c));
    }
    std::lock_guard lock(mu_);
    const DecisionRecord& record = record_for(q.at);
    auto [e, next] = explain(record, q, memory_, *trace_.params);
    memory_ = std::move(next);
    events_.publish("explanation", to_json(e));
    return e;
  }

  AskResult ask(std::string_view text) { return ask(parse(text)); }

  /// ManualFollow is accepted iff the guidance zone holds in the state as it
  /// stands now; Continue iff nothing blocks it now. Either way one record is
  /// appended (nominal = the commanded behavior).
  CommandResult command(Behavior b) {
    std::lock_guard lock(mu_);
    return command_locked(b);
  }

  RunStatus status() const {
    std::lock_guard lock(mu_);
    return status_;
  }

  SafetyState current_state() const {
    std::lock_guard lock(mu_);
    return snapshot(world_);
  }

  Trace trace() const {
    std::lock_guard lock(mu_);
    return trace_;
  }

  DialogueMemory memory() const {
    std::lock_guard lock(mu_);
    return memory_;
  }

  bool stop_latched() const {
    std::lock_guard lock(mu_);
    return stop_latched_;
  }

  json state_json() const {
    std::lock_guard lock(mu_);
    json j{{"session_id", id_},
           {"status", std::string(to_string(status_))},
           {"tick", world_.tick},
           {"horizon", scenario_.horizon},
           {"mode", std::string(to_string(world_.robot.mode))},
           {"stop_latched", stop_latched_},
           {"params", to_json(*trace_.params)},
           {"params_hash", trace_.params_hash},
           {"state", to_json(snapshot(world_))},
           {"records", trace_.records.size()}};
    if (const auto* r = latest(trace_)) j["latest"] = tick_event(*r);
    return j;
  }

  EventLog& events() { return events_; }

private:
  // Stop is latched until an accepted command; Pause clears on its own. While
  // latched the task policy holds the robot, so the nominal action is Stop.
  Behavior nominal_now() const { return stop_latched_ ? Behavior::Stop : nominal_at(world_, scenario_); }

  DecisionRecord tick_locked() {
    const bool guided = world_.robot.mode == Behavior::ManualFollow;
    const SafetyState s = step(world_, scenario_);
    return commit(make_decision(s, nominal_now(), guided), "tick");
  }

  DecisionRecord commit(DecisionRecord r, const char* event_type) {
    world_.robot.mode = r.selected;
    if (r.selected == Behavior::Stop) stop_latched_ = true;
    append(trace_, r);
    events_.publish(event_type, tick_event(r));
    return r;
  }

  Behavior resolve_command(const query::Command& c) const {
    if (c.behavior) return *c.behavior;
    if (memory_.last_whatif &&
        (memory_.last_whatif->verdict == Behavior::ManualFollow || memory_.last_whatif->verdict == Behavior::Continue))
      return memory_.last_whatif->verdict;
    throw Error(ErrorCode::Referent, "'do it' needs a preceding what-if whose verdict can be executed", "do it");
  }

  CommandResult command_locked(Behavior b) {
    if (b != Behavior::ManualFollow && b != Behavior::Continue)
      throw Error(ErrorCode::Validation, "only manual and continue can be commanded", "behavior");
    if (world_.tick >= scenario_.horizon) {
      status_ = RunStatus::Finished;
      throw Error(ErrorCode::EndOfScenario, "session is finished", "tick");
    }
    const SafetyState s = hold(world_, scenario_);
    DecisionRecord r = make_decision(s, b, b == Behavior::ManualFollow);
    CommandResult out;
    out.accepted = r.selected == b;
    if (out.accepted) stop_latched_ = false;
    out.record = commit(std::move(r), "command");
    out.explanation = answer_command(out.record, b, *trace_.params);
    out.explanation.text = render(out.explanation, memory_);
    events_.publish("explanation", to_json(out.explanation));
    status_ = world_.tick >= scenario_.horizon ? RunStatus::Finished : RunStatus::Running;
    return out;
  }

  const DecisionRecord& record_for(std::optional<long long> at) const {
    if (!at) {
      if (const auto* r = latest(trace_)) return *r;
      throw Error(ErrorCode::UnknownTick, "the trace has no records yet", "at");
    }
    if (const auto* r = get_at(trace_, *at)) return *r;
    std::string near;
    for (auto t : nearest_ticks(trace_, *at)) near += (near.empty() ? "" : ", ") + std::to_string(t);
    throw Error(ErrorCode::UnknownTick,
                "no record at tick " + std::to_string(*at) + (near.empty() ? "" : "; nearest recorded ticks: " + near),
                "at");
  }

  mutable std::mutex mu_;
  std::string id_;
  Scenario scenario_;
  WorldState world_;
  Trace trace_;
  DialogueMemory memory_;
  RunStatus status_ = RunStatus::Idle;
  bool stop_latched_ = false;
  EventLog events_;
};

/// Owns all sessions. Ids are sequential ("s0001", ...).
class SessionManager {
public:
  std::string create(Scenario sc) {
    std::lock_guard lock(mu_);
    char buf[32];
    std::snprintf(buf, sizeof buf, "s%04llu", static_cast<unsigned long long>(++counter_));
    std::string id = buf;
    sessions_.emplace(id, std::make_shared<Session>(id, std::move(sc)));
    return id;
  }

  std::string create(const std::string& scenario_yaml) { return create(load_scenario(scenario_yaml)); }

  std::shared_ptr<Session> get(const std::string& id) const {
    std::lock_guard lock(mu_);
    auto it = sessions_.find(id);
    if (it == sessions_.end()) throw Error(ErrorCode::Referent, "unknown session '" + id + "'", "session_id");
    return it->second;
  }

  void close_all() {
    std::lock_guard lock(mu_);
    for (auto& [id, s] : sessions_) s->events().close();
  }

private:
  mutable std::mutex mu_;
  std::uint64_t counter_ = 0;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
};

}  // namespace safex
