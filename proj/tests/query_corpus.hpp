#pragma once

// Paired query corpus: text form and the structured form the console would
// send for it. A null structured form marks text outside the grammar.

#include "safex/query.hpp"

#include <string>
#include <vector>

namespace safex::testing {

struct Pair {
  std::string text;
  json structured;
};

// Text form, the structured form the console would send for it.
const std::vector<Pair>& corpus() {
  static const std::vector<Pair> c = {
      {"why", {{"type", "why"}}},
      {"Why?", {}},  // "?" is outside the grammar
      {"why stop", {{"type", "why"}, {"target", "proximity"}}},
      {"why pause", {{"type", "why"}, {"target", "visibility"}}},
      {"WHY SLOW", {{"type", "why"}, {"target", "visibility"}}},
      {"why follow", {{"type", "why"}, {"target", "guidance_zone"}}},
      {"why at 32", {{"type", "why"}, {"at", 32}}},
      {"why not continue", {{"type", "whynot"}, {"behavior", "continue"}}},
      {"whynot manual", {{"type", "whynot"}, {"behavior", "manual"}}},
      {"why not slowdown at 7", {{"type", "whynot"}, {"behavior", "slowdown"}, {"at", 7}}},
      {"Why Not Pause", {{"type", "whynot"}, {"behavior", "pause"}}},
      {"why not stop", {{"type", "whynot"}, {"behavior", "stop"}}},
      {"what if worker back 2", {{"type", "whatif"}, {"deltas", {{{"op", "worker_back"}, {"meters", 2}}}}}},
      {"whatif worker back 2.5", {{"type", "whatif"}, {"deltas", {{{"op", "worker_back"}, {"meters", 2.5}}}}}},
      {"what if worker to (3, -1)", {{"type", "whatif"}, {"deltas", {{{"op", "worker_to"}, {"x", 3}, {"y", -1}}}}}},
      {"what if worker to 3 -1", {{"type", "whatif"}, {"deltas", {{{"op", "worker_to"}, {"x", 3}, {"y", -1}}}}}},
      {"what if worker distance 1.6",
       {{"type", "whatif"}, {"deltas", {{{"op", "worker_distance"}, {"meters", 1.6}}}}}},
      {"what if remove forklift1", {{"type", "whatif"}, {"deltas", {{{"op", "remove"}, {"id", "forklift1"}}}}}},
      {"what if remove it", {{"type", "whatif"}, {"deltas", {{{"op", "remove"}, {"id", "it"}}}}}},
      {"what if move forklift1 by (0, -2)",
       {{"type", "whatif"}, {"deltas", {{{"op", "move"}, {"id", "forklift1"}, {"dx", 0}, {"dy", -2}}}}}},
      {"what if move it by 1,1", {{"type", "whatif"}, {"deltas", {{{"op", "move"}, {"id", "it"}, {"dx", 1}, {"dy", 1}}}}}},
      {"what if move worker by (0.5, 0)",
       {{"type", "whatif"}, {"deltas", {{{"op", "worker_by"}, {"dx", 0.5}, {"dy", 0}}}}}},
      {"what if guide right", {{"type", "whatif"}, {"deltas", {{{"op", "guide"}, {"side", "right"}}}}}},
      {"what if guide left at 110", {{"type", "whatif"}, {"deltas", {{{"op", "guide"}, {"side", "left"}}}}, {"at", 110}}},
      {"what if visibility 0.9", {{"type", "whatif"}, {"deltas", {{{"op", "visibility"}, {"value", 0.9}}}}}},
      {"what if remove forklift1 and worker back 1",
       {{"type", "whatif"},
        {"deltas", {{{"op", "remove"}, {"id", "forklift1"}}, {{"op", "worker_back"}, {"meters", 1}}}}}},
      {"what if guide right and move forklift1 by (0, -3)",
       {{"type", "whatif"},
        {"deltas", {{{"op", "guide"}, {"side", "right"}}, {{"op", "move"}, {"id", "forklift1"}, {"dx", 0}, {"dy", -3}}}}}},
      {"was it forklift1", {{"type", "confirm"}, {"referent", "forklift1"}}},
      {"was it it", {{"type", "confirm"}, {"referent", "it"}}},
      {"was it worker1 at 32", {{"type", "confirm"}, {"referent", "worker1"}, {"at", 32}}},
      {"was it Forklift_2", {{"type", "confirm"}, {"referent", "Forklift_2"}}},
      {"do it", {{"type", "command"}}},
      {"follow", {{"type", "command"}, {"behavior", "manual"}}},
      {"resume", {{"type", "command"}, {"behavior", "continue"}}},
      {"  why   not\tcontinue  ", {{"type", "whynot"}, {"behavior", "continue"}}},
  };
  return c;
}

}  // namespace safex::testing
