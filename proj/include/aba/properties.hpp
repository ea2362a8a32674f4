#pragma once

#include <optional>
#include <string>
#include <vector>

#include "aba/trace.hpp"

namespace aba {

// Outcome of one checker over one trace. A failing verdict always carries a
// witness string with the seed and the event steps needed to replay and
// inspect the violation.
struct PropertyVerdict {
  std::string name;
  bool holds = true;
  std::string witness;
};

// Which checker families to evaluate. Families map to protocol layers, not
// individual checkers, so a selection stays meaningful across protocols:
// a family that does not apply to a trace contributes no verdicts.
struct CheckSelection {
  bool broadcast = false;  // accept agreement / dealer validity
  bool mw = false;         // moderated share sessions, incl. children
  bool svss = false;       // bivariate share sessions, incl. children
  bool coin = false;       // per-session coin checks
  bool ba = false;         // agreement, validity, round ordering, halting
  bool filter = false;     // distrust soundness, holds, expectation liveness
  bool coin_freq = false;  // campaign-level statistic; invalid per trace

  static CheckSelection all();
  static CheckSelection none();
  // The families that can produce verdicts for a protocol's traces.
  static CheckSelection for_protocol(Protocol p);
  // "all", "none", or a comma list of family names (e.g. "mw,svss,filter").
  // Throws std::invalid_argument on unknown names.
  static CheckSelection parse(const std::string& spec);

  bool any() const;
  std::string to_string() const;
};

// Evaluates every selected per-trace checker. Checkers are pure functions
// of the trace; nothing is re-simulated. Event-based checkers are skipped
// when the trace was captured without events (callers that need them run
// their campaigns with capture on); verdicts that would be vacuous for the
// trace's protocol are omitted entirely.
//
// Throws std::invalid_argument if the selection requests the coin-frequency
// statistic: frequencies are a property of a seed campaign, not of a trace.
std::vector<PropertyVerdict> check_trace(const Trace& tr,
                                         const CheckSelection& sel);

// True when process i stops acting on j's traffic from session s onward:
// i forwarded at least one of j's messages tagged with s (or a session
// nested under s), and in every session i started after finishing s, all of
// j's messages were discarded, delayed forever, or never sent. Requires
// event capture.
bool shun_starts_in(const Trace& tr, unsigned i, unsigned j, uint64_t session);

// The earliest session (in i's start order) satisfying shun_starts_in, or
// nullopt when i never added j to its distrust set. Requires event capture.
std::optional<uint64_t> detect_shun_start(const Trace& tr, unsigned i,
                                          unsigned j);

}  // namespace aba
