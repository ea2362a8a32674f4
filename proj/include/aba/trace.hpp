#pragma once

#include <cstdint>
#include <deque>
#include <iosfwd>
#include <vector>

#include "aba/config.hpp"
#include "aba/msg.hpp"

namespace aba {

enum class EventKind : uint8_t {
  Send,             // process emitted an envelope (peer = receiver)
  Deliver,          // scheduler delivered an envelope (peer = sender)
  Discard,          // inbound protocol message dropped (sender distrusted)
  Delay,            // inbound protocol message held back by a pending tuple
  Forward,          // inbound protocol message passed to its session
  ShunAdd,          // peer entered this process's distrust set
  SessionStart,     // process took its first action in a session
  SessionComplete,  // process completed a session's share phase
  Output,           // process produced a session output (value or bottom)
  Malformed,        // inbound message failed shape validation; ignored
};

const char* event_kind_name(EventKind k);

constexpr uint32_t kNoPayload = ~0u;
constexpr uint32_t kNoEnvelope = ~0u;
constexpr uint64_t kNoValue = ~0ULL;  // also encodes a bottom output

// One trace record. `value` is overloaded per kind: the produced value for
// Output (kNoValue = bottom), and for Forward/Discard of a previously
// delayed message, the step index of its Delay event (kNoValue = message
// was never delayed).
struct Event {
  EventKind kind;
  uint8_t process;      // acting process
  uint8_t peer;         // counterparty, 0 = none
  uint8_t dealer;       // session dealer
  Transport transport;  // for Send/Deliver
  uint32_t step;        // global index == position in the event list
  uint32_t payload;     // index into Trace::payloads, kNoPayload = none
  uint32_t envelope;    // envelope id for Send/Deliver, else kNoEnvelope
  uint64_t session;     // session counter c, 0 = none
  uint64_t value;
};

enum class Outcome : uint8_t {
  Completed,  // every nonfaulty process terminated its top-level protocol
  Quiescent,  // no deliverable traffic remained but some process is stuck
  Cutoff,     // max-events bound hit
};

const char* outcome_name(Outcome o);

// Distrust additions and end-of-run leftover expectations are recorded even
// when event capture is off: the safety checkers that large summary-only
// campaigns rely on (distrust soundness, shun budgets, expectation liveness)
// need them, and they are tiny compared to the event stream.
struct ShunRecord {
  uint8_t process;   // who added the entry to its distrust set
  uint8_t peer;      // who entered it
  uint64_t session;  // session of the offending broadcast
  uint32_t step;
};

struct LeftoverExpectation {
  uint8_t process;  // whose table the entry sits in
  uint8_t sender;   // who still owes the matching broadcast
  uint8_t row;
  uint8_t side;  // 0 = ack-side, 1 = deal-side
  uint64_t session;
};

// Per-run results that are kept even when event capture is off. Outputs are
// indexed by process id (0 = unused); kNoValue means no output / bottom
// (Output events disambiguate: a process with no Output event terminated
// without producing a value, which only happens for non-vss protocols).
struct Trace {
  RunConfig config;
  Outcome outcome = Outcome::Cutoff;
  uint64_t total_steps = 0;

  // Values actually used after seed derivation.
  uint64_t secret = 0;
  uint64_t moderator_value = 0;
  std::vector<uint8_t> ba_inputs;

  std::deque<Msg> payloads;
  std::vector<Event> events;  // empty when capture was off

  // Top-level outputs per process (index 1..n): the accepted broadcast
  // value, vss reconstruction (kNoValue = bottom), coin bit, or ba decision.
  std::vector<uint64_t> outputs;

  std::vector<ShunRecord> shuns;
  std::vector<LeftoverExpectation> leftovers;  // live expectations at the end
  uint32_t ba_rounds = 0;  // highest round a nonfaulty process entered

  bool has_events() const { return !events.empty(); }

  void append(Event e) {
    e.step = static_cast<uint32_t>(total_steps);
    if (config.capture_events) events.push_back(e);
    ++total_steps;
  }

  // Text export: '#'-prefixed metadata lines (canonical config, outcome,
  // outputs), then one line per event with fields
  //   event_kind,step_index,process,session_c,session_dealer,detail
  // in that order. Identical runs serialize to identical bytes.
  void write(std::ostream& os) const;
  std::string to_string() const;

  // Reads the metadata header of an exported trace (enough to re-run it).
  // Throws std::runtime_error on malformed input.
  static RunConfig read_config(std::istream& is);
};

// Parses the canonical one-line config form (used by trace headers and the
// command-line config file). Throws std::runtime_error on unknown keys.
RunConfig parse_canonical_config(const std::string& line);

}  // namespace aba
