#pragma once

#include <cstdint>
#include <deque>
#include <memory>
#include <stdexcept>
#include <vector>

#include "aba/config.hpp"
#include "aba/field.hpp"
#include "aba/rng.hpp"
#include "aba/trace.hpp"

namespace aba {

class Node;
class Sim;
class Strategy;

struct SimError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Envelope {
  uint8_t from = 0;
  uint8_t to = 0;
  Transport transport = Transport::Direct;
  uint8_t cls = 0;          // strategy priority class, fixed at send
  uint32_t payload = 0;     // index into the run's payload pool
  uint32_t send_step = 0;   // trace step of the Send event
  uint32_t send_pick = 0;   // scheduler pick count at send (fairness age)
  uint32_t pos = ~0u;       // position in the pending vector, ~0u = gone
};

// The adversary's window onto the network. Envelope metadata (endpoints,
// age) is public; payload bytes are visible only when a faulty process is
// an endpoint — peeking at nonfaulty-to-nonfaulty traffic yields nullptr.
class SchedView {
 public:
  explicit SchedView(Sim& sim) : sim_(sim) {}

  size_t pending_count() const;
  bool empty() const { return pending_count() == 0; }
  uint32_t oldest();                       // kNoEnvelope if none
  uint32_t oldest_in_class(unsigned cls);  // kNoEnvelope if class empty
  uint32_t random_pending(Rng& rng) const;
  uint32_t nth_pending(size_t i) const;
  const Envelope& envelope(uint32_t id) const;
  const Msg* payload(uint32_t id) const;  // guarded; see class comment

 private:
  Sim& sim_;
};

// Runs one configured execution to completion. All state is confined to
// this object; distinct Sims never share mutable data, so seed campaigns
// can run on parallel threads freely.
class Sim {
 public:
  explicit Sim(const RunConfig& config);
  ~Sim();

  Trace run();

  // --- plumbing used by nodes, strategies, and tests -----------------------

  const RunConfig& config() const { return cfg_; }
  const Field& field() const { return field_; }
  Trace& trace() { return trace_; }
  Node& node(unsigned p) { return *nodes_[p]; }
  Rng& node_rng(unsigned p) { return node_rngs_[p]; }
  bool is_faulty(unsigned p) const { return faulty_mask_ >> p & 1; }
  uint64_t faulty_mask() const { return faulty_mask_; }

  // Send on behalf of process `from`. Faulty senders pass through the
  // strategy's rewrite hook; self-sends are delivered on the spot (before
  // this call returns the whole synchronous cascade has run).
  void send(unsigned from, unsigned to, Transport tr, const Msg& m);

  // One payload, n envelopes; falls back to per-recipient send() for
  // faulty senders so the rewrite hook keeps per-recipient control.
  void send_all(unsigned from, Transport tr, const Msg& m);

  // Strategy-initiated send. Throws SimError if `from` is not faulty:
  // channels are authenticated, the adversary cannot forge honest senders.
  void inject(unsigned from, unsigned to, Transport tr, const Msg& m);

  // Trace hooks (no-ops where capture is off, but counters always advance).
  void ev_session_start(unsigned p, uint64_t session, unsigned dealer);
  void ev_session_complete(unsigned p, uint64_t session, unsigned dealer);
  void ev_output(unsigned p, uint64_t session, unsigned dealer, uint64_t value);
  void ev_shun(unsigned p, unsigned shunned, uint64_t session, unsigned dealer);
  void ev_filtered(EventKind kind, unsigned p, unsigned sender, uint32_t payload,
                   uint64_t held_at);

  // A nonfaulty process finished its top-level protocol.
  void mark_terminated(unsigned p, uint64_t output);

  uint64_t top_output(unsigned p) const { return top_output_[p]; }

 private:
  friend class SchedView;

  uint32_t push_payload(const Msg& m);
  uint32_t make_envelope(unsigned from, unsigned to, Transport tr,
                         uint32_t payload);
  void enqueue(uint32_t id);
  void remove_pending(uint32_t id);
  void deliver(uint32_t id);
  void drain_self_queue();
  uint32_t pick_next();

  // Construction order matters: the strategy's prepare() hook runs while
  // cfg_ is being initialized, so strategy_ must be built first.
  std::unique_ptr<Strategy> strategy_;
  RunConfig cfg_;
  Field field_;
  Rng sched_rng_, strategy_rng_;
  std::vector<Rng> node_rngs_;
  uint64_t faulty_mask_ = 0;
  std::vector<std::unique_ptr<Node>> nodes_;
  Trace trace_;

  std::deque<Envelope> envelopes_;
  std::vector<uint32_t> pending_;        // unordered; swap-remove
  std::deque<uint32_t> fifo_all_;        // send order, lazily skipped
  std::deque<uint32_t> fifo_honest_;     // nonfaulty<->nonfaulty only
  std::vector<std::deque<uint32_t>> fifo_class_;
  std::deque<uint32_t> self_queue_;      // synchronous self-deliveries
  bool draining_self_ = false;
  bool track_classes_ = false;           // strategy consults class queues
  uint64_t picks_ = 0;
  std::vector<uint64_t> top_output_;
  uint64_t terminated_mask_ = 0;
  uint64_t honest_mask_ = 0;
};

// Convenience wrapper: configure, run, return the trace.
Trace run_simulation(const RunConfig& config);

}  // namespace aba
