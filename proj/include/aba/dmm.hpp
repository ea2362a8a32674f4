#pragma once

#include <cstdint>
#include <deque>
#include <vector>

#include "aba/flatmap.hpp"

namespace aba {

enum class Filter : uint8_t { Discard, Delay, Forward };

// One recorded expectation: `sender` owes the world a reconstruct-phase
// broadcast claiming that row `row`'s polynomial evaluates to `x` at the
// point of the expecting process, within session (c = session, dealer).
// Ack-side entries are recorded by the session's dealer (one per confirmed
// pair); deal-side entries are recorded by a participant about its own row.
struct Expectation {
  uint8_t sender;
  uint8_t row;
  uint8_t side;  // 0 = ack-side, 1 = deal-side
  uint8_t dealer;
  uint64_t session;
  uint64_t x;
  bool alive = true;
};

// Per-process message admission control. Tracks the distrust set D, the
// pending expectations, and the local session order (a session precedes
// another if its reconstruct output came before the other's share start),
// and classifies every inbound protocol message as discard / delay /
// forward. Messages from a sender with an unmet expectation from an
// already-finished session are delayed until the expectation resolves;
// a broadcast contradicting an expectation adds its sender to D for good.
class Dmm {
 public:
  Dmm(unsigned n, bool deal_delay_by_sender)
      : n_(n),
        deal_delay_by_sender_(deal_delay_by_sender),
        blocking_(n + 1),
        earliest_done_by_dealer_(n + 1, ~0u) {}

  bool distrusted(unsigned j) const { return d_mask_ >> j & 1; }
  uint64_t d_mask() const { return d_mask_; }

  Filter classify(unsigned sender, uint64_t session) const;

  // Session lifecycle at this process.
  void note_start(uint64_t session, uint32_t step);
  bool started(uint64_t session) const { return start_.contains(session); }
  void note_output(uint64_t session, uint32_t step, unsigned session_dealer);
  bool output_done(uint64_t session) const { return done_.contains(session); }

  // Expectation bookkeeping. Adding is idempotent.
  void add_ack(unsigned sender, unsigned row, uint64_t session, unsigned dealer,
               uint64_t x) {
    add(sender, row, 0, session, dealer, x);
  }
  void add_deal(unsigned sender, unsigned row, uint64_t session,
                unsigned dealer, uint64_t x) {
    add(sender, row, 1, session, dealer, x);
  }

  // A participant excluded from a session's admitted set drops all its
  // deal-side expectations for that session. Returns senders whose delayed
  // messages deserve another look.
  std::vector<uint8_t> drop_session_deals(uint64_t session);

  struct BroadcastCheck {
    bool removed = false;   // a matching expectation was satisfied
    bool distrust = false;  // the value contradicted an expectation
  };
  // Feed an accepted reconstruct-value broadcast (sender claims row `row`
  // evaluates to x_prime at this process... at the sender's index). Checks
  // it against matching expectations on both sides.
  BroadcastCheck on_recon_broadcast(unsigned sender, unsigned row,
                                    uint64_t session, uint64_t x_prime);

  void add_distrust(unsigned j) { d_mask_ |= 1ULL << j; }

  // All expectations ever recorded (tests and checkers).
  const std::deque<Expectation>& expectations() const { return tuples_; }

  // True if some live expectation from `sender` belongs to a session whose
  // output is already done (such a sender has permanently stalled sessions
  // behind it unless the expectation resolves).
  bool has_blocking_expectation(unsigned sender) const;

 private:
  void add(unsigned sender, unsigned row, unsigned side, uint64_t session,
           unsigned dealer, uint64_t x);
  static uint64_t key(unsigned sender, unsigned row, unsigned side,
                      uint64_t session) {
    return (session >> 24 << 13) | (uint64_t(sender) << 7) |
           (uint64_t(row) << 1) | side;
  }

  unsigned n_;
  bool deal_delay_by_sender_;
  uint64_t d_mask_ = 0;
  std::deque<Expectation> tuples_;
  FlatMap64 index_;
  FlatMap64 by_session_;                        // -> session_lists_ slot
  std::deque<std::vector<uint32_t>> session_lists_;
  // Per sender: live expectations whose session output is done (only these
  // can delay anything). Dead entries are skipped lazily.
  std::vector<std::vector<uint32_t>> blocking_;
  FlatMap64 start_, done_;
  // Earliest output step per session dealer, ~0u = none yet (for the
  // alternative delay-key reading keyed by the expectation's sender).
  std::vector<uint32_t> earliest_done_by_dealer_;
};

}  // namespace aba
