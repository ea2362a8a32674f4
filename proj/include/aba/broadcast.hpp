#pragma once

#include <cstdint>
#include <deque>
#include <vector>

#include "aba/flatmap.hpp"
#include "aba/msg.hpp"

namespace aba {

// Identity of a broadcast instance, packed for interning. Excludes the
// value: two transport messages with the same key but different values are
// an equivocation attempt inside that instance.
inline uint64_t broadcast_instance_key(const Msg& m) {
  uint64_t k = m.session >> 24;  // structural session bits
  k = (k << 5) | (uint64_t(m.kind) & 0x1f);
  k = (k << 6) | m.origin;
  k = (k << 6) | m.aux;
  k = (k << 6) | m.dealer;
  return k;
}

// Per-process state machines for all broadcast instances the process takes
// part in.
//
// The crusader layer (type 1/2): the origin sends the value to all; a
// process echoes the first origin value it sees (once); n-t echoes from
// distinct senders with one value accept it. No two correct processes can
// accept different values, but acceptance is not guaranteed under a faulty
// origin.
//
// The echo layer (type 3) on top: a crusader accept triggers a type-3 send;
// t+1 distinct type-3s for a value trigger one too (amplification, at most
// one type-3 send total); n-t distinct type-3s accept. Any single correct
// acceptance then pulls every correct process to the same acceptance.
class RbEngine {
 public:
  RbEngine(unsigned n, unsigned t) : n_(n), t_(t) {}

  struct Actions {
    const Msg* echo2 = nullptr;      // send this value as type 2 to all
    const Msg* echo3 = nullptr;      // send this value as type 3 to all
    const Msg* wrb_accept = nullptr; // crusader acceptance fired now
    const Msg* rb_accept = nullptr;  // full acceptance fired now
    bool ignored = false;            // malformed (type 1 not from origin)
  };

  // Feed one delivered transport message. Returned pointers are valid only
  // until the next call.
  Actions on_transport(Transport tr, unsigned sender, const Msg& m);

  // Statistics for tests.
  size_t instance_count() const { return insts_.size(); }

 private:
  struct Slot {
    Msg value;
    uint64_t senders2 = 0;
    uint64_t senders3 = 0;
  };
  struct Inst {
    std::vector<Slot> slots;
    int8_t wrb_accepted = -1;  // slot index
    int8_t rb_accepted = -1;
    bool sent2 = false;
    bool sent3 = false;
  };

  Inst& intern(const Msg& m);
  unsigned slot_for(Inst& inst, const Msg& m);
  static unsigned popcount(uint64_t v);

  unsigned n_, t_;
  FlatMap64 index_;
  std::deque<Inst> insts_;
  // Echo bursts hit one instance many times in a row; remembering the last
  // lookup skips most table probes. Deque pointers are stable, and
  // instances are never erased, so the cache needs no invalidation.
  uint64_t last_key_ = FlatMap64::kEmpty;
  Inst* last_inst_ = nullptr;
};

}  // namespace aba
