#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "aba/session.hpp"

namespace aba {

// Protocol-level message kinds. Broadcast kinds are carried inside the
// reliable-broadcast transport; private kinds travel point-to-point.
enum class MsgKind : uint8_t {
  None = 0,

  // mw share/reconstruct
  RowValues,   // dealer -> j, private: f_1(j) .. f_n(j)
  RowPoly,     // dealer -> l, private: f_l(1) .. f_l(t+1)
  FPoly,       // dealer -> moderator, private: f(1) .. f(t+1)
  RelayValue,  // j -> l, private: j's received value of row l, aux = l
  F0ToMod,     // j -> moderator, private: f^_j(0)
  AckRb,       // broadcast by j: "I received my row values"
  LSet,        // broadcast by j: the set L_j
  MSet,        // broadcast by moderator: the set M
  Ok,          // broadcast by dealer
  ReconValue,  // broadcast by j: claimed value of row `aux` at j

  // svss
  BipolyShares,  // dealer -> j, private: g_j(1..t+1), h_j(1..t+1)
  GSets,         // broadcast by dealer: G and {G_j : j in G}

  // coin
  CoinAccept,    // broadcast: svss share (dealer aux, slot vals[0]) completed
  CoinAttached,  // broadcast by j: j's accepted dealer set A_j
  CoinDeclare,   // broadcast: set of parties whose attach sets are valid here

  // ba (aux = round)
  PreVote,
  MainVote,
  Decide,

  // raw payload for directly exercising the broadcast protocols
  Bcast,
};

const char* msg_kind_name(MsgKind k);

// One protocol message. `origin` is the process whose statement this is: the
// actual sender for private messages, the broadcasting process for broadcast
// kinds (possibly relayed through other processes' echoes).
//
// A reliable-broadcast instance is identified by (kind, session, dealer,
// origin, aux); `vals` is the broadcast value. Honest processes broadcast at
// most once per instance, so two different `vals` under one instance key is
// equivocation, which the broadcast layer tolerates by design.
struct Msg {
  MsgKind kind = MsgKind::None;
  uint8_t dealer = 0;  // session dealer (0 for coin/ba sessions)
  uint8_t origin = 0;
  uint8_t aux = 0;  // row index / coin dealer / ba round, per kind
  uint64_t session = 0;
  std::vector<uint64_t> vals;

  bool same_instance(const Msg& o) const {
    return kind == o.kind && session == o.session && dealer == o.dealer &&
           origin == o.origin && aux == o.aux;
  }
  bool operator==(const Msg& o) const {
    return same_instance(o) && vals == o.vals;
  }

  // Canonical human-readable rendering used in trace files.
  std::string describe() const;
};

// How an envelope carries its message.
enum class Transport : uint8_t {
  Direct = 0,  // private point-to-point protocol message
  Wrb1,        // broadcast dealer's initial send
  Wrb2,        // crusader echo
  Rb3,         // amplification echo
};

const char* transport_name(Transport t);

}  // namespace aba
