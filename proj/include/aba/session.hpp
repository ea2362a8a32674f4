#pragma once

#include <cstdint>

namespace aba {

// A protocol session is identified by (c, dealer). The counter c is not a
// plain sequence number: both endpoints of every sub-protocol must agree on
// the id of a child session without exchanging extra messages, so c encodes
// the session's structural position (which coin round, which dealer/slot,
// which pair, which of the four per-pair instances) in fixed bit fields.
//
// Layout of c (64 bits):
//   [63:60] level
//   [59:50] coin round (0 when the protocol was invoked directly)
//   [49:44] svss dealer k   } slot of an n x n coin secret grid; a directly
//   [43:38] svss slot j     } invoked svss session has k = dealer, j = 0
//   [37:32] pair low  a     } unordered pair {a,b}, a < b, whose four
//   [31:26] pair high b     } mw sub-sessions share a bivariate entry
//   [25:24] pattern 0..3 (which of the four per-pair mw instances)
//
// Level TOP is the single session of a directly invoked protocol; its dealer
// comes from the run configuration. COIN and BA sessions have no dealer
// (dealer field 0).
enum class SessionLevel : uint8_t {
  None = 0,
  Top = 1,
  Mw = 2,
  Svss = 3,
  Coin = 4,
  Ba = 5,
};

namespace session {

constexpr uint64_t kTop = 1ULL << 60;
constexpr uint64_t kBa = 5ULL << 60;

constexpr SessionLevel level(uint64_t c) {
  return static_cast<SessionLevel>((c >> 60) & 0xf);
}
constexpr unsigned round(uint64_t c) { return (c >> 50) & 0x3ff; }
constexpr unsigned svss_dealer(uint64_t c) { return (c >> 44) & 0x3f; }
constexpr unsigned svss_slot(uint64_t c) { return (c >> 38) & 0x3f; }
constexpr unsigned pair_low(uint64_t c) { return (c >> 32) & 0x3f; }
constexpr unsigned pair_high(uint64_t c) { return (c >> 26) & 0x3f; }
constexpr unsigned pattern(uint64_t c) { return (c >> 24) & 0x3; }

constexpr uint64_t coin(unsigned round) {
  return (4ULL << 60) | (uint64_t(round) << 50);
}

// The svss instance sharing dealer k's secret for slot j in a coin round
// (k = j = 0 outside a coin: then use svss_top below).
constexpr uint64_t svss(unsigned round, unsigned k, unsigned j) {
  return (3ULL << 60) | (uint64_t(round) << 50) | (uint64_t(k) << 44) |
         (uint64_t(j) << 38);
}

// One of the four mw sub-sessions of an svss parent for unordered pair
// {x,y}. Patterns (a < b = sorted pair):
//   0: dealer a deals f(b,a), moderator b     2: dealer b deals f(a,b), mod a
//   1: dealer a deals f(a,b), moderator b     3: dealer b deals f(b,a), mod a
constexpr uint64_t mw_child(uint64_t parent, unsigned x, unsigned y,
                            unsigned pattern) {
  unsigned a = x < y ? x : y, b = x < y ? y : x;
  return (2ULL << 60) | (parent & (0x3fffffULL << 38)) | (uint64_t(a) << 32) |
         (uint64_t(b) << 26) | (uint64_t(pattern) << 24);
}

constexpr unsigned mw_child_dealer(uint64_t c) {
  return pattern(c) < 2 ? pair_low(c) : pair_high(c);
}
constexpr unsigned mw_child_moderator(uint64_t c) {
  return pattern(c) < 2 ? pair_high(c) : pair_low(c);
}

// The svss session a mw sub-session belongs to.
constexpr uint64_t svss_parent(uint64_t c) {
  return svss(round(c), svss_dealer(c), svss_slot(c));
}

// Vote sessions of agreement round r (r = 0 carries the round-independent
// decide broadcasts).
constexpr uint64_t ba(unsigned round) {
  return (5ULL << 60) | (uint64_t(round) << 50);
}

// The mw sub-session in which process x shares the bivariate entry f(k,l);
// x must be one of k, l.
constexpr uint64_t mw_entry(uint64_t parent, unsigned x, unsigned k,
                            unsigned l) {
  unsigned a = k < l ? k : l, b = k < l ? l : k;
  unsigned pat = x == a ? (k == a ? 1u : 0u) : (k == a ? 2u : 3u);
  return mw_child(parent, a, b, pat);
}

}  // namespace session

}  // namespace aba
