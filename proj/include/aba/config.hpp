#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace aba {

enum class Protocol : uint8_t { Wrb, Rb, Mwsvss, Svss, Scc, Ba };

const char* protocol_name(Protocol p);
bool parse_protocol(const std::string& s, Protocol& out);

// Full description of one simulation run. Together with the strategy
// implementation this determines the run bit for bit: every random choice
// (polynomials, scheduling, adversary decisions) is drawn from streams
// seeded by `seed`.
struct RunConfig {
  Protocol protocol = Protocol::Mwsvss;
  unsigned n = 4;
  unsigned t = 1;
  uint64_t prime = 2147483647;
  uint64_t seed = 1;
  std::vector<uint8_t> faulty;  // strictly increasing process ids
  std::string adversary = "honest";

  uint32_t fairness_budget = 0;     // 0 = default 10 n^2
  uint64_t max_events = 1000000;

  // Roles and inputs for directly invoked protocols. kUnset values are
  // derived from the seed at run start so that plain configs still vary
  // across a campaign.
  static constexpr uint64_t kUnset = ~0ULL;
  unsigned dealer = 1;
  unsigned moderator = 2;           // mwsvss only
  uint64_t secret = kUnset;         // dealer input (wrb/rb value, vss secret)
  uint64_t moderator_value = kUnset;  // mwsvss moderator input s'
  std::vector<uint8_t> ba_inputs;   // per-process bits; empty = derived

  bool invoke_reconstruct = true;   // run the reconstruct phase (vss modes)

  // Alternative reading of the deal-tuple delay key (delays keyed by the
  // tuple's sender instead of the tuple's session dealer). Kept for
  // experiments; the default is the session-dealer reading.
  bool deal_delay_by_sender = false;

  bool capture_events = true;       // false = counters/summary only

  bool is_faulty(unsigned p) const {
    for (uint8_t f : faulty)
      if (f == p) return true;
    return false;
  }
  uint32_t effective_fairness_budget() const {
    return fairness_budget ? fairness_budget : 10 * n * n;
  }

  // Throws std::invalid_argument on violation (n > 3t, bounds, role sanity).
  void validate() const;

  // Canonical one-line form, stable field order; embedded in trace files.
  std::string canonical() const;
};

}  // namespace aba
