#pragma once

#include <cstdint>
#include <deque>
#include <vector>

#include "aba/broadcast.hpp"
#include "aba/config.hpp"
#include "aba/dmm.hpp"
#include "aba/field.hpp"
#include "aba/msg.hpp"
#include "aba/session.hpp"
#include "aba/sim.hpp"

namespace aba {

// Local state of one moderated-VSS session at one process. A process can
// hold any subset of the three roles (dealer, moderator, plain holder);
// fields are grouped by the role that writes them.
struct MwState {
  uint64_t id = 0;
  uint8_t dealer = 0;
  uint8_t moderator = 0;

  // dealer
  uint64_t secret = kNoValue;
  UniPoly f;                    // f(0) = secret
  std::vector<UniPoly> rows;    // rows[l] = f_l, f_l(0) = f(l); index 1..n
  bool dealt = false;
  bool acks_recorded = false;   // step 7 ran: expectations added, OK sent

  // moderator
  uint64_t moderator_value = kNoValue;  // s', kNoValue until known
  UniPoly fpoly;                        // f-hat from the dealer
  bool have_fpoly = false;
  std::vector<uint64_t> f0_in;          // first f-hat_j(0) sent by each j
  uint64_t m_mask = 0;
  bool sent_mset = false;

  // holder of row j = self
  std::vector<uint64_t> col;    // col[l] = value received for row l
  bool have_col = false;
  UniPoly row_poly;             // own row, from the dealer
  bool have_row = false;
  bool sent_relays = false;
  std::vector<uint64_t> relay_in;  // relay_in[l] = first relay value from l
  uint64_t deal_mask = 0;          // L_j as it grows
  bool sent_lset = false;

  // everyone
  uint64_t ack_mask = 0;           // accepted ack origins
  std::vector<uint64_t> lsets;     // lsets[j] = accepted L_j mask, 0 = none
  uint64_t mhat = 0;               // accepted M, 0 = none
  bool ok_accepted = false;
  bool share_complete = false;

  // reconstruct
  bool recon_started = false;
  std::vector<std::vector<Point>> kpoints;  // per row l: accepted (k, value)
  std::vector<uint64_t> fbar0;     // fbar_l(0) once interpolated
  bool output_done = false;
  uint64_t output = kNoValue;      // kNoValue = bottom once output_done
};

// Local state of one shared-bivariate session (the pair-instance layer
// above MwState). Child sessions are MwStates keyed by mw_child(...).
struct SvssState {
  uint64_t id = 0;
  uint8_t dealer = 0;

  // dealer
  uint64_t secret = kNoValue;
  BiPoly f;
  bool dealt = false;
  std::vector<uint64_t> gsets;  // dealer's G_j masks
  uint64_t g_mask = 0;
  bool sent_gsets = false;

  // everyone
  UniPoly g, h;                 // own shares: g(y) = f(self,y), h(x) = f(x,self)
  bool have_shares = false;
  bool spawned = false;
  std::vector<uint8_t> pair_done;  // local completion bits (pattern 0-3) per pair
  uint64_t ghat = 0;
  std::vector<uint64_t> ghat_sets;
  bool have_ghat = false;
  bool share_complete = false;

  // reconstruct
  bool recon_started = false;
  bool recon_invoked = false;   // child reconstructions launched (needs ghat)
  uint32_t recon_pending = 0;   // child outputs still missing
  bool output_done = false;
  uint64_t output = kNoValue;
};

// One coin toss: n*n shared secrets, attach/declare exchange, reconstruction
// of the attached sums. Child sessions are SvssStates svss(round, k, j).
struct CoinState {
  uint64_t id = 0;
  uint32_t round = 0;
  bool started = false;
  std::vector<uint64_t> secrets;       // my n dealt secrets, index 1..n
  std::vector<uint64_t> share_done;    // share_done[j] = mask of dealers k done
  std::vector<uint64_t> aj;            // aj[j] = accepted attach mask of j, 0 = none
  uint64_t my_attach = 0;
  bool attached_sent = false;
  uint64_t valid_mask = 0;             // attach-valid parties (grows)
  bool declare_sent = false;
  uint64_t declared_mask = 0;          // parties in counted declarations
  uint64_t declare_senders = 0;        // whose declarations were counted
  uint8_t declares_seen = 0;
  // Declarations whose members are not yet all locally openable; counted
  // once they are, never if they never become so.
  std::vector<std::pair<uint8_t, uint64_t>> declare_wait;
  bool recon_enabled = false;          // n-t declarations and own sent
  std::vector<uint64_t> recon_started; // recon_started[j] = dealer mask
  std::vector<uint64_t> vj;            // vj[j], kNoValue while pending
  bool output_done = false;
  uint64_t output = kNoValue;
};

struct BaRound {
  bool started = false;
  uint64_t pre_mask = 0;
  uint32_t pre_count[2] = {0, 0};
  bool pre_done = false;
  uint64_t main_mask = 0;
  uint32_t main_count[2] = {0, 0};
  bool main_done = false;
  bool use_coin = false;   // no value reached n-2t: adopt the coin value
  bool coin_joined = false;
};

struct BaState {
  uint64_t v = 0;               // current estimate
  uint32_t round = 0;           // 0 = not started; rounds are 1-based
  int8_t decided = -1;
  uint32_t decide_round = 0;
  bool halted = false;
  std::vector<BaRound> rounds;  // index by round, [0] unused
  uint64_t decide_mask[2] = {0, 0};
  bool decide_sent = false;
};

struct DelayedMsg {
  uint32_t payload = 0;
  uint32_t held_step = 0;  // step of the Delay event, for release linkage
};

// The full per-process protocol engine: reliable-broadcast instances, the
// distrust/delay filter, and the session state machines, driven entirely
// by delivered envelopes. One Node never touches another Node's state.
class Node {
 public:
  Node(Sim& sim, unsigned self);

  // Kick off the configured top-level protocol at this process.
  void start();

  // Entry point for every delivered envelope (including self-deliveries).
  void on_deliver(const Envelope& env, const Msg& m);

  bool terminated() const { return terminated_; }

  unsigned self() const { return self_; }
  Dmm& dmm() { return dmm_; }
  const Dmm& dmm() const { return dmm_; }
  uint32_t ba_round() const { return ba_.round; }
  RbEngine& rb() { return rb_; }

  // State lookups (created on demand by traffic; null if never touched).
  MwState* find_mw(uint64_t session);
  SvssState* find_svss(uint64_t session);
  CoinState* find_coin(uint32_t round);
  const BaState& ba() const { return ba_; }

 private:
  // --- plumbing ------------------------------------------------------------
  void send(unsigned to, Transport tr, const Msg& m);
  void send_all(Transport tr, const Msg& m);
  void rb_broadcast(const Msg& m);
  void accept_pipeline(unsigned sender, uint32_t payload, const Msg& m,
                       uint64_t held_at);
  void dispatch(unsigned sender, const Msg& m);
  void refilter(unsigned sender);
  void malformed(unsigned sender, const Msg& m);
  bool vals_in_field(const Msg& m) const;
  bool valid_pset(uint64_t mask) const;

  MwState& mw_get(uint64_t session, unsigned dealer);
  SvssState& svss_get(uint64_t session, unsigned dealer);
  CoinState& coin_get(uint32_t round);

  // --- moderated VSS -------------------------------------------------------
  void mw_start_dealer(uint64_t session, unsigned moderator, uint64_t secret);
  void mw_set_moderator_value(MwState& st, uint64_t value);
  void mw_handle(unsigned sender, const Msg& m);
  void mw_try_relay(MwState& st);
  void mw_try_deal(MwState& st, unsigned l);
  void mw_try_lset(MwState& st);
  void mw_try_admit(MwState& st, unsigned j);
  void mw_try_mset(MwState& st);
  void mw_try_dealer_acks(MwState& st);
  void mw_try_complete(MwState& st);
  void mw_start_recon(uint64_t session);
  void mw_try_kset(MwState& st, unsigned l);
  void mw_try_output(MwState& st);
  void mw_completed(MwState& st);
  void mw_output_ready(MwState& st);

  // --- shared bivariate layer ----------------------------------------------
  void svss_start_dealer(uint64_t session, uint64_t secret);
  void svss_handle(unsigned sender, const Msg& m);
  uint64_t svss_moderator_value(const SvssState& st, uint64_t child) const;
  uint64_t svss_dealt_value(const SvssState& st, uint64_t child) const;
  void svss_spawn(SvssState& st);
  void svss_child_complete(SvssState& st, uint64_t child);
  void svss_child_output(SvssState& st, uint64_t child);
  void svss_try_complete(SvssState& st);
  void svss_start_recon(uint64_t session);
  void svss_try_output(SvssState& st);
  void svss_completed(SvssState& st);
  void svss_output_ready(SvssState& st);

  // --- common coin ---------------------------------------------------------
  void coin_start(uint32_t round);
  void coin_handle(unsigned sender, const Msg& m);
  void coin_share_complete(uint32_t round, unsigned k, unsigned j);
  void coin_update_valid(CoinState& st);
  void coin_try_declare(CoinState& st);
  bool coin_declare_ready(const CoinState& st, uint64_t mask) const;
  void coin_fold_declare(CoinState& st, unsigned sender, uint64_t mask);
  void coin_drain_declares(CoinState& st);
  void coin_try_recon(CoinState& st);
  void coin_recon_output(CoinState& st, unsigned k, unsigned j, uint64_t out);
  void coin_try_vj(CoinState& st, unsigned j);
  void coin_try_output(CoinState& st);
  void coin_output_ready(CoinState& st);

  // --- agreement rounds ----------------------------------------------------
  void ba_start();
  void ba_handle(unsigned sender, const Msg& m);
  void ba_start_round(uint32_t r);
  void ba_try_prevote_done(uint32_t r);
  void ba_try_mainvote_done(uint32_t r);
  void ba_decide(uint64_t b);
  void ba_coin_output(uint32_t round, uint64_t bit);
  void ba_halt(uint64_t b);

  Sim& sim_;
  const RunConfig& cfg_;
  const Field& field_;
  unsigned self_;
  unsigned n_, t_;
  RbEngine rb_;
  Dmm dmm_;
  bool terminated_ = false;

  FlatMap64 mw_index_;
  std::deque<MwState> mw_;
  FlatMap64 svss_index_;
  std::deque<SvssState> svss_;
  std::vector<int32_t> coin_index_;  // round -> index, -1 = none
  std::deque<CoinState> coins_;
  BaState ba_;

  std::vector<std::deque<DelayedMsg>> delayed_;  // per sender
  std::vector<uint8_t> refilter_queued_;
  std::deque<unsigned> refilter_pending_;
  bool refiltering_ = false;
  uint32_t current_payload_ = kNoPayload;  // payload id under dispatch
};

}  // namespace aba
