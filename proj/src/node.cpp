#include "aba/node.hpp"

#include <bit>

namespace aba {

namespace {
bool subset(uint64_t a, uint64_t b) { return (a & ~b) == 0; }
unsigned bits(uint64_t v) { return static_cast<unsigned>(std::popcount(v)); }
}  // namespace

Node::Node(Sim& sim, unsigned self)
    : sim_(sim),
      cfg_(sim.config()),
      field_(sim.field()),
      self_(self),
      n_(cfg_.n),
      t_(cfg_.t),
      rb_(cfg_.n, cfg_.t),
      dmm_(cfg_.n, cfg_.deal_delay_by_sender),
      delayed_(cfg_.n + 1),
      refilter_queued_(cfg_.n + 1, 0) {
  coin_index_.assign(1024, -1);
}

void Node::start() {
  switch (cfg_.protocol) {
    case Protocol::Wrb:
    case Protocol::Rb:
      if (self_ == cfg_.dealer) {
        Msg m;
        m.kind = MsgKind::Bcast;
        m.dealer = static_cast<uint8_t>(cfg_.dealer);
        m.origin = static_cast<uint8_t>(self_);
        m.session = session::kTop;
        m.vals = {sim_.trace().secret};
        rb_broadcast(m);
      }
      break;
    case Protocol::Mwsvss:
      if (self_ == cfg_.dealer)
        mw_start_dealer(session::kTop, cfg_.moderator, sim_.trace().secret);
      break;
    case Protocol::Svss:
      if (self_ == cfg_.dealer)
        svss_start_dealer(session::svss(0, cfg_.dealer, 0),
                          sim_.trace().secret);
      break;
    case Protocol::Scc:
      coin_start(0);
      break;
    case Protocol::Ba:
      ba_start();
      break;
  }
}

// --- plumbing ----------------------------------------------------------------

void Node::send(unsigned to, Transport tr, const Msg& m) {
  sim_.send(self_, to, tr, m);
}

void Node::send_all(Transport tr, const Msg& m) {
  sim_.send_all(self_, tr, m);
}

void Node::rb_broadcast(const Msg& m) { send_all(Transport::Wrb1, m); }

void Node::on_deliver(const Envelope& env, const Msg& m) {
  if (env.transport == Transport::Direct) {
    accept_pipeline(env.from, env.payload, m, kNoValue);
    return;
  }
  auto acts = rb_.on_transport(env.transport, env.from, m);
  if (acts.ignored) {
    current_payload_ = env.payload;
    malformed(env.from, m);
    return;
  }
  if (acts.echo2) send_all(Transport::Wrb2, *acts.echo2);
  if (acts.echo3) send_all(Transport::Rb3, *acts.echo3);
  // The crusader stage is terminal only when it is the protocol under test;
  // everything else runs on full reliable-broadcast acceptance.
  const Msg* acc = cfg_.protocol == Protocol::Wrb ? acts.wrb_accept
                                                  : acts.rb_accept;
  if (acc) accept_pipeline(acc->origin, env.payload, *acc, kNoValue);
}

// Every protocol message (a private send or a freshly accepted broadcast)
// funnels through here: distrust discard, expectation matching, delay
// classification, then the session handler. `held_at` is kNoValue on first
// contact and the Delay step when re-examining a held message.
void Node::accept_pipeline(unsigned sender, uint32_t payload, const Msg& m,
                           uint64_t held_at) {
  current_payload_ = payload;
  if (dmm_.distrusted(sender)) {
    sim_.ev_filtered(EventKind::Discard, self_, sender, payload, held_at);
    return;
  }
  if (m.kind == MsgKind::ReconValue && held_at == kNoValue) {
    if (m.vals.size() != 1 || m.aux < 1 || m.aux > n_ || !vals_in_field(m)) {
      malformed(sender, m);
      return;
    }
    auto bc = dmm_.on_recon_broadcast(sender, m.aux, m.session, m.vals[0]);
    if (bc.distrust) {
      sim_.ev_shun(self_, sender, m.session, m.dealer);
      sim_.ev_filtered(EventKind::Discard, self_, sender, payload, held_at);
      refilter(sender);
      return;
    }
    if (bc.removed) refilter(sender);
  }
  switch (dmm_.classify(sender, m.session)) {
    case Filter::Discard:
      sim_.ev_filtered(EventKind::Discard, self_, sender, payload, held_at);
      return;
    case Filter::Delay: {
      if (held_at != kNoValue) {
        // Still blocked: keep the original hold step, no fresh event.
        delayed_[sender].push_back(
            DelayedMsg{payload, static_cast<uint32_t>(held_at)});
        return;
      }
      auto step = static_cast<uint32_t>(sim_.trace().total_steps);
      sim_.ev_filtered(EventKind::Delay, self_, sender, payload, kNoValue);
      delayed_[sender].push_back(DelayedMsg{payload, step});
      return;
    }
    case Filter::Forward:
      break;
  }
  sim_.ev_filtered(EventKind::Forward, self_, sender, payload, held_at);
  dispatch(sender, m);
}

// Re-examine a sender's held messages after its expectation set changed.
// Handlers running downstream can trigger further refilters; those are
// queued and drained iteratively to keep the processing order flat.
void Node::refilter(unsigned sender) {
  if (refilter_queued_[sender]) return;
  refilter_queued_[sender] = 1;
  refilter_pending_.push_back(sender);
  if (refiltering_) return;
  refiltering_ = true;
  while (!refilter_pending_.empty()) {
    unsigned s = refilter_pending_.front();
    refilter_pending_.pop_front();
    refilter_queued_[s] = 0;
    std::deque<DelayedMsg> held = std::move(delayed_[s]);
    delayed_[s].clear();
    for (const DelayedMsg& dm : held)
      accept_pipeline(s, dm.payload, sim_.trace().payloads[dm.payload],
                      dm.held_step);
  }
  refiltering_ = false;
}

void Node::dispatch(unsigned sender, const Msg& m) {
  switch (session::level(m.session)) {
    case SessionLevel::Top:
      if (cfg_.protocol == Protocol::Wrb || cfg_.protocol == Protocol::Rb) {
        if (m.kind != MsgKind::Bcast || m.vals.size() != 1 ||
            !vals_in_field(m) || m.origin != cfg_.dealer ||
            m.dealer != cfg_.dealer) {
          malformed(sender, m);
          return;
        }
        if (terminated_) return;
        sim_.ev_output(self_, m.session, m.dealer, m.vals[0]);
        terminated_ = true;
        sim_.mark_terminated(self_, m.vals[0]);
        return;
      }
      mw_handle(sender, m);
      return;
    case SessionLevel::Mw:
      mw_handle(sender, m);
      return;
    case SessionLevel::Svss:
      svss_handle(sender, m);
      return;
    case SessionLevel::Coin:
      coin_handle(sender, m);
      return;
    case SessionLevel::Ba:
      ba_handle(sender, m);
      return;
    default:
      malformed(sender, m);
  }
}

void Node::malformed(unsigned sender, const Msg&) {
  sim_.ev_filtered(EventKind::Malformed, self_, sender, current_payload_,
                   kNoValue);
}

bool Node::vals_in_field(const Msg& m) const {
  for (uint64_t v : m.vals)
    if (v >= field_.p()) return false;
  return true;
}

bool Node::valid_pset(uint64_t mask) const {
  uint64_t allowed = (~0ULL >> (63 - n_)) & ~1ULL;  // bits 1..n
  return mask != 0 && (mask & ~allowed) == 0;
}

MwState* Node::find_mw(uint64_t session) {
  const uint32_t* i = mw_index_.find(session);
  return i ? &mw_[*i] : nullptr;
}

SvssState* Node::find_svss(uint64_t session) {
  const uint32_t* i = svss_index_.find(session);
  return i ? &svss_[*i] : nullptr;
}

CoinState* Node::find_coin(uint32_t round) {
  int32_t i = coin_index_[round];
  return i < 0 ? nullptr : &coins_[i];
}

MwState& Node::mw_get(uint64_t session, unsigned dealer) {
  bool fresh = false;
  uint32_t idx = mw_index_.at_or_insert(
      session, static_cast<uint32_t>(mw_.size()), &fresh);
  if (!fresh) return mw_[idx];
  mw_.emplace_back();
  MwState& st = mw_.back();
  st.id = session;
  st.dealer = static_cast<uint8_t>(dealer);
  st.moderator = static_cast<uint8_t>(
      session::level(session) == SessionLevel::Top
          ? cfg_.moderator
          : session::mw_child_moderator(session));
  st.col.assign(n_ + 1, kNoValue);
  st.relay_in.assign(n_ + 1, kNoValue);
  st.lsets.assign(n_ + 1, 0);
  if (self_ == st.moderator) {
    st.f0_in.assign(n_ + 1, kNoValue);
    if (session::level(session) == SessionLevel::Top) {
      st.moderator_value = sim_.trace().moderator_value;
    } else if (SvssState* pv = find_svss(session::svss_parent(session));
               pv && pv->have_shares) {
      mw_set_moderator_value(st, svss_moderator_value(*pv, session));
    }
  }
  dmm_.note_start(session, static_cast<uint32_t>(sim_.trace().total_steps));
  sim_.ev_session_start(self_, session, dealer);
  return st;
}

// --- share protocol ----------------------------------------------------------

void Node::mw_start_dealer(uint64_t session, unsigned moderator,
                           uint64_t secret) {
  MwState& st = mw_get(session, self_);
  if (st.dealt) return;
  st.dealt = true;
  st.secret = secret;
  Rng& rng = sim_.node_rng(self_);
  st.f = random_unipoly(field_, secret, t_, rng);
  st.rows.resize(n_ + 1);
  for (unsigned l = 1; l <= n_; ++l)
    st.rows[l] = random_unipoly(field_, st.f.eval(field_, l), t_, rng);

  Msg m;
  m.dealer = static_cast<uint8_t>(self_);
  m.origin = static_cast<uint8_t>(self_);
  m.session = session;
  for (unsigned j = 1; j <= n_; ++j) {
    m.kind = MsgKind::RowValues;
    m.aux = 0;
    m.vals.clear();
    for (unsigned l = 1; l <= n_; ++l)
      m.vals.push_back(st.rows[l].eval(field_, j));
    send(j, Transport::Direct, m);
  }
  for (unsigned l = 1; l <= n_; ++l) {
    m.kind = MsgKind::RowPoly;
    m.aux = static_cast<uint8_t>(l);
    m.vals.clear();
    for (unsigned x = 1; x <= t_ + 1; ++x)
      m.vals.push_back(st.rows[l].eval(field_, x));
    send(l, Transport::Direct, m);
  }
  m.kind = MsgKind::FPoly;
  m.aux = 0;
  m.vals.clear();
  for (unsigned x = 1; x <= t_ + 1; ++x)
    m.vals.push_back(st.f.eval(field_, x));
  send(moderator, Transport::Direct, m);
}

void Node::mw_set_moderator_value(MwState& st, uint64_t value) {
  if (st.moderator_value != kNoValue || value == kNoValue) return;
  st.moderator_value = value;
  for (unsigned j = 1; j <= n_; ++j) mw_try_admit(st, j);
}

// Interpolates the t+1 evaluations at x = 1..t+1 that carry a polynomial in
// a private share message.
static UniPoly poly_from_prefix(const Field& F, const std::vector<uint64_t>& v,
                                unsigned t) {
  std::vector<Point> pts(t + 1);
  for (unsigned x = 0; x <= t; ++x) pts[x] = Point{x + 1, v[x]};
  return interpolate_exact(F, pts, t);
}

void Node::mw_handle(unsigned sender, const Msg& m) {
  unsigned dealer = session::level(m.session) == SessionLevel::Top
                        ? cfg_.dealer
                        : session::mw_child_dealer(m.session);
  if (m.dealer != dealer) {
    malformed(sender, m);
    return;
  }
  MwState& st = mw_get(m.session, dealer);
  switch (m.kind) {
    case MsgKind::RowValues:
      if (sender != st.dealer || m.vals.size() != n_ || !vals_in_field(m)) {
        malformed(sender, m);
        return;
      }
      if (st.have_col) return;
      st.have_col = true;
      for (unsigned l = 1; l <= n_; ++l) st.col[l] = m.vals[l - 1];
      mw_try_relay(st);
      return;
    case MsgKind::RowPoly:
      if (sender != st.dealer || m.vals.size() != t_ + 1 ||
          !vals_in_field(m)) {
        malformed(sender, m);
        return;
      }
      if (st.have_row) return;
      st.have_row = true;
      st.row_poly = poly_from_prefix(field_, m.vals, t_);
      mw_try_relay(st);
      for (unsigned l = 1; l <= n_; ++l) mw_try_deal(st, l);
      return;
    case MsgKind::FPoly:
      if (sender != st.dealer || self_ != st.moderator ||
          m.vals.size() != t_ + 1 || !vals_in_field(m)) {
        malformed(sender, m);
        return;
      }
      if (st.have_fpoly) return;
      st.have_fpoly = true;
      st.fpoly = poly_from_prefix(field_, m.vals, t_);
      for (unsigned j = 1; j <= n_; ++j) mw_try_admit(st, j);
      return;
    case MsgKind::RelayValue:
      if (m.vals.size() != 1 || m.aux != self_ || !vals_in_field(m)) {
        malformed(sender, m);
        return;
      }
      if (st.relay_in[sender] != kNoValue) return;
      st.relay_in[sender] = m.vals[0];
      mw_try_deal(st, sender);
      return;
    case MsgKind::F0ToMod:
      if (self_ != st.moderator || m.vals.size() != 1 || !vals_in_field(m)) {
        malformed(sender, m);
        return;
      }
      if (st.f0_in[sender] != kNoValue) return;
      st.f0_in[sender] = m.vals[0];
      mw_try_admit(st, sender);
      return;
    case MsgKind::AckRb:
      if (!m.vals.empty()) {
        malformed(sender, m);
        return;
      }
      st.ack_mask |= 1ULL << sender;
      mw_try_deal(st, sender);
      for (unsigned j = 1; j <= n_; ++j)
        if (st.lsets[j] >> sender & 1) mw_try_admit(st, j);
      mw_try_dealer_acks(st);
      mw_try_complete(st);
      return;
    case MsgKind::LSet: {
      // Undersized sets are shape violations: senders only broadcast at the
      // n-t threshold, and reconstruction of a row needs t+1 honest members
      // of its set to exist.
      if (m.vals.size() != 1 || !valid_pset(m.vals[0]) ||
          bits(m.vals[0]) < n_ - t_) {
        malformed(sender, m);
        return;
      }
      if (st.lsets[sender]) return;
      st.lsets[sender] = m.vals[0];
      mw_try_admit(st, sender);
      mw_try_dealer_acks(st);
      mw_try_complete(st);
      if (st.recon_started || !st.kpoints.empty()) mw_try_kset(st, sender);
      return;
    }
    case MsgKind::MSet:
      if (sender != st.moderator || m.vals.size() != 1 ||
          !valid_pset(m.vals[0]) || bits(m.vals[0]) < n_ - t_) {
        malformed(sender, m);
        return;
      }
      if (st.mhat) return;
      st.mhat = m.vals[0];
      if (!(st.mhat >> self_ & 1))
        for (uint8_t s : dmm_.drop_session_deals(st.id)) refilter(s);
      mw_try_dealer_acks(st);
      mw_try_complete(st);
      mw_try_output(st);
      return;
    case MsgKind::Ok:
      if (sender != st.dealer || !m.vals.empty()) {
        malformed(sender, m);
        return;
      }
      st.ok_accepted = true;
      mw_try_complete(st);
      return;
    case MsgKind::ReconValue: {
      // Shape was validated before expectation matching.
      if (st.kpoints.empty()) {
        st.kpoints.assign(n_ + 1, {});
        st.fbar0.assign(n_ + 1, kNoValue);
      }
      st.kpoints[m.aux].push_back(Point{sender, m.vals[0]});
      mw_try_kset(st, m.aux);
      return;
    }
    default:
      malformed(sender, m);
  }
}

// Step 2: relay the received column and publicly ack the dealer's send.
void Node::mw_try_relay(MwState& st) {
  if (st.sent_relays || !st.have_col || !st.have_row) return;
  st.sent_relays = true;
  Msg m;
  m.dealer = st.dealer;
  m.origin = static_cast<uint8_t>(self_);
  m.session = st.id;
  for (unsigned l = 1; l <= n_; ++l) {
    m.kind = MsgKind::RelayValue;
    m.aux = static_cast<uint8_t>(l);
    m.vals = {st.col[l]};
    send(l, Transport::Direct, m);
  }
  m.kind = MsgKind::AckRb;
  m.aux = 0;
  m.vals.clear();
  rb_broadcast(m);
}

// Step 3: l's private relay matches our own row at l, and l publicly acked:
// we now expect l to repeat that value under broadcast at reconstruction.
void Node::mw_try_deal(MwState& st, unsigned l) {
  if (!st.have_row || (st.deal_mask >> l & 1)) return;
  if (st.relay_in[l] == kNoValue || !(st.ack_mask >> l & 1)) return;
  uint64_t expect = st.row_poly.eval(field_, l);
  if (st.relay_in[l] != expect) return;
  st.deal_mask |= 1ULL << l;
  dmm_.add_deal(l, self_, st.id, st.dealer, expect);
  mw_try_lset(st);
}

// Step 4: enough confirmations; publish L and hand the moderator our share.
void Node::mw_try_lset(MwState& st) {
  if (st.sent_lset || bits(st.deal_mask) < n_ - t_) return;
  st.sent_lset = true;
  Msg m;
  m.dealer = st.dealer;
  m.origin = static_cast<uint8_t>(self_);
  m.session = st.id;
  m.kind = MsgKind::LSet;
  m.vals = {st.deal_mask};
  rb_broadcast(m);
  m.kind = MsgKind::F0ToMod;
  m.vals = {st.row_poly.eval(field_, 0)};
  send(st.moderator, Transport::Direct, m);
}

// Step 5: the moderator admits j once j's claimed share and confirmation set
// line up with the dealer's polynomial and the moderator's own input.
void Node::mw_try_admit(MwState& st, unsigned j) {
  if (self_ != st.moderator || (st.m_mask >> j & 1)) return;
  if (!st.have_fpoly || st.moderator_value == kNoValue) return;
  if (st.f0_in[j] == kNoValue || !st.lsets[j]) return;
  if (!subset(st.lsets[j], st.ack_mask)) return;
  if (st.f0_in[j] != st.fpoly.eval(field_, j)) return;
  if (st.fpoly.eval(field_, 0) != st.moderator_value) return;
  st.m_mask |= 1ULL << j;
  mw_try_mset(st);
}

// Step 6.
void Node::mw_try_mset(MwState& st) {
  if (st.sent_mset || bits(st.m_mask) < n_ - t_) return;
  st.sent_mset = true;
  Msg m;
  m.kind = MsgKind::MSet;
  m.dealer = st.dealer;
  m.origin = static_cast<uint8_t>(self_);
  m.session = st.id;
  m.vals = {st.m_mask};
  rb_broadcast(m);
}

// Step 7: the dealer commits to what every confirmed pair must later
// broadcast, then signals OK.
void Node::mw_try_dealer_acks(MwState& st) {
  if (self_ != st.dealer || !st.dealt || st.acks_recorded || !st.mhat) return;
  for (unsigned j = 1; j <= n_; ++j)
    if (st.mhat >> j & 1)
      if (!st.lsets[j] || !subset(st.lsets[j], st.ack_mask)) return;
  st.acks_recorded = true;
  for (unsigned j = 1; j <= n_; ++j)
    if (st.mhat >> j & 1)
      for (unsigned l = 1; l <= n_; ++l)
        if (st.lsets[j] >> l & 1)
          dmm_.add_ack(l, j, st.id, st.dealer, st.rows[j].eval(field_, l));
  Msg m;
  m.kind = MsgKind::Ok;
  m.dealer = st.dealer;
  m.origin = static_cast<uint8_t>(self_);
  m.session = st.id;
  rb_broadcast(m);
}

// Step 9.
void Node::mw_try_complete(MwState& st) {
  if (st.share_complete || !st.ok_accepted || !st.mhat) return;
  for (unsigned l = 1; l <= n_; ++l)
    if (st.mhat >> l & 1)
      if (!st.lsets[l] || !subset(st.lsets[l], st.ack_mask)) return;
  st.share_complete = true;
  sim_.ev_session_complete(self_, st.id, st.dealer);
  mw_completed(st);
}

void Node::mw_completed(MwState& st) {
  if (session::level(st.id) == SessionLevel::Top) {
    if (cfg_.invoke_reconstruct)
      mw_start_recon(st.id);
    else if (!terminated_) {
      terminated_ = true;
      sim_.mark_terminated(self_, kNoValue);
    }
    return;
  }
  if (SvssState* pv = find_svss(session::svss_parent(st.id)))
    svss_child_complete(*pv, st.id);
  else
    svss_child_complete(svss_get(session::svss_parent(st.id),
                                 session::svss_dealer(st.id)),
                        st.id);
}

// Reconstruct step 1: broadcast every row value whose owner confirmed us.
void Node::mw_start_recon(uint64_t session) {
  MwState* stp = find_mw(session);
  if (!stp || stp->recon_started) return;
  MwState& st = *stp;
  st.recon_started = true;
  if (st.kpoints.empty()) {
    st.kpoints.assign(n_ + 1, {});
    st.fbar0.assign(n_ + 1, kNoValue);
  }
  Msg m;
  m.dealer = st.dealer;
  m.origin = static_cast<uint8_t>(self_);
  m.session = st.id;
  m.kind = MsgKind::ReconValue;
  for (unsigned l = 1; l <= n_; ++l) {
    if (!(st.mhat >> l & 1) || !(st.lsets[l] >> self_ & 1)) continue;
    if (st.col[l] == kNoValue) continue;
    m.aux = static_cast<uint8_t>(l);
    m.vals = {st.col[l]};
    rb_broadcast(m);
  }
  for (unsigned l = 1; l <= n_; ++l) mw_try_kset(st, l);
  mw_try_output(st);
}

// Reconstruct steps 2-3: the first t+1 broadcast values from confirmed
// senders pin down row l.
void Node::mw_try_kset(MwState& st, unsigned l) {
  if (st.kpoints.empty() || st.fbar0.empty()) return;
  if (st.fbar0[l] != kNoValue || !st.lsets[l]) return;
  std::vector<Point> pts;
  for (const Point& p : st.kpoints[l]) {
    if (!(st.lsets[l] >> p.x & 1)) continue;
    pts.push_back(p);
    if (pts.size() == t_ + 1) break;
  }
  if (pts.size() < t_ + 1) return;
  st.fbar0[l] = interpolate_exact(field_, pts, t_).eval(field_, 0);
  mw_try_output(st);
}

// Reconstruct step 4.
void Node::mw_try_output(MwState& st) {
  if (!st.recon_started || st.output_done || !st.mhat) return;
  std::vector<Point> pts;
  for (unsigned l = 1; l <= n_; ++l) {
    if (!(st.mhat >> l & 1)) continue;
    if (st.fbar0.empty() || st.fbar0[l] == kNoValue) return;
    pts.push_back(Point{l, st.fbar0[l]});
  }
  UniFit fit = interpolate_unipoly(field_, pts, t_);
  st.output_done = true;
  st.output = fit.status == UniFit::Ok ? fit.poly.eval(field_, 0) : kNoValue;
  dmm_.note_output(st.id, static_cast<uint32_t>(sim_.trace().total_steps),
                   st.dealer);
  sim_.ev_output(self_, st.id, st.dealer, st.output);
  mw_output_ready(st);
}

void Node::mw_output_ready(MwState& st) {
  if (session::level(st.id) == SessionLevel::Top) {
    if (!terminated_) {
      terminated_ = true;
      sim_.mark_terminated(self_, st.output);
    }
    return;
  }
  if (SvssState* pv = find_svss(session::svss_parent(st.id)))
    svss_child_output(*pv, st.id);
}

}  // namespace aba
