#include <bit>

#include "aba/node.hpp"

namespace aba {

namespace {
bool subset(uint64_t a, uint64_t b) { return (a & ~b) == 0; }
unsigned bits(uint64_t v) { return static_cast<unsigned>(std::popcount(v)); }
}  // namespace

CoinState& Node::coin_get(uint32_t round) {
  if (round >= coin_index_.size())
    throw SimError("round counter exhausted");
  if (coin_index_[round] >= 0) return coins_[coin_index_[round]];
  coin_index_[round] = static_cast<int32_t>(coins_.size());
  coins_.emplace_back();
  CoinState& st = coins_.back();
  st.id = session::coin(round);
  st.round = round;
  st.share_done.assign(n_ + 1, 0);
  st.aj.assign(n_ + 1, 0);
  st.recon_started.assign(n_ + 1, 0);
  st.vj.assign(n_ + 1, kNoValue);
  dmm_.note_start(st.id, static_cast<uint32_t>(sim_.trace().total_steps));
  sim_.ev_session_start(self_, st.id, 0);
  return st;
}

// Phase 1: deal one uniform value in {0..n-1} designated for each party.
void Node::coin_start(uint32_t round) {
  CoinState& st = coin_get(round);
  if (st.started) return;
  st.started = true;
  st.secrets.assign(n_ + 1, 0);
  Rng& rng = sim_.node_rng(self_);
  for (unsigned j = 1; j <= n_; ++j) st.secrets[j] = rng.below(n_);
  for (unsigned j = 1; j <= n_; ++j)
    svss_start_dealer(session::svss(round, self_, j), st.secrets[j]);
}

// Phase 2: a share completion is announced publicly; our own designated
// shares accumulate into the attach set.
void Node::coin_share_complete(uint32_t round, unsigned k, unsigned j) {
  CoinState& st = coin_get(round);
  st.share_done[j] |= 1ULL << k;
  Msg m;
  m.kind = MsgKind::CoinAccept;
  m.dealer = static_cast<uint8_t>(k);
  m.origin = static_cast<uint8_t>(self_);
  m.aux = static_cast<uint8_t>(k);
  m.session = session::svss(round, k, j);
  m.vals = {j};
  rb_broadcast(m);
  if (j == self_ && !st.attached_sent && bits(st.share_done[j]) >= n_ - t_) {
    st.attached_sent = true;
    st.my_attach = st.share_done[j];
    m.kind = MsgKind::CoinAttached;
    m.dealer = 0;
    m.aux = 0;
    m.session = st.id;
    m.vals = {st.my_attach};
    rb_broadcast(m);
  }
  coin_update_valid(st);
  coin_drain_declares(st);
  if (st.recon_enabled) coin_try_recon(st);
}

void Node::coin_handle(unsigned sender, const Msg& m) {
  uint32_t round = session::round(m.session);
  if (m.dealer != 0 || m.session != session::coin(round)) {
    malformed(sender, m);
    return;
  }
  switch (m.kind) {
    case MsgKind::CoinAttached: {
      if (m.vals.size() != 1 || !valid_pset(m.vals[0]) ||
          bits(m.vals[0]) != n_ - t_) {
        malformed(sender, m);
        return;
      }
      CoinState& st = coin_get(round);
      if (st.aj[sender]) return;
      st.aj[sender] = m.vals[0];
      coin_update_valid(st);
      coin_drain_declares(st);
      if (st.recon_enabled) coin_try_recon(st);
      return;
    }
    case MsgKind::CoinDeclare: {
      if (m.vals.size() != 1 || !valid_pset(m.vals[0]) ||
          bits(m.vals[0]) < n_ - t_) {
        malformed(sender, m);
        return;
      }
      CoinState& st = coin_get(round);
      if (st.declare_senders >> sender & 1) return;
      for (const auto& [from, mask] : st.declare_wait)
        if (from == sender) return;
      if (coin_declare_ready(st, m.vals[0]))
        coin_fold_declare(st, sender, m.vals[0]);
      else
        st.declare_wait.push_back({static_cast<uint8_t>(sender), m.vals[0]});
      return;
    }
    default:
      malformed(sender, m);
  }
}

// Phase 3 bookkeeping: a party is attach-valid once its accepted attach set
// is covered by our own share completions.
void Node::coin_update_valid(CoinState& st) {
  for (unsigned j = 1; j <= n_; ++j) {
    if ((st.valid_mask >> j & 1) || !st.aj[j]) continue;
    if (!subset(st.aj[j], st.share_done[j])) continue;
    st.valid_mask |= 1ULL << j;
    coin_try_declare(st);
  }
}

void Node::coin_try_declare(CoinState& st) {
  if (st.declare_sent || bits(st.valid_mask) < n_ - t_) return;
  st.declare_sent = true;
  Msg m;
  m.kind = MsgKind::CoinDeclare;
  m.origin = static_cast<uint8_t>(self_);
  m.session = st.id;
  m.vals = {st.valid_mask};
  rb_broadcast(m);
  if (st.declares_seen >= n_ - t_) coin_try_recon(st);
}

// A declaration counts only once every member's attach set is here and its
// attached shares have all completed locally, i.e. once we could open every
// secret it points at. Honest declarations always get there (their members
// were openable at the declarer, and both conditions spread to everyone);
// a declaration that never does is simply never counted. Counting a
// declaration early would let its unopenable members wedge the output wait
// below, and counting only the first n-t would leave processes helping to
// reconstruct different session sets.
bool Node::coin_declare_ready(const CoinState& st, uint64_t mask) const {
  for (unsigned j = 1; j <= n_; ++j)
    if ((mask >> j & 1) &&
        (!st.aj[j] || !subset(st.aj[j], st.share_done[j])))
      return false;
  return true;
}

void Node::coin_fold_declare(CoinState& st, unsigned sender, uint64_t mask) {
  st.declared_mask |= mask;
  st.declare_senders |= 1ULL << sender;
  ++st.declares_seen;
  coin_try_recon(st);
}

void Node::coin_drain_declares(CoinState& st) {
  for (size_t i = 0; i < st.declare_wait.size();) {
    if (coin_declare_ready(st, st.declare_wait[i].second)) {
      auto [from, mask] = st.declare_wait[i];
      st.declare_wait.erase(st.declare_wait.begin() + i);
      coin_fold_declare(st, from, mask);
    } else {
      ++i;
    }
  }
}

// Phase 4: with n-t declarations in hand (and our own out), reconstruct
// every attached secret of every declared party.
void Node::coin_try_recon(CoinState& st) {
  if (!st.recon_enabled) {
    if (st.declares_seen < n_ - t_ || !st.declare_sent) return;
    st.recon_enabled = true;
  }
  for (unsigned j = 1; j <= n_; ++j) {
    if (!(st.declared_mask >> j & 1) || !st.aj[j]) continue;
    if (!subset(st.aj[j], st.share_done[j])) continue;
    for (unsigned k = 1; k <= n_; ++k) {
      if (!(st.aj[j] >> k & 1) || (st.recon_started[j] >> k & 1)) continue;
      st.recon_started[j] |= 1ULL << k;
      svss_start_recon(session::svss(st.round, k, j));
    }
    coin_try_vj(st, j);
  }
}

void Node::coin_recon_output(CoinState& st, unsigned, unsigned j, uint64_t) {
  coin_try_vj(st, j);
}

// v_j = sum of j's attached secrets mod u (u = n); a failed reconstruction
// contributes 0, an out-of-range value its residue.
void Node::coin_try_vj(CoinState& st, unsigned j) {
  if (st.vj[j] != kNoValue) return;
  if (!(st.declared_mask >> j & 1) || !st.aj[j]) return;
  if (st.aj[j] != (st.aj[j] & st.recon_started[j])) return;
  uint64_t sum = 0;
  for (unsigned k = 1; k <= n_; ++k) {
    if (!(st.aj[j] >> k & 1)) continue;
    SvssState* cs = find_svss(session::svss(st.round, k, j));
    if (!cs || !cs->output_done) return;
    if (cs->output != kNoValue) sum += cs->output % n_;
  }
  st.vj[j] = sum % n_;
  coin_try_output(st);
}

// Phase 5.
void Node::coin_try_output(CoinState& st) {
  if (st.output_done || !st.recon_enabled) return;
  bool zero = false;
  for (unsigned j = 1; j <= n_; ++j) {
    if (!(st.declared_mask >> j & 1)) continue;
    if (st.vj[j] == kNoValue) return;
    if (st.vj[j] == 0) zero = true;
  }
  st.output_done = true;
  st.output = zero ? 0 : 1;
  dmm_.note_output(st.id, static_cast<uint32_t>(sim_.trace().total_steps), 0);
  sim_.ev_output(self_, st.id, 0, st.output);
  coin_output_ready(st);
}

void Node::coin_output_ready(CoinState& st) {
  if (cfg_.protocol == Protocol::Scc) {
    if (!terminated_) {
      terminated_ = true;
      sim_.mark_terminated(self_, st.output);
    }
    return;
  }
  ba_coin_output(st.round, st.output);
}

}  // namespace aba
