#include <algorithm>
#include <bit>

#include "aba/node.hpp"

namespace aba {

namespace {
bool subset(uint64_t a, uint64_t b) { return (a & ~b) == 0; }
unsigned bits(uint64_t v) { return static_cast<unsigned>(std::popcount(v)); }
}  // namespace

SvssState& Node::svss_get(uint64_t session, unsigned dealer) {
  bool fresh = false;
  uint32_t idx = svss_index_.at_or_insert(
      session, static_cast<uint32_t>(svss_.size()), &fresh);
  if (!fresh) return svss_[idx];
  svss_.emplace_back();
  SvssState& st = svss_.back();
  st.id = session;
  st.dealer = static_cast<uint8_t>(dealer);
  st.gsets.assign(n_ + 1, 0);
  st.ghat_sets.assign(n_ + 1, 0);
  st.pair_done.assign((n_ + 1) * (n_ + 1), 0);
  dmm_.note_start(session, static_cast<uint32_t>(sim_.trace().total_steps));
  sim_.ev_session_start(self_, session, dealer);
  return st;
}

void Node::svss_start_dealer(uint64_t session, uint64_t secret) {
  SvssState& st = svss_get(session, self_);
  if (st.dealt) return;
  st.dealt = true;
  st.secret = secret;
  st.f = random_bipoly(field_, secret, t_, sim_.node_rng(self_));
  Msg m;
  m.kind = MsgKind::BipolyShares;
  m.dealer = static_cast<uint8_t>(self_);
  m.origin = static_cast<uint8_t>(self_);
  m.session = session;
  for (unsigned j = 1; j <= n_; ++j) {
    UniPoly gj = bipoly_row(field_, st.f, j);
    UniPoly hj = bipoly_col(field_, st.f, j);
    m.vals.clear();
    for (unsigned x = 1; x <= t_ + 1; ++x)
      m.vals.push_back(gj.eval(field_, x));
    for (unsigned x = 1; x <= t_ + 1; ++x)
      m.vals.push_back(hj.eval(field_, x));
    send(j, Transport::Direct, m);
  }
}

// The value this process moderates in a child session, from its own shares.
uint64_t Node::svss_moderator_value(const SvssState& st, uint64_t child) const {
  if (!st.have_shares) return kNoValue;
  unsigned a = session::pair_low(child), b = session::pair_high(child);
  switch (session::pattern(child)) {
    case 0: return st.g.eval(field_, a);  // self = b, entry f(b,a)
    case 1: return st.h.eval(field_, a);  // self = b, entry f(a,b)
    case 2: return st.g.eval(field_, b);  // self = a, entry f(a,b)
    default: return st.h.eval(field_, b); // self = a, entry f(b,a)
  }
}

// The secret this process deals in a child session, from its own shares.
uint64_t Node::svss_dealt_value(const SvssState& st, uint64_t child) const {
  unsigned a = session::pair_low(child), b = session::pair_high(child);
  switch (session::pattern(child)) {
    case 0: return st.h.eval(field_, b);  // self = a, entry f(b,a)
    case 1: return st.g.eval(field_, b);  // self = a, entry f(a,b)
    case 2: return st.h.eval(field_, a);  // self = b, entry f(a,b)
    default: return st.g.eval(field_, a); // self = b, entry f(b,a)
  }
}

void Node::svss_handle(unsigned sender, const Msg& m) {
  unsigned dealer = session::svss_dealer(m.session);
  unsigned slot = session::svss_slot(m.session);
  if (m.dealer != dealer || dealer < 1 || dealer > n_ || slot > n_ ||
      m.session !=
          session::svss(session::round(m.session), dealer, slot)) {
    malformed(sender, m);
    return;
  }
  switch (m.kind) {
    case MsgKind::BipolyShares: {
      if (sender != dealer || m.vals.size() != 2 * (t_ + 1) ||
          !vals_in_field(m)) {
        malformed(sender, m);
        return;
      }
      SvssState& st = svss_get(m.session, dealer);
      if (st.have_shares) return;
      std::vector<Point> pts(t_ + 1);
      for (unsigned x = 0; x <= t_; ++x) pts[x] = Point{x + 1, m.vals[x]};
      st.g = interpolate_exact(field_, pts, t_);
      for (unsigned x = 0; x <= t_; ++x)
        pts[x] = Point{x + 1, m.vals[t_ + 1 + x]};
      st.h = interpolate_exact(field_, pts, t_);
      st.have_shares = true;
      svss_spawn(st);
      // Children where we moderate may predate our shares; backfill them.
      for (unsigned l = 1; l <= n_; ++l) {
        if (l == self_) continue;
        unsigned p0 = self_ < l ? 2 : 0;
        for (unsigned pat = p0; pat < p0 + 2; ++pat) {
          uint64_t child = session::mw_child(st.id, self_, l, pat);
          if (MwState* cs = find_mw(child))
            mw_set_moderator_value(*cs, svss_moderator_value(st, child));
        }
      }
      svss_try_complete(st);
      return;
    }
    case MsgKind::GSets: {
      if (sender != dealer || m.vals.empty() || !valid_pset(m.vals[0]) ||
          bits(m.vals[0]) < n_ - t_ ||
          m.vals.size() != 1 + bits(m.vals[0])) {
        malformed(sender, m);
        return;
      }
      for (size_t i = 1; i < m.vals.size(); ++i)
        if (!valid_pset(m.vals[i]) || bits(m.vals[i]) < n_ - t_) {
          malformed(sender, m);
          return;
        }
      SvssState& st = svss_get(m.session, dealer);
      if (st.have_ghat) return;
      st.have_ghat = true;
      st.ghat = m.vals[0];
      size_t i = 1;
      for (unsigned j = 1; j <= n_; ++j)
        if (st.ghat >> j & 1) st.ghat_sets[j] = m.vals[i++];
      svss_try_complete(st);
      if (st.recon_started) svss_start_recon(st.id);
      return;
    }
    case MsgKind::CoinAccept:
      // Public completion notice for one coin share; carries no local state
      // beyond the broadcast surface itself.
      if (m.aux != session::svss_dealer(m.session) || m.vals.size() != 1 ||
          m.vals[0] != session::svss_slot(m.session) ||
          session::svss_slot(m.session) < 1)
        malformed(sender, m);
      return;
    default:
      malformed(sender, m);
  }
}

// Enter the four per-pair child sessions for every peer: two as dealer here;
// the moderator/holder sides spin up on arrival of the dealers' sends.
void Node::svss_spawn(SvssState& st) {
  if (st.spawned) return;
  st.spawned = true;
  for (unsigned l = 1; l <= n_; ++l) {
    if (l == self_) continue;
    unsigned p0 = self_ < l ? 0 : 2;
    for (unsigned pat = p0; pat < p0 + 2; ++pat) {
      uint64_t child = session::mw_child(st.id, self_, l, pat);
      mw_start_dealer(child, l, svss_dealt_value(st, child));
    }
  }
}

void Node::svss_child_complete(SvssState& st, uint64_t child) {
  unsigned a = session::pair_low(child), b = session::pair_high(child);
  uint8_t& done = st.pair_done[a * (n_ + 1) + b];
  done |= uint8_t(1) << session::pattern(child);
  if (done == 0xf && self_ == st.dealer) {
    st.gsets[a] |= 1ULL << b;
    st.gsets[b] |= 1ULL << a;
    for (unsigned x : {a, b})
      if (bits(st.gsets[x]) >= n_ - t_ && !(st.g_mask >> x & 1)) {
        st.g_mask |= 1ULL << x;
        if (!st.sent_gsets && bits(st.g_mask) >= n_ - t_) {
          st.sent_gsets = true;
          Msg m;
          m.kind = MsgKind::GSets;
          m.dealer = static_cast<uint8_t>(self_);
          m.origin = static_cast<uint8_t>(self_);
          m.session = st.id;
          m.vals = {st.g_mask};
          for (unsigned j = 1; j <= n_; ++j)
            if (st.g_mask >> j & 1) m.vals.push_back(st.gsets[j]);
          rb_broadcast(m);
        }
      }
  }
  svss_try_complete(st);
}

void Node::svss_try_complete(SvssState& st) {
  if (st.share_complete || !st.have_ghat) return;
  for (unsigned j = 1; j <= n_; ++j) {
    if (!(st.ghat >> j & 1)) continue;
    for (unsigned l = 1; l <= n_; ++l) {
      if (!(st.ghat_sets[j] >> l & 1)) continue;
      if (l == j) return;  // no such pair exists; cannot complete
      unsigned a = j < l ? j : l, b = j < l ? l : j;
      if (st.pair_done[a * (n_ + 1) + b] != 0xf) return;
    }
  }
  st.share_complete = true;
  sim_.ev_session_complete(self_, st.id, st.dealer);
  svss_completed(st);
}

void Node::svss_completed(SvssState& st) {
  if (session::svss_slot(st.id) == 0) {
    // Directly invoked session.
    if (cfg_.invoke_reconstruct)
      svss_start_recon(st.id);
    else if (!terminated_) {
      terminated_ = true;
      sim_.mark_terminated(self_, kNoValue);
    }
    return;
  }
  coin_share_complete(session::round(st.id), session::svss_dealer(st.id),
                      session::svss_slot(st.id));
}

// Reconstruct step 1: run every child reconstruction referenced by the
// dealer's published sets. Waits for those sets if they are not here yet.
void Node::svss_start_recon(uint64_t session) {
  SvssState& st = svss_get(session, session::svss_dealer(session));
  st.recon_started = true;
  if (st.recon_invoked || !st.have_ghat) return;
  st.recon_invoked = true;
  std::vector<uint64_t> children;
  for (unsigned k = 1; k <= n_; ++k) {
    if (!(st.ghat >> k & 1)) continue;
    for (unsigned l = 1; l <= n_; ++l) {
      if (!(st.ghat_sets[k] >> l & 1) || l == k) continue;
      for (unsigned pat = 0; pat < 4; ++pat)
        children.push_back(session::mw_child(session, k, l, pat));
    }
  }
  std::sort(children.begin(), children.end());
  children.erase(std::unique(children.begin(), children.end()),
                 children.end());
  st.recon_pending = static_cast<uint32_t>(children.size());
  for (uint64_t c : children) mw_start_recon(c);
  svss_try_output(st);
}

void Node::svss_child_output(SvssState& st, uint64_t) {
  if (!st.recon_invoked || st.recon_pending == 0) return;
  if (--st.recon_pending == 0) svss_try_output(st);
}

// Reconstruct steps 2-3 over the completed child outputs.
void Node::svss_try_output(SvssState& st) {
  if (!st.recon_invoked || st.recon_pending != 0 || st.output_done) return;

  auto child_out = [&](unsigned x, unsigned k, unsigned l) -> uint64_t {
    MwState* c = find_mw(session::mw_entry(st.id, x, k, l));
    return c && c->output_done ? c->output : kNoValue;
  };

  // Step 2: drop dealers whose own-dealt row or column family is broken.
  uint64_t ignore = 0;  // I: dealers whose values j ignores
  std::vector<UniPoly> gk(n_ + 1), hk(n_ + 1);
  for (unsigned k = 1; k <= n_; ++k) {
    if (!(st.ghat >> k & 1)) continue;
    bool bad = false;
    std::vector<Point> rows, cols;
    for (unsigned l = 1; l <= n_; ++l) {
      if (!(st.ghat_sets[k] >> l & 1)) continue;
      if (l == k) {
        bad = true;
        break;
      }
      uint64_t r1 = child_out(k, k, l);  // k's sharing of f(k,l)
      uint64_t r2 = child_out(k, l, k);  // k's sharing of f(l,k)
      if (r1 == kNoValue || r2 == kNoValue) {
        bad = true;
        break;
      }
      rows.push_back(Point{l, r1});
      cols.push_back(Point{l, r2});
    }
    if (!bad) {
      UniFit rf = interpolate_unipoly(field_, rows, t_);
      UniFit cf = interpolate_unipoly(field_, cols, t_);
      if (rf.status != UniFit::Ok || cf.status != UniFit::Ok) bad = true;
      else {
        gk[k] = rf.poly;
        hk[k] = cf.poly;
      }
    }
    if (bad) ignore |= 1ULL << k;
  }

  // Step 3: pairwise cross-check, then the unique-bivariate fit.
  uint64_t good = st.ghat & ~ignore;
  uint64_t out = kNoValue;
  bool consistent = true;
  for (unsigned k = 1; k <= n_ && consistent; ++k) {
    if (!(good >> k & 1)) continue;
    for (unsigned l = 1; l <= n_; ++l) {
      if (!(good >> l & 1)) continue;
      if (hk[k].eval(field_, l) != gk[l].eval(field_, k)) {
        consistent = false;
        break;
      }
    }
  }
  if (consistent) {
    // After the cross-check the row and column constraint families agree,
    // so the grid of row values carries all of them.
    std::vector<BiConstraint> cons;
    for (unsigned k = 1; k <= n_; ++k) {
      if (!(good >> k & 1)) continue;
      for (unsigned l = 1; l <= n_; ++l)
        if (good >> l & 1)
          cons.push_back(BiConstraint{k, l, gk[k].eval(field_, l)});
    }
    BiFit fit = interpolate_bipoly(field_, cons, t_);
    if (fit.status == BiFit::Ok) out = fit.poly.eval(field_, 0, 0);
  }

  st.output_done = true;
  st.output = out;
  dmm_.note_output(st.id, static_cast<uint32_t>(sim_.trace().total_steps),
                   st.dealer);
  sim_.ev_output(self_, st.id, st.dealer, st.output);
  svss_output_ready(st);
}

void Node::svss_output_ready(SvssState& st) {
  if (session::svss_slot(st.id) == 0) {
    if (!terminated_) {
      terminated_ = true;
      sim_.mark_terminated(self_, st.output);
    }
    return;
  }
  if (CoinState* cs = find_coin(session::round(st.id)))
    coin_recon_output(*cs, session::svss_dealer(st.id),
                      session::svss_slot(st.id), st.output);
}

}  // namespace aba
