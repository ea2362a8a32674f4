#include <bit>

#include "aba/node.hpp"

namespace aba {

namespace {
unsigned bits(uint64_t v) { return static_cast<unsigned>(std::popcount(v)); }
}  // namespace

void Node::ba_start() {
  ba_.v = sim_.trace().ba_inputs[self_];
  ba_start_round(1);
}

void Node::ba_start_round(uint32_t r) {
  if (ba_.halted) return;
  if (ba_.rounds.size() <= r) ba_.rounds.resize(r + 1);
  ba_.round = r;
  BaRound& rd = ba_.rounds[r];
  rd.started = true;
  dmm_.note_start(session::ba(r),
                  static_cast<uint32_t>(sim_.trace().total_steps));
  sim_.ev_session_start(self_, session::ba(r), 0);
  Msg m;
  m.kind = MsgKind::PreVote;
  m.origin = static_cast<uint8_t>(self_);
  m.aux = static_cast<uint8_t>(r);
  m.session = session::ba(r);
  m.vals = {ba_.v};
  rb_broadcast(m);
  ba_try_prevote_done(r);
}

void Node::ba_handle(unsigned sender, const Msg& m) {
  uint32_t r = session::round(m.session);
  if (m.session != session::ba(r) || m.dealer != 0 || m.vals.size() != 1 ||
      m.vals[0] > 1) {
    malformed(sender, m);
    return;
  }
  uint64_t b = m.vals[0];
  switch (m.kind) {
    case MsgKind::PreVote: {
      if (r < 1) {
        malformed(sender, m);
        return;
      }
      if (ba_.rounds.size() <= r) ba_.rounds.resize(r + 1);
      BaRound& rd = ba_.rounds[r];
      if (rd.pre_mask >> sender & 1) return;
      rd.pre_mask |= 1ULL << sender;
      ++rd.pre_count[b];
      ba_try_prevote_done(r);
      return;
    }
    case MsgKind::MainVote: {
      if (r < 1) {
        malformed(sender, m);
        return;
      }
      if (ba_.rounds.size() <= r) ba_.rounds.resize(r + 1);
      BaRound& rd = ba_.rounds[r];
      if (rd.main_mask >> sender & 1) return;
      rd.main_mask |= 1ULL << sender;
      ++rd.main_count[b];
      ba_try_mainvote_done(r);
      return;
    }
    case MsgKind::Decide: {
      if (r != 0) {
        malformed(sender, m);
        return;
      }
      if (ba_.decide_mask[b] >> sender & 1) return;
      ba_.decide_mask[b] |= 1ULL << sender;
      if (ba_.halted) return;
      unsigned c = bits(ba_.decide_mask[b]);
      if (c >= n_ - t_) {
        ba_halt(b);
        return;
      }
      if (c >= t_ + 1 && ba_.decided < 0) {
        ba_.decided = static_cast<int8_t>(b);
        ba_.decide_round = ba_.round;
        ba_.v = b;
        ba_decide(b);
      }
      return;
    }
    default:
      malformed(sender, m);
  }
}

// Phase 1 of a round: n-t pre-votes fix the main-vote value (majority of the
// first n-t received, ties keeping the current estimate).
void Node::ba_try_prevote_done(uint32_t r) {
  if (ba_.halted || ba_.round != r) return;
  BaRound& rd = ba_.rounds[r];
  if (!rd.started || rd.pre_done) return;
  if (rd.pre_count[0] + rd.pre_count[1] < n_ - t_) return;
  rd.pre_done = true;
  uint64_t w = rd.pre_count[0] > rd.pre_count[1]   ? 0
               : rd.pre_count[1] > rd.pre_count[0] ? 1
                                                   : ba_.v;
  Msg m;
  m.kind = MsgKind::MainVote;
  m.origin = static_cast<uint8_t>(self_);
  m.aux = static_cast<uint8_t>(r);
  m.session = session::ba(r);
  m.vals = {w};
  rb_broadcast(m);
  ba_try_mainvote_done(r);
}

// Phase 2: n-t main-votes settle the round. A unanimous threshold decides;
// n-2t votes for one value persist it past the coin; otherwise the round's
// coin supplies the next estimate. Every path except the final halt joins
// the coin so that slower processes can finish theirs.
void Node::ba_try_mainvote_done(uint32_t r) {
  if (ba_.halted || ba_.round != r) return;
  BaRound& rd = ba_.rounds[r];
  if (!rd.pre_done || rd.main_done) return;
  if (rd.main_count[0] + rd.main_count[1] < n_ - t_) return;
  rd.main_done = true;
  if (ba_.decided >= 0 && r == ba_.decide_round + 1) {
    ba_halt(static_cast<uint64_t>(ba_.decided));
    return;
  }
  for (uint64_t b : {0, 1}) {
    if (rd.main_count[b] >= n_ - t_ && ba_.decided < 0) {
      ba_.decided = static_cast<int8_t>(b);
      ba_.decide_round = r;
      ba_.v = b;
      ba_decide(b);
    } else if (rd.main_count[b] >= n_ - 2 * t_ && ba_.decided < 0) {
      ba_.v = b;
    }
  }
  rd.use_coin = ba_.decided < 0 && rd.main_count[0] < n_ - 2 * t_ &&
                rd.main_count[1] < n_ - 2 * t_;
  rd.coin_joined = true;
  coin_start(r);
}

void Node::ba_decide(uint64_t b) {
  if (ba_.decide_sent) return;
  ba_.decide_sent = true;
  Msg m;
  m.kind = MsgKind::Decide;
  m.origin = static_cast<uint8_t>(self_);
  m.session = session::ba(0);
  m.vals = {b};
  rb_broadcast(m);
}

void Node::ba_coin_output(uint32_t round, uint64_t bit) {
  if (ba_.halted || ba_.round != round) return;
  BaRound& rd = ba_.rounds[round];
  if (!rd.coin_joined) return;
  if (rd.use_coin) ba_.v = bit;
  ba_start_round(round + 1);
}

void Node::ba_halt(uint64_t b) {
  if (ba_.halted) return;
  ba_.halted = true;
  sim_.ev_output(self_, session::ba(0), 0, b);
  if (!terminated_) {
    terminated_ = true;
    sim_.mark_terminated(self_, b);
  }
}

}  // namespace aba
