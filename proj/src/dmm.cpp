#include "aba/dmm.hpp"

namespace aba {

void Dmm::note_start(uint64_t session, uint32_t step) {
  start_.at_or_insert(session, step);
}

void Dmm::note_output(uint64_t session, uint32_t step, unsigned dealer) {
  bool fresh = false;
  done_.at_or_insert(session, step, &fresh);
  if (!fresh) return;
  if (step < earliest_done_by_dealer_[dealer])
    earliest_done_by_dealer_[dealer] = step;
  // Promote this session's live expectations into the blocking lists.
  const uint32_t* slot = by_session_.find(session);
  if (!slot) return;
  for (uint32_t idx : session_lists_[*slot])
    if (tuples_[idx].alive) blocking_[tuples_[idx].sender].push_back(idx);
}

void Dmm::add(unsigned sender, unsigned row, unsigned side, uint64_t session,
              unsigned dealer, uint64_t x) {
  bool fresh = false;
  uint32_t idx = index_.at_or_insert(key(sender, row, side, session),
                                     uint32_t(tuples_.size()), &fresh);
  if (!fresh) return;  // set semantics: duplicates collapse
  tuples_.push_back(Expectation{uint8_t(sender), uint8_t(row), uint8_t(side),
                                uint8_t(dealer), session, x, true});
  bool new_session = false;
  uint32_t slot = by_session_.at_or_insert(
      session, uint32_t(session_lists_.size()), &new_session);
  if (new_session) session_lists_.emplace_back();
  session_lists_[slot].push_back(idx);
  // Expectations are always recorded during the share phase, before any
  // output for the session, so blocking-list promotion happens later in
  // note_output; but stay safe if an exotic strategy breaks that order.
  if (done_.contains(session)) blocking_[sender].push_back(idx);
}

Filter Dmm::classify(unsigned sender, uint64_t session) const {
  if (distrusted(sender)) return Filter::Discard;
  const uint32_t* started_at = start_.find(session);

  auto held_behind = [&](uint32_t done_step) {
    return !started_at || *started_at > done_step;
  };

  for (uint32_t idx : blocking_[sender]) {
    const Expectation& e = tuples_[idx];
    if (!e.alive) continue;
    if (e.side == 1 && deal_delay_by_sender_) {
      // Alternative reading: the delay key is a session dealt by the
      // expectation's sender rather than the expectation's own session.
      uint32_t at = earliest_done_by_dealer_[e.sender];
      if (at != ~0u && held_behind(at)) return Filter::Delay;
      continue;
    }
    const uint32_t* done_at = done_.find(e.session);
    if (done_at && held_behind(*done_at)) return Filter::Delay;
  }
  return Filter::Forward;
}

std::vector<uint8_t> Dmm::drop_session_deals(uint64_t session) {
  std::vector<uint8_t> senders;
  const uint32_t* slot = by_session_.find(session);
  if (!slot) return senders;
  for (uint32_t idx : session_lists_[*slot]) {
    Expectation& e = tuples_[idx];
    if (e.alive && e.side == 1) {
      e.alive = false;
      senders.push_back(e.sender);
    }
  }
  return senders;
}

Dmm::BroadcastCheck Dmm::on_recon_broadcast(unsigned sender, unsigned row,
                                            uint64_t session,
                                            uint64_t x_prime) {
  BroadcastCheck out;
  for (unsigned side = 0; side < 2; ++side) {
    const uint32_t* idx = index_.find(key(sender, row, side, session));
    if (!idx) continue;
    Expectation& e = tuples_[*idx];
    if (!e.alive) continue;
    if (e.x == x_prime) {
      e.alive = false;
      out.removed = true;
    } else {
      // Contradicted expectations are never removed; the sender is done for.
      out.distrust = true;
    }
  }
  if (out.distrust) add_distrust(sender);
  return out;
}

bool Dmm::has_blocking_expectation(unsigned sender) const {
  for (uint32_t idx : blocking_[sender])
    if (tuples_[idx].alive) return true;
  return false;
}

}  // namespace aba
