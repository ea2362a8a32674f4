#include "aba/sim.hpp"

#include <utility>

#include "aba/adversary.hpp"
#include "aba/node.hpp"

namespace aba {

namespace {

RunConfig prepared(RunConfig cfg, Strategy& strategy) {
  strategy.prepare(cfg);
  cfg.validate();
  return cfg;
}

constexpr uint32_t kGone = ~0u;  // Envelope::pos of a delivered envelope

}  // namespace

// --- SchedView --------------------------------------------------------------

size_t SchedView::pending_count() const { return sim_.pending_.size(); }

uint32_t SchedView::oldest() {
  auto& q = sim_.fifo_all_;
  while (!q.empty() && sim_.envelopes_[q.front()].pos == kGone) q.pop_front();
  return q.empty() ? kNoEnvelope : q.front();
}

uint32_t SchedView::oldest_in_class(unsigned cls) {
  if (cls >= sim_.fifo_class_.size()) return kNoEnvelope;
  auto& q = sim_.fifo_class_[cls];
  while (!q.empty() && sim_.envelopes_[q.front()].pos == kGone) q.pop_front();
  return q.empty() ? kNoEnvelope : q.front();
}

uint32_t SchedView::random_pending(Rng& rng) const {
  if (sim_.pending_.empty()) return kNoEnvelope;
  return sim_.pending_[rng.below(sim_.pending_.size())];
}

uint32_t SchedView::nth_pending(size_t i) const { return sim_.pending_[i]; }

const Envelope& SchedView::envelope(uint32_t id) const {
  return sim_.envelopes_[id];
}

const Msg* SchedView::payload(uint32_t id) const {
  const Envelope& e = sim_.envelopes_[id];
  if (!sim_.is_faulty(e.from) && !sim_.is_faulty(e.to)) return nullptr;
  return &sim_.trace_.payloads[e.payload];
}

// --- Sim --------------------------------------------------------------------

Sim::Sim(const RunConfig& config)
    : strategy_(make_strategy(config.adversary)),
      cfg_(prepared(config, *strategy_)),
      field_(cfg_.prime),
      sched_rng_(mix_seed(cfg_.seed, 0x5c4ed)),
      strategy_rng_(mix_seed(cfg_.seed, 0xad5a17)) {
  track_classes_ = strategy_->uses_classes();
  node_rngs_.reserve(cfg_.n + 1);
  for (unsigned p = 0; p <= cfg_.n; ++p)
    node_rngs_.emplace_back(mix_seed(cfg_.seed, 0x100 + p));
  for (uint8_t f : cfg_.faulty) faulty_mask_ |= 1ULL << f;
  for (unsigned p = 1; p <= cfg_.n; ++p)
    if (!is_faulty(p)) honest_mask_ |= 1ULL << p;
  top_output_.assign(cfg_.n + 1, kNoValue);

  trace_.config = cfg_;
  Rng input_rng(mix_seed(cfg_.seed, 0x1d));
  trace_.secret = cfg_.secret != RunConfig::kUnset ? cfg_.secret
                                                   : input_rng.below(field_.p());
  trace_.moderator_value = cfg_.moderator_value != RunConfig::kUnset
                               ? cfg_.moderator_value
                               : trace_.secret;
  trace_.ba_inputs.assign(cfg_.n + 1, 0);
  for (unsigned p = 1; p <= cfg_.n; ++p)
    trace_.ba_inputs[p] = cfg_.ba_inputs.empty()
                              ? uint8_t(input_rng.below(2))
                              : cfg_.ba_inputs[p - 1];
  strategy_->on_inputs(*this, trace_);

  nodes_.resize(cfg_.n + 1);
  for (unsigned p = 1; p <= cfg_.n; ++p)
    nodes_[p] = std::make_unique<Node>(*this, p);
}

Sim::~Sim() = default;

uint32_t Sim::push_payload(const Msg& m) {
  // Broadcast echoes arrive as bursts of identical sends; collapsing them
  // keeps the pool proportional to distinct messages, not envelopes.
  if (!trace_.payloads.empty() && trace_.payloads.back() == m)
    return static_cast<uint32_t>(trace_.payloads.size() - 1);
  trace_.payloads.push_back(m);
  return static_cast<uint32_t>(trace_.payloads.size() - 1);
}

uint32_t Sim::make_envelope(unsigned from, unsigned to, Transport tr,
                            uint32_t payload) {
  uint32_t id = static_cast<uint32_t>(envelopes_.size());
  envelopes_.push_back(Envelope{static_cast<uint8_t>(from),
                                static_cast<uint8_t>(to), tr, 0, payload,
                                static_cast<uint32_t>(trace_.total_steps),
                                static_cast<uint32_t>(picks_), kGone});
  const Msg& m = trace_.payloads[payload];
  if (cfg_.capture_events)
    trace_.append(Event{EventKind::Send, static_cast<uint8_t>(from),
                        static_cast<uint8_t>(to), m.dealer, tr, 0, payload, id,
                        m.session, 0});
  else
    ++trace_.total_steps;
  if (from == to) {
    self_queue_.push_back(id);
  } else {
    envelopes_[id].cls = strategy_->classify(*this, envelopes_[id], m);
    enqueue(id);
  }
  return id;
}

void Sim::send(unsigned from, unsigned to, Transport tr, const Msg& m) {
  if (is_faulty(from)) {
    // Self-sends are rewritten too: a faulty process's broadcast machinery
    // must echo whatever altered value it emits, or the alteration could
    // never gather enough echoes to be accepted anywhere.
    Transport tr2 = tr;
    Msg m2 = m;
    if (!strategy_->rewrite(*this, from, to, tr2, m2)) return;
    make_envelope(from, to, tr2, push_payload(m2));
    return;
  }
  make_envelope(from, to, tr, push_payload(m));
}

void Sim::send_all(unsigned from, Transport tr, const Msg& m) {
  if (is_faulty(from)) {
    // The rewrite hook may alter each recipient's copy differently, so the
    // burst degenerates to individual sends.
    for (unsigned to = 1; to <= cfg_.n; ++to) send(from, to, tr, m);
    return;
  }
  uint32_t payload = push_payload(m);
  for (unsigned to = 1; to <= cfg_.n; ++to)
    make_envelope(from, to, tr, payload);
}

void Sim::inject(unsigned from, unsigned to, Transport tr, const Msg& m) {
  if (!is_faulty(from))
    throw SimError("strategy attempted to forge an honest sender");
  make_envelope(from, to, tr, push_payload(m));
}

void Sim::enqueue(uint32_t id) {
  Envelope& e = envelopes_[id];
  e.pos = static_cast<uint32_t>(pending_.size());
  pending_.push_back(id);
  fifo_all_.push_back(id);
  // With no faulty processes fifo_honest_ would duplicate fifo_all_, and
  // without a class-aware strategy the class queues are never consulted;
  // both are pure overhead on the all-honest fast path.
  if (faulty_mask_ && !is_faulty(e.from) && !is_faulty(e.to))
    fifo_honest_.push_back(id);
  if (track_classes_) {
    if (e.cls >= fifo_class_.size()) fifo_class_.resize(e.cls + 1);
    fifo_class_[e.cls].push_back(id);
  }
}

void Sim::remove_pending(uint32_t id) {
  Envelope& e = envelopes_[id];
  uint32_t p = e.pos;
  pending_[p] = pending_.back();
  envelopes_[pending_[p]].pos = p;
  pending_.pop_back();
  e.pos = kGone;
}

void Sim::deliver(uint32_t id) {
  remove_pending(id);
  const Envelope& e = envelopes_[id];
  const Msg& m = trace_.payloads[e.payload];
  if (cfg_.capture_events)
    trace_.append(Event{EventKind::Deliver, e.to, e.from, m.dealer,
                        e.transport, 0, e.payload, id, m.session, 0});
  else
    ++trace_.total_steps;
  nodes_[e.to]->on_deliver(e, m);
}

void Sim::drain_self_queue() {
  if (draining_self_) return;
  draining_self_ = true;
  while (!self_queue_.empty()) {
    uint32_t id = self_queue_.front();
    self_queue_.pop_front();
    const Envelope& e = envelopes_[id];
    const Msg& m = trace_.payloads[e.payload];
    if (cfg_.capture_events)
      trace_.append(Event{EventKind::Deliver, e.to, e.from, m.dealer,
                          e.transport, 0, e.payload, id, m.session, 0});
    else
      ++trace_.total_steps;
    nodes_[e.to]->on_deliver(e, m);
  }
  draining_self_ = false;
}

uint32_t Sim::pick_next() {
  auto& honest_q = faulty_mask_ ? fifo_honest_ : fifo_all_;
  while (!honest_q.empty() && envelopes_[honest_q.front()].pos == kGone)
    honest_q.pop_front();
  if (!honest_q.empty()) {
    // Fairness: the oldest nonfaulty-pair envelope cannot starve past the
    // budget, whatever the strategy wants.
    const Envelope& eldest = envelopes_[honest_q.front()];
    if (picks_ - eldest.send_pick >= cfg_.effective_fairness_budget())
      return honest_q.front();
  }
  SchedView view(*this);
  uint32_t id = strategy_->choose(view, strategy_rng_);
  if (id == kNoEnvelope) {
    // Resting is only allowed once all nonfaulty-pair traffic is drained.
    if (!honest_q.empty()) return honest_q.front();
    return kNoEnvelope;
  }
  if (id >= envelopes_.size() || envelopes_[id].pos == kGone)
    throw SimError("strategy chose a non-pending envelope");
  return id;
}

Trace Sim::run() {
  for (unsigned p = 1; p <= cfg_.n; ++p) {
    nodes_[p]->start();
    drain_self_queue();
  }
  while (true) {
    if ((terminated_mask_ & honest_mask_) == honest_mask_) {
      trace_.outcome = Outcome::Completed;
      break;
    }
    if (trace_.total_steps >= cfg_.max_events) {
      trace_.outcome = Outcome::Cutoff;
      break;
    }
    if (pending_.empty()) {
      trace_.outcome = Outcome::Quiescent;
      break;
    }
    uint32_t id = pick_next();
    if (id == kNoEnvelope) {
      trace_.outcome = Outcome::Quiescent;
      break;
    }
    ++picks_;
    deliver(id);
    strategy_->on_step(*this);
    drain_self_queue();
  }
  trace_.outputs = top_output_;
  for (unsigned p = 1; p <= cfg_.n; ++p) {
    for (const Expectation& e : nodes_[p]->dmm().expectations())
      if (e.alive)
        trace_.leftovers.push_back(LeftoverExpectation{
            static_cast<uint8_t>(p), e.sender, e.row, e.side, e.session});
    if (cfg_.protocol == Protocol::Ba && !(faulty_mask_ >> p & 1))
      trace_.ba_rounds = std::max(trace_.ba_rounds, nodes_[p]->ba_round());
  }
  return std::move(trace_);
}

void Sim::ev_session_start(unsigned p, uint64_t session, unsigned dealer) {
  trace_.append(Event{EventKind::SessionStart, static_cast<uint8_t>(p), 0,
                      static_cast<uint8_t>(dealer), Transport::Direct, 0,
                      kNoPayload, kNoEnvelope, session, 0});
}

void Sim::ev_session_complete(unsigned p, uint64_t session, unsigned dealer) {
  trace_.append(Event{EventKind::SessionComplete, static_cast<uint8_t>(p), 0,
                      static_cast<uint8_t>(dealer), Transport::Direct, 0,
                      kNoPayload, kNoEnvelope, session, 0});
}

void Sim::ev_output(unsigned p, uint64_t session, unsigned dealer,
                    uint64_t value) {
  trace_.append(Event{EventKind::Output, static_cast<uint8_t>(p), 0,
                      static_cast<uint8_t>(dealer), Transport::Direct, 0,
                      kNoPayload, kNoEnvelope, session, value});
}

void Sim::ev_shun(unsigned p, unsigned shunned, uint64_t session,
                  unsigned dealer) {
  trace_.shuns.push_back(ShunRecord{static_cast<uint8_t>(p),
                                    static_cast<uint8_t>(shunned), session,
                                    static_cast<uint32_t>(trace_.total_steps)});
  trace_.append(Event{EventKind::ShunAdd, static_cast<uint8_t>(p),
                      static_cast<uint8_t>(shunned),
                      static_cast<uint8_t>(dealer), Transport::Direct, 0,
                      kNoPayload, kNoEnvelope, session, 0});
}

void Sim::ev_filtered(EventKind kind, unsigned p, unsigned sender,
                      uint32_t payload, uint64_t held_at) {
  if (!cfg_.capture_events) {
    ++trace_.total_steps;
    return;
  }
  const Msg& m = trace_.payloads[payload];
  trace_.append(Event{kind, static_cast<uint8_t>(p),
                      static_cast<uint8_t>(sender), m.dealer, Transport::Direct,
                      0, payload, kNoEnvelope, m.session, held_at});
}

void Sim::mark_terminated(unsigned p, uint64_t output) {
  if (terminated_mask_ >> p & 1) return;
  terminated_mask_ |= 1ULL << p;
  top_output_[p] = output;
}

Trace run_simulation(const RunConfig& config) { return Sim(config).run(); }

}  // namespace aba
