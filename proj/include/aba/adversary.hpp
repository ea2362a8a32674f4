#pragma once

#include <memory>
#include <string>

#include "aba/config.hpp"
#include "aba/msg.hpp"
#include "aba/rng.hpp"
#include "aba/sim.hpp"

namespace aba {

// An adversary controls two dials: which pending envelope the network
// delivers next, and what the corrupted processes actually put on the wire.
// Corrupted processes still run the honest engine underneath; a strategy
// perturbs their visible behaviour by rewriting or suppressing outbound
// messages and by injecting extra ones. It can never forge an honest sender
// and never read honest-to-honest payloads.
class Strategy {
 public:
  virtual ~Strategy() = default;

  // Runs before anything is built. May pin roles, the faulty set, the
  // fairness budget — anything about the run's shape.
  virtual void prepare(RunConfig& cfg) { (void)cfg; }

  // Runs after input derivation (secret, moderator value, vote bits are
  // settled) and before the first send. May overwrite derived inputs.
  virtual void on_inputs(Sim& sim, Trace& trace) {
    (void)sim;
    (void)trace;
  }

  // Priority class stamped on a fresh envelope; choose() can use classes
  // to group traffic. Class 0 is the default bucket. Strategies that never
  // call oldest_in_class() leave uses_classes() false so the scheduler can
  // skip per-class queue upkeep entirely.
  virtual bool uses_classes() const { return false; }
  virtual uint8_t classify(const Sim& sim, const Envelope& env, const Msg& m) {
    (void)sim;
    (void)env;
    (void)m;
    return 0;
  }

  // Pick the next envelope to deliver, or kNoEnvelope to rest. Resting
  // is only meaningful while no nonfaulty-pair traffic is pending; the
  // scheduler forces fairness regardless of what this returns.
  virtual uint32_t choose(SchedView& view, Rng& rng) {
    (void)rng;
    return view.oldest();
  }

  // Outbound hook for faulty senders, self-sends included (a corrupted
  // process's own broadcast machinery echoes what it emits). Mutate the
  // transport or message freely; return false to drop the send entirely.
  virtual bool rewrite(Sim& sim, unsigned from, unsigned to, Transport& tr,
                       Msg& m) {
    (void)sim;
    (void)from;
    (void)to;
    (void)tr;
    (void)m;
    return true;
  }

  // Runs after every delivery; may call sim.inject() with faulty senders.
  virtual void on_step(Sim& sim) { (void)sim; }
};

// Build a strategy from its command-line spelling: a name optionally
// followed by ":key=value,key=value" parameters, e.g. "delay-one:p=4".
// Known names: honest, fifo, random, delay-one, example1,
// equivocating-dealer, lying-moderator, withhold-reconstruct.
// Throws std::invalid_argument for unknown names or malformed parameters.
std::unique_ptr<Strategy> make_strategy(const std::string& spec);

}  // namespace aba
