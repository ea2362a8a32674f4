#include "aba/adversary.hpp"

#include <stdexcept>
#include <utility>
#include <vector>

#include "aba/field.hpp"
#include "aba/node.hpp"

namespace aba {

namespace {

// Delivers strictly oldest-first; the baseline schedule.
struct Honest : Strategy {};

struct RandomSched : Strategy {
  uint32_t choose(SchedView& view, Rng& rng) override {
    return view.random_pending(rng);
  }
};

// Starves one process: everything to or from it waits until nothing else is
// pending (or the fairness clock forces it through).
struct DelayOne : Strategy {
  bool uses_classes() const override { return true; }
  unsigned p;
  explicit DelayOne(unsigned p) : p(p) {}

  void prepare(RunConfig& cfg) override {
    if (p == 0 || p > cfg.n) p = cfg.n;
  }
  uint8_t classify(const Sim&, const Envelope& env, const Msg&) override {
    return env.from == p || env.to == p ? 1 : 0;
  }
  uint32_t choose(SchedView& view, Rng&) override {
    uint32_t id = view.oldest_in_class(0);
    return id == kNoEnvelope ? view.oldest() : id;
  }
};

// A corrupted dealer hands every recipient a perturbed copy of its private
// share messages, so no two processes see consistent values.
struct EquivocatingDealer : Strategy {
  uint64_t prime = 0;

  void prepare(RunConfig& cfg) override {
    prime = cfg.prime;
    if (cfg.faulty.empty()) cfg.faulty = {uint8_t(cfg.dealer)};
  }
  bool rewrite(Sim&, unsigned from, unsigned to, Transport&,
               Msg& m) override {
    switch (m.kind) {
      case MsgKind::RowValues:
      case MsgKind::RowPoly:
      case MsgKind::FPoly:
      case MsgKind::BipolyShares:
        if (m.origin == from)
          for (uint64_t& v : m.vals) v = (v + to) % prime;
        break;
      default:
        break;
    }
    return true;
  }
};

// The moderator is corrupted and moderates for a different value than the
// dealer shared; its protocol behaviour is otherwise honest.
struct LyingModerator : Strategy {
  void prepare(RunConfig& cfg) override {
    if (cfg.faulty.empty()) cfg.faulty = {uint8_t(cfg.moderator)};
  }
  void on_inputs(Sim&, Trace& trace) override {
    trace.moderator_value = (trace.secret + 1) % trace.config.prime;
  }
};

// Corrupted processes run the share phase honestly but never publish their
// own reconstruction values (echoes of other processes' values still flow).
struct WithholdReconstruct : Strategy {
  void prepare(RunConfig& cfg) override {
    if (cfg.faulty.empty()) cfg.faulty = {uint8_t(cfg.n)};
  }
  bool rewrite(Sim&, unsigned from, unsigned, Transport&, Msg& m) override {
    return !(m.kind == MsgKind::ReconValue && m.origin == from);
  }
};

// The scripted disagreement schedule: dealer 2 is corrupted, moderator is 1,
// the top t processes are starved. The share phase completes among the rest
// with L = M = {1..n-t}. During reconstruction the victims (3..t+2) accept
// dealer 2's values plus the honest values of the other victims first and
// output a planted secret; the moderator accepts only honest values first
// and outputs the real one. Dealer 2's lie about the moderator's own row is
// scheduled last, so the moderator starts shunning 2 only after the
// conflicting outputs exist.
struct Example1 : Strategy {
  bool uses_classes() const override { return true; }
  unsigned n = 0, t = 0;
  uint64_t prime = 0;

  void prepare(RunConfig& cfg) override {
    if (cfg.protocol != Protocol::Mwsvss)
      throw std::invalid_argument("example1 drives the mwsvss protocol");
    if (cfg.n < 4 || cfg.t < 1)
      throw std::invalid_argument("example1 needs n >= 4 and t >= 1");
    cfg.dealer = 2;
    cfg.moderator = 1;
    cfg.faulty = {2};
    cfg.invoke_reconstruct = true;
    if (cfg.fairness_budget < (1u << 20)) cfg.fairness_budget = 1u << 20;
    n = cfg.n;
    t = cfg.t;
    prime = cfg.prime;
  }

  // W: the value suppliers the victims hear first (the dealer plus the
  // victims themselves; |W| = t+1).
  bool in_w(unsigned p) const { return p == 2 || (p >= 3 && p <= t + 2); }
  bool victim(unsigned p) const { return p >= 3 && p <= t + 2; }

  uint8_t classify(const Sim&, const Envelope& env, const Msg& m) override {
    if (env.from > n - t || env.to > n - t) return 9;  // starved
    if (m.kind != MsgKind::ReconValue) return 0;
    if (m.origin == 2) return victim(env.to) ? 1 : 8;
    if (in_w(m.origin)) return 1;
    return victim(env.to) ? 8 : 2;
  }

  uint32_t choose(SchedView& view, Rng&) override {
    for (uint8_t c : {0, 1, 2, 8, 9}) {
      uint32_t id = view.oldest_in_class(c);
      if (id != kNoEnvelope) return id;
    }
    return view.oldest();
  }

  // Replace dealer 2's published row values by values consistent with a
  // planted secret v* on the rows the victims reconstruct from W. With
  // h~ the degree-t polynomial through (0,v*) and (m,f(m)) for m in W\{2},
  // the value for row l becomes f_l(2) + (h~(l) - f(l)) * lam(2), where
  // lam vanishes on W\{2} and is 1 at 0. The victims' row interpolations
  // then land on h~, which fits a degree-t polynomial with free term v*;
  // rows 3..t+2 keep their true values, so only the bystanders' own-row
  // expectations can catch the lie.
  bool rewrite(Sim& sim, unsigned, unsigned, Transport&, Msg& m) override {
    if (m.kind != MsgKind::ReconValue || m.origin != 2 ||
        m.session != session::kTop || m.vals.size() != 1)
      return true;
    const MwState* st = sim.node(2).find_mw(session::kTop);
    if (!st || !st->dealt) return true;
    const Field& F = sim.field();
    uint64_t vstar = (sim.trace().secret + 1) % prime;
    std::vector<Point> pts{Point{0, vstar}};
    for (unsigned w = 3; w <= t + 2; ++w)
      pts.push_back(Point{w, st->f.eval(F, w)});
    UniPoly htilde = interpolate_exact(F, pts, t);
    unsigned l = m.aux;
    uint64_t delta = F.sub(htilde.eval(F, l), st->f.eval(F, l));
    uint64_t lam = 1;
    for (unsigned w = 3; w <= t + 2; ++w)
      lam = F.mul(lam, F.mul(F.sub(w, 2), F.inv(w)));
    m.vals[0] = F.add(st->rows[l].eval(F, 2), F.mul(delta, lam));
    return true;
  }
};

unsigned parse_process(const std::string& v) {
  size_t pos = 0;
  unsigned long x = std::stoul(v, &pos);
  if (pos != v.size() || x > 63) throw std::invalid_argument("bad process id");
  return static_cast<unsigned>(x);
}

}  // namespace

std::unique_ptr<Strategy> make_strategy(const std::string& spec) {
  std::string name = spec;
  std::vector<std::pair<std::string, std::string>> params;
  if (size_t colon = spec.find(':'); colon != std::string::npos) {
    name = spec.substr(0, colon);
    std::string rest = spec.substr(colon + 1);
    size_t at = 0;
    while (at < rest.size()) {
      size_t comma = rest.find(',', at);
      if (comma == std::string::npos) comma = rest.size();
      std::string item = rest.substr(at, comma - at);
      size_t eq = item.find('=');
      if (eq == std::string::npos || eq == 0)
        throw std::invalid_argument("adversary parameter must be key=value: " +
                                    item);
      params.emplace_back(item.substr(0, eq), item.substr(eq + 1));
      at = comma + 1;
    }
  }
  auto want = [&](std::initializer_list<const char*> keys) {
    for (const auto& [k, v] : params) {
      (void)v;
      bool known = false;
      for (const char* key : keys)
        if (k == key) known = true;
      if (!known)
        throw std::invalid_argument("unknown parameter '" + k +
                                    "' for adversary " + name);
    }
  };
  auto get = [&](const std::string& key,
                 const std::string& dflt) -> std::string {
    for (const auto& [k, v] : params)
      if (k == key) return v;
    return dflt;
  };

  if (name == "honest" || name == "fifo") {
    want({});
    return std::make_unique<Honest>();
  }
  if (name == "random") {
    want({});
    return std::make_unique<RandomSched>();
  }
  if (name == "delay-one") {
    want({"p"});
    return std::make_unique<DelayOne>(parse_process(get("p", "0")));
  }
  if (name == "example1") {
    want({});
    return std::make_unique<Example1>();
  }
  if (name == "equivocating-dealer") {
    want({});
    return std::make_unique<EquivocatingDealer>();
  }
  if (name == "lying-moderator") {
    want({});
    return std::make_unique<LyingModerator>();
  }
  if (name == "withhold-reconstruct") {
    want({});
    return std::make_unique<WithholdReconstruct>();
  }
  throw std::invalid_argument("unknown adversary: " + name);
}

}  // namespace aba
