#include "aba/properties.hpp"

#include <algorithm>
#include <bit>
#include <deque>
#include <map>
#include <sstream>
#include <stdexcept>
#include <utility>

#include "aba/field.hpp"
#include "aba/flatmap.hpp"
#include "aba/session.hpp"

namespace aba {

// --- selection ---------------------------------------------------------------

CheckSelection CheckSelection::all() {
  CheckSelection s;
  s.broadcast = s.mw = s.svss = s.coin = s.ba = s.filter = true;
  // coin_freq stays off: it is not a per-trace check.
  return s;
}

CheckSelection CheckSelection::none() { return {}; }

CheckSelection CheckSelection::for_protocol(Protocol p) {
  CheckSelection s;
  s.filter = true;
  switch (p) {
    case Protocol::Wrb:
    case Protocol::Rb:
      s.broadcast = true;
      break;
    case Protocol::Mwsvss:
      s.mw = true;
      break;
    case Protocol::Svss:
      s.svss = true;
      s.mw = true;  // the four per-pair moderated sessions under each share
      break;
    case Protocol::Scc:
      s.coin = true;
      break;
    case Protocol::Ba:
      s.ba = true;
      s.coin = true;
      break;
  }
  return s;
}

CheckSelection CheckSelection::parse(const std::string& spec) {
  if (spec == "all") return all();
  if (spec == "none") return none();
  CheckSelection s;
  std::stringstream ss(spec);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok == "broadcast") s.broadcast = true;
    else if (tok == "mw") s.mw = true;
    else if (tok == "svss") s.svss = true;
    else if (tok == "coin") s.coin = true;
    else if (tok == "ba") s.ba = true;
    else if (tok == "filter") s.filter = true;
    else if (tok == "coin-freq") s.coin_freq = true;
    else throw std::invalid_argument("unknown check family '" + tok + "'");
  }
  return s;
}

bool CheckSelection::any() const {
  return broadcast || mw || svss || coin || ba || filter || coin_freq;
}

std::string CheckSelection::to_string() const {
  std::string out;
  auto add = [&](bool on, const char* name) {
    if (!on) return;
    if (!out.empty()) out += ',';
    out += name;
  };
  add(broadcast, "broadcast");
  add(mw, "mw");
  add(svss, "svss");
  add(coin, "coin");
  add(ba, "ba");
  add(filter, "filter");
  add(coin_freq, "coin-freq");
  return out.empty() ? "none" : out;
}

// --- trace index -------------------------------------------------------------

namespace {

constexpr uint32_t kNoStep = ~0u;

unsigned bits(uint64_t v) { return static_cast<unsigned>(std::popcount(v)); }

// First start / share-completion / output step of every process in one
// session, plus the output values. Index 0 is unused; faulty processes run
// no protocol state machine, so their columns normally stay empty.
struct SessView {
  uint64_t id = 0;
  std::vector<uint32_t> start, complete, output;
  std::vector<uint64_t> value;
};

struct PairHit {
  uint32_t step;
  uint64_t session;
};

// Payload classes indexed by the scan: the messages whose first latched copy
// an oracle needs to read back. Recording mirrors the receiving node's shape
// validation, so the indexed payload is the one the node actually kept.
enum : uint32_t { kPayRowPoly, kPayShares, kPayMSet, kPayGSets };

// First-own-send classes per (round, process). Relay legs of other
// processes' broadcasts are transport work, not participation, and are
// excluded.
enum : uint64_t {
  kFstRound = 1,  // any message of an agreement round (votes or coin traffic)
  kFstPreVote,
  kFstDecide,
  kFstRecon,    // reconstruct-phase broadcast inside a coin's subtree
  kFstDeclare,  // coin declaration
};

struct Scan {
  const Trace& tr;
  const RunConfig& cfg;
  Field F;
  unsigned n, t;
  uint64_t faulty_mask = 0;

  FlatMap64 six;  // session id -> slot in sess
  std::vector<SessView> sess;
  FlatMap64 fwd_pay;  // (session slot, receiver, class) -> payload index
  FlatMap64 pair_ix;  // (i, j) -> slot in pair_fwd
  std::vector<std::vector<PairHit>> pair_fwd;
  FlatMap64 firsts;  // (class, round, process) -> first send step

  struct Hold {
    uint8_t process, origin;
    uint32_t step;
    uint8_t state = 0;  // 0 still held, 1 later forwarded, 2 discarded
  };
  std::vector<Hold> holds;
  FlatMap64 hold_ix;  // (process, delay step) -> slot in holds

  // Share-privacy preconditions for this trace, and the first structural
  // leak found while scanning (empty = none).
  bool mw_hiding = false, svss_hiding = false;
  std::string mw_leak, svss_leak;

  explicit Scan(const Trace& trace, unsigned extra_i = 0, unsigned extra_j = 0)
      : tr(trace),
        cfg(trace.config),
        F(trace.config.prime),
        n(trace.config.n),
        t(trace.config.t) {
    for (uint8_t f : cfg.faulty) faulty_mask |= 1ULL << f;
    mw_hiding = cfg.protocol == Protocol::Mwsvss && !cfg.invoke_reconstruct &&
                honest(cfg.dealer) && honest(cfg.moderator);
    svss_hiding = cfg.protocol == Protocol::Svss && !cfg.invoke_reconstruct &&
                  honest(cfg.dealer);
    for (const ShunRecord& r : tr.shuns) pair_slot(r.process, r.peer);
    if (extra_i) pair_slot(extra_i, extra_j);
    for (const Event& e : tr.events) scan_event(e);
  }

  bool honest(unsigned p) const { return p && !(faulty_mask >> p & 1); }

  const SessView* view(uint64_t id) const {
    const uint32_t* s = six.find(id);
    return s ? &sess[*s] : nullptr;
  }

  uint32_t touch(uint64_t id) {
    bool created = false;
    uint32_t& slot = six.at_or_insert(id, static_cast<uint32_t>(sess.size()),
                                      &created);
    if (created) {
      sess.emplace_back();
      SessView& v = sess.back();
      v.id = id;
      v.start.assign(n + 1, kNoStep);
      v.complete.assign(n + 1, kNoStep);
      v.output.assign(n + 1, kNoStep);
      v.value.assign(n + 1, kNoValue);
    }
    return slot;
  }

  static uint64_t pay_key(uint32_t slot, unsigned p, uint32_t cls) {
    return (uint64_t(slot) << 10) | (uint64_t(p) << 4) | cls;
  }

  const Msg* payload(uint64_t session, unsigned p, uint32_t cls) const {
    const uint32_t* slot = six.find(session);
    if (!slot) return nullptr;
    const uint32_t* ix = fwd_pay.find(pay_key(*slot, p, cls));
    return ix ? &tr.payloads[*ix] : nullptr;
  }

  uint32_t pair_slot(unsigned i, unsigned j) {
    bool created = false;
    uint32_t& slot =
        pair_ix.at_or_insert((uint64_t(i) << 6) | j,
                             static_cast<uint32_t>(pair_fwd.size()), &created);
    if (created) pair_fwd.emplace_back();
    return slot;
  }

  const std::vector<PairHit>* pair_hits(unsigned i, unsigned j) const {
    const uint32_t* s = pair_ix.find((uint64_t(i) << 6) | j);
    return s ? &pair_fwd[*s] : nullptr;
  }

  void first(uint64_t cls, unsigned round, unsigned p, uint32_t step) {
    firsts.at_or_insert((cls << 20) | (uint64_t(round) << 8) | p, step);
  }

  const uint32_t* first_of(uint64_t cls, unsigned round, unsigned p) const {
    return firsts.find((cls << 20) | (uint64_t(round) << 8) | p);
  }

  unsigned session_dealer(uint64_t s) const {
    switch (session::level(s)) {
      case SessionLevel::Top: return cfg.dealer;
      case SessionLevel::Mw: return session::mw_child_dealer(s);
      case SessionLevel::Svss: return session::svss_dealer(s);
      default: return 0;
    }
  }

  unsigned session_moderator(uint64_t s) const {
    switch (session::level(s)) {
      case SessionLevel::Top: return cfg.moderator;
      case SessionLevel::Mw: return session::mw_child_moderator(s);
      default: return 0;
    }
  }

  bool valid_pset(uint64_t m) const {
    if (!m || (m & 1)) return false;
    return n + 1 >= 64 || (m >> (n + 1)) == 0;
  }

  bool vals_ok(const Msg& m) const {
    for (uint64_t v : m.vals)
      if (v >= F.p()) return false;
    return true;
  }

  void scan_event(const Event& e) {
    switch (e.kind) {
      case EventKind::SessionStart: {
        SessView& v = sess[touch(e.session)];
        if (v.start[e.process] == kNoStep) v.start[e.process] = e.step;
        break;
      }
      case EventKind::SessionComplete: {
        SessView& v = sess[touch(e.session)];
        if (v.complete[e.process] == kNoStep) v.complete[e.process] = e.step;
        break;
      }
      case EventKind::Output: {
        SessView& v = sess[touch(e.session)];
        if (v.output[e.process] == kNoStep) {
          v.output[e.process] = e.step;
          v.value[e.process] = e.value;
        }
        break;
      }
      case EventKind::Forward: {
        const Msg& m = tr.payloads[e.payload];
        record_payload(e, m);
        const uint32_t* s = pair_ix.find((uint64_t(e.process) << 6) | e.peer);
        if (s) pair_fwd[*s].push_back(PairHit{e.step, m.session});
        if (e.value != kNoValue)
          resolve_hold(e.process, static_cast<uint32_t>(e.value), 1);
        break;
      }
      case EventKind::Discard:
        if (e.value != kNoValue)
          resolve_hold(e.process, static_cast<uint32_t>(e.value), 2);
        break;
      case EventKind::Delay:
        if (honest(e.process) && honest(e.peer)) {
          hold_ix.at_or_insert((uint64_t(e.process) << 32) | e.step,
                               static_cast<uint32_t>(holds.size()));
          holds.push_back(Hold{e.process, e.peer, e.step, 0});
        }
        break;
      case EventKind::Send: {
        const Msg& m = tr.payloads[e.payload];
        bool own = e.transport == Transport::Direct ||
                   (e.transport == Transport::Wrb1 && m.origin == e.process);
        if (own) note_send(e, m);
        break;
      }
      default:
        break;
    }
  }

  void resolve_hold(unsigned p, uint32_t delay_step, uint8_t state) {
    const uint32_t* s = hold_ix.find((uint64_t(p) << 32) | delay_step);
    if (s && holds[*s].state == 0) holds[*s].state = state;
  }

  // Tracks the first copy of an oracle-relevant message that the receiving
  // node would have accepted (same origin and shape tests as the node).
  void record_payload(const Event& e, const Msg& m) {
    uint32_t cls;
    switch (m.kind) {
      case MsgKind::RowPoly:
        if (e.peer != session_dealer(m.session) || m.vals.size() != t + 1 ||
            !vals_ok(m))
          return;
        cls = kPayRowPoly;
        break;
      case MsgKind::BipolyShares:
        if (e.peer != session_dealer(m.session) ||
            m.vals.size() != 2 * (t + 1) || !vals_ok(m))
          return;
        cls = kPayShares;
        break;
      case MsgKind::MSet:
        if (e.peer != session_moderator(m.session) || m.vals.size() != 1 ||
            !valid_pset(m.vals[0]) || bits(m.vals[0]) < n - t)
          return;
        cls = kPayMSet;
        break;
      case MsgKind::GSets: {
        if (e.peer != session_dealer(m.session) || m.vals.empty() ||
            !valid_pset(m.vals[0]) || bits(m.vals[0]) < n - t ||
            m.vals.size() != 1 + bits(m.vals[0]))
          return;
        for (size_t i = 1; i < m.vals.size(); ++i)
          if (!valid_pset(m.vals[i]) || bits(m.vals[i]) < n - t) return;
        cls = kPayGSets;
        break;
      }
      default:
        return;
    }
    fwd_pay.at_or_insert(pay_key(touch(m.session), e.process, cls), e.payload);
  }

  void note_send(const Event& e, const Msg& m) {
    unsigned p = e.process, r = session::round(m.session);
    switch (m.kind) {
      case MsgKind::ReconValue:
        if ((cfg.protocol == Protocol::Scc || cfg.protocol == Protocol::Ba) &&
            session::level(m.session) == SessionLevel::Mw)
          first(kFstRecon, r, p, e.step);
        break;
      case MsgKind::CoinDeclare:
        first(kFstDeclare, r, p, e.step);
        break;
      case MsgKind::PreVote:
        first(kFstPreVote, r, p, e.step);
        break;
      case MsgKind::Decide:
        first(kFstDecide, 0, p, e.step);
        break;
      default:
        break;
    }
    if (cfg.protocol == Protocol::Ba && r >= 1) first(kFstRound, r, p, e.step);
    if (hiding_active(m.session)) note_hiding_send(e, m);
  }

  // Sessions whose share privacy must hold for this trace: the invoked
  // session when its dealer (and moderator, where there is one) is nonfaulty
  // and reconstruction was never requested, plus — for the bivariate
  // protocol — every per-pair child session with a nonfaulty child dealer.
  bool hiding_active(uint64_t s) const {
    if (svss_hiding) {
      if (session::level(s) == SessionLevel::Svss) return true;
      return session::level(s) == SessionLevel::Mw &&
             honest(session::mw_child_dealer(s));
    }
    return mw_hiding && session::level(s) == SessionLevel::Top;
  }

  // Structural discipline of private sends: every field element may travel
  // only to the process entitled to it. Row data goes to its row owner,
  // the committed polynomial and the shares-at-zero go to the session
  // moderator, and no reconstruct-phase value is ever published.
  void note_hiding_send(const Event& e, const Msg& m) {
    if (!honest(e.process)) return;
    std::string* leak = svss_hiding ? &svss_leak : &mw_leak;
    if (!leak->empty()) return;
    const char* what = nullptr;
    switch (m.kind) {
      case MsgKind::RowPoly:
        if (m.aux != e.peer) what = "row polynomial sent off its owner";
        break;
      case MsgKind::RelayValue:
        if (m.aux != e.peer) what = "relayed row value sent off its owner";
        break;
      case MsgKind::FPoly:
        if (e.peer != session_moderator(m.session))
          what = "committed polynomial sent off the moderator";
        break;
      case MsgKind::F0ToMod:
        if (e.peer != session_moderator(m.session))
          what = "share-at-zero sent off the moderator";
        break;
      case MsgKind::ReconValue:
        what = "reconstruct value broadcast with reconstruction never invoked";
        break;
      default:
        break;
    }
    if (!what) return;
    std::ostringstream os;
    os << what << " (process " << unsigned(e.process) << " to "
       << unsigned(e.peer) << ", session " << m.session << ", step " << e.step
       << ")";
    *leak = os.str();
  }
};

// --- session nesting and the shun-start predicate ---------------------------

// True when a message tagged m belongs to session s or a session nested
// under it (per-pair moderated sessions belong to their bivariate parent;
// everything of a coin round belongs to that round's coin invocation).
bool in_subtree(uint64_t m, uint64_t s, Protocol proto) {
  if (m == s) return true;
  switch (session::level(s)) {
    case SessionLevel::Svss:
      return session::level(m) == SessionLevel::Mw &&
             session::svss_parent(m) == s;
    case SessionLevel::Coin: {
      SessionLevel lm = session::level(m);
      if (lm != SessionLevel::Mw && lm != SessionLevel::Svss) return false;
      if (session::round(m) != session::round(s)) return false;
      return proto == Protocol::Scc || session::round(m) >= 1;
    }
    default:
      return false;
  }
}

// The sessions a message's traffic counts toward, innermost first: its own
// tag, the bivariate parent of a per-pair session, and the enclosing coin
// invocation where one exists.
int enclosing(uint64_t m, Protocol proto, uint64_t out[3]) {
  int c = 0;
  out[c++] = m;
  SessionLevel lv = session::level(m);
  if (lv == SessionLevel::Mw) out[c++] = session::svss_parent(m);
  if ((lv == SessionLevel::Mw || lv == SessionLevel::Svss) &&
      (proto == Protocol::Scc ||
       (proto == Protocol::Ba && session::round(m) >= 1)))
    out[c++] = session::coin(session::round(m));
  return c;
}

// Clause 1 of the shun-start definition: i forwarded something of j's
// within s. (A distrust entry raised purely by discarded traffic cannot be
// anchored to a session this way.)
bool forwarded_in_subtree(const Scan& sc, unsigned i, unsigned j, uint64_t s) {
  const std::vector<PairHit>* hits = sc.pair_hits(i, j);
  if (!hits) return false;
  for (const PairHit& h : *hits)
    if (in_subtree(h.session, s, sc.cfg.protocol)) return true;
  return false;
}

// The local session order puts s before s' when i produced s's output
// before taking its first action in s'. A shun by i of j starts in s when i
// acted on some message of j's within s but on none in any session ordered
// after s.
bool shun_starts_in_scan(const Scan& sc, unsigned i, unsigned j, uint64_t s) {
  const std::vector<PairHit>* hits = sc.pair_hits(i, j);
  if (!hits) return false;
  const SessView* vs = sc.view(s);
  uint32_t done = vs ? vs->output[i] : kNoStep;
  bool acted = false;
  for (const PairHit& h : *hits) {
    if (!acted && in_subtree(h.session, s, sc.cfg.protocol)) acted = true;
    if (done == kNoStep) continue;  // s never finished: nothing is after it
    uint64_t enc[3];
    int c = enclosing(h.session, sc.cfg.protocol, enc);
    for (int k = 0; k < c; ++k) {
      const SessView* va = sc.view(enc[k]);
      if (va && va->start[i] != kNoStep && va->start[i] > done)
        return false;  // i still acted on j's traffic afterwards
    }
  }
  return acted;
}

// The disjunctive share properties are satisfiable through fault exposure:
// some nonfaulty process starts permanently shunning a faulty one in the
// offending session. Anchored on recorded distrust additions so that a
// trace without any new distrust can never take this branch.
bool new_shun_in(const Scan& sc, uint64_t s) {
  for (const ShunRecord& r : sc.tr.shuns)
    if (sc.honest(r.process) && !sc.honest(r.peer) &&
        shun_starts_in_scan(sc, r.process, r.peer, s))
      return true;
  return false;
}

std::optional<uint64_t> detect_scan(const Scan& sc, unsigned i, unsigned j) {
  bool have = false;
  uint64_t fallback = 0;
  uint32_t fb_step = 0;
  for (const ShunRecord& r : sc.tr.shuns)
    if (r.process == i && r.peer == j && (!have || r.step < fb_step)) {
      have = true;
      fallback = r.session;
      fb_step = r.step;
    }
  if (!have) return std::nullopt;
  if (!sc.tr.has_events()) return fallback;
  std::vector<std::pair<uint32_t, uint64_t>> started;
  for (const SessView& v : sc.sess)
    if (v.start[i] != kNoStep) started.push_back({v.start[i], v.id});
  std::sort(started.begin(), started.end());
  for (const auto& [step, id] : started)
    if (shun_starts_in_scan(sc, i, j, id)) return id;
  // Every forwarded message of j's predates the distrust addition, so the
  // definition is met no later than the offending session itself.
  return fallback;
}

// --- verdict plumbing --------------------------------------------------------

struct Out {
  const Scan& sc;
  // Deque, not vector: begin() hands out references that stay valid while
  // later verdicts are appended.
  std::deque<PropertyVerdict> list;

  PropertyVerdict& begin(const char* name) {
    list.push_back(PropertyVerdict{name, true, {}});
    return list.back();
  }

  void fail(PropertyVerdict& v, const std::string& why) {
    if (!v.holds) return;  // keep the first witness
    v.holds = false;
    v.witness = "seed=" + std::to_string(sc.cfg.seed) + ": " + why;
  }
};

std::string pnum(unsigned p) { return "process " + std::to_string(p); }

std::string sess_tag(uint64_t s) { return "session " + std::to_string(s); }

// --- broadcast ---------------------------------------------------------------

void check_broadcast(const Scan& sc, Out& out) {
  const Trace& tr = sc.tr;
  PropertyVerdict& ag = out.begin("broadcast-agreement");
  PropertyVerdict& va = out.begin("broadcast-validity");
  unsigned first = 0;
  for (unsigned p = 1; p <= sc.n; ++p) {
    if (!sc.honest(p) || tr.outputs[p] == kNoValue) continue;
    if (!first) {
      first = p;
    } else if (tr.outputs[p] != tr.outputs[first]) {
      out.fail(ag, pnum(first) + " accepted " + std::to_string(tr.outputs[first]) +
                       " but " + pnum(p) + " accepted " +
                       std::to_string(tr.outputs[p]));
    }
  }
  // The two-phase broadcast guarantees total acceptance: once one nonfaulty
  // process accepts, every nonfaulty process does in any run that was not
  // cut off. The single-phase variant deliberately does not (a faulty
  // sender may leave some processes without a value).
  if (sc.cfg.protocol == Protocol::Rb && tr.outcome != Outcome::Cutoff && first)
    for (unsigned p = 1; p <= sc.n; ++p)
      if (sc.honest(p) && tr.outputs[p] == kNoValue)
        out.fail(ag, pnum(p) + " never accepted although " + pnum(first) +
                         " did and the run ran to rest");
  if (sc.honest(sc.cfg.dealer)) {
    for (unsigned p = 1; p <= sc.n; ++p) {
      if (!sc.honest(p)) continue;
      if (tr.outputs[p] == kNoValue) {
        if (tr.outcome != Outcome::Cutoff)
          out.fail(va, pnum(p) + " never accepted the nonfaulty sender's value");
      } else if (tr.outputs[p] != tr.secret) {
        out.fail(va, pnum(p) + " accepted " + std::to_string(tr.outputs[p]) +
                         " instead of the nonfaulty sender's " +
                         std::to_string(tr.secret));
      }
    }
  }
}

// --- moderated share sessions ------------------------------------------------

UniPoly half_poly(const Scan& sc, const Msg& m, bool g_half) {
  std::vector<Point> pts(sc.t + 1);
  for (unsigned x = 0; x <= sc.t; ++x)
    pts[x] = Point{x + 1, m.vals[(g_half ? 0 : sc.t + 1) + x]};
  return interpolate_exact(sc.F, pts, sc.t);
}

// What a nonfaulty child dealer deals in a per-pair session: the grid entry
// its pattern selects, evaluated on the shares it latched from the parent
// dealer. Unknown (kNoValue) when those shares never arrived.
uint64_t child_dealt(const Scan& sc, uint64_t child) {
  const Msg* pay = sc.payload(session::svss_parent(child),
                              session::mw_child_dealer(child), kPayShares);
  if (!pay) return kNoValue;
  unsigned a = session::pair_low(child), b = session::pair_high(child);
  switch (session::pattern(child)) {
    case 0: return half_poly(sc, *pay, false).eval(sc.F, b);
    case 1: return half_poly(sc, *pay, true).eval(sc.F, b);
    case 2: return half_poly(sc, *pay, false).eval(sc.F, a);
    default: return half_poly(sc, *pay, true).eval(sc.F, a);
  }
}

// The same entry as the nonfaulty child moderator computes it from its own
// latched shares.
uint64_t child_moderated(const Scan& sc, uint64_t child) {
  const Msg* pay = sc.payload(session::svss_parent(child),
                              session::mw_child_moderator(child), kPayShares);
  if (!pay) return kNoValue;
  unsigned a = session::pair_low(child), b = session::pair_high(child);
  switch (session::pattern(child)) {
    case 0: return half_poly(sc, *pay, true).eval(sc.F, a);
    case 1: return half_poly(sc, *pay, false).eval(sc.F, a);
    case 2: return half_poly(sc, *pay, true).eval(sc.F, b);
    default: return half_poly(sc, *pay, false).eval(sc.F, b);
  }
}

struct MwCtx {
  uint64_t id = 0;
  const SessView* v = nullptr;
  unsigned dealer = 0, moderator = 0;
  uint64_t secret = kNoValue;  // dealt value, when the dealer is nonfaulty
  uint64_t smod = kNoValue;    // moderator's value, when it is nonfaulty
  bool top = false;
};

struct BindResult {
  bool defined = false;  // some nonfaulty process completed the share phase
  bool data_ok = true;   // required index data was present
  std::string data_err;
  uint64_t r = kNoValue;
};

// The value the session is bound to, fixed at the first nonfaulty share
// completion: interpolate the admitted nonfaulty members' row polynomials
// at zero. An inconsistent fit binds the session to bottom.
BindResult mw_bound_value(const Scan& sc, const MwCtx& cx) {
  BindResult b;
  unsigned q = 0;
  for (unsigned p = 1; p <= sc.n; ++p)
    if (sc.honest(p) && cx.v->complete[p] != kNoStep &&
        (!q || cx.v->complete[p] < cx.v->complete[q]))
      q = p;
  if (!q) return b;
  b.defined = true;
  const Msg* ms = sc.payload(cx.id, q, kPayMSet);
  if (!ms) {
    b.data_ok = false;
    b.data_err = pnum(q) + " completed without an admitted-set broadcast";
    return b;
  }
  std::vector<Point> pts;
  for (unsigned l = 1; l <= sc.n; ++l) {
    if (!(ms->vals[0] >> l & 1) || !sc.honest(l)) continue;
    const Msg* rp = sc.payload(cx.id, l, kPayRowPoly);
    if (!rp) {
      b.data_ok = false;
      b.data_err = "admitted nonfaulty member " + std::to_string(l) +
                   " holds no row polynomial";
      return b;
    }
    std::vector<Point> rpts(sc.t + 1);
    for (unsigned x = 0; x <= sc.t; ++x) rpts[x] = Point{x + 1, rp->vals[x]};
    pts.push_back(Point{l, interpolate_exact(sc.F, rpts, sc.t).eval(sc.F, 0)});
  }
  if (pts.size() < sc.t + 1) {
    b.data_ok = false;
    b.data_err = "fewer than t+1 nonfaulty admitted members";
    return b;
  }
  UniFit fit = interpolate_unipoly(sc.F, std::move(pts), sc.t);
  if (fit.status == UniFit::Ok) b.r = fit.poly.eval(sc.F, 0);
  return b;
}

void check_mw(const Scan& sc, Out& out) {
  bool topmost = sc.cfg.protocol == Protocol::Mwsvss;
  // Completion coupling is only meaningful while the simulation still runs:
  // once the invoked protocol terminates everywhere the run stops and cuts
  // nested stragglers mid-flight, so liveness is asserted only for the
  // session that is itself the invoked protocol.
  PropertyVerdict* term = topmost ? &out.begin("mw-termination") : nullptr;
  PropertyVerdict& val = out.begin("mw-validity");
  PropertyVerdict& bind = out.begin("mw-binding");

  std::vector<MwCtx> list;
  if (topmost) {
    if (const SessView* v = sc.view(session::kTop)) {
      MwCtx cx;
      cx.id = session::kTop;
      cx.v = v;
      cx.dealer = sc.cfg.dealer;
      cx.moderator = sc.cfg.moderator;
      if (sc.honest(cx.dealer)) cx.secret = sc.tr.secret;
      if (sc.honest(cx.moderator)) cx.smod = sc.tr.moderator_value;
      cx.top = true;
      list.push_back(cx);
    }
  }
  for (const SessView& v : sc.sess) {
    if (session::level(v.id) != SessionLevel::Mw) continue;
    MwCtx cx;
    cx.id = v.id;
    cx.v = &v;
    cx.dealer = session::mw_child_dealer(v.id);
    cx.moderator = session::mw_child_moderator(v.id);
    if (sc.honest(cx.dealer)) cx.secret = child_dealt(sc, v.id);
    if (sc.honest(cx.moderator)) cx.smod = child_moderated(sc, v.id);
    list.push_back(cx);
  }

  for (const MwCtx& cx : list) {
    if (term && cx.top && sc.tr.outcome != Outcome::Cutoff) {
      unsigned done1 = 0;
      for (unsigned p = 1; p <= sc.n; ++p)
        if (sc.honest(p) && cx.v->complete[p] != kNoStep) {
          done1 = p;
          break;
        }
      if (done1) {
        bool all = true;
        for (unsigned p = 1; p <= sc.n; ++p)
          if (sc.honest(p) && cx.v->complete[p] == kNoStep) {
            all = false;
            out.fail(*term, sess_tag(cx.id) + ": " + pnum(p) +
                                " never completed the share phase although " +
                                pnum(done1) + " did");
          }
        if (all && sc.cfg.invoke_reconstruct)
          for (unsigned p = 1; p <= sc.n; ++p)
            if (sc.honest(p) && cx.v->output[p] == kNoStep)
              out.fail(*term, sess_tag(cx.id) + ": " + pnum(p) +
                                  " never produced a reconstruct output");
      }
    }

    if (cx.secret != kNoValue) {
      for (unsigned p = 1; p <= sc.n; ++p) {
        if (!sc.honest(p) || cx.v->output[p] == kNoStep) continue;
        if (cx.v->value[p] == cx.secret) continue;
        if (!new_shun_in(sc, cx.id)) {
          out.fail(val, sess_tag(cx.id) + ": " + pnum(p) + " output " +
                            std::to_string(cx.v->value[p]) +
                            " against the nonfaulty dealer's " +
                            std::to_string(cx.secret) +
                            " and no shun starts here");
          break;
        }
      }
    }

    BindResult b = mw_bound_value(sc, cx);
    if (b.defined) {
      if (!b.data_ok) {
        out.fail(bind, sess_tag(cx.id) + ": " + b.data_err);
      } else {
        if (cx.smod != kNoValue && b.r != cx.smod)
          out.fail(bind, sess_tag(cx.id) + ": bound value " +
                             std::to_string(b.r) +
                             " differs from the nonfaulty moderator's " +
                             std::to_string(cx.smod));
        for (unsigned p = 1; p <= sc.n; ++p) {
          if (!sc.honest(p) || cx.v->output[p] == kNoStep) continue;
          uint64_t got = cx.v->value[p];
          if (got == b.r || got == kNoValue) continue;
          if (!new_shun_in(sc, cx.id)) {
            out.fail(bind, sess_tag(cx.id) + ": " + pnum(p) + " output " +
                               std::to_string(got) + " outside {" +
                               std::to_string(b.r) +
                               ", bottom} and no shun starts here");
            break;
          }
        }
      }
    }
  }

  if (sc.mw_hiding) {
    PropertyVerdict& sec = out.begin("mw-secrecy-bound");
    if (!sc.mw_leak.empty()) out.fail(sec, sc.mw_leak);
  }
}

// --- bivariate share sessions ------------------------------------------------

struct SvCtx {
  uint64_t id = 0;
  const SessView* v = nullptr;
  unsigned dealer = 0;
  uint64_t secret = kNoValue;
  bool top = false;
};

// A nonfaulty dealer's secret in a coin-spawned share session, recovered
// from the rows its nonfaulty recipients latched (t+1 full rows pin the
// bivariate polynomial down exactly).
uint64_t svss_child_secret(const Scan& sc, uint64_t sv) {
  std::vector<BiConstraint> cons;
  unsigned used = 0;
  for (unsigned j = 1; j <= sc.n && used <= sc.t; ++j) {
    if (!sc.honest(j)) continue;
    const Msg* pay = sc.payload(sv, j, kPayShares);
    if (!pay) continue;
    for (unsigned y = 1; y <= sc.t + 1; ++y)
      cons.push_back(BiConstraint{j, y, pay->vals[y - 1]});
    ++used;
  }
  if (used < sc.t + 1) return kNoValue;
  BiFit fit = interpolate_bipoly(sc.F, cons, sc.t);
  return fit.status == BiFit::Ok ? fit.poly.eval(sc.F, 0, 0) : kNoValue;
}

// The bound value at first nonfaulty completion: collect the grid entries
// held by nonfaulty confirmed members over their confirmation sets; a
// unique interpolating bivariate polynomial binds the session to its value
// at the origin, anything else binds it to bottom.
BindResult svss_bound_value(const Scan& sc, const SvCtx& cx) {
  BindResult b;
  unsigned q = 0;
  for (unsigned p = 1; p <= sc.n; ++p)
    if (sc.honest(p) && cx.v->complete[p] != kNoStep &&
        (!q || cx.v->complete[p] < cx.v->complete[q]))
      q = p;
  if (!q) return b;
  b.defined = true;
  const Msg* gs = sc.payload(cx.id, q, kPayGSets);
  if (!gs) {
    b.data_ok = false;
    b.data_err = pnum(q) + " completed without a confirmation-set broadcast";
    return b;
  }
  uint64_t ghat = gs->vals[0];
  std::vector<uint64_t> gsets(sc.n + 1, 0);
  size_t ix = 1;
  for (unsigned j = 1; j <= sc.n; ++j)
    if (ghat >> j & 1) gsets[j] = gs->vals[ix++];

  std::map<std::pair<unsigned, unsigned>, uint64_t> grid;
  bool conflict = false;
  unsigned members = 0;
  auto put = [&](unsigned x, unsigned y, uint64_t v) {
    auto [it, fresh] = grid.emplace(std::make_pair(x, y), v);
    if (!fresh && it->second != v) conflict = true;
  };
  for (unsigned j = 1; j <= sc.n && !conflict; ++j) {
    if (!(ghat >> j & 1) || !sc.honest(j)) continue;
    ++members;
    const Msg* pay = sc.payload(cx.id, j, kPayShares);
    if (!pay) {
      b.data_ok = false;
      b.data_err = "confirmed nonfaulty member " + std::to_string(j) +
                   " holds no shares";
      return b;
    }
    UniPoly g = half_poly(sc, *pay, true);
    UniPoly h = half_poly(sc, *pay, false);
    for (unsigned l = 1; l <= sc.n; ++l) {
      if (!(gsets[j] >> l & 1) || l == j) continue;
      put(j, l, g.eval(sc.F, l));
      put(l, j, h.eval(sc.F, l));
    }
  }
  if (members < sc.t + 1) {
    b.data_ok = false;
    b.data_err = "fewer than t+1 nonfaulty confirmed members";
    return b;
  }
  if (conflict) return b;  // entries disagree: bound to bottom
  std::vector<BiConstraint> cons;
  cons.reserve(grid.size());
  for (const auto& [key, v] : grid)
    cons.push_back(BiConstraint{key.first, key.second, v});
  BiFit fit = interpolate_bipoly(sc.F, cons, sc.t);
  if (fit.status == BiFit::Ok) b.r = fit.poly.eval(sc.F, 0, 0);
  return b;
}

void check_svss(const Scan& sc, Out& out) {
  bool topmost = sc.cfg.protocol == Protocol::Svss;
  PropertyVerdict* term = topmost ? &out.begin("svss-termination") : nullptr;
  PropertyVerdict& val = out.begin("svss-validity");
  PropertyVerdict& bind = out.begin("svss-binding");

  std::vector<SvCtx> list;
  for (const SessView& v : sc.sess) {
    if (session::level(v.id) != SessionLevel::Svss) continue;
    SvCtx cx;
    cx.id = v.id;
    cx.v = &v;
    cx.dealer = session::svss_dealer(v.id);
    cx.top = topmost;
    if (sc.honest(cx.dealer))
      cx.secret = topmost ? sc.tr.secret : svss_child_secret(sc, v.id);
    list.push_back(cx);
  }

  for (const SvCtx& cx : list) {
    if (term && cx.top && sc.tr.outcome != Outcome::Cutoff) {
      unsigned done1 = 0;
      for (unsigned p = 1; p <= sc.n; ++p)
        if (sc.honest(p) && cx.v->complete[p] != kNoStep) {
          done1 = p;
          break;
        }
      if (done1) {
        bool all = true;
        for (unsigned p = 1; p <= sc.n; ++p)
          if (sc.honest(p) && cx.v->complete[p] == kNoStep) {
            all = false;
            out.fail(*term, sess_tag(cx.id) + ": " + pnum(p) +
                                " never completed the share phase although " +
                                pnum(done1) + " did");
          }
        if (all && sc.cfg.invoke_reconstruct)
          for (unsigned p = 1; p <= sc.n; ++p)
            if (sc.honest(p) && cx.v->output[p] == kNoStep)
              out.fail(*term, sess_tag(cx.id) + ": " + pnum(p) +
                                  " never produced a reconstruct output");
      }
    }

    if (cx.secret != kNoValue) {
      for (unsigned p = 1; p <= sc.n; ++p) {
        if (!sc.honest(p) || cx.v->output[p] == kNoStep) continue;
        if (cx.v->value[p] == cx.secret) continue;
        if (!new_shun_in(sc, cx.id)) {
          out.fail(val, sess_tag(cx.id) + ": " + pnum(p) + " output " +
                            std::to_string(cx.v->value[p]) +
                            " against the nonfaulty dealer's " +
                            std::to_string(cx.secret) +
                            " and no shun starts here");
          break;
        }
      }
    }

    BindResult b = svss_bound_value(sc, cx);
    if (b.defined) {
      if (!b.data_ok) {
        out.fail(bind, sess_tag(cx.id) + ": " + b.data_err);
      } else {
        for (unsigned p = 1; p <= sc.n; ++p) {
          if (!sc.honest(p) || cx.v->output[p] == kNoStep) continue;
          if (cx.v->value[p] == b.r) continue;
          if (!new_shun_in(sc, cx.id)) {
            out.fail(bind, sess_tag(cx.id) + ": " + pnum(p) + " output " +
                               std::to_string(cx.v->value[p]) +
                               " but the session is bound to " +
                               std::to_string(b.r) + " and no shun starts here");
            break;
          }
        }
      }
    }
  }

  if (sc.svss_hiding) {
    PropertyVerdict& sec = out.begin("svss-secrecy-bound");
    if (!sc.svss_leak.empty()) out.fail(sec, sc.svss_leak);
  }
}

// --- coin --------------------------------------------------------------------

void check_coin(const Scan& sc, Out& out, bool ev) {
  const Trace& tr = sc.tr;
  if (sc.cfg.protocol == Protocol::Scc) {
    PropertyVerdict& term = out.begin("coin-termination");
    if (tr.outcome != Outcome::Cutoff)
      for (unsigned p = 1; p <= sc.n; ++p)
        if (sc.honest(p) && tr.outputs[p] == kNoValue)
          out.fail(term, pnum(p) + " never output a coin bit");
  }
  if (!ev) return;

  PropertyVerdict& feas = out.begin("coin-agreement-feasible");
  PropertyVerdict& order = out.begin("coin-recon-after-declare");
  for (const SessView& cv : sc.sess) {
    if (session::level(cv.id) != SessionLevel::Coin) continue;
    unsigned r = session::round(cv.id);
    // Every spawned share session of this invocation must leave a unanimous
    // output on the table, unless fault exposure pays for the damage.
    for (const SessView& sv : sc.sess) {
      if (session::level(sv.id) != SessionLevel::Svss ||
          session::round(sv.id) != r)
        continue;
      uint64_t seen = kNoValue;
      unsigned who = 0;
      for (unsigned p = 1; p <= sc.n; ++p) {
        if (!sc.honest(p) || sv.output[p] == kNoStep) continue;
        if (!who) {
          who = p;
          seen = sv.value[p];
        } else if (sv.value[p] != seen && !new_shun_in(sc, cv.id)) {
          out.fail(feas, sess_tag(sv.id) + ": " + pnum(who) +
                             " reconstructed " + std::to_string(seen) + ", " +
                             pnum(p) + " reconstructed " +
                             std::to_string(sv.value[p]) +
                             ", and no shun starts in this invocation");
        }
      }
    }
    // No process opens any shared secret before committing, via its
    // declaration, to the set of parties it will evaluate.
    for (unsigned p = 1; p <= sc.n; ++p) {
      if (!sc.honest(p)) continue;
      const uint32_t* rs = sc.first_of(kFstRecon, r, p);
      if (!rs) continue;
      const uint32_t* ds = sc.first_of(kFstDeclare, r, p);
      if (!ds || *ds > *rs)
        out.fail(order, sess_tag(cv.id) + ": " + pnum(p) +
                            " broadcast a reconstruct value at step " +
                            std::to_string(*rs) + " before its declaration");
    }
  }
}

// --- agreement ---------------------------------------------------------------

void check_ba(const Scan& sc, Out& out, bool ev) {
  const Trace& tr = sc.tr;
  PropertyVerdict& ag = out.begin("ba-agreement");
  PropertyVerdict& va = out.begin("ba-validity");
  PropertyVerdict& term = out.begin("ba-termination");
  PropertyVerdict& budget = out.begin("ba-shun-budget");

  unsigned first = 0;
  for (unsigned p = 1; p <= sc.n; ++p) {
    if (!sc.honest(p) || tr.outputs[p] == kNoValue) continue;
    if (!first) {
      first = p;
    } else if (tr.outputs[p] != tr.outputs[first]) {
      out.fail(ag, pnum(first) + " decided " + std::to_string(tr.outputs[first]) +
                       " but " + pnum(p) + " decided " +
                       std::to_string(tr.outputs[p]));
    }
  }

  bool same = true;
  uint8_t bit = 0;
  bool got = false;
  for (unsigned p = 1; p <= sc.n; ++p) {
    if (!sc.honest(p)) continue;
    if (!got) {
      bit = tr.ba_inputs[p];
      got = true;
    } else if (tr.ba_inputs[p] != bit) {
      same = false;
    }
  }
  if (got && same)
    for (unsigned p = 1; p <= sc.n; ++p)
      if (sc.honest(p) && tr.outputs[p] != kNoValue && tr.outputs[p] != bit)
        out.fail(va, "all nonfaulty inputs were " + std::to_string(bit) +
                         " but " + pnum(p) + " decided " +
                         std::to_string(tr.outputs[p]));

  if (tr.outcome != Outcome::Cutoff)
    for (unsigned p = 1; p <= sc.n; ++p)
      if (sc.honest(p) && tr.outputs[p] == kNoValue)
        out.fail(term, pnum(p) + " never decided");

  uint64_t pair_seen[64] = {};
  unsigned pairs = 0;
  for (const ShunRecord& r : tr.shuns) {
    if (!sc.honest(r.process) || sc.honest(r.peer)) continue;
    if (pair_seen[r.process] >> r.peer & 1) continue;
    pair_seen[r.process] |= 1ULL << r.peer;
    ++pairs;
  }
  if (pairs > sc.t * (sc.n - sc.t))
    out.fail(budget, std::to_string(pairs) +
                         " distinct shun pairs exceed the t(n-t) budget of " +
                         std::to_string(sc.t * (sc.n - sc.t)));

  if (!ev) return;

  PropertyVerdict& ro = out.begin("ba-round-order");
  PropertyVerdict& dh = out.begin("ba-decide-halt");
  for (unsigned p = 1; p <= sc.n; ++p) {
    if (!sc.honest(p)) continue;
    for (unsigned r = 2; r <= tr.ba_rounds; ++r) {
      const uint32_t* fs = sc.first_of(kFstRound, r, p);
      if (!fs) continue;
      const SessView* cv = sc.view(session::coin(r - 1));
      uint32_t coin_out = cv ? cv->output[p] : kNoStep;
      if (coin_out == kNoStep || coin_out > *fs)
        out.fail(ro, pnum(p) + " acted in round " + std::to_string(r) +
                         " at step " + std::to_string(*fs) +
                         " before finishing round " + std::to_string(r - 1) +
                         "'s coin");
    }
    const uint32_t* dstep = sc.first_of(kFstDecide, 0, p);
    if (dstep) {
      unsigned rd = 0;
      for (unsigned r = 1; r <= tr.ba_rounds; ++r) {
        const uint32_t* pv = sc.first_of(kFstPreVote, r, p);
        if (pv && *pv < *dstep) rd = r;
      }
      for (unsigned r = rd + 2; r <= tr.ba_rounds; ++r)
        if (sc.first_of(kFstPreVote, r, p))
          out.fail(dh, pnum(p) + " decided in round " + std::to_string(rd) +
                           " but still opened round " + std::to_string(r));
    }
  }
}

// --- message filter ----------------------------------------------------------

void check_filter(const Scan& sc, Out& out, bool ev) {
  const Trace& tr = sc.tr;
  PropertyVerdict& ds = out.begin("distrust-soundness");
  for (const ShunRecord& r : tr.shuns)
    if (sc.honest(r.process) && sc.honest(r.peer))
      out.fail(ds, pnum(r.process) + " distrusts nonfaulty " +
                       std::to_string(r.peer) + " (" + sess_tag(r.session) +
                       ", step " + std::to_string(r.step) + ")");
  if (!ev) return;

  // Liveness of the expectation table is only observable once the network
  // has fully drained: a run that stops because the invoked protocol
  // terminated everywhere cuts in-flight resolution traffic.
  if (tr.outcome == Outcome::Quiescent) {
    PropertyVerdict& el = out.begin("expectation-liveness");
    for (const LeftoverExpectation& lo : tr.leftovers) {
      if (!sc.honest(lo.process) || !sc.honest(lo.sender)) continue;
      const SessView* v = sc.view(lo.session);
      if (v && v->output[lo.sender] != kNoStep)
        out.fail(el, pnum(lo.process) + " still expects a row-" +
                         std::to_string(lo.row) + " broadcast from " +
                         std::to_string(lo.sender) + " in " +
                         sess_tag(lo.session) +
                         " although that process finished reconstructing");
    }
    PropertyVerdict& ph = out.begin("no-permanent-hold");
    for (const Scan::Hold& h : sc.holds) {
      if (h.state != 0) continue;
      bool blocked = false;
      for (const LeftoverExpectation& lo : tr.leftovers)
        if (lo.process == h.process && lo.sender == h.origin) {
          blocked = true;
          break;
        }
      if (!blocked)
        out.fail(ph, "message from " + std::to_string(h.origin) + " held at " +
                         pnum(h.process) + " since step " +
                         std::to_string(h.step) +
                         " with no live expectation left to justify it");
    }
  }

  // A distrust raised inside a nested session must qualify as starting in
  // its enclosing sessions as well; that escalation is what lets the parent
  // protocols charge the damage to a bounded shun budget.
  Protocol proto = sc.cfg.protocol;
  if (proto == Protocol::Svss || proto == Protocol::Scc ||
      proto == Protocol::Ba) {
    PropertyVerdict& sl = out.begin("shun-lifting");
    for (const ShunRecord& r : tr.shuns) {
      if (!sc.honest(r.process)) continue;
      SessionLevel lv = session::level(r.session);
      if (lv == SessionLevel::Mw) {
        uint64_t parent = session::svss_parent(r.session);
        if (forwarded_in_subtree(sc, r.process, r.peer, parent) &&
            !shun_starts_in_scan(sc, r.process, r.peer, parent))
          out.fail(sl, "distrust of " + std::to_string(r.peer) + " by " +
                           std::to_string(r.process) + " raised in " +
                           sess_tag(r.session) +
                           " does not start in the parent share session");
      }
      if ((lv == SessionLevel::Mw || lv == SessionLevel::Svss) &&
          (proto == Protocol::Scc ||
           (proto == Protocol::Ba && session::round(r.session) >= 1))) {
        uint64_t c = session::coin(session::round(r.session));
        if (sc.view(c) && forwarded_in_subtree(sc, r.process, r.peer, c) &&
            !shun_starts_in_scan(sc, r.process, r.peer, c))
          out.fail(sl, "distrust of " + std::to_string(r.peer) + " by " +
                           std::to_string(r.process) + " raised in " +
                           sess_tag(r.session) +
                           " does not start in the enclosing coin invocation");
      }
    }
  }
}

}  // namespace

// --- entry points ------------------------------------------------------------

std::vector<PropertyVerdict> check_trace(const Trace& tr,
                                         const CheckSelection& sel) {
  if (sel.coin_freq)
    throw std::invalid_argument(
        "coin output frequencies are a campaign statistic; evaluate them over "
        "a seed campaign, not a single trace");
  if (!sel.any()) return {};
  Scan sc(tr);
  Out o{sc};
  bool ev = tr.has_events();
  Protocol pr = tr.config.protocol;
  bool has_mw = pr == Protocol::Mwsvss || pr == Protocol::Svss ||
                pr == Protocol::Scc || pr == Protocol::Ba;
  bool has_svss = pr == Protocol::Svss || pr == Protocol::Scc ||
                  pr == Protocol::Ba;
  if (sel.broadcast && (pr == Protocol::Wrb || pr == Protocol::Rb))
    check_broadcast(sc, o);
  if (sel.mw && has_mw && ev) check_mw(sc, o);
  if (sel.svss && has_svss && ev) check_svss(sc, o);
  if (sel.coin && (pr == Protocol::Scc || pr == Protocol::Ba))
    check_coin(sc, o, ev);
  if (sel.ba && pr == Protocol::Ba) check_ba(sc, o, ev);
  if (sel.filter) check_filter(sc, o, ev);
  return {o.list.begin(), o.list.end()};
}

bool shun_starts_in(const Trace& tr, unsigned i, unsigned j, uint64_t session) {
  Scan sc(tr, i, j);
  return shun_starts_in_scan(sc, i, j, session);
}

std::optional<uint64_t> detect_shun_start(const Trace& tr, unsigned i,
                                          unsigned j) {
  Scan sc(tr, i, j);
  return detect_scan(sc, i, j);
}

}  // namespace aba
