#include "aba/trace.hpp"

#include <algorithm>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace aba {

const char* protocol_name(Protocol p) {
  switch (p) {
    case Protocol::Wrb: return "wrb";
    case Protocol::Rb: return "rb";
    case Protocol::Mwsvss: return "mwsvss";
    case Protocol::Svss: return "svss";
    case Protocol::Scc: return "scc";
    case Protocol::Ba: return "ba";
  }
  return "?";
}

bool parse_protocol(const std::string& s, Protocol& out) {
  for (Protocol p : {Protocol::Wrb, Protocol::Rb, Protocol::Mwsvss,
                     Protocol::Svss, Protocol::Scc, Protocol::Ba}) {
    if (s == protocol_name(p)) {
      out = p;
      return true;
    }
  }
  return false;
}

const char* msg_kind_name(MsgKind k) {
  switch (k) {
    case MsgKind::None: return "none";
    case MsgKind::RowValues: return "row-values";
    case MsgKind::RowPoly: return "row-poly";
    case MsgKind::FPoly: return "f-poly";
    case MsgKind::RelayValue: return "relay-value";
    case MsgKind::F0ToMod: return "f0-to-mod";
    case MsgKind::AckRb: return "ack";
    case MsgKind::LSet: return "l-set";
    case MsgKind::MSet: return "m-set";
    case MsgKind::Ok: return "ok";
    case MsgKind::ReconValue: return "recon-value";
    case MsgKind::BipolyShares: return "bipoly-shares";
    case MsgKind::GSets: return "g-sets";
    case MsgKind::CoinAccept: return "coin-accept";
    case MsgKind::CoinAttached: return "coin-attached";
    case MsgKind::CoinDeclare: return "coin-declare";
    case MsgKind::PreVote: return "pre-vote";
    case MsgKind::MainVote: return "main-vote";
    case MsgKind::Decide: return "decide";
    case MsgKind::Bcast: return "bcast";
  }
  return "?";
}

const char* transport_name(Transport t) {
  switch (t) {
    case Transport::Direct: return "direct";
    case Transport::Wrb1: return "wrb1";
    case Transport::Wrb2: return "wrb2";
    case Transport::Rb3: return "rb3";
  }
  return "?";
}

const char* event_kind_name(EventKind k) {
  switch (k) {
    case EventKind::Send: return "send";
    case EventKind::Deliver: return "deliver";
    case EventKind::Discard: return "discard";
    case EventKind::Delay: return "delay";
    case EventKind::Forward: return "forward";
    case EventKind::ShunAdd: return "shun-add";
    case EventKind::SessionStart: return "session-start";
    case EventKind::SessionComplete: return "session-complete";
    case EventKind::Output: return "output";
    case EventKind::Malformed: return "malformed";
  }
  return "?";
}

const char* outcome_name(Outcome o) {
  switch (o) {
    case Outcome::Completed: return "completed";
    case Outcome::Quiescent: return "quiescent";
    case Outcome::Cutoff: return "cutoff";
  }
  return "?";
}

std::string Msg::describe() const {
  std::ostringstream os;
  os << "kind=" << msg_kind_name(kind) << " origin=" << unsigned(origin);
  if (aux) os << " aux=" << unsigned(aux);
  os << " vals=[";
  for (size_t i = 0; i < vals.size(); ++i) os << (i ? " " : "") << vals[i];
  os << "]";
  return os.str();
}

void RunConfig::validate() const {
  auto fail = [](const std::string& why) { throw std::invalid_argument(why); };
  if (n < 2 || n > 63) fail("n out of range [2, 63]");
  if (n <= 3 * t) fail("resilience bound violated: need n > 3t");
  if (prime <= n) fail("field too small: need prime > n");
  if (faulty.size() > t) fail("more faulty processes than t");
  for (size_t i = 0; i < faulty.size(); ++i) {
    if (faulty[i] < 1 || faulty[i] > n) fail("faulty id out of range");
    if (i && faulty[i] <= faulty[i - 1]) fail("faulty ids must increase");
  }
  if (dealer < 1 || dealer > n) fail("dealer out of range");
  if (protocol == Protocol::Mwsvss) {
    if (moderator < 1 || moderator > n) fail("moderator out of range");
    if (moderator == dealer && n > 1) fail("moderator must differ from dealer");
  }
  if (secret != kUnset && secret >= prime) fail("secret not a field element");
  if (moderator_value != kUnset && moderator_value >= prime)
    fail("moderator value not a field element");
  if (!ba_inputs.empty() && ba_inputs.size() != n)
    fail("ba inputs must list one bit per process");
  for (uint8_t b : ba_inputs)
    if (b > 1) fail("ba inputs must be bits");
  if (max_events == 0) fail("max events must be positive");
}

namespace {

template <typename V>
std::string join_plus(const std::vector<V>& v) {
  if (v.empty()) return "-";
  std::string s;
  for (size_t i = 0; i < v.size(); ++i) {
    if (i) s += '+';
    s += std::to_string(uint64_t(v[i]));
  }
  return s;
}

std::vector<uint8_t> split_plus(const std::string& s) {
  std::vector<uint8_t> out;
  if (s == "-") return out;
  size_t pos = 0;
  while (pos < s.size()) {
    size_t next = s.find('+', pos);
    if (next == std::string::npos) next = s.size();
    out.push_back(static_cast<uint8_t>(std::stoul(s.substr(pos, next - pos))));
    pos = next + 1;
  }
  return out;
}

std::string opt_u64(uint64_t v) {
  return v == RunConfig::kUnset ? "unset" : std::to_string(v);
}

uint64_t parse_opt_u64(const std::string& s) {
  return s == "unset" ? RunConfig::kUnset : std::stoull(s);
}

}  // namespace

std::string RunConfig::canonical() const {
  std::ostringstream os;
  os << "protocol=" << protocol_name(protocol) << " n=" << n << " t=" << t
     << " prime=" << prime << " seed=" << seed << " faulty=" << join_plus(faulty)
     << " adversary=" << adversary << " fairness_budget=" << fairness_budget
     << " max_events=" << max_events << " dealer=" << dealer
     << " moderator=" << moderator << " secret=" << opt_u64(secret)
     << " moderator_value=" << opt_u64(moderator_value)
     << " ba_inputs=" << join_plus(ba_inputs)
     << " invoke_reconstruct=" << int(invoke_reconstruct)
     << " deal_delay_by_sender=" << int(deal_delay_by_sender);
  return os.str();
}

RunConfig parse_canonical_config(const std::string& line) {
  RunConfig c;
  std::istringstream is(line);
  std::string tok;
  while (is >> tok) {
    size_t eq = tok.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error("bad config token: " + tok);
    std::string key = tok.substr(0, eq), val = tok.substr(eq + 1);
    if (key == "protocol") {
      if (!parse_protocol(val, c.protocol))
        throw std::runtime_error("unknown protocol: " + val);
    } else if (key == "n") {
      c.n = std::stoul(val);
    } else if (key == "t") {
      c.t = std::stoul(val);
    } else if (key == "prime") {
      c.prime = std::stoull(val);
    } else if (key == "seed") {
      c.seed = std::stoull(val);
    } else if (key == "faulty") {
      c.faulty = split_plus(val);
    } else if (key == "adversary") {
      c.adversary = val;
    } else if (key == "fairness_budget") {
      c.fairness_budget = std::stoul(val);
    } else if (key == "max_events") {
      c.max_events = std::stoull(val);
    } else if (key == "dealer") {
      c.dealer = std::stoul(val);
    } else if (key == "moderator") {
      c.moderator = std::stoul(val);
    } else if (key == "secret") {
      c.secret = parse_opt_u64(val);
    } else if (key == "moderator_value") {
      c.moderator_value = parse_opt_u64(val);
    } else if (key == "ba_inputs") {
      c.ba_inputs = split_plus(val);
    } else if (key == "invoke_reconstruct") {
      c.invoke_reconstruct = val != "0";
    } else if (key == "deal_delay_by_sender") {
      c.deal_delay_by_sender = val != "0";
    } else {
      throw std::runtime_error("unknown config key: " + key);
    }
  }
  return c;
}

void Trace::write(std::ostream& os) const {
  os << "# absim trace v1\n";
  os << "# config " << config.canonical() << "\n";
  os << "# outcome " << outcome_name(outcome) << "\n";
  os << "# steps " << total_steps << "\n";
  os << "# outputs";
  for (unsigned p = 1; p < outputs.size(); ++p) {
    os << " " << p << "=";
    if (outputs[p] == kNoValue)
      os << "bot";
    else
      os << outputs[p];
  }
  os << "\n";
  if (config.protocol == Protocol::Ba) os << "# rounds " << ba_rounds << "\n";
  for (const ShunRecord& s : shuns)
    os << "# shun " << unsigned(s.process) << ">" << unsigned(s.peer)
       << " session=" << s.session << " step=" << s.step << "\n";
  for (const LeftoverExpectation& l : leftovers)
    os << "# leftover p=" << unsigned(l.process)
       << " sender=" << unsigned(l.sender) << " row=" << unsigned(l.row)
       << " side=" << unsigned(l.side) << " session=" << l.session << "\n";
  for (const Event& e : events) {
    os << event_kind_name(e.kind) << "," << e.step << "," << unsigned(e.process)
       << "," << e.session << "," << unsigned(e.dealer) << ",";
    switch (e.kind) {
      case EventKind::Send:
        os << "to=" << unsigned(e.peer) << " via=" << transport_name(e.transport)
           << " " << payloads[e.payload].describe();
        break;
      case EventKind::Deliver:
        os << "from=" << unsigned(e.peer)
           << " via=" << transport_name(e.transport) << " "
           << payloads[e.payload].describe();
        break;
      case EventKind::Discard:
      case EventKind::Delay:
      case EventKind::Forward:
      case EventKind::Malformed:
        os << "from=" << unsigned(e.peer);
        if (e.payload != kNoPayload) os << " " << payloads[e.payload].describe();
        if ((e.kind == EventKind::Forward || e.kind == EventKind::Discard) &&
            e.value != kNoValue)
          os << " held_at=" << e.value;
        break;
      case EventKind::ShunAdd:
        os << "shunned=" << unsigned(e.peer);
        break;
      case EventKind::SessionStart:
      case EventKind::SessionComplete:
        break;
      case EventKind::Output:
        os << "value=";
        if (e.value == kNoValue)
          os << "bot";
        else
          os << e.value;
        break;
    }
    os << "\n";
  }
}

std::string Trace::to_string() const {
  std::ostringstream os;
  write(os);
  return os.str();
}

RunConfig Trace::read_config(std::istream& is) {
  std::string line;
  const std::string prefix = "# config ";
  while (std::getline(is, line)) {
    if (line.rfind(prefix, 0) == 0)
      return parse_canonical_config(line.substr(prefix.size()));
    if (!line.empty() && line[0] != '#') break;
  }
  throw std::runtime_error("trace file has no config header");
}

}  // namespace aba
