#include "aba/broadcast.hpp"

#include <bit>

namespace aba {

unsigned RbEngine::popcount(uint64_t v) { return std::popcount(v); }

RbEngine::Inst& RbEngine::intern(const Msg& m) {
  uint64_t key = broadcast_instance_key(m);
  if (key == last_key_) return *last_inst_;
  bool fresh = false;
  uint32_t idx = index_.at_or_insert(key, uint32_t(insts_.size()), &fresh);
  if (fresh) insts_.emplace_back();
  last_key_ = key;
  last_inst_ = &insts_[idx];
  return *last_inst_;
}

unsigned RbEngine::slot_for(Inst& inst, const Msg& m) {
  for (unsigned s = 0; s < inst.slots.size(); ++s)
    if (inst.slots[s].value.vals == m.vals) return s;
  inst.slots.push_back(Slot{m, 0, 0});
  return unsigned(inst.slots.size() - 1);
}

RbEngine::Actions RbEngine::on_transport(Transport tr, unsigned sender,
                                         const Msg& m) {
  Actions out;
  if (tr == Transport::Wrb1 && sender != m.origin) {
    // Only the origin may author its own instance; anything else is noise.
    out.ignored = true;
    return out;
  }
  Inst& inst = intern(m);
  switch (tr) {
    case Transport::Wrb1:
      if (!inst.sent2) {
        inst.sent2 = true;
        out.echo2 = &inst.slots[slot_for(inst, m)].value;
      }
      break;

    case Transport::Wrb2: {
      unsigned s = slot_for(inst, m);
      inst.slots[s].senders2 |= 1ULL << sender;
      if (inst.wrb_accepted < 0 && popcount(inst.slots[s].senders2) >= n_ - t_) {
        inst.wrb_accepted = int8_t(s);
        out.wrb_accept = &inst.slots[s].value;
        if (!inst.sent3) {
          inst.sent3 = true;
          out.echo3 = &inst.slots[s].value;
        }
      }
      break;
    }

    case Transport::Rb3: {
      unsigned s = slot_for(inst, m);
      inst.slots[s].senders3 |= 1ULL << sender;
      unsigned count = popcount(inst.slots[s].senders3);
      if (!inst.sent3 && count >= t_ + 1) {
        inst.sent3 = true;
        out.echo3 = &inst.slots[s].value;
      }
      if (inst.rb_accepted < 0 && count >= n_ - t_) {
        inst.rb_accepted = int8_t(s);
        out.rb_accept = &inst.slots[s].value;
      }
      break;
    }

    case Transport::Direct:
      out.ignored = true;
      break;
  }
  return out;
}

}  // namespace aba
