#pragma once

#include <cstdint>
#include <utility>
#include <vector>

namespace aba {

// Insert-only open-addressed map from packed 64-bit keys to 32-bit values
// (linear probing, power-of-two capacity). A run interns millions of
// broadcast-instance and session keys, one lookup per delivered envelope;
// the node-based standard map dominated profiles, so lookups here stay
// allocation-free and cache-local.
//
// The all-ones key is the empty-slot sentinel. Every packed key in this
// codebase leaves it unreachable: session ids carry a small level nibble in
// the top bits and instance keys a bounded kind field, so no real key is
// all ones.
class FlatMap64 {
 public:
  static constexpr uint64_t kEmpty = ~0ULL;

  FlatMap64() { grow(64); }

  // Returns the value slot for `key`, inserting `fresh` first if the key is
  // new; `created` reports which happened.
  uint32_t& at_or_insert(uint64_t key, uint32_t fresh, bool* created = nullptr) {
    if (size_ + (size_ >> 1) >= mask_) grow((mask_ + 1) * 2);
    size_t i = mix(key) & mask_;
    while (keys_[i] != kEmpty) {
      if (keys_[i] == key) {
        if (created) *created = false;
        return vals_[i];
      }
      i = (i + 1) & mask_;
    }
    keys_[i] = key;
    vals_[i] = fresh;
    ++size_;
    if (created) *created = true;
    return vals_[i];
  }

  const uint32_t* find(uint64_t key) const {
    size_t i = mix(key) & mask_;
    while (keys_[i] != kEmpty) {
      if (keys_[i] == key) return &vals_[i];
      i = (i + 1) & mask_;
    }
    return nullptr;
  }
  uint32_t* find(uint64_t key) {
    return const_cast<uint32_t*>(std::as_const(*this).find(key));
  }

  bool contains(uint64_t key) const { return find(key) != nullptr; }
  size_t size() const { return size_; }

 private:
  static size_t mix(uint64_t k) {
    k ^= k >> 30;
    k *= 0xbf58476d1ce4e5b9ULL;
    k ^= k >> 27;
    k *= 0x94d049bb133111ebULL;
    k ^= k >> 31;
    return static_cast<size_t>(k);
  }

  void grow(size_t cap) {
    std::vector<uint64_t> old_keys = std::move(keys_);
    std::vector<uint32_t> old_vals = std::move(vals_);
    keys_.assign(cap, kEmpty);
    vals_.assign(cap, 0);
    mask_ = cap - 1;
    for (size_t i = 0; i < old_keys.size(); ++i) {
      if (old_keys[i] == kEmpty) continue;
      size_t j = mix(old_keys[i]) & mask_;
      while (keys_[j] != kEmpty) j = (j + 1) & mask_;
      keys_[j] = old_keys[i];
      vals_[j] = old_vals[i];
    }
  }

  std::vector<uint64_t> keys_;
  std::vector<uint32_t> vals_;
  size_t mask_ = 0;
  size_t size_ = 0;
};

}  // namespace aba
