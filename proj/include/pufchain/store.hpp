#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <vector>

#include "pufchain/bytes.hpp"
#include "pufchain/crypto.hpp"

namespace pufchain {

struct StoreEntry {
  Bytes value;
  PartyId submitter;
  std::uint64_t sequence = 0;  // commit order, starting at 0

  friend bool operator==(const StoreEntry&, const StoreEntry&) = default;
};

enum class SetResult { Ok, KeyExists };

// Replicated key-value state: each key accepts exactly one set.
class WriteOnceStore {
 public:
  [[nodiscard]] SetResult set(const Bytes& key, Bytes value, PartyId submitter);

  const StoreEntry* find(const Bytes& key) const;
  std::optional<Bytes> get(const Bytes& key) const;
  bool contains(const Bytes& key) const { return entries_.count(key) != 0; }

  std::size_t size() const { return order_.size(); }
  // Keys in commit order.
  const std::vector<Bytes>& keys() const { return order_; }

  // Canonical byte image of the whole state, in commit order.
  Bytes serialize() const;

  friend bool operator==(const WriteOnceStore& a, const WriteOnceStore& b) {
    return a.order_ == b.order_ && a.entries_ == b.entries_;
  }

 private:
  std::map<Bytes, StoreEntry> entries_;
  std::vector<Bytes> order_;
};

}  // namespace pufchain
