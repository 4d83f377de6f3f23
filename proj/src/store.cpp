#include "pufchain/store.hpp"

namespace pufchain {

SetResult WriteOnceStore::set(const Bytes& key, Bytes value, PartyId submitter) {
  const auto sequence = static_cast<std::uint64_t>(order_.size());
  auto [it, inserted] = entries_.try_emplace(key, StoreEntry{std::move(value), submitter, sequence});
  if (!inserted) return SetResult::KeyExists;
  order_.push_back(key);
  return SetResult::Ok;
}

const StoreEntry* WriteOnceStore::find(const Bytes& key) const {
  auto it = entries_.find(key);
  return it == entries_.end() ? nullptr : &it->second;
}

std::optional<Bytes> WriteOnceStore::get(const Bytes& key) const {
  if (const auto* e = find(key)) return e->value;
  return std::nullopt;
}

Bytes WriteOnceStore::serialize() const {
  ByteWriter w;
  w.u64(order_.size());
  for (const auto& key : order_) {
    const auto& e = entries_.at(key);
    w.bytes(key).bytes(e.value).u32(e.submitter.index).u64(e.sequence);
  }
  return w.take();
}

}  // namespace pufchain
