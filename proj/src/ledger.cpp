#include "pufchain/ledger.hpp"

#include "json.hpp"

namespace pufchain {

Bytes value_signing_payload(const Bytes& key, const Bytes& value) {
  ByteWriter w;
  w.bytes(key).bytes(value);
  return w.take();
}

Transaction make_transaction(const PartyIdentity& submitter, Bytes key, Bytes value) {
  Transaction txn;
  txn.submitter = submitter.id();
  txn.key_signature = submitter.sign_bytes(key);
  txn.value_signature = submitter.sign_bytes(value_signing_payload(key, value));
  txn.key = std::move(key);
  txn.value = std::move(value);
  return txn;
}

bool key_signature_valid(const Transaction& txn, const Pki& pki) {
  return pki.verify(txn.key, txn.submitter, txn.key_signature);
}

bool signatures_valid(const Transaction& txn, const Pki& pki) {
  return key_signature_valid(txn, pki) &&
         pki.verify(value_signing_payload(txn.key, txn.value), txn.submitter,
                    txn.value_signature);
}

void encode(ByteWriter& w, const Transaction& txn) {
  w.u32(txn.submitter.index).bytes(txn.key).bytes(txn.value);
  w.fixed(txn.key_signature).fixed(txn.value_signature);
}

Transaction decode_transaction(ByteReader& r) {
  Transaction txn;
  txn.submitter.index = r.u32();
  txn.key = r.bytes();
  txn.value = r.bytes();
  txn.key_signature = r.fixed<32>();
  txn.value_signature = r.fixed<32>();
  return txn;
}

Digest transaction_id(const Transaction& txn) {
  ByteWriter w;
  encode(w, txn);
  return digest(w.view());
}

std::string to_string(ApplyOutcome o) {
  switch (o) {
    case ApplyOutcome::Applied: return "applied";
    case ApplyOutcome::KeyExists: return "key_exists";
    case ApplyOutcome::Rejected: return "rejected";
  }
  return "unknown";
}

ApplyOutcome apply_transaction(WriteOnceStore& store, const Transaction& txn, const Pki& pki,
                               const TransactionValidator& validator) {
  if (!signatures_valid(txn, pki)) return ApplyOutcome::Rejected;
  if (validator && !validator(txn, store)) return ApplyOutcome::Rejected;
  return store.set(txn.key, txn.value, txn.submitter) == SetResult::Ok ? ApplyOutcome::Applied
                                                                       : ApplyOutcome::KeyExists;
}

bool prefix_consistent(const LedgerLog& a, const LedgerLog& b) {
  const auto n = std::min(a.size(), b.size());
  for (std::size_t i = 0; i < n; ++i) {
    if (a[i].slot != b[i].slot || !(a[i].txn == b[i].txn) || a[i].outcome != b[i].outcome)
      return false;
  }
  return true;
}

std::string export_jsonl(const LedgerLog& log, const Pki& pki, const KeyRenderer& render_key) {
  std::string out;
  for (std::size_t i = 0; i < log.size(); ++i) {
    const auto& e = log[i];
    nlohmann::ordered_json line;
    line["seq"] = i;
    line["submitter"] = e.txn.submitter.index;
    line["key"] = render_key ? render_key(e.txn.key) : to_hex(e.txn.key);
    line["value"] = to_hex(e.txn.value);
    line["key_signature_valid"] = key_signature_valid(e.txn, pki);
    out += line.dump();
    out += '\n';
  }
  return out;
}

}  // namespace pufchain
