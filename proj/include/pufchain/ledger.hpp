#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "pufchain/bytes.hpp"
#include "pufchain/crypto.hpp"
#include "pufchain/store.hpp"

namespace pufchain {

// A signed set operation. The key signature covers the key; the value
// signature covers (key, value) so a signed value cannot be re-bound to a
// different key.
struct Transaction {
  PartyId submitter;
  Bytes key;
  Bytes value;
  Signature key_signature{};
  Signature value_signature{};

  friend bool operator==(const Transaction&, const Transaction&) = default;
};

Transaction make_transaction(const PartyIdentity& submitter, Bytes key, Bytes value);

Bytes value_signing_payload(const Bytes& key, const Bytes& value);
bool key_signature_valid(const Transaction& txn, const Pki& pki);
bool signatures_valid(const Transaction& txn, const Pki& pki);

void encode(ByteWriter& w, const Transaction& txn);
Transaction decode_transaction(ByteReader& r);
Digest transaction_id(const Transaction& txn);

class RejectedSignature : public std::invalid_argument {
 public:
  RejectedSignature() : std::invalid_argument("transaction signature does not verify") {}
};

// Deterministic admission rule evaluated by every replica when a committed
// transaction is applied, after signature checks and before the store write.
using TransactionValidator = std::function<bool(const Transaction&, const WriteOnceStore&)>;

enum class ApplyOutcome { Applied, KeyExists, Rejected };

std::string to_string(ApplyOutcome o);

ApplyOutcome apply_transaction(WriteOnceStore& store, const Transaction& txn, const Pki& pki,
                               const TransactionValidator& validator);

struct CommittedEntry {
  std::uint64_t slot = 0;
  std::uint64_t view = 0;
  Transaction txn;
  ApplyOutcome outcome = ApplyOutcome::Applied;
  std::vector<PartyId> certificate;  // commit quorum that decided the slot

  friend bool operator==(const CommittedEntry&, const CommittedEntry&) = default;
};

using LedgerLog = std::vector<CommittedEntry>;

// True iff, for every index present in both, the two logs hold the same
// transaction.
bool prefix_consistent(const LedgerLog& a, const LedgerLog& b);

using KeyRenderer = std::function<std::string(const Bytes&)>;

// One JSON object per committed transaction:
// {"seq","submitter","key","value","key_signature_valid"}.
// Keys go through `render_key` (hex by default); values are hex.
std::string export_jsonl(const LedgerLog& log, const Pki& pki, const KeyRenderer& render_key = {});

}  // namespace pufchain
