#include "pufchain/tracking.hpp"

#include <stdexcept>

namespace pufchain {
namespace {

bool edge_tag(Tag t) { return t != Tag::Crd; }

bool decodes(const auto& fn) {
  try {
    fn();
    return true;
  } catch (const DecodeError&) {
    return false;
  }
}

struct Checker {
  const ContractConfig& config;
  const Transaction& txn;
  const WriteOnceStore& store;

  bool has(const TrackingKey& k) const { return store.contains(k.encode()); }

  bool run() const {
    TrackingKey key;
    if (!decodes([&] { key = decode_tracking_key(txn.key); })) return false;
    for (auto p : key.parties) {
      if (p.index >= config.parties) return false;
    }
    if (key.item.producer.index >= config.parties) return false;
    if (responsible_party(key) != txn.submitter) return false;
    if (key.tag == Tag::Crd) return crd(key);

    const auto s = key.parties[0];
    const auto b = key.parties[1];
    if (s == b) return false;
    const auto shipped = edge_key(Tag::Shipped, s, b, key.item);
    const auto declared = edge_key(Tag::DeclareVerification, s, b, key.item);
    switch (key.tag) {
      case Tag::Shipped:
      case Tag::NoShip:
      case Tag::NoCrd: {
        bool same_item = false;
        if (!decodes([&] {
              ByteReader r(txn.value);
              same_item = decode_item_id(r) == key.item;
              r.expect_done();
            }))
          return false;
        if (!same_item) return false;
        if (key.tag == Tag::NoShip) return !has(shipped);
        if (key.tag == Tag::NoCrd) return has(shipped) && !has(crd_key(key.item));
        return true;
      }
      case Tag::DeclareVerification: {
        ChallengeResponseVector crv;
        if (!decodes([&] { crv = decode_crv_value(txn.value); })) return false;
        return crv.size() == config.challenges && has(shipped) && has(crd_key(key.item));
      }
      case Tag::VerificationSucceeded:
      case Tag::VerificationFailed: {
        const auto declaration = store.get(declared.encode());
        if (!declaration) return false;
        const auto other = edge_key(key.tag == Tag::VerificationSucceeded
                                        ? Tag::VerificationFailed
                                        : Tag::VerificationSucceeded,
                                    s, b, key.item);
        if (has(other)) return false;
        if (key.tag == Tag::VerificationSucceeded) return txn.value == *declaration;
        std::pair<ChallengeResponseVector, ChallengeResponseVector> v;
        if (!decodes([&] { v = decode_failure_value(txn.value); })) return false;
        if (encode_crv_value(v.first) != *declaration) return false;
        try {
          return !passes(match_count(v.first, v.second), config.required);
        } catch (const ChallengeMismatch&) {
          return false;
        }
      }
      case Tag::Crd:
        break;
    }
    return false;
  }

  bool crd(const TrackingKey& key) const {
    if (!key.parties.empty() || key.item.producer != txn.submitter) return false;
    std::pair<PartyId, ChallengeResponseData> v;
    if (!decodes([&] { v = decode_crd_value(txn.value); })) return false;
    const auto& [producer, data] = v;
    if (producer != txn.submitter || data.item != key.item) return false;
    if (data.subsets.size() != config.parties) return false;
    for (std::size_t w = 0; w < data.subsets.size(); ++w) {
      if (data.subsets[w].recipient.index != w) return false;
    }
    return true;
  }
};

Status status_of(ApplyOutcome o) {
  switch (o) {
    case ApplyOutcome::Applied: return Status::Ok;
    case ApplyOutcome::KeyExists: return Status::KeyExists;
    case ApplyOutcome::Rejected: return Status::Rejected;
  }
  return Status::Rejected;
}

}  // namespace

std::string to_string(Tag tag) {
  switch (tag) {
    case Tag::Crd: return "crd";
    case Tag::Shipped: return "shipped";
    case Tag::NoShip: return "no_ship";
    case Tag::NoCrd: return "no_crd";
    case Tag::DeclareVerification: return "declare_verification";
    case Tag::VerificationSucceeded: return "verification_succeeded";
    case Tag::VerificationFailed: return "verification_failed";
  }
  return "unknown";
}

Bytes TrackingKey::encode() const {
  ByteWriter w;
  w.u8(static_cast<std::uint8_t>(tag)).u32(static_cast<std::uint32_t>(parties.size()));
  for (auto p : parties) w.u32(p.index);
  pufchain::encode(w, item);
  return w.take();
}

TrackingKey decode_tracking_key(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  TrackingKey key;
  const auto tag = r.u8();
  if (tag < static_cast<std::uint8_t>(Tag::Crd) ||
      tag > static_cast<std::uint8_t>(Tag::VerificationFailed))
    throw DecodeError("unknown tracking tag");
  key.tag = static_cast<Tag>(tag);
  const auto n = r.u32();
  if (n != (edge_tag(key.tag) ? 2u : 0u)) throw DecodeError("wrong party count for tag");
  for (std::uint32_t i = 0; i < n; ++i) key.parties.push_back(PartyId{r.u32()});
  key.item = decode_item_id(r);
  r.expect_done();
  return key;
}

std::string to_string(const TrackingKey& key) {
  std::string out = "<" + to_string(key.tag);
  for (auto p : key.parties) out += "," + std::to_string(p.index);
  return out + "," + to_string(key.item) + ">";
}

TrackingKey crd_key(ItemId item) { return TrackingKey{Tag::Crd, {}, item}; }

TrackingKey edge_key(Tag tag, PartyId supplier, PartyId buyer, ItemId item) {
  if (!edge_tag(tag)) throw std::invalid_argument("crd records are not per edge");
  return TrackingKey{tag, {supplier, buyer}, item};
}

PartyId responsible_party(const TrackingKey& key) {
  if (key.tag == Tag::Crd) return key.item.producer;
  return key.tag == Tag::Shipped ? key.parties.at(0) : key.parties.at(1);
}

void ContractConfig::validate() const {
  if (challenges == 0) throw std::invalid_argument("C must be positive");
  if (required < 1 || required > challenges)
    throw std::invalid_argument("R must lie in [1, C]");
  if (parties < 2) throw std::invalid_argument("need at least two parties");
}

Bytes encode_crd_value(PartyId producer, const ChallengeResponseData& crd) {
  ByteWriter w;
  w.u32(producer.index);
  encode(w, crd);
  return w.take();
}

std::pair<PartyId, ChallengeResponseData> decode_crd_value(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  PartyId producer{r.u32()};
  auto crd = decode_crd(r);
  r.expect_done();
  return {producer, std::move(crd)};
}

Bytes encode_item_value(ItemId item) {
  ByteWriter w;
  encode(w, item);
  return w.take();
}

Bytes encode_crv_value(const ChallengeResponseVector& crv) {
  ByteWriter w;
  encode(w, crv);
  return w.take();
}

ChallengeResponseVector decode_crv_value(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  auto crv = decode_crv(r);
  r.expect_done();
  return crv;
}

Bytes encode_failure_value(const ChallengeResponseVector& expected,
                           const ChallengeResponseVector& measured) {
  ByteWriter w;
  encode(w, expected);
  encode(w, measured);
  return w.take();
}

std::pair<ChallengeResponseVector, ChallengeResponseVector> decode_failure_value(
    std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  auto expected = decode_crv(r);
  auto measured = decode_crv(r);
  r.expect_done();
  return {std::move(expected), std::move(measured)};
}

TransactionValidator make_tracking_validator(ContractConfig config) {
  config.validate();
  return [config](const Transaction& txn, const WriteOnceStore& store) {
    return Checker{config, txn, store}.run();
  };
}

std::string render_key(const Bytes& key) {
  try {
    return to_string(decode_tracking_key(key));
  } catch (const DecodeError&) {
    return to_hex(key);
  }
}

std::string to_string(Status s) {
  switch (s) {
    case Status::Ok: return "ok";
    case Status::KeyExists: return "key_exists";
    case Status::NoShip: return "no_ship";
    case Status::NoCrd: return "no_crd";
    case Status::NoDeclaration: return "no_declaration";
    case Status::DeclarationMismatch: return "declaration_mismatch";
    case Status::Rejected: return "rejected";
  }
  return "unknown";
}

bool passes(std::size_t match_count, std::size_t required) { return match_count >= required; }

TrackingContract::TrackingContract(Consortium& net, ContractConfig config)
    : net_(net), config_(config) {
  config_.validate();
  if (net_.size() != config_.parties)
    throw std::invalid_argument("consortium size differs from contract party count");
}

const WriteOnceStore& TrackingContract::local_store(PartyId reader) const {
  if (reader.index < net_.size() && net_.is_honest(reader)) return net_.store(reader);
  const auto honest = net_.honest_nodes();
  if (honest.empty()) throw std::logic_error("no honest node to read from");
  return net_.store(honest.front());
}

std::optional<Bytes> TrackingContract::get(PartyId reader, const TrackingKey& key) const {
  return local_store(reader).get(key.encode());
}

Status TrackingContract::write(const PartyIdentity& caller, const TrackingKey& key, Bytes value) {
  const auto txn = make_transaction(caller, key.encode(), std::move(value));
  return status_of(net_.await(net_.submit(txn)));
}

Status TrackingContract::register_item(const PartyIdentity& caller,
                                       const ChallengeResponseData& crd) {
  const auto key = crd_key(crd.item);
  if (contains(caller.id(), key)) return Status::KeyExists;
  return write(caller, key, encode_crd_value(caller.id(), crd));
}

Status TrackingContract::ship_item(const PartyIdentity& supplier, PartyId buyer, ItemId item) {
  const auto key = edge_key(Tag::Shipped, supplier.id(), buyer, item);
  if (contains(supplier.id(), key)) return Status::KeyExists;
  return write(supplier, key, encode_item_value(item));
}

ChallengeResult TrackingContract::get_challenges(const PartyIdentity& buyer, PartyId supplier,
                                                 ItemId item) {
  const auto me = buyer.id();
  if (!contains(me, edge_key(Tag::Shipped, supplier, me, item))) {
    (void)write(buyer, edge_key(Tag::NoShip, supplier, me, item), encode_item_value(item));
    return {Status::NoShip, {}};
  }
  const auto crd = get(me, crd_key(item));
  if (!crd) {
    (void)write(buyer, edge_key(Tag::NoCrd, supplier, me, item), encode_item_value(item));
    return {Status::NoCrd, {}};
  }
  const auto declaration = edge_key(Tag::DeclareVerification, supplier, me, item);
  if (contains(me, declaration)) return {Status::KeyExists, {}};
  auto crv = open_subset(decode_crd_value(*crd).second, buyer);
  const auto status = write(buyer, declaration, encode_crv_value(crv));
  if (status != Status::Ok) return {status, {}};
  return {Status::Ok, std::move(crv)};
}

VerifyResult TrackingContract::verify_item(const PartyIdentity& buyer, PartyId supplier,
                                           ItemId item, const ChallengeResponseVector& expected,
                                           const ChallengeResponseVector& measured) {
  const auto me = buyer.id();
  const auto declared = get(me, edge_key(Tag::DeclareVerification, supplier, me, item));
  if (!declared) return {Status::NoDeclaration, std::nullopt};
  if (*declared != encode_crv_value(expected)) return {Status::DeclarationMismatch, std::nullopt};
  if (contains(me, edge_key(Tag::VerificationSucceeded, supplier, me, item)) ||
      contains(me, edge_key(Tag::VerificationFailed, supplier, me, item)))
    return {Status::KeyExists, std::nullopt};

  VerificationRecord rec;
  rec.supplier = supplier;
  rec.verifier = me;
  rec.item = item;
  rec.expected = expected;
  rec.match_count = match_count(expected, measured);
  rec.succeeded = passes(rec.match_count, config_.required);
  Status status;
  if (rec.succeeded) {
    status = write(buyer, edge_key(Tag::VerificationSucceeded, supplier, me, item),
                   encode_crv_value(expected));
  } else {
    rec.measured = measured;
    status = write(buyer, edge_key(Tag::VerificationFailed, supplier, me, item),
                   encode_failure_value(expected, measured));
  }
  if (status != Status::Ok) return {status, std::nullopt};
  return {Status::Ok, std::move(rec)};
}

std::vector<TrackingKey> records_for(const WriteOnceStore& store, ItemId item) {
  std::vector<TrackingKey> out;
  for (const auto& k : store.keys()) {
    try {
      auto key = decode_tracking_key(k);
      if (key.item == item) out.push_back(std::move(key));
    } catch (const DecodeError&) {
    }
  }
  return out;
}

}  // namespace pufchain
