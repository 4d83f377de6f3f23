#include "pufchain/puf.hpp"

#include <set>

namespace pufchain {

std::string to_string(const ItemId& item) {
  return std::to_string(item.producer.index) + ":" + std::to_string(item.counter);
}

void encode(ByteWriter& w, const ItemId& item) { w.u32(item.producer.index).u64(item.counter); }

ItemId decode_item_id(ByteReader& r) {
  ItemId item;
  item.producer.index = r.u32();
  item.counter = r.u64();
  return item;
}

void PufParams::validate() const {
  if (width < 1 || width > 64) throw std::invalid_argument("response width must be in [1, 64]");
  if (!(noise_rate >= 0.0 && noise_rate < 1.0))
    throw std::invalid_argument("noise rate must be in [0, 1)");
}

void encode(ByteWriter& w, const ChallengeResponseVector& crv) {
  w.u32(static_cast<std::uint32_t>(crv.pairs.size()));
  for (const auto& p : crv.pairs) w.u64(p.challenge).u64(p.response);
}

ChallengeResponseVector decode_crv(ByteReader& r) {
  ChallengeResponseVector crv;
  const auto n = r.u32();
  if (n > (1u << 20)) throw DecodeError("implausible pair count");
  crv.pairs.reserve(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    ChallengeResponsePair p;
    p.challenge = r.u64();
    p.response = r.u64();
    crv.pairs.push_back(p);
  }
  return crv;
}

void encode(ByteWriter& w, const ChallengeResponseData& crd) {
  encode(w, crd.item);
  w.u32(static_cast<std::uint32_t>(crd.subsets.size()));
  for (const auto& s : crd.subsets) w.u32(s.recipient.index).bytes(s.ciphertext);
}

ChallengeResponseData decode_crd(ByteReader& r) {
  ChallengeResponseData crd;
  crd.item = decode_item_id(r);
  const auto n = r.u32();
  if (n > 4096) throw DecodeError("implausible subset count");
  for (std::uint32_t i = 0; i < n; ++i) {
    Sealed s;
    s.recipient.index = r.u32();
    s.ciphertext = r.bytes();
    crd.subsets.push_back(std::move(s));
  }
  return crd;
}

PufDevice::PufDevice(std::uint64_t device_seed, PufParams params, std::uint64_t noise_seed)
    : device_seed_(device_seed), params_(params), noise_(noise_seed) {
  params_.validate();
}

std::uint64_t PufDevice::response_mask() const {
  return params_.width == 64 ? ~std::uint64_t{0} : ((std::uint64_t{1} << params_.width) - 1);
}

std::uint64_t PufDevice::ideal_response(std::uint64_t challenge) const {
  if (replay_) {
    auto it = replay_->find(challenge);
    if (it != replay_->end()) return it->second;
  }
  return splitmix64(mix_seed(function_seed(), challenge)) & response_mask();
}

std::uint64_t PufDevice::query(std::uint64_t challenge) {
  auto response = ideal_response(challenge);
  if (params_.noise_rate > 0.0) {
    for (unsigned bit = 0; bit < params_.width; ++bit) {
      if (uniform01(noise_) < params_.noise_rate) response ^= std::uint64_t{1} << bit;
    }
  }
  return response;
}

PufDevice tamper(const PufDevice& device, Rng& rng) {
  PufDevice out = device;
  std::uint64_t seed = rng();
  while (seed == device.device_seed_ || seed == device.function_seed()) seed = rng();
  out.tamper_seed_ = seed;
  out.replay_.reset();
  out.noise_.seed(rng());
  return out;
}

std::optional<PufDevice> clone(std::span<const ChallengeResponsePair> observed,
                               std::size_t threshold, const PufParams& params, Rng& rng) {
  if (observed.size() < threshold) return std::nullopt;
  auto table = std::make_shared<std::map<std::uint64_t, std::uint64_t>>();
  for (const auto& p : observed) table->emplace(p.challenge, p.response);
  const auto seed = rng();
  PufDevice out(seed, params, rng());
  out.replay_ = std::move(table);
  return out;
}

PufDevice make_device(const PufParams& params, Rng& rng) {
  const auto seed = rng();
  return PufDevice(seed, params, rng());
}

std::uint64_t stable_response(PufDevice& device, std::uint64_t challenge) {
  const unsigned width = device.params().width;
  std::vector<int> ones(width, 0);
  for (int k = 0; k < kEnrolmentRepeats; ++k) {
    const auto r = device.query(challenge);
    for (unsigned bit = 0; bit < width; ++bit) ones[bit] += static_cast<int>((r >> bit) & 1U);
  }
  std::uint64_t out = 0;
  for (unsigned bit = 0; bit < width; ++bit) {
    if (2 * ones[bit] > kEnrolmentRepeats) out |= std::uint64_t{1} << bit;
  }
  return out;
}

ChallengeResponseData enroll(PufDevice& device, ItemId item, const Pki& pki,
                             std::size_t parties, std::size_t per_party, Rng& rng) {
  std::set<std::uint64_t> drawn;
  std::vector<std::uint64_t> challenges;
  challenges.reserve(parties * per_party);
  while (challenges.size() < parties * per_party) {
    const auto c = rng();
    if (drawn.insert(c).second) challenges.push_back(c);
  }

  ChallengeResponseData crd;
  crd.item = item;
  crd.subsets.reserve(parties);
  for (std::size_t w = 0; w < parties; ++w) {
    ChallengeResponseVector subset;
    subset.pairs.reserve(per_party);
    for (std::size_t k = 0; k < per_party; ++k) {
      const auto c = challenges[w * per_party + k];
      subset.pairs.push_back({c, stable_response(device, c)});
    }
    ByteWriter plain;
    encode(plain, subset);
    crd.subsets.push_back(pki.seal(plain.view(), PartyId{static_cast<std::uint32_t>(w)}));
  }
  return crd;
}

ChallengeResponseVector open_subset(const ChallengeResponseData& crd,
                                    const PartyIdentity& holder) {
  if (holder.id().index >= crd.subsets.size()) throw OpenDenied();
  const auto plain = holder.open(crd.subsets[holder.id().index]);
  ByteReader r(plain);
  auto crv = decode_crv(r);
  r.expect_done();
  return crv;
}

ChallengeResponseVector measure(PufDevice& device, const ChallengeResponseVector& expected) {
  ChallengeResponseVector out;
  out.pairs.reserve(expected.size());
  for (const auto& p : expected.pairs) out.pairs.push_back({p.challenge, device.query(p.challenge)});
  return out;
}

std::size_t match_count(const ChallengeResponseVector& expected,
                        const ChallengeResponseVector& measured) {
  if (expected.size() != measured.size()) throw ChallengeMismatch();
  std::size_t r = 0;
  for (std::size_t k = 0; k < expected.size(); ++k) {
    if (expected.pairs[k].challenge != measured.pairs[k].challenge) throw ChallengeMismatch();
    if (expected.pairs[k].response == measured.pairs[k].response) ++r;
  }
  return r;
}

}  // namespace pufchain
