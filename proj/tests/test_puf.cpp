#include <algorithm>
#include <cmath>
#include <set>

#include "doctest.h"
#include "pufchain/puf.hpp"
#include "support/binomial.hpp"

using namespace pufchain;
using pufchain::testing::binomial_pmf;
using pufchain::testing::three_sigma;

namespace {

// Reference comparator: counts equal responses position by position after
// checking that both vectors carry the same challenges.
std::optional<std::size_t> brute_force_matches(const ChallengeResponseVector& a,
                                               const ChallengeResponseVector& b) {
  if (a.pairs.size() != b.pairs.size()) return std::nullopt;
  std::size_t r = 0;
  for (std::size_t i = 0; i < a.pairs.size(); ++i) {
    if (a.pairs[i].challenge != b.pairs[i].challenge) return std::nullopt;
    r += a.pairs[i].response == b.pairs[i].response ? 1 : 0;
  }
  return r;
}

ChallengeResponseVector random_crv(Rng& rng, std::size_t n, std::uint64_t mask) {
  ChallengeResponseVector v;
  for (std::size_t i = 0; i < n; ++i) v.pairs.push_back({rng(), rng() & mask});
  return v;
}

}  // namespace

TEST_SUITE("puf") {
  TEST_CASE("parameter validation") {
    CHECK_THROWS_AS((PufParams{0, 0.0}.validate()), std::invalid_argument);
    CHECK_THROWS_AS((PufParams{65, 0.0}.validate()), std::invalid_argument);
    CHECK_THROWS_AS((PufParams{8, 1.0}.validate()), std::invalid_argument);
    CHECK_THROWS_AS((PufParams{8, -0.1}.validate()), std::invalid_argument);
    CHECK_NOTHROW((PufParams{64, 0.0}.validate()));
  }

  TEST_CASE("responses fit the width") {
    Rng rng(1);
    for (unsigned w : {1u, 4u, 8u, 32u, 64u}) {
      auto d = make_device({w, 0.1}, rng);
      for (int k = 0; k < 200; ++k) CHECK((d.query(rng()) & ~d.response_mask()) == 0);
    }
  }

  TEST_CASE("noise-free query equals the ideal response") {
    Rng rng(2);
    auto d = make_device({16, 0.0}, rng);
    for (int k = 0; k < 100; ++k) {
      const auto c = rng();
      CHECK(d.query(c) == d.ideal_response(c));
    }
  }

  TEST_CASE("fraction of exact responses at W=32, noise 0.01") {
    // (1 - 0.01)^32 ~ 0.725
    Rng rng(3);
    auto d = make_device({32, 0.01}, rng);
    const std::size_t trials = 10000;
    const auto c = rng();
    std::size_t exact = 0;
    for (std::size_t k = 0; k < trials; ++k) exact += d.query(c) == d.ideal_response(c) ? 1 : 0;
    const double frac = static_cast<double>(exact) / trials;
    CHECK(std::pow(0.99, 32) == doctest::Approx(0.725).epsilon(0.001));
    CHECK(std::abs(frac - 0.725) < 0.02);
  }

  TEST_CASE("independent devices collide at rate 2^-W") {
    Rng rng(4);
    for (unsigned w : {4u, 8u}) {
      auto a = make_device({w, 0.0}, rng);
      auto b = make_device({w, 0.0}, rng);
      const std::size_t trials = 100000;
      std::size_t same = 0;
      for (std::size_t k = 0; k < trials; ++k) {
        const auto c = rng();
        same += a.ideal_response(c) == b.ideal_response(c) ? 1 : 0;
      }
      const double p = std::ldexp(1.0, -static_cast<int>(w));
      CHECK(std::abs(static_cast<double>(same) / trials - p) < three_sigma(p, trials));
    }
  }

  TEST_CASE("tampered device matches the original on about 100 * 2^-8 of 100 challenges") {
    Rng rng(5);
    const std::size_t tamperings = 2000;
    std::size_t total = 0;
    for (std::size_t t = 0; t < tamperings; ++t) {
      auto d = make_device({8, 0.0}, rng);
      auto forged = tamper(d, rng);
      CHECK(forged.tampered());
      CHECK(forged.device_seed() == d.device_seed());
      for (int k = 0; k < 100; ++k) {
        const auto c = rng();
        total += forged.ideal_response(c) == d.ideal_response(c) ? 1 : 0;
      }
    }
    const double p = 1.0 / 256.0;
    const double mean = static_cast<double>(total) / tamperings;
    CHECK(100 * p == doctest::Approx(0.39).epsilon(0.01));
    CHECK(std::abs(mean / 100 - p) < three_sigma(p, tamperings * 100));
  }

  TEST_CASE("clone needs the query threshold and replays what it saw") {
    Rng rng(6);
    auto genuine = make_device({8, 0.0}, rng);
    std::vector<ChallengeResponsePair> seen;
    for (int k = 0; k < 50; ++k) {
      const auto c = rng();
      seen.push_back({c, genuine.query(c)});
    }
    CHECK_FALSE(clone(std::span(seen).first(49), 50, genuine.params(), rng).has_value());
    auto copy = clone(seen, 50, genuine.params(), rng);
    REQUIRE(copy.has_value());
    CHECK(copy->is_clone());
    for (const auto& p : seen) CHECK(copy->query(p.challenge) == p.response);
    std::size_t same = 0;
    const std::size_t fresh = 20000;
    for (std::size_t k = 0; k < fresh; ++k) {
      const auto c = rng();
      same += copy->query(c) == genuine.ideal_response(c) ? 1 : 0;
    }
    CHECK(std::abs(static_cast<double>(same) / fresh - 1.0 / 256) < three_sigma(1.0 / 256, fresh));
  }

  TEST_CASE("enrolment draws C*N distinct challenges sealed per party") {
    Rng rng(7);
    auto setup = make_pki(3, 70);
    auto d = make_device({8, 0.002}, rng);
    const ItemId item{PartyId{0}, 4};
    const auto crd = enroll(d, item, setup.pki, 3, 10, rng);
    CHECK(crd.item == item);
    REQUIRE(crd.subsets.size() == 3);
    std::set<std::uint64_t> challenges;
    for (std::uint32_t w = 0; w < 3; ++w) {
      CHECK(crd.subsets[w].recipient == PartyId{w});
      const auto subset = open_subset(crd, setup.identities[w]);
      CHECK(subset.size() == 10);
      for (const auto& p : subset.pairs) {
        challenges.insert(p.challenge);
        CHECK(p.response == d.ideal_response(p.challenge));
      }
      for (std::uint32_t other = 0; other < 3; ++other) {
        if (other != w) CHECK_THROWS_AS(setup.identities[other].open(crd.subsets[w]), OpenDenied);
      }
    }
    CHECK(challenges.size() == 30);
  }

  TEST_CASE("CRD and CRV encodings round-trip") {
    Rng rng(8);
    auto setup = make_pki(2, 80);
    auto d = make_device({8, 0.0}, rng);
    const auto crd = enroll(d, ItemId{PartyId{1}, 9}, setup.pki, 2, 3, rng);
    ByteWriter w;
    encode(w, crd);
    ByteReader r(w.view());
    CHECK(decode_crd(r) == crd);
    const auto crv = random_crv(rng, 7, 0xff);
    ByteWriter w2;
    encode(w2, crv);
    ByteReader r2(w2.view());
    CHECK(decode_crv(r2) == crv);
  }

  TEST_CASE("match_count agrees with a brute-force comparator") {
    Rng rng(9);
    for (int trial = 0; trial < 500; ++trial) {
      const std::size_t n = uniform_below(rng, 12);
      auto a = random_crv(rng, n, 0x3);
      auto b = a;
      for (auto& p : b.pairs) {
        if (uniform01(rng) < 0.5) p.response = rng() & 0x3;
      }
      const auto expected = brute_force_matches(a, b);
      REQUIRE(expected.has_value());
      CHECK(match_count(a, b) == *expected);
      CHECK(match_count(b, a) == *expected);
      CHECK(match_count(a, b) <= n);
      CHECK(match_count(a, a) == n);
    }
  }

  TEST_CASE("match_count rejects different challenge sequences") {
    Rng rng(10);
    auto a = random_crv(rng, 5, 0xff);
    auto shorter = a;
    shorter.pairs.pop_back();
    CHECK_THROWS_AS(match_count(a, shorter), ChallengeMismatch);
    auto moved = a;
    moved.pairs[2].challenge ^= 1;
    CHECK_THROWS_AS(match_count(a, moved), ChallengeMismatch);
  }

  TEST_CASE("match count of a genuine device is binomial") {
    // Each pair matches with probability (1 - eps)^W.
    Rng rng(11);
    const PufParams params{4, 0.002};
    auto d = make_device(params, rng);
    auto setup = make_pki(1, 110);
    const std::size_t C = 10;
    const double p = std::pow(1.0 - params.noise_rate, params.width);
    const std::size_t trials = 4000;
    std::vector<std::size_t> hist(C + 1, 0);
    double sum = 0;
    for (std::size_t t = 0; t < trials; ++t) {
      const auto crd = enroll(d, ItemId{PartyId{0}, t}, setup.pki, 1, C, rng);
      const auto expected = open_subset(crd, setup.identities[0]);
      const auto r = match_count(expected, measure(d, expected));
      ++hist[r];
      sum += static_cast<double>(r);
    }
    const double var = C * p * (1 - p);
    CHECK(std::abs(sum / trials - C * p) < 3 * std::sqrt(var / trials));
    const double p10 = binomial_pmf(C, C, p);
    CHECK(std::abs(static_cast<double>(hist[C]) / trials - p10) < three_sigma(p10, trials));
  }

  TEST_CASE("stable response removes rare noise") {
    Rng rng(12);
    auto d = make_device({8, 0.002}, rng);
    for (int k = 0; k < 500; ++k) {
      const auto c = rng();
      CHECK(stable_response(d, c) == d.ideal_response(c));
    }
  }

  TEST_CASE("devices are deterministic for a fixed seed") {
    auto run = [] {
      Rng rng(13);
      auto d = make_device({8, 0.05}, rng);
      std::vector<std::uint64_t> out;
      for (int k = 0; k < 100; ++k) out.push_back(d.query(rng()));
      auto t = tamper(d, rng);
      for (int k = 0; k < 100; ++k) out.push_back(t.query(rng()));
      return out;
    };
    CHECK(run() == run());
  }
}
