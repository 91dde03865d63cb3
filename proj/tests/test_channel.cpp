#include <doctest.h>

#include <cmath>

#include "semcom/channel.hpp"
#include "semcom/fbl.hpp"
#include "semcom/rng.hpp"

using namespace semcom;

TEST_CASE("awgn gain is exactly one and consumes no randomness") {
  RngStream used(substream(3, 1));
  CHECK(sample_gain(Fading::awgn, used) == 1.0);
  RngStream fresh(substream(3, 1));
  // The streams stay in lockstep, so no draw happened.
  CHECK(used.next_u64() == fresh.next_u64());
}

TEST_CASE("rayleigh squared gain has unit mean") {
  RngStream rng(substream(3, 2));
  const std::size_t n = 1000000;
  double sum = 0.0, sum_sq = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double h = sample_gain(Fading::rayleigh, rng);
    CHECK(h >= 0.0);
    const double p = h * h;
    sum += p;
    sum_sq += p * p;
  }
  const double mean = sum / n;
  const double var = sum_sq / n - mean * mean;
  CHECK(std::abs(mean - 1.0) <= 3.0 * std::sqrt(var / n));
}

TEST_CASE("identical seeds give identical gain sequences") {
  RngStream a(substream(3, 3)), b(substream(3, 3));
  for (int i = 0; i < 100; ++i)
    CHECK(sample_gain(Fading::rayleigh, a) == sample_gain(Fading::rayleigh, b));
}

TEST_CASE("snr formula") {
  CHECK(snr_of(1.0, 1.0, 1.0) == 1.0);
  CHECK(snr_of(2.0, 1.0, 1.0) == 4.0);
  CHECK(snr_of(1.0, 0.0, 1.0) == 0.0);
  CHECK_THROWS_AS(snr_of(1.0, 1.0, 0.0), std::invalid_argument);
}

TEST_CASE("channel state derives and checks its snr") {
  const ChannelState s = ChannelState::make(Fading::rayleigh, 0.8, 2.0, 0.5, 256.0, 9);
  CHECK(s.snr == doctest::Approx(0.64 * 4.0).epsilon(1e-12));
  CHECK(s.consistent());
  // AWGN pins the gain regardless of the requested value.
  const ChannelState a = ChannelState::make(Fading::awgn, 0.3, 1.0, 1.0, 256.0, 9);
  CHECK(a.gain == 1.0);
  CHECK(a.consistent());
}

TEST_CASE("transmit flips nothing at eps 0 and everything at eps 1") {
  std::vector<std::uint8_t> bits{0, 1, 1, 0, 1, 0, 0, 1};
  RngStream rng(substream(3, 4));
  CHECK(transmit(bits, 0.0, rng) == bits);
  const auto all = transmit(bits, 1.0, rng);
  for (std::size_t i = 0; i < bits.size(); ++i) CHECK(all[i] == 1 - bits[i]);
  CHECK_THROWS_AS(transmit(bits, 1.5, rng), std::invalid_argument);
}

TEST_CASE("flip fraction concentrates at eps") {
  const std::size_t n = 1000000;
  std::vector<std::uint8_t> bits(n, 0);
  RngStream rng(substream(3, 5));
  const auto received = transmit(bits, 0.1, rng);
  std::size_t flips = 0;
  for (std::size_t i = 0; i < n; ++i) flips += received[i];
  const double frac = static_cast<double>(flips) / n;
  const double sigma = std::sqrt(0.1 * 0.9 / n);
  CHECK(std::abs(frac - 0.1) <= 3.0 * sigma);
}

TEST_CASE("transmit is deterministic under a fixed stream") {
  std::vector<std::uint8_t> bits(4096);
  RngStream fill(substream(3, 6));
  for (auto& b : bits) b = fill.next_u64() & 1;
  RngStream a(substream(3, 7)), b(substream(3, 7));
  CHECK(transmit(bits, 0.25, a) == transmit(bits, 0.25, b));
}

TEST_CASE("link error probability composes state and rate") {
  const ChannelState s = ChannelState::make(Fading::awgn, 1.0, 1.0, 1.0, 256.0, 1);
  const LinkParams link = LinkParams::from_snr(1.0, 256.0);
  CHECK(link_error_prob(s, rate_ceiling(link)) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(link_error_prob(s, 0.0) == doctest::Approx(1.928141879744e-5).epsilon(1e-9));
  double prev = -1.0;
  for (double r = 0.0; r < 1.0; r += 0.02) {
    const double eps = link_error_prob(s, r);
    CHECK(eps > prev);
    prev = eps;
  }
}
