#include "semcom/channel.hpp"

#include <cmath>
#include <stdexcept>

namespace semcom {

ChannelState ChannelState::make(Fading fading, double gain, double tx_power, double noise_power,
                                double blocklength, std::uint64_t seed) {
  if (fading == Fading::awgn) gain = 1.0;
  ChannelState s;
  s.fading = fading;
  s.gain = gain;
  s.tx_power = tx_power;
  s.noise_power = noise_power;
  s.snr = snr_of(gain, tx_power, noise_power);
  s.blocklength = blocklength;
  s.seed = seed;
  return s;
}

bool ChannelState::consistent() const {
  if (fading == Fading::awgn && gain != 1.0) return false;
  return std::abs(snr - snr_of(gain, tx_power, noise_power)) <= 1e-12;
}

double sample_gain(Fading fading, RngStream& rng) {
  if (fading == Fading::awgn) return 1.0;
  // -log(1-U) ~ Exp(1) is the squared magnitude.
  const double u = rng.next_unit();
  return std::sqrt(-std::log(1.0 - u));
}

double snr_of(double gain, double tx_power, double noise_power) {
  if (!(noise_power > 0.0)) throw std::invalid_argument("snr_of: noise power must be positive");
  if (gain < 0.0 || tx_power < 0.0) throw std::invalid_argument("snr_of: negative input");
  return gain * gain * tx_power / noise_power;
}

std::vector<std::uint8_t> transmit(const std::vector<std::uint8_t>& bits, double eps,
                                   RngStream& rng) {
  if (!(eps >= 0.0) || !(eps <= 1.0)) throw std::invalid_argument("transmit: eps must be in [0,1]");
  std::vector<std::uint8_t> out(bits.size());
  for (std::size_t i = 0; i < bits.size(); ++i) {
    const bool flip = rng.next_unit() < eps;
    out[i] = flip ? static_cast<std::uint8_t>(1 - bits[i]) : bits[i];
  }
  return out;
}

CsiReport report_csi(const std::vector<ChannelState>& states, std::uint64_t trial) {
  CsiReport csi;
  csi.trial = trial;
  for (const ChannelState& s : states) csi.snr.push_back(s.snr);
  return csi;
}

double link_error_prob(const ChannelState& state, double rate) {
  return error_prob_of_rate(LinkParams::from_snr(state.snr, state.blocklength), rate);
}

}  // namespace semcom
