#pragma once

#include <cstdint>
#include <vector>

#include "semcom/fbl.hpp"
#include "semcom/linalg.hpp"
#include "semcom/rng.hpp"

namespace semcom {

enum class Fading { awgn, rayleigh };

// Flat-fading link state for one modality. The gain stays fixed for the
// whole inference sample; AWGN pins it to 1 and never touches the RNG.
struct ChannelState {
  Fading fading = Fading::awgn;
  double gain = 1.0;
  double tx_power = 1.0;
  double noise_power = 1.0;
  double snr = 1.0;  // |gain|^2 * tx_power / noise_power
  double blocklength = 256.0;
  std::uint64_t seed = 0;

  static ChannelState make(Fading fading, double gain, double tx_power, double noise_power,
                           double blocklength, std::uint64_t seed);
  bool consistent() const;
};

struct CsiReport {
  Vec snr;  // per modality
  std::uint64_t trial = 0;
};

// Perfect-CSI feedback: the receiver reports each link's SNR.
CsiReport report_csi(const std::vector<ChannelState>& states, std::uint64_t trial);

// AWGN: exactly 1. Rayleigh: |h|^2 ~ Exp(1) (unit mean power), i.e. the
// magnitude is Rayleigh with scale 1/sqrt(2).
double sample_gain(Fading fading, RngStream& rng);

double snr_of(double gain, double tx_power, double noise_power);

// Flip each bit independently with probability eps.
std::vector<std::uint8_t> transmit(const std::vector<std::uint8_t>& bits, double eps,
                                   RngStream& rng);

double link_error_prob(const ChannelState& state, double rate);

}  // namespace semcom
