#include "semcom/quant.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace semcom {

QuantizedFeature quantize(const Vec& values, unsigned bits_per_element) {
  if (bits_per_element < 1) throw std::invalid_argument("quantize: need at least one bit");
  if (bits_per_element > 62) throw std::invalid_argument("quantize: bits_per_element too large");
  const std::uint64_t levels = std::uint64_t{1} << bits_per_element;

  QuantizedFeature q;
  q.bits_per_element = bits_per_element;
  q.element_count = values.size();
  q.bits.reserve(values.size() * bits_per_element);

  for (std::size_t i = 0; i < values.size(); ++i) {
    const double v = values[i];
    if (!(v >= 0.0) || !(v <= 1.0))
      throw std::invalid_argument("quantize: element " + std::to_string(i) + " out of [0,1]");
    // Nearest code with ties rounding up; the top of the range clamps
    // to the largest code, so codes stay within [0, 1 - 2^-B].
    std::uint64_t code = static_cast<std::uint64_t>(std::floor(v * static_cast<double>(levels) + 0.5));
    if (code >= levels) code = levels - 1;
    for (unsigned b = 0; b < bits_per_element; ++b)
      q.bits.push_back(static_cast<std::uint8_t>((code >> (bits_per_element - 1 - b)) & 1));
  }
  return q;
}

Vec dequantize(const QuantizedFeature& q) {
  if (q.bits.size() != q.element_count * q.bits_per_element)
    throw std::invalid_argument("dequantize: bit length does not match element count");
  Vec out(q.element_count, 0.0);
  std::size_t pos = 0;
  for (std::size_t i = 0; i < q.element_count; ++i) {
    double v = 0.0;
    double w = 0.5;  // weight of bit 1 (MSB)
    for (unsigned b = 0; b < q.bits_per_element; ++b, ++pos, w *= 0.5) {
      if (q.bits[pos] > 1) throw std::invalid_argument("dequantize: non-binary bit");
      if (q.bits[pos]) v += w;
    }
    out[i] = v;
  }
  return out;
}

std::vector<std::uint8_t> pack_bits(const std::vector<std::uint8_t>& bits) {
  std::vector<std::uint8_t> bytes((bits.size() + 7) / 8, 0);
  for (std::size_t i = 0; i < bits.size(); ++i)
    if (bits[i]) bytes[i / 8] |= static_cast<std::uint8_t>(0x80u >> (i % 8));
  return bytes;
}

std::vector<std::uint8_t> unpack_bits(const std::vector<std::uint8_t>& bytes,
                                      std::size_t bit_count) {
  if (bit_count > bytes.size() * 8) throw std::invalid_argument("unpack_bits: not enough bytes");
  std::vector<std::uint8_t> bits(bit_count, 0);
  for (std::size_t i = 0; i < bit_count; ++i)
    bits[i] = (bytes[i / 8] >> (7 - i % 8)) & 1;
  return bits;
}

double max_distortion(unsigned error_bits, unsigned bits_per_element) {
  if (error_bits > bits_per_element)
    throw std::invalid_argument("max_distortion: more error bits than bits per element");
  return 1.0 - std::ldexp(1.0, -static_cast<int>(error_bits));
}

double expected_distortion(unsigned error_bits, unsigned bits_per_element) {
  if (error_bits > bits_per_element)
    throw std::invalid_argument("expected_distortion: more error bits than bits per element");
  if (error_bits == 0) return 0.0;
  const double full = 1.0 - std::ldexp(1.0, -static_cast<int>(bits_per_element));
  return static_cast<double>(error_bits) / static_cast<double>(bits_per_element) * full;
}

double distortion_bound_from_eps(double eps, unsigned bits_per_element) {
  if (!(eps >= 0.0) || !(eps <= 1.0))
    throw std::invalid_argument("distortion_bound_from_eps: eps must be in [0,1]");
  return eps * (1.0 - std::ldexp(1.0, -static_cast<int>(bits_per_element)));
}

}  // namespace semcom
