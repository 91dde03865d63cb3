#pragma once

#include <cstdint>
#include <vector>

#include "semcom/linalg.hpp"

namespace semcom {

// B-bit fixed-point encoding of features normalized to [0, 1]. Each
// element maps to a code j in 0..2^B-1 worth j*2^-B, laid out on the
// wire element-major and MSB-first, so the leading bits of each element
// are the ones whose errors cost the most.
struct QuantizedFeature {
  std::vector<std::uint8_t> bits;  // one 0/1 per entry, length = elements * bits_per_element
  unsigned bits_per_element = 0;
  std::size_t element_count = 0;
};

// Round to nearest code (ties up); values at or above 1 - 2^-(B+1)
// clamp to the top code 2^B - 1. Elements outside [0, 1] are rejected
// with their index.
QuantizedFeature quantize(const Vec& values, unsigned bits_per_element);

// value_i = sum_j bit_j * 2^-j over the element's B bits.
Vec dequantize(const QuantizedFeature& q);

// Byte packing for transcripts: bit 0 of the stream lands in the MSB
// of byte 0; the tail byte is zero-padded.
std::vector<std::uint8_t> pack_bits(const std::vector<std::uint8_t>& bits);
std::vector<std::uint8_t> unpack_bits(const std::vector<std::uint8_t>& bytes,
                                      std::size_t bit_count);

// Worst-case distortion of K bit errors in one element: the K most
// significant bits flip, sum_{k=1..K} 2^-k = 1 - 2^-K.
double max_distortion(unsigned error_bits, unsigned bits_per_element);

// Mean distortion over all uniformly placed K-bit error patterns:
// (K/B) * (1 - 2^-B).
double expected_distortion(unsigned error_bits, unsigned bits_per_element);

// Per-element distortion bound at bit-flip probability eps:
// eps * (1 - 2^-B).
double distortion_bound_from_eps(double eps, unsigned bits_per_element);

}  // namespace semcom
