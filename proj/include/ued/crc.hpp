#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "ued/bits.hpp"

namespace ued {

/// Systematic CRC outer code: zero-initialised register, no reflection, no
/// final XOR. `polynomial` holds all delta+1 coefficients, leading one first.
struct CrcSpec {
  Bits polynomial{1};
  int delta = 0;
  int message_len = 0;

  CrcSpec() = default;
  CrcSpec(Bits poly, int message_len);

  /// Parses "0x89" style literals (full polynomial, x^delta term included).
  /// "none" or "0x1" give the degenerate delta = 0 code.
  static CrcSpec from_hex(std::string_view hex, int message_len);
  std::string to_hex() const;

  int codeword_len() const { return message_len + delta; }
};

/// Partition of the delta parity-check rows into pruning rows [0, delta1)
/// and detection rows [delta1, delta).
struct OuterSplit {
  CrcSpec base;
  int delta1 = 0;
  int delta2 = 0;

  std::uint64_t prune_mask() const;
  std::uint64_t detect_mask() const;
};

Bits crc_encode(BitSpan msg, const CrcSpec& spec);

/// Bit j is set iff parity row j is violated. Row j ties the message to the
/// j-th appended parity bit (coefficient of x^(delta-1-j)).
std::uint64_t crc_syndrome(BitSpan word, const CrcSpec& spec);

bool crc_check(BitSpan word, const CrcSpec& spec);

OuterSplit split_outer(const CrcSpec& spec, int delta1);

bool check_prune(BitSpan word, const OuterSplit& split);
bool check_detect(BitSpan word, const OuterSplit& split);

}  // namespace ued
