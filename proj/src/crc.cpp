#include "ued/crc.hpp"

#include <cctype>
#include <stdexcept>

namespace ued {
namespace {

void require_len(BitSpan word, std::size_t expected, const char* what) {
  if (word.size() != expected)
    throw std::invalid_argument(std::string(what) + ": expected " + std::to_string(expected) +
                                " bits, got " + std::to_string(word.size()));
}

// Low delta coefficients of the generator, x^(delta-1) in the top bit.
std::uint64_t low_coefficients(const CrcSpec& spec) {
  std::uint64_t low = 0;
  for (int i = 1; i <= spec.delta; ++i) low = (low << 1) | spec.polynomial[i];
  return low;
}

}  // namespace

CrcSpec::CrcSpec(Bits poly, int message_len_) : polynomial(std::move(poly)), message_len(message_len_) {
  if (polynomial.empty() || polynomial.front() != 1)
    throw std::invalid_argument("CRC polynomial must have a leading one");
  if (polynomial.size() > 64) throw std::invalid_argument("CRC degree above 63 is not supported");
  if (message_len < 0) throw std::invalid_argument("negative CRC message length");
  delta = static_cast<int>(polynomial.size()) - 1;
}

CrcSpec CrcSpec::from_hex(std::string_view hex, int message_len) {
  std::string s;
  for (char c : hex)
    if (!std::isspace(static_cast<unsigned char>(c))) s.push_back(static_cast<char>(std::tolower(c)));
  if (s == "none" || s.empty()) return CrcSpec(Bits{1}, message_len);
  if (s.rfind("0x", 0) == 0) s = s.substr(2);
  if (s.empty() || s.size() > 16) throw std::invalid_argument("bad CRC polynomial literal");
  std::uint64_t value = 0;
  for (char c : s) {
    int d;
    if (c >= '0' && c <= '9')
      d = c - '0';
    else if (c >= 'a' && c <= 'f')
      d = c - 'a' + 10;
    else
      throw std::invalid_argument("bad hex digit in CRC polynomial");
    value = (value << 4) | static_cast<std::uint64_t>(d);
  }
  if (value == 0) throw std::invalid_argument("CRC polynomial must be nonzero");
  int degree = 63;
  while (!((value >> degree) & 1)) --degree;
  Bits poly(degree + 1);
  for (int i = 0; i <= degree; ++i) poly[i] = (value >> (degree - i)) & 1;
  return CrcSpec(std::move(poly), message_len);
}

std::string CrcSpec::to_hex() const {
  std::uint64_t value = 0;
  for (auto b : polynomial) value = (value << 1) | b;
  static const char* digits = "0123456789ABCDEF";
  std::string out;
  do {
    out.insert(out.begin(), digits[value & 0xF]);
    value >>= 4;
  } while (value);
  return "0x" + out;
}

std::uint64_t OuterSplit::prune_mask() const { return delta1 == 0 ? 0 : (~std::uint64_t{0} >> (64 - delta1)); }

std::uint64_t OuterSplit::detect_mask() const {
  std::uint64_t all = base.delta == 0 ? 0 : (~std::uint64_t{0} >> (64 - base.delta));
  return all & ~prune_mask();
}

Bits crc_encode(BitSpan msg, const CrcSpec& spec) {
  require_len(msg, static_cast<std::size_t>(spec.message_len), "crc_encode");
  Bits out(msg.begin(), msg.end());
  if (spec.delta == 0) return out;
  const std::uint64_t low = low_coefficients(spec);
  const int d = spec.delta;
  const std::uint64_t mask = d == 64 ? ~std::uint64_t{0} : ((std::uint64_t{1} << d) - 1);
  std::uint64_t reg = 0;
  for (auto b : msg) {
    const std::uint64_t top = (reg >> (d - 1)) & 1;
    reg = (reg << 1) & mask;
    if (top ^ b) reg ^= low;
  }
  for (int j = 0; j < d; ++j) out.push_back(static_cast<std::uint8_t>((reg >> (d - 1 - j)) & 1));
  return out;
}

std::uint64_t crc_syndrome(BitSpan word, const CrcSpec& spec) {
  require_len(word, static_cast<std::size_t>(spec.codeword_len()), "crc_syndrome");
  const int d = spec.delta;
  if (d == 0) return 0;
  const std::uint64_t low = low_coefficients(spec);
  const std::uint64_t mask = (std::uint64_t{1} << d) - 1;
  // Remainder of word(x) mod g(x); for a codeword m(x)x^d + r(x) it vanishes.
  std::uint64_t reg = 0;
  for (auto b : word) {
    const std::uint64_t top = (reg >> (d - 1)) & 1;
    reg = ((reg << 1) | b) & mask;
    if (top) reg ^= low;
  }
  std::uint64_t syndrome = 0;
  for (int j = 0; j < d; ++j) syndrome |= ((reg >> (d - 1 - j)) & 1) << j;
  return syndrome;
}

bool crc_check(BitSpan word, const CrcSpec& spec) { return crc_syndrome(word, spec) == 0; }

OuterSplit split_outer(const CrcSpec& spec, int delta1) {
  if (delta1 < 0 || delta1 > spec.delta)
    throw std::invalid_argument("split_outer: delta1 must lie in [0, " + std::to_string(spec.delta) + "]");
  return OuterSplit{spec, delta1, spec.delta - delta1};
}

bool check_prune(BitSpan word, const OuterSplit& split) {
  return (crc_syndrome(word, split.base) & split.prune_mask()) == 0;
}

bool check_detect(BitSpan word, const OuterSplit& split) {
  return (crc_syndrome(word, split.base) & split.detect_mask()) == 0;
}

}  // namespace ued
