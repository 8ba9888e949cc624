#pragma once

#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "ued/bits.hpp"

namespace ued {

/// Inner polar code with natural-order Arikan transform x = u F^{(x)m}.
struct PolarCode {
  int n_c = 0;
  int h = 0;
  std::vector<int> frozen_set;         // sorted ascending
  std::vector<int> info_indices;       // sorted ascending, size h
  std::vector<int> reliability_order;  // most reliable synthetic channel first
  std::vector<std::uint8_t> frozen_mask;
  double design_snr_db = 0.0;

  double inner_rate() const { return static_cast<double>(h) / n_c; }
};

/// Mean LLR of every synthetic channel under the Gaussian-approximation
/// density evolution, starting from channel mean 2 / sigma^2.
std::vector<double> ga_mean_llrs(int n_c, double sigma);

/// Frozen set = complement of the h synthetic channels with the largest GA
/// mean LLR. The design point is a biAWGN at Eb/N0 = design_ebn0_db with
/// `info_rate` information bits per coded bit (k / n_c); when omitted the
/// inner rate h / n_c is used.
PolarCode design_ga(int n_c, int h, double design_ebn0_db, double info_rate = 0.0);

/// Builds a code from an explicit frozen set (reliability order then lists
/// information indices in descending index order followed by the frozen ones).
PolarCode polar_code_from_frozen(int n_c, std::vector<int> frozen, double design_snr_db = 0.0);

/// In-place Arikan butterfly (no bit reversal).
void polar_transform(std::span<std::uint8_t> u);

Bits polar_encode(BitSpan v, const PolarCode& code);

/// Sum over positions of the table entry for the transmitted symbol. The
/// table has one row per channel use and 2 (BPSK) or 4 (Gray QPSK) columns.
double codeword_loglik(BitSpan x_bits, const MatrixXd& symbol_logliks);

struct ListCandidate {
  Bits info;            // h bits on the information indices
  double loglik = 0.0;  // log P(y | x) up to a constant shared by the list
};

/// Survivors of SCL decoding ordered by decreasing log-likelihood.
struct DecoderList {
  std::vector<ListCandidate> candidates;
};

/// Successive-cancellation list decoder with exact LLR arithmetic and lazy
/// path copying. Owns its workspace; reuse one instance per thread.
class SclDecoder {
 public:
  SclDecoder(const PolarCode& code, int list_size);
  SclDecoder(const SclDecoder&) = delete;
  SclDecoder& operator=(const SclDecoder&) = delete;
  SclDecoder(SclDecoder&&) noexcept;
  SclDecoder& operator=(SclDecoder&&) noexcept;
  ~SclDecoder();

  DecoderList decode(const VectorXd& bit_llrs);

  int list_size() const;
  const PolarCode& code() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

DecoderList scl_decode(const VectorXd& bit_llrs, const PolarCode& code, int list_size);

void write_frozen_set(std::ostream& os, const PolarCode& code);
std::vector<int> read_frozen_set(std::istream& is);

}  // namespace ued
