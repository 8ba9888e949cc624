#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ued/bits.hpp"
#include "ued/channels.hpp"
#include "ued/crc.hpp"
#include "ued/polar.hpp"

namespace ued {

enum class Scheme { Reference, AlgA, AlgB };

std::string to_string(Scheme s);
Scheme parse_scheme(std::string_view name);

/// Threshold of the list-based Forney test. An empty value is the Disabled
/// sentinel (T = -infinity), under which Algorithm B behaves like the
/// reference decoder.
using Threshold = std::optional<double>;
inline constexpr Threshold kThresholdDisabled = std::nullopt;

struct DetectorConfig {
  Scheme scheme = Scheme::Reference;
  int list_size = 8;
  int delta1 = 0;                 // Algorithm A: rows used to prune the list
  Threshold threshold_T = 0.0;    // Algorithm B

  void validate(const CrcSpec& crc) const;
};

enum class Verdict { Correct, Erasure, Undetected };

std::string to_string(Verdict v);

struct DecodeOutcome {
  Verdict verdict = Verdict::Erasure;
  std::optional<Bits> accepted_word;  // k message bits
};

DecodeOutcome classify(const std::optional<Bits>& accepted, BitSpan truth);

/// One SCL survivor re-scored against the observation.
struct ScoredCandidate {
  Bits info;               // h = k + delta bits
  std::uint64_t syndrome;  // CRC rows violated (bit j = row j)
  double loglik;           // exact log P(y | x), natural log
};

/// Decoder list with the quantities every scheme needs. Entries keep the
/// decoder order (decreasing path metric).
struct ScoredList {
  std::vector<ScoredCandidate> entries;
  int channel_uses = 0;
};

ScoredList score_list(const DecoderList& list, const PolarCode& code, const CrcSpec& crc, const MatrixXd& symbol_logliks);

/// Index of the most likely entry whose syndrome vanishes on `rows`; the
/// lowest index wins ties.
std::optional<std::size_t> best_in_list(const ScoredList& list, std::uint64_t rows);

/// Case analysis of the list-based Forney test over the CRC-expurgated list.
struct ThresholdStatistic {
  int list_count = 0;                // |L_O|
  std::optional<std::size_t> best;   // argmax over L_O
  double log2_ratio = 0.0;           // log2 Lambda^SCL, meaningful when list_count >= 2
};

ThresholdStatistic threshold_statistic(const ScoredList& list, const CrcSpec& crc);

/// Accept decision of Algorithm B for a given statistic.
bool threshold_accepts(const ThresholdStatistic& stat, int channel_uses, Threshold T);

std::optional<Bits> decide_reference(const ScoredList& list, const CrcSpec& crc);
std::optional<Bits> decide_alg_a(const ScoredList& list, const OuterSplit& split);
std::optional<Bits> decide_alg_b(const ScoredList& list, const CrcSpec& crc, Threshold T);

/// Full decoders: run SCL on the block, apply the scheme and classify the
/// result against the transmitted message.
DecodeOutcome decode_reference(const ObservationBlock& obs, const PolarCode& code, const CrcSpec& crc, int L,
                               BitSpan truth);
DecodeOutcome decode_alg_a(const ObservationBlock& obs, const PolarCode& code, const OuterSplit& split, int L,
                           BitSpan truth);
DecodeOutcome decode_alg_b(const ObservationBlock& obs, const PolarCode& code, const CrcSpec& crc, int L, Threshold T,
                           BitSpan truth);

/// Message bits carried by a systematic CRC codeword.
Bits message_of(BitSpan info, const CrcSpec& crc);

}  // namespace ued
