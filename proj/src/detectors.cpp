#include "ued/detectors.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace ued {
namespace {

std::uint64_t all_rows(const CrcSpec& crc) { return crc.delta == 0 ? 0 : (~std::uint64_t{0} >> (64 - crc.delta)); }

void require_matching(const PolarCode& code, const CrcSpec& crc) {
  if (code.h != crc.codeword_len())
    throw std::invalid_argument("inner code has h = " + std::to_string(code.h) + " but the CRC produces " +
                                std::to_string(crc.codeword_len()) + " bits");
}

}  // namespace

std::string to_string(Scheme s) {
  switch (s) {
    case Scheme::Reference: return "reference";
    case Scheme::AlgA: return "alg-a";
    case Scheme::AlgB: return "alg-b";
  }
  return "?";
}

Scheme parse_scheme(std::string_view name) {
  if (name == "reference" || name == "ref") return Scheme::Reference;
  if (name == "alg-a" || name == "alga" || name == "A") return Scheme::AlgA;
  if (name == "alg-b" || name == "algb" || name == "B") return Scheme::AlgB;
  throw std::invalid_argument("unknown scheme: " + std::string(name));
}

std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::Correct: return "correct";
    case Verdict::Erasure: return "erasure";
    case Verdict::Undetected: return "undetected";
  }
  return "?";
}

void DetectorConfig::validate(const CrcSpec& crc) const {
  if (list_size < 1) throw std::invalid_argument("list_size must be at least 1");
  if (scheme == Scheme::AlgA && (delta1 < 0 || delta1 > crc.delta))
    throw std::invalid_argument("delta1 must lie in [0, " + std::to_string(crc.delta) + "]");
  if (scheme == Scheme::AlgB && threshold_T && !(*threshold_T >= 0))
    throw std::invalid_argument("threshold_T must be non-negative or disabled");
}

DecodeOutcome classify(const std::optional<Bits>& accepted, BitSpan truth) {
  if (!accepted) return {Verdict::Erasure, std::nullopt};
  const bool same = accepted->size() == truth.size() && std::equal(accepted->begin(), accepted->end(), truth.begin());
  return {same ? Verdict::Correct : Verdict::Undetected, accepted};
}

Bits message_of(BitSpan info, const CrcSpec& crc) {
  return Bits(info.begin(), info.begin() + crc.message_len);
}

ScoredList score_list(const DecoderList& list, const PolarCode& code, const CrcSpec& crc, const MatrixXd& symbol_logliks) {
  require_matching(code, crc);
  ScoredList out;
  out.channel_uses = static_cast<int>(symbol_logliks.rows());
  out.entries.reserve(list.candidates.size());
  for (const auto& cand : list.candidates) {
    const double ll = codeword_loglik(polar_encode(cand.info, code), symbol_logliks);
    if (!std::isfinite(ll)) throw std::runtime_error("non-finite codeword likelihood");
    out.entries.push_back({cand.info, crc_syndrome(cand.info, crc), ll});
  }
  return out;
}

std::optional<std::size_t> best_in_list(const ScoredList& list, std::uint64_t rows) {
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < list.entries.size(); ++i) {
    const auto& e = list.entries[i];
    if (e.syndrome & rows) continue;
    if (!best || e.loglik > list.entries[*best].loglik) best = i;
  }
  return best;
}

ThresholdStatistic threshold_statistic(const ScoredList& list, const CrcSpec& crc) {
  ThresholdStatistic stat;
  const std::uint64_t rows = all_rows(crc);
  stat.best = best_in_list(list, rows);
  if (!stat.best) return stat;
  const double top = list.entries[*stat.best].loglik;
  double max_other = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < list.entries.size(); ++i) {
    if (list.entries[i].syndrome & rows) continue;
    ++stat.list_count;
    if (i != *stat.best) max_other = std::max(max_other, list.entries[i].loglik);
  }
  if (stat.list_count < 2) return stat;
  double sum = 0.0;
  for (std::size_t i = 0; i < list.entries.size(); ++i)
    if (!(list.entries[i].syndrome & rows) && i != *stat.best) sum += std::exp(list.entries[i].loglik - max_other);
  stat.log2_ratio = (top - (max_other + std::log(sum))) / std::numbers::ln2;
  return stat;
}

bool threshold_accepts(const ThresholdStatistic& stat, int channel_uses, Threshold T) {
  if (!stat.best) return false;
  if (stat.list_count == 1 || !T) return true;
  return stat.log2_ratio >= channel_uses * *T;
}

std::optional<Bits> decide_reference(const ScoredList& list, const CrcSpec& crc) {
  const auto best = best_in_list(list, all_rows(crc));
  if (!best) return std::nullopt;
  return message_of(list.entries[*best].info, crc);
}

std::optional<Bits> decide_alg_a(const ScoredList& list, const OuterSplit& split) {
  const auto best = best_in_list(list, split.prune_mask());
  if (!best || (list.entries[*best].syndrome & split.detect_mask())) return std::nullopt;
  return message_of(list.entries[*best].info, split.base);
}

std::optional<Bits> decide_alg_b(const ScoredList& list, const CrcSpec& crc, Threshold T) {
  const auto stat = threshold_statistic(list, crc);
  if (!threshold_accepts(stat, list.channel_uses, T)) return std::nullopt;
  return message_of(list.entries[*stat.best].info, crc);
}

namespace {

ScoredList decode_and_score(const ObservationBlock& obs, const PolarCode& code, const CrcSpec& crc, int L) {
  require_matching(code, crc);
  return score_list(scl_decode(obs.bit_llrs, code, L), code, crc, obs.symbol_logliks);
}

}  // namespace

DecodeOutcome decode_reference(const ObservationBlock& obs, const PolarCode& code, const CrcSpec& crc, int L,
                               BitSpan truth) {
  return classify(decide_reference(decode_and_score(obs, code, crc, L), crc), truth);
}

DecodeOutcome decode_alg_a(const ObservationBlock& obs, const PolarCode& code, const OuterSplit& split, int L,
                           BitSpan truth) {
  return classify(decide_alg_a(decode_and_score(obs, code, split.base, L), split), truth);
}

DecodeOutcome decode_alg_b(const ObservationBlock& obs, const PolarCode& code, const CrcSpec& crc, int L, Threshold T,
                           BitSpan truth) {
  if (T && !(*T >= 0)) throw std::invalid_argument("threshold must be non-negative or disabled");
  return classify(decide_alg_b(decode_and_score(obs, code, crc, L), crc, T), truth);
}

}  // namespace ued
