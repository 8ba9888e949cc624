#pragma once

#include <complex>
#include <optional>
#include <string>

#include "ued/bits.hpp"
#include "ued/rng.hpp"

namespace ued {

enum class ChannelKind { BiAwgn, PhaseNoise };

std::string to_string(ChannelKind kind);
ChannelKind parse_channel_kind(std::string_view name);

struct ChannelConfig {
  ChannelKind kind = ChannelKind::BiAwgn;
  double sigma = 1.0;   // per real dimension
  int n_pilots = 0;     // phase-noise only
  double rate_bpcu = 0.5;

  /// Coded bits carried by one channel use.
  int bits_per_symbol() const { return kind == ChannelKind::BiAwgn ? 1 : 2; }
};

/// One block as seen by the receiver. For the phase-noise channel the
/// log-likelihood table uses the mismatched law evaluated at theta_hat.
struct ObservationBlock {
  VectorXcd payload_obs;     // real-valued for biAWGN (imaginary part zero)
  VectorXcd pilot_obs;
  double theta_true = 0.0;
  double theta_hat = 0.0;
  MatrixXd symbol_logliks;   // n x |X|, natural log
  VectorXd bit_llrs;         // n_c entries, log P(b=0)/P(b=1)
};

/// sigma = sqrt(1 / (2 R 10^(EbN0/10))); throws for R <= 0.
double snr_to_sigma(double ebn0_db, double rate_bpcu);
double sigma_to_snr(double sigma, double rate_bpcu);

/// BPSK point for bit b: 0 -> +1, 1 -> -1.
inline double bpsk(std::uint8_t b) { return b ? -1.0 : 1.0; }

/// Gray-mapped QPSK. Symbol index s = 2*b0 + b1, b0 on the in-phase axis.
std::complex<double> qpsk_point(int symbol_index);
VectorXcd qpsk_modulate(BitSpan bits);
/// Fixed pilot symbol, (1 + j) / sqrt(2).
std::complex<double> pilot_symbol();

/// Natural-log Gaussian density log N(y; x, sigma^2).
double biawgn_loglik(double y, double x, double sigma);

ObservationBlock transmit_biawgn(BitSpan x_bits, double sigma, CounterRng& rng);

/// theta is drawn uniformly from [0, 2pi) unless `theta_override` is set.
ObservationBlock transmit_phase_noise(BitSpan x_bits, double sigma, int n_pilots, CounterRng& rng,
                                      std::optional<double> theta_override = std::nullopt);

/// arg(sum_p pilot_obs_p * conj(pilot_syms_p)); needs at least one pilot.
double estimate_phase_ml(const VectorXcd& pilot_obs, const VectorXcd& pilot_syms);

/// log q(y, x, theta_hat) with q = exp(-|y - e^{j theta_hat} x|^2 / (2 sigma^2)) / (2 pi sigma^2).
double mismatched_loglik(std::complex<double> y, std::complex<double> x, double theta_hat, double sigma);

/// Fills symbol_logliks (n x 4) from payload_obs and bit_llrs by exact
/// marginalisation over the Gray labels.
void fill_qpsk_logliks(ObservationBlock& obs, double theta_hat, double sigma);

/// Bit LLRs obtained from a symbol log-likelihood table (|X| = 2 or 4).
VectorXd bit_llrs_from_table(const MatrixXd& table);

}  // namespace ued
