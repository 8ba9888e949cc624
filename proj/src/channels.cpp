#include "ued/channels.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

namespace ued {
namespace {

constexpr double kHalfSqrt2 = std::numbers::sqrt2 / 2.0;

double logaddexp(double a, double b) {
  const double m = std::max(a, b);
  return m + std::log1p(std::exp(-std::abs(a - b)));
}

}  // namespace

std::string to_string(ChannelKind kind) { return kind == ChannelKind::BiAwgn ? "biawgn" : "phase-noise"; }

ChannelKind parse_channel_kind(std::string_view name) {
  if (name == "biawgn" || name == "awgn") return ChannelKind::BiAwgn;
  if (name == "phase-noise" || name == "phase_noise" || name == "phasenoise") return ChannelKind::PhaseNoise;
  throw std::invalid_argument("unknown channel kind: " + std::string(name));
}

double snr_to_sigma(double ebn0_db, double rate_bpcu) {
  if (!(rate_bpcu > 0)) throw std::invalid_argument("snr_to_sigma: rate must be positive");
  return std::sqrt(1.0 / (2.0 * rate_bpcu * std::pow(10.0, ebn0_db / 10.0)));
}

double sigma_to_snr(double sigma, double rate_bpcu) {
  if (!(rate_bpcu > 0) || !(sigma > 0)) throw std::invalid_argument("sigma_to_snr: rate and sigma must be positive");
  return 10.0 * std::log10(1.0 / (2.0 * rate_bpcu * sigma * sigma));
}

std::complex<double> qpsk_point(int s) {
  return {(s & 2) ? -kHalfSqrt2 : kHalfSqrt2, (s & 1) ? -kHalfSqrt2 : kHalfSqrt2};
}

std::complex<double> pilot_symbol() { return {kHalfSqrt2, kHalfSqrt2}; }

VectorXcd qpsk_modulate(BitSpan bits) {
  if (bits.size() % 2) throw std::invalid_argument("qpsk_modulate: odd number of bits");
  VectorXcd x(static_cast<Eigen::Index>(bits.size() / 2));
  for (Eigen::Index i = 0; i < x.size(); ++i) x[i] = qpsk_point(2 * bits[2 * i] + bits[2 * i + 1]);
  return x;
}

double biawgn_loglik(double y, double x, double sigma) {
  const double d = y - x;
  return -d * d / (2.0 * sigma * sigma) - 0.5 * std::log(2.0 * std::numbers::pi * sigma * sigma);
}

VectorXd bit_llrs_from_table(const MatrixXd& table) {
  if (table.cols() == 2) return table.col(0) - table.col(1);
  if (table.cols() != 4) throw std::invalid_argument("bit_llrs_from_table: expects 2 or 4 columns");
  VectorXd llr(2 * table.rows());
  for (Eigen::Index i = 0; i < table.rows(); ++i) {
    const auto r = table.row(i);
    llr[2 * i] = logaddexp(r[0], r[1]) - logaddexp(r[2], r[3]);
    llr[2 * i + 1] = logaddexp(r[0], r[2]) - logaddexp(r[1], r[3]);
  }
  return llr;
}

ObservationBlock transmit_biawgn(BitSpan x_bits, double sigma, CounterRng& rng) {
  if (!(sigma > 0)) throw std::invalid_argument("transmit_biawgn: sigma must be positive");
  std::normal_distribution<double> noise(0.0, sigma);
  const auto n = static_cast<Eigen::Index>(x_bits.size());
  ObservationBlock obs;
  obs.payload_obs.resize(n);
  obs.symbol_logliks.resize(n, 2);
  obs.bit_llrs.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double y = bpsk(x_bits[i]) + noise(rng);
    obs.payload_obs[i] = {y, 0.0};
    obs.symbol_logliks(i, 0) = biawgn_loglik(y, 1.0, sigma);
    obs.symbol_logliks(i, 1) = biawgn_loglik(y, -1.0, sigma);
    obs.bit_llrs[i] = 2.0 * y / (sigma * sigma);
  }
  return obs;
}

double mismatched_loglik(std::complex<double> y, std::complex<double> x, double theta_hat, double sigma) {
  const double s2 = sigma * sigma;
  return -std::norm(y - std::polar(1.0, theta_hat) * x) / (2.0 * s2) - std::log(2.0 * std::numbers::pi * s2);
}

void fill_qpsk_logliks(ObservationBlock& obs, double theta_hat, double sigma) {
  const auto n = obs.payload_obs.size();
  obs.theta_hat = theta_hat;
  obs.symbol_logliks.resize(n, 4);
  for (Eigen::Index i = 0; i < n; ++i)
    for (int s = 0; s < 4; ++s) obs.symbol_logliks(i, s) = mismatched_loglik(obs.payload_obs[i], qpsk_point(s), theta_hat, sigma);
  obs.bit_llrs = bit_llrs_from_table(obs.symbol_logliks);
}

double estimate_phase_ml(const VectorXcd& pilot_obs, const VectorXcd& pilot_syms) {
  if (pilot_obs.size() == 0)
    throw std::invalid_argument("estimate_phase_ml: mismatched decoding needs at least one pilot");
  if (pilot_obs.size() != pilot_syms.size()) throw std::invalid_argument("estimate_phase_ml: length mismatch");
  return std::arg(pilot_syms.dot(pilot_obs));  // dot() conjugates its first argument
}

ObservationBlock transmit_phase_noise(BitSpan x_bits, double sigma, int n_pilots, CounterRng& rng,
                                      std::optional<double> theta_override) {
  if (!(sigma > 0)) throw std::invalid_argument("transmit_phase_noise: sigma must be positive");
  if (n_pilots < 1) throw std::invalid_argument("transmit_phase_noise: n_pilots must be at least 1");
  const VectorXcd x = qpsk_modulate(x_bits);
  std::normal_distribution<double> noise(0.0, sigma);
  ObservationBlock obs;
  obs.theta_true = theta_override ? *theta_override : 2.0 * std::numbers::pi * rng.uniform();
  const std::complex<double> rot = std::polar(1.0, obs.theta_true);
  obs.payload_obs.resize(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double re = noise(rng);
    const double im = noise(rng);
    obs.payload_obs[i] = rot * x[i] + std::complex<double>(re, im);
  }
  const VectorXcd pilots = VectorXcd::Constant(n_pilots, pilot_symbol());
  obs.pilot_obs.resize(n_pilots);
  for (int p = 0; p < n_pilots; ++p) {
    const double re = noise(rng);
    const double im = noise(rng);
    obs.pilot_obs[p] = rot * pilots[p] + std::complex<double>(re, im);
  }
  fill_qpsk_logliks(obs, estimate_phase_ml(obs.pilot_obs, pilots), sigma);
  return obs;
}

}  // namespace ued
