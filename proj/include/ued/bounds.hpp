#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>

#include "ued/bits.hpp"
#include "ued/channels.hpp"
#include "ued/rng.hpp"

namespace ued {

// ---------------------------------------------------------------- exponents

/// Discrete memoryless channel. transition(x, y) = P(y | x).
struct DmcSpec {
  VectorXd input_probs;
  MatrixXd transition;

  void validate() const;  // throws std::invalid_argument
};

/// BPSK input, uniform output bins over [-span, span] (span = span_sigmas * sigma)
/// plus one tail bin on each side.
DmcSpec quantize_biawgn(double sigma, int levels = 2000, double span_sigmas = 8.0);

/// E0(s, rho) in bits. Requires 0 <= s <= rho <= 1, rho > 0.
double forney_e0(double s, double rho, const DmcSpec& dmc);

struct ForneyExponents {
  double e1 = 0.0;
  double e2 = 0.0;
  double s = 0.0;
  double rho = 0.0;
};

/// max over the triangle 0 <= s <= rho <= 1 of E0 - rho R - s T
/// (64 x 64 grid, then Nelder-Mead from the best grid point).
ForneyExponents forney_exponents(double rate, double T, const DmcSpec& dmc);

// ---------------------------------------------------------------- results

struct BoundParams {
  std::optional<int> delta;
  std::optional<double> s;
  std::optional<double> lambda;
  std::optional<double> T;
};

struct BoundResult {
  double eps_t = 0.0;
  double eps_u = 0.0;
  BoundParams params;
  double mc_std_err = 0.0;     // of eps_t
  double mc_std_err_u = 0.0;   // of eps_u
  std::int64_t samples = 0;
  bool low_precision = false;  // relative std err above 20%
};

BoundResult forney_bound(int n, double rate, double T, const DmcSpec& dmc);

// ---------------------------------------------------------------- saddlepoint

struct CgfTerms {
  double value = 0.0;  // gamma(zeta)
  double d1 = 0.0;
  double d2 = 0.0;
};

/// CGF of g(x) for x uniform over the entries of `g`.
CgfTerms cgf_terms(std::span<const double> g, double zeta);

/// Row i of `g` holds g_{y_i}(x) over the input alphabet. The tail is
/// P[sum_i g_{y_i}(xbar_i) > omega] with xbar uniform and i.i.d.
struct SaddlepointQuery {
  MatrixXd g;
  double omega = 0.0;
  double zeta_max = 50.0;
};

struct TailResult {
  double prob = 0.0;
  double log_prob = 0.0;  // natural log, finite unless prob == 0
  double zeta = 0.0;
  bool saturated = false;  // no root in [-zeta_max, zeta_max]
};

/// Sum over positions of the CGF terms, for the generic form of the approximation.
using CgfSum = std::function<CgfTerms(double)>;

TailResult saddlepoint_tail(const SaddlepointQuery& q);
TailResult saddlepoint_tail(const CgfSum& cgf, double omega, double zeta_max = 50.0);

/// log Q(t) + t^2 / 2, accurate for all t.
double log_q_scaled(double t);

// ---------------------------------------------------------------- pairwise terms

/// `g` is the n x |X| table of natural-log likelihoods log P(y_i | x),
/// `sent[i]` the column of the transmitted symbol.
TailResult pairwise_psi(const MatrixXd& g, std::span<const int> sent);

/// Uses omega = max{log P(y|x), log lambda_tilde}.
TailResult pairwise_psi_tilde(const MatrixXd& g, std::span<const int> sent, double s, double lambda);

/// iota_s(x, y) in bits.
double gen_info_density(const MatrixXd& g, std::span<const int> sent, double s);

// ---------------------------------------------------------------- channels for bounds

/// Random-coding ensemble with i.i.d. uniform symbols. For PhaseNoise each
/// sample also draws theta, the pilot field and theta_hat, and every
/// likelihood is the mismatched q(., ., theta_hat).
struct BoundChannel {
  ChannelKind kind = ChannelKind::BiAwgn;
  double sigma = 1.0;
  int n_pilots = 10;
  bool genie_phase = false;  // theta_hat = theta
};

BoundChannel mismatched_bound_adapter(double sigma, int n_pilots);

struct LikelihoodSample {
  MatrixXd g;
  std::vector<int> sent;
};

/// Draws x uniformly from X^n (n channel uses) and y through the channel.
LikelihoodSample draw_sample(const BoundChannel& ch, int n, CounterRng& rng);

struct McOptions {
  std::int64_t samples = 100000;
  std::int64_t max_samples = 0;  // > samples enables doubling until rel. std err < 10%
  std::uint64_t seed = 1;
  int workers = 1;
};

// ---------------------------------------------------------------- bounds

BoundResult rcu(int k, int n, const BoundChannel& ch, const McOptions& mc);
BoundResult thm1_bounds(int k, int n, int delta, const BoundChannel& ch, const McOptions& mc);
BoundResult thm2_bounds(int k, int n, double s, double lambda, const BoundChannel& ch, const McOptions& mc);

enum class BoundKind { Thm1, Thm2, Forney, Rcu };
std::string to_string(BoundKind kind);
BoundKind parse_bound_kind(std::string_view name);

struct Targets {
  double eps_t = 1e-3;
  double eps_u = 1e-5;
};

/// ceil(log2(eps_t / eps_u)).
int delta_for_targets(const Targets& t);

struct ThresholdSearch {
  double lo_db = -2.0;
  double hi_db = 10.0;
  double tol_db = 0.01;
  std::optional<double> fixed_s;  // Thm2 only: skip the s optimisation
  int forney_levels = 2000;
};

struct BoundThreshold {
  bool found = false;
  double ebn0_db = 0.0;
  BoundResult at_threshold;
  std::string diagnostics;
};

/// Rate in bits per channel use is k / n. For PhaseNoise n counts QPSK symbols.
BoundThreshold snr_threshold_bound(BoundKind which, int n, int k, const Targets& targets, const BoundChannel& family,
                                   const McOptions& mc, const ThresholdSearch& search = {});

/// Thm2 at one SNR: lambda chosen so eps_u meets targets.eps_u, s fixed or optimised.
BoundResult thm2_at_target(int k, int n, const Targets& targets, const BoundChannel& ch, const McOptions& mc,
                           std::optional<double> fixed_s = std::nullopt);

}  // namespace ued
