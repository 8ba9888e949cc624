// Acceptance run: one PASS/FAIL line per criterion.
//   acceptance --tier fast          criteria 1-4, 10
//   acceptance --tier heavy         criteria 5-9 (hours)
//   acceptance --criteria 6,7       any subset

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "oracles.hpp"
#include "ued/bounds.hpp"
#include "ued/crc.hpp"
#include "ued/detectors.hpp"
#include "ued/harness.hpp"
#include "ued/polar.hpp"

using namespace ued;

namespace {

struct Budget {
  std::uint64_t seed = 2024;
  int workers = 1;
  std::int64_t trials_per_point = 1'000'000;
  std::int64_t bound_samples = 20000;
  std::int64_t bound_samples_264 = 10000;
  int list_size_mismatch = 8;
};

struct Outcome {
  bool pass = false;
  std::string summary;
  std::vector<std::string> details;
};

std::string num(double v, int prec = 4) {
  std::ostringstream os;
  os.precision(prec);
  os << v;
  return os.str();
}

Bits random_bits(int n, std::mt19937_64& gen) {
  Bits b(static_cast<std::size_t>(n));
  for (auto& x : b) x = static_cast<std::uint8_t>(gen() & 1u);
  return b;
}

// ---------------------------------------------------------------- 1

Outcome criterion1(const Budget& b) {
  const int n = 16, h = 8;
  const auto code = design_ga(n, h, 2.0);
  const CrcSpec none = CrcSpec::from_hex("none", h);
  const double sigma = snr_to_sigma(2.0, 0.5);
  SclDecoder dec(code, 1 << h);

  // codebook built by the explicit generator matrix
  std::vector<Bits> book;
  for (std::uint64_t v = 0; v < (1u << h); ++v) {
    const Bits info = oracle::info_from_index(v, h);
    Bits u(n, 0);
    for (int j = 0; j < h; ++j) u[code.info_indices[j]] = info[j];
    book.push_back(oracle::kronecker_encode(u));
  }

  const std::vector<double> Ts{0.0, 0.05, 0.1};
  int ml_mismatch = 0, forney_mismatch = 0, accepted = 0;
  const int trials = 10000;
  for (int t = 0; t < trials; ++t) {
    CounterRng rng(b.seed, static_cast<std::uint64_t>(t));
    const Bits msg = oracle::info_from_index(rng() & 0xFF, h);
    const auto obs = transmit_biawgn(polar_encode(msg, code), sigma, rng);

    std::vector<long double> ll(book.size());
    for (std::size_t c = 0; c < book.size(); ++c) {
      long double s = 0;
      for (int i = 0; i < n; ++i) {
        const long double d = obs.payload_obs[i].real() - (book[c][i] ? -1.0L : 1.0L);
        s -= d * d / (2.0L * sigma * sigma);
      }
      ll[c] = s;
    }
    const std::size_t best = std::max_element(ll.begin(), ll.end()) - ll.begin();
    long double others = 0;
    for (std::size_t c = 0; c < ll.size(); ++c)
      if (c != best) others += std::exp(ll[c] - ll[best]);
    const double log2_lambda = static_cast<double>(-std::log2(others));
    const Bits ml = oracle::info_from_index(best, h);

    const auto list = score_list(dec.decode(obs.bit_llrs), code, none, obs.symbol_logliks);
    const auto ref = decide_alg_b(list, none, kThresholdDisabled);
    if (!ref || *ref != ml) ++ml_mismatch;
    for (double T : Ts) {
      const auto got = decide_alg_b(list, none, T);
      const bool want = log2_lambda >= n * T;
      if (got.has_value() != want || (got && *got != ml)) ++forney_mismatch;
      accepted += want;
    }
  }
  Outcome o;
  o.pass = ml_mismatch == 0 && forney_mismatch == 0;
  o.summary = "SCL(L=256) vs ML: " + std::to_string(ml_mismatch) + " mismatches; AlgB vs Forney test (T=0,0.05,0.1): " +
              std::to_string(forney_mismatch) + " mismatches over " + std::to_string(trials) + " trials";
  o.details.push_back("Forney acceptances across the three T values: " + std::to_string(accepted));
  return o;
}

// ---------------------------------------------------------------- 2

Outcome criterion2(const Budget& b) {
  const int n = 16;
  const double db = 2.0, s = 1.0, lambda = 0.3;
  BoundChannel ch;
  ch.sigma = snr_to_sigma(db, 0.5);
  std::vector<double> err_psi, err_tilde, err_psi_all;
  auto rel = [](double approx, double exact) {
    if (exact == 0.0) return approx == 0.0 ? 0.0 : INFINITY;
    return std::abs(approx / exact - 1.0);
  };
  for (int t = 0; t < 100; ++t) {
    CounterRng rng(b.seed + 2, static_cast<std::uint64_t>(t));
    const auto smp = draw_sample(ch, n, rng);
    MatrixXd d = smp.g;
    double iota = 0.0;
    for (int i = 0; i < n; ++i) {
      const double sent = smp.g(i, smp.sent[i]);
      d.row(i).array() -= sent;
      iota += s * sent - std::log(0.5 * (std::exp(s * smp.g(i, 0)) + std::exp(s * smp.g(i, 1))));
    }
    iota /= std::log(2.0);
    const double omega_t = std::max(0.0, (n * lambda - iota) * std::log(2.0) / s);
    // competitors only: drop the xbar = x sequence, whose sum is exactly 0
    const double self = std::ldexp(1.0, -n);
    const double psi = pairwise_psi(smp.g, smp.sent).prob;
    const double exact = oracle::exhaustive_tail(d, 0.0);
    err_psi.push_back(rel(psi, exact - self));
    err_psi_all.push_back(rel(psi, exact));
    err_tilde.push_back(rel(pairwise_psi_tilde(smp.g, smp.sent, s, lambda).prob,
                            oracle::exhaustive_tail(d, omega_t) - (omega_t <= 0.0 ? self : 0.0)));
  }
  auto stats = [](std::vector<double> e) {
    std::sort(e.begin(), e.end());
    const auto within = std::count_if(e.begin(), e.end(), [](double x) { return x <= 0.1; });
    return std::tuple{e[e.size() / 2], e.back(), static_cast<int>(within)};
  };
  const auto [med_p, max_p, in_p] = stats(err_psi);
  const auto [med_t, max_t, in_t] = stats(err_tilde);
  Outcome o;
  o.pass = max_p <= 0.1 && max_t <= 0.1;
  o.summary = "n=16 biAWGN " + num(db) + " dB, 100 samples: psi within 10% for " + std::to_string(in_p) +
              "/100 (max rel err " + num(max_p, 3) + "), psi~ (s=1, lambda=0.3) within 10% for " + std::to_string(in_t) +
              "/100 (max " + num(max_t, 3) + ")";
  const auto [med_a, max_a, in_a] = stats(err_psi_all);
  o.details.push_back("median rel err: psi " + num(med_p, 3) + ", psi~ " + num(med_t, 3));
  o.details.push_back("counting xbar = x as well: psi within 10% for " + std::to_string(in_a) + "/100, median " +
                      num(med_a, 3) + ", max " + num(max_a, 3));
  return o;
}

// ---------------------------------------------------------------- 3

Outcome criterion3(const Budget& b) {
  const int k = 32, n = 64;
  BoundChannel ch;
  ch.sigma = snr_to_sigma(3.0, 0.5);
  McOptions mc;
  mc.samples = b.bound_samples;
  mc.seed = b.seed + 3;
  mc.workers = b.workers;
  const auto r = rcu(k, n, ch, mc);
  const auto t1 = thm1_bounds(k, n, 0, ch, mc);
  const auto t2 = thm2_bounds(k, n, 1.0, -1e6, ch, mc);
  const double se = r.mc_std_err;
  const double d1 = std::abs(t1.eps_t - r.eps_t), d1u = std::abs(t1.eps_u - r.eps_t);
  const double d2 = std::abs(t2.eps_t - r.eps_t), d2u = std::abs(t2.eps_u - r.eps_t);
  double worst_ratio = 0.0;
  for (int delta = 1; delta <= 10; ++delta) {
    const auto t = thm1_bounds(k, n, delta, ch, mc);
    worst_ratio = std::max(worst_ratio, std::abs(t.eps_u / t.eps_t - std::ldexp(1.0, -delta)));
  }
  Outcome o;
  o.pass = d1 <= 2 * se && d1u <= 2 * se && d2 <= 2 * se && d2u <= 2 * se && worst_ratio <= 1e-15;
  o.summary = "RCU " + num(r.eps_t) + " (se " + num(se, 2) + "); |Thm1(D=0)-RCU| " + num(d1, 2) + "; |Thm2(l=-1e6)-RCU| " +
              num(std::max(d2, d2u), 2) + "; max |eU/eT - 2^-D| " + num(worst_ratio, 2);
  return o;
}

// ---------------------------------------------------------------- 4

Outcome criterion4(const Budget&) {
  const auto dmc = quantize_biawgn(snr_to_sigma(2.0, 0.5));
  bool equal = true, zero = true, monotone = true;
  double worst_e0 = 0.0;
  for (double rho : {0.05, 0.25, 0.5, 0.75, 1.0}) {
    const double e0 = forney_e0(0.0, rho, dmc);
    worst_e0 = std::max(worst_e0, std::abs(e0));
    zero = zero && std::abs(e0) <= 1e-12;
  }
  for (double T : {0.0, 0.05}) {
    double prev = INFINITY;
    for (double R = 0.05; R <= 0.95; R += 0.05) {
      const auto e = forney_exponents(R, T, dmc);
      if (T == 0.0) equal = equal && e.e1 == e.e2;
      monotone = monotone && e.e1 <= prev;
      prev = e.e1;
    }
  }
  Outcome o;
  o.pass = equal && zero && monotone;
  o.summary = std::string("E1(R,0)==E2(R,0): ") + (equal ? "yes" : "no") + "; max |E0(0,rho)| " + num(worst_e0, 2) +
              "; E1 non-increasing in R: " + (monotone ? "yes" : "no");
  return o;
}

// ---------------------------------------------------------------- 10

Outcome criterion10(const Budget& b) {
  std::mt19937_64 gen(b.seed + 10);
  std::vector<std::string> failed;
  auto check = [&](bool ok, const char* name) {
    if (!ok) failed.push_back(name);
  };

  {  // CRC
    const auto crc = CrcSpec::from_hex("0x89", 64);
    bool round = true, linear = true, split = true;
    for (int t = 0; t < 2000; ++t) {
      const Bits a = random_bits(64, gen), c = random_bits(64, gen);
      const Bits wa = crc_encode(a, crc);
      round = round && crc_check(wa, crc) && message_of(wa, crc) == a;
      linear = linear && crc_encode(xor_bits(a, c), crc) == xor_bits(wa, crc_encode(c, crc));
      const Bits w = random_bits(71, gen);
      for (int d1 = 0; d1 <= crc.delta; ++d1) {
        const auto sp = split_outer(crc, d1);
        split = split && ((check_prune(w, sp) && check_detect(w, sp)) == crc_check(w, crc));
      }
    }
    check(round, "crc round trip");
    check(linear, "crc linearity");
    check(split, "crc split equivalence");
  }
  {  // polar linearity
    const auto code = design_ga(128, 71, 2.0);
    bool linear = true;
    for (int t = 0; t < 2000; ++t) {
      const Bits a = random_bits(71, gen), c = random_bits(71, gen);
      linear = linear && polar_encode(xor_bits(a, c), code) == xor_bits(polar_encode(a, code), polar_encode(c, code));
    }
    check(linear, "polar linearity");
  }
  {  // L-monotonicity of the reference scheme
    SimJob j;
    j.code = {64, 32, "0x43", 4.0, ""};
    j.detector.scheme = Scheme::Reference;
    j.ebn0_db = 2.0;
    j.stop = {0, 0, 20000};
    j.seed = b.seed + 11;
    j.workers = b.workers;
    std::vector<SimResult> fer;
    for (int L : {1, 2, 4, 8, 16}) {
      j.detector.list_size = L;
      fer.push_back(run_montecarlo(j));
    }
    bool mono = true;
    for (std::size_t i = 1; i < fer.size(); ++i) {
      const double se = std::sqrt(fer[i - 1].tep * (1 - fer[i - 1].tep) / fer[i - 1].trials);
      mono = mono && fer[i].tep <= fer[i - 1].tep + 2 * se;
    }
    check(mono, "polar L-monotonicity");
  }
  {  // UEP <= TEP, shard merge, T-monotone acceptance sets
    SimJob j;
    j.code = {64, 32, "0x43", 4.0, ""};
    j.detector.list_size = 8;
    j.detector.delta1 = 3;
    j.detector.threshold_T = 0.03;
    j.ebn0_db = 1.0;
    j.stop = {0, 0, 6000};
    j.seed = b.seed + 12;
    bool uep = true, shard = true;
    for (Scheme s : {Scheme::Reference, Scheme::AlgA, Scheme::AlgB}) {
      j.detector.scheme = s;
      j.shard_count = 1;
      j.shard_index = 0;
      const auto whole = run_montecarlo(j);
      uep = uep && whole.undetected_errors <= whole.total_errors;
      std::vector<SimResult> parts;
      j.shard_count = 4;
      for (int i = 0; i < 4; ++i) {
        j.shard_index = i;
        parts.push_back(run_montecarlo(j));
      }
      const auto m = merge_shards(parts);
      shard = shard && m.trials == whole.trials && m.total_errors == whole.total_errors &&
              m.undetected_errors == whole.undetected_errors;
    }
    check(uep, "UEP <= TEP");
    check(shard, "shard-merge determinism");

    const auto ctx = make_context(j.code, ChannelKind::BiAwgn, 0);
    SclDecoder dec(ctx.code, 8);
    bool mono = true;
    const std::vector<double> grid{0.0, 0.01, 0.03, 0.1, 0.3};
    for (int t = 0; t < 3000; ++t) {
      const auto trial = run_trial(ctx, dec, ctx.sigma(1.0), b.seed + 13, t);
      for (std::size_t g = 1; g < grid.size(); ++g)
        if (decide_alg_b(trial.list, ctx.crc, grid[g])) mono = mono && decide_alg_b(trial.list, ctx.crc, grid[g - 1]);
      if (decide_alg_b(trial.list, ctx.crc, grid[0]))
        mono = mono && decide_alg_b(trial.list, ctx.crc, kThresholdDisabled);
    }
    check(mono, "T-monotone acceptance sets");
  }
  {  // CGF convexity and derivatives
    std::normal_distribution<double> nd(0.0, 2.0);
    bool convex = true, fd = true;
    for (int t = 0; t < 500; ++t) {
      std::vector<double> g(4);
      for (auto& x : g) x = nd(gen);
      for (double z : {-3.0, -0.7, 0.0, 0.4, 2.5}) {
        const double h = 1e-5;
        const auto c = cgf_terms(g, z), p = cgf_terms(g, z + h), m = cgf_terms(g, z - h);
        convex = convex && c.d2 >= -1e-12;
        fd = fd && std::abs((p.value - m.value) / (2 * h) - c.d1) <= 1e-5 * (1 + std::abs(c.d1)) &&
             std::abs((p.d1 - m.d1) / (2 * h) - c.d2) <= 1e-5 * (1 + std::abs(c.d2));
      }
    }
    check(convex, "CGF convexity");
    check(fd, "CGF finite differences");
  }
  Outcome o;
  o.pass = failed.empty();
  if (failed.empty()) {
    o.summary = "CRC, polar, UEP<=TEP, T-monotonicity, shard merge and CGF properties hold";
  } else {
    o.summary = "failing properties:";
    for (const auto& f : failed) o.summary += " [" + f + "]";
  }
  return o;
}

// ---------------------------------------------------------------- 5

Outcome criterion5(const Budget& b) {
  Outcome o;
  bool ok = true;
  const Targets tg;
  ThresholdSearch search;
  search.lo_db = 0.5;
  search.hi_db = 8.0;
  for (auto [n, k, want, tol] : {std::tuple{64, 32, 1.1, 0.2}, std::tuple{264, 132, 0.3, 0.15}}) {
    McOptions mc;
    mc.samples = n > 100 ? b.bound_samples_264 : b.bound_samples;
    mc.seed = b.seed + 5;
    mc.workers = b.workers;
    const BoundChannel ch;
    const auto t1 = snr_threshold_bound(BoundKind::Thm1, n, k, tg, ch, mc, search);
    const auto t2 = snr_threshold_bound(BoundKind::Thm2, n, k, tg, ch, mc, search);
    const auto lit = snr_threshold_bound(BoundKind::Rcu, n, k + delta_for_targets(tg), {tg.eps_u, tg.eps_u}, ch, mc, search);
    const double gap = t1.ebn0_db - t2.ebn0_db;
    const bool pass = t1.found && t2.found && std::abs(gap - want) <= tol;
    ok = ok && pass;
    o.summary += "n=" + std::to_string(n) + ": Thm1 " + num(t1.ebn0_db) + " dB, Thm2 " + num(t2.ebn0_db) + " dB, gap " +
                 num(gap, 3) + " (want " + num(want) + "+-" + num(tol) + "); ";
    o.details.push_back("n=" + std::to_string(n) + " samples " + std::to_string(mc.samples) + "; Thm2 at threshold s=" +
                        num(t2.at_threshold.params.s.value_or(NAN)) + " lambda=" +
                        num(t2.at_threshold.params.lambda.value_or(NAN)) + "; Thm1 with RCU(k+Delta) <= eps_U*: " +
                        num(lit.ebn0_db) + " dB (gap " + num(lit.ebn0_db - t2.ebn0_db, 3) + ")");
  }
  o.pass = ok;
  return o;
}

// ---------------------------------------------------------------- 6, 7, 9

ThresholdSimOptions sim_opts(const Budget& b, double lo, double hi) {
  ThresholdSimOptions o;
  o.lo_db = lo;
  o.hi_db = hi;
  o.tol_db = 0.05;
  o.max_trials = b.trials_per_point;
  o.min_trials = 20000;
  o.seed = b.seed;
  o.workers = b.workers;
  return o;
}

std::string describe(const ThresholdSimResult& r) {
  std::string s = to_string(r.scheme) + " " + (r.found ? num(r.ebn0_db) + " dB" : "not found") + " [";
  const auto& p = r.at_threshold.params;
  if (p.scheme == Scheme::AlgA) s += "delta1=" + std::to_string(p.delta1) + " ";
  if (p.scheme == Scheme::AlgB && p.threshold_T) s += "T=" + num(*p.threshold_T, 3) + " ";
  s += "trials=" + std::to_string(r.at_threshold.result.trials) + " tep_hi=" + num(r.at_threshold.result.tep_ci.hi, 3) +
       " uep_hi=" + num(r.at_threshold.result.uep_ci.hi, 3) + "]";
  if (!r.diagnostics.empty()) s += " " + r.diagnostics;
  return s;
}

Outcome criterion6(const Budget& b) {
  const CodeSpec code{128, 64, "0x89", 3.5, ""};
  ThresholdCampaign camp(make_context(code, ChannelKind::BiAwgn, 0), 32, {}, sim_opts(b, 2.5, 4.5),
                         {Scheme::AlgA, Scheme::AlgB});
  const auto a = camp.threshold(Scheme::AlgA);
  const auto bb = camp.threshold(Scheme::AlgB);
  Outcome o;
  o.pass = a.found && bb.found && std::abs(bb.ebn0_db - 3.52) <= 0.15 && std::abs(a.ebn0_db - 3.55) <= 0.15;
  o.summary = "(128,64) L=32: AlgB " + num(bb.ebn0_db) + " dB (want 3.52+-0.15), AlgA " + num(a.ebn0_db) +
              " dB (want 3.55+-0.15)";
  o.details = {describe(a), describe(bb), "trials per SNR point <= " + std::to_string(b.trials_per_point)};
  return o;
}

Outcome criterion7(const Budget& b) {
  const CodeSpec code{64, 32, "0x43", 4.5, ""};
  Outcome o;
  bool ok = true;
  for (auto [L, want] : {std::pair{8, 0.5}, std::pair{32, 0.7}}) {
    ThresholdCampaign camp(make_context(code, ChannelKind::BiAwgn, 0), L, {}, sim_opts(b, 3.0, 7.0),
                           {Scheme::AlgA, Scheme::AlgB});
    const auto a = camp.threshold(Scheme::AlgA);
    const auto bb = camp.threshold(Scheme::AlgB);
    const double gain = a.ebn0_db - bb.ebn0_db;
    ok = ok && a.found && bb.found && std::abs(gain - want) <= 0.15;
    o.summary += "L=" + std::to_string(L) + ": gain " + num(gain, 3) + " dB (want " + num(want) + "+-0.15); ";
    o.details.push_back("L=" + std::to_string(L) + " " + describe(a));
    o.details.push_back("L=" + std::to_string(L) + " " + describe(bb));
  }
  o.pass = ok;
  return o;
}

Outcome criterion9(const Budget& b) {
  Outcome o;
  bool ok = true;
  const int L = b.list_size_mismatch;
  for (auto [n, k, crc] : {std::tuple{64, 32, "0x43"}, std::tuple{128, 64, "0x89"}, std::tuple{256, 128, "0x1D5"}}) {
    const CodeSpec code{n, k, crc, 3.0, ""};
    ThresholdCampaign camp(make_context(code, ChannelKind::PhaseNoise, 10), L, {}, sim_opts(b, 2.0, 12.0));
    const auto r = camp.threshold(Scheme::Reference);
    const auto a = camp.threshold(Scheme::AlgA);
    const auto bb = camp.threshold(Scheme::AlgB);
    const bool all = r.found && a.found && bb.found;
    const bool b_beats_ref = bb.ebn0_db < r.ebn0_db;
    bool pass = all && (n == 64 ? b_beats_ref : !b_beats_ref);
    if (n >= 128) pass = pass && a.ebn0_db < bb.ebn0_db;
    ok = ok && pass;
    o.summary += "n=" + std::to_string(n) + ": ref " + num(r.ebn0_db) + ", A " + num(a.ebn0_db) + ", B " +
                 num(bb.ebn0_db) + (pass ? " ok; " : " wrong order; ");
    for (const auto* x : {&r, &a, &bb}) o.details.push_back("n=" + std::to_string(n) + " " + describe(*x));
  }
  o.pass = ok;
  return o;
}

// ---------------------------------------------------------------- 8

Outcome criterion8(const Budget& b) {
  Outcome o;
  const std::vector<double> grid{0.2, 0.4, 0.6, 0.8, 1.0, 1.2, 1.4, 1.6, 1.8, 2.0};
  const Targets tg;
  bool ok = true;
  for (auto kind : {ChannelKind::BiAwgn, ChannelKind::PhaseNoise}) {
    const int k = 50;
    const int n = kind == ChannelKind::BiAwgn ? 100 : 50;
    BoundChannel fam;
    fam.kind = kind;
    fam.n_pilots = 10;
    McOptions mc;
    mc.samples = b.bound_samples;
    mc.seed = b.seed + 8;
    mc.workers = b.workers;
    ThresholdSearch search;
    search.lo_db = 0.0;
    search.hi_db = 14.0;
    search.tol_db = 0.01;
    const auto opt = snr_threshold_bound(BoundKind::Thm2, n, k, tg, fam, mc, search);
    double worst = -INFINITY, worst_s = 0;
    std::string curve;
    bool all_found = opt.found;
    for (double s : grid) {
      search.fixed_s = s;
      const auto r = snr_threshold_bound(BoundKind::Thm2, n, k, tg, fam, mc, search);
      all_found = all_found && r.found;
      curve += num(s, 2) + ":" + (r.found ? num(r.ebn0_db) : std::string(">") + num(search.hi_db)) + " ";
      const double v = r.found ? r.ebn0_db : search.hi_db;
      if (v > worst) {
        worst = v;
        worst_s = s;
      }
    }
    const double gain = worst - opt.ebn0_db;
    const bool pass = all_found && (kind == ChannelKind::BiAwgn ? std::abs(gain - 0.95) <= 0.15 : gain < 0.1);
    ok = ok && pass;
    o.summary += to_string(kind) + ": optimised " + num(opt.ebn0_db) + " dB, worst fixed s=" + num(worst_s, 2) + " " +
                 num(worst) + " dB, gain " + num(gain, 3) +
                 (kind == ChannelKind::BiAwgn ? " (want 0.95+-0.15); " : " (want < 0.1); ");
    o.details.push_back(to_string(kind) + " threshold vs s: " + curve);
  }
  o.pass = ok;
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance criteria"};
  std::string tier = "fast";
  std::string only;
  std::string report;
  Budget b;
  app.add_option("--tier", tier, "fast | heavy | all")->capture_default_str();
  app.add_option("--criteria", only, "comma-separated subset, e.g. 5,8");
  app.add_option("--seed", b.seed)->capture_default_str();
  app.add_option("--workers", b.workers)->capture_default_str();
  app.add_option("--trials-per-point", b.trials_per_point, "simulation cap per SNR point")->capture_default_str();
  app.add_option("--bound-samples", b.bound_samples, "MC samples for bound criteria")->capture_default_str();
  app.add_option("--bound-samples-264", b.bound_samples_264, "MC samples for the n=264 bounds")->capture_default_str();
  app.add_option("--mismatch-L", b.list_size_mismatch, "list size for criterion 9")->capture_default_str();
  app.add_option("--report", report, "also append the lines to this file");
  CLI11_PARSE(app, argc, argv);

  const std::map<int, std::function<Outcome(const Budget&)>> all{
      {1, criterion1}, {2, criterion2}, {3, criterion3}, {4, criterion4},  {5, criterion5},
      {6, criterion6}, {7, criterion7}, {8, criterion8}, {9, criterion9}, {10, criterion10}};
  std::set<int> pick;
  if (!only.empty()) {
    std::stringstream ss(only);
    std::string tok;
    while (std::getline(ss, tok, ',')) pick.insert(std::stoi(tok));
  } else if (tier == "fast") {
    pick = {1, 2, 3, 4, 10};
  } else if (tier == "heavy") {
    pick = {5, 6, 7, 8, 9};
  } else {
    for (const auto& [id, fn] : all) pick.insert(id);
  }

  std::ofstream rep;
  if (!report.empty()) rep.open(report, std::ios::app);
  bool ok = true;
  for (int id : pick) {
    const auto it = all.find(id);
    if (it == all.end()) {
      std::fprintf(stderr, "unknown criterion %d\n", id);
      return 2;
    }
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = it->second(b);
    } catch (const std::exception& e) {
      o.pass = false;
      o.summary = std::string("exception: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::ostringstream line;
    line << "criterion " << id << ": " << (o.pass ? "PASS" : "FAIL") << "  " << o.summary << " (" << num(secs, 3)
         << " s)\n";
    for (const auto& d : o.details) line << "    " << d << '\n';
    std::fputs(line.str().c_str(), stdout);
    std::fflush(stdout);
    if (rep) rep << line.str() << std::flush;
    ok = ok && o.pass;
  }
  return ok ? 0 : 1;
}
