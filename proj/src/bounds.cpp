#include "ued/bounds.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <random>
#include <stdexcept>

#include "ued/parallel.hpp"

namespace ued {
namespace {

constexpr double kLn2 = std::numbers::ln2;
constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr std::int64_t kChunk = 512;

void check_triangle(double s, double rho) {
  if (!(rho > 0.0) || !(rho <= 1.0) || !(s >= 0.0) || !(s <= rho))
    throw std::invalid_argument("forney_e0: need 0 <= s <= rho <= 1 and rho > 0");
}

// Upper Gaussian tail without cancellation for large arguments.
double q_func(double t) { return 0.5 * std::erfc(t / std::numbers::sqrt2); }

double bin_mass(double lo, double hi, double mean, double sigma) {
  const double a = (lo - mean) / sigma;
  const double b = (hi - mean) / sigma;
  if (a >= 0.0) return q_func(a) - q_func(b);
  if (b <= 0.0) return q_func(-b) - q_func(-a);
  return 1.0 - q_func(-a) - q_func(b);
}

// log(2^k - 1)
double log_messages(int k) {
  if (k <= 0) return -kInf;
  return k * kLn2 + std::log1p(-std::ldexp(1.0, -k));
}

double union_term(double log_count, const TailResult& psi) {
  if (psi.prob <= 0.0) return 0.0;
  return std::min(1.0, std::exp(log_count + psi.log_prob));
}

// D(i, x) = g(i, x) - g(i, sent_i); competitor tails are then taken at omega = 0.
MatrixXd shifted(const MatrixXd& g, std::span<const int> sent) {
  if (static_cast<Eigen::Index>(sent.size()) != g.rows())
    throw std::invalid_argument("pairwise: sent has " + std::to_string(sent.size()) + " entries, table has " +
                                std::to_string(g.rows()) + " rows");
  MatrixXd d(g.rows(), g.cols());
  for (Eigen::Index i = 0; i < g.rows(); ++i) d.row(i) = g.row(i).array() - g(i, sent[i]);
  return d;
}

CgfTerms table_cgf(const MatrixXd& d, double zeta) {
  CgfTerms sum;
  const Eigen::Index m = d.cols();
  const double log_m = std::log(static_cast<double>(m));
  for (Eigen::Index i = 0; i < d.rows(); ++i) {
    double top = -kInf;
    for (Eigen::Index x = 0; x < m; ++x) top = std::max(top, zeta * d(i, x));
    double w0 = 0.0, w1 = 0.0, w2 = 0.0;
    for (Eigen::Index x = 0; x < m; ++x) {
      const double w = std::exp(zeta * d(i, x) - top);
      w0 += w;
      w1 += w * d(i, x);
    }
    const double mean = w1 / w0;
    for (Eigen::Index x = 0; x < m; ++x) {
      const double c = d(i, x) - mean;
      w2 += std::exp(zeta * d(i, x) - top) * c * c;
    }
    sum.value += top + std::log(w0) - log_m;
    sum.d1 += mean;
    sum.d2 += w2 / w0;
  }
  return sum;
}

TailResult tail_of_table(const MatrixXd& d, double omega, double zeta_max = 50.0) {
  return saddlepoint_tail([&d](double z) { return table_cgf(d, z); }, omega, zeta_max);
}

double info_density_of_shifted(const MatrixXd& d, double s) { return -table_cgf(d, s).value / kLn2; }

TailResult psi_tilde_of_shifted(const MatrixXd& d, double iota, double s, double n_lambda) {
  const double omega = std::max(0.0, (n_lambda - iota) * kLn2 / s);
  return tail_of_table(d, omega);
}

struct Moments {
  std::array<double, 2> sum{};
  std::array<double, 2> sq{};
  std::int64_t count = 0;
};

// Fixed chunking by absolute sample index keeps totals identical for any worker count.
template <class Fn>
Moments run_samples(const McOptions& mc, Fn&& per_sample) {
  if (mc.samples < 2) throw std::invalid_argument("bound Monte Carlo needs at least 2 samples");
  std::vector<Moments> chunks;
  std::int64_t target = mc.samples;
  const std::int64_t cap = std::max(mc.max_samples, mc.samples);
  Moments total;
  while (true) {
    const std::int64_t n_chunks = (target + kChunk - 1) / kChunk;
    std::int64_t first = static_cast<std::int64_t>(chunks.size());
    if (first > 0 && chunks.back().count < kChunk) --first;  // last chunk was partial
    chunks.resize(n_chunks);
    parallel_for(n_chunks - first, mc.workers, [&](std::int64_t c) {
      Moments m;
      const std::int64_t lo = (first + c) * kChunk;
      const std::int64_t hi = std::min(target, lo + kChunk);
      for (std::int64_t j = lo; j < hi; ++j) {
        const std::array<double, 2> v = per_sample(j);
        for (int a = 0; a < 2; ++a) {
          m.sum[a] += v[a];
          m.sq[a] += v[a] * v[a];
        }
      }
      m.count = hi - lo;
      chunks[first + c] = m;
    });
    total = Moments{};
    for (const auto& m : chunks) {
      for (int a = 0; a < 2; ++a) {
        total.sum[a] += m.sum[a];
        total.sq[a] += m.sq[a];
      }
      total.count += m.count;
    }
    double worst = 0.0;
    for (int a = 0; a < 2; ++a) {
      const double mean = total.sum[a] / total.count;
      const double var = std::max(0.0, total.sq[a] / total.count - mean * mean);
      if (mean > 0) worst = std::max(worst, std::sqrt(var / (total.count - 1)) / mean);
    }
    if (worst <= 0.1 || target * 2 > cap) break;
    target *= 2;
  }
  return total;
}

BoundResult to_result(const Moments& m) {
  BoundResult r;
  const auto n = static_cast<double>(m.count);
  auto se = [&](int a) {
    const double mean = m.sum[a] / n;
    return std::sqrt(std::max(0.0, m.sq[a] / n - mean * mean) / (n - 1));
  };
  r.eps_t = std::clamp(m.sum[0] / n, 0.0, 1.0);
  r.eps_u = std::clamp(m.sum[1] / n, 0.0, 1.0);
  r.mc_std_err = se(0);
  r.mc_std_err_u = se(1);
  r.samples = m.count;
  r.low_precision = (r.eps_t > 0 && r.mc_std_err > 0.2 * r.eps_t) || (r.eps_u > 0 && r.mc_std_err_u > 0.2 * r.eps_u);
  return r;
}

LikelihoodSample sample_at(const BoundChannel& ch, int n, std::uint64_t seed, std::int64_t j) {
  CounterRng rng(seed, static_cast<std::uint64_t>(j));
  return draw_sample(ch, n, rng);
}

// ---------------------------------------------------------------- Nelder-Mead on (rho, s / rho)

template <class F>
std::array<double, 3> nelder_mead_max(F f, std::array<double, 2> start, double step) {
  auto clampv = [](std::array<double, 2> p) {
    p[0] = std::clamp(p[0], 1e-12, 1.0);
    p[1] = std::clamp(p[1], 0.0, 1.0);
    return p;
  };
  struct Vertex {
    std::array<double, 2> p;
    double v;
  };
  std::array<Vertex, 3> sx;
  sx[0].p = clampv(start);
  sx[1].p = clampv({start[0] + step, start[1]});
  sx[2].p = clampv({start[0], start[1] + step});
  if (sx[1].p == sx[0].p) sx[1].p = clampv({start[0] - step, start[1]});
  if (sx[2].p == sx[0].p) sx[2].p = clampv({start[0], start[1] - step});
  for (auto& v : sx) v.v = f(v.p);
  for (int it = 0; it < 400; ++it) {
    std::sort(sx.begin(), sx.end(), [](const Vertex& a, const Vertex& b) { return a.v > b.v; });
    if (std::abs(sx[0].v - sx[2].v) < 1e-14 &&
        std::max(std::abs(sx[0].p[0] - sx[2].p[0]), std::abs(sx[0].p[1] - sx[2].p[1])) < 1e-10)
      break;
    const std::array<double, 2> c{(sx[0].p[0] + sx[1].p[0]) / 2, (sx[0].p[1] + sx[1].p[1]) / 2};
    auto along = [&](double t) { return clampv({c[0] + t * (sx[2].p[0] - c[0]), c[1] + t * (sx[2].p[1] - c[1])}); };
    const auto r = along(-1.0);
    const double vr = f(r);
    if (vr > sx[0].v) {
      const auto e = along(-2.0);
      const double ve = f(e);
      sx[2] = ve > vr ? Vertex{e, ve} : Vertex{r, vr};
    } else if (vr > sx[1].v) {
      sx[2] = {r, vr};
    } else {
      const auto k = along(0.5);
      const double vk = f(k);
      if (vk > sx[2].v) {
        sx[2] = {k, vk};
      } else {
        for (int i = 1; i < 3; ++i) {
          sx[i].p = clampv({(sx[0].p[0] + sx[i].p[0]) / 2, (sx[0].p[1] + sx[i].p[1]) / 2});
          sx[i].v = f(sx[i].p);
        }
      }
    }
  }
  const auto best = std::max_element(sx.begin(), sx.end(), [](const Vertex& a, const Vertex& b) { return a.v < b.v; });
  return {best->p[0], best->p[1], best->v};
}

// ---------------------------------------------------------------- bisection on the SNR axis

template <class Pass>
BoundThreshold bisect_snr(const ThresholdSearch& search, Pass&& pass) {
  BoundThreshold out;
  BoundResult at_hi;
  if (!pass(search.hi_db, at_hi)) {
    out.diagnostics = "targets not met at the top of the bracket (" + std::to_string(search.hi_db) + " dB)";
    out.at_threshold = at_hi;
    return out;
  }
  BoundResult at_lo;
  if (pass(search.lo_db, at_lo)) {
    out.diagnostics = "targets already met at the bottom of the bracket (" + std::to_string(search.lo_db) + " dB)";
    out.at_threshold = at_lo;
    return out;
  }
  double lo = search.lo_db, hi = search.hi_db;
  while (hi - lo > search.tol_db) {
    const double mid = 0.5 * (lo + hi);
    BoundResult r;
    if (pass(mid, r)) {
      hi = mid;
      at_hi = r;
    } else {
      lo = mid;
    }
  }
  out.found = true;
  out.ebn0_db = hi;
  out.at_threshold = at_hi;
  return out;
}

}  // namespace

// ---------------------------------------------------------------- exponents

void DmcSpec::validate() const {
  if (input_probs.size() < 1 || transition.rows() != input_probs.size())
    throw std::invalid_argument("DmcSpec: transition needs one row per input");
  if (std::abs(input_probs.sum() - 1.0) > 1e-12 || (input_probs.array() < 0).any())
    throw std::invalid_argument("DmcSpec: input_probs is not a distribution");
  for (Eigen::Index x = 0; x < transition.rows(); ++x)
    if (std::abs(transition.row(x).sum() - 1.0) > 1e-12 || (transition.row(x).array() < 0).any())
      throw std::invalid_argument("DmcSpec: transition row " + std::to_string(x) + " is not a distribution");
}

DmcSpec quantize_biawgn(double sigma, int levels, double span_sigmas) {
  if (levels < 2) throw std::invalid_argument("quantize_biawgn: levels must be at least 2");
  if (!(sigma > 0) || !(span_sigmas > 0)) throw std::invalid_argument("quantize_biawgn: sigma and span must be positive");
  const double span = span_sigmas * sigma;
  std::vector<double> edges(levels + 3);
  edges.front() = -kInf;
  edges.back() = kInf;
  for (int b = 0; b <= levels; ++b) edges[b + 1] = -span + 2.0 * span * b / levels;
  DmcSpec dmc;
  dmc.input_probs = VectorXd::Constant(2, 0.5);
  dmc.transition.resize(2, levels + 2);
  for (int x = 0; x < 2; ++x) {
    const double mean = x == 0 ? 1.0 : -1.0;
    for (int b = 0; b < levels + 2; ++b) dmc.transition(x, b) = bin_mass(edges[b], edges[b + 1], mean, sigma);
  }
  return dmc;
}

double forney_e0(double s, double rho, const DmcSpec& dmc) {
  check_triangle(s, rho);
  const double a = 1.0 - s;
  const double b = s / rho;
  double total = 0.0;
  for (Eigen::Index y = 0; y < dmc.transition.cols(); ++y) {
    double first = 0.0, second = 0.0;
    for (Eigen::Index x = 0; x < dmc.transition.rows(); ++x) {
      const double p = dmc.transition(x, y);
      if (p <= 0.0) continue;
      const double lp = std::log(p);
      first += dmc.input_probs[x] * std::exp(a * lp);
      second += dmc.input_probs[x] * std::exp(b * lp);
    }
    if (first > 0.0 && second > 0.0) total += std::exp(std::log(first) + rho * std::log(second));
  }
  return -std::log2(total);
}

ForneyExponents forney_exponents(double rate, double T, const DmcSpec& dmc) {
  if (!(rate > 0)) throw std::invalid_argument("forney_exponents: rate must be positive");
  if (!(T >= 0)) throw std::invalid_argument("forney_exponents: T must be non-negative");
  // Drop outputs that no input reaches; they contribute nothing.
  std::vector<Eigen::Index> keep;
  for (Eigen::Index y = 0; y < dmc.transition.cols(); ++y)
    if (dmc.transition.col(y).maxCoeff() > 0.0) keep.push_back(y);
  DmcSpec d;
  d.input_probs = dmc.input_probs;
  d.transition.resize(dmc.transition.rows(), static_cast<Eigen::Index>(keep.size()));
  for (std::size_t c = 0; c < keep.size(); ++c) d.transition.col(c) = dmc.transition.col(keep[c]);

  auto objective = [&](const std::array<double, 2>& p) {
    const double rho = p[0], s = p[0] * p[1];
    return forney_e0(s, rho, d) - rho * rate - s * T;
  };
  ForneyExponents best;  // s = rho = 0 gives 0
  std::array<double, 2> arg{1e-12, 0.0};
  constexpr int kGrid = 64;
  for (int i = 1; i <= kGrid; ++i) {
    for (int j = 0; j < kGrid; ++j) {
      const std::array<double, 2> p{static_cast<double>(i) / kGrid, static_cast<double>(j) / (kGrid - 1)};
      const double v = objective(p);
      if (v > best.e1) {
        best.e1 = v;
        arg = p;
      }
    }
  }
  if (best.e1 > 0.0) {
    const auto nm = nelder_mead_max(objective, arg, 1.0 / kGrid);
    if (nm[2] > best.e1) {
      best.e1 = nm[2];
      arg = {nm[0], nm[1]};
    }
  }
  best.rho = best.e1 > 0.0 ? arg[0] : 0.0;
  best.s = best.e1 > 0.0 ? arg[0] * arg[1] : 0.0;
  best.e2 = best.e1 + T;
  return best;
}

BoundResult forney_bound(int n, double rate, double T, const DmcSpec& dmc) {
  if (n < 1) throw std::invalid_argument("forney_bound: n must be positive");
  const auto ex = forney_exponents(rate, T, dmc);
  BoundResult r;
  r.eps_t = std::exp2(-n * ex.e1);
  r.eps_u = r.eps_t * std::exp2(-n * T);
  r.params.T = T;
  r.params.s = ex.s;
  return r;
}

// ---------------------------------------------------------------- saddlepoint

CgfTerms cgf_terms(std::span<const double> g, double zeta) {
  if (g.size() < 2) throw std::invalid_argument("cgf_terms: need at least two inputs");
  MatrixXd row(1, static_cast<Eigen::Index>(g.size()));
  for (std::size_t x = 0; x < g.size(); ++x) row(0, x) = g[x];
  return table_cgf(row, zeta);
}

double log_q_scaled(double t) {
  if (t < 25.0) return std::log(q_func(t)) + 0.5 * t * t;
  const double u = 1.0 / (t * t);
  const double series = 1.0 - u * (1.0 - 3.0 * u * (1.0 - 5.0 * u * (1.0 - 7.0 * u)));
  return std::log(series / (t * std::sqrt(2.0 * std::numbers::pi)));
}

TailResult saddlepoint_tail(const CgfSum& cgf, double omega, double zeta_max) {
  TailResult out;
  const CgfTerms top = cgf(zeta_max);
  if (top.d1 < omega) {
    out.saturated = true;
    out.prob = 0.0;
    out.log_prob = -kInf;
    out.zeta = zeta_max;
    return out;
  }
  const CgfTerms bottom = cgf(-zeta_max);
  if (bottom.d1 > omega) {
    out.saturated = true;
    out.prob = 1.0;
    out.log_prob = 0.0;
    out.zeta = -zeta_max;
    return out;
  }
  // Safeguarded Newton; gamma' is non-decreasing so the bracket only shrinks.
  double a = -zeta_max, b = zeta_max;
  const CgfTerms at0 = cgf(0.0);
  double z = at0.d2 > 0.0 ? std::clamp((omega - at0.d1) / at0.d2, a, b) : 0.0;
  CgfTerms t = cgf(z);
  for (int it = 0; it < 200; ++it) {
    const double f = t.d1 - omega;
    if (f == 0.0) break;
    (f < 0.0 ? a : b) = z;
    double next = t.d2 > 0.0 ? z - f / t.d2 : 0.5 * (a + b);
    if (!(next > a && next < b)) next = 0.5 * (a + b);
    const bool done = std::abs(next - z) < 1e-10;
    z = next;
    t = cgf(z);
    if (done || b - a < 1e-10) break;
  }
  out.zeta = z;
  if (!(t.d2 > 0.0)) {
    out.saturated = true;
    out.prob = omega < t.d1 ? 1.0 : 0.0;
    out.log_prob = out.prob > 0 ? 0.0 : -kInf;
    return out;
  }
  const double root = std::sqrt(t.d2);
  const double base = t.value - z * t.d1;
  if (z > 0.0 || std::abs(z) < 1e-6) {
    out.log_prob = std::min(0.0, base + log_q_scaled(z * root));
    out.prob = std::exp(out.log_prob);
  } else {
    const double rest = std::exp(base + log_q_scaled(-z * root));
    out.prob = std::clamp(1.0 - rest, 0.0, 1.0);
    out.log_prob = rest < 1.0 ? std::log1p(-rest) : -kInf;
  }
  return out;
}

TailResult saddlepoint_tail(const SaddlepointQuery& q) {
  if (q.g.cols() < 2) throw std::invalid_argument("saddlepoint_tail: need |X| >= 2");
  if (!q.g.allFinite()) throw std::invalid_argument("saddlepoint_tail: g must be finite");
  return tail_of_table(q.g, q.omega, q.zeta_max);
}

// ---------------------------------------------------------------- pairwise terms

TailResult pairwise_psi(const MatrixXd& g, std::span<const int> sent) { return tail_of_table(shifted(g, sent), 0.0); }

TailResult pairwise_psi_tilde(const MatrixXd& g, std::span<const int> sent, double s, double lambda) {
  if (!(s > 0)) throw std::invalid_argument("pairwise_psi_tilde: s must be positive");
  const MatrixXd d = shifted(g, sent);
  return psi_tilde_of_shifted(d, info_density_of_shifted(d, s), s, g.rows() * lambda);
}

double gen_info_density(const MatrixXd& g, std::span<const int> sent, double s) {
  if (!(s > 0)) throw std::invalid_argument("gen_info_density: s must be positive");
  return info_density_of_shifted(shifted(g, sent), s);
}

// ---------------------------------------------------------------- channels for bounds

BoundChannel mismatched_bound_adapter(double sigma, int n_pilots) {
  if (n_pilots < 1) throw std::invalid_argument("mismatched_bound_adapter: n_pilots must be at least 1");
  BoundChannel ch;
  ch.kind = ChannelKind::PhaseNoise;
  ch.sigma = sigma;
  ch.n_pilots = n_pilots;
  return ch;
}

LikelihoodSample draw_sample(const BoundChannel& ch, int n, CounterRng& rng) {
  if (n < 1) throw std::invalid_argument("draw_sample: n must be positive");
  std::normal_distribution<double> unit(0.0, 1.0);
  LikelihoodSample out;
  out.sent.resize(n);
  if (ch.kind == ChannelKind::BiAwgn) {
    out.g.resize(n, 2);
    for (int i = 0; i < n; ++i) {
      const int b = static_cast<int>(rng() >> 63);
      const double y = bpsk(static_cast<std::uint8_t>(b)) + ch.sigma * unit(rng);
      out.sent[i] = b;
      out.g(i, 0) = biawgn_loglik(y, 1.0, ch.sigma);
      out.g(i, 1) = biawgn_loglik(y, -1.0, ch.sigma);
    }
    return out;
  }
  const double theta = 2.0 * std::numbers::pi * rng.uniform();
  const std::complex<double> rot = std::polar(1.0, theta);
  VectorXcd y(n);
  for (int i = 0; i < n; ++i) {
    out.sent[i] = static_cast<int>(rng() >> 62);
    const double re = unit(rng), im = unit(rng);
    y[i] = rot * qpsk_point(out.sent[i]) + ch.sigma * std::complex<double>(re, im);
  }
  double theta_hat = theta;
  if (!ch.genie_phase) {
    VectorXcd pilot_obs(ch.n_pilots);
    const VectorXcd pilots = VectorXcd::Constant(ch.n_pilots, pilot_symbol());
    for (int p = 0; p < ch.n_pilots; ++p) {
      const double re = unit(rng), im = unit(rng);
      pilot_obs[p] = rot * pilots[p] + ch.sigma * std::complex<double>(re, im);
    }
    theta_hat = estimate_phase_ml(pilot_obs, pilots);
  }
  out.g.resize(n, 4);
  for (int i = 0; i < n; ++i)
    for (int s = 0; s < 4; ++s) out.g(i, s) = mismatched_loglik(y[i], qpsk_point(s), theta_hat, ch.sigma);
  return out;
}

// ---------------------------------------------------------------- bounds

BoundResult rcu(int k, int n, const BoundChannel& ch, const McOptions& mc) {
  if (k < 0) throw std::invalid_argument("rcu: k must be non-negative");
  const double log_count = log_messages(k);
  const auto m = run_samples(mc, [&](std::int64_t j) -> std::array<double, 2> {
    const auto smp = sample_at(ch, n, mc.seed, j);
    const double r = union_term(log_count, pairwise_psi(smp.g, smp.sent));
    return {r, r};
  });
  return to_result(m);
}

BoundResult thm1_bounds(int k, int n, int delta, const BoundChannel& ch, const McOptions& mc) {
  if (delta < 0) throw std::invalid_argument("thm1_bounds: delta must be non-negative");
  BoundResult r = rcu(k + delta, n, ch, mc);
  r.eps_u = std::ldexp(r.eps_t, -delta);
  r.mc_std_err_u = std::ldexp(r.mc_std_err, -delta);
  r.params.delta = delta;
  return r;
}

BoundResult thm2_bounds(int k, int n, double s, double lambda, const BoundChannel& ch, const McOptions& mc) {
  if (!(s > 0)) throw std::invalid_argument("thm2_bounds: s must be positive");
  const double log_count = log_messages(k);
  const double n_lambda = n * lambda;
  const auto m = run_samples(mc, [&](std::int64_t j) -> std::array<double, 2> {
    const auto smp = sample_at(ch, n, mc.seed, j);
    const MatrixXd d = shifted(smp.g, smp.sent);
    const double iota = info_density_of_shifted(d, s);
    if (iota >= n_lambda) {
      const double r = union_term(log_count, tail_of_table(d, 0.0));
      return {r, r};
    }
    return {1.0, union_term(log_count, psi_tilde_of_shifted(d, iota, s, n_lambda))};
  });
  BoundResult r = to_result(m);
  r.params.s = s;
  r.params.lambda = lambda;
  return r;
}

std::string to_string(BoundKind kind) {
  switch (kind) {
    case BoundKind::Thm1: return "thm1";
    case BoundKind::Thm2: return "thm2";
    case BoundKind::Forney: return "forney";
    case BoundKind::Rcu: return "rcu";
  }
  return "?";
}

BoundKind parse_bound_kind(std::string_view name) {
  if (name == "thm1") return BoundKind::Thm1;
  if (name == "thm2") return BoundKind::Thm2;
  if (name == "forney") return BoundKind::Forney;
  if (name == "rcu") return BoundKind::Rcu;
  throw std::invalid_argument("unknown bound: " + std::string(name));
}

int delta_for_targets(const Targets& t) {
  if (!(t.eps_u > 0) || !(t.eps_u <= t.eps_t)) throw std::invalid_argument("targets need 0 < eps_u <= eps_t");
  return static_cast<int>(std::ceil(std::log2(t.eps_t / t.eps_u) - 1e-12));
}

namespace {

// Everything thm2_at_target needs about one s on the shared sample set.
struct Thm2Sweep {
  const BoundChannel& ch;
  int k, n;
  const Targets& targets;
  const McOptions& mc;
  double log_count;
  std::vector<double> r;  // min{1, (2^k - 1) psi} per sample
  double total_r = 0.0;

  struct Eval {
    double eps_t = kInf;
    double eps_u = kInf;
    double n_lambda = 0.0;
    double s = 0.0;
    bool feasible = false;
    double score = kInf;  // eps_t when feasible, 1 + eps_u at the cap otherwise
  };

  std::vector<double> iotas(double s) const {
    std::vector<double> out(r.size());
    parallel_for(static_cast<std::int64_t>(r.size()), mc.workers, [&](std::int64_t j) {
      const auto smp = sample_at(ch, n, mc.seed, j);
      out[j] = gen_info_density(smp.g, smp.sent, s);
    });
    return out;
  }

  Eval evaluate(double s, const std::vector<double>& iota, bool refine_lambda) const {
    const auto N = static_cast<std::int64_t>(r.size());
    const auto Nd = static_cast<double>(N);
    const std::int64_t cap = std::min<std::int64_t>(N - 1, static_cast<std::int64_t>(std::ceil(10.0 * targets.eps_t * Nd)) + 1);
    std::vector<std::int64_t> order(N);
    std::iota(order.begin(), order.end(), 0);
    std::partial_sort(order.begin(), order.begin() + cap + 1, order.end(),
                      [&](std::int64_t a, std::int64_t b) { return iota[a] < iota[b] || (iota[a] == iota[b] && a < b); });
    std::vector<double> prefix_r(cap + 2, 0.0);
    for (std::int64_t m = 0; m <= cap; ++m) prefix_r[m + 1] = prefix_r[m] + r[order[m]];
    std::vector<MatrixXd> cache(cap);
    std::vector<char> cached(cap, 0);
    auto shifted_of = [&](std::int64_t m) -> const MatrixXd& {
      if (!cached[m]) {
        const auto smp = sample_at(ch, n, mc.seed, order[m]);
        cache[m] = shifted(smp.g, smp.sent);
        cached[m] = 1;
      }
      return cache[m];
    };
    // eps_u with the first c sorted samples below the threshold a.
    auto eps_u_at = [&](std::int64_t c, double a) {
      std::vector<double> part(c);
      for (std::int64_t m = 0; m < c; ++m) shifted_of(m);
      parallel_for(c, mc.workers, [&](std::int64_t m) {
        part[m] = union_term(log_count, psi_tilde_of_shifted(cache[m], iota[order[m]], s, a));
      });
      double sum = total_r - prefix_r[c];
      for (double v : part) sum += v;
      return sum / Nd;
    };

    Eval e;
    e.s = s;
    const double u0 = total_r / Nd;
    if (u0 <= targets.eps_u) {
      e.feasible = true;
      e.eps_t = e.eps_u = u0;
      e.n_lambda = iota[order[0]];
      e.score = e.eps_t;
      return e;
    }
    const double u_cap = eps_u_at(cap, iota[order[cap]]);
    if (u_cap > targets.eps_u) {
      e.eps_u = u_cap;
      e.eps_t = (cap + total_r - prefix_r[cap]) / Nd;
      e.n_lambda = iota[order[cap]];
      e.score = 1.0 + u_cap;
      return e;
    }
    std::int64_t lo = 0, hi = cap;  // U(lo) > target >= U(hi)
    double u_hi = u_cap;
    while (hi - lo > 1) {
      const std::int64_t mid = (lo + hi) / 2;
      const double u = eps_u_at(mid, iota[order[mid]]);
      if (u <= targets.eps_u) {
        hi = mid;
        u_hi = u;
      } else {
        lo = mid;
      }
    }
    e.feasible = true;
    e.eps_t = (hi + total_r - prefix_r[hi]) / Nd;
    e.eps_u = u_hi;
    e.n_lambda = iota[order[hi]];
    if (refine_lambda) {
      // Smallest a in (iota_(hi-1), iota_(hi)] with eps_u(a) <= target.
      double a_lo = iota[order[hi - 1]], a_hi = iota[order[hi]];
      for (int it = 0; it < 50 && a_hi - a_lo > 1e-9 * std::max(1.0, std::abs(a_hi)); ++it) {
        const double mid = 0.5 * (a_lo + a_hi);
        const double u = eps_u_at(hi, mid);
        if (u <= targets.eps_u) {
          a_hi = mid;
          e.eps_u = u;
        } else {
          a_lo = mid;
        }
      }
      e.n_lambda = a_hi;
    }
    e.score = e.eps_t;
    return e;
  }
};

}  // namespace

BoundResult thm2_at_target(int k, int n, const Targets& targets, const BoundChannel& ch, const McOptions& mc,
                           std::optional<double> fixed_s) {
  if (!(targets.eps_u > 0) || !(targets.eps_u <= targets.eps_t))
    throw std::invalid_argument("thm2_at_target: need 0 < eps_u <= eps_t");
  if (mc.samples < 2) throw std::invalid_argument("thm2_at_target: need at least 2 samples");
  if (fixed_s && !(*fixed_s > 0)) throw std::invalid_argument("thm2_at_target: s must be positive");
  Thm2Sweep sw{ch, k, n, targets, mc, log_messages(k), {}, 0.0};
  sw.r.resize(mc.samples);
  parallel_for(mc.samples, mc.workers, [&](std::int64_t j) {
    const auto smp = sample_at(ch, n, mc.seed, j);
    sw.r[j] = union_term(sw.log_count, pairwise_psi(smp.g, smp.sent));
  });
  for (double v : sw.r) sw.total_r += v;

  Thm2Sweep::Eval best;
  auto consider = [&](double s) {
    const auto e = sw.evaluate(s, sw.iotas(s), false);
    if (e.score < best.score) best = e;
    return e.score;
  };
  if (fixed_s) {
    consider(*fixed_s);
  } else {
    // Coarse grid over (0, 2], then golden-section inside the best cell.
    constexpr int kGrid = 20;
    for (int i = 1; i <= kGrid; ++i) consider(2.0 * i / kGrid);
    double a = std::max(1e-3, best.s - 2.0 / kGrid), b = std::min(2.0, best.s + 2.0 / kGrid);
    const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double c = b - inv_phi * (b - a), d = a + inv_phi * (b - a);
    double fc = consider(c), fd = consider(d);
    while (b - a > 1e-3) {
      if (fc <= fd) {
        b = d;
        d = c;
        fd = fc;
        c = b - inv_phi * (b - a);
        fc = consider(c);
      } else {
        a = c;
        c = d;
        fc = fd;
        d = a + inv_phi * (b - a);
        fd = consider(d);
      }
    }
  }
  const auto final_eval = sw.evaluate(best.s, sw.iotas(best.s), true);
  BoundResult out;
  out.eps_t = std::min(1.0, final_eval.eps_t);
  out.eps_u = std::min(1.0, final_eval.eps_u);
  out.params.s = best.s;
  out.params.lambda = final_eval.n_lambda / n;
  out.samples = mc.samples;
  out.low_precision = !final_eval.feasible;
  // Standard errors from the binomial-like spread of the per-sample terms.
  const double Nd = static_cast<double>(mc.samples);
  out.mc_std_err = std::sqrt(std::max(0.0, out.eps_t * (1.0 - out.eps_t)) / (Nd - 1));
  out.mc_std_err_u = std::sqrt(std::max(0.0, out.eps_u * (1.0 - out.eps_u)) / (Nd - 1));
  return out;
}

BoundThreshold snr_threshold_bound(BoundKind which, int n, int k, const Targets& targets, const BoundChannel& family,
                                   const McOptions& mc, const ThresholdSearch& search) {
  if (n < 1 || k < 1) throw std::invalid_argument("snr_threshold_bound: n and k must be positive");
  if (!(targets.eps_u > 0) || !(targets.eps_u <= targets.eps_t))
    throw std::invalid_argument("snr_threshold_bound: need 0 < eps_u <= eps_t");
  const double rate = static_cast<double>(k) / n;
  auto channel_at = [&](double db) {
    BoundChannel ch = family;
    ch.sigma = snr_to_sigma(db, rate);
    return ch;
  };
  switch (which) {
    case BoundKind::Thm1: {
      const int delta = delta_for_targets(targets);
      return bisect_snr(search, [&](double db, BoundResult& r) {
        r = thm1_bounds(k, n, delta, channel_at(db), mc);
        return r.eps_t <= targets.eps_t;
      });
    }
    case BoundKind::Rcu:
      return bisect_snr(search, [&](double db, BoundResult& r) {
        r = rcu(k, n, channel_at(db), mc);
        return r.eps_t <= targets.eps_u;
      });
    case BoundKind::Thm2:
      return bisect_snr(search, [&](double db, BoundResult& r) {
        r = thm2_at_target(k, n, targets, channel_at(db), mc, search.fixed_s);
        return r.eps_t <= targets.eps_t && r.eps_u <= targets.eps_u;
      });
    case BoundKind::Forney: {
      if (family.kind != ChannelKind::BiAwgn) throw std::invalid_argument("forney threshold is implemented for biAWGN only");
      const double T = std::log2(targets.eps_t / targets.eps_u) / n;
      return bisect_snr(search, [&](double db, BoundResult& r) {
        r = forney_bound(n, rate, T, quantize_biawgn(channel_at(db).sigma, search.forney_levels));
        return r.eps_t <= targets.eps_t;
      });
    }
  }
  throw std::invalid_argument("snr_threshold_bound: unknown bound");
}

}  // namespace ued
