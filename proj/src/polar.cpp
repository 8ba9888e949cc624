#include "ued/polar.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <numbers>
#include <numeric>
#include <ostream>
#include <stdexcept>
#include <string>

#include "ued/channels.hpp"

namespace ued {
namespace {

// Trifonov's two-piece approximation of phi(x) = 1 - E[tanh(L/2)], L ~ N(x, 2x),
// kept in the log domain so deep recursion levels do not underflow.
double log_phi(double x) {
  if (x <= 0) return 0.0;
  if (x < 10.0) return -0.4527 * std::pow(x, 0.86) + 0.0218;
  return 0.5 * std::log(std::numbers::pi / x) - x / 4.0 + std::log1p(-10.0 / (7.0 * x));
}

double inverse_log_phi(double log_y) {
  if (log_y >= 0.0218) return 0.0;
  const double first = std::pow((0.0218 - log_y) / 0.4527, 1.0 / 0.86);
  if (first < 10.0) return first;
  // Second piece is decreasing in x; bisect on a geometric bracket.
  double lo = 10.0, hi = 20.0;
  while (log_phi(hi) > log_y) {
    lo = hi;
    hi *= 2.0;
  }
  if (log_phi(lo) <= log_y) return lo;
  for (int it = 0; it < 200 && hi - lo > 1e-13 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    (log_phi(mid) > log_y ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

double check_node_mean(double mean) {
  const double lp = log_phi(mean);
  // 1 - (1 - phi)^2 = phi (2 - phi)
  return inverse_log_phi(lp + std::log(2.0 - std::exp(lp)));
}

std::vector<int> order_by_reliability(const std::vector<double>& mean) {
  std::vector<int> order(mean.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    if (mean[a] != mean[b]) return mean[a] > mean[b];
    return a > b;
  });
  return order;
}

void validate_length(int n_c) {
  if (n_c < 1 || !is_power_of_two(static_cast<std::size_t>(n_c)))
    throw std::invalid_argument("polar code length must be a power of two");
}

// log(1 + e^{-x}) for x >= 0 by cubic Hermite interpolation on a grid of
// step 1/64, zero beyond 40; absolute error below 1e-10.
class LogOnePlusExpNeg {
 public:
  static constexpr double kStep = 1.0 / 64;
  static constexpr double kLimit = 40.0;

  LogOnePlusExpNeg() {
    const int count = static_cast<int>(kLimit / kStep) + 2;
    value_.resize(count);
    slope_.resize(count);
    for (int i = 0; i < count; ++i) {
      const double x = i * kStep;
      value_[i] = std::log1p(std::exp(-x));
      slope_[i] = -kStep / (1.0 + std::exp(x));
    }
  }

  double operator()(double x) const {
    if (x >= kLimit) return 0.0;
    const double pos = x * (1.0 / kStep);
    const int i = static_cast<int>(pos);
    const double t = pos - i;
    const double t2 = t * t, t3 = t2 * t;
    return (2 * t3 - 3 * t2 + 1) * value_[i] + (t3 - 2 * t2 + t) * slope_[i] + (-2 * t3 + 3 * t2) * value_[i + 1] +
           (t3 - t2) * slope_[i + 1];
  }

 private:
  std::vector<double> value_, slope_;
};

const LogOnePlusExpNeg log1p_exp_neg;

inline double softplus(double x) { return std::max(x, 0.0) + log1p_exp_neg(std::abs(x)); }

inline double check_node(double a, double b) {
  const double s = (a < 0) != (b < 0) ? -1.0 : 1.0;
  return s * std::min(std::abs(a), std::abs(b)) + log1p_exp_neg(std::abs(a + b)) - log1p_exp_neg(std::abs(a - b));
}


}  // namespace

std::vector<double> ga_mean_llrs(int n_c, double sigma) {
  validate_length(n_c);
  std::vector<double> mean{2.0 / (sigma * sigma)};
  // Each level splits every channel into a check-node child (index bit 0)
  // and a variable-node child (index bit 1); the first split is the MSB.
  while (static_cast<int>(mean.size()) < n_c) {
    std::vector<double> next(2 * mean.size());
    for (std::size_t j = 0; j < mean.size(); ++j) {
      next[2 * j] = check_node_mean(mean[j]);
      next[2 * j + 1] = 2.0 * mean[j];
    }
    mean.swap(next);
  }
  return mean;
}

PolarCode design_ga(int n_c, int h, double design_ebn0_db, double info_rate) {
  validate_length(n_c);
  if (h < 1 || h > n_c) throw std::invalid_argument("design_ga: need 0 < h <= n_c");
  if (info_rate <= 0) info_rate = static_cast<double>(h) / n_c;
  const double sigma = snr_to_sigma(design_ebn0_db, info_rate);
  const auto order = order_by_reliability(ga_mean_llrs(n_c, sigma));
  std::vector<int> frozen(order.begin() + h, order.end());
  PolarCode code = polar_code_from_frozen(n_c, std::move(frozen), design_ebn0_db);
  code.reliability_order = order;
  return code;
}

PolarCode polar_code_from_frozen(int n_c, std::vector<int> frozen, double design_snr_db) {
  validate_length(n_c);
  PolarCode code;
  code.n_c = n_c;
  code.design_snr_db = design_snr_db;
  code.frozen_mask.assign(n_c, 0);
  for (int f : frozen) {
    if (f < 0 || f >= n_c) throw std::invalid_argument("frozen index out of range");
    if (code.frozen_mask[f]) throw std::invalid_argument("duplicate frozen index");
    code.frozen_mask[f] = 1;
  }
  std::sort(frozen.begin(), frozen.end());
  code.frozen_set = std::move(frozen);
  for (int i = 0; i < n_c; ++i)
    if (!code.frozen_mask[i]) code.info_indices.push_back(i);
  code.h = static_cast<int>(code.info_indices.size());
  if (code.h == 0) throw std::invalid_argument("polar code without information bits");
  code.reliability_order.assign(code.info_indices.rbegin(), code.info_indices.rend());
  code.reliability_order.insert(code.reliability_order.end(), code.frozen_set.rbegin(), code.frozen_set.rend());
  return code;
}

void polar_transform(std::span<std::uint8_t> u) {
  const std::size_t n = u.size();
  for (std::size_t half = 1; half < n; half <<= 1)
    for (std::size_t j = 0; j < n; j += 2 * half)
      for (std::size_t t = j; t < j + half; ++t) u[t] ^= u[t + half];
}

Bits polar_encode(BitSpan v, const PolarCode& code) {
  if (static_cast<int>(v.size()) != code.h)
    throw std::invalid_argument("polar_encode: expected " + std::to_string(code.h) + " bits");
  Bits u(code.n_c, 0);
  for (int j = 0; j < code.h; ++j) u[code.info_indices[j]] = v[j];
  polar_transform(u);
  return u;
}

double codeword_loglik(BitSpan x_bits, const MatrixXd& table) {
  const int bps = table.cols() == 2 ? 1 : table.cols() == 4 ? 2 : 0;
  if (bps == 0) throw std::invalid_argument("codeword_loglik: table must have 2 or 4 columns");
  if (static_cast<Eigen::Index>(x_bits.size()) != bps * table.rows())
    throw std::invalid_argument("codeword_loglik: shape mismatch");
  double sum = 0.0;
  for (Eigen::Index i = 0; i < table.rows(); ++i) {
    const int s = bps == 1 ? x_bits[i] : 2 * x_bits[2 * i] + x_bits[2 * i + 1];
    sum += table(i, s);
  }
  return sum;
}

// ---------------------------------------------------------------------------
// SCL decoder. Layer lambda in [1, m] holds arrays of 2^(m - lambda) LLRs and
// pairs of partial-sum bits; layer 0 is the channel. Arrays are shared among
// paths by reference count and copied on first write.

struct SclDecoder::Impl {
  PolarCode code;
  int n, m, list;
  std::vector<int> size;                        // per layer
  std::vector<std::vector<double>> p;           // per layer, list * size
  std::vector<std::vector<std::uint8_t>> c;     // per layer, list * size * 2
  std::vector<int> array_of;                    // (m+1) * list
  std::vector<int> refs;                        // (m+1) * list
  std::vector<std::vector<int>> free_arrays;    // per layer
  std::vector<int> free_paths;
  std::vector<std::uint8_t> active;
  std::vector<int> active_list;
  std::vector<double> metric;
  std::vector<std::uint8_t> decided;            // list * n
  std::vector<double> channel;

  // Aligned run of 2^depth phases that is entirely frozen, or frozen except
  // for its last index (a repetition code on the block).
  struct Block {
    int phase;
    int depth;
    bool repetition;
  };
  std::vector<Block> plan;
  std::vector<double> cost0, cost1;

  struct Fork {
    double pm;
    int path;
    int bit;
  };
  std::vector<Fork> forks;
  std::vector<std::uint8_t> keep;  // list * 2
  std::vector<int> survivors;

  Impl(const PolarCode& code_, int list_) : code(code_), n(code_.n_c), list(list_) {
    m = 0;
    while ((1 << m) < n) ++m;
    size.resize(m + 1);
    p.resize(m + 1);
    c.resize(m + 1);
    free_arrays.resize(m + 1);
    for (int l = 0; l <= m; ++l) {
      size[l] = n >> l;
      if (l > 0) {
        p[l].assign(static_cast<std::size_t>(list) * size[l], 0.0);
        c[l].assign(static_cast<std::size_t>(list) * size[l] * 2, 0);
      }
    }
    array_of.assign((m + 1) * list, -1);
    refs.assign((m + 1) * list, 0);
    active.assign(list, 0);
    metric.assign(list, 0.0);
    decided.assign(static_cast<std::size_t>(list) * n, 0);
    keep.assign(2 * list, 0);
    forks.reserve(2 * list);
    cost0.assign(list, 0.0);
    cost1.assign(list, 0.0);
    for (int phase = 0; phase < n;) {
      Block blk{phase, 0, !code.frozen_mask[phase]};
      for (int j = 1; j <= m && phase % (1 << j) == 0; ++j) {
        const int end = phase + (1 << j);
        const bool head_frozen = std::all_of(code.frozen_mask.begin() + phase, code.frozen_mask.begin() + end - 1,
                                             [](std::uint8_t f) { return f != 0; });
        if (!head_frozen) break;
        blk = {phase, j, !code.frozen_mask[end - 1]};
      }
      plan.push_back(blk);
      phase += 1 << blk.depth;
    }
  }

  void reset() {
    free_paths.clear();
    for (int l = list - 1; l >= 0; --l) free_paths.push_back(l);
    for (int lam = 1; lam <= m; ++lam) {
      free_arrays[lam].clear();
      for (int s = list - 1; s >= 0; --s) free_arrays[lam].push_back(s);
    }
    std::fill(refs.begin(), refs.end(), 0);
    std::fill(active.begin(), active.end(), 0);
    active_list.clear();
  }

  int assign_initial_path() {
    const int l = free_paths.back();
    free_paths.pop_back();
    active[l] = 1;
    metric[l] = 0.0;
    for (int lam = 1; lam <= m; ++lam) {
      const int s = free_arrays[lam].back();
      free_arrays[lam].pop_back();
      array_of[lam * list + l] = s;
      refs[lam * list + s] = 1;
    }
    return l;
  }

  int clone_path(int l, int prefix) {
    const int k = free_paths.back();
    free_paths.pop_back();
    active[k] = 1;
    metric[k] = metric[l];
    for (int lam = 1; lam <= m; ++lam) {
      const int s = array_of[lam * list + l];
      array_of[lam * list + k] = s;
      ++refs[lam * list + s];
    }
    std::copy_n(decided.begin() + static_cast<std::ptrdiff_t>(l) * n, prefix,
                decided.begin() + static_cast<std::ptrdiff_t>(k) * n);
    return k;
  }

  void kill_path(int l) {
    active[l] = 0;
    free_paths.push_back(l);
    for (int lam = 1; lam <= m; ++lam) {
      const int s = array_of[lam * list + l];
      if (--refs[lam * list + s] == 0) free_arrays[lam].push_back(s);
    }
  }

  // Returns an array index at layer lam owned exclusively by path l. Only the
  // partial sums are carried over: every caller overwrites the LLRs before
  // they are read again.
  int writable(int lam, int l) {
    const int s = array_of[lam * list + l];
    if (refs[lam * list + s] == 1) return s;
    const int t = free_arrays[lam].back();
    free_arrays[lam].pop_back();
    const std::size_t sz = size[lam];
    std::copy_n(c[lam].begin() + 2 * s * sz, 2 * sz, c[lam].begin() + 2 * t * sz);
    --refs[lam * list + s];
    refs[lam * list + t] = 1;
    array_of[lam * list + l] = t;
    return t;
  }

  int readable(int lam, int l) const { return array_of[lam * list + l]; }

  void calc_llr(int lam, int phase) {
    if (lam == 0) return;
    const int psi = phase >> 1;
    if ((phase & 1) == 0) calc_llr(lam - 1, psi);
    const int sz = size[lam];
    for (int l : active_list) {
      const int s = writable(lam, l);
      double* out = p[lam].data() + static_cast<std::size_t>(s) * sz;
      const double* in = lam == 1 ? channel.data() : p[lam - 1].data() + static_cast<std::size_t>(readable(lam - 1, l)) * 2 * sz;
      if ((phase & 1) == 0) {
        for (int b = 0; b < sz; ++b) out[b] = check_node(in[b], in[b + sz]);
      } else {
        const std::uint8_t* bits = c[lam].data() + static_cast<std::size_t>(s) * 2 * sz;
        for (int b = 0; b < sz; ++b) out[b] = (bits[2 * b] ? -in[b] : in[b]) + in[b + sz];
      }
    }
  }

  void update_bits(int lam, int phase) {
    const int psi = phase >> 1;
    if (lam - 1 >= 1) {
      const int sz = size[lam];
      for (int l : active_list) {
        const int prev = writable(lam - 1, l);
        const int cur = readable(lam, l);
        const std::uint8_t* src = c[lam].data() + static_cast<std::size_t>(cur) * 2 * sz;
        std::uint8_t* dst = c[lam - 1].data() + static_cast<std::size_t>(prev) * 4 * sz;
        const int col = psi & 1;
        for (int b = 0; b < sz; ++b) {
          dst[2 * b + col] = src[2 * b] ^ src[2 * b + 1];
          dst[2 * (b + sz) + col] = src[2 * b + 1];
        }
      }
      if (psi & 1) update_bits(lam - 1, psi);
    }
  }

  // Writes the block decision (all zeros, or all u for a repetition block).
  void set_block(int l, const Block& blk, std::uint8_t u) {
    const int lam = m - blk.depth;
    const int sz = 1 << blk.depth;
    if (lam > 0) {
      const int s = writable(lam, l);
      std::uint8_t* bits = c[lam].data() + static_cast<std::size_t>(s) * 2 * sz + ((blk.phase >> blk.depth) & 1);
      for (int b = 0; b < sz; ++b) bits[2 * b] = u;
    }
    std::uint8_t* d = decided.data() + static_cast<std::size_t>(l) * n + blk.phase;
    std::fill_n(d, sz, 0);
    d[sz - 1] = u;
  }

  const double* block_llrs(int lam, int l) const {
    return lam == 0 ? channel.data() : p[lam].data() + static_cast<std::size_t>(readable(lam, l)) * size[lam];
  }

  void continue_paths(const Block& blk) {
    forks.clear();
    for (int l : active_list) {
      forks.push_back({metric[l] + cost0[l], l, 0});
      forks.push_back({metric[l] + cost1[l], l, 1});
    }
    std::fill(keep.begin(), keep.end(), 0);
    if (static_cast<int>(forks.size()) > list) {
      auto better = [](const Fork& a, const Fork& b) {
        if (a.pm != b.pm) return a.pm < b.pm;
        if (a.path != b.path) return a.path < b.path;
        return a.bit < b.bit;
      };
      std::nth_element(forks.begin(), forks.begin() + list, forks.end(), better);
      forks.resize(list);
    }
    for (const auto& f : forks) keep[2 * f.path + f.bit] = 1;
    survivors.clear();
    for (int l : active_list) {
      if (keep[2 * l] || keep[2 * l + 1])
        survivors.push_back(l);
      else
        kill_path(l);
    }
    for (int l : survivors) {
      const bool k0 = keep[2 * l], k1 = keep[2 * l + 1];
      if (k0 && k1) {
        const int k = clone_path(l, blk.phase);
        metric[k] = metric[l] + cost1[l];
        set_block(k, blk, 1);
      }
      metric[l] += k0 ? cost0[l] : cost1[l];
      set_block(l, blk, k0 ? 0 : 1);
    }
    rebuild_active();
  }

  void rebuild_active() {
    active_list.clear();
    for (int l = 0; l < list; ++l)
      if (active[l]) active_list.push_back(l);
  }

  void process(const Block& blk) {
    const int lam = m - blk.depth;
    const int psi = blk.phase >> blk.depth;
    const int sz = 1 << blk.depth;
    if (lam > 0) calc_llr(lam, psi);
    for (int l : active_list) {
      const double* a = block_llrs(lam, l);
      double c0 = 0.0, sum = 0.0;
      for (int b = 0; b < sz; ++b) {
        c0 += softplus(-a[b]);
        sum += a[b];
      }
      cost0[l] = c0;
      cost1[l] = c0 + sum;
    }
    if (blk.repetition) {
      continue_paths(blk);
    } else {
      for (int l : active_list) {
        metric[l] += cost0[l];
        set_block(l, blk, 0);
      }
    }
    if (lam > 0 && (psi & 1)) update_bits(lam, psi);
  }

  DecoderList run(const VectorXd& llrs) {
    if (llrs.size() != n) throw std::invalid_argument("scl_decode: expected " + std::to_string(n) + " LLRs");
    if (!llrs.allFinite()) throw std::invalid_argument("scl_decode: non-finite LLR");
    channel.assign(llrs.data(), llrs.data() + n);
    reset();
    assign_initial_path();
    rebuild_active();
    for (const auto& blk : plan) process(blk);
    DecoderList out;
    std::vector<int> order = active_list;
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return metric[a] < metric[b]; });
    for (int l : order) {
      ListCandidate cand;
      cand.info.resize(code.h);
      for (int j = 0; j < code.h; ++j) cand.info[j] = decided[static_cast<std::size_t>(l) * n + code.info_indices[j]];
      cand.loglik = -metric[l];
      out.candidates.push_back(std::move(cand));
    }
    return out;
  }
};

SclDecoder::SclDecoder(const PolarCode& code, int list_size) {
  if (list_size < 1) throw std::invalid_argument("list size must be at least 1");
  if (code.n_c < 1 || static_cast<int>(code.frozen_mask.size()) != code.n_c)
    throw std::invalid_argument("SclDecoder: malformed polar code");
  impl_ = std::make_unique<Impl>(code, list_size);
}
SclDecoder::SclDecoder(SclDecoder&&) noexcept = default;
SclDecoder& SclDecoder::operator=(SclDecoder&&) noexcept = default;
SclDecoder::~SclDecoder() = default;

DecoderList SclDecoder::decode(const VectorXd& bit_llrs) { return impl_->run(bit_llrs); }
int SclDecoder::list_size() const { return impl_->list; }
const PolarCode& SclDecoder::code() const { return impl_->code; }

DecoderList scl_decode(const VectorXd& bit_llrs, const PolarCode& code, int list_size) {
  SclDecoder decoder(code, list_size);
  return decoder.decode(bit_llrs);
}

void write_frozen_set(std::ostream& os, const PolarCode& code) {
  for (int f : code.frozen_set) os << f << '\n';
}

std::vector<int> read_frozen_set(std::istream& is) {
  std::vector<int> out;
  std::string line;
  while (std::getline(is, line)) {
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    out.push_back(std::stoi(line.substr(first)));
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace ued
