#include "ued/harness.hpp"

#include <algorithm>
#include <boost/math/special_functions/beta.hpp>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include "json.hpp"
#include <sstream>
#include <stdexcept>

#include "ued/parallel.hpp"
#include "ued/rng.hpp"

namespace ued {
namespace {

using json = nlohmann::json;
using Clock = std::chrono::steady_clock;

constexpr std::int64_t kBatch = 256;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// Runs batches in waves of `workers`, merging strictly in batch order and
// asking `done` after every merge. Batches past the stopping point are
// discarded, so the totals do not depend on the worker count.
template <class Partial, class RunBatch, class Merge, class Done>
bool run_batches(std::int64_t n_batches, int workers, RunBatch&& run, Merge&& merge, Done&& done) {
  const std::int64_t wave = std::max(1, workers);
  for (std::int64_t first = 0; first < n_batches; first += wave) {
    const std::int64_t count = std::min(wave, n_batches - first);
    std::vector<Partial> parts(static_cast<std::size_t>(count));
    parallel_for(count, workers, [&](std::int64_t i) { parts[static_cast<std::size_t>(i)] = run(first + i); });
    for (auto& p : parts) {
      merge(p);
      if (done()) return true;
    }
  }
  return false;
}

Bits random_message(int k, CounterRng& rng) {
  Bits m(static_cast<std::size_t>(k));
  std::uint64_t word = 0;
  for (int i = 0; i < k; ++i) {
    if (i % 64 == 0) word = rng();
    m[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>((word >> (i % 64)) & 1u);
  }
  return m;
}

struct Counts {
  std::int64_t trials = 0;
  std::int64_t total = 0;
  std::int64_t undetected = 0;
};

std::int64_t ceil_div(std::int64_t a, std::int64_t b) { return (a + b - 1) / b; }

std::string fmt(double v, int prec = 6) {
  std::ostringstream os;
  os << std::setprecision(prec) << v;
  return os.str();
}

}  // namespace

void SimJob::validate() const {
  if (code.n_c < 2 || !is_power_of_two(code.n_c)) throw std::invalid_argument("n_c must be a power of two >= 2");
  if (code.k < 1) throw std::invalid_argument("k must be positive");
  if (channel == ChannelKind::PhaseNoise && n_pilots < 1) throw std::invalid_argument("phase-noise needs n_pilots >= 1");
  if (stop.max_trials < 1) throw std::invalid_argument("max_trials must be positive");
  if (stop.min_undetected < 0 || stop.min_total < 0) throw std::invalid_argument("error quotas must be non-negative");
  if (workers < 1) throw std::invalid_argument("workers must be at least 1");
  if (shard_count < 1 || shard_index < 0 || shard_index >= shard_count)
    throw std::invalid_argument("shard_index must lie in [0, shard_count)");
  detector.validate(CrcSpec::from_hex(code.crc, code.k));
}

Interval clopper_pearson(std::int64_t events, std::int64_t trials, double confidence) {
  if (trials < 0 || events < 0 || events > trials) throw std::invalid_argument("clopper_pearson: need 0 <= events <= trials");
  if (!(confidence > 0 && confidence < 1)) throw std::invalid_argument("clopper_pearson: confidence in (0, 1)");
  if (trials == 0) return {0.0, 1.0};
  const double a = 1.0 - confidence;
  const auto x = static_cast<double>(events);
  const auto n = static_cast<double>(trials);
  Interval ci;
  ci.lo = events == 0 ? 0.0 : boost::math::ibeta_inv(x, n - x + 1.0, a / 2);
  ci.hi = events == trials ? 1.0 : boost::math::ibeta_inv(x + 1.0, n - x, 1.0 - a / 2);
  return ci;
}

SimResult make_result(std::int64_t trials, std::int64_t total_errors, std::int64_t undetected_errors) {
  if (!(0 <= undetected_errors && undetected_errors <= total_errors && total_errors <= trials))
    throw std::logic_error("inconsistent error counts");
  SimResult r;
  r.trials = trials;
  r.total_errors = total_errors;
  r.undetected_errors = undetected_errors;
  if (trials > 0) {
    r.tep = static_cast<double>(total_errors) / static_cast<double>(trials);
    r.uep = static_cast<double>(undetected_errors) / static_cast<double>(trials);
  }
  r.tep_ci = clopper_pearson(total_errors, trials);
  r.uep_ci = clopper_pearson(undetected_errors, trials);
  return r;
}

CodeContext make_context(const CodeSpec& spec, ChannelKind channel, int n_pilots) {
  CodeContext ctx;
  ctx.crc = CrcSpec::from_hex(spec.crc, spec.k);
  const int h = ctx.crc.codeword_len();
  if (h > spec.n_c) throw std::invalid_argument("k + crc degree exceeds n_c");
  if (!spec.frozen_file.empty()) {
    std::ifstream in(spec.frozen_file);
    if (!in) throw std::runtime_error("cannot open frozen-set file " + spec.frozen_file);
    ctx.code = polar_code_from_frozen(spec.n_c, read_frozen_set(in), spec.design_db);
    if (ctx.code.h != h) throw std::invalid_argument("frozen-set file does not leave k + delta information bits");
  } else {
    ctx.code = design_ga(spec.n_c, h, spec.design_db, static_cast<double>(spec.k) / spec.n_c);
  }
  ctx.channel = channel;
  ctx.n_pilots = channel == ChannelKind::PhaseNoise ? n_pilots : 0;
  if (channel == ChannelKind::PhaseNoise) {
    if (spec.n_c % 2) throw std::invalid_argument("QPSK needs an even block length");
    if (n_pilots < 1) throw std::invalid_argument("phase-noise needs n_pilots >= 1");
  }
  ctx.channel_uses = channel == ChannelKind::BiAwgn ? spec.n_c : spec.n_c / 2;
  ctx.rate = static_cast<double>(spec.k) / ctx.channel_uses;
  return ctx;
}

TrialData run_trial(const CodeContext& ctx, SclDecoder& decoder, double sigma, std::uint64_t seed, std::int64_t t) {
  CounterRng rng(seed, static_cast<std::uint64_t>(t));
  TrialData out;
  out.message = random_message(ctx.crc.message_len, rng);
  const Bits x = polar_encode(crc_encode(out.message, ctx.crc), ctx.code);
  const ObservationBlock obs = ctx.channel == ChannelKind::BiAwgn
                                   ? transmit_biawgn(x, sigma, rng)
                                   : transmit_phase_noise(x, sigma, ctx.n_pilots, rng, std::nullopt);
  out.list = score_list(decoder.decode(obs.bit_llrs), ctx.code, ctx.crc, obs.symbol_logliks);
  return out;
}

Verdict evaluate(const TrialData& trial, const CodeContext& ctx, const DetectorConfig& cfg) {
  std::optional<Bits> accepted;
  switch (cfg.scheme) {
    case Scheme::Reference: accepted = decide_reference(trial.list, ctx.crc); break;
    case Scheme::AlgA: accepted = decide_alg_a(trial.list, split_outer(ctx.crc, cfg.delta1)); break;
    case Scheme::AlgB: accepted = decide_alg_b(trial.list, ctx.crc, cfg.threshold_T); break;
  }
  return classify(accepted, trial.message).verdict;
}

SimResult run_montecarlo(const SimJob& job) {
  job.validate();
  const auto t0 = Clock::now();
  const CodeContext ctx = make_context(job.code, job.channel, job.n_pilots);
  const double sigma = ctx.sigma(job.ebn0_db);

  // Global batch b covers trials [b * kBatch, (b + 1) * kBatch); shard s owns b = s (mod shards).
  const std::int64_t global_batches = ceil_div(job.stop.max_trials, kBatch);
  const std::int64_t shards = job.shard_count;
  const std::int64_t own = global_batches > job.shard_index ? ceil_div(global_batches - job.shard_index, shards) : 0;
  const std::int64_t quota_u = ceil_div(job.stop.min_undetected, shards);
  const std::int64_t quota_t = ceil_div(job.stop.min_total, shards);

  Counts acc;
  bool quota_hit = false;
  run_batches<Counts>(
      own, job.workers,
      [&](std::int64_t i) {
        const std::int64_t b = job.shard_index + i * shards;
        const std::int64_t end = std::min((b + 1) * kBatch, job.stop.max_trials);
        SclDecoder dec(ctx.code, job.detector.list_size);
        Counts c;
        for (std::int64_t t = b * kBatch; t < end; ++t) {
          const Verdict v = evaluate(run_trial(ctx, dec, sigma, job.seed, t), ctx, job.detector);
          ++c.trials;
          if (v != Verdict::Correct) ++c.total;
          if (v == Verdict::Undetected) ++c.undetected;
        }
        return c;
      },
      [&](const Counts& c) {
        acc.trials += c.trials;
        acc.total += c.total;
        acc.undetected += c.undetected;
      },
      [&] {
        quota_hit = (quota_u > 0 && acc.undetected >= quota_u) || (quota_t > 0 && acc.total >= quota_t);
        return quota_hit;
      });

  SimResult r = make_result(acc.trials, acc.total, acc.undetected);
  r.params_used = job.detector;
  r.budget_exhausted = !quota_hit;
  r.wall_time = seconds_since(t0);
  return r;
}

SimResult merge_shards(std::span<const SimResult> parts) {
  Counts c;
  double wall = 0.0;
  bool exhausted = true;
  for (const auto& p : parts) {
    c.trials += p.trials;
    c.total += p.total_errors;
    c.undetected += p.undetected_errors;
    wall = std::max(wall, p.wall_time);
    exhausted = exhausted && p.budget_exhausted;
  }
  SimResult r = make_result(c.trials, c.total, c.undetected);
  if (!parts.empty()) r.params_used = parts.front().params_used;
  r.wall_time = wall;
  r.budget_exhausted = exhausted;
  return r;
}

// ---------------------------------------------------------------- threshold search

void PointStats::merge(const PointStats& o) {
  trials += o.trials;
  reference[0] += o.reference[0];
  reference[1] += o.reference[1];
  if (alg_a.size() < o.alg_a.size()) alg_a.resize(o.alg_a.size());
  for (std::size_t i = 0; i < o.alg_a.size(); ++i) {
    alg_a[i][0] += o.alg_a[i][0];
    alg_a[i][1] += o.alg_a[i][1];
  }
  b_empty += o.b_empty;
  b_single_wrong += o.b_single_wrong;
  b_records.insert(b_records.end(), o.b_records.begin(), o.b_records.end());
  wall_time += o.wall_time;
}

namespace {

bool meets(const SimResult& r, const Targets& t) { return r.tep_ci.hi <= t.eps_t && r.uep_ci.hi <= t.eps_u; }
bool hopeless(const SimResult& r, const Targets& t) { return r.tep_ci.lo > t.eps_t || r.uep_ci.lo > t.eps_u; }

double score(const SimResult& r, const Targets& t) { return std::max(r.tep_ci.hi / t.eps_t, r.uep_ci.hi / t.eps_u); }

// Case-3 records sorted by the statistic, with the count of wrong argmaxes
// at or above every position.
struct RecordIndex {
  std::vector<double> stat;
  std::vector<std::int64_t> wrong_from;  // wrong_from[i] = wrong among records i..end

  explicit RecordIndex(std::vector<std::pair<double, bool>> recs) {
    std::sort(recs.begin(), recs.end());
    stat.reserve(recs.size());
    wrong_from.assign(recs.size() + 1, 0);
    for (const auto& r : recs) stat.push_back(r.first);
    for (std::size_t i = recs.size(); i-- > 0;) wrong_from[i] = wrong_from[i + 1] + (recs[i].second ? 1 : 0);
  }

  // Records with statistic >= tau are accepted.
  std::size_t first_accepted(double tau) const {
    return static_cast<std::size_t>(std::lower_bound(stat.begin(), stat.end(), tau) - stat.begin());
  }
};

struct BCounts {
  std::int64_t total;
  std::int64_t undetected;
};

BCounts b_counts(const PointStats& p, const RecordIndex& idx, double tau) {
  const std::size_t i = idx.first_accepted(tau);
  const std::int64_t wrong_acc = idx.wrong_from[i];
  return {p.b_empty + p.b_single_wrong + static_cast<std::int64_t>(i) + wrong_acc, p.b_single_wrong + wrong_acc};
}

// Smallest tau >= 0 on the integer grid, then refined by bisection in the
// last cell, for which `ok(undetected)` holds. Empty when no tau works.
template <class Ok>
std::optional<double> smallest_tau(const PointStats& p, const RecordIndex& idx, Ok&& ok) {
  const double top = idx.stat.empty() ? 0.0 : std::max(0.0, idx.stat.back());
  auto good = [&](double tau) { return ok(b_counts(p, idx, tau).undetected); };
  double hi = -1.0;
  for (double m = 0.0;; m += 1.0) {
    if (good(m)) {
      hi = m;
      break;
    }
    if (m > top) return std::nullopt;
  }
  if (hi == 0.0) return 0.0;
  double lo = hi - 1.0;
  while (hi - lo > 1e-6) {
    const double mid = 0.5 * (lo + hi);
    (good(mid) ? hi : lo) = mid;
  }
  return hi;
}

}  // namespace

SchemeChoice choose_reference(const PointStats& p, int list_size, const Targets& t) {
  SchemeChoice c;
  c.params.scheme = Scheme::Reference;
  c.params.list_size = list_size;
  c.result = make_result(p.trials, p.reference[0], p.reference[1]);
  c.result.params_used = c.params;
  c.pass = meets(c.result, t);
  c.fail_certain = hopeless(c.result, t);
  return c;
}

SchemeChoice choose_alg_a(const PointStats& p, int list_size, const Targets& t) {
  SchemeChoice best;
  bool have = false;
  bool all_hopeless = true;
  for (std::size_t d1 = 0; d1 < p.alg_a.size(); ++d1) {
    SchemeChoice c;
    c.params.scheme = Scheme::AlgA;
    c.params.list_size = list_size;
    c.params.delta1 = static_cast<int>(d1);
    c.result = make_result(p.trials, p.alg_a[d1][0], p.alg_a[d1][1]);
    c.result.params_used = c.params;
    c.pass = meets(c.result, t);
    all_hopeless = all_hopeless && hopeless(c.result, t);
    const bool better = !have || (c.pass && !best.pass) ||
                        (c.pass == best.pass && (c.pass ? c.result.tep < best.result.tep
                                                        : score(c.result, t) < score(best.result, t)));
    if (better) {
      best = c;
      have = true;
    }
  }
  best.fail_certain = all_hopeless;
  return best;
}

SchemeChoice choose_alg_b(const PointStats& p, int list_size, int channel_uses, const Targets& t) {
  SchemeChoice c;
  c.params.scheme = Scheme::AlgB;
  c.params.list_size = list_size;
  const RecordIndex idx(p.b_records);
  const double n = channel_uses;

  auto tau = smallest_tau(p, idx, [&](std::int64_t u) { return clopper_pearson(u, p.trials).hi <= t.eps_u; });
  if (!tau) {
    // no T meets the UEP bound; report the largest useful T
    tau = idx.stat.empty() ? 0.0 : std::max(0.0, std::ceil(idx.stat.back() + 1.0));
  }
  const BCounts bc = b_counts(p, idx, *tau);
  c.params.threshold_T = *tau / n;
  c.result = make_result(p.trials, bc.total, bc.undetected);
  c.result.params_used = c.params;
  c.pass = meets(c.result, t);

  // TEP grows with T and UEP shrinks, so the optimistic check sits at the
  // smallest T whose UEP lower bound meets the target.
  const auto tau_opt = smallest_tau(p, idx, [&](std::int64_t u) { return clopper_pearson(u, p.trials).lo <= t.eps_u; });
  c.fail_certain = !tau_opt || clopper_pearson(b_counts(p, idx, *tau_opt).total, p.trials).lo > t.eps_t;
  return c;
}

SchemeChoice choose(Scheme s, const PointStats& p, int list_size, int channel_uses, const Targets& t) {
  switch (s) {
    case Scheme::Reference: return choose_reference(p, list_size, t);
    case Scheme::AlgA: return choose_alg_a(p, list_size, t);
    case Scheme::AlgB: return choose_alg_b(p, list_size, channel_uses, t);
  }
  throw std::logic_error("unknown scheme");
}

ThresholdCampaign::ThresholdCampaign(CodeContext ctx, int list_size, Targets targets, ThresholdSimOptions opts,
                                     std::vector<Scheme> schemes)
    : ctx_(std::move(ctx)), list_size_(list_size), targets_(targets), opts_(opts), schemes_(std::move(schemes)) {
  if (list_size_ < 1) throw std::invalid_argument("list_size must be at least 1");
  if (!(targets_.eps_u <= targets_.eps_t)) throw std::invalid_argument("targets need eps_u <= eps_t");
  if (!(opts_.tol_db > 0) || !(opts_.lo_db < opts_.hi_db)) throw std::invalid_argument("bad SNR bracket");
  if (opts_.max_trials < 1) throw std::invalid_argument("max_trials must be positive");
}

bool ThresholdCampaign::decided(const PointStats& p) const {
  if (p.trials < opts_.min_trials) return false;
  for (Scheme s : schemes_) {
    const auto c = choose(s, p, list_size_, ctx_.channel_uses, targets_);
    if (!c.pass && !c.fail_certain) return false;
  }
  return true;
}

const PointStats& ThresholdCampaign::point(double ebn0_db) {
  const double key = std::round(ebn0_db * 1e6) / 1e6;
  if (auto it = cache_.find(key); it != cache_.end()) return it->second;

  const auto t0 = Clock::now();
  const double sigma = ctx_.sigma(key);
  const int delta = ctx_.crc.delta;
  PointStats acc;
  acc.ebn0_db = key;
  acc.alg_a.assign(static_cast<std::size_t>(delta + 1), {0, 0});
  std::int64_t since_check = 0;
  const std::int64_t check_every = 64 * kBatch;

  run_batches<PointStats>(
      ceil_div(opts_.max_trials, kBatch), opts_.workers,
      [&](std::int64_t b) {
        const std::int64_t end = std::min((b + 1) * kBatch, opts_.max_trials);
        SclDecoder dec(ctx_.code, list_size_);
        PointStats ps;
        ps.alg_a.assign(static_cast<std::size_t>(delta + 1), {0, 0});
        auto tally = [](std::array<std::int64_t, 2>& slot, const std::optional<Bits>& acc_word, const Bits& truth) {
          const Verdict v = classify(acc_word, truth).verdict;
          if (v != Verdict::Correct) ++slot[0];
          if (v == Verdict::Undetected) ++slot[1];
        };
        for (std::int64_t t = b * kBatch; t < end; ++t) {
          const TrialData trial = run_trial(ctx_, dec, sigma, opts_.seed, t);
          ++ps.trials;
          tally(ps.reference, decide_reference(trial.list, ctx_.crc), trial.message);
          for (int d1 = 0; d1 <= delta; ++d1)
            tally(ps.alg_a[static_cast<std::size_t>(d1)], decide_alg_a(trial.list, split_outer(ctx_.crc, d1)),
                  trial.message);
          const ThresholdStatistic st = threshold_statistic(trial.list, ctx_.crc);
          if (!st.best) {
            ++ps.b_empty;
            continue;
          }
          const Bits word = message_of(trial.list.entries[*st.best].info, ctx_.crc);
          const bool wrong = word != trial.message;
          if (st.list_count == 1) {
            if (wrong) ++ps.b_single_wrong;
          } else {
            ps.b_records.emplace_back(st.log2_ratio, wrong);
          }
        }
        return ps;
      },
      [&](const PointStats& ps) {
        acc.merge(ps);
        since_check += ps.trials;
      },
      [&] {
        if (since_check < check_every) return false;
        since_check = 0;
        return decided(acc);
      });

  acc.wall_time = seconds_since(t0);
  return cache_.emplace(key, std::move(acc)).first->second;
}

ThresholdSimResult ThresholdCampaign::threshold(Scheme s) {
  ThresholdSimResult out;
  out.scheme = s;
  // Bisection on the grid lo + i * tol so that schemes share SNR points.
  const auto grid = [&](std::int64_t i) { return opts_.lo_db + static_cast<double>(i) * opts_.tol_db; };
  std::int64_t lo = 0;
  std::int64_t hi = static_cast<std::int64_t>(std::ceil((opts_.hi_db - opts_.lo_db) / opts_.tol_db - 1e-9));
  auto eval = [&](std::int64_t i) { return choose(s, point(grid(i)), list_size_, ctx_.channel_uses, targets_); };

  const SchemeChoice at_hi = eval(hi);
  if (!at_hi.pass) {
    out.diagnostics = to_string(s) + ": targets not met at upper bracket " + fmt(grid(hi)) + " dB (tep_hi " +
                      fmt(at_hi.result.tep_ci.hi) + ", uep_hi " + fmt(at_hi.result.uep_ci.hi) + ", trials " +
                      std::to_string(at_hi.result.trials) + ")";
    out.at_threshold = at_hi;
    out.ebn0_db = grid(hi);
    return out;
  }
  const SchemeChoice at_lo = eval(lo);
  if (at_lo.pass) {
    out.diagnostics = to_string(s) + ": targets already met at lower bracket " + fmt(grid(lo)) + " dB";
    out.at_threshold = at_lo;
    out.ebn0_db = grid(lo);
    return out;
  }
  SchemeChoice best = at_hi;
  while (hi - lo > 1) {
    const std::int64_t mid = (lo + hi) / 2;
    SchemeChoice c = eval(mid);
    if (c.pass) {
      hi = mid;
      best = std::move(c);
    } else {
      lo = mid;
    }
  }
  out.found = true;
  out.ebn0_db = grid(hi);
  out.at_threshold = best;
  return out;
}

ThresholdSimResult snr_threshold_sim(Scheme scheme, const CodeSpec& code, ChannelKind channel, int n_pilots,
                                     int list_size, const Targets& targets, const ThresholdSimOptions& opts) {
  ThresholdCampaign camp(make_context(code, channel, n_pilots), list_size, targets, opts, {scheme});
  return camp.threshold(scheme);
}

// ---------------------------------------------------------------- persistence

std::string csv_header() {
  return "scheme,n,k,L,delta1,delta2,T,channel,n_pilots,ebn0_db,trials,total_errors,undetected_errors,tep,uep,"
         "tep_ci_hi,uep_ci_hi,seed";
}

std::string csv_row(const SimJob& job, const SimResult& r) {
  const DetectorConfig& d = r.params_used;
  const int delta = CrcSpec::from_hex(job.code.crc, job.code.k).delta;
  const int d1 = d.scheme == Scheme::AlgA ? d.delta1 : delta;
  std::ostringstream os;
  os << to_string(d.scheme) << ',' << job.code.n_c << ',' << job.code.k << ',' << d.list_size << ',' << d1 << ','
     << delta - d1 << ',';
  if (d.scheme == Scheme::AlgB) os << (d.threshold_T ? fmt(*d.threshold_T, 10) : "disabled");
  os << ',' << to_string(job.channel) << ',' << (job.channel == ChannelKind::PhaseNoise ? job.n_pilots : 0) << ','
     << fmt(job.ebn0_db, 10) << ',' << r.trials << ',' << r.total_errors << ',' << r.undetected_errors << ','
     << fmt(r.tep, 10) << ',' << fmt(r.uep, 10) << ',' << fmt(r.tep_ci.hi, 10) << ',' << fmt(r.uep_ci.hi, 10) << ','
     << job.seed;
  return os.str();
}

namespace {

void read_detector(const json& j, DetectorConfig& d) {
  if (j.contains("scheme")) d.scheme = parse_scheme(j.at("scheme").get<std::string>());
  if (j.contains("L")) d.list_size = j.at("L").get<int>();
  if (j.contains("delta1")) d.delta1 = j.at("delta1").get<int>();
  if (j.contains("T")) {
    const json& t = j.at("T");
    if (t.is_string()) {
      if (t.get<std::string>() != "disabled") throw std::invalid_argument("T must be a number or \"disabled\"");
      d.threshold_T = kThresholdDisabled;
    } else {
      d.threshold_T = t.get<double>();
    }
  }
}

void read_code(const json& j, CodeSpec& c) {
  if (j.contains("n")) c.n_c = j.at("n").get<int>();
  if (j.contains("k")) c.k = j.at("k").get<int>();
  if (j.contains("crc")) c.crc = j.at("crc").get<std::string>();
  if (j.contains("design_db")) c.design_db = j.at("design_db").get<double>();
  if (j.contains("frozen_file")) c.frozen_file = j.at("frozen_file").get<std::string>();
}

void read_stop(const json& j, StoppingRule& s) {
  if (j.contains("min_undetected")) s.min_undetected = j.at("min_undetected").get<std::int64_t>();
  if (j.contains("min_total")) s.min_total = j.at("min_total").get<std::int64_t>();
  if (j.contains("max_trials")) s.max_trials = j.at("max_trials").get<std::int64_t>();
}

void read_channel(const json& j, SimJob& job) {
  if (j.contains("kind")) job.channel = parse_channel_kind(j.at("kind").get<std::string>());
  if (j.contains("n_pilots")) job.n_pilots = j.at("n_pilots").get<int>();
}

json detector_json(const DetectorConfig& d) {
  json j{{"scheme", to_string(d.scheme)}, {"L", d.list_size}};
  if (d.scheme == Scheme::AlgA) j["delta1"] = d.delta1;
  if (d.scheme == Scheme::AlgB) j["T"] = d.threshold_T ? json(*d.threshold_T) : json("disabled");
  return j;
}

std::string cell_id(const SimJob& j) {
  std::ostringstream os;
  os << "n" << j.code.n_c << "_k" << j.code.k << "_L" << j.detector.list_size << "_" << to_string(j.detector.scheme);
  if (j.detector.scheme == Scheme::AlgA) os << "_d" << j.detector.delta1;
  if (j.detector.scheme == Scheme::AlgB)
    os << "_T" << (j.detector.threshold_T ? fmt(*j.detector.threshold_T, 8) : "disabled");
  os << "_" << to_string(j.channel);
  if (j.channel == ChannelKind::PhaseNoise) os << "_p" << j.n_pilots;
  os << "_snr" << std::fixed << std::setprecision(4) << j.ebn0_db;
  return os.str();
}

}  // namespace

SimJob parse_sim_job(const std::string& json_text) {
  const json j = json::parse(json_text);
  SimJob job;
  if (j.contains("code")) read_code(j.at("code"), job.code);
  if (j.contains("detector")) read_detector(j.at("detector"), job.detector);
  if (j.contains("channel")) read_channel(j.at("channel"), job);
  if (j.contains("ebn0_db")) job.ebn0_db = j.at("ebn0_db").get<double>();
  if (j.contains("stop")) read_stop(j.at("stop"), job.stop);
  if (j.contains("seed")) job.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("workers")) job.workers = j.at("workers").get<int>();
  if (j.contains("shard_index")) job.shard_index = j.at("shard_index").get<int>();
  if (j.contains("shard_count")) job.shard_count = j.at("shard_count").get<int>();
  return job;
}

std::string result_json(const SimJob& job, const SimResult& r) {
  const json j{{"code", {{"n", job.code.n_c}, {"k", job.code.k}, {"crc", job.code.crc}}},
               {"detector", detector_json(r.params_used)},
               {"channel", {{"kind", to_string(job.channel)}, {"n_pilots", job.n_pilots}}},
               {"ebn0_db", job.ebn0_db},
               {"seed", job.seed},
               {"trials", r.trials},
               {"total_errors", r.total_errors},
               {"undetected_errors", r.undetected_errors},
               {"tep", r.tep},
               {"uep", r.uep},
               {"tep_ci", {r.tep_ci.lo, r.tep_ci.hi}},
               {"uep_ci", {r.uep_ci.lo, r.uep_ci.hi}},
               {"budget_exhausted", r.budget_exhausted},
               {"wall_time", r.wall_time}};
  return j.dump(2);
}

SweepSummary sweep(const std::string& config_json, const std::filesystem::path& out_dir, int workers_override) {
  namespace fs = std::filesystem;
  const json cfg = json::parse(config_json);
  SimJob base;
  if (cfg.contains("stop")) read_stop(cfg.at("stop"), base.stop);
  if (cfg.contains("seed")) base.seed = cfg.at("seed").get<std::uint64_t>();
  if (cfg.contains("workers")) base.workers = cfg.at("workers").get<int>();
  if (workers_override > 0) base.workers = workers_override;

  auto axis = [&](const char* key) { return cfg.contains(key) ? cfg.at(key) : json::array(); };
  std::vector<SimJob> jobs;
  for (const auto& code : axis("codes"))
    for (const auto& L : axis("list_sizes"))
      for (const auto& det : axis("schemes"))
        for (const auto& ch : axis("channels"))
          for (const auto& snr : axis("snr_db")) {
            SimJob j = base;
            read_code(code, j.code);
            read_detector(det, j.detector);
            j.detector.list_size = L.get<int>();
            read_channel(ch, j);
            j.ebn0_db = snr.get<double>();
            jobs.push_back(j);
          }

  const fs::path cells = out_dir / "cells";
  fs::create_directories(cells);
  SweepSummary sum;
  sum.cells = static_cast<int>(jobs.size());
  sum.table = out_dir / "results.csv";

  for (const auto& job : jobs) {
    const std::string id = cell_id(job);
    const fs::path done = cells / (id + ".csv");
    const fs::path err = cells / (id + ".err");
    if (fs::exists(done)) {
      ++sum.skipped;
      continue;
    }
    try {
      const SimResult r = run_montecarlo(job);
      const fs::path tmp = cells / (id + ".tmp");
      std::ofstream(tmp) << csv_row(job, r) << '\n';
      fs::rename(tmp, done);
      fs::remove(err);
      ++sum.ran;
    } catch (const std::exception& e) {
      std::ofstream(err) << e.what() << '\n';
      ++sum.failed;
    }
  }

  std::ostringstream table;
  table << csv_header() << '\n';
  for (const auto& job : jobs) {
    std::ifstream in(cells / (cell_id(job) + ".csv"));
    std::string line;
    if (in && std::getline(in, line)) table << line << '\n';
  }
  const std::string content = table.str();
  std::ifstream old(sum.table);
  const std::string previous((std::istreambuf_iterator<char>(old)), std::istreambuf_iterator<char>());
  if (previous != content) std::ofstream(sum.table) << content;
  return sum;
}

}  // namespace ued
