#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ued/bounds.hpp"
#include "ued/channels.hpp"
#include "ued/crc.hpp"
#include "ued/detectors.hpp"
#include "ued/polar.hpp"

namespace ued {

struct CodeSpec {
  int n_c = 128;
  int k = 64;
  std::string crc = "0x89";
  double design_db = 3.0;   // GA design point (biAWGN Eb/N0)
  std::string frozen_file;  // overrides the GA design when set
};

struct StoppingRule {
  std::int64_t min_undetected = 100;
  std::int64_t min_total = 10000;
  std::int64_t max_trials = 1'000'000'000;
};

struct SimJob {
  CodeSpec code;
  DetectorConfig detector;
  ChannelKind channel = ChannelKind::BiAwgn;
  int n_pilots = 10;
  double ebn0_db = 3.0;
  StoppingRule stop;
  std::uint64_t seed = 1;
  int workers = 1;
  int shard_index = 0;
  int shard_count = 1;

  void validate() const;
};

struct Interval {
  double lo = 0.0;
  double hi = 1.0;
};

struct SimResult {
  std::int64_t trials = 0;
  std::int64_t total_errors = 0;
  std::int64_t undetected_errors = 0;
  double tep = 0.0;
  double uep = 0.0;
  Interval tep_ci;
  Interval uep_ci;
  DetectorConfig params_used;
  double wall_time = 0.0;        // seconds
  bool budget_exhausted = false;  // max_trials hit before the error quotas
};

/// Two-sided exact binomial interval at the given confidence.
Interval clopper_pearson(std::int64_t events, std::int64_t trials, double confidence = 0.95);

/// Fills trials/errors and the derived estimates and intervals.
SimResult make_result(std::int64_t trials, std::int64_t total_errors, std::int64_t undetected_errors);

/// Everything fixed for one (code, channel) pair.
struct CodeContext {
  PolarCode code;
  CrcSpec crc;
  ChannelKind channel = ChannelKind::BiAwgn;
  int n_pilots = 0;
  int channel_uses = 0;  // n_c for BPSK, n_c / 2 for QPSK
  double rate = 0.0;     // k / channel_uses, bits per channel use

  double sigma(double ebn0_db) const { return snr_to_sigma(ebn0_db, rate); }
};

CodeContext make_context(const CodeSpec& spec, ChannelKind channel, int n_pilots);

/// One transmitted block decoded once; every scheme is evaluated from this.
struct TrialData {
  Bits message;
  ScoredList list;
};

TrialData run_trial(const CodeContext& ctx, SclDecoder& decoder, double sigma, std::uint64_t seed, std::int64_t t);

/// Verdict of one detector configuration on a decoded trial.
Verdict evaluate(const TrialData& trial, const CodeContext& ctx, const DetectorConfig& cfg);

SimResult run_montecarlo(const SimJob& job);

/// Sums shard results; intervals are recomputed from the merged counts.
SimResult merge_shards(std::span<const SimResult> parts);

// ---------------------------------------------------------------- threshold search

/// Counts at one SNR for every scheme and parameter, from a single decode per trial.
struct PointStats {
  double ebn0_db = 0.0;
  std::int64_t trials = 0;
  std::array<std::int64_t, 2> reference{};        // total, undetected
  std::vector<std::array<std::int64_t, 2>> alg_a;  // per delta1 in [0, delta]
  std::int64_t b_empty = 0;                        // Case 1
  std::int64_t b_single_wrong = 0;                 // Case 2 accepting a wrong word
  std::vector<std::pair<double, bool>> b_records;  // Case 3: (log2 Lambda, argmax wrong)
  double wall_time = 0.0;

  void merge(const PointStats& other);
};

struct SchemeChoice {
  bool pass = false;
  bool fail_certain = false;  // no parameter can pass even at the optimistic CI ends
  DetectorConfig params;
  SimResult result;
};

SchemeChoice choose_reference(const PointStats& p, int list_size, const Targets& t);
SchemeChoice choose_alg_a(const PointStats& p, int list_size, const Targets& t);
/// Smallest T (grid {0, 1/n, 2/n, ...}, then bisection in the last cell) whose
/// UEP upper bound meets the target.
SchemeChoice choose_alg_b(const PointStats& p, int list_size, int channel_uses, const Targets& t);
SchemeChoice choose(Scheme s, const PointStats& p, int list_size, int channel_uses, const Targets& t);

struct ThresholdSimOptions {
  double lo_db = 1.0;
  double hi_db = 6.0;
  double tol_db = 0.05;
  std::int64_t max_trials = 4'000'000;  // per SNR point
  std::int64_t min_trials = 20'000;
  std::uint64_t seed = 1;
  int workers = 1;
};

struct ThresholdSimResult {
  Scheme scheme = Scheme::Reference;
  bool found = false;
  double ebn0_db = 0.0;
  SchemeChoice at_threshold;
  std::string diagnostics;
};

/// Caches PointStats per SNR so that several schemes share the decodes.
class ThresholdCampaign {
 public:
  ThresholdCampaign(CodeContext ctx, int list_size, Targets targets, ThresholdSimOptions opts,
                    std::vector<Scheme> schemes = {Scheme::Reference, Scheme::AlgA, Scheme::AlgB});

  const PointStats& point(double ebn0_db);
  ThresholdSimResult threshold(Scheme s);
  const std::map<double, PointStats>& points() const { return cache_; }
  const CodeContext& context() const { return ctx_; }
  int list_size() const { return list_size_; }

 private:
  bool decided(const PointStats& p) const;

  CodeContext ctx_;
  int list_size_;
  Targets targets_;
  ThresholdSimOptions opts_;
  std::vector<Scheme> schemes_;
  std::map<double, PointStats> cache_;
};

ThresholdSimResult snr_threshold_sim(Scheme scheme, const CodeSpec& code, ChannelKind channel, int n_pilots,
                                     int list_size, const Targets& targets, const ThresholdSimOptions& opts);

// ---------------------------------------------------------------- persistence

std::string csv_header();
std::string csv_row(const SimJob& job, const SimResult& r);

/// JSON job description; absent keys keep the SimJob defaults.
SimJob parse_sim_job(const std::string& json_text);
std::string result_json(const SimJob& job, const SimResult& r);

/// Cartesian sweep described by a JSON document (see README). One CSV row per
/// cell; finished cells leave a marker under <out>/cells and are skipped on rerun.
struct SweepSummary {
  int cells = 0;
  int ran = 0;
  int skipped = 0;
  int failed = 0;
  std::filesystem::path table;
};

SweepSummary sweep(const std::string& config_json, const std::filesystem::path& out_dir, int workers_override = 0);

}  // namespace ued
