#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "ued/bounds.hpp"
#include "ued/harness.hpp"

using namespace ued;
using json = nlohmann::json;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void emit(const std::string& text, const std::string& out) {
  if (out.empty()) {
    std::cout << text << '\n';
    return;
  }
  std::ofstream f(out);
  if (!f) throw std::runtime_error("cannot write " + out);
  f << text << '\n';
}

Targets parse_targets(const std::string& s) {
  const auto comma = s.find(',');
  if (comma == std::string::npos) throw std::invalid_argument("--targets expects eps_t,eps_u");
  Targets t{std::stod(s.substr(0, comma)), std::stod(s.substr(comma + 1))};
  if (!(t.eps_u <= t.eps_t) || !(t.eps_u > 0)) throw std::invalid_argument("targets need 0 < eps_u <= eps_t");
  return t;
}

json params_json(const BoundParams& p) {
  json j = json::object();
  if (p.delta) j["delta"] = *p.delta;
  if (p.s) j["s"] = *p.s;
  if (p.lambda) j["lambda"] = *p.lambda;
  if (p.T) j["T"] = *p.T;
  return j;
}

json choice_json(const SchemeChoice& c) {
  json d{{"scheme", to_string(c.params.scheme)}, {"L", c.params.list_size}};
  if (c.params.scheme == Scheme::AlgA) d["delta1"] = c.params.delta1;
  if (c.params.scheme == Scheme::AlgB) d["T"] = c.params.threshold_T ? json(*c.params.threshold_T) : json("disabled");
  return {{"params", d},
          {"trials", c.result.trials},
          {"total_errors", c.result.total_errors},
          {"undetected_errors", c.result.undetected_errors},
          {"tep_ci_hi", c.result.tep_ci.hi},
          {"uep_ci_hi", c.result.uep_ci.hi}};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"CRC-aided polar codes with undetected-error control"};
  app.require_subcommand(1);

  std::uint64_t seed = 1;
  int workers = 1;
  std::string out;
  app.add_option("--seed", seed, "master seed")->capture_default_str();
  app.add_option("--workers", workers, "worker threads")->capture_default_str();
  app.add_option("--out", out, "output path (stdout when empty)");

  CodeSpec code;
  auto add_code = [&](CLI::App* sub) {
    sub->add_option("--n", code.n_c, "block length n_c")->capture_default_str();
    sub->add_option("--k", code.k, "message length")->capture_default_str();
    sub->add_option("--crc", code.crc, "CRC polynomial, hex with leading term")->capture_default_str();
    sub->add_option("--design-db", code.design_db, "GA design Eb/N0")->capture_default_str();
    sub->add_option("--frozen", code.frozen_file, "frozen-set file");
  };

  // design
  auto* design = app.add_subcommand("design", "emit the frozen set of the GA design");
  add_code(design);

  // simulate
  auto* simulate = app.add_subcommand("simulate", "one operating point");
  std::string sim_config;
  std::string scheme_name = "reference";
  std::string channel_name = "biawgn";
  std::string T_text;
  SimJob job;
  int shard_index = 0, shard_count = 1;
  simulate->add_option("--config", sim_config, "JSON job file; flags given after it override");
  add_code(simulate);
  simulate->add_option("--scheme", scheme_name, "reference | alg-a | alg-b")->capture_default_str();
  simulate->add_option("--L", job.detector.list_size, "list size")->capture_default_str();
  simulate->add_option("--delta1", job.detector.delta1, "pruning rows for alg-a")->capture_default_str();
  simulate->add_option("--T", T_text, "threshold for alg-b, number or 'disabled'");
  simulate->add_option("--channel", channel_name, "biawgn | phase-noise")->capture_default_str();
  simulate->add_option("--pilots", job.n_pilots, "pilot symbols (phase-noise)")->capture_default_str();
  simulate->add_option("--snr-db", job.ebn0_db, "Eb/N0 in dB")->capture_default_str();
  simulate->add_option("--min-undetected", job.stop.min_undetected)->capture_default_str();
  simulate->add_option("--min-total", job.stop.min_total)->capture_default_str();
  simulate->add_option("--max-trials", job.stop.max_trials)->capture_default_str();
  simulate->add_option("--shard", shard_index, "shard index")->capture_default_str();
  simulate->add_option("--shards", shard_count, "shard count")->capture_default_str();
  bool sim_csv = false;
  simulate->add_flag("--csv", sim_csv, "write a CSV row instead of JSON");

  // threshold
  auto* threshold = app.add_subcommand("threshold", "SNR threshold by simulation");
  add_code(threshold);
  std::string th_schemes = "all";
  std::string th_channel = "biawgn";
  std::string th_targets = "1e-3,1e-5";
  int th_L = 8, th_pilots = 10;
  ThresholdSimOptions th_opts;
  threshold->add_option("--scheme", th_schemes, "reference | alg-a | alg-b | all")->capture_default_str();
  threshold->add_option("--L", th_L)->capture_default_str();
  threshold->add_option("--channel", th_channel)->capture_default_str();
  threshold->add_option("--pilots", th_pilots)->capture_default_str();
  threshold->add_option("--targets", th_targets, "eps_t,eps_u")->capture_default_str();
  threshold->add_option("--lo", th_opts.lo_db)->capture_default_str();
  threshold->add_option("--hi", th_opts.hi_db)->capture_default_str();
  threshold->add_option("--tol", th_opts.tol_db)->capture_default_str();
  threshold->add_option("--max-trials", th_opts.max_trials, "per SNR point")->capture_default_str();
  threshold->add_option("--min-trials", th_opts.min_trials)->capture_default_str();

  // bound
  auto* bound = app.add_subcommand("bound", "finite-length bounds");
  std::string which = "thm2";
  int b_n = 128, b_k = 64, b_pilots = 10;
  std::optional<double> b_snr, b_s, b_lambda, b_T;
  std::optional<int> b_delta;
  std::string b_targets = "1e-3,1e-5";
  std::string b_channel = "biawgn";
  McOptions mc;
  bound->add_option("--which", which, "thm1 | thm2 | forney | rcu")->capture_default_str();
  bound->add_option("--n", b_n, "channel uses")->capture_default_str();
  bound->add_option("--k", b_k)->capture_default_str();
  bound->add_option("--snr-db", b_snr, "evaluate at this Eb/N0; otherwise search the threshold");
  bound->add_option("--targets", b_targets, "eps_t,eps_u")->capture_default_str();
  bound->add_option("--samples", mc.samples)->capture_default_str();
  bound->add_option("--channel", b_channel)->capture_default_str();
  bound->add_option("--pilots", b_pilots)->capture_default_str();
  bound->add_option("--s", b_s, "fixed s for thm2");
  bound->add_option("--lambda", b_lambda, "fixed lambda for thm2 (needs --snr-db)");
  bound->add_option("--delta", b_delta, "delta for thm1");
  bound->add_option("--T", b_T, "threshold for forney");

  // sweep
  auto* sweep_cmd = app.add_subcommand("sweep", "Cartesian grid of operating points");
  std::string sweep_config;
  sweep_cmd->add_option("--config", sweep_config, "JSON grid file")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*design) {
      std::ostringstream os;
      write_frozen_set(os, make_context(code, ChannelKind::BiAwgn, 0).code);
      emit(os.str(), out);
    } else if (*simulate) {
      if (!sim_config.empty()) {
        const SimJob from_file = parse_sim_job(read_file(sim_config));
        // flags left at their defaults take the file's values
        auto keep = [&](const char* flag) { return simulate->count(flag) > 0; };
        const SimJob flags = job;
        job = from_file;
        if (keep("--n")) job.code.n_c = code.n_c;
        if (keep("--k")) job.code.k = code.k;
        if (keep("--crc")) job.code.crc = code.crc;
        if (keep("--design-db")) job.code.design_db = code.design_db;
        if (keep("--frozen")) job.code.frozen_file = code.frozen_file;
        if (keep("--scheme")) job.detector.scheme = parse_scheme(scheme_name);
        if (keep("--L")) job.detector.list_size = flags.detector.list_size;
        if (keep("--delta1")) job.detector.delta1 = flags.detector.delta1;
        if (keep("--channel")) job.channel = parse_channel_kind(channel_name);
        if (keep("--pilots")) job.n_pilots = flags.n_pilots;
        if (keep("--snr-db")) job.ebn0_db = flags.ebn0_db;
        if (keep("--min-undetected")) job.stop.min_undetected = flags.stop.min_undetected;
        if (keep("--min-total")) job.stop.min_total = flags.stop.min_total;
        if (keep("--max-trials")) job.stop.max_trials = flags.stop.max_trials;
        if (app.count("--seed") == 0) seed = job.seed;
        if (app.count("--workers") == 0) workers = job.workers;
      } else {
        job.code = code;
        job.detector.scheme = parse_scheme(scheme_name);
        job.channel = parse_channel_kind(channel_name);
      }
      if (!T_text.empty())
        job.detector.threshold_T = T_text == "disabled" ? kThresholdDisabled : Threshold(std::stod(T_text));
      job.seed = seed;
      job.workers = workers;
      job.shard_index = shard_index;
      job.shard_count = shard_count;
      const SimResult r = run_montecarlo(job);
      emit(sim_csv ? csv_header() + "\n" + csv_row(job, r) : result_json(job, r), out);
      if (r.budget_exhausted) std::cerr << "budget exhausted before the error quotas\n";
    } else if (*threshold) {
      th_opts.seed = seed;
      th_opts.workers = workers;
      const Targets tg = parse_targets(th_targets);
      std::vector<Scheme> schemes;
      if (th_schemes == "all")
        schemes = {Scheme::Reference, Scheme::AlgA, Scheme::AlgB};
      else
        schemes = {parse_scheme(th_schemes)};
      ThresholdCampaign camp(make_context(code, parse_channel_kind(th_channel), th_pilots), th_L, tg, th_opts, schemes);
      json results = json::array();
      for (Scheme s : schemes) {
        const auto r = camp.threshold(s);
        json j{{"scheme", to_string(s)}, {"found", r.found}, {"ebn0_db", r.ebn0_db}, {"at_threshold", choice_json(r.at_threshold)}};
        if (!r.diagnostics.empty()) j["diagnostics"] = r.diagnostics;
        results.push_back(j);
      }
      json points = json::array();
      for (const auto& [db, p] : camp.points()) points.push_back({{"ebn0_db", db}, {"trials", p.trials}, {"wall_time", p.wall_time}});
      const json doc{{"code", {{"n", code.n_c}, {"k", code.k}, {"crc", code.crc}}},
                     {"L", th_L},
                     {"channel", th_channel},
                     {"targets", {tg.eps_t, tg.eps_u}},
                     {"seed", seed},
                     {"thresholds", results},
                     {"points", points}};
      emit(doc.dump(2), out);
    } else if (*bound) {
      const BoundKind kind = parse_bound_kind(which);
      const Targets tg = parse_targets(b_targets);
      mc.seed = seed;
      mc.workers = workers;
      BoundChannel family;
      family.kind = parse_channel_kind(b_channel);
      family.n_pilots = b_pilots;
      const double rate = static_cast<double>(b_k) / b_n;
      json doc{{"which", to_string(kind)}, {"n", b_n}, {"k", b_k}, {"channel", b_channel}};
      BoundResult r;
      if (b_snr) {
        BoundChannel ch = family;
        ch.sigma = snr_to_sigma(*b_snr, rate);
        switch (kind) {
          case BoundKind::Rcu: r = rcu(b_k, b_n, ch, mc); break;
          case BoundKind::Thm1: r = thm1_bounds(b_k, b_n, b_delta.value_or(delta_for_targets(tg)), ch, mc); break;
          case BoundKind::Thm2:
            r = b_lambda ? thm2_bounds(b_k, b_n, b_s.value_or(1.0), *b_lambda, ch, mc)
                         : thm2_at_target(b_k, b_n, tg, ch, mc, b_s);
            break;
          case BoundKind::Forney:
            if (family.kind != ChannelKind::BiAwgn) throw std::invalid_argument("forney is evaluated on biawgn only");
            r = forney_bound(b_n, rate, b_T.value_or(std::log2(tg.eps_t / tg.eps_u) / b_n), quantize_biawgn(ch.sigma));
            break;
        }
        doc["ebn0_db"] = *b_snr;
      } else {
        ThresholdSearch search;
        search.fixed_s = b_s;
        const auto th = snr_threshold_bound(kind, b_n, b_k, tg, family, mc, search);
        r = th.at_threshold;
        doc["found"] = th.found;
        doc["ebn0_db"] = th.ebn0_db;
        doc["targets"] = {tg.eps_t, tg.eps_u};
        if (!th.diagnostics.empty()) doc["diagnostics"] = th.diagnostics;
      }
      doc["params"] = params_json(r.params);
      doc["eps_t"] = r.eps_t;
      doc["eps_u"] = r.eps_u;
      doc["mc_std_err"] = r.mc_std_err;
      doc["samples"] = r.samples;
      emit(doc.dump(2), out);
    } else if (*sweep_cmd) {
      const auto s = sweep(read_file(sweep_config), out.empty() ? "sweep_out" : out, app.count("--workers") ? workers : 0);
      std::cout << "cells " << s.cells << ", ran " << s.ran << ", skipped " << s.skipped << ", failed " << s.failed
                << "\ntable " << s.table.string() << '\n';
      return s.failed ? 2 : 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
