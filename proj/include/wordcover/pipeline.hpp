#pragma once

#include <chrono>
#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "wordcover/config.hpp"
#include "wordcover/cover.hpp"
#include "wordcover/io.hpp"
#include "wordcover/nn_index.hpp"
#include "wordcover/persistence.hpp"
#include "wordcover/spectral.hpp"
#include "wordcover/transport.hpp"

namespace wordcover {

/// Exit-code contract: 0 = all enabled checks pass, 1 = config error,
/// 2 = check failure or partial results, 3 = budget exceeded.
enum ExitCode : int {
  kExitOk = 0,
  kExitConfigError = 1,
  kExitCheckFailed = 2,
  kExitBudgetExceeded = 3,
};

struct ReportBundle {
  json report;
  bool all_passed = true;
  bool partial = false;
  bool budget_exceeded = false;
  std::string cloud_path;
  std::string report_path;

  int exit_code() const {
    if (budget_exceeded) return kExitBudgetExceeded;
    if (partial || !all_passed) return kExitCheckFailed;
    return kExitOk;
  }
};

namespace detail {

inline PointCloud uniform_reference(const SpaceSpec& spec, long long size,
                                    std::uint64_t seed) {
  PointCloud ref;
  ref.space = spec;
  ref.provenance.seed = seed;
  ref.points.resize(size);
  parallel_for(static_cast<std::size_t>(size), [&](std::size_t i) {
    RngStream rng = RngStream::derive(seed, i);
    ref.points[i] = uniform_sample(spec, rng);
  });
  return ref;
}

inline PointCloud subsample(const PointCloud& cloud, std::size_t target) {
  if (cloud.size() <= target) return cloud;
  PointCloud sub;
  sub.space = cloud.space;
  sub.provenance = cloud.provenance;
  const double stride =
      static_cast<double>(cloud.size()) / static_cast<double>(target);
  for (std::size_t i = 0; i < target; ++i)
    sub.points.push_back(cloud.points[static_cast<std::size_t>(i * stride)]);
  return sub;
}

inline std::string iso_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

}  // namespace detail

/// Covering-radius verification: the cloud against a fresh uniform
/// reference, with the r_target threshold and density diagnostics.
inline json verify_cover_check(const PointCloud& cloud, double r_target_value,
                               long long reference_size, std::uint64_t seed) {
  const SpaceSpec& spec = cloud.space;
  const PointCloud reference =
      detail::uniform_reference(spec, reference_size, seed);
  const double radius = covering_radius(cloud, reference);
  double sep = std::numeric_limits<double>::quiet_NaN();
  if (cloud.size() >= 2) sep = separation(cloud);

  // Density diagnostic: covering radius of one half of the reference
  // against the other half, an indication of the reference resolution.
  PointCloud half_a, half_b;
  half_a.space = spec;
  half_b.space = spec;
  for (std::size_t i = 0; i < reference.size(); ++i)
    (i % 2 == 0 ? half_a : half_b).points.push_back(reference.points[i]);
  double self_radius = std::numeric_limits<double>::quiet_NaN();
  if (!half_a.empty() && !half_b.empty())
    self_radius = covering_radius(half_a, half_b);

  json out;
  out["covering_radius"] = radius;
  out["r_target"] = r_target_value;
  out["separation"] = sep;
  out["reference_size"] = reference_size;
  out["reference_self_radius"] = self_radius;
  out["pass"] = radius <= r_target_value;
  out["threshold"] = {{"kind", "covering_radius <= r_target"},
                      {"value", r_target_value}};
  return out;
}

/// W1 verification: the (subsampled) cloud against a uniform reference,
/// plus the Lipschitz-integration duality check on the same pair.
/// Primary threshold 2 sqrt(d eps) + 2/sqrt(reference); the tighter
/// 2 sqrt(d) eps form is reported alongside.
inline json verify_w1_check(const PointCloud& cloud, double epsilon,
                            const std::string& method, double reg,
                            long long reference_size, std::uint64_t seed) {
  const SpaceSpec& spec = cloud.space;
  const PointCloud mu = detail::subsample(cloud, 1200);
  const PointCloud reference =
      detail::uniform_reference(spec, reference_size, seed);

  TransportResult tr;
  if (method == "exact") {
    tr = wasserstein1_exact(mu, reference);
  } else {
    // The check threshold carries an explicit sampling-slack term, so a
    // 1e-5 marginal tolerance already leaves the value error orders of
    // magnitude below it.
    SinkhornOptions opt;
    opt.max_iters = 3000;
    opt.marginal_tol = 1e-5;
    tr = wasserstein1_sinkhorn(mu, reference, reg, opt);
  }

  std::vector<Point> anchors;
  anchors.push_back(origin(spec));
  for (int i = 0; i < 7; ++i) {
    RngStream rng = RngStream::derive(seed ^ 0xa17c0a75ULL, i);
    anchors.push_back(uniform_sample(spec, rng));
  }
  const auto gaps = lipschitz_gap(mu, anchors, reference);
  double max_gap = 0.0;
  for (const auto& [id, gap] : gaps) max_gap = std::max(max_gap, gap);

  const double slack = 2.0 / std::sqrt(static_cast<double>(reference_size));
  const double primary = 2.0 * std::sqrt(spec.dim_m * epsilon) + slack;
  const double secondary = 2.0 * std::sqrt(static_cast<double>(spec.dim_m)) * epsilon + slack;

  json out;
  out["w1"] = {{"value", tr.value},
               {"method", method},
               {"reg", method == "sinkhorn" ? reg : 0.0},
               {"gap_bound", tr.gap_bound},
               {"converged", tr.converged}};
  json gap_list = json::array();
  for (const auto& [id, gap] : gaps)
    gap_list.push_back(json{{"fn_id", id}, {"gap", gap}});
  out["lipschitz_gaps"] = gap_list;
  out["max_lipschitz_gap"] = max_gap;
  out["subsampled_to"] = mu.size();
  out["reference_size"] = reference_size;
  out["threshold"] = {
      {"kind", "W1 <= 2 sqrt(d eps) + 2/sqrt(m)"},
      {"value", primary},
      {"secondary_kind", "W1 <= 2 sqrt(d) eps + 2/sqrt(m)"},
      {"secondary_value", secondary},
      {"sampling_slack", slack}};
  const bool duality_ok = max_gap <= tr.value + 1e-9;
  out["duality_ok"] = duality_ok;
  out["pass"] = (tr.value <= primary) && duality_ok;
  return out;
}

/// Design-discrepancy verification at lambda_r (pass threshold upsilon is
/// optional: without it the check is report-only).
inline json verify_design_check(const PointCloud& cloud, double lambda_r,
                                std::optional<double> upsilon) {
  const EigenBasis basis = build_basis(cloud.space, lambda_r);
  const DesignDiscrepancy d = design_discrepancy(cloud, basis, lambda_r);
  json per_block = json::array();
  for (const auto& [lambda, norm] : d.per_block)
    per_block.push_back(json{{"lambda", lambda}, {"value", norm}});
  json out;
  out["worst"] = d.worst;
  out["per_block"] = per_block;
  out["total_dim"] = basis.total_dim();
  out["convention"] = "exp(-lambda*t)";
  // The design calculators guarantee 3*upsilon in the worst case; the
  // factor-3 slack is reported, not absorbed into the threshold.
  out["calculator_slack_factor"] = 3.0;
  if (upsilon) {
    out["threshold"] = {{"kind", "worst <= upsilon"}, {"value", *upsilon}};
    out["pass"] = d.worst <= *upsilon;
  } else {
    out["threshold"] = {{"kind", "report-only"}};
    out["pass"] = true;
  }
  return out;
}

/// Spectral-gap verification over one or more alphabet seeds; pass when at
/// least 90% of the seeds land inside [1/4, 3/4].
inline json verify_gap_check(const SpaceSpec& spec, long long k,
                             double lambda_max, long long seeds,
                             std::uint64_t master_seed) {
  const EigenBasis basis = build_basis(spec, lambda_max);
  json per_seed = json::array();
  long long passed = 0;
  for (long long s = 0; s < seeds; ++s) {
    const Alphabet alphabet = generate_alphabet(
        spec, k, RngStream::derive(master_seed, 7000 + s).next_u64());
    const SpectralGapResult r = spectral_gap_check(alphabet, basis);
    per_seed.push_back(json{{"seed_index", s},
                            {"min_eig", r.min_eig},
                            {"max_eig", r.max_eig},
                            {"pass", r.pass}});
    if (r.pass) ++passed;
  }
  json out;
  out["k"] = k;
  out["lambda_max"] = lambda_max;
  out["total_dim"] = basis.total_dim();
  out["seeds"] = seeds;
  out["passed_seeds"] = passed;
  out["per_seed"] = per_seed;
  out["threshold"] = {{"kind", "eigenvalues in [1/4, 3/4] for >= 90% of seeds"},
                      {"value", 0.9}};
  out["pass"] = passed * 10 >= seeds * 9;
  return out;
}

/// Coupled persistence experiment; pass when the empirical violation
/// frequency stays below the n * eps_q bound.
inline json verify_persist_check(const PointCloud& cloud, long long n, int q,
                                 long long trials, std::uint64_t seed,
                                 long long reference_size) {
  const CouplingReport rep = coupled_diagram_experiment(
      cloud.space, cloud, n, q, trials, seed, std::nullopt, reference_size);
  json samples = json::array();
  for (double d : rep.bottleneck_samples) samples.push_back(d);
  json out;
  out["n"] = rep.n;
  out["q"] = q;
  out["trials"] = rep.trials;
  out["w1_estimate"] = rep.w1_estimate;
  out["eps_q"] = rep.eps_q;
  out["bound"] = rep.bound;
  out["violations"] = rep.violations;
  out["violation_frequency"] = rep.violation_frequency();
  out["violation_frequency_normalized"] = rep.violation_frequency() / rep.n;
  out["bottleneck_samples"] = samples;
  out["threshold"] = {{"kind", "violation_frequency <= n*eps_q"},
                      {"value", rep.bound}};
  out["pass"] = rep.violation_frequency() <= rep.bound;
  return out;
}

/// Generate-and-verify pipeline. Deterministic given (config, seed): the
/// report is byte-identical across runs and thread counts except for the
/// timestamp field. Writes cloud.csv (+ header), report.json, and one CSV
/// series row per enabled check for external plotting.
inline ReportBundle run_pipeline(const RunConfig& cfg) {
  namespace fs = std::filesystem;
  const SpaceSpec spec = cfg.make_space_spec();
  const CoverParams params =
      resolve_cover_params(cfg.epsilon, cfg.delta, spec, cfg.k, cfg.ell);

  fs::create_directories(cfg.out_dir);
  ReportBundle bundle;
  json& report = bundle.report;
  report["schema_version"] = 1;
  report["timestamp"] = detail::iso_timestamp();
  report["config"] = json::parse(emit_config(cfg));
  report["space"] = space_to_json(spec);
  report["params"] = {{"epsilon", params.epsilon},
                      {"delta", params.delta},
                      {"k", params.k},
                      {"ell", params.ell},
                      {"r_target", params.r_target},
                      {"exploratory_epsilon", params.exploratory_epsilon},
                      {"formula_variant", "sec4"},
                      {"conventions",
                       {{"heat_time", "exp(-lambda*t)"},
                        {"vr_inclusion", "<="},
                        {"field", "Z/2"}}}};

  const Alphabet alphabet = generate_alphabet(spec, params.k, cfg.seed);
  PointCloud cloud;
  try {
    cloud = enumerate_cloud(spec, alphabet, params.ell, origin(spec), cfg.cap,
                            cfg.dedup_tol);
  } catch (const OverflowGuard& e) {
    bundle.budget_exceeded = true;
    report["error"] = e.what();
    bundle.report_path = cfg.out_dir + "/report.json";
    write_text_file(bundle.report_path, report.dump(2) + "\n");
    return bundle;
  }

  bundle.cloud_path = cfg.out_dir + "/cloud.csv";
  write_cloud_csv(bundle.cloud_path, cloud);
  report["cloud"] = {{"path", "cloud.csv"},
                     {"size", cloud.size()},
                     {"capped", cloud.provenance.capped}};

  json checks = json::object();
  const auto run_check = [&](const char* name, bool enabled, auto&& fn) {
    if (!enabled) return;
    try {
      checks[name] = fn();
      if (!checks[name].value("pass", false)) bundle.all_passed = false;
    } catch (const BudgetExceeded& e) {
      checks[name] = {{"error", e.what()}};
      bundle.budget_exceeded = true;
      bundle.partial = true;
    } catch (const DimensionBudgetExceeded& e) {
      checks[name] = {{"error", e.what()}};
      bundle.budget_exceeded = true;
      bundle.partial = true;
    } catch (const SizeLimitExceeded& e) {
      checks[name] = {{"error", e.what()}};
      bundle.budget_exceeded = true;
      bundle.partial = true;
    } catch (const Error& e) {
      checks[name] = {{"error", e.what()}};
      bundle.partial = true;
    }
  };

  run_check("cover", cfg.checks.cover, [&] {
    return verify_cover_check(cloud, params.r_target, cfg.reference_size,
                              RngStream::derive(cfg.seed, 101).next_u64());
  });
  run_check("w1", cfg.checks.w1, [&] {
    return verify_w1_check(cloud, params.epsilon, cfg.checks.w1_method,
                           cfg.checks.w1_reg, cfg.reference_size,
                           RngStream::derive(cfg.seed, 202).next_u64());
  });
  run_check("design", cfg.checks.design, [&] {
    return verify_design_check(cloud, cfg.checks.design_lambda_r,
                               cfg.checks.design_upsilon);
  });
  run_check("gap", cfg.checks.gap, [&] {
    return verify_gap_check(spec, params.k, cfg.checks.gap_lambda_max,
                            cfg.checks.gap_seeds, cfg.seed);
  });
  run_check("persist", cfg.checks.persist, [&] {
    return verify_persist_check(cloud, cfg.checks.persist_n,
                                cfg.checks.persist_q, cfg.checks.persist_trials,
                                RngStream::derive(cfg.seed, 303).next_u64(),
                                cfg.reference_size);
  });
  report["checks"] = checks;
  report["all_passed"] = bundle.all_passed && !bundle.partial;
  report["partial"] = bundle.partial;

  // Plot-ready one-row series per enabled check.
  if (cfg.checks.cover && checks.contains("cover") &&
      !checks["cover"].contains("error")) {
    write_text_file(cfg.out_dir + "/series_covering_radius.csv",
                    "ell,covering_radius\n" + std::to_string(params.ell) + "," +
                        format_double17(
                            checks["cover"]["covering_radius"].get<double>()) +
                        "\n");
  }
  if (cfg.checks.w1 && checks.contains("w1") && !checks["w1"].contains("error")) {
    write_text_file(
        cfg.out_dir + "/series_w1.csv",
        "ell,w1\n" + std::to_string(params.ell) + "," +
            format_double17(checks["w1"]["w1"]["value"].get<double>()) + "\n");
  }
  if (cfg.checks.design && checks.contains("design") &&
      !checks["design"].contains("error")) {
    write_text_file(
        cfg.out_dir + "/series_design.csv",
        "ell,design_worst\n" + std::to_string(params.ell) + "," +
            format_double17(checks["design"]["worst"].get<double>()) + "\n");
  }

  bundle.report_path = cfg.out_dir + "/report.json";
  write_text_file(bundle.report_path, report.dump(2) + "\n");
  return bundle;
}

/// ell-sweep (and optional seed replicas): per (seed, ell) generates the
/// orbit with a fixed alphabet per seed and records covering radius plus
/// any enabled quick metrics as plot-ready CSV series.
inline json run_sweep(const RunConfig& cfg, long long ell_from, long long ell_to,
                      long long seed_count) {
  namespace fs = std::filesystem;
  if (ell_from < 1 || ell_to < ell_from) throw Error("bad ell sweep range");
  if (seed_count < 1) throw Error("seed_count must be >= 1");
  const SpaceSpec spec = cfg.make_space_spec();
  const CoverParams params =
      resolve_cover_params(cfg.epsilon, cfg.delta, spec, cfg.k, cfg.ell);
  fs::create_directories(cfg.out_dir);

  struct Row {
    long long seed_index, ell;
    double covering_radius, w1, design_worst;
    std::size_t cloud_size;
  };
  const long long n_ells = ell_to - ell_from + 1;
  std::vector<Row> rows(seed_count * n_ells);

  // Seed replicas are fully isolated and write to preassigned row slots.
  parallel_for(static_cast<std::size_t>(seed_count), [&](std::size_t s_idx) {
    const long long s = static_cast<long long>(s_idx);
    const std::uint64_t seed = RngStream::derive(cfg.seed, 9000 + s).next_u64();
    const Alphabet alphabet = generate_alphabet(spec, params.k, seed);
    const PointCloud reference = detail::uniform_reference(
        spec, cfg.reference_size, RngStream::derive(seed, 77).next_u64());
    for (long long e = 0; e < n_ells; ++e) {
      const long long ell = ell_from + e;
      const PointCloud cloud = enumerate_cloud(spec, alphabet, ell,
                                               origin(spec), cfg.cap,
                                               cfg.dedup_tol);
      Row row{};
      row.seed_index = s;
      row.ell = ell;
      row.cloud_size = cloud.size();
      row.covering_radius = covering_radius(cloud, reference);
      row.w1 = std::numeric_limits<double>::quiet_NaN();
      row.design_worst = std::numeric_limits<double>::quiet_NaN();
      if (cfg.checks.w1)
        row.w1 = wasserstein1_sinkhorn(detail::subsample(cloud, 2000),
                                       reference, cfg.checks.w1_reg)
                     .value;
      if (cfg.checks.design) {
        const EigenBasis basis =
            build_basis(spec, cfg.checks.design_lambda_r);
        row.design_worst =
            design_discrepancy(cloud, basis, cfg.checks.design_lambda_r).worst;
      }
      rows[s * n_ells + e] = row;
    }
  });

  std::string csv = "seed_index,ell,cloud_size,covering_radius,w1,design_worst\n";
  for (const Row& r : rows) {
    csv += std::to_string(r.seed_index) + "," + std::to_string(r.ell) + "," +
           std::to_string(r.cloud_size) + "," +
           format_double17(r.covering_radius) + "," + format_double17(r.w1) +
           "," + format_double17(r.design_worst) + "\n";
  }
  write_text_file(cfg.out_dir + "/sweep.csv", csv);

  // Monotone-trend summary over consecutive ell steps.
  long long steps = 0, nonincreasing = 0;
  for (long long s = 0; s < seed_count; ++s)
    for (long long e = 0; e + 1 < n_ells; ++e) {
      const Row& a = rows[s * n_ells + e];
      const Row& b = rows[s * n_ells + e + 1];
      ++steps;
      if (b.covering_radius <= a.covering_radius) ++nonincreasing;
    }
  json summary;
  summary["rows"] = rows.size();
  summary["ell_from"] = ell_from;
  summary["ell_to"] = ell_to;
  summary["seeds"] = seed_count;
  summary["covering_steps"] = steps;
  summary["covering_nonincreasing_steps"] = nonincreasing;
  summary["csv"] = "sweep.csv";
  write_text_file(cfg.out_dir + "/sweep_summary.json", summary.dump(2) + "\n");
  return summary;
}

/// Merges several report.json files into one summary document.
inline json merge_reports(const std::vector<std::string>& paths) {
  json merged;
  merged["schema_version"] = 1;
  merged["merged"] = true;
  json runs = json::array();
  bool all = true;
  for (const auto& p : paths) {
    json r = json::parse(read_text_file(p));
    all = all && r.value("all_passed", false);
    runs.push_back(json{{"path", p},
                        {"all_passed", r.value("all_passed", false)},
                        {"report", r}});
  }
  merged["runs"] = runs;
  merged["all_passed"] = all;
  return merged;
}

}  // namespace wordcover
