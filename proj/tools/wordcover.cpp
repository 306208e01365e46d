// Command-line driver for generating word-orbit covers on symmetric spaces
// and running the verification battery (covering radius, W1, design
// discrepancy, spectral gap, persistence coupling).

#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "wordcover/wordcover.hpp"

namespace wc = wordcover;

namespace {

int failure_exit(const std::exception& e) {
  std::cerr << "error: " << e.what() << "\n";
  return wc::kExitCheckFailed;
}

int budget_exit(const std::exception& e) {
  std::cerr << "budget exceeded: " << e.what() << "\n";
  return wc::kExitBudgetExceeded;
}

void emit_json(const std::optional<std::string>& out_path, const wc::json& j) {
  if (out_path) {
    wc::write_text_file(*out_path, j.dump(2) + "\n");
    std::cout << "wrote " << *out_path << "\n";
  } else {
    std::cout << j.dump(2) << "\n";
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"word-orbit covers on compact symmetric spaces"};
  app.require_subcommand(1);

  // ---- cover generate -----------------------------------------------------
  auto* cover_cmd = app.add_subcommand("cover", "cover construction");
  auto* gen = cover_cmd->add_subcommand("generate", "enumerate a word-orbit cloud");
  std::string gen_space = "sphere2";
  double gen_epsilon = 0.05, gen_delta = 0.1, gen_dedup = 0.0;
  std::uint64_t gen_seed = 42, gen_cap = wc::kDefaultCloudCap;
  std::optional<long long> gen_k, gen_ell;
  std::string gen_out = "cloud.csv";
  gen->add_option("--space", gen_space, "space id (sphere1..sphere6, so3)");
  gen->add_option("--epsilon", gen_epsilon, "target epsilon");
  gen->add_option("--delta", gen_delta, "failure probability budget");
  gen->add_option("--seed", gen_seed, "master seed");
  gen->add_option("--k", gen_k, "override alphabet size");
  gen->add_option("--ell", gen_ell, "override word length");
  gen->add_option("--cap", gen_cap, "max points to emit");
  gen->add_option("--dedup", gen_dedup, "dedup tolerance (0 keeps multiset)");
  gen->add_option("--out", gen_out, "output CSV path");

  // ---- verify -------------------------------------------------------------
  auto* verify_cmd = app.add_subcommand("verify", "verification battery");

  auto* vcover = verify_cmd->add_subcommand("cover", "covering radius check");
  std::string vcover_cloud;
  long long vcover_refsize = 20000;
  std::uint64_t vcover_seed = 7;
  double vcover_epsilon = 0.05;
  std::optional<std::string> vcover_out;
  vcover->add_option("--cloud", vcover_cloud, "cloud CSV")->required();
  vcover->add_option("--reference-size", vcover_refsize, "uniform reference size");
  vcover->add_option("--seed", vcover_seed, "reference seed");
  vcover->add_option("--epsilon", vcover_epsilon, "epsilon for r_target");
  vcover->add_option("--out", vcover_out, "report JSON path");

  auto* vw1 = verify_cmd->add_subcommand("w1", "Wasserstein-1 check");
  std::string vw1_cloud, vw1_method = "sinkhorn";
  double vw1_reg = 0.02;
  std::optional<double> vw1_epsilon;
  long long vw1_refsize = 5000;
  std::uint64_t vw1_seed = 7;
  std::optional<std::string> vw1_out;
  vw1->add_option("--cloud", vw1_cloud, "cloud CSV")->required();
  vw1->add_option("--method", vw1_method, "exact | sinkhorn")
      ->check(CLI::IsMember({"exact", "sinkhorn"}));
  vw1->add_option("--reg", vw1_reg, "sinkhorn regularization");
  vw1->add_option("--epsilon", vw1_epsilon,
                  "epsilon for the threshold (report-only when omitted)");
  vw1->add_option("--reference-size", vw1_refsize, "uniform reference size");
  vw1->add_option("--seed", vw1_seed, "reference seed");
  vw1->add_option("--out", vw1_out, "report JSON path");

  auto* vdesign = verify_cmd->add_subcommand("design", "design-discrepancy check");
  std::string vdesign_cloud;
  double vdesign_lambda = 12.0;
  std::optional<double> vdesign_upsilon;
  std::optional<std::string> vdesign_out;
  vdesign->add_option("--cloud", vdesign_cloud, "cloud CSV")->required();
  vdesign->add_option("--lambda-r", vdesign_lambda, "design eigenvalue cutoff");
  vdesign->add_option("--upsilon", vdesign_upsilon, "pass threshold (optional)");
  vdesign->add_option("--out", vdesign_out, "report JSON path");

  auto* vgap = verify_cmd->add_subcommand("gap", "averaging-operator spectral gap");
  std::string vgap_space = "sphere2";
  long long vgap_k = 0, vgap_seeds = 20;
  double vgap_lambda = 12.0;
  std::uint64_t vgap_seed = 1;
  std::optional<std::string> vgap_out;
  vgap->add_option("--space", vgap_space, "space id");
  vgap->add_option("--k", vgap_k, "alphabet size")->required();
  vgap->add_option("--seeds", vgap_seeds, "number of alphabet seeds");
  vgap->add_option("--lambda-max", vgap_lambda, "basis cutoff");
  vgap->add_option("--seed", vgap_seed, "master seed");
  vgap->add_option("--out", vgap_out, "report JSON path");

  auto* vpersist = verify_cmd->add_subcommand("persist", "persistence coupling check");
  std::string vpersist_cloud;
  long long vpersist_n = 30, vpersist_trials = 50, vpersist_refsize = 5000;
  int vpersist_q = 0;
  std::uint64_t vpersist_seed = 11;
  std::optional<std::string> vpersist_out;
  vpersist->add_option("--cloud", vpersist_cloud, "cloud CSV")->required();
  vpersist->add_option("--n", vpersist_n, "sample size per trial");
  vpersist->add_option("--q", vpersist_q, "homology degree");
  vpersist->add_option("--trials", vpersist_trials, "number of trials");
  vpersist->add_option("--seed", vpersist_seed, "master seed");
  vpersist->add_option("--reference-size", vpersist_refsize,
                       "reference size for the W1 estimate");
  vpersist->add_option("--out", vpersist_out, "report JSON path");

  // ---- pipeline / sweep / report merge -------------------------------------
  auto* pipeline_cmd = app.add_subcommand("pipeline", "run a full config");
  std::string pipeline_config;
  pipeline_cmd->add_option("--config", pipeline_config, "JSON config path")
      ->required();

  auto* sweep_cmd = app.add_subcommand("sweep", "ell/seed sweep");
  std::string sweep_config;
  long long sweep_from = 2, sweep_to = 5, sweep_seeds = 1;
  sweep_cmd->add_option("--config", sweep_config, "JSON config path")->required();
  sweep_cmd->add_option("--ell-from", sweep_from, "first ell");
  sweep_cmd->add_option("--ell-to", sweep_to, "last ell");
  sweep_cmd->add_option("--seeds", sweep_seeds, "seed replicas");

  auto* report_cmd = app.add_subcommand("report", "report utilities");
  auto* merge = report_cmd->add_subcommand("merge", "merge report.json files");
  std::vector<std::string> merge_inputs;
  std::optional<std::string> merge_out;
  merge->add_option("inputs", merge_inputs, "report files")->required();
  merge->add_option("--out", merge_out, "merged JSON path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : wc::kExitConfigError;
  }

  try {
    if (gen->parsed()) {
      const wc::SpaceSpec spec = wc::make_space(gen_space);
      const wc::CoverParams params = wc::resolve_cover_params(
          gen_epsilon, gen_delta, spec, gen_k, gen_ell);
      if (params.exploratory_epsilon)
        std::cerr << "warning: epsilon outside (0, 2^-e); formulas are "
                     "outside their guaranteed regime\n";
      const wc::Alphabet alphabet =
          wc::generate_alphabet(spec, params.k, gen_seed);
      const wc::PointCloud cloud = wc::enumerate_cloud(
          spec, alphabet, params.ell, wc::origin(spec), gen_cap, gen_dedup);
      wc::write_cloud_csv(gen_out, cloud);
      std::cout << "space=" << spec.name() << " k=" << params.k
                << " ell=" << params.ell << " r_target=" << params.r_target
                << " points=" << cloud.size()
                << (cloud.provenance.capped ? " (capped)" : "") << "\n"
                << "wrote " << gen_out << "\n";
      return wc::kExitOk;
    }

    if (vcover->parsed()) {
      const wc::PointCloud cloud = wc::read_cloud_csv(vcover_cloud);
      const double rt = wc::r_target(vcover_epsilon, cloud.space,
                                     wc::EpsilonPolicy::exploratory);
      const wc::json out =
          wc::verify_cover_check(cloud, rt, vcover_refsize, vcover_seed);
      emit_json(vcover_out, out);
      return out["pass"].get<bool>() ? wc::kExitOk : wc::kExitCheckFailed;
    }

    if (vw1->parsed()) {
      const wc::PointCloud cloud = wc::read_cloud_csv(vw1_cloud);
      wc::json out;
      if (vw1_epsilon) {
        out = wc::verify_w1_check(cloud, *vw1_epsilon, vw1_method, vw1_reg,
                                  vw1_refsize, vw1_seed);
      } else {
        // Report-only: no epsilon, no Theorem-style threshold.
        out = wc::verify_w1_check(cloud, 1.0, vw1_method, vw1_reg, vw1_refsize,
                                  vw1_seed);
        out["threshold"] = {{"kind", "report-only"}};
        out["pass"] = out["duality_ok"];
      }
      emit_json(vw1_out, out);
      return out["pass"].get<bool>() ? wc::kExitOk : wc::kExitCheckFailed;
    }

    if (vdesign->parsed()) {
      const wc::PointCloud cloud = wc::read_cloud_csv(vdesign_cloud);
      const wc::json out =
          wc::verify_design_check(cloud, vdesign_lambda, vdesign_upsilon);
      emit_json(vdesign_out, out);
      return out["pass"].get<bool>() ? wc::kExitOk : wc::kExitCheckFailed;
    }

    if (vgap->parsed()) {
      const wc::SpaceSpec spec = wc::make_space(vgap_space);
      const wc::json out = wc::verify_gap_check(spec, vgap_k, vgap_lambda,
                                                vgap_seeds, vgap_seed);
      emit_json(vgap_out, out);
      return out["pass"].get<bool>() ? wc::kExitOk : wc::kExitCheckFailed;
    }

    if (vpersist->parsed()) {
      const wc::PointCloud cloud = wc::read_cloud_csv(vpersist_cloud);
      const wc::json out =
          wc::verify_persist_check(cloud, vpersist_n, vpersist_q,
                                   vpersist_trials, vpersist_seed,
                                   vpersist_refsize);
      emit_json(vpersist_out, out);
      return out["pass"].get<bool>() ? wc::kExitOk : wc::kExitCheckFailed;
    }

    if (pipeline_cmd->parsed()) {
      wc::RunConfig cfg;
      try {
        cfg = wc::parse_config(wc::read_text_file(pipeline_config));
      } catch (const wc::Error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return wc::kExitConfigError;
      }
      const wc::ReportBundle bundle = wc::run_pipeline(cfg);
      for (const auto& [name, body] : bundle.report["checks"].items()) {
        if (body.contains("error"))
          std::cout << "[ERR ] " << name << ": " << body["error"] << "\n";
        else
          std::cout << (body.value("pass", false) ? "[PASS] " : "[FAIL] ")
                    << name << "\n";
      }
      std::cout << "report: " << bundle.report_path << "\n";
      return bundle.exit_code();
    }

    if (sweep_cmd->parsed()) {
      wc::RunConfig cfg;
      try {
        cfg = wc::parse_config(wc::read_text_file(sweep_config));
      } catch (const wc::Error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return wc::kExitConfigError;
      }
      const wc::json summary = wc::run_sweep(cfg, sweep_from, sweep_to, sweep_seeds);
      std::cout << summary.dump(2) << "\n";
      return wc::kExitOk;
    }

    if (merge->parsed()) {
      const wc::json merged = wc::merge_reports(merge_inputs);
      emit_json(merge_out, merged);
      return merged["all_passed"].get<bool>() ? wc::kExitOk
                                              : wc::kExitCheckFailed;
    }
  } catch (const wc::ValidationError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return wc::kExitConfigError;
  } catch (const wc::ParseError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return wc::kExitConfigError;
  } catch (const wc::BudgetExceeded& e) {
    return budget_exit(e);
  } catch (const wc::OverflowGuard& e) {
    return budget_exit(e);
  } catch (const wc::DimensionBudgetExceeded& e) {
    return budget_exit(e);
  } catch (const wc::SizeLimitExceeded& e) {
    return budget_exit(e);
  } catch (const std::exception& e) {
    return failure_exit(e);
  }

  std::cerr << "no subcommand selected\n";
  return wc::kExitConfigError;
}
