#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "wordcover/cover.hpp"
#include "wordcover/errors.hpp"
#include "wordcover/space.hpp"

namespace wordcover {

/// Per-check switches and their parameters. All checks default off.
struct CheckToggles {
  bool cover = false;

  bool w1 = false;
  std::string w1_method = "sinkhorn";  // "exact" | "sinkhorn"
  double w1_reg = 0.02;

  bool design = false;
  double design_lambda_r = 12.0;
  std::optional<double> design_upsilon;  // pass threshold; report-only if unset

  bool gap = false;
  double gap_lambda_max = 12.0;
  long long gap_seeds = 1;

  bool persist = false;
  long long persist_n = 30;
  int persist_q = 0;
  long long persist_trials = 50;

  bool operator==(const CheckToggles&) const = default;
};

/// Validated run configuration; parse_config / emit_config round-trip
/// losslessly and unknown keys are rejected.
struct RunConfig {
  std::string space = "sphere2";
  double epsilon = 0.05;
  double delta = 0.1;
  std::uint64_t seed = 1;

  std::optional<long long> k;
  std::optional<long long> ell;
  std::optional<double> c_m;
  std::optional<double> v_m;
  std::optional<int> antipodal_dim;

  std::uint64_t cap = kDefaultCloudCap;
  long long reference_size = 5000;
  double dedup_tol = 0.0;

  std::string out_dir = "out";
  CheckToggles checks;

  bool operator==(const RunConfig&) const = default;

  SpaceSpec make_space_spec() const {
    SpaceOverrides ov;
    ov.c_m = c_m;
    ov.v_m = v_m;
    ov.antipodal_dim = antipodal_dim;
    return make_space(space, ov);
  }
};

namespace detail {

inline void reject_unknown_keys(const nlohmann::json& j,
                                const std::vector<std::string>& known,
                                const std::string& scope,
                                std::vector<std::string>& violations) {
  if (!j.is_object()) {
    violations.push_back(scope + ": must be an object");
    return;
  }
  for (const auto& [key, _] : j.items()) {
    bool ok = false;
    for (const auto& k : known)
      if (k == key) {
        ok = true;
        break;
      }
    if (!ok) violations.push_back(scope + ": unknown key '" + key + "'");
  }
}

inline void line_col_of(const std::string& text, std::size_t byte_pos,
                        int& line, int& col) {
  line = 1;
  col = 1;
  for (std::size_t i = 0; i < byte_pos && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
}

}  // namespace detail

/// Parses a JSON run configuration. Throws ParseError (with line/column)
/// for malformed text and ValidationError enumerating every bad field.
inline RunConfig parse_config(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    int line = 0, col = 0;
    detail::line_col_of(text, e.byte > 0 ? e.byte - 1 : 0, line, col);
    throw ParseError(e.what(), line, col);
  }

  std::vector<std::string> bad;
  RunConfig cfg;
  detail::reject_unknown_keys(
      j,
      {"space", "epsilon", "delta", "seed", "overrides", "checks", "budgets",
       "out_dir"},
      "config", bad);

  const auto get_num = [&](const nlohmann::json& node, const char* key,
                           auto& dst, const std::string& scope) -> bool {
    if (!node.contains(key)) return false;
    try {
      dst = node.at(key).get<std::decay_t<decltype(dst)>>();
      return true;
    } catch (const nlohmann::json::exception&) {
      bad.push_back(scope + ": '" + key + "' has the wrong type");
      return false;
    }
  };

  get_num(j, "epsilon", cfg.epsilon, "config");
  get_num(j, "delta", cfg.delta, "config");
  get_num(j, "seed", cfg.seed, "config");
  if (j.contains("space")) {
    if (j["space"].is_string())
      cfg.space = j["space"].get<std::string>();
    else
      bad.push_back("config: 'space' must be a string");
  }
  if (j.contains("out_dir")) {
    if (j["out_dir"].is_string())
      cfg.out_dir = j["out_dir"].get<std::string>();
    else
      bad.push_back("config: 'out_dir' must be a string");
  }

  if (j.contains("overrides")) {
    const auto& ov = j["overrides"];
    detail::reject_unknown_keys(ov, {"k", "ell", "c_m", "v_m", "antipodal_dim"},
                                "overrides", bad);
    long long k = 0, ell = 0;
    double cm = 0, vm = 0;
    int bd = 0;
    if (get_num(ov, "k", k, "overrides")) cfg.k = k;
    if (get_num(ov, "ell", ell, "overrides")) cfg.ell = ell;
    if (get_num(ov, "c_m", cm, "overrides")) cfg.c_m = cm;
    if (get_num(ov, "v_m", vm, "overrides")) cfg.v_m = vm;
    if (get_num(ov, "antipodal_dim", bd, "overrides")) cfg.antipodal_dim = bd;
  }

  if (j.contains("budgets")) {
    const auto& b = j["budgets"];
    detail::reject_unknown_keys(b, {"cap", "reference_size", "dedup_tol"},
                                "budgets", bad);
    get_num(b, "cap", cfg.cap, "budgets");
    get_num(b, "reference_size", cfg.reference_size, "budgets");
    get_num(b, "dedup_tol", cfg.dedup_tol, "budgets");
  }

  if (j.contains("checks")) {
    const auto& c = j["checks"];
    detail::reject_unknown_keys(c, {"cover", "w1", "design", "gap", "persist"},
                                "checks", bad);
    if (c.contains("cover")) {
      detail::reject_unknown_keys(c["cover"], {"enabled"}, "checks.cover", bad);
      get_num(c["cover"], "enabled", cfg.checks.cover, "checks.cover");
    }
    if (c.contains("w1")) {
      const auto& w = c["w1"];
      detail::reject_unknown_keys(w, {"enabled", "method", "reg"}, "checks.w1",
                                  bad);
      get_num(w, "enabled", cfg.checks.w1, "checks.w1");
      if (w.contains("method")) {
        if (w["method"].is_string())
          cfg.checks.w1_method = w["method"].get<std::string>();
        else
          bad.push_back("checks.w1: 'method' must be a string");
      }
      get_num(w, "reg", cfg.checks.w1_reg, "checks.w1");
    }
    if (c.contains("design")) {
      const auto& d = c["design"];
      detail::reject_unknown_keys(d, {"enabled", "lambda_r", "upsilon"},
                                  "checks.design", bad);
      get_num(d, "enabled", cfg.checks.design, "checks.design");
      get_num(d, "lambda_r", cfg.checks.design_lambda_r, "checks.design");
      double ups = 0;
      if (get_num(d, "upsilon", ups, "checks.design"))
        cfg.checks.design_upsilon = ups;
    }
    if (c.contains("gap")) {
      const auto& g = c["gap"];
      detail::reject_unknown_keys(g, {"enabled", "lambda_max", "seeds"},
                                  "checks.gap", bad);
      get_num(g, "enabled", cfg.checks.gap, "checks.gap");
      get_num(g, "lambda_max", cfg.checks.gap_lambda_max, "checks.gap");
      get_num(g, "seeds", cfg.checks.gap_seeds, "checks.gap");
    }
    if (c.contains("persist")) {
      const auto& p = c["persist"];
      detail::reject_unknown_keys(p, {"enabled", "n", "q", "trials"},
                                  "checks.persist", bad);
      get_num(p, "enabled", cfg.checks.persist, "checks.persist");
      get_num(p, "n", cfg.checks.persist_n, "checks.persist");
      get_num(p, "q", cfg.checks.persist_q, "checks.persist");
      get_num(p, "trials", cfg.checks.persist_trials, "checks.persist");
    }
  }

  // Field validation; every violation is reported, not just the first.
  if (!(cfg.epsilon > 0.0) || !(cfg.epsilon < 1.0))
    bad.push_back("epsilon must lie in (0, 1), got " +
                  std::to_string(cfg.epsilon));
  if (!(cfg.delta > 0.0) || !(cfg.delta < 0.5))
    bad.push_back("delta must lie in (0, 0.5), got " +
                  std::to_string(cfg.delta));
  try {
    make_space(cfg.space);
  } catch (const UnsupportedSpace& e) {
    bad.push_back(e.what());
  }
  if (cfg.k && *cfg.k < 1) bad.push_back("overrides.k must be >= 1");
  if (cfg.ell && *cfg.ell < 1) bad.push_back("overrides.ell must be >= 1");
  if (cfg.c_m && *cfg.c_m <= 0) bad.push_back("overrides.c_m must be positive");
  if (cfg.v_m && *cfg.v_m <= 0) bad.push_back("overrides.v_m must be positive");
  if (cfg.cap < 1) bad.push_back("budgets.cap must be >= 1");
  if (cfg.reference_size < 1) bad.push_back("budgets.reference_size must be >= 1");
  if (cfg.dedup_tol < 0) bad.push_back("budgets.dedup_tol must be >= 0");
  if (cfg.checks.w1_method != "exact" && cfg.checks.w1_method != "sinkhorn")
    bad.push_back("checks.w1.method must be 'exact' or 'sinkhorn'");
  if (!(cfg.checks.w1_reg > 0)) bad.push_back("checks.w1.reg must be positive");
  if (!(cfg.checks.design_lambda_r > 0))
    bad.push_back("checks.design.lambda_r must be positive");
  if (cfg.checks.design_upsilon && !(*cfg.checks.design_upsilon > 0))
    bad.push_back("checks.design.upsilon must be positive");
  if (!(cfg.checks.gap_lambda_max > 0))
    bad.push_back("checks.gap.lambda_max must be positive");
  if (cfg.checks.gap_seeds < 1) bad.push_back("checks.gap.seeds must be >= 1");
  if (cfg.checks.persist_n < 1) bad.push_back("checks.persist.n must be >= 1");
  if (cfg.checks.persist_q < 0 || cfg.checks.persist_q > 2)
    bad.push_back("checks.persist.q must be 0, 1 or 2");
  if (cfg.checks.persist_trials < 1)
    bad.push_back("checks.persist.trials must be >= 1");

  if (!bad.empty()) throw ValidationError(std::move(bad));
  return cfg;
}

/// Canonical JSON emission; parse(emit(cfg)) == cfg.
inline std::string emit_config(const RunConfig& cfg) {
  nlohmann::json j;
  j["space"] = cfg.space;
  j["epsilon"] = cfg.epsilon;
  j["delta"] = cfg.delta;
  j["seed"] = cfg.seed;
  nlohmann::json ov = nlohmann::json::object();
  if (cfg.k) ov["k"] = *cfg.k;
  if (cfg.ell) ov["ell"] = *cfg.ell;
  if (cfg.c_m) ov["c_m"] = *cfg.c_m;
  if (cfg.v_m) ov["v_m"] = *cfg.v_m;
  if (cfg.antipodal_dim) ov["antipodal_dim"] = *cfg.antipodal_dim;
  j["overrides"] = ov;
  j["budgets"] = {{"cap", cfg.cap},
                  {"reference_size", cfg.reference_size},
                  {"dedup_tol", cfg.dedup_tol}};
  j["out_dir"] = cfg.out_dir;
  nlohmann::json checks;
  checks["cover"] = {{"enabled", cfg.checks.cover}};
  checks["w1"] = {{"enabled", cfg.checks.w1},
                  {"method", cfg.checks.w1_method},
                  {"reg", cfg.checks.w1_reg}};
  nlohmann::json design = {{"enabled", cfg.checks.design},
                           {"lambda_r", cfg.checks.design_lambda_r}};
  if (cfg.checks.design_upsilon) design["upsilon"] = *cfg.checks.design_upsilon;
  checks["design"] = design;
  checks["gap"] = {{"enabled", cfg.checks.gap},
                   {"lambda_max", cfg.checks.gap_lambda_max},
                   {"seeds", cfg.checks.gap_seeds}};
  checks["persist"] = {{"enabled", cfg.checks.persist},
                       {"n", cfg.checks.persist_n},
                       {"q", cfg.checks.persist_q},
                       {"trials", cfg.checks.persist_trials}};
  j["checks"] = checks;
  return j.dump(2);
}

}  // namespace wordcover
