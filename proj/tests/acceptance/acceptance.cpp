// Acceptance suite: one pass/fail line per criterion, nonzero exit if any
// criterion fails. Thresholds are pinned in code; expected values marked
// "oracle" were computed with an independent 60-digit arithmetic script and
// frozen here.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "../support/oracles.hpp"
#include "wordcover/wordcover.hpp"

using namespace wordcover;
using Clock = std::chrono::steady_clock;

namespace {

int g_failures = 0;

void report(int criterion, const std::string& name, bool pass,
            const std::string& detail, double seconds) {
  std::printf("[%s] criterion %2d: %-28s %s (%.1fs)\n", pass ? "PASS" : "FAIL",
              criterion, name.c_str(), detail.c_str(), seconds);
  std::fflush(stdout);
  if (!pass) ++g_failures;
}

void run(int criterion, const std::string& name,
         const std::function<std::pair<bool, std::string>()>& body) {
  const auto t0 = Clock::now();
  bool pass = false;
  std::string detail;
  try {
    std::tie(pass, detail) = body();
  } catch (const std::exception& e) {
    pass = false;
    detail = std::string("exception: ") + e.what();
  }
  report(criterion, name, pass,
         detail, std::chrono::duration<double>(Clock::now() - t0).count());
}

PointCloud uniform_reference(const SpaceSpec& spec, int n, std::uint64_t seed) {
  PointCloud ref;
  ref.space = spec;
  ref.points.resize(n);
  parallel_for(n, [&](std::size_t i) {
    RngStream rng = RngStream::derive(seed, i);
    ref.points[i] = uniform_sample(spec, rng);
  });
  return ref;
}

// ---------------------------------------------------------------------------

std::pair<bool, std::string> criterion1_calculators() {
  const auto t0 = Clock::now();
  bool ok = true;
  std::ostringstream why;

  struct GridRow {
    const char* space;
    double eps, delta;
    double r_target_oracle;
    long long k4, l4, k1, l1;
    double lambda_inf_oracle;
  };
  // Frozen from the independent arbitrary-precision oracle.
  const std::vector<GridRow> grid = {
      {"sphere2", 0.04, 0.10, 0.2623614576970965002, 102, 15, 97, 73,
       53913.500778272559669},
      {"sphere2", 0.05, 0.10, 0.31758162902362728878, 97, 14, 95, 68,
       29886.499931802728573},
      {"sphere2", 0.05, 0.05, 0.31758162902362728878, 105, 14, 102, 68,
       29886.499931802728573},
      {"sphere1", 0.03, 0.20, 0.12875796157736083438, 50, 9, 70, 41,
       46185.581484649900099},
      {"sphere3", 0.02, 0.10, 0.18180749078432974175, 173, 24, 128, 132,
       528601.53304728239391},
      {"so3", 0.05, 0.01, 0.40096475725976297652, 171, 21, 154, 100,
       51102.656653227663309},
  };
  for (const auto& row : grid) {
    const SpaceSpec spec = make_space(row.space);
    const double rt = r_target(row.eps, spec);
    if (std::abs(rt - row.r_target_oracle) > 1e-12 * row.r_target_oracle) {
      ok = false;
      why << " r_target(" << row.space << "," << row.eps << ")=" << rt;
    }
    if (alphabet_size(row.eps, row.delta, spec) != row.k4) {
      ok = false;
      why << " k4 mismatch at " << row.space << "/" << row.eps;
    }
    if (word_length(row.eps, spec) != row.l4) {
      ok = false;
      why << " l4 mismatch at " << row.space << "/" << row.eps;
    }
    if (alphabet_size_v1(row.eps, row.delta, spec) != row.k1) {
      ok = false;
      why << " k1 mismatch at " << row.space << "/" << row.eps;
    }
    if (word_length_v1(row.eps, spec) != row.l1) {
      ok = false;
      why << " l1 mismatch at " << row.space << "/" << row.eps;
    }
    const double li = select_lambda_max(row.eps, 1.0, spec);
    if (std::abs(li - row.lambda_inf_oracle) > 1e-9 * row.lambda_inf_oracle) {
      ok = false;
      why << " lambda_inf mismatch at " << row.space << "/" << row.eps;
    }
  }
  const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
  if (secs >= 1.0) {
    ok = false;
    why << " runtime " << secs << "s >= 1s";
  }
  return {ok, ok ? "6-point grid, both variants, to the integer/1e-12"
                 : why.str()};
}

std::pair<bool, std::string> criterion2_spectral_gap() {
  const SpaceSpec s2 = make_space("sphere2");
  const long long k =
      alphabet_size(0.2, 0.1, s2, EpsilonPolicy::exploratory);
  if (k != 65) return {false, "alphabet_size(0.2,0.1) != 65 oracle"};
  const EigenBasis basis = build_basis(s2, 12.0);
  int passed = 0;
  for (int seed = 0; seed < 20; ++seed) {
    const Alphabet a = generate_alphabet(s2, k, 52000 + seed);
    if (spectral_gap_check(a, basis).pass) ++passed;
  }
  std::ostringstream d;
  d << "k=" << k << ", in [1/4,3/4] for " << passed << "/20 seeds (need 18)";
  return {passed >= 18, d.str()};
}

std::pair<bool, std::string> criterion3_expected_half_identity() {
  const SpaceSpec s2 = make_space("sphere2");
  const EigenBasis basis = build_basis(s2, 12.0);
  std::vector<int> keep;
  for (const auto& b : basis.blocks())
    if (b.lambda > 0)
      for (int j = 0; j < b.dim; ++j) keep.push_back(b.offset + j);

  const auto mean_err = [&](int count, std::uint64_t seed) {
    std::vector<Eigen::MatrixXd> mats(count);
    parallel_for(count, [&](std::size_t i) {
      RngStream rng = RngStream::derive(seed, i);
      mats[i] = averaging_matrix(basis, haar_sample(s2, rng));
    });
    Eigen::MatrixXd mean =
        Eigen::MatrixXd::Zero(basis.total_dim(), basis.total_dim());
    for (const auto& m : mats) mean += m;
    mean /= count;
    Eigen::MatrixXd sub(keep.size(), keep.size());
    for (std::size_t r = 0; r < keep.size(); ++r)
      for (std::size_t c = 0; c < keep.size(); ++c)
        sub(r, c) = mean(keep[r], keep[c]);
    sub -= 0.5 * Eigen::MatrixXd::Identity(keep.size(), keep.size());
    return sub.operatorNorm();
  };

  bool all_small = true;
  int ratio_ok = 0;
  double worst2000 = 0;
  for (int pair = 0; pair < 10; ++pair) {
    const double e2000 = mean_err(2000, 42000 + 2 * pair);
    const double e8000 = mean_err(8000, 42001 + 2 * pair);
    worst2000 = std::max(worst2000, e2000);
    if (e2000 > 0.1) all_small = false;
    if (e8000 <= 0.6 * e2000) ++ratio_ok;
  }
  std::ostringstream d;
  d << "worst |mean-I/2| at 2000 = " << worst2000 << " (<=0.1), ratio<=0.6 in "
    << ratio_ok << "/10 (need 8)";
  return {all_small && ratio_ok >= 8, d.str()};
}

std::pair<bool, std::string> criterion4_covering_trend() {
  const SpaceSpec s2 = make_space("sphere2");
  int chains_ok = 0, ratio_ok = 0;
  for (int seed = 0; seed < 10; ++seed) {
    const Alphabet a = generate_alphabet(s2, 4, 1000 + seed);
    const PointCloud ref = uniform_reference(s2, 20000, 555000 + seed);
    double prev = std::numeric_limits<double>::infinity();
    double first = 0, last = 0;
    bool chain = true;
    for (int ell = 3; ell <= 7; ++ell) {
      const PointCloud cloud = enumerate_cloud(s2, a, ell, origin(s2),
                                               std::uint64_t(1) << 18, 1e-6);
      const double radius = covering_radius(cloud, ref);
      if (ell == 3) first = radius;
      if (ell == 7) last = radius;
      if (radius > prev) chain = false;
      prev = radius;
    }
    if (chain) ++chains_ok;
    if (first >= 2.0 * last) ++ratio_ok;
  }
  std::ostringstream d;
  d << "nonincreasing chains " << chains_ok << "/10 (need 8), >=2x drop in "
    << ratio_ok << "/10 (need 8)";
  return {chains_ok >= 8 && ratio_ok >= 8, d.str()};
}

std::pair<bool, std::string> criterion5_wasserstein() {
  const SpaceSpec s2 = make_space("sphere2");
  std::ostringstream d;
  bool ok = true;
  for (const double eps : {0.04, 0.05}) {
    const CoverParams params = resolve_cover_params(eps, 0.1, s2);
    int passed = 0;
    bool duality_all = true;
    for (int seed = 0; seed < 10; ++seed) {
      const Alphabet a =
          generate_alphabet(s2, params.k, 77000 + 100 * seed);
      const PointCloud cloud = enumerate_cloud(
          s2, a, params.ell, origin(s2), std::uint64_t(1) << 16, 0.0);
      const json out = verify_w1_check(
          cloud, eps, "sinkhorn", 0.02, 5000,
          RngStream::derive(77000 + 100 * seed, 202).next_u64());
      const double value = out["w1"]["value"].get<double>();
      const double threshold = out["threshold"]["value"].get<double>();
      if (value <= threshold) ++passed;
      if (!out["duality_ok"].get<bool>()) duality_all = false;
    }
    d << "eps=" << eps << ": " << passed << "/10 under 2*sqrt(d*eps)+slack"
      << (duality_all ? ", duality ok; " : ", DUALITY VIOLATION; ");
    if (passed < 9 || !duality_all) ok = false;
  }
  return {ok, d.str()};
}

std::pair<bool, std::string> criterion6_design() {
  const SpaceSpec s2 = make_space("sphere2");
  const EigenBasis basis = build_basis(s2, 12.0);
  int good = 0;
  for (int seed = 0; seed < 10; ++seed) {
    const Alphabet a = generate_alphabet(s2, 4, 3000 + seed);
    const double d3 =
        design_discrepancy(enumerate_cloud(s2, a, 3, origin(s2)), basis, 12.0)
            .worst;
    const double d4 =
        design_discrepancy(enumerate_cloud(s2, a, 4, origin(s2)), basis, 12.0)
            .worst;
    if (d4 <= d3) ++good;
  }
  PointCloud single;
  single.space = s2;
  RngStream rng(61);
  single.points.push_back(uniform_sample(s2, rng));
  const double one = design_discrepancy(single, basis, 12.0).worst;
  const double oracle = std::sqrt(15.0);  // sum of d_lambda = 3 + 5 + 7
  const bool exact = std::abs(one - oracle) <= 1e-8;
  std::ostringstream d;
  d << "shrinks at ell+1 in " << good << "/10 (need 8), single-point value "
    << one << " vs sqrt(15)";
  return {good >= 8 && exact, d.str()};
}

std::pair<bool, std::string> criterion7_transport_oracle() {
  const SpaceSpec s2 = make_space("sphere2");
  double worst = 0;
  for (int inst = 0; inst < 25; ++inst) {
    const PointCloud mu = testing::random_cloud(s2, 5, 100 + inst);
    const PointCloud nu = testing::random_cloud(s2, 5, 200 + inst);
    const double fast = wasserstein1_exact(mu, nu).value;
    std::vector<int> perm{0, 1, 2, 3, 4};
    double best = std::numeric_limits<double>::infinity();
    do {
      double c = 0;
      for (int i = 0; i < 5; ++i)
        c += geodesic_distance(s2, mu.points[i], nu.points[perm[i]]);
      best = std::min(best, c / 5.0);
    } while (std::next_permutation(perm.begin(), perm.end()));
    worst = std::max(worst, std::abs(fast - best));
  }
  if (worst > 1e-12)
    return {false, "exact vs permutation oracle diff " + std::to_string(worst)};

  double worst_rel = 0;
  for (int inst = 0; inst < 2; ++inst) {
    const PointCloud mu = testing::random_cloud(s2, 200, 300 + inst);
    const PointCloud nu = testing::random_cloud(s2, 200, 400 + inst);
    const double exact = wasserstein1_exact(mu, nu).value;
    const double approx = wasserstein1_sinkhorn(mu, nu, 1e-3).value;
    worst_rel = std::max(worst_rel, std::abs(approx - exact) / exact);
  }
  std::ostringstream d;
  d << "25 permutation instances exact, sinkhorn@1e-3 rel err " << worst_rel
    << " (<=0.02)";
  return {worst_rel <= 0.02, d.str()};
}

std::pair<bool, std::string> criterion8_persistence_oracle() {
  const SpaceSpec s2 = make_space("sphere2");
  // Battery of <= 7-point clouds vs the GF(2) Betti-curve oracle.
  std::vector<PointCloud> battery;
  {
    PointCloud tri;
    tri.space = s2;
    for (int i = 0; i < 3; ++i) {
      Point p;
      p.coords.resize(3);
      p.coords << std::cos(i * 1.0), std::sin(i * 1.0), 0.0;
      tri.points.push_back(p);
    }
    battery.push_back(tri);
  }
  for (int n : {4, 5, 6, 7})
    battery.push_back(testing::random_cloud(s2, n, 900 + n));
  for (const PointCloud& cloud : battery) {
    const int maxdim = cloud.size() <= 5 ? 2 : 1;
    const Filtration f = vr_filtration(cloud, maxdim, s2.diameter * 1.01);
    for (int q = 0; q <= maxdim; ++q)
      for (double r : testing::critical_values(f))
        if (betti_at(f, r, q) != testing::betti_oracle(f, r, q))
          return {false, "betti mismatch on battery instance"};
  }

  // Equilateral triple H0 = {(0,1),(0,1),(0,inf)}.
  {
    const Filtration f = vr_filtration(battery[0], 1, 2.0);
    const PersistenceDiagram d0 = persistence_diagram(f, 0);
    int fin = 0, inf = 0;
    for (const auto& b : d0.bars) {
      if (std::isinf(b.death)) ++inf;
      else if (b.birth == 0.0 && std::abs(b.death - 1.0) <= 1e-12) ++fin;
    }
    if (!(fin == 2 && inf == 1 && d0.bars.size() == 3))
      return {false, "equilateral H0 pairs wrong"};
  }

  // Bottleneck vs exhaustive matching on random 6-bar diagrams.
  RngStream rng(555);
  for (int inst = 0; inst < 20; ++inst) {
    PersistenceDiagram d1, d2;
    for (int i = 0; i < 6; ++i) {
      double b1 = rng.uniform(), b2 = rng.uniform();
      d1.bars.push_back({b1, b1 + rng.uniform(), 0});
      d2.bars.push_back({b2, b2 + rng.uniform(), 0});
    }
    const double fast = bottleneck(d1, d2, 0);
    const double slow = testing::exhaustive_bottleneck(d1.bars, d2.bars);
    if (std::abs(fast - slow) > 1e-12)
      return {false, "bottleneck vs exhaustive matching mismatch"};
  }
  return {true, "Betti curves, H0 pairs, 6-bar matchings all exact"};
}

std::pair<bool, std::string> criterion9_topology() {
  const SpaceSpec s2 = make_space("sphere2");
  int good = 0;
  std::ostringstream d;
  for (int seed = 0; seed < 10; ++seed) {
    const Alphabet a = generate_alphabet(s2, 4, 2000 + seed);
    const PointCloud cloud = enumerate_cloud(s2, a, 5, origin(s2),
                                             std::uint64_t(1) << 18, 0.55);
    const PointCloud ref = uniform_reference(s2, 20000, 888000 + seed);
    const double rhat = covering_radius(cloud, ref);
    if (cloud.size() > 60 || rhat >= kPi / 4) continue;
    const double probe = 2.5 * rhat;
    const Filtration f = vr_filtration(cloud, 1, probe + 0.01);
    if (betti_at(f, probe, 0) == 1 && betti_at(f, probe, 1) == 0) ++good;
  }
  d << "beta0=1, beta1=0 at 2.5*rhat in " << good << "/10 seeds (need 9)";
  return {good >= 9, d.str()};
}

std::pair<bool, std::string> criterion10_coupling() {
  const SpaceSpec s2 = make_space("sphere2");
  const Alphabet a = generate_alphabet(s2, 4, 31);
  const PointCloud cloud =
      enumerate_cloud(s2, a, 6, origin(s2), std::uint64_t(1) << 16, 0.0);
  const CouplingReport rep =
      coupled_diagram_experiment(s2, cloud, 30, 0, 50, 99);
  std::ostringstream d;
  d << "freq " << rep.violation_frequency() << " <= bound " << rep.bound
    << " (eps_q " << rep.eps_q << ")";
  return {rep.violation_frequency() <= rep.bound, d.str()};
}

std::pair<bool, std::string> criterion11_haar_statistics() {
  const SpaceSpec so3 = make_space("so3");
  const SpaceSpec s2 = make_space("sphere2");
  const int n = 100000;
  std::vector<double> tr(n), dist(n);
  parallel_for(n, [&](std::size_t i) {
    RngStream rng = RngStream::derive(777, i);
    tr[i] = haar_sample(so3, rng).left.trace();
    RngStream rng2 = RngStream::derive(778, i);
    dist[i] = geodesic_distance(s2, origin(s2), uniform_sample(s2, rng2));
  });
  KahanSum sum;
  for (double t : tr) sum.add(t);
  const double mean_tr = std::abs(sum.value() / n);
  std::sort(dist.begin(), dist.end());
  double ks = 0;
  for (int i = 0; i < n; ++i) {
    const double cdf = 0.5 * (1.0 - std::cos(dist[i]));
    ks = std::max(ks, std::abs(cdf - (i + 1.0) / n));
    ks = std::max(ks, std::abs(cdf - static_cast<double>(i) / n));
  }
  std::ostringstream d;
  d << "|mean tr| = " << mean_tr << " (<= " << 5.0 / std::sqrt(double(n))
    << "), KS = " << ks << " (<= 0.01)";
  return {mean_tr <= 5.0 / std::sqrt(static_cast<double>(n)) && ks <= 0.01,
          d.str()};
}

std::pair<bool, std::string> criterion12_determinism() {
  namespace fs = std::filesystem;
  const std::string base = (fs::temp_directory_path() /
                            "wordcover_acceptance_det").string();
  RunConfig cfg = parse_config(R"({
    "space": "sphere2", "epsilon": 0.2, "delta": 0.1, "seed": 4242,
    "overrides": {"k": 3, "ell": 3},
    "budgets": {"cap": 4096, "reference_size": 500},
    "checks": {
      "cover": {"enabled": true},
      "w1": {"enabled": true, "method": "sinkhorn", "reg": 0.05},
      "design": {"enabled": true, "lambda_r": 6},
      "gap": {"enabled": true, "lambda_max": 6, "seeds": 2},
      "persist": {"enabled": true, "n": 10, "q": 0, "trials": 5}
    }
  })");

  // Identical config (including out_dir): rerun into the same directory and
  // capture the bytes between runs.
  cfg.out_dir = base + "/out";
  const auto run_with_threads = [&](const char* threads) {
    setenv("WORDCOVER_THREADS", threads, 1);
    run_pipeline(cfg);
    unsetenv("WORDCOVER_THREADS");
    json report = json::parse(read_text_file(cfg.out_dir + "/report.json"));
    report.erase("timestamp");
    return std::make_pair(read_text_file(cfg.out_dir + "/cloud.csv"),
                          report.dump());
  };

  const auto [cloud1, rep1] = run_with_threads("1");
  const auto [cloud4, rep4] = run_with_threads("4");
  const auto [cloud8, rep8] = run_with_threads("8");
  const auto [cloud1b, rep1b] = run_with_threads("1");

  const bool clouds_equal = cloud1 == cloud4 && cloud4 == cloud8 &&
                            cloud1 == cloud1b;
  const bool reports_equal = rep1 == rep4 && rep4 == rep8 && rep1 == rep1b;
  std::ostringstream d;
  d << "cloud.csv " << (clouds_equal ? "byte-identical" : "DIFFERS")
    << ", report.json (modulo timestamp) "
    << (reports_equal ? "identical" : "DIFFERS") << " across threads 1/4/8";
  return {clouds_equal && reports_equal, d.str()};
}

}  // namespace

int main() {
  std::printf("acceptance suite (thresholds pinned in code)\n");
  run(1, "calculator fidelity", criterion1_calculators);
  run(2, "spectral-gap concentration", criterion2_spectral_gap);
  run(3, "E[A_s] = I/2 trend", criterion3_expected_half_identity);
  run(4, "covering trend", criterion4_covering_trend);
  run(5, "Wasserstein bound", criterion5_wasserstein);
  run(6, "design discrepancy", criterion6_design);
  run(7, "transport oracle", criterion7_transport_oracle);
  run(8, "persistence oracle", criterion8_persistence_oracle);
  run(9, "topology recovery", criterion9_topology);
  run(10, "coupling experiment", criterion10_coupling);
  run(11, "haar sampler statistics", criterion11_haar_statistics);
  run(12, "determinism across threads", criterion12_determinism);

  if (g_failures == 0) {
    std::printf("all 12 criteria passed\n");
    return 0;
  }
  std::printf("%d criteria FAILED\n", g_failures);
  return 1;
}
