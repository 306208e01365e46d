#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "wordcover/cover.hpp"
#include "wordcover/spectral.hpp"

using namespace wordcover;

namespace {

PointCloud octahedron(const SpaceSpec& s2) {
  PointCloud c;
  c.space = s2;
  for (const auto& v : std::vector<Eigen::Vector3d>{
           {1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}}) {
    Point p;
    p.coords = v;
    c.points.push_back(p);
  }
  return c;
}

double gram_error(const EigenBasis& basis) {
  const auto& q = basis.quadrature();
  Eigen::MatrixXd gram =
      Eigen::MatrixXd::Zero(basis.total_dim(), basis.total_dim());
  for (std::size_t i = 0; i < q.nodes.size(); ++i)
    gram += q.weights[i] * basis.node_values().col(i) *
            basis.node_values().col(i).transpose();
  return (gram - Eigen::MatrixXd::Identity(basis.total_dim(),
                                           basis.total_dim()))
      .cwiseAbs()
      .maxCoeff();
}

}  // namespace

TEST_CASE("bases are orthonormal under the shipped quadrature") {
  for (const char* name : {"sphere1", "sphere2", "so3"}) {
    const EigenBasis basis = build_basis(make_space(name), 12.0);
    CHECK(gram_error(basis) <= 1e-8);
  }
}

TEST_CASE("basis dimensions and budget") {
  CHECK(build_basis(make_space("sphere2"), 0.0).total_dim() == 1);
  CHECK(build_basis(make_space("sphere2"), 6.0).total_dim() == 9);
  CHECK(build_basis(make_space("so3"), 6.0).total_dim() == 35);
  CHECK_THROWS_AS(build_basis(make_space("sphere2"), 4200.0),
                  DimensionBudgetExceeded);
  CHECK_THROWS_AS(build_basis(make_space("sphere3"), 6.0), UnsupportedSpace);
}

TEST_CASE("addition theorem: sum of squares in a block equals its dimension") {
  for (const char* name : {"sphere1", "sphere2", "so3"}) {
    const SpaceSpec spec = make_space(name);
    const EigenBasis basis = build_basis(spec, 12.0);
    RngStream rng(3);
    for (int t = 0; t < 50; ++t) {
      const Point p = uniform_sample(spec, rng);
      const Eigen::VectorXd v = basis.eval_all(p);
      for (const auto& b : basis.blocks())
        CHECK(v.segment(b.offset, b.dim).squaredNorm() ==
              Catch::Approx(static_cast<double>(b.dim)).margin(1e-8));
    }
  }
}

TEST_CASE("truncated heat kernel basics") {
  const SpaceSpec s2 = make_space("sphere2");
  const EigenBasis basis = build_basis(s2, 110.0);
  const Point north = origin(s2);
  RngStream rng(5);
  const Point x = uniform_sample(s2, rng);

  // Long-time limit: only the constant survives.
  CHECK(heat_kernel_truncated(basis, north, x, 50.0) ==
        Catch::Approx(1.0).margin(1e-6));

  // Stochastic completeness via quadrature.
  const auto& q = basis.quadrature();
  double integral = 0;
  for (std::size_t i = 0; i < q.nodes.size(); ++i)
    integral +=
        q.weights[i] * heat_kernel_truncated(basis, north, q.nodes[i], 0.37);
  CHECK(integral == Catch::Approx(1.0).margin(1e-8));

  // Closed-form series oracle at the pole, t = 0.5 (60-digit arithmetic):
  // sum over h <= 10 of (2h+1) exp(-h(h+1)/2) = 2.3703369047514031726.
  CHECK(heat_kernel_truncated(basis, north, north, 0.5) ==
        Catch::Approx(2.3703369047514031726).margin(1e-10));

  // Rotation invariance.
  for (int t = 0; t < 10; ++t) {
    const Isometry g = haar_sample(s2, rng);
    const Point p = uniform_sample(s2, rng);
    const Point y = uniform_sample(s2, rng);
    CHECK(std::abs(heat_kernel_truncated(basis, apply(g, p), apply(g, y), 0.4) -
                   heat_kernel_truncated(basis, p, y, 0.4)) <= 1e-8);
  }

  // Truncated positivity for t >= 0.3 at lambda_max >= 110.
  for (double t : {0.3, 0.5}) {
    double min_val = std::numeric_limits<double>::infinity();
    for (const Point& node : q.nodes)
      min_val = std::min(min_val, heat_kernel_truncated(basis, north, node, t));
    CHECK(min_val >= -1e-3);
  }
}

TEST_CASE("select_lambda_max formula and monotonicity") {
  const SpaceSpec s2 = make_space("sphere2");
  // 60-digit oracle: eta = 1, d = 2, eps = 0.05 -> 29886.499931802728573.
  CHECK(select_lambda_max(0.05, 1.0, s2) ==
        Catch::Approx(29886.499931802728573).epsilon(1e-12));
  // When the eta branch is active, halving eta quadruples 4^{k/2} (d = 2).
  const double big = select_lambda_max(0.05, std::pow(2.0, -12), s2);
  const double bigger = select_lambda_max(0.05, std::pow(2.0, -13), s2);
  CHECK(bigger / big == Catch::Approx(4.0).epsilon(1e-12));
  // Nondecreasing as epsilon decreases.
  double prev = 0;
  for (double eps : {0.06, 0.05, 0.04, 0.03}) {
    const double lam = select_lambda_max(eps, 1.0, s2);
    CHECK(lam >= prev);
    prev = lam;
  }
  CHECK_THROWS_AS(select_lambda_max(0.5, 1.0, s2), InvalidEpsilon);
}

TEST_CASE("truncation tail mass obeys the eta^2 bound") {
  const SpaceSpec s2 = make_space("sphere2");
  for (double eps : {0.03, 0.05}) {
    for (double eta : {1.0, 0.5, 0.25}) {
      const double lam_inf = select_lambda_max(eps, eta, s2);
      // Direct series: sum over lambda > lam_inf of exp(-2 lambda eps^2) d_lambda.
      double tail = 0;
      for (long long h = 0; h <= 20000; ++h) {
        const double lam = static_cast<double>(h) * (h + 1);
        if (lam <= lam_inf) continue;
        tail += (2.0 * h + 1.0) * std::exp(-2.0 * lam * eps * eps);
      }
      CHECK(tail <= s2.c_m * eta * eta);
    }
  }
}

TEST_CASE("design discrepancy: octahedron, single point, constant block") {
  const SpaceSpec s2 = make_space("sphere2");
  const EigenBasis basis = build_basis(s2, 12.0);

  const DesignDiscrepancy oct = design_discrepancy(octahedron(s2), basis, 2.0);
  REQUIRE(oct.per_block.size() == 2);
  CHECK(oct.per_block[0].second == 0.0);          // constant block
  CHECK(oct.per_block[1].second <= 1e-12);        // degree-1 harmonics

  PointCloud single;
  single.space = s2;
  RngStream rng(9);
  single.points.push_back(uniform_sample(s2, rng));
  const DesignDiscrepancy one = design_discrepancy(single, basis, 12.0);
  // Addition theorem: sqrt(3 + 5 + 7) = sqrt(15).
  CHECK(one.worst == Catch::Approx(std::sqrt(15.0)).margin(1e-8));

  CHECK_THROWS_AS(design_discrepancy(single, basis, 20.0), BasisTooSmall);
}

TEST_CASE("averaging matrices: identity, contraction, block structure") {
  const SpaceSpec s2 = make_space("sphere2");
  const EigenBasis basis = build_basis(s2, 12.0);
  const int dim = basis.total_dim();

  const Eigen::MatrixXd at_id = averaging_matrix(basis, identity_isometry(s2));
  CHECK((at_id - Eigen::MatrixXd::Identity(dim, dim)).cwiseAbs().maxCoeff() <=
        1e-10);

  RngStream rng(12);
  for (int t = 0; t < 8; ++t) {
    const Isometry g = haar_sample(s2, rng);
    const Eigen::MatrixXd m = averaging_matrix(basis, g);
    CHECK((m - m.transpose()).cwiseAbs().maxCoeff() <= 1e-8);
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
    CHECK(es.eigenvalues().minCoeff() >= -1e-8);
    CHECK(es.eigenvalues().maxCoeff() <= 1.0 + 1e-8);
    // Rotations preserve each eigenspace: off-block entries vanish.
    for (const auto& b1 : basis.blocks())
      for (const auto& b2 : basis.blocks()) {
        if (b1.lambda == b2.lambda) continue;
        CHECK(m.block(b1.offset, b2.offset, b1.dim, b2.dim)
                  .cwiseAbs()
                  .maxCoeff() <= 1e-8);
      }
  }
}

TEST_CASE("mean averaging matrix drifts towards I/2 (reduced size)") {
  const SpaceSpec s2 = make_space("sphere2");
  const EigenBasis basis = build_basis(s2, 12.0);
  const int dim = basis.total_dim();
  Eigen::MatrixXd mean = Eigen::MatrixXd::Zero(dim, dim);
  const int count = 500;
  RngStream rng(13);
  for (int i = 0; i < count; ++i)
    mean += averaging_matrix(basis, haar_sample(s2, rng));
  mean /= count;
  std::vector<int> keep;
  for (const auto& b : basis.blocks())
    if (b.lambda > 0)
      for (int j = 0; j < b.dim; ++j) keep.push_back(b.offset + j);
  Eigen::MatrixXd sub(keep.size(), keep.size());
  for (std::size_t r = 0; r < keep.size(); ++r)
    for (std::size_t c = 0; c < keep.size(); ++c)
      sub(r, c) = mean(keep[r], keep[c]);
  sub -= 0.5 * Eigen::MatrixXd::Identity(keep.size(), keep.size());
  CHECK(sub.operatorNorm() <= 0.2);
}

TEST_CASE("spectral gap check on degenerate and random alphabets") {
  const SpaceSpec s2 = make_space("sphere2");
  const EigenBasis basis = build_basis(s2, 12.0);

  Alphabet ident;
  ident.generators = {identity_isometry(s2)};
  ident.inverses = {identity_isometry(s2)};
  const SpectralGapResult r = spectral_gap_check(ident, basis);
  CHECK(r.max_eig == Catch::Approx(1.0).margin(1e-8));
  CHECK(r.min_eig == Catch::Approx(1.0).margin(1e-8));
  CHECK_FALSE(r.pass);

  const Alphabet a = generate_alphabet(s2, 30, 77);
  const SpectralGapResult r2 = spectral_gap_check(a, basis);
  CHECK(r2.min_eig >= -1e-8);
  CHECK(r2.max_eig <= 1.0 + 1e-8);
}

TEST_CASE("heat kernel stays inside a two-sided Gaussian envelope band") {
  const SpaceSpec s2 = make_space("sphere2");
  const EigenBasis basis = build_basis(s2, 110.0);
  RngStream rng(7);
  std::vector<Point> xs;
  for (int i = 0; i < 200; ++i) xs.push_back(uniform_sample(s2, rng));
  const Point p = uniform_sample(s2, rng);
  for (double t : {0.3, 0.5, 0.8}) {
    const EnvelopeRatioRange r = heat_envelope_ratio_range(basis, t, xs, p);
    CHECK(r.min_ratio > 0.0);
    CHECK(r.max_ratio / r.min_ratio <= 5.0);
  }
  CHECK_THROWS_AS(heat_envelope_ratio_range(basis, 1.5, xs, p), Error);
}

TEST_CASE("design discrepancy shrinks with word length (statistical)") {
  const SpaceSpec s2 = make_space("sphere2");
  const EigenBasis basis = build_basis(s2, 12.0);
  int good = 0;
  for (int seed = 0; seed < 10; ++seed) {
    const Alphabet a = generate_alphabet(s2, 4, 3000 + seed);
    const PointCloud c3 = enumerate_cloud(s2, a, 3, origin(s2));
    const PointCloud c4 = enumerate_cloud(s2, a, 4, origin(s2));
    if (design_discrepancy(c4, basis, 12.0).worst <=
        design_discrepancy(c3, basis, 12.0).worst)
      ++good;
  }
  CHECK(good >= 8);
}
