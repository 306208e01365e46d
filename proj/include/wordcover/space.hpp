#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "wordcover/errors.hpp"
#include "wordcover/rng.hpp"

namespace wordcover {

inline constexpr double kPi = 3.141592653589793238462643383279502884;

/// Upper end of the admissible epsilon range, 2^{-e}.
inline constexpr double kEpsilonUpper = 0.15195522325791296;

// ---------------------------------------------------------------------------
// SpaceSpec
// ---------------------------------------------------------------------------

enum class SpaceFamily { sphere, so3 };

/// Immutable descriptor of a concrete symmetric space.
///
/// Shipped spaces: round spheres S^d (1 <= d <= 6) embedded in R^{d+1},
/// and SO(3) as a manifold, embedded in R^9 via 3x3 matrices with the
/// bi-invariant metric scaled so geodesic distance equals rotation angle.
struct SpaceSpec {
  SpaceFamily family = SpaceFamily::sphere;
  int dim_m = 2;            // manifold dimension d_M
  int antipodal_dim = 0;    // \bar d_M; enters formulas only, default 0
  double c_m = 1.0;         // space constant C_M (heuristic default 1.0)
  double v_m = 1.0;         // 1 / Riemannian volume
  double diameter = kPi;
  double injectivity_radius = kPi;
  int ambient_dim = 3;

  std::string name() const {
    if (family == SpaceFamily::so3) return "so3";
    return "sphere" + std::to_string(dim_m);
  }
};

struct SpaceOverrides {
  std::optional<double> c_m;
  std::optional<double> v_m;
  std::optional<int> antipodal_dim;
};

namespace detail {
inline double sphere_volume(int d) {
  // Vol(S^d) = 2 pi^{(d+1)/2} / Gamma((d+1)/2)
  return 2.0 * std::pow(kPi, 0.5 * (d + 1)) / std::tgamma(0.5 * (d + 1));
}
}  // namespace detail

inline SpaceSpec make_space(SpaceFamily family, int sphere_dim = 2,
                            const SpaceOverrides& overrides = {}) {
  SpaceSpec s;
  s.family = family;
  if (family == SpaceFamily::sphere) {
    if (sphere_dim < 1 || sphere_dim > 6)
      throw UnsupportedSpace("sphere dimension must be in [1, 6], got " +
                             std::to_string(sphere_dim));
    s.dim_m = sphere_dim;
    s.ambient_dim = sphere_dim + 1;
    s.v_m = 1.0 / detail::sphere_volume(sphere_dim);
  } else {
    s.dim_m = 3;
    s.ambient_dim = 9;
    // RP^3 with the angle metric has volume 8 pi^2.
    s.v_m = 1.0 / (8.0 * kPi * kPi);
  }
  s.diameter = kPi;
  s.injectivity_radius = kPi;
  s.antipodal_dim = 0;
  s.c_m = 1.0;
  if (overrides.c_m) {
    if (*overrides.c_m <= 0) throw Error("override c_m must be positive");
    s.c_m = *overrides.c_m;
  }
  if (overrides.v_m) {
    if (*overrides.v_m <= 0) throw Error("override v_m must be positive");
    s.v_m = *overrides.v_m;
  }
  if (overrides.antipodal_dim) {
    const int bd = *overrides.antipodal_dim;
    if (bd < 0 || bd >= s.dim_m)
      throw Error("override antipodal_dim must satisfy 0 <= bd < dim");
    s.antipodal_dim = bd;
  }
  return s;
}

/// Accepts "sphere1" .. "sphere6" and "so3".
inline SpaceSpec make_space(const std::string& name,
                            const SpaceOverrides& overrides = {}) {
  if (name == "so3") return make_space(SpaceFamily::so3, 3, overrides);
  if (name.rfind("sphere", 0) == 0 && name.size() == 7) {
    const int d = name[6] - '0';
    if (d >= 1 && d <= 6) return make_space(SpaceFamily::sphere, d, overrides);
  }
  throw UnsupportedSpace("unsupported space id: " + name);
}

// ---------------------------------------------------------------------------
// Point and Isometry
// ---------------------------------------------------------------------------

/// A point on the embedded manifold: a unit vector for S^d, a flattened
/// (row-major) 3x3 rotation matrix for SO(3).
struct Point {
  Eigen::VectorXd coords;
};

/// An element of the isometry group.
/// Spheres: `left` in SO(d+1) acting by x -> left x (right unused, 0x0).
/// SO(3) manifold: a pair (left, right) of SO(3) matrices acting by
/// g -> left g right^T.
struct Isometry {
  Eigen::MatrixXd left;
  Eigen::MatrixXd right;
};

inline Eigen::Matrix3d point_to_matrix(const Point& p) {
  if (p.coords.size() != 9) throw DimensionMismatch("SO(3) point must have 9 coords");
  Eigen::Matrix3d m;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) m(r, c) = p.coords[3 * r + c];
  return m;
}

inline Point matrix_to_point(const Eigen::Matrix3d& m) {
  Point p;
  p.coords.resize(9);
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) p.coords[3 * r + c] = m(r, c);
  return p;
}

/// Base point o: north pole for spheres, the identity rotation for SO(3).
inline Point origin(const SpaceSpec& spec) {
  Point p;
  if (spec.family == SpaceFamily::sphere) {
    p.coords = Eigen::VectorXd::Zero(spec.ambient_dim);
    p.coords[spec.ambient_dim - 1] = 1.0;
  } else {
    p = matrix_to_point(Eigen::Matrix3d::Identity());
  }
  return p;
}

inline bool on_manifold(const SpaceSpec& spec, const Point& p, double tol = 1e-12) {
  if (p.coords.size() != spec.ambient_dim) return false;
  if (spec.family == SpaceFamily::sphere)
    return std::abs(p.coords.norm() - 1.0) <= tol;
  const Eigen::Matrix3d m = point_to_matrix(p);
  const double ortho = (m.transpose() * m - Eigen::Matrix3d::Identity())
                           .cwiseAbs()
                           .maxCoeff();
  return ortho <= tol && std::abs(m.determinant() - 1.0) <= tol;
}

inline bool is_rotation(const Eigen::MatrixXd& m, double tol = 1e-12) {
  if (m.rows() != m.cols() || m.rows() == 0) return false;
  const double ortho =
      (m.transpose() * m - Eigen::MatrixXd::Identity(m.rows(), m.cols()))
          .cwiseAbs()
          .maxCoeff();
  return ortho <= tol && std::abs(m.determinant() - 1.0) <= tol;
}

inline bool valid_isometry(const SpaceSpec& spec, const Isometry& g,
                           double tol = 1e-12) {
  if (spec.family == SpaceFamily::sphere)
    return g.left.rows() == spec.ambient_dim && is_rotation(g.left, tol);
  return g.left.rows() == 3 && g.right.rows() == 3 && is_rotation(g.left, tol) &&
         is_rotation(g.right, tol);
}

inline Isometry identity_isometry(const SpaceSpec& spec) {
  Isometry g;
  if (spec.family == SpaceFamily::sphere) {
    g.left = Eigen::MatrixXd::Identity(spec.ambient_dim, spec.ambient_dim);
  } else {
    g.left = Eigen::Matrix3d::Identity();
    g.right = Eigen::Matrix3d::Identity();
  }
  return g;
}

// ---------------------------------------------------------------------------
// Metric and group action
// ---------------------------------------------------------------------------

inline double geodesic_distance(const SpaceSpec& spec, const Point& p,
                                const Point& q) {
  if (p.coords.size() != spec.ambient_dim || q.coords.size() != spec.ambient_dim)
    throw DimensionMismatch("point dimension does not match space");
  // acos is ill-conditioned at 1, so identical points would otherwise come
  // out ~1e-8 apart.
  if ((p.coords.array() == q.coords.array()).all()) return 0.0;
  if (spec.family == SpaceFamily::sphere) {
    const double c = std::clamp(p.coords.dot(q.coords), -1.0, 1.0);
    return std::acos(c);
  }
  // Angle of the relative rotation p^T q: theta = arccos((tr - 1) / 2).
  const Eigen::Matrix3d rel = point_to_matrix(p).transpose() * point_to_matrix(q);
  const double c = std::clamp(0.5 * (rel.trace() - 1.0), -1.0, 1.0);
  return std::acos(c);
}

inline Point apply(const Isometry& g, const Point& p) {
  if (g.right.size() == 0) {
    if (g.left.cols() != p.coords.size())
      throw DimensionMismatch("isometry/point dimension mismatch");
    return Point{g.left * p.coords};
  }
  if (p.coords.size() != 9)
    throw DimensionMismatch("SO(3) isometry applied to non-SO(3) point");
  return matrix_to_point(g.left * point_to_matrix(p) * g.right.transpose());
}

inline Isometry invert(const Isometry& g) {
  Isometry inv;
  inv.left = g.left.transpose();
  if (g.right.size() != 0) inv.right = g.right.transpose();
  return inv;
}

/// compose(a, b) acts as a after b: (a o b)(x) = a(b(x)).
inline Isometry compose(const Isometry& a, const Isometry& b) {
  if ((a.right.size() == 0) != (b.right.size() == 0) ||
      a.left.cols() != b.left.rows())
    throw DimensionMismatch("isometry composition dimension mismatch");
  Isometry c;
  c.left = a.left * b.left;
  if (a.right.size() != 0) c.right = a.right * b.right;
  return c;
}

// ---------------------------------------------------------------------------
// Sampling
// ---------------------------------------------------------------------------

namespace detail {

/// Haar-distributed element of SO(n): Gaussian matrix -> QR factorization ->
/// multiply each Q column by the sign of the corresponding R diagonal entry
/// -> if det = -1, negate the last column. Raw QR is not Haar-distributed;
/// the sign correction makes Q Haar on O(n) and the last-column flip maps the
/// det = -1 coset onto SO(n) measure-preservingly. Degenerate QR inputs
/// (zero R diagonal) are resolved by resampling.
inline Eigen::MatrixXd haar_rotation(int n, RngStream& rng) {
  for (;;) {
    Eigen::MatrixXd a(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) a(i, j) = rng.gaussian();
    const Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
    Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(n, n);
    const Eigen::VectorXd rdiag = qr.matrixQR().diagonal();
    bool degenerate = false;
    for (int j = 0; j < n; ++j) {
      if (rdiag[j] == 0.0) {
        degenerate = true;
        break;
      }
      if (rdiag[j] < 0.0) q.col(j) = -q.col(j);
    }
    if (degenerate) continue;
    if (q.determinant() < 0.0) q.col(n - 1) = -q.col(n - 1);
    return q;
  }
}

}  // namespace detail

/// Haar-distributed element of the isometry group.
inline Isometry haar_sample(const SpaceSpec& spec, RngStream& rng) {
  Isometry g;
  if (spec.family == SpaceFamily::sphere) {
    g.left = detail::haar_rotation(spec.ambient_dim, rng);
  } else {
    g.left = detail::haar_rotation(3, rng);
    g.right = detail::haar_rotation(3, rng);
  }
  return g;
}

/// Point distributed per the Haar-induced probability measure sigma^M.
inline Point uniform_sample(const SpaceSpec& spec, RngStream& rng) {
  if (spec.family == SpaceFamily::sphere) {
    Point p;
    p.coords.resize(spec.ambient_dim);
    for (;;) {
      for (int i = 0; i < spec.ambient_dim; ++i) p.coords[i] = rng.gaussian();
      const double norm = p.coords.norm();
      if (norm > 1e-12) {
        p.coords /= norm;
        return p;
      }
    }
  }
  return apply(haar_sample(spec, rng), origin(spec));
}

// ---------------------------------------------------------------------------
// Spectral data
// ---------------------------------------------------------------------------

struct EigenLevel {
  double lambda;
  long long multiplicity;
};

namespace detail {
inline long long binom(long long n, long long k) {
  if (k < 0 || k > n) return 0;
  long long r = 1;
  for (long long i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}
}  // namespace detail

/// Laplace-Beltrami eigenvalues of -Delta with multiplicities, ascending,
/// truncated at max_lambda. S^d: lambda_h = h(h + d - 1) with multiplicity
/// binom(d+h, h) - binom(d+h-2, h-2); SO(3): lambda_j = j(j+1) with
/// multiplicity (2j+1)^2 under the chosen normalization.
inline std::vector<EigenLevel> eigen_data(const SpaceSpec& spec,
                                          double max_lambda) {
  std::vector<EigenLevel> out;
  if (max_lambda < 0) return out;
  if (spec.family == SpaceFamily::sphere) {
    const int d = spec.dim_m;
    for (long long h = 0;; ++h) {
      const double lambda = static_cast<double>(h) * (h + d - 1);
      if (lambda > max_lambda) break;
      const long long mult =
          (h == 0) ? 1
                   : detail::binom(d + h, h) - detail::binom(d + h - 2, h - 2);
      out.push_back({lambda, mult});
    }
  } else {
    for (long long j = 0;; ++j) {
      const double lambda = static_cast<double>(j) * (j + 1);
      if (lambda > max_lambda) break;
      out.push_back({lambda, (2 * j + 1) * (2 * j + 1)});
    }
  }
  return out;
}

}  // namespace wordcover
