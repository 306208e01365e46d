#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <vector>

#include "wordcover/cover.hpp"
#include "wordcover/errors.hpp"
#include "wordcover/parallel.hpp"
#include "wordcover/space.hpp"

namespace wordcover {

// ---------------------------------------------------------------------------
// Quadrature
// ---------------------------------------------------------------------------

/// Nodes and probability weights integrating band-limited functions exactly:
/// trapezoid on S^1, Gauss-Legendre in cos(theta) x uniform azimuth on S^2,
/// Euler-angle product quadrature on SO(3).
struct Quadrature {
  std::vector<Point> nodes;
  std::vector<double> weights;
};

namespace detail {

/// Gauss-Legendre nodes/weights on [-1, 1] by Newton iteration.
inline void gauss_legendre(int n, std::vector<double>& x, std::vector<double>& w) {
  x.assign(n, 0.0);
  w.assign(n, 0.0);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double z = std::cos(kPi * (i + 0.75) / (n + 0.5));
    double pp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0, p1 = 0.0;
      for (int k = 0; k < n; ++k) {
        const double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * k + 1.0) * z * p1 - k * p2) / (k + 1.0);
      }
      pp = n * (z * p0 - p1) / (z * z - 1.0);
      const double dz = p0 / pp;
      z -= dz;
      if (std::abs(dz) < 1e-15) break;
    }
    x[i] = -z;
    x[n - 1 - i] = z;
    w[i] = 2.0 / ((1.0 - z * z) * pp * pp);
    w[n - 1 - i] = w[i];
  }
}

inline Eigen::Matrix3d euler_zyz(double alpha, double beta, double gamma) {
  const auto rz = [](double a) {
    Eigen::Matrix3d r = Eigen::Matrix3d::Identity();
    r(0, 0) = std::cos(a);
    r(0, 1) = -std::sin(a);
    r(1, 0) = std::sin(a);
    r(1, 1) = std::cos(a);
    return r;
  };
  const auto ry = [](double b) {
    Eigen::Matrix3d r = Eigen::Matrix3d::Identity();
    r(0, 0) = std::cos(b);
    r(0, 2) = std::sin(b);
    r(2, 0) = -std::sin(b);
    r(2, 2) = std::cos(b);
    return r;
  };
  return rz(alpha) * ry(beta) * rz(gamma);
}

}  // namespace detail

/// Quadrature exact (to roundoff) for products of eigenfunctions up to the
/// given band (max polynomial degree of the integrand).
inline Quadrature build_quadrature(const SpaceSpec& spec, int band) {
  Quadrature q;
  band = std::max(band, 1);
  if (spec.family == SpaceFamily::sphere && spec.dim_m == 1) {
    const int n = 2 * band + 2;
    for (int i = 0; i < n; ++i) {
      const double th = 2.0 * kPi * i / n;
      Point p;
      p.coords.resize(2);
      p.coords << std::cos(th), std::sin(th);
      q.nodes.push_back(p);
      q.weights.push_back(1.0 / n);
    }
    return q;
  }
  if (spec.family == SpaceFamily::sphere && spec.dim_m == 2) {
    std::vector<double> gx, gw;
    detail::gauss_legendre(band + 1, gx, gw);
    const int nphi = 2 * band + 2;
    for (std::size_t iu = 0; iu < gx.size(); ++iu) {
      const double u = gx[iu];
      const double s = std::sqrt(std::max(0.0, 1.0 - u * u));
      for (int ip = 0; ip < nphi; ++ip) {
        const double phi = 2.0 * kPi * ip / nphi;
        Point p;
        p.coords.resize(3);
        p.coords << s * std::cos(phi), s * std::sin(phi), u;
        q.nodes.push_back(p);
        q.weights.push_back(0.5 * gw[iu] / nphi);
      }
    }
    return q;
  }
  if (spec.family == SpaceFamily::so3) {
    std::vector<double> gx, gw;
    detail::gauss_legendre(band + 1, gx, gw);
    const int nang = 2 * band + 2;
    for (int ia = 0; ia < nang; ++ia) {
      const double alpha = 2.0 * kPi * ia / nang;
      for (std::size_t ib = 0; ib < gx.size(); ++ib) {
        const double beta = std::acos(gx[ib]);
        for (int ig = 0; ig < nang; ++ig) {
          const double gamma = 2.0 * kPi * ig / nang;
          q.nodes.push_back(
              matrix_to_point(detail::euler_zyz(alpha, beta, gamma)));
          q.weights.push_back(0.5 * gw[ib] / (nang * nang));
        }
      }
    }
    return q;
  }
  throw UnsupportedSpace("quadrature shipped for sphere1, sphere2, so3 only");
}

// ---------------------------------------------------------------------------
// Eigenbasis
// ---------------------------------------------------------------------------

namespace detail {

/// Fully normalized associated Legendre table F[h][m] such that the real
/// harmonics Y_{h,0} = F[h][0], Y_{h,m} = sqrt(2) F[h][m] {cos,sin}(m phi)
/// are orthonormal with respect to the probability measure on S^2.
inline void legendre_table(int hmax, double cos_theta, double sin_theta,
                           std::vector<std::vector<double>>& f) {
  f.assign(hmax + 1, {});
  for (int h = 0; h <= hmax; ++h) f[h].assign(h + 1, 0.0);
  f[0][0] = 1.0;
  for (int m = 1; m <= hmax; ++m)
    f[m][m] = sin_theta * std::sqrt((2.0 * m + 1.0) / (2.0 * m)) * f[m - 1][m - 1];
  for (int m = 0; m < hmax; ++m)
    f[m + 1][m] = std::sqrt(2.0 * m + 3.0) * cos_theta * f[m][m];
  for (int m = 0; m <= hmax; ++m) {
    for (int h = m + 2; h <= hmax; ++h) {
      const double a = std::sqrt((4.0 * h * h - 1.0) /
                                 (static_cast<double>(h) * h - m * m));
      const double b = std::sqrt(((h - 1.0) * (h - 1.0) - m * m) /
                                 (4.0 * (h - 1.0) * (h - 1.0) - 1.0));
      f[h][m] = a * (cos_theta * f[h - 1][m] - b * f[h - 2][m]);
    }
  }
}

/// All real spherical harmonics of degree exactly h at a unit vector,
/// ordered [m=0, cos m=1, sin m=1, cos m=2, sin m=2, ...].
inline void real_sph_harm_degree(int h, const Eigen::Vector3d& u,
                                 double* out) {
  const double ct = u[2];
  const double st = std::sqrt(std::max(0.0, 1.0 - ct * ct));
  const double phi = std::atan2(u[1], u[0]);
  std::vector<std::vector<double>> f;
  legendre_table(h, ct, st, f);
  out[0] = f[h][0];
  for (int m = 1; m <= h; ++m) {
    const double c = std::sqrt(2.0) * f[h][m];
    out[2 * m - 1] = c * std::cos(m * phi);
    out[2 * m] = c * std::sin(m * phi);
  }
}

}  // namespace detail

/// Orthonormal Laplace-Beltrami eigenfunctions up to lambda_max, grouped by
/// eigenvalue, orthonormal with respect to the probability measure sigma^M.
///
/// S^1: {1, sqrt(2) cos(h th), sqrt(2) sin(h th)}.
/// S^2: real spherical harmonics scaled so the sigma^M-norm is 1.
/// SO(3): matrix coefficients sqrt(2j+1) T^j_{ab}(g) of the real
/// (2j+1)-dimensional representation; T^j(g) is recovered by solving the
/// linear system Y_j(g^T u_s) = T^j(g) Y_j(u_s) on a fixed sample of
/// directions u_s (least squares against a precomputed pseudoinverse).
class EigenBasis {
 public:
  struct Block {
    double lambda = 0.0;
    int degree = 0;  // h for spheres, j for SO(3)
    int dim = 0;
    int offset = 0;
  };

  EigenBasis(const SpaceSpec& spec, double lambda_max) : space_(spec) {
    if (spec.family == SpaceFamily::sphere && spec.dim_m > 2)
      throw UnsupportedSpace(
          "eigenbasis evaluation is shipped for sphere1, sphere2, so3");
    lambda_max_ = lambda_max;
    const auto levels = eigen_data(spec, lambda_max);
    total_dim_ = 0;
    int degree = 0;
    for (const auto& lv : levels) {
      Block b;
      b.lambda = lv.lambda;
      b.degree = degree++;
      b.dim = static_cast<int>(lv.multiplicity);
      b.offset = total_dim_;
      total_dim_ += b.dim;
      blocks_.push_back(b);
    }
    if (total_dim_ > 4096)
      throw DimensionBudgetExceeded("eigenbasis dimension budget is 4096, got " +
                                    std::to_string(total_dim_));
    max_degree_ = blocks_.empty() ? 0 : blocks_.back().degree;

    if (spec.family == SpaceFamily::so3) prepare_so3_solvers();

    quadrature_ = build_quadrature(spec, std::max(1, 2 * max_degree_));
    node_values_.resize(total_dim_, quadrature_.nodes.size());
    parallel_for(quadrature_.nodes.size(), [&](std::size_t qi) {
      node_values_.col(qi) = eval_all(quadrature_.nodes[qi]);
    });
  }

  const SpaceSpec& space() const { return space_; }
  double lambda_max() const { return lambda_max_; }
  const std::vector<Block>& blocks() const { return blocks_; }
  int total_dim() const { return total_dim_; }
  const Quadrature& quadrature() const { return quadrature_; }
  const Eigen::MatrixXd& node_values() const { return node_values_; }

  /// Values of every basis function at p, flattened in block order.
  Eigen::VectorXd eval_all(const Point& p) const {
    Eigen::VectorXd out(total_dim_);
    if (space_.family == SpaceFamily::sphere && space_.dim_m == 1) {
      const double th = std::atan2(p.coords[1], p.coords[0]);
      for (const Block& b : blocks_) {
        if (b.degree == 0) {
          out[b.offset] = 1.0;
        } else {
          out[b.offset] = std::sqrt(2.0) * std::cos(b.degree * th);
          out[b.offset + 1] = std::sqrt(2.0) * std::sin(b.degree * th);
        }
      }
      return out;
    }
    if (space_.family == SpaceFamily::sphere) {
      const double ct = p.coords[2];
      const double st = std::sqrt(std::max(0.0, 1.0 - ct * ct));
      const double phi = std::atan2(p.coords[1], p.coords[0]);
      std::vector<std::vector<double>> f;
      detail::legendre_table(max_degree_, ct, st, f);
      for (const Block& b : blocks_) {
        const int h = b.degree;
        out[b.offset] = f[h][0];
        for (int m = 1; m <= h; ++m) {
          const double c = std::sqrt(2.0) * f[h][m];
          out[b.offset + 2 * m - 1] = c * std::cos(m * phi);
          out[b.offset + 2 * m] = c * std::sin(m * phi);
        }
      }
      return out;
    }
    // SO(3)
    const Eigen::Matrix3d g = point_to_matrix(p);
    for (const Block& b : blocks_) {
      const int j = b.degree;
      if (j == 0) {
        out[b.offset] = 1.0;
        continue;
      }
      const int d = 2 * j + 1;
      const auto& dirs = so3_dirs_[j];
      Eigen::MatrixXd m(d, dirs.cols());
      std::vector<double> row(d);
      for (Eigen::Index s = 0; s < dirs.cols(); ++s) {
        const Eigen::Vector3d v = g.transpose() * dirs.col(s);
        detail::real_sph_harm_degree(j, v, row.data());
        for (int a = 0; a < d; ++a) m(a, s) = row[a];
      }
      const Eigen::MatrixXd t = m * so3_pinv_[j];  // d x d rep matrix
      const double scale = std::sqrt(static_cast<double>(d));
      for (int a = 0; a < d; ++a)
        for (int c = 0; c < d; ++c) out[b.offset + a * d + c] = scale * t(a, c);
    }
    return out;
  }

  /// Single basis function as a callable, for callers that want handles.
  std::function<double(const Point&)> function_handle(int block_index,
                                                      int j) const {
    const Block b = blocks_.at(block_index);
    if (j < 0 || j >= b.dim) throw Error("basis function index out of range");
    return [this, b, j](const Point& p) { return eval_all(p)[b.offset + j]; };
  }

 private:
  void prepare_so3_solvers() {
    const int jmax = max_degree_;
    so3_dirs_.resize(jmax + 1);
    so3_pinv_.resize(jmax + 1);
    for (int j = 1; j <= jmax; ++j) {
      const int d = 2 * j + 1;
      const int nsamp = 2 * d;
      Eigen::MatrixXd dirs(3, nsamp);
      for (int s = 0; s < nsamp; ++s) {
        // Fibonacci sphere points: well spread, fixed, no RNG involved.
        const double z = 1.0 - 2.0 * (s + 0.5) / nsamp;
        const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
        const double phi = 2.0 * kPi * s * 0.6180339887498949;
        dirs.col(s) << r * std::cos(phi), r * std::sin(phi), z;
      }
      Eigen::MatrixXd basis_at_dirs(d, nsamp);
      std::vector<double> row(d);
      for (int s = 0; s < nsamp; ++s) {
        detail::real_sph_harm_degree(j, dirs.col(s), row.data());
        for (int a = 0; a < d; ++a) basis_at_dirs(a, s) = row[a];
      }
      // T = M B^+ with B^+ = B^T (B B^T)^{-1}.
      const Eigen::MatrixXd bbt = basis_at_dirs * basis_at_dirs.transpose();
      so3_pinv_[j] = basis_at_dirs.transpose() * bbt.inverse();
      so3_dirs_[j] = std::move(dirs);
    }
  }

  SpaceSpec space_;
  double lambda_max_ = 0.0;
  std::vector<Block> blocks_;
  int total_dim_ = 0;
  int max_degree_ = 0;
  Quadrature quadrature_;
  Eigen::MatrixXd node_values_;
  std::vector<Eigen::MatrixXd> so3_dirs_;
  std::vector<Eigen::MatrixXd> so3_pinv_;
};

inline EigenBasis build_basis(const SpaceSpec& spec, double lambda_max) {
  return EigenBasis(spec, lambda_max);
}

// ---------------------------------------------------------------------------
// Spectral operations
// ---------------------------------------------------------------------------

/// Truncated heat kernel sum_{lambda <= lambda_max} e^{-lambda t}
/// sum_j phi_{lambda,j}(p) phi_{lambda,j}(x). Time convention is
/// e^{-lambda t} throughout (no 1/2 factor).
inline double heat_kernel_truncated(const EigenBasis& basis, const Point& p,
                                    const Point& x, double t) {
  if (!(t > 0.0)) throw Error("heat kernel time must be positive");
  const Eigen::VectorXd fp = basis.eval_all(p);
  const Eigen::VectorXd fx = basis.eval_all(x);
  double total = 0.0;
  for (const auto& b : basis.blocks()) {
    const double block_dot =
        fp.segment(b.offset, b.dim).dot(fx.segment(b.offset, b.dim));
    total += std::exp(-b.lambda * t) * block_dot;
  }
  return total;
}

/// Truncation level lambda_inf = 4^{k_eta / d} with
/// k_eta = max(2 + 2 log2(1/eta),
///             (d/2) log2(d / 2eps^2) + d log2 log2(d / 2eps^2)).
inline double select_lambda_max(double epsilon, double eta,
                                const SpaceSpec& spec) {
  if (!(epsilon > 0.0) || !(epsilon < kEpsilonUpper))
    throw InvalidEpsilon("epsilon must lie in (0, 2^-e)");
  if (!(eta > 0.0)) throw Error("eta must be positive");
  const double d = spec.dim_m;
  const double u = d / (2.0 * epsilon * epsilon);
  const double k_eta = std::max(2.0 + 2.0 * std::log2(1.0 / eta),
                                0.5 * d * std::log2(u) +
                                    d * std::log2(std::log2(u)));
  return std::pow(4.0, k_eta / d);
}

struct DesignDiscrepancy {
  double worst = 0.0;
  std::vector<std::pair<double, double>> per_block;  // (lambda, block norm)
};

/// Exact sup over unit-L2 test functions in E_{lambda_r} of
/// |mean over the cloud - integral|: the Euclidean norm of the vector of
/// basis-mean defects. The constant block's defect is mean(1) - 1 = 0.
inline DesignDiscrepancy design_discrepancy(const PointCloud& cloud,
                                            const EigenBasis& basis,
                                            double lambda_r) {
  if (cloud.empty()) throw EmptyCloud("design_discrepancy needs a nonempty cloud");
  if (lambda_r > basis.lambda_max() + 1e-12)
    throw BasisTooSmall("basis covers lambda <= " +
                        std::to_string(basis.lambda_max()) +
                        " but lambda_r = " + std::to_string(lambda_r));
  const int dim = basis.total_dim();
  // Fixed 4096-point chunks, combined in chunk order: the mean is
  // independent of the thread count.
  const std::size_t chunk = 4096;
  const std::size_t nchunks = (cloud.size() + chunk - 1) / chunk;
  std::vector<Eigen::VectorXd> partial(nchunks, Eigen::VectorXd::Zero(dim));
  parallel_for(nchunks, [&](std::size_t c) {
    const std::size_t lo = c * chunk;
    const std::size_t hi = std::min(cloud.size(), lo + chunk);
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(dim);
    for (std::size_t i = lo; i < hi; ++i)
      acc += basis.eval_all(cloud.points[i]);
    partial[c] = acc;
  });
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(dim);
  for (const auto& acc : partial) mean += acc;
  mean /= static_cast<double>(cloud.size());

  DesignDiscrepancy out;
  double sq = 0.0;
  for (const auto& b : basis.blocks()) {
    if (b.lambda > lambda_r + 1e-12) break;
    Eigen::VectorXd defect = mean.segment(b.offset, b.dim);
    if (b.lambda == 0.0) defect.array() -= 1.0;
    const double norm = defect.norm();
    out.per_block.push_back({b.lambda, norm});
    sq += norm * norm;
  }
  out.worst = std::sqrt(sq);
  return out;
}

/// Matrix of the averaging operator
/// A_s(phi)(x) = phi(x)/2 + (phi(s x) + phi(s^-1 x))/4
/// in the eigenbasis, computed by band-limited quadrature projection:
/// M = I/2 + (P + P^T)/4 with P_{ij} = <phi_j o s, phi_i>.
inline Eigen::MatrixXd averaging_matrix(const EigenBasis& basis,
                                        const Isometry& iso) {
  const auto& quad = basis.quadrature();
  const int dim = basis.total_dim();
  const std::size_t nq = quad.nodes.size();
  Eigen::MatrixXd moved(dim, nq);
  parallel_for(nq, [&](std::size_t q) {
    moved.col(q) = basis.eval_all(apply(iso, quad.nodes[q]));
  });
  Eigen::VectorXd w(nq);
  for (std::size_t q = 0; q < nq; ++q) w[q] = quad.weights[q];
  const Eigen::MatrixXd p =
      basis.node_values() * w.asDiagonal() * moved.transpose();
  Eigen::MatrixXd m = 0.25 * (p + p.transpose());
  m += 0.5 * Eigen::MatrixXd::Identity(dim, dim);
  return m;
}

struct EnvelopeRatioRange {
  double min_ratio = 0.0;
  double max_ratio = 0.0;
};

/// Diagnostic for the Gaussian two-sided heat-kernel envelope
/// exp(-d(x,p)^2 / 4t) / (t_p^{(d - bd - 1)/2} t^{d/2}) with
/// t_p = t + diam - d(x,p): returns the min/max of the ratio of the
/// truncated kernel to the envelope over sample pairs. A healthy kernel
/// keeps the ratio inside a fixed positive band; the band constants are
/// space-dependent and not pinned here.
inline EnvelopeRatioRange heat_envelope_ratio_range(const EigenBasis& basis,
                                                    double t,
                                                    const std::vector<Point>& xs,
                                                    const Point& p) {
  if (!(t > 0.0) || !(t < 1.0)) throw Error("envelope diagnostic needs t in (0,1)");
  const SpaceSpec& spec = basis.space();
  EnvelopeRatioRange out{std::numeric_limits<double>::infinity(), 0.0};
  const double expo = 0.5 * (spec.dim_m - spec.antipodal_dim - 1);
  for (const Point& x : xs) {
    const double dist = geodesic_distance(spec, p, x);
    const double t_p = t + spec.diameter - dist;
    const double envelope = std::exp(-dist * dist / (4.0 * t)) /
                            (std::pow(t_p, expo) * std::pow(t, 0.5 * spec.dim_m));
    const double ratio = heat_kernel_truncated(basis, p, x, t) / envelope;
    out.min_ratio = std::min(out.min_ratio, ratio);
    out.max_ratio = std::max(out.max_ratio, ratio);
  }
  return out;
}

struct SpectralGapResult {
  double min_eig = 0.0;
  double max_eig = 0.0;
  bool pass = false;
};

/// Eigenvalue range of (1/k) sum_{s in S} A_s restricted to the lambda > 0
/// blocks; pass iff the range lies in [1/4 - 1e-8, 3/4 + 1e-8].
inline SpectralGapResult spectral_gap_check(const Alphabet& alphabet,
                                            const EigenBasis& basis) {
  if (alphabet.generators.empty()) throw Error("alphabet must be nonempty");
  const int dim = basis.total_dim();
  Eigen::MatrixXd mean = Eigen::MatrixXd::Zero(dim, dim);
  for (const Isometry& s : alphabet.generators)
    mean += averaging_matrix(basis, s);
  mean /= static_cast<double>(alphabet.generators.size());

  // Mask the constant block.
  std::vector<int> keep;
  for (const auto& b : basis.blocks())
    if (b.lambda > 0.0)
      for (int j = 0; j < b.dim; ++j) keep.push_back(b.offset + j);
  if (keep.empty()) throw BasisTooSmall("basis has no lambda > 0 block");
  Eigen::MatrixXd sub(keep.size(), keep.size());
  for (std::size_t r = 0; r < keep.size(); ++r)
    for (std::size_t c = 0; c < keep.size(); ++c)
      sub(r, c) = mean(keep[r], keep[c]);

  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(
      0.5 * (sub + sub.transpose()));
  SpectralGapResult out;
  out.min_eig = es.eigenvalues().minCoeff();
  out.max_eig = es.eigenvalues().maxCoeff();
  out.pass = out.min_eig >= 0.25 - 1e-8 && out.max_eig <= 0.75 + 1e-8;
  return out;
}

}  // namespace wordcover
