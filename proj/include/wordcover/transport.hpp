#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <vector>

#include <Eigen/Dense>

#include "wordcover/cover.hpp"
#include "wordcover/parallel.hpp"
#include "wordcover/space.hpp"

namespace wordcover {

enum class TransportMethod { exact_flow, sinkhorn, dual_lipschitz };

struct TransportPlanEntry {
  int from = 0;
  int to = 0;
  double mass = 0.0;
};

/// Estimated W1 value plus its certificate.
/// ExactFlow reports gap_bound = 0 and the optimal plan; Sinkhorn reports a
/// primal-feasible (rounded) value with a Kantorovich duality-gap bound.
struct TransportResult {
  double value = 0.0;
  TransportMethod method = TransportMethod::exact_flow;
  double reg = 0.0;
  double gap_bound = 0.0;
  bool converged = true;
  double cs_residual = 0.0;
  std::vector<TransportPlanEntry> plan;
};

namespace detail {

/// Primal network simplex specialized to the dense transportation problem:
/// m sources with integer supplies, n sinks with integer demands, all m*n
/// arcs present with real costs. Arcs are kept implicit; the basis is the
/// usual spanning tree with parent pointers, per-node parent-arc flow, and
/// subtree potential updates after each pivot.
class TransportationSimplex {
 public:
  TransportationSimplex(std::vector<std::int64_t> supply,
                        std::vector<std::int64_t> demand,
                        const Eigen::MatrixXd& cost)
      : m_(static_cast<int>(supply.size())),
        n_(static_cast<int>(demand.size())),
        supply_(std::move(supply)),
        demand_(std::move(demand)),
        cost_(cost) {
    const std::int64_t total_supply =
        std::accumulate(supply_.begin(), supply_.end(), std::int64_t(0));
    const std::int64_t total_demand =
        std::accumulate(demand_.begin(), demand_.end(), std::int64_t(0));
    if (total_supply != total_demand)
      throw Error("transportation problem must be balanced");
    if (m_ < 1 || n_ < 1) throw EmptyCloud("transport needs nonempty supports");
  }

  void solve() {
    build_initial_basis();
    const double scale = std::max(1.0, cost_.cwiseAbs().maxCoeff());
    const double enter_tol = 1e-13 * scale;
    const std::size_t arcs = static_cast<std::size_t>(m_) * n_;
    const std::size_t block =
        std::max<std::size_t>(64, static_cast<std::size_t>(std::sqrt(
                                      static_cast<double>(arcs))));
    const long long max_pivots =
        200000LL + 64LL * (static_cast<long long>(m_) + n_) *
                       static_cast<long long>(std::log2(m_ + n_ + 2) + 1);

    std::size_t cursor = 0;
    for (long long pivot = 0;; ++pivot) {
      if (pivot > max_pivots)
        throw Error("transportation simplex exceeded its pivot budget");
      int ei = -1, ej = -1;
      double best_rc = -enter_tol;
      std::size_t scanned = 0;
      while (scanned < arcs) {
        const std::size_t stop = std::min(arcs, cursor + block);
        for (std::size_t a = cursor; a < stop; ++a) {
          const int i = static_cast<int>(a / n_);
          const int j = static_cast<int>(a % n_);
          const double rc = cost_(i, j) - u_[i] - v_[j];
          if (rc < best_rc) {
            best_rc = rc;
            ei = i;
            ej = j;
          }
        }
        scanned += stop - cursor;
        cursor = (stop == arcs) ? 0 : stop;
        if (ei >= 0) break;
      }
      if (ei < 0) break;  // optimal
      pivot_on(ei, ej, best_rc);
    }
  }

  double objective_units() const {
    double total = 0.0;
    for (int node = 0; node < m_ + n_; ++node) {
      if (parent_[node] < 0) continue;
      const auto [i, j] = arc_of(node, parent_[node]);
      total += static_cast<double>(flow_to_parent_[node]) * cost_(i, j);
    }
    return total;
  }

  /// Basic arcs with positive flow, in units.
  std::vector<std::tuple<int, int, std::int64_t>> plan_units() const {
    std::vector<std::tuple<int, int, std::int64_t>> out;
    for (int node = 0; node < m_ + n_; ++node) {
      if (parent_[node] < 0 || flow_to_parent_[node] == 0) continue;
      const auto [i, j] = arc_of(node, parent_[node]);
      out.emplace_back(i, j, flow_to_parent_[node]);
    }
    std::sort(out.begin(), out.end());
    return out;
  }

  /// Max complementary-slackness violation over all arcs: basic/positive
  /// arcs must have zero reduced cost, all arcs nonnegative reduced cost.
  double cs_residual() const {
    double worst = 0.0;
    for (int node = 0; node < m_ + n_; ++node) {
      if (parent_[node] < 0) continue;
      const auto [i, j] = arc_of(node, parent_[node]);
      worst = std::max(worst, std::abs(cost_(i, j) - u_[i] - v_[j]));
    }
    for (int i = 0; i < m_; ++i)
      for (int j = 0; j < n_; ++j)
        worst = std::max(worst, -(cost_(i, j) - u_[i] - v_[j]));
    return worst;
  }

  const std::vector<double>& source_potentials() const { return u_; }
  const std::vector<double>& sink_potentials() const { return v_; }

 private:
  bool is_source(int node) const { return node < m_; }

  std::pair<int, int> arc_of(int a, int b) const {
    return is_source(a) ? std::make_pair(a, b - m_) : std::make_pair(b, a - m_);
  }

  /// Northwest-corner initial basis: a staircase spanning tree with exactly
  /// m + n - 1 basic arcs (zero-flow arcs appear on simultaneous exhaustion).
  void build_initial_basis() {
    const int nodes = m_ + n_;
    parent_.assign(nodes, -1);
    flow_to_parent_.assign(nodes, 0);
    children_.assign(nodes, {});
    u_.assign(m_, 0.0);
    v_.assign(n_, 0.0);

    std::vector<std::int64_t> a = supply_;
    std::vector<std::int64_t> b = demand_;
    std::vector<std::tuple<int, int, std::int64_t>> basic;
    basic.reserve(nodes - 1);
    int i = 0, j = 0;
    while (i < m_ && j < n_) {
      const std::int64_t f = std::min(a[i], b[j]);
      basic.emplace_back(i, j, f);
      a[i] -= f;
      b[j] -= f;
      if (a[i] == 0 && i + 1 < m_) {
        ++i;
      } else if (b[j] == 0) {
        ++j;
      } else {
        ++i;
      }
    }

    std::vector<std::vector<std::pair<int, std::int64_t>>> adj(nodes);
    for (const auto& [bi, bj, bf] : basic) {
      adj[bi].push_back({m_ + bj, bf});
      adj[m_ + bj].push_back({bi, bf});
    }
    // Root the tree at node 0 and set potentials so basic arcs are tight.
    std::vector<int> stack = {0};
    std::vector<char> seen(nodes, 0);
    seen[0] = 1;
    u_[0] = 0.0;
    while (!stack.empty()) {
      const int x = stack.back();
      stack.pop_back();
      for (const auto& [y, f] : adj[x]) {
        if (seen[y]) continue;
        seen[y] = 1;
        parent_[y] = x;
        flow_to_parent_[y] = f;
        children_[x].push_back(y);
        const auto [ai, aj] = arc_of(x, y);
        if (is_source(y))
          u_[y] = cost_(ai, aj) - v_[aj];
        else
          v_[y - m_] = cost_(ai, aj) - u_[ai];
        stack.push_back(y);
      }
    }
  }

  void pivot_on(int ei, int ej, double entering_rc) {
    const int s = ei;
    const int t = m_ + ej;
    // Find the tree paths from both endpoints to their LCA.
    static thread_local std::vector<int> mark;
    mark.assign(m_ + n_, 0);
    for (int x = s; x >= 0; x = parent_[x]) mark[x] = 1;
    int lca = t;
    while (lca >= 0 && !mark[lca]) lca = parent_[lca];

    // delta = min flow over arcs traversed against their direction; the
    // cycle is entering arc (s -> t), then t up to lca, then lca down to s.
    std::int64_t delta = std::numeric_limits<std::int64_t>::max();
    int leave_child = -1;
    for (int x = t; x != lca; x = parent_[x]) {
      // Traversal x -> parent(x); arc direction is source -> sink.
      if (!is_source(x)) {
        if (flow_to_parent_[x] < delta) {
          delta = flow_to_parent_[x];
          leave_child = x;
        }
      }
    }
    for (int x = s; x != lca; x = parent_[x]) {
      // Cycle traverses parent(x) -> x here; when x is a source the arc
      // points x -> parent and is traversed against its direction.
      if (is_source(x)) {
        if (flow_to_parent_[x] < delta) {
          delta = flow_to_parent_[x];
          leave_child = x;
        }
      }
    }

    // Apply the circulation.
    for (int x = t; x != lca; x = parent_[x])
      flow_to_parent_[x] += is_source(x) ? delta : -delta;
    for (int x = s; x != lca; x = parent_[x])
      flow_to_parent_[x] += is_source(x) ? -delta : delta;

    if (leave_child < 0)
      throw Error("transportation simplex: no leaving arc (unbounded?)");

    // Re-hang: the leaving arc (leave_child, parent) splits off the subtree
    // containing exactly one endpoint of the entering arc.
    const bool s_in_cut = in_subtree(s, leave_child);
    const int q_in = s_in_cut ? s : t;
    const int q_out = s_in_cut ? t : s;

    detach_from_parent(leave_child);
    // Reverse the parent chain q_in -> ... -> leave_child.
    int child = q_in;
    int prev_parent = q_out;
    std::int64_t prev_flow = delta;
    while (child >= 0) {
      const int old_parent = parent_[child];
      const std::int64_t old_flow = flow_to_parent_[child];
      if (old_parent >= 0) detach_from_parent(child);
      parent_[child] = prev_parent;
      flow_to_parent_[child] = prev_flow;
      children_[prev_parent].push_back(child);
      if (child == leave_child) break;
      prev_parent = child;
      prev_flow = old_flow;
      child = old_parent;
    }

    // Potential shift on the re-hung subtree keeps every basic arc tight.
    const double shift = entering_rc;
    shift_subtree(q_in, s_in_cut ? shift : -shift);
  }

  bool in_subtree(int node, int root) const {
    for (int x = node; x >= 0; x = parent_[x])
      if (x == root) return true;
    return false;
  }

  void detach_from_parent(int child) {
    auto& sib = children_[parent_[child]];
    sib.erase(std::find(sib.begin(), sib.end(), child));
    parent_[child] = -1;
  }

  /// Adds `delta` to u over sources and subtracts it from v over sinks of
  /// the subtree rooted at `root` (direction chosen by the caller so the
  /// entering arc becomes tight).
  void shift_subtree(int root, double delta) {
    static thread_local std::vector<int> stack;
    stack.clear();
    stack.push_back(root);
    while (!stack.empty()) {
      const int x = stack.back();
      stack.pop_back();
      if (is_source(x))
        u_[x] += delta;
      else
        v_[x - m_] -= delta;
      for (int c : children_[x]) stack.push_back(c);
    }
  }

  int m_, n_;
  std::vector<std::int64_t> supply_, demand_;
  Eigen::MatrixXd cost_;
  std::vector<int> parent_;
  std::vector<std::int64_t> flow_to_parent_;
  std::vector<std::vector<int>> children_;
  std::vector<double> u_, v_;
};

inline Eigen::MatrixXd pairwise_geodesic(const PointCloud& mu,
                                         const PointCloud& nu) {
  Eigen::MatrixXd cost(mu.size(), nu.size());
  parallel_for(mu.size(), [&](std::size_t i) {
    for (std::size_t j = 0; j < nu.size(); ++j)
      cost(i, j) = geodesic_distance(mu.space, mu.points[i], nu.points[j]);
  });
  return cost;
}

}  // namespace detail

/// Exact optimal transport between integer-weighted discrete measures.
/// Exposed mainly for tests; W1 callers use wasserstein1_exact below.
inline TransportResult min_cost_transport(std::vector<std::int64_t> supply,
                                          std::vector<std::int64_t> demand,
                                          const Eigen::MatrixXd& cost) {
  const std::int64_t total =
      std::accumulate(supply.begin(), supply.end(), std::int64_t(0));
  detail::TransportationSimplex simplex(std::move(supply), std::move(demand),
                                        cost);
  simplex.solve();
  TransportResult result;
  result.method = TransportMethod::exact_flow;
  result.value = simplex.objective_units() / static_cast<double>(total);
  result.gap_bound = 0.0;
  result.cs_residual = simplex.cs_residual();
  for (const auto& [i, j, f] : simplex.plan_units())
    result.plan.push_back(
        {i, j, static_cast<double>(f) / static_cast<double>(total)});
  return result;
}

/// Exact W1 between the uniform empirical measures on two clouds, via
/// min-cost flow on the complete bipartite graph. Unequal support sizes are
/// handled by fractional flow (integer supplies n/gcd and m/gcd per node).
inline TransportResult wasserstein1_exact(const PointCloud& mu,
                                          const PointCloud& nu) {
  if (mu.empty() || nu.empty())
    throw EmptyCloud("wasserstein1_exact needs nonempty clouds");
  if (mu.size() > 2000 || nu.size() > 2000)
    throw SizeLimitExceeded("wasserstein1_exact supports at most 2000 points per side");
  const std::int64_t m = static_cast<std::int64_t>(mu.size());
  const std::int64_t n = static_cast<std::int64_t>(nu.size());
  const std::int64_t g = std::gcd(m, n);
  std::vector<std::int64_t> supply(m, n / g);
  std::vector<std::int64_t> demand(n, m / g);
  TransportResult result = min_cost_transport(
      std::move(supply), std::move(demand), detail::pairwise_geodesic(mu, nu));
  if (result.cs_residual > 1e-9)
    throw Error("exact transport failed its complementary-slackness check");
  return result;
}

struct SinkhornOptions {
  long long max_iters = 20000;
  double marginal_tol = 1e-6;   // L1 violation defining convergence
  double gap_rel_tol = 1e-3;    // early exit once the duality gap certifies
                                // the value to this relative accuracy
};

namespace detail {

struct SinkhornPrice {
  double primal = 0.0;  // rounded, feasible plan cost (upper bound on W1)
  double dual = 0.0;    // c-transform dual value (lower bound on W1)
};

/// Rounds the scaled plan P = exp((f+g-C)/r + la + lb) onto the transport
/// polytope (row scaling, column scaling, rank-one correction) and prices
/// it; also evaluates the Kantorovich dual of (f, f^c).
inline SinkhornPrice sinkhorn_price(const Eigen::MatrixXd& cost,
                                    const Eigen::VectorXd& f,
                                    const Eigen::VectorXd& g, double r,
                                    double la, double lb) {
  const std::size_t m = cost.rows(), n = cost.cols();
  const double am = 1.0 / static_cast<double>(m);
  const double bn = 1.0 / static_cast<double>(n);
  const auto plan_row = [&](std::size_t i) {
    return ((f[i] + g.array() - cost.row(i).transpose().array()) / r + la + lb)
        .exp();
  };
  Eigen::VectorXd alpha(m);
  for (std::size_t i = 0; i < m; ++i) {
    const double s = plan_row(i).sum();
    alpha[i] = s > 0 ? std::min(1.0, am / s) : 0.0;
  }
  Eigen::VectorXd col_sum = Eigen::VectorXd::Zero(n);
  for (std::size_t i = 0; i < m; ++i)
    col_sum.array() += alpha[i] * plan_row(i);
  Eigen::VectorXd beta(n);
  for (std::size_t j = 0; j < n; ++j)
    beta[j] = col_sum[j] > 0 ? std::min(1.0, bn / col_sum[j]) : 0.0;

  Eigen::VectorXd row_kept(m);
  Eigen::VectorXd col_kept = Eigen::VectorXd::Zero(n);
  KahanSum total_cost;
  for (std::size_t i = 0; i < m; ++i) {
    const Eigen::ArrayXd p = alpha[i] * beta.array() * plan_row(i);
    row_kept[i] = p.sum();
    col_kept.array() += p;
    total_cost.add((p * cost.row(i).transpose().array()).sum());
  }
  double primal = total_cost.value();
  const Eigen::ArrayXd err_a = (am - row_kept.array()).max(0.0);
  const Eigen::ArrayXd err_b = (bn - col_kept.array()).max(0.0);
  const double err_mass = err_a.sum();
  if (err_mass > 1e-300) {
    double corr = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      if (err_a[i] == 0.0) continue;
      corr += err_a[i] * (err_b * cost.row(i).transpose().array()).sum();
    }
    primal += corr / err_mass;
  }

  KahanSum dual;
  for (std::size_t i = 0; i < m; ++i) dual.add(am * f[i]);
  for (std::size_t j = 0; j < n; ++j)
    dual.add(bn * (cost.col(j).array() - f.array()).minCoeff());
  return {primal, dual.value()};
}

}  // namespace detail

/// Entropic-regularized W1 estimate.
///
/// Runs matrix scaling with an epsilon-annealing schedule (log-domain when
/// exp(-C/reg) would underflow), rounds the final plan onto the transport
/// polytope, and reports the rounded primal cost together with a duality
/// gap bound from the c-transform of the dual potentials. The reported
/// value is therefore always an upper bound of the true W1 and the dual is
/// a lower bound. NoConvergence is reported via converged = false.
inline TransportResult wasserstein1_sinkhorn(const PointCloud& mu,
                                             const PointCloud& nu, double reg,
                                             const SinkhornOptions& opt = {}) {
  if (mu.empty() || nu.empty())
    throw EmptyCloud("wasserstein1_sinkhorn needs nonempty clouds");
  if (!(reg > 0.0)) throw Error("sinkhorn reg must be positive");
  const std::size_t m = mu.size(), n = nu.size();
  if (m * n > std::size_t(30'000'000))
    throw SizeLimitExceeded("sinkhorn instance too large");

  const Eigen::MatrixXd cost = detail::pairwise_geodesic(mu, nu);
  const double max_cost = std::max(cost.maxCoeff(), 1e-300);
  const double la = -std::log(static_cast<double>(m));
  const double lb = -std::log(static_cast<double>(n));
  const double am = 1.0 / static_cast<double>(m);
  const double bn = 1.0 / static_cast<double>(n);

  // Absorbed dual potentials; the implied plan is always
  // P_ij = exp((f_i + g_j - C_ij)/r + la + lb).
  Eigen::VectorXd f = Eigen::VectorXd::Zero(m);
  Eigen::VectorXd g = Eigen::VectorXd::Zero(n);

  // Annealing schedule from a mild regularization down to the target.
  std::vector<double> schedule;
  for (double r = std::max(reg, max_cost / 8.0); r > reg * 1.5; r *= 0.25)
    schedule.push_back(r);
  schedule.push_back(reg);

  long long iters_left = opt.max_iters;
  bool converged = false;
  bool gap_certified = false;

  for (std::size_t stage = 0; stage < schedule.size() && iters_left > 0;
       ++stage) {
    const double r = schedule[stage];
    const bool final_stage = (stage + 1 == schedule.size());
    const double tol = final_stage ? opt.marginal_tol : opt.marginal_tol * 100;
    const long long budget =
        final_stage ? iters_left : std::min<long long>(iters_left, 200);
    long long used = 0;
    long long since_gap_check = 0;

    // On the final stage, stop once the rounded primal and the dual
    // certify the value to gap_rel_tol, even if the marginals have not
    // reached the convergence tolerance yet.
    const auto gap_small_enough = [&]() {
      const auto price = detail::sinkhorn_price(cost, f, g, r, la, lb);
      const double gap = std::max(0.0, price.primal - price.dual);
      return gap <= opt.gap_rel_tol * std::max(std::abs(price.primal), 1e-12);
    };

    if (max_cost / r <= 600.0) {
      // exp((f + g - C)/r) cannot underflow row-wise to zero here, so run
      // plain matrix scaling on the absorbed kernel; u, v stay near 1.
      Eigen::MatrixXd kernel(m, n);
      const auto rebuild = [&] {
        parallel_for(m, [&](std::size_t i) {
          kernel.row(i) =
              ((f[i] + g.array() - cost.row(i).transpose().array()) / r + la +
               lb)
                  .exp()
                  .transpose();
        });
      };
      rebuild();
      Eigen::VectorXd u = Eigen::VectorXd::Ones(m);
      Eigen::VectorXd v = Eigen::VectorXd::Ones(n);
      const auto absorb = [&] {
        f.array() += r * u.array().log();
        g.array() += r * v.array().log();
      };
      while (used < budget) {
        u.array() = am / (kernel * v).array().max(1e-300);
        v.array() = bn / (kernel.transpose() * u).array().max(1e-300);
        ++used;
        ++since_gap_check;
        if (used % 5 == 0 || used == budget) {
          const double viol =
              ((u.array() * (kernel * v).array()) - am).abs().sum();
          if (viol <= tol) {
            if (final_stage) converged = true;
            break;
          }
          if (final_stage && since_gap_check >= 250) {
            since_gap_check = 0;
            absorb();
            u.setOnes();
            v.setOnes();
            rebuild();
            if (gap_small_enough()) {
              gap_certified = true;
              break;
            }
          }
          const double extreme =
              std::max(u.cwiseAbs().maxCoeff(), v.cwiseAbs().maxCoeff());
          if (extreme > 1e100) {
            absorb();
            u.setOnes();
            v.setOnes();
            rebuild();
          }
        }
      }
      absorb();
    } else {
      // Log-domain iterations; columns are exact after each g-update, so
      // convergence is measured on the rows.
      while (used < budget) {
        parallel_for(m, [&](std::size_t i) {
          const Eigen::ArrayXd e =
              (g.array() - cost.row(i).transpose().array()) / r;
          const double mx = e.maxCoeff();
          f[i] = -r * (mx + std::log((e - mx).exp().sum()) + lb);
        });
        parallel_for(n, [&](std::size_t j) {
          const Eigen::ArrayXd e = (f.array() - cost.col(j).array()) / r;
          const double mx = e.maxCoeff();
          g[j] = -r * (mx + std::log((e - mx).exp().sum()) + la);
        });
        ++used;
        ++since_gap_check;
        if (used % 5 == 0 || used == budget) {
          double viol = 0.0;
          for (std::size_t i = 0; i < m; ++i) {
            const double sum =
                ((f[i] + g.array() - cost.row(i).transpose().array()) / r +
                 la + lb)
                    .exp()
                    .sum();
            viol += std::abs(sum - am);
          }
          if (viol <= tol) {
            if (final_stage) converged = true;
            break;
          }
          if (final_stage && since_gap_check >= 250) {
            since_gap_check = 0;
            if (gap_small_enough()) {
              gap_certified = true;
              break;
            }
          }
        }
      }
    }
    iters_left -= used;
  }

  const auto price = detail::sinkhorn_price(cost, f, g, reg, la, lb);
  TransportResult result;
  result.method = TransportMethod::sinkhorn;
  result.reg = reg;
  result.value = price.primal;
  result.gap_bound = std::max(0.0, price.primal - price.dual);
  result.converged = converged || gap_certified;
  return result;
}

/// Integration gaps of the 1-Lipschitz test family phi_a(x) = d(a, x):
/// per anchor a, |mean over cloud - mean over reference|. The max gap is a
/// dual lower bound for W1 between the two empirical measures.
inline std::vector<std::pair<int, double>> lipschitz_gap(
    const PointCloud& cloud, const std::vector<Point>& anchors,
    const PointCloud& reference) {
  if (cloud.empty() || reference.empty() || anchors.empty())
    throw EmptyCloud("lipschitz_gap needs nonempty inputs");
  std::vector<std::pair<int, double>> gaps(anchors.size());
  parallel_for(anchors.size(), [&](std::size_t a) {
    KahanSum over_cloud;
    for (const Point& p : cloud.points)
      over_cloud.add(geodesic_distance(cloud.space, anchors[a], p));
    KahanSum over_ref;
    for (const Point& p : reference.points)
      over_ref.add(geodesic_distance(cloud.space, anchors[a], p));
    const double mean_cloud = over_cloud.value() / cloud.size();
    const double mean_ref = over_ref.value() / reference.size();
    gaps[a] = {static_cast<int>(a), std::abs(mean_cloud - mean_ref)};
  });
  return gaps;
}

}  // namespace wordcover
