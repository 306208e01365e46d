#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <vector>

#include "wordcover/cover.hpp"
#include "wordcover/errors.hpp"
#include "wordcover/nn_index.hpp"
#include "wordcover/parallel.hpp"
#include "wordcover/space.hpp"
#include "wordcover/transport.hpp"

namespace wordcover {

inline constexpr double kInfDeath = std::numeric_limits<double>::infinity();

// ---------------------------------------------------------------------------
// Vietoris-Rips filtration
// ---------------------------------------------------------------------------

/// One simplex: sorted vertex tuple, dimension <= 3, filtration value = max
/// pairwise geodesic distance of its vertices.
struct Simplex {
  std::array<std::int32_t, 4> verts{-1, -1, -1, -1};
  std::int8_t dim = 0;
  double value = 0.0;
};

/// Simplices of dimension <= maxdim + 1 with value <= max_radius, ordered by
/// (value, dimension, lexicographic vertex tuple) so faces precede cofaces.
/// The "<=" convention is used for simplex inclusion at a radius.
struct Filtration {
  int vertices = 0;
  int maxdim = 0;
  double max_radius = 0.0;
  std::vector<Simplex> simplices;
};

inline Filtration vr_filtration(const PointCloud& cloud, int maxdim,
                                double max_radius) {
  if (cloud.empty()) throw EmptyCloud("vr_filtration needs a nonempty cloud");
  if (maxdim < 0 || maxdim > 2) throw Error("maxdim must be 0, 1 or 2");
  if (!(max_radius > 0)) throw Error("max_radius must be positive");
  const std::size_t n = cloud.size();
  if ((maxdim >= 1 && n > 400) || (maxdim >= 2 && n > 80))
    throw BudgetExceeded("vr_filtration: at most 400 points for maxdim=1, 80 for maxdim=2 (got " +
                         std::to_string(n) + ")");
  constexpr std::size_t kSimplexBudget = 8u << 20;

  Eigen::MatrixXd dist(n, n);
  parallel_for(n, [&](std::size_t i) {
    dist(i, i) = 0.0;
    for (std::size_t j = 0; j < n; ++j)
      if (j != i)
        dist(i, j) = geodesic_distance(cloud.space, cloud.points[i],
                                       cloud.points[j]);
  });

  Filtration f;
  f.vertices = static_cast<int>(n);
  f.maxdim = maxdim;
  f.max_radius = max_radius;
  auto& out = f.simplices;

  for (std::size_t i = 0; i < n; ++i) {
    Simplex s;
    s.verts[0] = static_cast<std::int32_t>(i);
    s.dim = 0;
    s.value = 0.0;
    out.push_back(s);
  }
  const int top_dim = maxdim + 1;
  if (top_dim >= 1) {
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j)
        if (dist(i, j) <= max_radius) {
          Simplex s;
          s.verts[0] = static_cast<std::int32_t>(i);
          s.verts[1] = static_cast<std::int32_t>(j);
          s.dim = 1;
          s.value = dist(i, j);
          out.push_back(s);
        }
  }
  if (top_dim >= 2) {
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) {
        if (dist(i, j) > max_radius) continue;
        for (std::size_t k = j + 1; k < n; ++k) {
          const double v =
              std::max({dist(i, j), dist(i, k), dist(j, k)});
          if (v > max_radius) continue;
          Simplex s;
          s.verts[0] = static_cast<std::int32_t>(i);
          s.verts[1] = static_cast<std::int32_t>(j);
          s.verts[2] = static_cast<std::int32_t>(k);
          s.dim = 2;
          s.value = v;
          out.push_back(s);
          if (out.size() > kSimplexBudget)
            throw BudgetExceeded("vr_filtration: simplex budget exceeded at " +
                                 std::to_string(out.size()));
        }
      }
  }
  if (top_dim >= 3) {
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) {
        if (dist(i, j) > max_radius) continue;
        for (std::size_t k = j + 1; k < n; ++k) {
          const double vjk = std::max({dist(i, j), dist(i, k), dist(j, k)});
          if (vjk > max_radius) continue;
          for (std::size_t l = k + 1; l < n; ++l) {
            const double v = std::max(
                {vjk, dist(i, l), dist(j, l), dist(k, l)});
            if (v > max_radius) continue;
            Simplex s;
            s.verts = {static_cast<std::int32_t>(i),
                       static_cast<std::int32_t>(j),
                       static_cast<std::int32_t>(k),
                       static_cast<std::int32_t>(l)};
            s.dim = 3;
            s.value = v;
            out.push_back(s);
            if (out.size() > kSimplexBudget)
              throw BudgetExceeded(
                  "vr_filtration: simplex budget exceeded at " +
                  std::to_string(out.size()));
          }
        }
      }
  }

  std::sort(out.begin(), out.end(), [](const Simplex& a, const Simplex& b) {
    if (a.value != b.value) return a.value < b.value;
    if (a.dim != b.dim) return a.dim < b.dim;
    return a.verts < b.verts;
  });
  return f;
}

// ---------------------------------------------------------------------------
// Persistence diagrams
// ---------------------------------------------------------------------------

/// Multiset of (birth, death, degree) triples; death = +inf for essential
/// classes. Zero-length pairs (birth == death) are dropped.
struct PersistenceDiagram {
  struct Bar {
    double birth = 0.0;
    double death = kInfDeath;
    int degree = 0;
  };
  std::vector<Bar> bars;
};

namespace detail {

struct VertexKey {
  std::array<std::int32_t, 4> verts;
  std::int8_t dim;
  bool operator<(const VertexKey& o) const {
    if (dim != o.dim) return dim < o.dim;
    return verts < o.verts;
  }
};

/// Standard column reduction of the Z/2 boundary matrix. Columns are kept
/// as sorted index vectors; low(col) is the max entry.
inline std::vector<PersistenceDiagram::Bar> reduce_all(const Filtration& f) {
  const std::size_t ns = f.simplices.size();
  std::map<VertexKey, std::int32_t> index_of;
  for (std::size_t i = 0; i < ns; ++i)
    index_of[{f.simplices[i].verts, f.simplices[i].dim}] =
        static_cast<std::int32_t>(i);

  std::vector<std::vector<std::int32_t>> columns(ns);
  for (std::size_t i = 0; i < ns; ++i) {
    const Simplex& s = f.simplices[i];
    if (s.dim == 0) continue;
    std::vector<std::int32_t> faces;
    for (int drop = 0; drop <= s.dim; ++drop) {
      VertexKey key;
      key.verts = {-1, -1, -1, -1};
      key.dim = static_cast<std::int8_t>(s.dim - 1);
      int w = 0;
      for (int v = 0; v <= s.dim; ++v)
        if (v != drop) key.verts[w++] = s.verts[v];
      const auto it = index_of.find(key);
      if (it == index_of.end())
        throw Error("filtration is not closed under faces");
      faces.push_back(it->second);
    }
    std::sort(faces.begin(), faces.end());
    columns[i] = std::move(faces);
  }

  const auto add_into = [](std::vector<std::int32_t>& a,
                           const std::vector<std::int32_t>& b) {
    // Symmetric difference of sorted index sets (Z/2 column addition).
    std::vector<std::int32_t> out;
    out.reserve(a.size() + b.size());
    std::size_t i = 0, j = 0;
    while (i < a.size() && j < b.size()) {
      if (a[i] < b[j]) out.push_back(a[i++]);
      else if (b[j] < a[i]) out.push_back(b[j++]);
      else { ++i; ++j; }
    }
    out.insert(out.end(), a.begin() + i, a.end());
    out.insert(out.end(), b.begin() + j, b.end());
    a = std::move(out);
  };

  std::vector<std::int32_t> pivot_owner(ns, -1);
  std::vector<std::int32_t> killer(ns, -1);
  for (std::size_t i = 0; i < ns; ++i) {
    auto& col = columns[i];
    while (!col.empty()) {
      const std::int32_t low = col.back();
      const std::int32_t owner = pivot_owner[low];
      if (owner < 0) break;
      add_into(col, columns[owner]);
    }
    if (!col.empty()) {
      pivot_owner[col.back()] = static_cast<std::int32_t>(i);
      killer[col.back()] = static_cast<std::int32_t>(i);
    }
  }

  std::vector<PersistenceDiagram::Bar> bars;
  for (std::size_t i = 0; i < ns; ++i) {
    const Simplex& s = f.simplices[i];
    const bool is_creator = columns[i].empty();
    if (!is_creator) continue;
    const std::int32_t k = killer[i];
    if (k >= 0) {
      const double birth = s.value;
      const double death = f.simplices[k].value;
      if (death > birth) bars.push_back({birth, death, s.dim});
    } else if (s.dim <= f.maxdim) {
      bars.push_back({s.value, kInfDeath, s.dim});
    }
  }
  return bars;
}

}  // namespace detail

/// Persistence pairs over Z/2 in the given degree, by column reduction of
/// the boundary matrix. Deterministic for a fixed filtration.
inline PersistenceDiagram persistence_diagram(const Filtration& f, int degree) {
  if (degree > f.maxdim)
    throw Error("requested degree exceeds the filtration maxdim");
  PersistenceDiagram d;
  for (const auto& bar : detail::reduce_all(f))
    if (bar.degree == degree) d.bars.push_back(bar);
  return d;
}

/// Rank of H_q of the subcomplex at the given radius: bars alive there.
inline long long betti_at(const Filtration& f, double radius, int degree) {
  if (radius > f.max_radius + 1e-12)
    throw Error("radius exceeds the filtration max_radius");
  const PersistenceDiagram d = persistence_diagram(f, degree);
  long long count = 0;
  for (const auto& bar : d.bars)
    if (bar.birth <= radius && radius < bar.death) ++count;
  return count;
}

// ---------------------------------------------------------------------------
// Bottleneck distance
// ---------------------------------------------------------------------------

namespace detail {

/// Hopcroft-Karp style augmenting matching, small instances.
class BipartiteMatcher {
 public:
  BipartiteMatcher(int left, int right) : adj_(left), match_left_(left, -1),
                                          match_right_(right, -1) {}
  void add_edge(int l, int r) { adj_[l].push_back(r); }

  int max_matching() {
    int matched = 0;
    for (std::size_t l = 0; l < adj_.size(); ++l) {
      std::vector<char> used(match_right_.size(), 0);
      if (try_augment(static_cast<int>(l), used)) ++matched;
    }
    return matched;
  }

 private:
  bool try_augment(int l, std::vector<char>& used) {
    for (int r : adj_[l]) {
      if (used[r]) continue;
      used[r] = 1;
      if (match_right_[r] < 0 || try_augment(match_right_[r], used)) {
        match_right_[r] = l;
        match_left_[l] = r;
        return true;
      }
    }
    return false;
  }

  std::vector<std::vector<int>> adj_;
  std::vector<int> match_left_, match_right_;
};

inline double linf_bar_dist(const PersistenceDiagram::Bar& a,
                            const PersistenceDiagram::Bar& b) {
  return std::max(std::abs(a.birth - b.birth), std::abs(a.death - b.death));
}

/// Feasibility of a bottleneck matching at threshold t: every bar with
/// persistence/2 > t must be matched to a bar of the other diagram within
/// L-inf distance t (diagonal absorbs the rest).
inline bool bottleneck_feasible(const std::vector<PersistenceDiagram::Bar>& d1,
                                const std::vector<PersistenceDiagram::Bar>& d2,
                                double t) {
  std::vector<int> need1, need2;
  for (std::size_t i = 0; i < d1.size(); ++i)
    if (0.5 * (d1[i].death - d1[i].birth) > t) need1.push_back(static_cast<int>(i));
  for (std::size_t j = 0; j < d2.size(); ++j)
    if (0.5 * (d2[j].death - d2[j].birth) > t) need2.push_back(static_cast<int>(j));
  // Feasibility <=> a matching in the within-t graph saturating the forced
  // bars of both sides simultaneously. By Mendelsohn-Dulmage a matching
  // saturating need1 plus a matching saturating need2 combine into one, so
  // the two saturation checks below are sufficient.
  BipartiteMatcher m1(static_cast<int>(need1.size()), static_cast<int>(d2.size()));
  for (std::size_t a = 0; a < need1.size(); ++a)
    for (std::size_t j = 0; j < d2.size(); ++j)
      if (linf_bar_dist(d1[need1[a]], d2[j]) <= t)
        m1.add_edge(static_cast<int>(a), static_cast<int>(j));
  if (m1.max_matching() != static_cast<int>(need1.size())) return false;
  BipartiteMatcher m2(static_cast<int>(need2.size()), static_cast<int>(d1.size()));
  for (std::size_t b = 0; b < need2.size(); ++b)
    for (std::size_t i = 0; i < d1.size(); ++i)
      if (linf_bar_dist(d1[i], d2[need2[b]]) <= t)
        m2.add_edge(static_cast<int>(b), static_cast<int>(i));
  return m2.max_matching() == static_cast<int>(need2.size());
}

}  // namespace detail

/// Exact bottleneck distance between the degree-q parts of two diagrams.
/// Finite bars may be matched to the diagonal at half their persistence;
/// infinite bars match only to infinite bars (mismatched counts give +inf).
inline double bottleneck(const PersistenceDiagram& a,
                         const PersistenceDiagram& b, int degree) {
  std::vector<PersistenceDiagram::Bar> fin1, fin2;
  std::vector<double> inf1, inf2;
  for (const auto& bar : a.bars)
    if (bar.degree == degree) {
      if (std::isinf(bar.death)) inf1.push_back(bar.birth);
      else fin1.push_back(bar);
    }
  for (const auto& bar : b.bars)
    if (bar.degree == degree) {
      if (std::isinf(bar.death)) inf2.push_back(bar.birth);
      else fin2.push_back(bar);
    }
  if (inf1.size() != inf2.size()) return kInfDeath;
  double inf_cost = 0.0;
  std::sort(inf1.begin(), inf1.end());
  std::sort(inf2.begin(), inf2.end());
  for (std::size_t i = 0; i < inf1.size(); ++i)
    inf_cost = std::max(inf_cost, std::abs(inf1[i] - inf2[i]));

  // Candidate thresholds: all pairwise L-inf distances plus half
  // persistences; the optimum is one of them.
  std::vector<double> candidates{0.0};
  for (const auto& p : fin1)
    for (const auto& q : fin2)
      candidates.push_back(detail::linf_bar_dist(p, q));
  for (const auto& p : fin1) candidates.push_back(0.5 * (p.death - p.birth));
  for (const auto& q : fin2) candidates.push_back(0.5 * (q.death - q.birth));
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()),
                   candidates.end());

  std::size_t lo = 0, hi = candidates.size() - 1;
  if (!detail::bottleneck_feasible(fin1, fin2, candidates[hi]))
    return kInfDeath;  // cannot happen: diagonal always feasible at max
  while (lo < hi) {
    const std::size_t mid = (lo + hi) / 2;
    if (detail::bottleneck_feasible(fin1, fin2, candidates[mid]))
      hi = mid;
    else
      lo = mid + 1;
  }
  return std::max(inf_cost, candidates[lo]);
}

// ---------------------------------------------------------------------------
// Coupled-sample experiment
// ---------------------------------------------------------------------------

struct CouplingReport {
  long long n = 0;
  long long trials = 0;
  double w1_estimate = 0.0;
  double eps_q = 0.0;       // sqrt(W1 estimate)
  double bound = 0.0;       // n * eps_q
  long long violations = 0; // trials with d_B >= n * eps_q
  std::vector<double> bottleneck_samples;

  double violation_frequency() const {
    return trials > 0 ? static_cast<double>(violations) / trials : 0.0;
  }
};

/// Realizes the coupling argument behind the Prokhorov bound: per trial,
/// draw n uniform points, couple each to its nearest cloud point, compare
/// the degree-q diagrams, and count bottleneck distances >= n * eps_q with
/// eps_q = sqrt(W1 estimate between the cloud and a uniform reference).
inline CouplingReport coupled_diagram_experiment(
    const SpaceSpec& spec, const PointCloud& cloud, long long n, int q,
    long long trials, std::uint64_t seed,
    std::optional<double> w1_estimate = std::nullopt,
    long long reference_size = 5000) {
  if (cloud.empty()) throw EmptyCloud("coupling experiment needs a cloud");
  if (trials < 1) throw Error("trials must be >= 1");
  if (q == 1 && n > 60) throw BudgetExceeded("n must be <= 60 when q = 1");

  CouplingReport report;
  report.n = n;
  report.trials = trials;

  double w1 = 0.0;
  if (w1_estimate) {
    w1 = *w1_estimate;
  } else {
    // Subsample the cloud to the exact-transport size limit, then estimate
    // W1 against a fresh uniform reference.
    PointCloud sub;
    sub.space = cloud.space;
    sub.provenance = cloud.provenance;
    const std::size_t target = 2000;
    if (cloud.size() <= target) {
      sub.points = cloud.points;
    } else {
      const double stride =
          static_cast<double>(cloud.size()) / static_cast<double>(target);
      for (std::size_t i = 0; i < target; ++i)
        sub.points.push_back(
            cloud.points[static_cast<std::size_t>(i * stride)]);
    }
    PointCloud ref;
    ref.space = spec;
    ref.points.resize(reference_size);
    parallel_for(static_cast<std::size_t>(reference_size), [&](std::size_t i) {
      RngStream rng = RngStream::derive(seed ^ 0x5eed0ef1ULL, i);
      ref.points[i] = uniform_sample(spec, rng);
    });
    w1 = wasserstein1_sinkhorn(sub, ref, 0.02).value;
  }
  report.w1_estimate = w1;
  report.eps_q = std::sqrt(std::max(0.0, w1));
  report.bound = static_cast<double>(n) * report.eps_q;

  const NNIndex index(cloud);
  report.bottleneck_samples.resize(trials);
  std::vector<double>& samples = report.bottleneck_samples;
  parallel_for(static_cast<std::size_t>(trials), [&](std::size_t t) {
    RngStream rng = RngStream::derive(seed, 1000 + t);
    PointCloud uniform_pts, coupled_pts;
    uniform_pts.space = spec;
    coupled_pts.space = spec;
    for (long long i = 0; i < n; ++i) {
      Point m = uniform_sample(spec, rng);
      const auto hit = index.nearest(m);
      uniform_pts.points.push_back(std::move(m));
      coupled_pts.points.push_back(cloud.points[hit.index]);
    }
    const double radius = spec.diameter * (1.0 + 1e-9);
    const Filtration f1 = vr_filtration(uniform_pts, q, radius);
    const Filtration f2 = vr_filtration(coupled_pts, q, radius);
    samples[t] = bottleneck(persistence_diagram(f1, q),
                            persistence_diagram(f2, q), q);
  });
  for (double d : samples)
    if (d >= report.bound) ++report.violations;
  return report;
}

}  // namespace wordcover
