#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <unordered_map>
#include <vector>

#include "wordcover/cover.hpp"
#include "wordcover/parallel.hpp"
#include "wordcover/space.hpp"

namespace wordcover {

/// Exact nearest-neighbor index over a fixed point cloud.
///
/// A spatial hash over the ambient coordinates prunes candidates using the
/// chord lower bound (ambient chord <= geodesic distance); every candidate
/// is verified with the exact geodesic distance, so queries are exact.
/// Ties are broken by the lowest point index.
class NNIndex {
 public:
  NNIndex(const PointCloud& cloud, double cell_width_hint = 0.0)
      : cloud_(&cloud) {
    if (cloud.empty()) throw EmptyCloud("cannot index an empty cloud");
    const int dim = cloud.space.ambient_dim;
    if (cell_width_hint > 0.0) {
      width_ = cell_width_hint;
    } else {
      // Aim for O(1) points per cell: the ambient bounding box of every
      // shipped space has side 2.
      const double per_axis =
          std::pow(static_cast<double>(cloud.size()), 1.0 / dim);
      width_ = 2.0 / std::clamp(per_axis, 1.0, 64.0);
    }
    brute_force_ = cloud.size() <= 256;
    if (brute_force_) return;
    buckets_.reserve(cloud.size());
    for (std::size_t i = 0; i < cloud.size(); ++i)
      buckets_[hash_cell(cell_of(cloud.points[i]))].push_back(
          static_cast<int>(i));
  }

  struct Hit {
    int index = -1;
    double dist = std::numeric_limits<double>::infinity();
  };

  Hit nearest(const Point& q) const { return nearest_excluding(q, -1); }

  /// Nearest neighbor skipping one point index (used by separation()).
  Hit nearest_excluding(const Point& q, int skip) const {
    if (q.coords.size() != cloud_->space.ambient_dim)
      throw DimensionMismatch("query dimension does not match cloud space");
    Hit best;
    if (brute_force_) {
      for (std::size_t i = 0; i < cloud_->size(); ++i) {
        if (static_cast<int>(i) == skip) continue;
        const double d = geodesic_distance(cloud_->space, q, cloud_->points[i]);
        if (d < best.dist) best = {static_cast<int>(i), d};
      }
      return best;
    }

    const std::vector<long long> center = cell_of(q);
    const int dim = static_cast<int>(center.size());
    std::vector<long long> probe(dim);
    // Ring-by-ring expansion: cells at Chebyshev ring rho contain only
    // points whose chord exceeds (rho - 1) * width, hence whose geodesic
    // distance does too. Stop once the best hit beats that bound.
    const long long max_ring =
        static_cast<long long>(std::ceil(2.0 / width_)) + 2;
    for (long long ring = 0; ring <= max_ring; ++ring) {
      if (best.index >= 0 &&
          best.dist <= static_cast<double>(ring - 1) * width_)
        break;
      scan_ring(q, skip, center, probe, 0, ring, false, best);
    }
    return best;
  }

 private:
  std::vector<long long> cell_of(const Point& p) const {
    std::vector<long long> c(p.coords.size());
    for (Eigen::Index i = 0; i < p.coords.size(); ++i)
      c[i] = static_cast<long long>(std::floor(p.coords[i] / width_));
    return c;
  }

  static std::uint64_t hash_cell(const std::vector<long long>& c) {
    std::uint64_t h = 1469598103934665603ULL;
    for (long long v : c) {
      h ^= static_cast<std::uint64_t>(v);
      h *= 1099511628211ULL;
    }
    return h;
  }

  void scan_cell(const Point& q, int skip, const std::vector<long long>& cell,
                 Hit& best) const {
    const auto it = buckets_.find(hash_cell(cell));
    if (it == buckets_.end()) return;
    for (int i : it->second) {
      if (i == skip) continue;
      const double d = geodesic_distance(cloud_->space, q, cloud_->points[i]);
      if (d < best.dist || (d == best.dist && i < best.index))
        best = {i, d};
    }
  }

  /// Enumerates cells whose Chebyshev distance from `center` equals `ring`.
  void scan_ring(const Point& q, int skip, const std::vector<long long>& center,
                 std::vector<long long>& probe, int axis, long long ring,
                 bool saturated, Hit& best) const {
    const int dim = static_cast<int>(center.size());
    if (axis == dim) {
      if (saturated) scan_cell(q, skip, probe, best);
      return;
    }
    for (long long d = -ring; d <= ring; ++d) {
      probe[axis] = center[axis] + d;
      const bool sat = saturated || (d == -ring || d == ring);
      // Remaining axes must stay within +-ring; at least one axis overall
      // must hit the ring boundary.
      if (axis == dim - 1 && !sat) continue;
      scan_ring(q, skip, center, probe, axis + 1, ring, sat, best);
    }
  }

  const PointCloud* cloud_;
  double width_ = 0.1;
  bool brute_force_ = false;
  // Hash collisions merge buckets, which only adds verified candidates.
  std::unordered_map<std::uint64_t, std::vector<int>> buckets_;
};

inline NNIndex build_index(const PointCloud& cloud, double cell_width_hint = 0.0) {
  return NNIndex(cloud, cell_width_hint);
}

/// Distances from each reference point to its nearest cloud point.
inline std::vector<double> nearest_distances(const NNIndex& index,
                                             const std::vector<Point>& queries) {
  std::vector<double> out(queries.size());
  parallel_for(queries.size(),
               [&](std::size_t i) { out[i] = index.nearest(queries[i]).dist; });
  return out;
}

/// Monte Carlo lower bound on the covering radius of `cloud`: the max over
/// reference points of the distance to the nearest cloud point. Report it
/// together with the reference size; it is never the exact radius.
inline double covering_radius(const PointCloud& cloud,
                              const PointCloud& reference) {
  if (cloud.empty() || reference.empty())
    throw EmptyCloud("covering_radius needs nonempty cloud and reference");
  if (cloud.space.name() != reference.space.name())
    throw DimensionMismatch("cloud and reference live on different spaces");
  const NNIndex index(cloud);
  const std::vector<double> dists = nearest_distances(index, reference.points);
  double worst = 0.0;
  for (double d : dists) worst = std::max(worst, d);
  return worst;
}

/// Minimum pairwise geodesic distance of the cloud.
inline double separation(const PointCloud& cloud) {
  if (cloud.size() < 2)
    throw TooFewPoints("separation needs at least two points");
  const NNIndex index(cloud);
  std::vector<double> nn(cloud.size());
  parallel_for(cloud.size(), [&](std::size_t i) {
    nn[i] = index.nearest_excluding(cloud.points[i], static_cast<int>(i)).dist;
  });
  double best = std::numeric_limits<double>::infinity();
  for (double d : nn) best = std::min(best, d);
  return best;
}

}  // namespace wordcover
