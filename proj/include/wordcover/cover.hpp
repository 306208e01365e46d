#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <unordered_map>
#include <vector>

#include "wordcover/errors.hpp"
#include "wordcover/parallel.hpp"
#include "wordcover/space.hpp"

namespace wordcover {

// ---------------------------------------------------------------------------
// Parameter calculators
// ---------------------------------------------------------------------------

/// Strict mode enforces epsilon in (0, 2^{-e}) as the theorems require;
/// exploratory mode relaxes to (0, 1) for empirical sweeps outside the
/// guaranteed regime (callers should surface the warning flag).
enum class EpsilonPolicy { strict, exploratory };

namespace detail {
inline void check_epsilon(double epsilon, EpsilonPolicy policy) {
  const double upper = (policy == EpsilonPolicy::strict) ? kEpsilonUpper : 1.0;
  if (!(epsilon > 0.0) || !(epsilon < upper))
    throw InvalidEpsilon("epsilon must lie in (0, " +
                         std::to_string(upper) + "), got " +
                         std::to_string(epsilon));
}
inline double log2_of(double x) { return std::log2(x); }
}  // namespace detail

/// Target covering radius r_{eps,M} = 2 eps sqrt(ln(3 C_M / eps^{2d - bd - 1})).
inline double r_target(double epsilon, const SpaceSpec& spec,
                       EpsilonPolicy policy = EpsilonPolicy::strict) {
  detail::check_epsilon(epsilon, policy);
  const double expo = 2.0 * spec.dim_m - spec.antipodal_dim - 1.0;
  const double arg = 3.0 * spec.c_m / std::pow(epsilon, expo);
  if (!(arg > 1.0))
    throw InvalidEpsilon("r_target log argument must exceed 1, got " +
                         std::to_string(arg));
  return 2.0 * epsilon * std::sqrt(std::log(arg));
}

/// Alphabet size |S| (canonical formula):
/// ceil(16 ln2 (ln C_M + (d/4) log2(d / 2eps^2)
///               + (d/2) log2 log2(d / 2eps^2) + ln(1/(e delta)))).
inline long long alphabet_size(double epsilon, double delta,
                               const SpaceSpec& spec,
                               EpsilonPolicy policy = EpsilonPolicy::strict) {
  detail::check_epsilon(epsilon, policy);
  if (!(delta > 0.0) || !(delta < 0.5))
    throw InvalidDelta("delta must lie in (0, 0.5), got " +
                       std::to_string(delta));
  const double d = spec.dim_m;
  const double u = d / (2.0 * epsilon * epsilon);
  const double val =
      16.0 * std::log(2.0) *
      (std::log(spec.c_m) + 0.25 * d * detail::log2_of(u) +
       0.5 * d * detail::log2_of(detail::log2_of(u)) +
       std::log(1.0 / (std::exp(1.0) * delta)));
  return std::max<long long>(1, static_cast<long long>(std::ceil(val)));
}

/// Word length ell (canonical formula):
/// ceil((d - (bd+1)/2) log2(1/eps) + log2(6 C_M / v_M)
///       + (d/4) log2(1/(pi r^2)) + (1/2) log2 Gamma(d/2 + 1)),
/// with r = r_target(eps).
inline long long word_length(double epsilon, const SpaceSpec& spec,
                             EpsilonPolicy policy = EpsilonPolicy::strict) {
  const double r = r_target(epsilon, spec, policy);
  const double d = spec.dim_m;
  const double val =
      (d - 0.5 * (spec.antipodal_dim + 1)) * detail::log2_of(1.0 / epsilon) +
      detail::log2_of(6.0 * spec.c_m / spec.v_m) +
      0.25 * d * detail::log2_of(1.0 / (kPi * r * r)) +
      0.5 * detail::log2_of(std::tgamma(0.5 * d + 1.0));
  return std::max<long long>(1, static_cast<long long>(std::ceil(val)));
}

/// Alphabet-size variant from the introduction:
/// ceil(16 ln2 (2 ln C_M + ln(6/delta) + ln Gamma(d/2 + 1)
///               + (d/2) ln(1/(pi eps)) + ln(1/v_M))).
/// Exposed for comparison; the canonical formula above is the default.
inline long long alphabet_size_v1(double epsilon, double delta,
                                  const SpaceSpec& spec,
                                  EpsilonPolicy policy = EpsilonPolicy::strict) {
  detail::check_epsilon(epsilon, policy);
  if (!(delta > 0.0) || !(delta < 0.5))
    throw InvalidDelta("delta must lie in (0, 0.5), got " +
                       std::to_string(delta));
  const double d = spec.dim_m;
  const double val = 16.0 * std::log(2.0) *
                     (2.0 * std::log(spec.c_m) + std::log(6.0 / delta) +
                      std::lgamma(0.5 * d + 1.0) +
                      0.5 * d * std::log(1.0 / (kPi * epsilon)) +
                      std::log(1.0 / spec.v_m));
  return std::max<long long>(1, static_cast<long long>(std::ceil(val)));
}

/// Word-length variant from the introduction, with
/// a_d = 2 log2 log2(5d) / log2(5d):
/// ceil((d/2) log2(1/(r eps)) + (4 + 3 a_d) d log2(1/eps)).
inline long long word_length_v1(double epsilon, const SpaceSpec& spec,
                                EpsilonPolicy policy = EpsilonPolicy::strict) {
  const double r = r_target(epsilon, spec, policy);
  const double d = spec.dim_m;
  const double a_d =
      2.0 * detail::log2_of(detail::log2_of(5.0 * d)) / detail::log2_of(5.0 * d);
  const double val = 0.5 * d * detail::log2_of(1.0 / (r * epsilon)) +
                     (4.0 + 3.0 * a_d) * d * detail::log2_of(1.0 / epsilon);
  return std::max<long long>(1, static_cast<long long>(std::ceil(val)));
}

/// Design-construction epsilon: lambda_r^{-(d+2)/2} C_M^{-1/4} sqrt(upsilon).
inline double design_epsilon(double lambda_r, double upsilon,
                             const SpaceSpec& spec) {
  if (!(lambda_r > 0)) throw Error("lambda_r must be positive");
  if (!(upsilon > 0.0) || !(upsilon < 1.0))
    throw Error("upsilon must lie in (0, 1)");
  return std::pow(lambda_r, -0.5 * (spec.dim_m + 2)) *
         std::pow(spec.c_m, -0.25) * std::sqrt(upsilon);
}

/// Design-construction alphabet size: ceil(16 ln2 ln(C_M lambda_r^{d/2} / delta)).
inline long long design_alphabet_size(double lambda_r, double delta,
                                      const SpaceSpec& spec) {
  if (!(lambda_r > 0)) throw Error("lambda_r must be positive");
  if (!(delta > 0.0) || !(delta < 0.5))
    throw InvalidDelta("delta must lie in (0, 0.5)");
  const double val =
      16.0 * std::log(2.0) *
      std::log(spec.c_m * std::pow(lambda_r, 0.5 * spec.dim_m) / delta);
  return std::max<long long>(1, static_cast<long long>(std::ceil(val)));
}

/// Design-construction word length:
/// ceil(log2(1/upsilon) + log2 C_M + (d/4) log2 lambda_r
///       + (d - (bd+1)/2) log2(1/eps)) with eps = design_epsilon.
inline long long design_word_length(double lambda_r, double upsilon,
                                    const SpaceSpec& spec) {
  const double eps = design_epsilon(lambda_r, upsilon, spec);
  const double d = spec.dim_m;
  const double val = detail::log2_of(1.0 / upsilon) + detail::log2_of(spec.c_m) +
                     0.25 * d * detail::log2_of(lambda_r) +
                     (d - 0.5 * (spec.antipodal_dim + 1)) *
                         detail::log2_of(1.0 / eps);
  return std::max<long long>(1, static_cast<long long>(std::ceil(val)));
}

/// Resolved cover parameters for one run.
struct CoverParams {
  double epsilon = 0.0;
  double delta = 0.0;
  long long k = 0;
  long long ell = 0;
  double r_target = 0.0;
  SpaceSpec space;
  bool exploratory_epsilon = false;
};

inline CoverParams resolve_cover_params(
    double epsilon, double delta, const SpaceSpec& spec,
    std::optional<long long> k_override = std::nullopt,
    std::optional<long long> ell_override = std::nullopt) {
  const EpsilonPolicy policy =
      (epsilon < kEpsilonUpper) ? EpsilonPolicy::strict : EpsilonPolicy::exploratory;
  CoverParams p;
  p.epsilon = epsilon;
  p.delta = delta;
  p.space = spec;
  p.exploratory_epsilon = (policy == EpsilonPolicy::exploratory);
  p.r_target = r_target(epsilon, spec, policy);
  p.k = k_override ? *k_override : alphabet_size(epsilon, delta, spec, policy);
  p.ell = ell_override ? *ell_override : word_length(epsilon, spec, policy);
  if (p.k < 1 || p.ell < 1) throw Error("cover parameters must satisfy k, ell >= 1");
  return p;
}

// ---------------------------------------------------------------------------
// Alphabet and orbit enumeration
// ---------------------------------------------------------------------------

/// A random alphabet S of k Haar isometries together with the index-aligned
/// inverses, so that S-hat = S u S^{-1} has 2k symbols counted with
/// multiplicity.
struct Alphabet {
  std::vector<Isometry> generators;
  std::vector<Isometry> inverses;
  std::uint64_t seed = 0;
};

/// Deterministic given (spec, k, seed): generator i is drawn from the
/// stream derived with index i, so the result does not depend on thread
/// count or call order.
inline Alphabet generate_alphabet(const SpaceSpec& spec, long long k,
                                  std::uint64_t seed) {
  if (k < 1) throw Error("alphabet size must be >= 1");
  Alphabet a;
  a.seed = seed;
  a.generators.resize(k);
  a.inverses.resize(k);
  parallel_for(static_cast<std::size_t>(k), [&](std::size_t i) {
    RngStream rng = RngStream::derive(seed, i);
    a.generators[i] = haar_sample(spec, rng);
    a.inverses[i] = invert(a.generators[i]);
  });
  return a;
}

struct Provenance {
  std::uint64_t seed = 0;
  long long k = 0;
  long long ell = 0;
  Point base_point;
  double dedup_tolerance = 0.0;
  bool capped = false;
};

/// Ordered multiset of points on the space with provenance metadata.
struct PointCloud {
  SpaceSpec space;
  std::vector<Point> points;
  Provenance provenance;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
};

inline constexpr std::uint64_t kDefaultCloudCap = std::uint64_t(1) << 20;

namespace detail {

/// Online duplicate filter: spatial hash over ambient coordinates with cell
/// width >= tol. The ambient chord is a lower bound for geodesic distance,
/// so any point within geodesic tol lies in one of the 3^dim adjacent cells.
class DedupGrid {
 public:
  DedupGrid(const SpaceSpec& spec, double tol)
      : spec_(spec), tol_(tol), width_(std::max(tol, 1e-12)) {}

  bool contains_within_tol(const Point& p) const {
    const std::vector<long long> base = cell_of(p);
    std::vector<long long> probe(base.size());
    return probe_neighbors(p, base, probe, 0);
  }

  void insert(const Point& p) {
    buckets_[hash_cell(cell_of(p))].push_back(p);
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

  bool probe_neighbors(const Point& p, const std::vector<long long>& base,
                       std::vector<long long>& probe, std::size_t axis) const {
    if (axis == base.size()) {
      const auto it = buckets_.find(hash_cell(probe));
      if (it == buckets_.end()) return false;
      for (const Point& q : it->second)
        if (geodesic_distance(spec_, p, q) <= tol_) return true;
      return false;
    }
    for (long long d = -1; d <= 1; ++d) {
      probe[axis] = base[axis] + d;
      if (probe_neighbors(p, base, probe, axis + 1)) return true;
    }
    return false;
  }

  SpaceSpec spec_;
  double tol_;
  double width_;
  // Hash collisions merely merge candidate buckets; candidates are always
  // verified with the exact geodesic distance.
  std::unordered_map<std::uint64_t, std::vector<Point>> buckets_;
};

inline bool pow_exceeds(std::uint64_t base, long long expo, std::uint64_t limit) {
  std::uint64_t v = 1;
  for (long long i = 0; i < expo; ++i) {
    if (v > limit / base) return true;
    v *= base;
  }
  return false;
}

/// Emits the orbit of `base` under all words of length `ell` whose symbols
/// come from symbol_of(0..2k-1), in lexicographic word order, starting at
/// word index `start`, for at most `count` leaves or until `emit` returns
/// false. Partial products along the current branch are reused, one
/// composition per tree node.
template <typename SymbolFn, typename Emit>
void enumerate_words(const SpaceSpec& spec, const SymbolFn& symbol_of,
                     long long num_symbols, long long ell, const Point& base,
                     std::uint64_t start, std::uint64_t count, Emit&& emit) {
  if (count == 0) return;
  std::vector<long long> digits(ell, 0);
  {
    std::uint64_t rem = start;
    for (long long d = ell - 1; d >= 0; --d) {
      digits[d] = static_cast<long long>(rem % num_symbols);
      rem /= num_symbols;
    }
  }
  // prefix[j] = product of the first j chosen symbols (acting as read).
  std::vector<Isometry> prefix(ell + 1);
  prefix[0] = identity_isometry(spec);
  for (long long j = 0; j < ell; ++j)
    prefix[j + 1] = compose(prefix[j], symbol_of(digits[j]));

  std::uint64_t emitted = 0;
  for (;;) {
    if (!emit(apply(prefix[ell], base))) return;
    if (++emitted >= count) return;
    // Advance to the next word (odometer) and refresh the partial products.
    long long d = ell - 1;
    while (d >= 0 && digits[d] == num_symbols - 1) {
      digits[d] = 0;
      --d;
    }
    if (d < 0) return;
    ++digits[d];
    for (long long j = d; j < ell; ++j)
      prefix[j + 1] = compose(prefix[j], symbol_of(digits[j]));
  }
}

}  // namespace detail

/// Enumerates the word orbit S-hat^ell applied to `base`.
///
/// Words w = s_{i1} ... s_{iell} run in lexicographic order over the 2k
/// symbols (generators first, then inverses, each in index order) and w
/// applied to base is emitted per word. With dedup_tol > 0, points within
/// geodesic distance dedup_tol of an already-emitted point are dropped
/// (multiset semantics are the default; dedup is an explicitly labelled
/// approximation). With a cap, enumeration stops after `cap` emissions and
/// the cloud is flagged capped.
inline PointCloud enumerate_cloud(const SpaceSpec& spec, const Alphabet& alphabet,
                                  long long ell, const Point& base,
                                  std::optional<std::uint64_t> cap = kDefaultCloudCap,
                                  double dedup_tol = 0.0) {
  if (ell < 1) throw Error("word length must be >= 1");
  if (alphabet.generators.empty()) throw Error("alphabet must be nonempty");
  if (cap && *cap == 0) throw CapZero("cap must be >= 1 when given");
  const long long k = static_cast<long long>(alphabet.generators.size());
  const std::uint64_t num_symbols = 2 * static_cast<std::uint64_t>(k);
  if (!cap && detail::pow_exceeds(num_symbols, ell, std::uint64_t(1) << 63))
    throw OverflowGuard("(2k)^ell exceeds 2^63 and no cap was given");

  // full = (2k)^ell when it fits below 2^62, otherwise "huge".
  std::uint64_t full = 1;
  bool huge = false;
  for (long long i = 0; i < ell; ++i) {
    if (full > (std::uint64_t(1) << 62) / num_symbols) {
      huge = true;
      break;
    }
    full *= num_symbols;
  }
  const bool capped = cap && (huge || full > *cap);
  const std::uint64_t total = capped ? *cap : full;

  const auto symbol_of = [&](long long s) -> const Isometry& {
    return s < k ? alphabet.generators[s] : alphabet.inverses[s - k];
  };

  PointCloud cloud;
  cloud.space = spec;
  cloud.provenance = {alphabet.seed, k, ell, base, dedup_tol, capped};

  if (dedup_tol > 0.0) {
    // Dedup keeps/drops points based on everything emitted so far, so it
    // runs in sequential word order over the full tree; the cap counts
    // kept points and stops the walk early.
    detail::DedupGrid grid(spec, dedup_tol);
    bool stopped_early = false;
    std::uint64_t words_seen = 0;
    const std::uint64_t word_budget =
        huge ? std::numeric_limits<std::uint64_t>::max() : full;
    detail::enumerate_words(
        spec, symbol_of, static_cast<long long>(num_symbols), ell, base, 0,
        word_budget, [&](Point p) {
          ++words_seen;
          if (!grid.contains_within_tol(p)) {
            grid.insert(p);
            cloud.points.push_back(std::move(p));
            if (cap && cloud.points.size() >= *cap) {
              stopped_early = (huge || words_seen < full);
              return false;
            }
          }
          return true;
        });
    cloud.provenance.capped = stopped_early;
    return cloud;
  }

  cloud.points.resize(total);
  // Work units are the top-level symbols (subtrees of the word tree); the
  // output slots are preassigned so the concatenation is byte-identical
  // regardless of thread count.
  std::uint64_t subtree = 1;
  for (long long i = 0; i < ell - 1; ++i) {
    if (subtree > (std::uint64_t(1) << 62) / num_symbols) {
      subtree = 0;
      break;
    }
    subtree *= num_symbols;
  }
  if (subtree == 0 || total <= 4096 || subtree >= total) {
    detail::enumerate_words(spec, symbol_of, static_cast<long long>(num_symbols),
                            ell, base, 0, total,
                            [&, idx = std::uint64_t(0)](Point p) mutable {
                              cloud.points[idx++] = std::move(p);
                              return true;
                            });
  } else {
    const std::uint64_t units = (total + subtree - 1) / subtree;
    parallel_for(units, [&](std::size_t u) {
      const std::uint64_t start = u * subtree;
      const std::uint64_t count = std::min(subtree, total - start);
      detail::enumerate_words(spec, symbol_of,
                              static_cast<long long>(num_symbols), ell, base,
                              start, count, [&, idx = start](Point p) mutable {
                                cloud.points[idx++] = std::move(p);
                                return true;
                              });
    });
  }
  return cloud;
}

}  // namespace wordcover
