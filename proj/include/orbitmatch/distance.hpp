#pragma once

// Shortest distance between k orbits: m_n = min over index tuples of the
// k-point diameter, the S_n close-tuple count, and observed-orbit variants.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "orbitmatch/core.hpp"
#include "orbitmatch/dynamics.hpp"

namespace orbitmatch::distance {

enum class MetricKind { TorusWrap, EuclideanBox };

/// Euclidean norm of the per-coordinate differences; on the torus each
/// difference is wrapped to min(|a-b|, 1-|a-b|).
struct MetricSpec {
  MetricKind kind = MetricKind::TorusWrap;
  std::size_t dim = 1;

  static MetricSpec torus(std::size_t n) { return {MetricKind::TorusWrap, n}; }
  static MetricSpec euclidean(std::size_t n) { return {MetricKind::EuclideanBox, n}; }

  double coordinate_gap(double a, double b) const {
    const double g = std::abs(a - b);
    return kind == MetricKind::TorusWrap ? std::min(g, 1.0 - g) : g;
  }

  double operator()(std::span<const double> a, std::span<const double> b) const {
    if (dim == 1) return coordinate_gap(a[0], b[0]);
    double s = 0.0;
    for (std::size_t i = 0; i < dim; ++i) {
      const double g = coordinate_gap(a[i], b[i]);
      s += g * g;
    }
    return std::sqrt(s);
  }
};

/// max over pairs of the pairwise distance.
inline double kdiameter(std::span<const Point> points, const MetricSpec& metric) {
  if (points.size() < 2) throw Error(Errc::KTooSmall, "k-point diameter needs k >= 2");
  for (const Point& p : points) {
    if (p.dim() != metric.dim) throw Error(Errc::DimensionMismatch, "point dimension differs from metric");
  }
  double d = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    for (std::size_t j = i + 1; j < points.size(); ++j) {
      d = std::max(d, metric(points[i].coords(), points[j].coords()));
    }
  }
  return d;
}

/// k orbits of equal length sharing one metric.
class OrbitSet {
 public:
  OrbitSet(std::vector<PointArray> orbits, MetricSpec metric)
      : orbits_(std::move(orbits)), metric_(metric) {
    if (orbits_.size() < 2) throw Error(Errc::KTooSmall, "need at least two orbits");
    length_ = orbits_.front().size();
    if (length_ == 0) throw Error(Errc::TooFewPoints, "orbits must be non-empty");
    for (const PointArray& o : orbits_) {
      if (o.size() != length_) throw Error(Errc::DimensionMismatch, "orbits differ in length");
      if (o.dim() != metric_.dim) throw Error(Errc::DimensionMismatch, "orbit dimension differs from metric");
    }
  }

  std::size_t k() const noexcept { return orbits_.size(); }
  std::size_t length() const noexcept { return length_; }
  std::size_t dim() const noexcept { return metric_.dim; }
  const MetricSpec& metric() const noexcept { return metric_; }
  const PointArray& orbit(std::size_t j) const { return orbits_[j]; }
  const std::vector<PointArray>& orbits() const noexcept { return orbits_; }

 private:
  std::vector<PointArray> orbits_;
  MetricSpec metric_;
  std::size_t length_ = 0;
};

/// A realising index tuple for m_n; ties go to the lexicographically smallest.
struct TupleMatch {
  double distance = std::numeric_limits<double>::infinity();
  std::vector<std::size_t> indices;
};

namespace detail {

inline void check_n(const OrbitSet& orbits, std::size_t n) {
  if (n == 0) throw Error(Errc::NTooLarge, "n must be >= 1");
  if (n > orbits.length()) {
    throw Error(Errc::NTooLarge, "n = " + std::to_string(n) + " exceeds orbit length " +
                                     std::to_string(orbits.length()));
  }
}

inline bool better(double d, const std::vector<std::size_t>& idx, const TupleMatch& best) {
  if (d != best.distance) return d < best.distance;
  return std::lexicographical_compare(idx.begin(), idx.end(), best.indices.begin(), best.indices.end());
}

// Odometer over {0..n-1}^k in lexicographic order.
inline bool advance(std::vector<std::size_t>& idx, std::size_t n) {
  for (std::size_t j = idx.size(); j-- > 0;) {
    if (++idx[j] < n) return true;
    idx[j] = 0;
  }
  return false;
}

inline double tuple_diameter(const OrbitSet& orbits, const std::vector<std::size_t>& idx) {
  const MetricSpec& metric = orbits.metric();
  double d = 0.0;
  for (std::size_t a = 0; a < idx.size(); ++a) {
    for (std::size_t b = a + 1; b < idx.size(); ++b) {
      d = std::max(d, metric(orbits.orbit(a)[idx[a]], orbits.orbit(b)[idx[b]]));
    }
  }
  return d;
}

}  // namespace detail

/// Exhaustive minimum over all n^k index tuples.
inline TupleMatch closest_tuple_bruteforce(const OrbitSet& orbits, std::size_t n) {
  detail::check_n(orbits, n);
  TupleMatch best;
  std::vector<std::size_t> idx(orbits.k(), 0);
  do {
    const double d = detail::tuple_diameter(orbits, idx);
    if (d < best.distance) {
      best.distance = d;
      best.indices = idx;
    }
  } while (detail::advance(idx, n));
  return best;
}

inline double shortest_distance_bruteforce(const OrbitSet& orbits, std::size_t n) {
  return closest_tuple_bruteforce(orbits, n).distance;
}

namespace detail {

// Uniform dyadic grid over [0,1)^N addressed by Morton codes. Points are
// quantised once at the finest level; the cell of side 2^-j containing a point
// is a prefix of its code, so a single sort serves every level.
class DyadicGrid {
 public:
  DyadicGrid(const OrbitSet& orbits, std::size_t n)
      : orbits_(orbits), n_(n), dim_(orbits.dim()) {
    bits_ = std::min<int>(52, static_cast<int>(63 / dim_));
    const std::size_t k = orbits.k();
    std::vector<Entry> entries;
    entries.reserve(k * n);
    for (std::size_t o = 0; o < k; ++o) {
      for (std::size_t i = 0; i < n; ++i) entries.push_back({code_of(orbits.orbit(o)[i]), o, i});
    }
    std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
      if (a.code != b.code) return a.code < b.code;
      if (a.orbit != b.orbit) return a.orbit < b.orbit;
      return a.index < b.index;
    });
    codes_.reserve(entries.size());
    refs_.reserve(entries.size());
    for (const Entry& e : entries) {
      codes_.push_back(e.code);
      refs_.push_back({static_cast<std::uint32_t>(e.orbit), static_cast<std::uint32_t>(e.index)});
    }
  }

  int finest_level() const { return bits_; }

  /// Deepest level whose cell side 2^-j is still >= r.
  int level_for(double r) const {
    int j = 0;
    while (j < bits_ && std::ldexp(1.0, -(j + 1)) >= r) ++j;
    return j;
  }

  struct Ref {
    std::uint32_t orbit;
    std::uint32_t index;
  };

  /// Calls visit(ref) for every point in the 3^N cells around p at level j.
  template <typename Visit>
  void for_each_neighbor(std::span<const double> p, int level, Visit&& visit) const {
    const std::uint64_t cells = std::uint64_t{1} << level;
    std::array<std::int64_t, 64> base{};
    for (std::size_t c = 0; c < dim_; ++c) {
      base[c] = static_cast<std::int64_t>(quantise(p[c]) >> (bits_ - level));
    }
    cell_buf_.clear();
    std::array<std::int64_t, 64> cur{};
    const std::size_t combos = pow3(dim_);
    for (std::size_t t = 0; t < combos; ++t) {
      std::size_t rem = t;
      bool inside = true;
      for (std::size_t c = 0; c < dim_; ++c) {
        std::int64_t v = base[c] + static_cast<std::int64_t>(rem % 3) - 1;
        rem /= 3;
        if (orbits_.metric().kind == MetricKind::TorusWrap) {
          v = (v % static_cast<std::int64_t>(cells) + static_cast<std::int64_t>(cells)) %
              static_cast<std::int64_t>(cells);
        } else if (v < 0 || v >= static_cast<std::int64_t>(cells)) {
          inside = false;
          break;
        }
        cur[c] = v;
      }
      if (!inside) continue;
      cell_buf_.push_back(interleave(cur, level));
    }
    std::sort(cell_buf_.begin(), cell_buf_.end());
    cell_buf_.erase(std::unique(cell_buf_.begin(), cell_buf_.end()), cell_buf_.end());
    const int shift = static_cast<int>(dim_) * (bits_ - level);
    for (std::uint64_t prefix : cell_buf_) {
      const std::uint64_t lo = prefix << shift;
      const std::uint64_t hi = lo + (std::uint64_t{1} << shift);  // shift <= 63 and no overflow past 2^63
      auto first = std::lower_bound(codes_.begin(), codes_.end(), lo);
      for (auto it = first; it != codes_.end() && *it < hi; ++it) {
        visit(refs_[static_cast<std::size_t>(it - codes_.begin())]);
      }
    }
  }

 private:
  struct Entry {
    std::uint64_t code;
    std::size_t orbit;
    std::size_t index;
  };

  static std::size_t pow3(std::size_t d) {
    std::size_t p = 1;
    for (std::size_t i = 0; i < d; ++i) p *= 3;
    return p;
  }

  std::uint64_t quantise(double x) const {
    const auto q = static_cast<std::uint64_t>(std::ldexp(x, bits_));
    return std::min(q, (std::uint64_t{1} << bits_) - 1);
  }

  std::uint64_t interleave(const std::array<std::int64_t, 64>& cell, int level) const {
    if (dim_ == 1) return static_cast<std::uint64_t>(cell[0]);
    std::uint64_t code = 0;
    for (int b = level - 1; b >= 0; --b) {
      for (std::size_t c = 0; c < dim_; ++c) {
        code = (code << 1) | ((static_cast<std::uint64_t>(cell[c]) >> b) & 1U);
      }
    }
    return code;
  }

  std::uint64_t code_of(std::span<const double> p) const {
    std::array<std::int64_t, 64> q{};
    for (std::size_t c = 0; c < dim_; ++c) q[c] = static_cast<std::int64_t>(quantise(p[c]));
    return interleave(q, bits_);
  }

  const OrbitSet& orbits_;
  std::size_t n_;
  std::size_t dim_;
  int bits_;
  std::vector<std::uint64_t> codes_;
  std::vector<Ref> refs_;
  mutable std::vector<std::uint64_t> cell_buf_;
};

// Anchored enumeration of tuples whose points lie pairwise within a radius.
// Every qualifying tuple has its orbit-0 point as anchor and all other points
// inside the anchor's 3^N neighbourhood, so scanning anchors covers all of them.
class TupleSearch {
 public:
  TupleSearch(const OrbitSet& orbits, std::size_t n)
      : orbits_(orbits), n_(n), grid_(orbits, n), candidates_(orbits.k()), chosen_(orbits.k()) {}

  /// True iff some tuple has diameter <= r.
  bool exists(double r) {
    mode_ = Mode::Exists;
    bound_ = r;
    found_ = false;
    scan(r);
    return found_;
  }

  /// Best tuple among those with diameter <= r (distance = inf if none).
  TupleMatch best_within(double r) {
    mode_ = Mode::Minimise;
    bound_ = r;
    best_ = TupleMatch{};
    scan(r);
    return best_;
  }

  /// Number of tuples with every pairwise distance < r.
  std::uint64_t count_below(double r) {
    mode_ = Mode::Count;
    bound_ = r;
    count_ = 0;
    scan(r);
    return count_;
  }

 private:
  enum class Mode { Exists, Minimise, Count };

  bool within(double d) const { return mode_ == Mode::Count ? d < bound_ : d <= bound_; }

  void scan(double r) {
    const int level = grid_.level_for(r);
    const std::size_t k = orbits_.k();
    const MetricSpec& metric = orbits_.metric();
    const PointArray& anchors = orbits_.orbit(0);
    for (std::size_t a = 0; a < n_; ++a) {
      for (std::size_t o = 1; o < k; ++o) candidates_[o].clear();
      const auto ap = anchors[a];
      grid_.for_each_neighbor(ap, level, [&](const DyadicGrid::Ref& ref) {
        if (ref.orbit == 0) return;
        if (within(metric(ap, orbits_.orbit(ref.orbit)[ref.index]))) candidates_[ref.orbit].push_back(ref.index);
      });
      bool empty = false;
      for (std::size_t o = 1; o < k; ++o) {
        if (candidates_[o].empty()) {
          empty = true;
          break;
        }
        std::sort(candidates_[o].begin(), candidates_[o].end());
      }
      if (empty) continue;
      chosen_[0] = a;
      extend(1, 0.0);
      if (mode_ == Mode::Exists && found_) return;
    }
  }

  void extend(std::size_t depth, double diameter) {
    const std::size_t k = orbits_.k();
    if (depth == k) {
      switch (mode_) {
        case Mode::Exists: found_ = true; break;
        case Mode::Count: ++count_; break;
        case Mode::Minimise:
          if (detail::better(diameter, chosen_, best_)) {
            best_.distance = diameter;
            best_.indices = chosen_;
            bound_ = diameter;
          }
          break;
      }
      return;
    }
    const MetricSpec& metric = orbits_.metric();
    for (std::size_t idx : candidates_[depth]) {
      const auto p = orbits_.orbit(depth)[idx];
      double d = diameter;
      bool ok = true;
      for (std::size_t j = 0; j < depth; ++j) {
        const double g = metric(orbits_.orbit(j)[chosen_[j]], p);
        if (!within(g)) {
          ok = false;
          break;
        }
        d = std::max(d, g);
      }
      if (!ok) continue;
      chosen_[depth] = idx;
      extend(depth + 1, d);
      if (mode_ == Mode::Exists && found_) return;
    }
  }

  const OrbitSet& orbits_;
  std::size_t n_;
  DyadicGrid grid_;
  std::vector<std::vector<std::size_t>> candidates_;
  std::vector<std::size_t> chosen_;
  Mode mode_ = Mode::Exists;
  double bound_ = 0.0;
  bool found_ = false;
  std::uint64_t count_ = 0;
  TupleMatch best_;
};

inline constexpr double kSmallestRadius = 0x1p-60;

}  // namespace detail

struct SearchOptions {
  /// Known upper bound on m_n (e.g. m_n at a shorter prefix); must not be below it.
  double upper_bound = std::numeric_limits<double>::infinity();
  /// Instances with k*n below this are enumerated directly.
  std::size_t brute_force_below = 256;
};

/// Same result as closest_tuple_bruteforce (value and tie-broken indices).
/// Shrinking-radius search: starting from the diameter of the initial tuple
/// (or a caller-supplied upper bound on m_n), halve r while some tuple of
/// diameter <= r/2 exists, then minimise exactly over tuples of diameter <= r.
inline TupleMatch closest_tuple_fast(const OrbitSet& orbits, std::size_t n, const SearchOptions& opts = {}) {
  detail::check_n(orbits, n);
  if (orbits.k() * n < opts.brute_force_below || orbits.dim() > 16) {
    return closest_tuple_bruteforce(orbits, n);
  }
  std::vector<std::size_t> zero(orbits.k(), 0);
  double r = detail::tuple_diameter(orbits, zero);
  if (opts.upper_bound < r) r = opts.upper_bound;

  detail::TupleSearch search(orbits, n);
  while (r > detail::kSmallestRadius && search.exists(r / 2)) r /= 2;
  TupleMatch best = search.best_within(r);
  if (best.indices.empty()) {
    // Only reachable when opts.upper_bound was below the true m_n.
    return closest_tuple_bruteforce(orbits, n);
  }
  return best;
}

inline double shortest_distance_fast(const OrbitSet& orbits, std::size_t n, const SearchOptions& opts = {}) {
  return closest_tuple_fast(orbits, n, opts).distance;
}

/// S_n: number of index tuples whose points are pairwise at distance < r.
inline std::uint64_t count_close_tuples(const OrbitSet& orbits, double r, std::size_t n,
                                        const SearchOptions& opts = {}) {
  detail::check_n(orbits, n);
  if (!(r > 0.0)) throw Error(Errc::InvalidSpec, "radius must be positive");
  if (orbits.k() * n < opts.brute_force_below || orbits.dim() > 16) {
    std::uint64_t count = 0;
    std::vector<std::size_t> idx(orbits.k(), 0);
    do {
      if (detail::tuple_diameter(orbits, idx) < r) ++count;
    } while (detail::advance(idx, n));
    return count;
  }
  detail::TupleSearch search(orbits, n);
  return search.count_below(r);
}

/// Metric of observed points: projections keep the torus/box flavour, affine
/// observations live in the box.
inline MetricSpec observed_metric(const dynamics::ObservationSpec& obs, const MetricSpec& metric) {
  const std::size_t d = dynamics::output_dimension(obs, metric.dim);
  if (obs.is<dynamics::Affine>()) return MetricSpec::euclidean(d);
  return {metric.kind, d};
}

/// m_n^f: the shortest distance between the observed orbits.
inline double observed_shortest_distance(const OrbitSet& orbits, const dynamics::ObservationSpec& obs,
                                         std::size_t n) {
  detail::check_n(orbits, n);
  std::vector<PointArray> seen;
  seen.reserve(orbits.k());
  for (const PointArray& o : orbits.orbits()) seen.push_back(dynamics::observe(obs, o.prefix(n)));
  return shortest_distance_fast(OrbitSet(std::move(seen), observed_metric(obs, orbits.metric())), n);
}

/// log m_n / (-log n); +inf flags m_n == 0.
inline double exponent(double m_n, std::size_t n) {
  if (n < 2) throw Error(Errc::InvalidSpec, "exponent needs n >= 2");
  if (m_n == 0.0) return std::numeric_limits<double>::infinity();
  return std::log(m_n) / -std::log(static_cast<double>(n));
}

inline bool is_degenerate(double exponent_value) { return std::isinf(exponent_value); }

}  // namespace orbitmatch::distance
