#pragma once

// Generalized dimensions D_k from samples of an invariant measure.
//
// Two correlation sums are provided. The centered sum averages the (k-1)th
// power of the empirical ball mass around each sample; the k-tuple sum is the
// fraction of k-tuples that are pairwise within r. Both scale like r^{(k-1) D_k}
// and bracket each other: centered(r/2) <= ktuple(r) <= centered(r) for the
// plug-in (empirical measure) form.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "orbitmatch/core.hpp"
#include "orbitmatch/distance.hpp"
#include "orbitmatch/dynamics.hpp"
#include "orbitmatch/regression.hpp"

namespace orbitmatch::dimension {

using distance::MetricSpec;

/// Geometric radii r_j = r0 * ratio^j, j = 0..count-1.
struct RadiiLadder {
  double r0 = 0.25;
  std::size_t count = 8;
  double ratio = 0.5;

  void validate() const {
    if (!(r0 > 0.0 && r0 < 1.0)) throw Error(Errc::InvalidSpec, "r0 must lie in (0,1)");
    if (!(ratio > 0.0 && ratio < 1.0)) throw Error(Errc::InvalidSpec, "ladder ratio must lie in (0,1)");
    if (count < 4) throw Error(Errc::InvalidSpec, "ladder needs at least 4 radii");
  }

  std::vector<double> radii() const {
    validate();
    std::vector<double> r(count);
    for (std::size_t j = 0; j < count; ++j) r[j] = r0 * std::pow(ratio, static_cast<double>(j));
    return r;
  }
};

/// UStatistic: leave-one-out ball masses over M-1 and tuples of distinct
/// indices. PlugIn: the empirical measure itself, self-pairs and repeated
/// indices included.
enum class Form { UStatistic, PlugIn };

enum class Estimator { Centered, KTuple };

struct CorrelationOptions {
  Form form = Form::UStatistic;
  /// k-tuple sums are enumerated exactly when M <= exact_max_points and k <= 3.
  std::size_t exact_max_points = 200;
  std::size_t sampled_tuples = 1'000'000;
  std::uint64_t seed = 0x5eed;
};

namespace detail {

inline void check_inputs(const PointArray& points, std::size_t k, const MetricSpec& metric) {
  if (k < 2) throw Error(Errc::KTooSmall, "order k must be >= 2");
  if (points.size() < k) {
    throw Error(Errc::TooFewPoints, "need at least k = " + std::to_string(k) + " points");
  }
  if (points.dim() != metric.dim) throw Error(Errc::DimensionMismatch, "sample dimension differs from metric");
}

inline double ipow(double base, std::size_t e) {
  double r = 1.0;
  for (std::size_t i = 0; i < e; ++i) r *= base;
  return r;
}

// Per-point neighbour counts c_i(r_j) = #{j != i : d(x_i, x_j) <= r_j} for a
// decreasing list of radii, in one O(M^2) pass.
struct NeighbourCounts {
  std::size_t radii = 0;
  std::vector<std::uint32_t> counts;  // point-major: counts[i * radii + j]
  std::vector<std::uint64_t> pair_hits;

  std::uint32_t at(std::size_t i, std::size_t j) const { return counts[i * radii + j]; }
};

inline NeighbourCounts neighbour_counts(const PointArray& points, std::span<const double> radii,
                                        const MetricSpec& metric) {
  const std::size_t m = points.size();
  const std::size_t nr = radii.size();
  NeighbourCounts out;
  out.radii = nr;
  out.counts.assign(m * nr, 0);
  out.pair_hits.assign(nr, 0);
  const double largest = radii.front();
  for (std::size_t i = 0; i < m; ++i) {
    const auto pi = points[i];
    std::uint32_t* ci = out.counts.data() + i * nr;
    for (std::size_t j = i + 1; j < m; ++j) {
      const double d = metric(pi, points[j]);
      if (d > largest) continue;
      std::size_t t = 0;
      while (t + 1 < nr && d <= radii[t + 1]) ++t;
      ++ci[t];
      ++out.counts[j * nr + t];
    }
  }
  // Cumulate from the smallest radius outwards.
  for (std::size_t i = 0; i < m; ++i) {
    std::uint32_t* ci = out.counts.data() + i * nr;
    for (std::size_t t = nr - 1; t-- > 0;) ci[t] += ci[t + 1];
    for (std::size_t t = 0; t < nr; ++t) out.pair_hits[t] += ci[t];
  }
  for (auto& h : out.pair_hits) h /= 2;
  return out;
}

inline double centered_from_counts(const NeighbourCounts& nc, std::size_t j, std::size_t m, std::size_t k,
                                   Form form) {
  // Sum integer powers first and divide once, so plug-in values share the
  // denominator M^k with the k-tuple count and compare exactly.
  double total = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const double c = nc.at(i, j) + (form == Form::PlugIn ? 1.0 : 0.0);
    total += ipow(c, k - 1);
  }
  const double per_point = static_cast<double>(form == Form::UStatistic ? m - 1 : m);
  return total / (ipow(per_point, k - 1) * static_cast<double>(m));
}

// Exact count of ordered k-tuples that are pairwise within r, by bitset clique
// extension. Distinct indices for the U-statistic, repetitions for plug-in.
class TupleCounter {
 public:
  TupleCounter(const PointArray& points, double r, const MetricSpec& metric, Form form)
      : m_(points.size()), words_((points.size() + 63) / 64), adj_(m_ * words_, 0) {
    for (std::size_t i = 0; i < m_; ++i) {
      if (form == Form::PlugIn) set(i, i);
      for (std::size_t j = i + 1; j < m_; ++j) {
        if (metric(points[i], points[j]) <= r) {
          set(i, j);
          set(j, i);
        }
      }
    }
  }

  double count(std::size_t k) const {
    std::vector<std::uint64_t> all(words_, ~std::uint64_t{0});
    if (m_ % 64 != 0) all.back() = (std::uint64_t{1} << (m_ % 64)) - 1;
    return extend(all, k);
  }

 private:
  void set(std::size_t i, std::size_t j) { adj_[i * words_ + j / 64] |= std::uint64_t{1} << (j % 64); }

  double extend(const std::vector<std::uint64_t>& allowed, std::size_t remaining) const {
    if (remaining == 1) {
      double c = 0.0;
      for (auto w : allowed) c += std::popcount(w);
      return c;
    }
    double total = 0.0;
    std::vector<std::uint64_t> next(words_);
    for (std::size_t w = 0; w < words_; ++w) {
      std::uint64_t bits = allowed[w];
      while (bits) {
        const std::size_t i = w * 64 + static_cast<std::size_t>(std::countr_zero(bits));
        bits &= bits - 1;
        bool any = false;
        for (std::size_t v = 0; v < words_; ++v) {
          next[v] = allowed[v] & adj_[i * words_ + v];
          any = any || next[v] != 0;
        }
        if (any) total += extend(next, remaining - 1);
      }
    }
    return total;
  }

  std::size_t m_;
  std::size_t words_;
  std::vector<std::uint64_t> adj_;
};

inline double tuple_total(std::size_t m, std::size_t k, Form form) {
  double t = 1.0;
  for (std::size_t i = 0; i < k; ++i) {
    t *= form == Form::UStatistic ? static_cast<double>(m - i) : static_cast<double>(m);
  }
  return t;
}

// Diameters of uniformly drawn k-tuples (distinct indices for the U-statistic).
inline std::vector<double> sampled_tuple_diameters(const PointArray& points, std::size_t k,
                                                   const MetricSpec& metric, const CorrelationOptions& opts) {
  Rng rng(opts.seed);
  const std::size_t m = points.size();
  std::vector<double> diam(opts.sampled_tuples);
  std::vector<std::size_t> idx(k);
  for (double& d : diam) {
    for (std::size_t a = 0; a < k; ++a) {
      for (;;) {
        idx[a] = static_cast<std::size_t>(rng.below(m));
        if (opts.form == Form::PlugIn) break;
        if (std::find(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(a), idx[a]) ==
            idx.begin() + static_cast<std::ptrdiff_t>(a)) {
          break;
        }
      }
    }
    double worst = 0.0;
    for (std::size_t a = 0; a < k; ++a) {
      for (std::size_t b = a + 1; b < k; ++b) worst = std::max(worst, metric(points[idx[a]], points[idx[b]]));
    }
    d = worst;
  }
  std::sort(diam.begin(), diam.end());
  return diam;
}

inline bool exact_tuples(std::size_t m, std::size_t k, const CorrelationOptions& opts) {
  return m <= opts.exact_max_points && k <= 3;
}

}  // namespace detail

/// (1/M) sum_i [ (1/(M-1)) #{j != i : d(x_i,x_j) <= r} ]^{k-1}, or the plug-in
/// version with self-pairs and normalisation M.
inline double centered_correlation_sum(const PointArray& points, double r, std::size_t k,
                                       const MetricSpec& metric, Form form = Form::UStatistic) {
  detail::check_inputs(points, k, metric);
  const double radii[1] = {r};
  const auto nc = detail::neighbour_counts(points, radii, metric);
  return detail::centered_from_counts(nc, 0, points.size(), k, form);
}

/// Fraction of k-tuples whose points are pairwise within r.
inline double ktuple_correlation_sum(const PointArray& points, double r, std::size_t k,
                                     const MetricSpec& metric, const CorrelationOptions& opts = {}) {
  detail::check_inputs(points, k, metric);
  const std::size_t m = points.size();
  if (detail::exact_tuples(m, k, opts)) {
    const detail::TupleCounter counter(points, r, metric, opts.form);
    return counter.count(k) / detail::tuple_total(m, k, opts.form);
  }
  const auto diam = detail::sampled_tuple_diameters(points, k, metric, opts);
  const auto hits = std::upper_bound(diam.begin(), diam.end(), r) - diam.begin();
  return static_cast<double>(hits) / static_cast<double>(diam.size());
}

struct CorrelationPoint {
  double radius = 0.0;
  double value = 0.0;
  std::uint64_t pair_hits = 0;
};

/// Correlation sum at every radius of the ladder, largest radius first.
inline std::vector<CorrelationPoint> correlation_profile(const PointArray& points, const RadiiLadder& ladder,
                                                         std::size_t k, const MetricSpec& metric,
                                                         Estimator estimator = Estimator::Centered,
                                                         const CorrelationOptions& opts = {}) {
  detail::check_inputs(points, k, metric);
  const auto radii = ladder.radii();
  const auto nc = detail::neighbour_counts(points, radii, metric);
  const std::size_t m = points.size();
  std::vector<CorrelationPoint> out(radii.size());
  std::vector<double> diam;
  if (estimator == Estimator::KTuple && !detail::exact_tuples(m, k, opts)) {
    diam = detail::sampled_tuple_diameters(points, k, metric, opts);
  }
  for (std::size_t j = 0; j < radii.size(); ++j) {
    out[j].radius = radii[j];
    out[j].pair_hits = nc.pair_hits[j];
    if (estimator == Estimator::Centered) {
      out[j].value = detail::centered_from_counts(nc, j, m, k, opts.form);
    } else if (diam.empty()) {
      const detail::TupleCounter counter(points, radii[j], metric, opts.form);
      out[j].value = counter.count(k) / detail::tuple_total(m, k, opts.form);
    } else {
      const auto hits = std::upper_bound(diam.begin(), diam.end(), radii[j]) - diam.begin();
      out[j].value = static_cast<double>(hits) / static_cast<double>(diam.size());
    }
  }
  return out;
}

struct DimensionEstimate {
  double dimension = 0.0;  // slope / (k-1)
  double slope = 0.0;
  double intercept = 0.0;
  double residual = 0.0;
  std::vector<CorrelationPoint> profile;
  std::vector<double> radii_used;
};

struct EstimateOptions {
  Estimator estimator = Estimator::Centered;
  CorrelationOptions correlation{};
  /// Radii with fewer unordered pair hits are below the sampling resolution.
  std::uint64_t min_pair_hits = 25;
};

/// Least-squares slope of log C(r) against log r over the usable radii,
/// divided by k-1.
inline DimensionEstimate estimate_Dk(const PointArray& points, const RadiiLadder& ladder, std::size_t k,
                                     const MetricSpec& metric, const EstimateOptions& opts = {}) {
  DimensionEstimate est;
  est.profile = correlation_profile(points, ladder, k, metric, opts.estimator, opts.correlation);
  std::vector<double> lx, ly;
  for (const auto& c : est.profile) {
    if (c.pair_hits < opts.min_pair_hits || !(c.value > 0.0) || !(c.value < 1.0)) continue;
    est.radii_used.push_back(c.radius);
    lx.push_back(std::log(c.radius));
    ly.push_back(std::log(c.value));
  }
  if (lx.size() < 3) {
    throw Error(Errc::NoUsableRadii, "only " + std::to_string(lx.size()) +
                                         " radii above the noise floor with correlation in (0,1)");
  }
  if (std::all_of(ly.begin(), ly.end(), [&](double v) { return v == ly.front(); })) {
    throw Error(Errc::NoUsableRadii, "correlation sum is constant across the ladder");
  }
  const LinearFit fit = fit_line(lx, ly);
  est.slope = fit.slope;
  est.intercept = fit.intercept;
  est.residual = fit.residual;
  est.dimension = std::max(0.0, fit.slope / static_cast<double>(k - 1));
  return est;
}

/// Closed-form D_k where one is known (independent of k for these measures).
inline std::optional<double> theoretical_Dk(const dynamics::MapSpec& map, std::size_t /*k*/) {
  return dynamics::theoretical_dimension(map);
}

}  // namespace orbitmatch::dimension
