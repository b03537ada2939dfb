#pragma once

// Deterministic and random interval/torus maps, their invariant measures, and
// observations of orbits.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <type_traits>
#include <utility>
#include <variant>
#include <vector>

#include "orbitmatch/core.hpp"

namespace orbitmatch::dynamics {

/// x -> m x mod 1, Lebesgue invariant.
struct MTimesMod1 {
  int m = 2;
};

/// x -> beta x mod 1 with its Parry measure.
struct Beta {
  double beta = 2.0;
};

/// x -> {1/x} with density 1 / (log 2 (1 + x)).
struct Gauss {};

/// x -> 2^n (x - 2^-n) on (2^-n, 2^-n+1], Lebesgue invariant.
struct PiecewiseDoubling {};

/// Diagonal expansion x -> factor * x mod 1 on the N-torus.
struct TorusExpanding {
  std::size_t dim = 2;
  int factor = 2;
};

/// Piecewise-linear map of [0,1]: theta(w) = slopes[i] * w + intercepts[i] on
/// [breaks[i], breaks[i+1]), last piece closed at 1.
struct PiecewiseLinearMap {
  std::vector<double> breaks;
  std::vector<double> slopes;
  std::vector<double> intercepts;

  std::size_t piece(double w) const {
    auto it = std::upper_bound(breaks.begin(), breaks.end(), w);
    return static_cast<std::size_t>(std::distance(breaks.begin(), it)) - 1;
  }

  double operator()(double w) const {
    const std::size_t i = piece(w);
    return std::clamp(slopes[i] * w + intercepts[i], 0.0, 1.0);
  }

  /// The four-branch Markov base map driving the non-i.i.d. 2x/3x example.
  static PiecewiseLinearMap four_branch() {
    return {{0.0, 0.2, 0.4, 0.6}, {2.0, 3.0, 2.0, 1.5}, {0.0, -0.2, -0.8, -0.5}};
  }
};

struct MapSpec;

/// Skew product S(w, x) = (theta(w), T_w(x)); the fiber map is chosen by the
/// cell of the threshold partition of [0,1] that contains w.
struct SkewProduct {
  PiecewiseLinearMap base;
  std::vector<double> thresholds;
  std::vector<MapSpec> fibers;

  std::size_t cell(double omega) const {
    if (!(omega >= 0.0 && omega <= 1.0)) {
      throw Error(Errc::SelectorGap, "omega " + std::to_string(omega) + " lies outside [0,1]");
    }
    auto it = std::upper_bound(thresholds.begin(), thresholds.end(), omega);
    return static_cast<std::size_t>(std::distance(thresholds.begin(), it));
  }

  /// T_w = 2x for w in [0, 2/5), 3x for w in [2/5, 1], driven by four_branch().
  static SkewProduct two_three_example();
};

struct MapSpec {
  using Variant =
      std::variant<MTimesMod1, Beta, Gauss, PiecewiseDoubling, TorusExpanding, SkewProduct>;
  Variant variant;

  MapSpec() : variant(MTimesMod1{}) {}
  template <typename T>
    requires std::is_constructible_v<Variant, T&&> &&
             (!std::is_same_v<std::remove_cvref_t<T>, MapSpec>)
  MapSpec(T&& v) : variant(std::forward<T>(v)) {}

  template <typename T>
  bool is() const { return std::holds_alternative<T>(variant); }
  template <typename T>
  const T& as() const { return std::get<T>(variant); }
};

inline SkewProduct SkewProduct::two_three_example() {
  return {PiecewiseLinearMap::four_branch(), {0.4}, {MTimesMod1{2}, MTimesMod1{3}}};
}

inline std::string describe(const MapSpec& map) {
  return std::visit(
      [](const auto& v) -> std::string {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, MTimesMod1>) return "m-times(m=" + std::to_string(v.m) + ")";
        else if constexpr (std::is_same_v<T, Beta>) return "beta(beta=" + std::to_string(v.beta) + ")";
        else if constexpr (std::is_same_v<T, Gauss>) return "gauss";
        else if constexpr (std::is_same_v<T, PiecewiseDoubling>) return "piecewise-doubling";
        else if constexpr (std::is_same_v<T, TorusExpanding>)
          return "torus-expanding(N=" + std::to_string(v.dim) + ", factor=" + std::to_string(v.factor) + ")";
        else return "skew-product(" + std::to_string(v.fibers.size()) + " fibers)";
      },
      map.variant);
}

/// State dimension; for a skew product, the fiber dimension.
inline std::size_t dimension(const MapSpec& map) {
  if (map.is<TorusExpanding>()) return map.as<TorusExpanding>().dim;
  if (map.is<SkewProduct>()) {
    const auto& s = map.as<SkewProduct>();
    return s.fibers.empty() ? 1 : dimension(s.fibers.front());
  }
  return 1;
}

/// Maps whose dynamics is x -> c x mod 1 (or the doubling branches) and which
/// preserve Lebesgue measure.
inline bool is_integer_expanding(const MapSpec& map) {
  return map.is<MTimesMod1>() || map.is<TorusExpanding>() || map.is<PiecewiseDoubling>();
}

namespace detail {

// Checks that theta pushes Lebesgue forward to Lebesgue: at every image point the
// inverse slopes of the branches covering it sum to one.
inline bool preserves_lebesgue(const PiecewiseLinearMap& f) {
  std::vector<double> cuts{0.0, 1.0};
  const std::size_t pieces = f.breaks.size();
  for (std::size_t i = 0; i < pieces; ++i) {
    const double a = f.breaks[i];
    const double b = i + 1 < pieces ? f.breaks[i + 1] : 1.0;
    cuts.push_back(std::clamp(f.slopes[i] * a + f.intercepts[i], 0.0, 1.0));
    cuts.push_back(std::clamp(f.slopes[i] * b + f.intercepts[i], 0.0, 1.0));
  }
  std::sort(cuts.begin(), cuts.end());
  for (std::size_t c = 0; c + 1 < cuts.size(); ++c) {
    if (cuts[c + 1] - cuts[c] < 1e-12) continue;
    const double y = 0.5 * (cuts[c] + cuts[c + 1]);
    double mass = 0.0;
    for (std::size_t i = 0; i < pieces; ++i) {
      const double a = f.breaks[i];
      const double b = i + 1 < pieces ? f.breaks[i + 1] : 1.0;
      const double fa = f.slopes[i] * a + f.intercepts[i];
      const double fb = f.slopes[i] * b + f.intercepts[i];
      if (y > std::min(fa, fb) && y < std::max(fa, fb)) mass += 1.0 / std::abs(f.slopes[i]);
    }
    if (std::abs(mass - 1.0) > 1e-9) return false;
  }
  return true;
}

}  // namespace detail

inline void validate(const PiecewiseLinearMap& f) {
  const std::size_t p = f.breaks.size();
  if (p == 0 || f.slopes.size() != p || f.intercepts.size() != p) {
    throw Error(Errc::InvalidSpec, "piecewise-linear map needs matching breaks/slopes/intercepts");
  }
  if (f.breaks.front() != 0.0) throw Error(Errc::InvalidSpec, "first break must be 0");
  for (std::size_t i = 0; i < p; ++i) {
    if (i + 1 < p && !(f.breaks[i] < f.breaks[i + 1])) {
      throw Error(Errc::InvalidSpec, "breaks must be strictly increasing");
    }
    if (f.breaks[i] >= 1.0) throw Error(Errc::InvalidSpec, "breaks must lie in [0,1)");
    if (f.slopes[i] == 0.0) throw Error(Errc::InvalidSpec, "zero slope");
  }
  if (!detail::preserves_lebesgue(f)) {
    throw Error(Errc::InvalidSpec, "base map does not preserve Lebesgue measure");
  }
}

inline void validate(const MapSpec& map) {
  std::visit(
      [](const auto& v) {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, MTimesMod1>) {
          if (v.m < 2) throw Error(Errc::InvalidSpec, "m-times map needs m >= 2");
        } else if constexpr (std::is_same_v<T, Beta>) {
          if (!(v.beta > 1.0) || !std::isfinite(v.beta)) throw Error(Errc::InvalidSpec, "beta must exceed 1");
        } else if constexpr (std::is_same_v<T, TorusExpanding>) {
          if (v.dim < 1) throw Error(Errc::InvalidSpec, "torus dimension must be >= 1");
          if (v.factor < 2) throw Error(Errc::InvalidSpec, "expansion factor must be >= 2");
        } else if constexpr (std::is_same_v<T, SkewProduct>) {
          validate(v.base);
          for (std::size_t i = 0; i < v.thresholds.size(); ++i) {
            const double t = v.thresholds[i];
            if (!(t > 0.0 && t < 1.0)) throw Error(Errc::InvalidSpec, "selector thresholds must lie in (0,1)");
            if (i > 0 && !(v.thresholds[i - 1] < t)) {
              throw Error(Errc::InvalidSpec, "selector thresholds must be strictly increasing");
            }
          }
          if (v.fibers.size() != v.thresholds.size() + 1) {
            throw Error(Errc::InvalidSpec, "need one fiber map per selector cell");
          }
          const std::size_t d = dimension(v.fibers.front());
          for (const MapSpec& f : v.fibers) {
            if (!is_integer_expanding(f)) {
              throw Error(Errc::InvalidSpec, "fiber maps must be Lebesgue-preserving expanding maps");
            }
            validate(f);
            if (dimension(f) != d) throw Error(Errc::InvalidSpec, "fiber maps differ in dimension");
          }
        }
      },
      map.variant);
}

namespace detail {

inline double frac(double y) { return y - std::floor(y); }

inline double doubling_branch(double x) {
  if (x == 0.0) return 0.0;  // 1 and 0 are identified
  int e = 0;
  const double f = std::frexp(x, &e);  // x = f 2^e, f in [0.5, 1)
  const int n = (f == 0.5) ? 2 - e : 1 - e;
  const double y = std::ldexp(x, n) - 1.0;
  return y >= 1.0 ? 0.0 : y;
}

inline double step_scalar(const MapSpec& map, double x) {
  if (map.is<MTimesMod1>()) return frac(map.as<MTimesMod1>().m * x);
  if (map.is<Beta>()) return frac(map.as<Beta>().beta * x);
  if (map.is<Gauss>()) {
    if (x == 0.0) throw Error(Errc::GaussAtZero, "Gauss map is undefined at 0");
    return frac(1.0 / x);
  }
  if (map.is<PiecewiseDoubling>()) return doubling_branch(x);
  if (map.is<TorusExpanding>()) return frac(map.as<TorusExpanding>().factor * x);
  throw Error(Errc::UnsupportedMap, "no scalar step for " + describe(map));
}

}  // namespace detail

/// One application of the map.
inline Point step(const MapSpec& map, const Point& x) {
  if (map.is<SkewProduct>()) {
    throw Error(Errc::UnsupportedMap, "skew products need a driving state; use skew_step");
  }
  if (x.dim() != dimension(map)) {
    throw Error(Errc::DimensionMismatch, "point has dim " + std::to_string(x.dim()) + ", map expects " +
                                             std::to_string(dimension(map)));
  }
  std::vector<double> out(x.dim());
  for (std::size_t i = 0; i < x.dim(); ++i) out[i] = detail::step_scalar(map, x[i]);
  return Point(std::move(out));
}

/// (w, x) -> (theta(w), T_w(x)).
inline std::pair<double, Point> skew_step(const SkewProduct& skew, double omega, const Point& x) {
  const MapSpec& fiber = skew.fibers[skew.cell(omega)];
  return {skew.base(omega), step(fiber, x)};
}

/// x0, T x0, ..., T^{n-1} x0 in double precision.
inline PointArray orbit(const MapSpec& map, const Point& x0, std::size_t n) {
  if (n == 0) throw Error(Errc::InvalidSpec, "orbit length must be >= 1");
  PointArray out(x0.dim());
  out.reserve(n);
  Point x = x0;
  out.push_back(x);
  for (std::size_t i = 1; i < n; ++i) {
    x = step(map, x);
    out.push_back(x);
  }
  return out;
}

/// Fiber coordinates of x0, T_w x0, T_{theta w} T_w x0, ...
inline PointArray random_orbit(const SkewProduct& skew, double omega0, const Point& x0, std::size_t n) {
  if (n == 0) throw Error(Errc::InvalidSpec, "orbit length must be >= 1");
  PointArray out(x0.dim());
  out.reserve(n);
  double omega = omega0;
  Point x = x0;
  out.push_back(x);
  for (std::size_t i = 1; i < n; ++i) {
    auto [w, y] = skew_step(skew, omega, x);
    omega = w;
    x = std::move(y);
    out.push_back(x);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Invariant measures
// ---------------------------------------------------------------------------

/// Unnormalised Parry density h(x) = sum_{n>=0} beta^-n 1{x < T^n(1)} and its
/// normalising constant.
class ParryDensity {
 public:
  explicit ParryDensity(double beta) : beta_(beta) {
    double t = 1.0;
    double w = 1.0;
    while (w > 1e-17) {
      if (t < 1e-9) break;  // expansion of 1 terminated
      levels_.push_back(t);
      weights_.push_back(w);
      norm_ += w * t;
      t = detail::frac(beta * t);
      if (1.0 - t < 1e-9) t = 0.0;
      w /= beta;
    }
  }

  double unnormalized(double x) const {
    double h = 0.0;
    for (std::size_t i = 0; i < levels_.size(); ++i) {
      if (x < levels_[i]) h += weights_[i];
    }
    return h;
  }

  double density(double x) const { return unnormalized(x) / norm_; }
  double upper_bound() const { return 1.0 / (1.0 - 1.0 / beta_); }

 private:
  double beta_;
  double norm_ = 0.0;
  std::vector<double> levels_;
  std::vector<double> weights_;
};

namespace detail {

inline double sample_scalar(const MapSpec& map, Rng& rng) {
  if (map.is<Beta>()) {
    // Rejection against the uniform: accept x with probability rho(x) (1 - 1/beta).
    const double beta = map.as<Beta>().beta;
    const ParryDensity parry(beta);
    const double envelope = parry.upper_bound();
    for (;;) {
      const double x = rng.uniform();
      if (rng.uniform() * envelope < parry.density(x)) return x;
    }
  }
  if (map.is<Gauss>()) {
    for (;;) {
      const double x = std::exp2(rng.uniform()) - 1.0;
      if (x > 0.0 && x < 1.0) return x;
    }
  }
  return rng.uniform();
}

}  // namespace detail

/// One draw from the map's invariant measure. For a skew product this is the
/// fiber marginal (Lebesgue for the supported fibers).
inline Point sample_invariant(const MapSpec& map, Rng& rng) {
  const MapSpec& m = map.is<SkewProduct>() ? map.as<SkewProduct>().fibers.front() : map;
  std::vector<double> c(dimension(m));
  for (double& v : c) v = detail::sample_scalar(m, rng);
  return Point(std::move(c));
}

// ---------------------------------------------------------------------------
// Stationary orbits
//
// Integer-expanding maps are iterated on a 64-bit fixed-point state y
// representing x = (y + u) 2^-64 with u uniform and independent of y. Since
// c u = j + u' with j uniform on {0..c-1} and u' again uniform, the update
// y <- c y + j (mod 2^64) reproduces the law of the true orbit exactly, without
// the bit loss of floating-point iteration.
// ---------------------------------------------------------------------------

namespace detail {

inline double fixed_to_double(std::uint64_t y) { return static_cast<double>(y >> 11) * 0x1p-53; }

inline std::uint64_t advance_fixed(const MapSpec& map, std::uint64_t y, Rng& rng) {
  if (map.is<PiecewiseDoubling>()) {
    if (y == 0) return rng.next();
    const int n = std::countl_zero(y) + 1;
    if (n >= 64) return rng.next();
    return (y << n) | (rng.next() >> (64 - n));
  }
  const auto c = static_cast<std::uint64_t>(map.is<MTimesMod1>() ? map.as<MTimesMod1>().m
                                                                 : map.as<TorusExpanding>().factor);
  return y * c + rng.below(c);
}

}  // namespace detail

/// An orbit of length n started from the invariant measure. Exact in law for
/// integer-expanding maps and for the fibers of skew products; a
/// double-precision pseudo-orbit for Beta and Gauss.
inline PointArray sample_orbit(const MapSpec& map, std::size_t n, Rng& rng) {
  validate(map);
  if (n == 0) throw Error(Errc::InvalidSpec, "orbit length must be >= 1");
  const std::size_t dim = dimension(map);
  PointArray out(dim);
  out.reserve(n);
  std::vector<double> buf(dim);

  if (is_integer_expanding(map) || map.is<SkewProduct>()) {
    const bool skew = map.is<SkewProduct>();
    double omega = skew ? rng.uniform() : 0.0;
    std::vector<std::uint64_t> y(dim);
    for (auto& v : y) v = rng.next();
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t c = 0; c < dim; ++c) buf[c] = detail::fixed_to_double(y[c]);
      out.push_back(buf);
      if (i + 1 == n) break;
      if (skew) {
        const auto& s = map.as<SkewProduct>();
        const MapSpec& fiber = s.fibers[s.cell(omega)];
        for (auto& v : y) v = detail::advance_fixed(fiber, v, rng);
        omega = s.base(omega);
      } else {
        for (auto& v : y) v = detail::advance_fixed(map, v, rng);
      }
    }
    return out;
  }

  double x = detail::sample_scalar(map, rng);
  for (std::size_t i = 0; i < n; ++i) {
    buf[0] = x;
    out.push_back(buf);
    if (map.is<Gauss>() && x == 0.0) {
      x = detail::sample_scalar(map, rng);  // measure-zero landing on 0: restart
    } else {
      x = detail::step_scalar(map, x);
      if (map.is<Gauss>() && x == 0.0) x = detail::sample_scalar(map, rng);
    }
  }
  return out;
}

/// Generalized dimension D_k of the invariant measure when it is known in
/// closed form: 1 for the interval maps (absolutely continuous measures), N for
/// the N-torus, and the fiber dimension for Lebesgue skew products.
inline std::optional<double> theoretical_dimension(const MapSpec& map) {
  if (map.is<TorusExpanding>()) return static_cast<double>(map.as<TorusExpanding>().dim);
  if (map.is<SkewProduct>()) {
    const auto& s = map.as<SkewProduct>();
    for (const MapSpec& f : s.fibers) {
      if (!is_integer_expanding(f)) return std::nullopt;
    }
    return static_cast<double>(dimension(s.fibers.front()));
  }
  return 1.0;
}

// ---------------------------------------------------------------------------
// Observations
// ---------------------------------------------------------------------------

struct Identity {};

struct CoordinateProjection {
  std::vector<std::size_t> indices;
};

/// y = scale * x + offset per coordinate, clamped into [0,1).
struct Affine {
  double scale = 1.0;
  double offset = 0.0;
};

struct ObservationSpec {
  using Variant = std::variant<Identity, CoordinateProjection, Affine>;
  Variant variant;

  ObservationSpec() : variant(Identity{}) {}
  template <typename T>
    requires std::is_constructible_v<Variant, T&&> &&
             (!std::is_same_v<std::remove_cvref_t<T>, ObservationSpec>)
  ObservationSpec(T&& v) : variant(std::forward<T>(v)) {}

  template <typename T>
  bool is() const { return std::holds_alternative<T>(variant); }
  template <typename T>
  const T& as() const { return std::get<T>(variant); }
};

inline double lipschitz_constant(const ObservationSpec& obs) {
  if (obs.is<Affine>()) return std::abs(obs.as<Affine>().scale);
  return 1.0;
}

inline void validate(const ObservationSpec& obs, std::size_t input_dim) {
  if (obs.is<Affine>()) {
    const auto& a = obs.as<Affine>();
    if (a.scale == 0.0 || !std::isfinite(a.scale) || !std::isfinite(a.offset)) {
      throw Error(Errc::InvalidSpec, "affine observation needs a finite non-zero scale");
    }
  } else if (obs.is<CoordinateProjection>()) {
    const auto& p = obs.as<CoordinateProjection>();
    if (p.indices.empty()) throw Error(Errc::InvalidSpec, "projection needs at least one index");
    for (std::size_t i : p.indices) {
      if (i >= input_dim) {
        throw Error(Errc::DimensionMismatch, "projection index " + std::to_string(i) +
                                                 " out of range for dimension " + std::to_string(input_dim));
      }
    }
  }
}

inline std::size_t output_dimension(const ObservationSpec& obs, std::size_t input_dim) {
  if (obs.is<CoordinateProjection>()) return obs.as<CoordinateProjection>().indices.size();
  return input_dim;
}

namespace detail {

inline void observe_into(const ObservationSpec& obs, std::span<const double> x, std::vector<double>& out) {
  out.clear();
  if (obs.is<Identity>()) {
    out.assign(x.begin(), x.end());
  } else if (obs.is<CoordinateProjection>()) {
    for (std::size_t i : obs.as<CoordinateProjection>().indices) out.push_back(x[i]);
  } else {
    const auto& a = obs.as<Affine>();
    constexpr double below_one = 1.0 - 0x1p-53;
    for (double v : x) out.push_back(std::clamp(a.scale * v + a.offset, 0.0, below_one));
  }
}

}  // namespace detail

inline Point observe(const ObservationSpec& obs, const Point& x) {
  validate(obs, x.dim());
  std::vector<double> out;
  detail::observe_into(obs, x.coords(), out);
  return Point(std::move(out));
}

inline PointArray observe(const ObservationSpec& obs, const PointArray& xs) {
  validate(obs, xs.dim());
  PointArray out(output_dimension(obs, xs.dim()));
  out.reserve(xs.size());
  std::vector<double> buf;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    detail::observe_into(obs, xs[i], buf);
    out.push_back(buf);
  }
  return out;
}

}  // namespace orbitmatch::dynamics
