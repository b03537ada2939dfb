#pragma once

// Replicated n-ladder experiments: simulate, measure, regress, compare with
// the closed-form constant.

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "orbitmatch/core.hpp"
#include "orbitmatch/dimension.hpp"
#include "orbitmatch/distance.hpp"
#include "orbitmatch/dynamics.hpp"
#include "orbitmatch/experiments/config.hpp"
#include "orbitmatch/matching.hpp"
#include "orbitmatch/regression.hpp"
#include "orbitmatch/symbolic.hpp"

namespace orbitmatch::experiments {

struct Row {
  std::size_t n = 0;
  std::size_t replica = 0;
  double statistic = 0.0;
  double exponent = 0.0;
};

/// Per-n aggregate of the regressed quantity y (log m_n for distance kinds,
/// the statistic itself otherwise).
struct Level {
  std::size_t n = 0;
  double abscissa = 0.0;
  double mean_statistic = 0.0;
  double mean_y = 0.0;
  double stderr_y = 0.0;
  std::size_t used = 0;  // replicas contributing to mean_y
};

struct ExperimentResult {
  ExperimentConfig config;
  std::vector<Row> rows;  // ordered by (n, replica)
  std::vector<Level> levels;
  std::string statistic_name;
  std::string abscissa_name;
  std::optional<LinearFit> fit;
  std::optional<double> estimate;
  std::optional<double> theory;
  double runtime_seconds = 0.0;
  std::size_t threads = 1;

  std::optional<double> abs_error() const {
    if (!estimate || !theory) return std::nullopt;
    return std::abs(*estimate - *theory);
  }
  std::optional<double> rel_error() const {
    if (!estimate || !theory || *theory == 0.0) return std::nullopt;
    return std::abs(*estimate - *theory) / std::abs(*theory);
  }
};

/// log m_n regressed on -log n, M_n / V_n on log n; dimension and entropy
/// report the replica mean at the largest n.
inline bool uses_regression(Kind k) { return is_distance_kind(k) || k == Kind::Lcs || k == Kind::LcsEncoded || k == Kind::Scrabble; }

inline std::string statistic_name(Kind k) {
  switch (k) {
    case Kind::ShortestDistance:
    case Kind::RandomOrbits: return "m_n";
    case Kind::ObservedDistance: return "m_n^f";
    case Kind::Lcs: return "M_n";
    case Kind::LcsEncoded: return "M_n^f";
    case Kind::Scrabble: return "V_n";
    case Kind::Dimension: return "D_k";
    case Kind::Entropy: return "H_k";
  }
  return "?";
}

inline std::string abscissa_name(Kind k) {
  if (is_distance_kind(k)) return "-log n";
  if (uses_regression(k)) return "log n";
  return "n";
}

inline double abscissa(Kind k, std::size_t n) {
  const double l = std::log(static_cast<double>(n));
  if (is_distance_kind(k)) return -l;
  if (uses_regression(k)) return l;
  return static_cast<double>(n);
}

/// Per-replica exponent: log m / -log n for distances, M / log n for matching,
/// the statistic itself for dimension and entropy.
inline double row_exponent(Kind k, double statistic, std::size_t n) {
  if (is_distance_kind(k)) return distance::exponent(statistic, n);
  if (uses_regression(k)) {
    return n > 1 ? statistic / std::log(static_cast<double>(n)) : std::numeric_limits<double>::infinity();
  }
  return statistic;
}

namespace detail {

inline double observed_dimension(const dynamics::MapSpec& map, const dynamics::ObservationSpec& obs) {
  const auto d = dynamics::theoretical_dimension(map);
  if (!d) return std::numeric_limits<double>::quiet_NaN();
  if (!obs.is<dynamics::CoordinateProjection>() || dynamics::dimension(map) == 1) return *d;
  // Coordinate marginals of Lebesgue on the torus are Lebesgue on the kept axes.
  auto idx = obs.as<dynamics::CoordinateProjection>().indices;
  std::sort(idx.begin(), idx.end());
  idx.erase(std::unique(idx.begin(), idx.end()), idx.end());
  return static_cast<double>(idx.size());
}

}  // namespace detail

/// Closed-form constant the estimate should approach, when one is known.
inline std::optional<double> theoretical_constant(const ExperimentConfig& cfg) {
  const double k = static_cast<double>(cfg.k);
  switch (cfg.kind) {
    case Kind::ShortestDistance:
    case Kind::RandomOrbits: {
      const auto d = dimension::theoretical_Dk(*cfg.map, cfg.k);
      if (!d || *d <= 0.0) return std::nullopt;
      return k / ((k - 1.0) * *d);
    }
    case Kind::ObservedDistance: {
      const double d = detail::observed_dimension(*cfg.map, cfg.observation);
      if (!(d > 0.0)) return std::nullopt;
      return k / ((k - 1.0) * d);
    }
    case Kind::Lcs: return matching::lcs_limit_constant(*cfg.markov, cfg.k);
    case Kind::LcsEncoded:
      if (cfg.encoder.is<matching::IdentityEncoder>()) return matching::lcs_limit_constant(*cfg.markov, cfg.k);
      if (cfg.encoder.is<matching::LetterRepetition>()) {
        try {
          return matching::scrabble_limit_constant(
              matching::ScrabbleSpec(*cfg.markov, cfg.encoder.as<matching::LetterRepetition>().weights), cfg.k);
        } catch (const Error& e) {
          if (e.code() == Errc::GcdNotOne) return std::nullopt;
          throw;
        }
      }
      return std::nullopt;
    case Kind::Scrabble:
      return matching::scrabble_limit_constant(matching::ScrabbleSpec(*cfg.markov, cfg.weights), cfg.k);
    case Kind::Dimension: return dimension::theoretical_Dk(*cfg.map, cfg.k);
    case Kind::Entropy: return symbolic::renyi_entropy_markov(*cfg.markov, cfg.k);
  }
  return std::nullopt;
}

namespace detail {

inline std::string_view seed_tag(Kind k) { return kind_name(k); }

// All statistics for one replica, one per ladder entry.
inline std::vector<double> run_replica(const ExperimentConfig& cfg, std::size_t replica) {
  Rng rng(derive_seed(cfg.seed, replica, seed_tag(cfg.kind)));
  const std::size_t top = cfg.ladder.back();
  std::vector<double> stats;
  stats.reserve(cfg.ladder.size());
  std::size_t current_n = 0;
  try {
    if (is_distance_kind(cfg.kind)) {
      std::vector<PointArray> orbits;
      for (std::size_t j = 0; j < cfg.k; ++j) {
        PointArray o = dynamics::sample_orbit(*cfg.map, top, rng);
        if (cfg.kind == Kind::ObservedDistance) o = dynamics::observe(cfg.observation, o);
        orbits.push_back(std::move(o));
      }
      const std::size_t dim = orbits.front().dim();
      distance::MetricSpec metric{cfg.metric, dim};
      if (cfg.kind == Kind::ObservedDistance) {
        metric = distance::observed_metric(cfg.observation, distance::MetricSpec{cfg.metric, dynamics::dimension(*cfg.map)});
      }
      const distance::OrbitSet set(std::move(orbits), metric);
      distance::SearchOptions opts;
      for (std::size_t n : cfg.ladder) {
        current_n = n;
        const double m = distance::shortest_distance_fast(set, n, opts);
        opts.upper_bound = m;  // m_n is non-increasing in n
        stats.push_back(m);
      }
    } else if (cfg.kind == Kind::Dimension) {
      PointArray pts(dynamics::dimension(*cfg.map));
      pts.reserve(top);
      for (std::size_t i = 0; i < top; ++i) pts.push_back(dynamics::sample_invariant(*cfg.map, rng).coords());
      const distance::MetricSpec metric{cfg.metric, pts.dim()};
      dimension::EstimateOptions opts;
      opts.estimator = cfg.estimator;
      opts.correlation.seed = rng.next();
      for (std::size_t n : cfg.ladder) {
        current_n = n;
        stats.push_back(dimension::estimate_Dk(pts.prefix(n), cfg.radii, cfg.k, metric, opts).dimension);
      }
    } else {
      std::vector<symbolic::SymbolSequence> seqs;
      const std::size_t count = cfg.kind == Kind::Entropy ? 1 : cfg.k;
      for (std::size_t j = 0; j < count; ++j) seqs.push_back(symbolic::sample_markov(*cfg.markov, top, rng));
      if (cfg.kind == Kind::LcsEncoded) {
        for (auto& s : seqs) s = matching::apply_encoder(cfg.encoder, s, top);
      }
      std::size_t known = 0;
      for (std::size_t n : cfg.ladder) {
        current_n = n;
        switch (cfg.kind) {
          case Kind::Lcs:
          case Kind::LcsEncoded: {
            matching::LcsOptions lo;
            lo.known_feasible = known;  // M_n is non-decreasing in n
            known = matching::lcs_k_fast(seqs, n, lo);
            stats.push_back(static_cast<double>(known));
            break;
          }
          case Kind::Scrabble:
            stats.push_back(static_cast<double>(matching::scrabble_Vn(seqs, cfg.weights, n, cfg.window)));
            break;
          case Kind::Entropy:
            stats.push_back(symbolic::empirical_renyi(symbolic::cylinder_counts(seqs[0].prefix(n), cfg.cylinder_length), cfg.k));
            break;
          default: break;
        }
      }
    }
  } catch (const Error& e) {
    throw Error(e.code(), e.message() + " (n=" + std::to_string(current_n) +
                              ", replica=" + std::to_string(replica) + ")");
  }
  return stats;
}

inline std::size_t resolve_threads(std::size_t requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("ORBITMATCH_THREADS")) {
    char* end = nullptr;
    const unsigned long v = std::strtoul(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return v;
  }
  return 1;
}

}  // namespace detail

/// Runs every replica (in parallel when threads > 1) and assembles rows in
/// (n, replica) order, so the result does not depend on scheduling.
/// threads = 0 reads ORBITMATCH_THREADS, defaulting to 1.
inline ExperimentResult run(const ExperimentConfig& cfg, std::size_t threads = 0) {
  const auto start = std::chrono::steady_clock::now();
  ExperimentResult res;
  res.config = cfg;
  res.statistic_name = statistic_name(cfg.kind);
  res.abscissa_name = abscissa_name(cfg.kind);
  res.threads = std::min(detail::resolve_threads(threads), cfg.replicas);
  res.theory = theoretical_constant(cfg);

  std::vector<std::vector<double>> stats(cfg.replicas);
  std::vector<std::optional<Error>> errors(cfg.replicas);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t r = next++; r < cfg.replicas; r = next++) {
      try {
        stats[r] = detail::run_replica(cfg, r);
      } catch (const Error& e) {
        errors[r] = e;
      } catch (const std::exception& e) {
        errors[r] = Error(Errc::InvalidSpec, std::string(e.what()) + " (replica=" + std::to_string(r) + ")");
      }
    }
  };
  if (res.threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < res.threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors) {
    if (e) throw *e;
  }

  const bool log_y = is_distance_kind(cfg.kind);
  std::vector<double> xs, ys;
  for (std::size_t j = 0; j < cfg.ladder.size(); ++j) {
    const std::size_t n = cfg.ladder[j];
    Level lv;
    lv.n = n;
    lv.abscissa = abscissa(cfg.kind, n);
    double sum_s = 0.0, sum_y = 0.0, sum_y2 = 0.0;
    for (std::size_t r = 0; r < cfg.replicas; ++r) {
      const double s = stats[r][j];
      res.rows.push_back({n, r, s, row_exponent(cfg.kind, s, n)});
      sum_s += s;
      if (log_y && !(s > 0.0)) continue;  // m_n = 0: coincident points carry no exponent
      const double y = log_y ? std::log(s) : s;
      sum_y += y;
      sum_y2 += y * y;
      ++lv.used;
    }
    lv.mean_statistic = sum_s / static_cast<double>(cfg.replicas);
    if (lv.used > 0) {
      const double u = static_cast<double>(lv.used);
      lv.mean_y = sum_y / u;
      const double var = lv.used > 1 ? std::max(0.0, (sum_y2 - u * lv.mean_y * lv.mean_y) / (u - 1.0)) : 0.0;
      lv.stderr_y = std::sqrt(var / u);
      xs.push_back(lv.abscissa);
      ys.push_back(lv.mean_y);
    } else {
      lv.mean_y = std::numeric_limits<double>::quiet_NaN();
    }
    res.levels.push_back(lv);
  }

  if (uses_regression(cfg.kind)) {
    if (xs.size() >= 2) {
      res.fit = fit_line(xs, ys);
      res.estimate = res.fit->slope;
    }
  } else if (res.levels.back().used > 0) {
    res.estimate = res.levels.back().mean_y;
  }
  res.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return res;
}

}  // namespace orbitmatch::experiments
