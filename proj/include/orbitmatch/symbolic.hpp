#pragma once

// Finite-alphabet sources: Markov chains, their stationary laws and generalized
// Renyi entropies (closed form via Perron eigenvalues, empirical via cylinder
// counts).

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "orbitmatch/core.hpp"

namespace orbitmatch::symbolic {

/// Dense row-major square matrix.
class SquareMatrix {
 public:
  SquareMatrix() = default;
  explicit SquareMatrix(std::size_t n, double fill = 0.0) : n_(n), data_(n * n, fill) {}

  static SquareMatrix from_rows(const std::vector<std::vector<double>>& rows) {
    SquareMatrix m(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i].size() != rows.size()) throw Error(Errc::DimensionMismatch, "matrix must be square");
      for (std::size_t j = 0; j < rows.size(); ++j) m(i, j) = rows[i][j];
    }
    return m;
  }

  static SquareMatrix identity(std::size_t n) {
    SquareMatrix m(n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  std::size_t size() const noexcept { return n_; }
  double& operator()(std::size_t i, std::size_t j) { return data_[i * n_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * n_ + j]; }
  std::span<const double> row(std::size_t i) const { return {data_.data() + i * n_, n_}; }

  std::vector<std::vector<double>> rows() const {
    std::vector<std::vector<double>> out(n_);
    for (std::size_t i = 0; i < n_; ++i) out[i].assign(row(i).begin(), row(i).end());
    return out;
  }

  /// Entries raised to the k-th power.
  SquareMatrix entrywise_power(std::size_t k) const {
    SquareMatrix out(n_);
    for (std::size_t i = 0; i < data_.size(); ++i) out.data_[i] = std::pow(data_[i], static_cast<double>(k));
    return out;
  }

  SquareMatrix scaled(double c) const {
    SquareMatrix out = *this;
    for (double& v : out.data_) v *= c;
    return out;
  }

 private:
  std::size_t n_ = 0;
  std::vector<double> data_;
};

// ---------------------------------------------------------------------------
// Support-graph structure
// ---------------------------------------------------------------------------

namespace detail {

inline std::vector<std::vector<std::size_t>> support_graph(const SquareMatrix& m) {
  std::vector<std::vector<std::size_t>> g(m.size());
  for (std::size_t i = 0; i < m.size(); ++i) {
    for (std::size_t j = 0; j < m.size(); ++j) {
      if (m(i, j) > 0.0) g[i].push_back(j);
    }
  }
  return g;
}

inline std::vector<std::size_t> reachable(const std::vector<std::vector<std::size_t>>& g, std::size_t from) {
  std::vector<std::size_t> level(g.size(), SIZE_MAX);
  std::vector<std::size_t> queue{from};
  level[from] = 0;
  for (std::size_t q = 0; q < queue.size(); ++q) {
    const std::size_t u = queue[q];
    for (std::size_t v : g[u]) {
      if (level[v] == SIZE_MAX) {
        level[v] = level[u] + 1;
        queue.push_back(v);
      }
    }
  }
  return level;
}

}  // namespace detail

/// Strong connectivity of the support graph.
inline bool is_irreducible(const SquareMatrix& m) {
  if (m.size() == 0) return false;
  auto g = detail::support_graph(m);
  for (std::size_t v : detail::reachable(g, 0)) {
    if (v == SIZE_MAX) return false;
  }
  std::vector<std::vector<std::size_t>> rev(g.size());
  for (std::size_t u = 0; u < g.size(); ++u) {
    for (std::size_t v : g[u]) rev[v].push_back(u);
  }
  for (std::size_t v : detail::reachable(rev, 0)) {
    if (v == SIZE_MAX) return false;
  }
  return true;
}

/// gcd of cycle lengths of an irreducible support graph (BFS level differences).
inline std::size_t period(const SquareMatrix& m) {
  const auto g = detail::support_graph(m);
  const auto level = detail::reachable(g, 0);
  std::size_t p = 0;
  for (std::size_t u = 0; u < g.size(); ++u) {
    if (level[u] == SIZE_MAX) continue;
    for (std::size_t v : g[u]) {
      const auto diff = static_cast<long long>(level[u]) + 1 - static_cast<long long>(level[v]);
      p = std::gcd(p, static_cast<std::size_t>(std::llabs(diff)));
    }
  }
  return p;
}

// ---------------------------------------------------------------------------
// Perron eigenvalue
// ---------------------------------------------------------------------------

struct PerronOptions {
  double relative_tolerance = 1e-12;
  std::size_t max_iterations = 100'000;
};

/// Dominant eigenvalue of a non-negative matrix. Power iteration on M + sI
/// (the shift makes an irreducible matrix primitive); converged once the
/// Collatz-Wielandt bounds min_i (Bv)_i/v_i <= rho <= max_i (Bv)_i/v_i agree.
inline double perron_eigenvalue(const SquareMatrix& m, const PerronOptions& opts = {}) {
  const std::size_t n = m.size();
  if (n == 0) throw Error(Errc::InvalidSpec, "empty matrix");
  double shift = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (m(i, j) < 0.0) throw Error(Errc::InvalidSpec, "matrix has negative entries");
      s += m(i, j);
    }
    shift = std::max(shift, s);
  }
  if (shift == 0.0) return 0.0;
  shift *= 0.5;

  std::vector<double> v(n, 1.0), w(n);
  for (std::size_t it = 0; it < opts.max_iterations; ++it) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = 0.0;
    double norm = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double s = shift * v[i];
      for (std::size_t j = 0; j < n; ++j) s += m(i, j) * v[j];
      w[i] = s;
      const double ratio = s / v[i];
      lo = std::min(lo, ratio);
      hi = std::max(hi, ratio);
      norm = std::max(norm, s);
    }
    if (hi - lo <= opts.relative_tolerance * hi) return 0.5 * (lo + hi) - shift;
    for (std::size_t i = 0; i < n; ++i) {
      v[i] = w[i] / norm;
      if (v[i] < 1e-300) v[i] = 1e-300;  // keep the Collatz-Wielandt ratios defined
    }
  }
  throw Error(Errc::NoConvergence, "power iteration did not converge in " +
                                       std::to_string(opts.max_iterations) + " iterations");
}

// ---------------------------------------------------------------------------
// Markov models
// ---------------------------------------------------------------------------

namespace detail {

inline void check_stochastic(const SquareMatrix& p) {
  if (p.size() < 2) throw Error(Errc::InvalidSpec, "alphabet must have at least 2 symbols");
  for (std::size_t i = 0; i < p.size(); ++i) {
    double s = 0.0;
    for (double v : p.row(i)) {
      if (!(v >= 0.0 && v <= 1.0)) throw Error(Errc::InvalidDistribution, "transition entries must lie in [0,1]");
      s += v;
    }
    if (std::abs(s - 1.0) > 1e-12) {
      throw Error(Errc::InvalidDistribution, "row " + std::to_string(i) + " sums to " + std::to_string(s));
    }
  }
}

// Solves pi (P - I) = 0 with the last equation replaced by sum(pi) = 1, by
// Gaussian elimination with partial pivoting.
inline std::vector<double> solve_stationary(const SquareMatrix& p) {
  const std::size_t n = p.size();
  std::vector<std::vector<double>> a(n, std::vector<double>(n + 1, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) a[i][j] = p(j, i) - (i == j ? 1.0 : 0.0);
  }
  for (std::size_t j = 0; j < n; ++j) a[n - 1][j] = 1.0;
  a[n - 1][n] = 1.0;
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < n; ++r) {
      if (std::abs(a[r][c]) > std::abs(a[piv][c])) piv = r;
    }
    if (std::abs(a[piv][c]) < 1e-300) throw Error(Errc::NotIrreducible, "singular stationary system");
    std::swap(a[c], a[piv]);
    for (std::size_t r = 0; r < n; ++r) {
      if (r == c || a[r][c] == 0.0) continue;
      const double f = a[r][c] / a[c][c];
      for (std::size_t k = c; k <= n; ++k) a[r][k] -= f * a[c][k];
    }
  }
  std::vector<double> pi(n);
  for (std::size_t i = 0; i < n; ++i) pi[i] = std::max(0.0, a[i][n] / a[i][i]);
  const double s = std::accumulate(pi.begin(), pi.end(), 0.0);
  for (double& v : pi) v /= s;
  return pi;
}

inline std::vector<double> power_stationary(const SquareMatrix& p) {
  // Lazy chain (P + I)/2 is aperiodic with the same stationary law.
  const std::size_t n = p.size();
  std::vector<double> pi(n, 1.0 / static_cast<double>(n)), next(n);
  for (std::size_t it = 0; it < 1'000'000; ++it) {
    std::fill(next.begin(), next.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) next[j] += pi[i] * 0.5 * (p(i, j) + (i == j ? 1.0 : 0.0));
    }
    double diff = 0.0;
    for (std::size_t i = 0; i < n; ++i) diff = std::max(diff, std::abs(next[i] - pi[i]));
    pi.swap(next);
    if (diff < 1e-15) return pi;
  }
  throw Error(Errc::NoConvergence, "stationary power iteration did not converge");
}

}  // namespace detail

/// pi with pi P = pi, sum pi = 1.
inline std::vector<double> stationary_distribution(const SquareMatrix& p) {
  detail::check_stochastic(p);
  if (!is_irreducible(p)) throw Error(Errc::NotIrreducible, "transition matrix is not irreducible");
  return p.size() <= 8 ? detail::solve_stationary(p) : detail::power_stationary(p);
}

/// A stochastic matrix with its cached stationary law and structure flags.
class MarkovModel {
 public:
  explicit MarkovModel(SquareMatrix p) : p_(std::move(p)) {
    detail::check_stochastic(p_);
    irreducible_ = is_irreducible(p_);
    aperiodic_ = irreducible_ && period(p_) == 1;
    if (irreducible_) pi_ = stationary_distribution(p_);
  }

  explicit MarkovModel(const std::vector<std::vector<double>>& rows)
      : MarkovModel(SquareMatrix::from_rows(rows)) {}

  /// i.i.d. source: every row equals p.
  static MarkovModel bernoulli(const std::vector<double>& p) {
    std::vector<std::vector<double>> rows(p.size(), p);
    return MarkovModel(rows);
  }

  static MarkovModel uniform(std::size_t alphabet) {
    return bernoulli(std::vector<double>(alphabet, 1.0 / static_cast<double>(alphabet)));
  }

  std::size_t alphabet_size() const noexcept { return p_.size(); }
  const SquareMatrix& matrix() const noexcept { return p_; }
  const std::vector<double>& stationary() const {
    if (!irreducible_) throw Error(Errc::NotIrreducible, "reducible chain has no unique stationary law");
    return pi_;
  }
  bool irreducible() const noexcept { return irreducible_; }
  bool aperiodic() const noexcept { return aperiodic_; }

  void require_ergodic() const {
    if (!irreducible_) throw Error(Errc::NotIrreducible, "Markov chain is not irreducible");
    if (!aperiodic_) throw Error(Errc::NotAperiodic, "Markov chain is periodic");
  }

 private:
  SquareMatrix p_;
  std::vector<double> pi_;
  bool irreducible_ = false;
  bool aperiodic_ = false;
};

/// Finite string over {0, ..., alphabet-1}.
class SymbolSequence {
 public:
  SymbolSequence(std::vector<std::uint8_t> symbols, std::size_t alphabet)
      : symbols_(std::move(symbols)), alphabet_(alphabet) {
    if (alphabet < 1 || alphabet > 256) throw Error(Errc::AlphabetMismatch, "alphabet size must be in [1,256]");
    for (auto s : symbols_) {
      if (s >= alphabet_) {
        throw Error(Errc::AlphabetMismatch, "symbol " + std::to_string(s) + " outside alphabet of size " +
                                                std::to_string(alphabet_));
      }
    }
  }

  /// "0110" -> {0,1,1,0}; letters map to digits.
  static SymbolSequence from_digits(std::string_view digits, std::size_t alphabet) {
    std::vector<std::uint8_t> s;
    s.reserve(digits.size());
    for (char c : digits) {
      if (c >= '0' && c <= '9') s.push_back(static_cast<std::uint8_t>(c - '0'));
      else if (c >= 'a' && c <= 'z') s.push_back(static_cast<std::uint8_t>(c - 'a'));
      else throw Error(Errc::AlphabetMismatch, std::string("unsupported symbol character '") + c + "'");
    }
    return SymbolSequence(std::move(s), alphabet);
  }

  std::size_t size() const noexcept { return symbols_.size(); }
  std::size_t alphabet_size() const noexcept { return alphabet_; }
  std::uint8_t operator[](std::size_t i) const { return symbols_[i]; }
  std::span<const std::uint8_t> symbols() const noexcept { return symbols_; }

  SymbolSequence prefix(std::size_t n) const {
    return SymbolSequence(std::vector<std::uint8_t>(symbols_.begin(), symbols_.begin() + static_cast<std::ptrdiff_t>(n)),
                          alphabet_);
  }

  friend bool operator==(const SymbolSequence&, const SymbolSequence&) = default;

 private:
  std::vector<std::uint8_t> symbols_;
  std::size_t alphabet_;
};

namespace detail {

inline std::size_t draw(std::span<const double> probs, Rng& rng) {
  const double u = rng.uniform();
  double acc = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    acc += probs[i];
    if (u < acc) return i;
  }
  // Rounding left u above the last partial sum: take the last positive entry.
  for (std::size_t i = probs.size(); i-- > 0;) {
    if (probs[i] > 0.0) return i;
  }
  return 0;
}

}  // namespace detail

/// Stationary chain: x_0 ~ pi, x_{t+1} ~ P[x_t, .].
inline SymbolSequence sample_markov(const MarkovModel& model, std::size_t n, Rng& rng) {
  model.require_ergodic();
  std::vector<std::uint8_t> out(n);
  if (n == 0) return SymbolSequence(std::move(out), model.alphabet_size());
  std::size_t x = detail::draw(model.stationary(), rng);
  out[0] = static_cast<std::uint8_t>(x);
  for (std::size_t t = 1; t < n; ++t) {
    x = detail::draw(model.matrix().row(x), rng);
    out[t] = static_cast<std::uint8_t>(x);
  }
  return SymbolSequence(std::move(out), model.alphabet_size());
}

// ---------------------------------------------------------------------------
// Renyi entropies
// ---------------------------------------------------------------------------

/// The matrix with entries P_ij^k whose Perron root gives H_k.
inline SquareMatrix powered_transition_matrix(const MarkovModel& model, std::size_t k) {
  return model.matrix().entrywise_power(k);
}

/// H_k = -log(lambda_k) / (k-1), lambda_k the Perron root of (P_ij^k).
inline double renyi_entropy_markov(const MarkovModel& model, std::size_t k) {
  if (k < 2) throw Error(Errc::KTooSmall, "Renyi order must be >= 2");
  model.require_ergodic();
  const double lambda = perron_eigenvalue(powered_transition_matrix(model, k));
  return -std::log(lambda) / static_cast<double>(k - 1);
}

/// Product-measure closed form -log(sum_i p_i^k) / (k-1).
inline double bernoulli_renyi(std::span<const double> p, std::size_t k) {
  if (k < 2) throw Error(Errc::KTooSmall, "Renyi order must be >= 2");
  if (p.empty()) throw Error(Errc::InvalidDistribution, "empty probability vector");
  double total = 0.0, power_sum = 0.0;
  for (double v : p) {
    if (!(v >= 0.0)) throw Error(Errc::InvalidDistribution, "negative probability");
    total += v;
    power_sum += std::pow(v, static_cast<double>(k));
  }
  if (std::abs(total - 1.0) > 1e-12) throw Error(Errc::InvalidDistribution, "probabilities do not sum to 1");
  return -std::log(power_sum) / static_cast<double>(k - 1);
}

/// Sliding-window counts of all length-l factors.
class CylinderTable {
 public:
  std::size_t length() const noexcept { return length_; }
  std::uint64_t total() const noexcept { return total_; }
  std::size_t distinct() const noexcept { return packed_.empty() ? words_.size() : packed_.size(); }

  /// Count of a given word (0 if absent).
  std::uint64_t count(std::span<const std::uint8_t> word) const {
    if (word.size() != length_) return 0;
    if (use_packed_) {
      auto it = packed_.find(pack(word));
      return it == packed_.end() ? 0 : it->second;
    }
    auto it = words_.find(std::string(word.begin(), word.end()));
    return it == words_.end() ? 0 : it->second;
  }

  /// All counts in increasing order (a deterministic summation order).
  std::vector<std::uint64_t> counts() const {
    std::vector<std::uint64_t> out;
    if (use_packed_) {
      for (const auto& [k, v] : packed_) out.push_back(v);
    } else {
      for (const auto& [k, v] : words_) out.push_back(v);
    }
    std::sort(out.begin(), out.end());
    return out;
  }

  /// Table with explicit counts (for exact-distribution checks).
  static CylinderTable from_counts(std::size_t length, std::span<const std::uint64_t> counts) {
    CylinderTable t;
    t.length_ = length;
    t.use_packed_ = true;
    t.bits_ = 64;
    std::uint64_t key = 0;
    for (auto c : counts) {
      if (c == 0) continue;
      t.packed_[key++] = c;
      t.total_ += c;
    }
    return t;
  }

  friend CylinderTable cylinder_counts(const SymbolSequence& seq, std::size_t length);

 private:
  std::uint64_t pack(std::span<const std::uint8_t> word) const {
    std::uint64_t key = 0;
    for (auto s : word) key = (key << bits_) | s;
    return key;
  }

  std::size_t length_ = 0;
  std::uint64_t total_ = 0;
  bool use_packed_ = true;
  unsigned bits_ = 1;
  std::unordered_map<std::uint64_t, std::uint64_t> packed_;
  std::map<std::string, std::uint64_t> words_;
};

inline CylinderTable cylinder_counts(const SymbolSequence& seq, std::size_t length) {
  if (length == 0) throw Error(Errc::CylinderTooLong, "cylinder length must be >= 1");
  if (length > seq.size()) {
    throw Error(Errc::CylinderTooLong, "cylinder length " + std::to_string(length) + " exceeds sequence length " +
                                           std::to_string(seq.size()));
  }
  CylinderTable t;
  t.length_ = length;
  t.bits_ = std::max(1U, static_cast<unsigned>(std::bit_width(seq.alphabet_size() - 1)));
  t.use_packed_ = length * t.bits_ <= 64;
  const auto s = seq.symbols();
  const std::size_t windows = seq.size() - length + 1;
  t.total_ = windows;
  if (t.use_packed_) {
    const std::uint64_t mask = length * t.bits_ == 64 ? ~std::uint64_t{0}
                                                      : (std::uint64_t{1} << (length * t.bits_)) - 1;
    std::uint64_t key = 0;
    t.packed_.reserve(std::min<std::size_t>(windows, 1 << 20));
    for (std::size_t i = 0; i < seq.size(); ++i) {
      key = ((key << t.bits_) | s[i]) & mask;
      if (i + 1 >= length) ++t.packed_[key];
    }
  } else {
    for (std::size_t i = 0; i < windows; ++i) {
      ++t.words_[std::string(s.begin() + static_cast<std::ptrdiff_t>(i),
                             s.begin() + static_cast<std::ptrdiff_t>(i + length))];
    }
  }
  return t;
}

/// -log(sum_C (count_C / total)^k) / ((k-1) l).
inline double empirical_renyi(const CylinderTable& table, std::size_t k) {
  if (k < 2) throw Error(Errc::KTooSmall, "Renyi order must be >= 2");
  if (table.total() == 0) throw Error(Errc::EmptyTable, "cylinder table is empty");
  const double total = static_cast<double>(table.total());
  double s = 0.0;
  for (auto c : table.counts()) s += std::pow(static_cast<double>(c) / total, static_cast<double>(k));
  return -std::log(s) / (static_cast<double>(k - 1) * static_cast<double>(table.length()));
}

}  // namespace orbitmatch::symbolic
