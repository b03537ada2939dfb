#pragma once

// Longest common substring M_n among k sequences, encoded variants M_n^f, and
// the stochastic-scrabble score V_n with its limit constant.

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <variant>
#include <vector>

#include "orbitmatch/core.hpp"
#include "orbitmatch/symbolic.hpp"

namespace orbitmatch::matching {

using symbolic::MarkovModel;
using symbolic::SquareMatrix;
using symbolic::SymbolSequence;

/// Length of a common word and its first start in each sequence.
struct LcsMatch {
  std::size_t length = 0;
  std::vector<std::size_t> starts;
};

namespace detail {

inline void check_sequences(std::span<const SymbolSequence> seqs, std::size_t n) {
  if (seqs.size() < 2) throw Error(Errc::KTooSmall, "need at least two sequences");
  for (const auto& s : seqs) {
    if (s.size() < n) {
      throw Error(Errc::NTooLarge, "n = " + std::to_string(n) + " exceeds sequence length " +
                                       std::to_string(s.size()));
    }
  }
}

inline std::size_t common_prefix(std::span<const SymbolSequence> seqs, const std::vector<std::size_t>& at,
                                 std::size_t limit) {
  std::size_t len = 0;
  for (; len < limit; ++len) {
    const auto c = seqs[0][at[0] + len];
    for (std::size_t l = 1; l < seqs.size(); ++l) {
      if (seqs[l][at[l] + len] != c) return len;
    }
  }
  return len;
}

}  // namespace detail

/// Enumerates every start tuple (i_1..i_k) in [0,n)^k and keeps the best
/// min(common prefix, n - max_l i_l).
inline LcsMatch lcs_k_bruteforce_match(std::span<const SymbolSequence> seqs, std::size_t n) {
  detail::check_sequences(seqs, n);
  const std::size_t k = seqs.size();
  LcsMatch best;
  best.starts.assign(k, 0);
  if (n == 0) return best;
  std::vector<std::size_t> at(k, 0);
  for (;;) {
    const std::size_t furthest = *std::max_element(at.begin(), at.end());
    const std::size_t limit = n - furthest;
    if (limit > best.length) {
      const std::size_t len = detail::common_prefix(seqs, at, limit);
      if (len > best.length) {
        best.length = len;
        best.starts = at;
      }
    }
    std::size_t j = k;
    while (j-- > 0) {
      if (++at[j] < n) break;
      at[j] = 0;
    }
    if (j == SIZE_MAX) break;
  }
  return best;
}

inline std::size_t lcs_k_bruteforce(std::span<const SymbolSequence> seqs, std::size_t n) {
  return lcs_k_bruteforce_match(seqs, n).length;
}

// ---------------------------------------------------------------------------
// Fingerprint search
// ---------------------------------------------------------------------------

/// Two polynomial fingerprints over independent prime moduli.
struct FingerprintParams {
  std::uint64_t modulus1 = (std::uint64_t{1} << 61) - 1;
  std::uint64_t base1 = 0x2545f4914f6cdd1dULL % ((std::uint64_t{1} << 61) - 1);
  std::uint64_t modulus2 = 2147483647ULL;
  std::uint64_t base2 = 1103515245ULL;
};

namespace detail {

inline std::uint64_t mulmod(std::uint64_t a, std::uint64_t b, std::uint64_t m) {
  return static_cast<std::uint64_t>(static_cast<unsigned __int128>(a) * b % m);
}

// Per-sequence prefix fingerprints; window (i, m) hashes in O(1).
class Fingerprints {
 public:
  Fingerprints(std::span<const std::uint8_t> s, std::size_t n, const FingerprintParams& fp)
      : fp_(fp), h1_(n + 1, 0), h2_(n + 1, 0) {
    for (std::size_t i = 0; i < n; ++i) {
      h1_[i + 1] = (mulmod(h1_[i], fp.base1, fp.modulus1) + s[i] + 1) % fp.modulus1;
      h2_[i + 1] = (mulmod(h2_[i], fp.base2, fp.modulus2) + s[i] + 1) % fp.modulus2;
    }
  }

  std::pair<std::uint64_t, std::uint64_t> window(std::size_t i, std::size_t m, std::uint64_t pow1,
                                                 std::uint64_t pow2) const {
    const std::uint64_t a = (h1_[i + m] + fp_.modulus1 - mulmod(h1_[i], pow1, fp_.modulus1)) % fp_.modulus1;
    const std::uint64_t b = (h2_[i + m] + fp_.modulus2 - mulmod(h2_[i], pow2, fp_.modulus2)) % fp_.modulus2;
    return {a, b};
  }

 private:
  FingerprintParams fp_;
  std::vector<std::uint64_t> h1_, h2_;
};

inline std::uint64_t powmod(std::uint64_t b, std::size_t e, std::uint64_t m) {
  std::uint64_t r = 1 % m;
  b %= m;
  while (e) {
    if (e & 1U) r = mulmod(r, b, m);
    b = mulmod(b, b, m);
    e >>= 1;
  }
  return r;
}

// Finds words of a fixed length m that occur in every sequence l with a start
// in [0, limit_l - m]. Fingerprint hits are always confirmed symbol by symbol;
// a hit that fails confirmation means two different words shared a
// fingerprint, and the length is then re-solved with exact word sets.
class CommonWordFinder {
 public:
  CommonWordFinder(std::span<const SymbolSequence> seqs, std::vector<std::size_t> limits,
                   const FingerprintParams& fp = {})
      : seqs_(seqs), limits_(std::move(limits)), fp_(fp) {
    prints_.reserve(seqs.size());
    for (std::size_t l = 0; l < seqs.size(); ++l) prints_.emplace_back(seqs[l].symbols(), limits_[l], fp);
  }

  /// Any confirmed common word of length m.
  std::optional<LcsMatch> any(std::size_t m) {
    if (m == 0) return LcsMatch{0, std::vector<std::size_t>(seqs_.size(), 0)};
    std::vector<LcsMatch> found;
    search(m, /*collect_all=*/false, found);
    if (found.empty()) return std::nullopt;
    return found.front();
  }

  /// Every distinct common word of length m (first start in each sequence).
  std::vector<LcsMatch> all(std::size_t m) {
    std::vector<LcsMatch> found;
    if (m == 0) return found;
    search(m, /*collect_all=*/true, found);
    return found;
  }

  std::size_t fallbacks() const noexcept { return fallbacks_; }

  std::span<const std::uint8_t> word(const LcsMatch& w) const {
    return seqs_[0].symbols().subspan(w.starts[0], w.length);
  }

 private:
  struct Slot {
    std::uint64_t key1 = 0;
    std::uint64_t key2 = 0;
    std::uint32_t generation = 0;
    std::uint32_t stage = 0;
  };

  bool same(std::size_t l, std::size_t pos_l, std::size_t pos0, std::size_t m) const {
    return std::memcmp(seqs_[l].symbols().data() + pos_l, seqs_[0].symbols().data() + pos0, m) == 0;
  }

  std::size_t last_start(std::size_t l, std::size_t m) const {
    return limits_[l] >= m ? limits_[l] - m + 1 : 0;  // number of admissible starts
  }

  void search(std::size_t m, bool collect_all, std::vector<LcsMatch>& found) {
    const std::size_t k = seqs_.size();
    for (std::size_t l = 0; l < k; ++l) {
      if (last_start(l, m) == 0) return;
    }
    const std::uint64_t pow1 = powmod(fp_.base1, m, fp_.modulus1);
    const std::uint64_t pow2 = powmod(fp_.base2, m, fp_.modulus2);
    const std::size_t starts0 = last_start(0, m);
    std::size_t cap = 16;
    while (cap < 2 * starts0) cap <<= 1;
    if (slots_.size() != cap) {
      slots_.assign(cap, Slot{});
      generation_ = 0;
    }
    if (++generation_ == 0) {
      std::fill(slots_.begin(), slots_.end(), Slot{});
      generation_ = 1;
    }
    positions_.resize(cap * k);
    const std::size_t mask = cap - 1;
    auto probe = [&](std::uint64_t a, std::uint64_t b) {
      std::size_t h = static_cast<std::size_t>((a ^ (b * 0x9e3779b97f4a7c15ULL)) * 0xff51afd7ed558ccdULL >> 17) & mask;
      while (slots_[h].generation == generation_ && (slots_[h].key1 != a || slots_[h].key2 != b)) h = (h + 1) & mask;
      return h;
    };

    for (std::size_t i = 0; i < starts0; ++i) {
      const auto [a, b] = prints_[0].window(i, m, pow1, pow2);
      const std::size_t h = probe(a, b);
      if (slots_[h].generation != generation_) {
        slots_[h] = Slot{a, b, generation_, 0};
        positions_[h * k] = static_cast<std::uint32_t>(i);
      }
    }
    bool collision = false;
    for (std::size_t l = 1; l < k; ++l) {
      const std::size_t starts = last_start(l, m);
      for (std::size_t i = 0; i < starts; ++i) {
        const auto [a, b] = prints_[l].window(i, m, pow1, pow2);
        const std::size_t h = probe(a, b);
        Slot& s = slots_[h];
        if (s.generation != generation_ || s.stage != l - 1) continue;
        s.stage = static_cast<std::uint32_t>(l);
        positions_[h * k + l] = static_cast<std::uint32_t>(i);
        if (l + 1 == k && !collect_all) {
          if (confirm(h, m)) {
            found.push_back(match_at(h, m));
            return;
          }
          collision = true;
        }
      }
    }
    if (collect_all) {
      for (std::size_t h = 0; h < cap; ++h) {
        if (slots_[h].generation != generation_ || slots_[h].stage != k - 1) continue;
        if (confirm(h, m)) {
          found.push_back(match_at(h, m));
        } else {
          collision = true;
        }
      }
    }
    if (collision) {
      ++fallbacks_;
      found = exact(m, collect_all);
    }
  }

  bool confirm(std::size_t h, std::size_t m) const {
    const std::size_t k = seqs_.size();
    for (std::size_t l = 1; l < k; ++l) {
      if (!same(l, positions_[h * k + l], positions_[h * k], m)) return false;
    }
    return true;
  }

  LcsMatch match_at(std::size_t h, std::size_t m) const {
    LcsMatch w{m, std::vector<std::size_t>(seqs_.size())};
    for (std::size_t l = 0; l < seqs_.size(); ++l) w.starts[l] = positions_[h * seqs_.size() + l];
    return w;
  }

  // Collision path: hash the words themselves.
  std::vector<LcsMatch> exact(std::size_t m, bool collect_all) const {
    auto view = [&](std::size_t l, std::size_t i) {
      return std::string_view(reinterpret_cast<const char*>(seqs_[l].symbols().data()) + i, m);
    };
    std::unordered_map<std::string_view, LcsMatch> common;
    for (std::size_t i = 0; i < last_start(0, m); ++i) {
      auto [it, fresh] = common.try_emplace(view(0, i), LcsMatch{m, std::vector<std::size_t>(seqs_.size(), SIZE_MAX)});
      if (fresh) it->second.starts[0] = i;
    }
    for (std::size_t l = 1; l < seqs_.size(); ++l) {
      for (std::size_t i = 0; i < last_start(l, m); ++i) {
        auto it = common.find(view(l, i));
        if (it != common.end() && it->second.starts[l] == SIZE_MAX) it->second.starts[l] = i;
      }
      std::erase_if(common, [&](const auto& kv) { return kv.second.starts[l] == SIZE_MAX; });
    }
    std::vector<LcsMatch> out;
    for (auto& [w, match] : common) {
      out.push_back(match);
      if (!collect_all) break;
    }
    return out;
  }

  std::span<const SymbolSequence> seqs_;
  std::vector<std::size_t> limits_;
  FingerprintParams fp_;
  std::vector<Fingerprints> prints_;
  std::vector<Slot> slots_;
  std::vector<std::uint32_t> positions_;
  std::uint32_t generation_ = 0;
  std::size_t fallbacks_ = 0;
};

// Largest feasible length by galloping up from a known-feasible length, then
// bisecting. Feasibility is monotone: a prefix of an admissible common word of
// length m is an admissible common word of length m-1.
template <typename Feasible>
std::size_t largest_feasible(std::size_t known, std::size_t upper, Feasible&& feasible) {
  std::size_t lo = known;
  std::size_t bad = upper + 1;
  std::size_t step = 1;
  while (lo + step <= upper) {
    if (feasible(lo + step)) {
      lo += step;
      step *= 2;
    } else {
      bad = lo + step;
      break;
    }
  }
  while (bad - lo > 1) {
    const std::size_t mid = lo + (bad - lo) / 2;
    if (feasible(mid)) lo = mid;
    else bad = mid;
  }
  return lo;
}

inline bool lex_less(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b) {
  return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
}

}  // namespace detail

struct LcsOptions {
  /// A length known to be feasible (e.g. M at a shorter n).
  std::size_t known_feasible = 0;
  FingerprintParams fingerprints{};
};

/// Same value as lcs_k_bruteforce. The witness is the lexicographically
/// smallest optimal word at its first admissible start in each sequence.
inline LcsMatch lcs_k_fast_match(std::span<const SymbolSequence> seqs, std::size_t n, const LcsOptions& opts = {}) {
  detail::check_sequences(seqs, n);
  if (opts.known_feasible > n) throw Error(Errc::InvalidSpec, "known feasible length exceeds n");
  detail::CommonWordFinder finder(seqs, std::vector<std::size_t>(seqs.size(), n), opts.fingerprints);
  const std::size_t best =
      detail::largest_feasible(opts.known_feasible, n, [&](std::size_t m) { return finder.any(m).has_value(); });
  if (best == 0) return LcsMatch{0, std::vector<std::size_t>(seqs.size(), 0)};
  auto words = finder.all(best);
  if (words.empty()) throw Error(Errc::NoConvergence, "optimal length lost its witness");
  auto it = std::min_element(words.begin(), words.end(), [&](const LcsMatch& a, const LcsMatch& b) {
    return detail::lex_less(finder.word(a), finder.word(b));
  });
  // Re-check the witness against the raw sequences.
  for (std::size_t l = 1; l < seqs.size(); ++l) {
    if (!std::equal(seqs[l].symbols().begin() + static_cast<std::ptrdiff_t>(it->starts[l]),
                    seqs[l].symbols().begin() + static_cast<std::ptrdiff_t>(it->starts[l] + best),
                    seqs[0].symbols().begin() + static_cast<std::ptrdiff_t>(it->starts[0]))) {
      throw Error(Errc::NoConvergence, "witness failed verification");
    }
  }
  return *it;
}

inline std::size_t lcs_k_fast(std::span<const SymbolSequence> seqs, std::size_t n, const LcsOptions& opts = {}) {
  detail::check_sequences(seqs, n);
  detail::CommonWordFinder finder(seqs, std::vector<std::size_t>(seqs.size(), n), opts.fingerprints);
  return detail::largest_feasible(opts.known_feasible, n, [&](std::size_t m) { return finder.any(m).has_value(); });
}

// ---------------------------------------------------------------------------
// Encoders
// ---------------------------------------------------------------------------

struct IdentityEncoder {};

/// Each letter a becomes a repeated v(a) times.
struct LetterRepetition {
  std::vector<std::size_t> weights;
};

/// Each letter a becomes words[a] over an output alphabet.
struct BlockSubstitution {
  std::vector<std::vector<std::uint8_t>> words;
  std::size_t output_alphabet = 2;
};

struct EncoderSpec {
  using Variant = std::variant<IdentityEncoder, LetterRepetition, BlockSubstitution>;
  Variant variant;

  EncoderSpec() : variant(IdentityEncoder{}) {}
  template <typename T>
    requires std::is_constructible_v<Variant, T&&> && (!std::is_same_v<std::remove_cvref_t<T>, EncoderSpec>)
  EncoderSpec(T&& v) : variant(std::forward<T>(v)) {}

  template <typename T>
  bool is() const { return std::holds_alternative<T>(variant); }
  template <typename T>
  const T& as() const { return std::get<T>(variant); }
};

inline void validate(const EncoderSpec& enc, std::size_t alphabet) {
  if (enc.is<LetterRepetition>()) {
    const auto& w = enc.as<LetterRepetition>().weights;
    if (w.size() != alphabet) throw Error(Errc::AlphabetMismatch, "need one weight per letter");
    for (auto v : w) {
      if (v < 1) throw Error(Errc::InvalidSpec, "repetition weights must be >= 1");
    }
  } else if (enc.is<BlockSubstitution>()) {
    const auto& b = enc.as<BlockSubstitution>();
    if (b.words.size() != alphabet) throw Error(Errc::AlphabetMismatch, "need one word per letter");
    for (const auto& w : b.words) {
      if (w.empty()) throw Error(Errc::InvalidSpec, "substitution words must be non-empty");
      for (auto s : w) {
        if (s >= b.output_alphabet) throw Error(Errc::AlphabetMismatch, "substitution symbol outside output alphabet");
      }
    }
  }
}

/// Longest image of a single letter, so an encoded prefix of n letters has
/// length at most n times this (the growth bound h(n)).
inline std::size_t expansion_bound(const EncoderSpec& enc) {
  if (enc.is<LetterRepetition>()) {
    const auto& w = enc.as<LetterRepetition>().weights;
    return w.empty() ? 1 : *std::max_element(w.begin(), w.end());
  }
  if (enc.is<BlockSubstitution>()) {
    std::size_t m = 1;
    for (const auto& w : enc.as<BlockSubstitution>().words) m = std::max(m, w.size());
    return m;
  }
  return 1;
}

/// f(seq), truncated once it reaches max_length symbols.
inline SymbolSequence apply_encoder(const EncoderSpec& enc, const SymbolSequence& seq,
                                    std::size_t max_length = SIZE_MAX) {
  validate(enc, seq.alphabet_size());
  if (enc.is<IdentityEncoder>()) {
    return max_length >= seq.size() ? seq : seq.prefix(max_length);
  }
  std::vector<std::uint8_t> out;
  std::size_t alphabet = seq.alphabet_size();
  if (enc.is<LetterRepetition>()) {
    const auto& w = enc.as<LetterRepetition>().weights;
    for (std::size_t i = 0; i < seq.size() && out.size() < max_length; ++i) out.insert(out.end(), w[seq[i]], seq[i]);
  } else {
    const auto& b = enc.as<BlockSubstitution>();
    alphabet = b.output_alphabet;
    for (std::size_t i = 0; i < seq.size() && out.size() < max_length; ++i) {
      const auto& word = b.words[seq[i]];
      out.insert(out.end(), word.begin(), word.end());
    }
  }
  if (out.size() > max_length) out.resize(max_length);
  return SymbolSequence(std::move(out), alphabet);
}

/// M_n^f: M_n of the encoded sequences, i.e. over the first n encoded symbols.
inline std::size_t lcs_encoded(const EncoderSpec& enc, std::span<const SymbolSequence> seqs, std::size_t n,
                               const LcsOptions& opts = {}) {
  if (seqs.size() < 2) throw Error(Errc::KTooSmall, "need at least two sequences");
  std::vector<SymbolSequence> encoded;
  encoded.reserve(seqs.size());
  for (const auto& s : seqs) {
    encoded.push_back(apply_encoder(enc, s, n));
    if (encoded.back().size() < n) {
      throw Error(Errc::EncodedTooShort, "encoded sequence has " + std::to_string(encoded.back().size()) +
                                             " symbols, need " + std::to_string(n));
    }
  }
  return lcs_k_fast(encoded, n, opts);
}

// ---------------------------------------------------------------------------
// Stochastic scrabble
// ---------------------------------------------------------------------------

/// Which index range the start constraint refers to. Original: starts
/// i <= n - m in the letter sequences. Encoded: the repetition-encoded
/// occurrence of the word must end within the first n encoded symbols.
enum class WindowConvention { Original, Encoded };

namespace detail {

inline void check_weights(std::span<const std::size_t> weights, std::size_t alphabet) {
  if (weights.size() != alphabet) throw Error(Errc::AlphabetMismatch, "need one weight per letter");
  for (auto v : weights) {
    if (v < 1) throw Error(Errc::InvalidSpec, "weights must be positive integers");
  }
}

// Number of whole letters whose encoding fits in the first n encoded symbols.
inline std::size_t letters_within(const SymbolSequence& s, std::span<const std::size_t> weights, std::size_t n) {
  std::size_t used = 0, t = 0;
  while (t < s.size() && used + weights[s[t]] <= n) used += weights[s[t++]];
  return t;
}

}  // namespace detail

/// True when the first n encoded symbols end exactly at a letter boundary.
inline bool encoded_prefix_on_boundary(const SymbolSequence& s, std::span<const std::size_t> weights, std::size_t n) {
  std::size_t used = 0;
  for (std::size_t t = 0; t < s.size() && used < n; ++t) used += weights[s[t]];
  return used == n;
}

struct ScrabbleMatch {
  std::uint64_t score = 0;
  std::size_t length = 0;
  std::vector<std::size_t> starts;
};

/// Highest score V(z) = sum_j v(z_j) over common words z with admissible starts.
/// Scans word lengths downward from the longest admissible common word and
/// stops once no shorter word can beat the best score.
inline ScrabbleMatch scrabble_Vn_match(std::span<const SymbolSequence> seqs, std::span<const std::size_t> weights,
                                       std::size_t n, WindowConvention convention = WindowConvention::Original,
                                       const FingerprintParams& fp = {}) {
  if (seqs.size() < 2) throw Error(Errc::KTooSmall, "need at least two sequences");
  detail::check_weights(weights, seqs[0].alphabet_size());
  std::vector<std::size_t> limits;
  for (const auto& s : seqs) {
    if (s.alphabet_size() != seqs[0].alphabet_size()) throw Error(Errc::AlphabetMismatch, "alphabets differ");
    if (convention == WindowConvention::Original) {
      if (s.size() < n) throw Error(Errc::NTooLarge, "n exceeds sequence length");
      limits.push_back(n);
    } else {
      std::size_t total = 0;
      for (auto c : s.symbols()) total += weights[c];
      if (total < n) throw Error(Errc::EncodedTooShort, "sequence too short for n encoded symbols");
      limits.push_back(detail::letters_within(s, weights, n));
    }
  }
  const std::size_t upper = *std::min_element(limits.begin(), limits.end());
  detail::CommonWordFinder finder(seqs, limits, fp);
  const std::size_t longest =
      detail::largest_feasible(0, upper, [&](std::size_t m) { return finder.any(m).has_value(); });
  const std::size_t vmax = *std::max_element(weights.begin(), weights.end());

  std::vector<std::uint64_t> prefix(seqs[0].size() + 1, 0);
  for (std::size_t i = 0; i < seqs[0].size(); ++i) prefix[i + 1] = prefix[i] + weights[seqs[0][i]];

  ScrabbleMatch best{0, 0, std::vector<std::size_t>(seqs.size(), 0)};
  for (std::size_t m = longest; m >= 1; --m) {
    if (m * vmax <= best.score) break;
    for (const LcsMatch& w : finder.all(m)) {
      const std::uint64_t score = prefix[w.starts[0] + m] - prefix[w.starts[0]];
      if (score > best.score ||
          (score == best.score && (m > best.length || (m == best.length && w.starts < best.starts)))) {
        best = {score, m, w.starts};
      }
    }
  }
  return best;
}

inline std::uint64_t scrabble_Vn(std::span<const SymbolSequence> seqs, std::span<const std::size_t> weights,
                                 std::size_t n, WindowConvention convention = WindowConvention::Original) {
  return scrabble_Vn_match(seqs, weights, n, convention).score;
}

/// Markov source plus letter weights, with the expanded chain that walks
/// through v(i) sub-states per letter.
class ScrabbleSpec {
 public:
  ScrabbleSpec(MarkovModel model, std::vector<std::size_t> weights)
      : model_(std::move(model)), weights_(std::move(weights)) {
    detail::check_weights(weights_, model_.alphabet_size());
    std::size_t g = 0;
    for (auto v : weights_) g = std::gcd(g, v);
    if (g != 1) throw Error(Errc::GcdNotOne, "gcd of weights is " + std::to_string(g));
  }

  const MarkovModel& model() const noexcept { return model_; }
  const std::vector<std::size_t>& weights() const noexcept { return weights_; }

  /// S x S matrix, S = sum v(i): sub-state i_l -> i_{l+1} with probability 1,
  /// last sub-state i_{v(i)} -> first sub-state j_1 with probability p_ij.
  SquareMatrix expanded_matrix() const {
    const std::size_t a = weights_.size();
    std::vector<std::size_t> offset(a + 1, 0);
    for (std::size_t i = 0; i < a; ++i) offset[i + 1] = offset[i] + weights_[i];
    SquareMatrix q(offset[a]);
    for (std::size_t i = 0; i < a; ++i) {
      for (std::size_t l = 0; l + 1 < weights_[i]; ++l) q(offset[i] + l, offset[i] + l + 1) = 1.0;
      const std::size_t last = offset[i] + weights_[i] - 1;
      for (std::size_t j = 0; j < a; ++j) q(last, offset[j]) = model_.matrix()(i, j);
    }
    return q;
  }

 private:
  MarkovModel model_;
  std::vector<std::size_t> weights_;
};

/// Perron root q of the expanded matrix with entries raised to the k-th power.
inline double scrabble_eigenvalue(const ScrabbleSpec& spec, std::size_t k) {
  if (k < 2) throw Error(Errc::KTooSmall, "k must be >= 2");
  spec.model().require_ergodic();
  return symbolic::perron_eigenvalue(spec.expanded_matrix().entrywise_power(k));
}

/// lim V_n / log n = k / (-log q).
inline double scrabble_limit_constant(const ScrabbleSpec& spec, std::size_t k) {
  return static_cast<double>(k) / -std::log(scrabble_eigenvalue(spec, k));
}

/// lim M_n / log n = k / (-log lambda_k) = k / ((k-1) H_k).
inline double lcs_limit_constant(const MarkovModel& model, std::size_t k) {
  if (k < 2) throw Error(Errc::KTooSmall, "k must be >= 2");
  model.require_ergodic();
  const double lambda = symbolic::perron_eigenvalue(symbolic::powered_transition_matrix(model, k));
  return static_cast<double>(k) / -std::log(lambda);
}

// ---------------------------------------------------------------------------
// Byte files
// ---------------------------------------------------------------------------

/// One symbol per byte; every byte must be below the alphabet size.
inline SymbolSequence read_symbol_file(const std::string& path, std::size_t alphabet) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoError, "cannot open " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return SymbolSequence(std::move(bytes), alphabet);
}

inline void write_symbol_file(const std::string& path, const SymbolSequence& seq) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::IoError, "cannot write " + path);
  out.write(reinterpret_cast<const char*>(seq.symbols().data()), static_cast<std::streamsize>(seq.size()));
}

}  // namespace orbitmatch::matching
