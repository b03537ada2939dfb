#pragma once

// Shared vocabulary: error type, seeded generator, points and flat point arrays.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace orbitmatch {

enum class Errc {
  InvalidSpec,
  InvalidPoint,
  DimensionMismatch,
  GaussAtZero,
  SelectorGap,
  UnsupportedMap,
  KTooSmall,
  NTooLarge,
  TooFewPoints,
  NoUsableRadii,
  NotIrreducible,
  NotAperiodic,
  NoConvergence,
  InvalidDistribution,
  CylinderTooLong,
  EmptyTable,
  AlphabetMismatch,
  EncodedTooShort,
  GcdNotOne,
  ConfigInvalid,
  IoError,
};

inline std::string_view errc_name(Errc e) {
  switch (e) {
    case Errc::InvalidSpec: return "InvalidSpec";
    case Errc::InvalidPoint: return "InvalidPoint";
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::GaussAtZero: return "GaussAtZero";
    case Errc::SelectorGap: return "SelectorGap";
    case Errc::UnsupportedMap: return "UnsupportedMap";
    case Errc::KTooSmall: return "KTooSmall";
    case Errc::NTooLarge: return "NTooLarge";
    case Errc::TooFewPoints: return "TooFewPoints";
    case Errc::NoUsableRadii: return "NoUsableRadii";
    case Errc::NotIrreducible: return "NotIrreducible";
    case Errc::NotAperiodic: return "NotAperiodic";
    case Errc::NoConvergence: return "NoConvergence";
    case Errc::InvalidDistribution: return "InvalidDistribution";
    case Errc::CylinderTooLong: return "CylinderTooLong";
    case Errc::EmptyTable: return "EmptyTable";
    case Errc::AlphabetMismatch: return "AlphabetMismatch";
    case Errc::EncodedTooShort: return "EncodedTooShort";
    case Errc::GcdNotOne: return "GcdNotOne";
    case Errc::ConfigInvalid: return "ConfigInvalid";
    case Errc::IoError: return "IoError";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code), message_(what) {}

  Errc code() const noexcept { return code_; }
  /// The description without the error-code prefix.
  const std::string& message() const noexcept { return message_; }

 private:
  Errc code_;
  std::string message_;
};

// ---------------------------------------------------------------------------
// Random numbers
// ---------------------------------------------------------------------------

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Mixes a master seed, a replica index and a textual tag into one 64-bit seed.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t replica,
                                 std::string_view tag = {}) {
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a over the tag
  for (unsigned char c : tag) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  std::uint64_t s = master;
  std::uint64_t out = splitmix64(s);
  s ^= replica + 0x632be59bd9b4e019ULL;
  out ^= splitmix64(s);
  s ^= h;
  out ^= splitmix64(s);
  return out;
}

/// Seeded generator. Wraps mt19937_64 (whose output sequence is fixed by the
/// standard) and does its own conversions so draws are identical on every
/// standard library.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1p-53; }

  /// Uniform integer in [0, bound). Lemire's multiply-shift with rejection.
  std::uint64_t below(std::uint64_t bound) {
    if (bound <= 1) return 0;
    unsigned __int128 m = static_cast<unsigned __int128>(engine_()) * bound;
    auto low = static_cast<std::uint64_t>(m);
    if (low < bound) {
      const std::uint64_t threshold = (0 - bound) % bound;
      while (low < threshold) {
        m = static_cast<unsigned __int128>(engine_()) * bound;
        low = static_cast<std::uint64_t>(m);
      }
    }
    return static_cast<std::uint64_t>(m >> 64);
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

// ---------------------------------------------------------------------------
// Points
// ---------------------------------------------------------------------------

/// A state in [0,1)^N.
class Point {
 public:
  explicit Point(std::vector<double> coords) : coords_(std::move(coords)) { validate(); }
  explicit Point(double x) : coords_{x} { validate(); }
  Point(std::initializer_list<double> coords) : coords_(coords) { validate(); }

  std::size_t dim() const noexcept { return coords_.size(); }
  double operator[](std::size_t i) const { return coords_[i]; }
  std::span<const double> coords() const noexcept { return coords_; }

  friend bool operator==(const Point&, const Point&) = default;

 private:
  void validate() const {
    if (coords_.empty()) throw Error(Errc::InvalidPoint, "point must have at least one coordinate");
    for (double c : coords_) {
      if (!(c >= 0.0 && c < 1.0)) {
        throw Error(Errc::InvalidPoint, "coordinate " + std::to_string(c) + " outside [0,1)");
      }
    }
  }

  std::vector<double> coords_;
};

/// Contiguous storage for a sequence of same-dimension points (orbits, samples).
class PointArray {
 public:
  PointArray() = default;
  explicit PointArray(std::size_t dim) : dim_(dim) {
    if (dim == 0) throw Error(Errc::DimensionMismatch, "dimension must be positive");
  }
  PointArray(std::size_t dim, std::vector<double> flat) : dim_(dim), data_(std::move(flat)) {
    if (dim == 0 || data_.size() % dim != 0) {
      throw Error(Errc::DimensionMismatch, "flat coordinate count is not a multiple of dim");
    }
    check_range();
  }

  static PointArray from_points(std::span<const Point> pts) {
    if (pts.empty()) throw Error(Errc::TooFewPoints, "empty point list");
    PointArray out(pts.front().dim());
    out.reserve(pts.size());
    for (const Point& p : pts) out.push_back(p);
    return out;
  }

  /// 1-D convenience.
  static PointArray from_values(std::span<const double> xs) {
    PointArray out(1);
    out.data_.assign(xs.begin(), xs.end());
    out.check_range();
    return out;
  }

  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return dim_ == 0 ? 0 : data_.size() / dim_; }
  bool empty() const noexcept { return data_.empty(); }

  std::span<const double> operator[](std::size_t i) const {
    return {data_.data() + i * dim_, dim_};
  }
  Point point(std::size_t i) const {
    auto c = (*this)[i];
    return Point(std::vector<double>(c.begin(), c.end()));
  }

  void reserve(std::size_t n) { data_.reserve(n * dim_); }
  void push_back(std::span<const double> c) {
    if (c.size() != dim_) throw Error(Errc::DimensionMismatch, "point dimension differs from array");
    data_.insert(data_.end(), c.begin(), c.end());
  }
  void push_back(const Point& p) { push_back(p.coords()); }

  PointArray prefix(std::size_t n) const {
    PointArray out(dim_);
    out.data_.assign(data_.begin(), data_.begin() + static_cast<std::ptrdiff_t>(n * dim_));
    return out;
  }

  std::span<const double> flat() const noexcept { return data_; }

 private:
  void check_range() const {
    for (double c : data_) {
      if (!(c >= 0.0 && c < 1.0)) throw Error(Errc::InvalidPoint, "coordinate " + std::to_string(c) + " outside [0,1)");
    }
  }

  std::size_t dim_ = 1;
  std::vector<double> data_;
};

}  // namespace orbitmatch
