#pragma once

// Experiment configuration: a small TOML subset parsed into JSON, then
// validated into an ExperimentConfig.
//
// Grammar: `# comments`, `[section]` headers (dotted names nest), and
// `key = value` lines where value is a "string", integer, float, true/false,
// or a [bracketed, array] that may span lines and nest.

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "orbitmatch/core.hpp"
#include "orbitmatch/dimension.hpp"
#include "orbitmatch/distance.hpp"
#include "orbitmatch/dynamics.hpp"
#include "orbitmatch/matching.hpp"
#include "orbitmatch/symbolic.hpp"

namespace orbitmatch::experiments {

using json = nlohmann::json;

namespace detail {

class TomlReader {
 public:
  explicit TomlReader(std::string_view text) : text_(text) {}

  json parse() {
    json root = json::object();
    json* table = &root;
    while (!at_end()) {
      skip_blank();
      if (at_end()) break;
      if (peek() == '[') {
        ++pos_;
        const std::string name = read_until(']');
        expect(']');
        if (!headers_.insert(name).second) fail("table [" + name + "] defined twice");
        table = &open_table(root, name);
        end_line();
        continue;
      }
      const std::string key = read_key();
      skip_inline();
      expect('=');
      skip_inline();
      json value = read_value();
      end_line();
      assign(*table, key, std::move(value));
    }
    return root;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    throw Error(Errc::ConfigInvalid, "line " + std::to_string(line_) + ": " + what);
  }

  bool at_end() const { return pos_ >= text_.size(); }
  char peek() const { return at_end() ? '\0' : text_[pos_]; }

  void expect(char c) {
    if (peek() != c) fail(std::string("expected '") + c + "'");
    ++pos_;
  }

  void skip_inline() {
    while (!at_end() && (peek() == ' ' || peek() == '\t' || peek() == '\r')) ++pos_;
  }

  void skip_comment() {
    if (peek() == '#') {
      while (!at_end() && peek() != '\n') ++pos_;
    }
  }

  // Skips whitespace, comments and newlines (between statements and inside arrays).
  void skip_blank() {
    for (;;) {
      skip_inline();
      skip_comment();
      if (peek() == '\n') {
        ++pos_;
        ++line_;
        continue;
      }
      return;
    }
  }

  void end_line() {
    skip_inline();
    skip_comment();
    if (at_end()) return;
    if (peek() != '\n') fail("unexpected text after value");
    ++pos_;
    ++line_;
  }

  std::string read_until(char stop) {
    std::string out;
    while (!at_end() && peek() != stop && peek() != '\n') out += text_[pos_++];
    return trim(out);
  }

  static std::string trim(std::string s) {
    auto sp = [](unsigned char c) { return std::isspace(c) != 0; };
    s.erase(s.begin(), std::find_if_not(s.begin(), s.end(), sp));
    s.erase(std::find_if_not(s.rbegin(), s.rend(), sp).base(), s.end());
    return s;
  }

  static bool key_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '_' || c == '-' || c == '.';
  }

  std::string read_key() {
    std::string key;
    while (!at_end() && key_char(peek())) key += text_[pos_++];
    if (key.empty()) fail("expected a key");
    return key;
  }

  static std::vector<std::string> split_dots(const std::string& name) {
    std::vector<std::string> parts;
    std::stringstream ss(name);
    std::string p;
    while (std::getline(ss, p, '.')) parts.push_back(trim(p));
    return parts;
  }

  json& open_table(json& root, const std::string& name) {
    if (name.empty()) fail("empty table name");
    json* t = &root;
    for (const auto& part : split_dots(name)) {
      if (part.empty()) fail("empty table name component");
      json& next = (*t)[part];
      if (next.is_null()) next = json::object();
      if (!next.is_object()) fail("'" + part + "' is not a table");
      t = &next;
    }
    return *t;
  }

  void assign(json& table, const std::string& key, json value) {
    auto parts = split_dots(key);
    json* t = &table;
    for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
      json& next = (*t)[parts[i]];
      if (next.is_null()) next = json::object();
      if (!next.is_object()) fail("'" + parts[i] + "' is not a table");
      t = &next;
    }
    if (t->contains(parts.back())) fail("duplicate key '" + key + "'");
    (*t)[parts.back()] = std::move(value);
  }

  json read_value() {
    const char c = peek();
    if (c == '"') return read_string();
    if (c == '[') return read_array();
    if (text_.substr(pos_, 4) == "true") {
      pos_ += 4;
      return true;
    }
    if (text_.substr(pos_, 5) == "false") {
      pos_ += 5;
      return false;
    }
    return read_number();
  }

  json read_string() {
    ++pos_;
    std::string out;
    while (!at_end() && peek() != '"') {
      char ch = text_[pos_++];
      if (ch == '\n') fail("unterminated string");
      if (ch == '\\') {
        if (at_end()) fail("unterminated escape");
        const char e = text_[pos_++];
        switch (e) {
          case 'n': ch = '\n'; break;
          case 't': ch = '\t'; break;
          case '"': ch = '"'; break;
          case '\\': ch = '\\'; break;
          default: fail(std::string("unknown escape \\") + e);
        }
      }
      out += ch;
    }
    expect('"');
    return out;
  }

  json read_array() {
    ++pos_;
    json arr = json::array();
    for (;;) {
      skip_blank();
      if (peek() == ']') {
        ++pos_;
        return arr;
      }
      if (at_end()) fail("unterminated array");
      arr.push_back(read_value());
      skip_blank();
      if (peek() == ',') {
        ++pos_;
      } else if (peek() != ']') {
        fail("expected ',' or ']' in array");
      }
    }
  }

  json read_number() {
    const std::size_t start = pos_;
    while (!at_end() && (std::isalnum(static_cast<unsigned char>(peek())) != 0 || peek() == '+' || peek() == '-' ||
                         peek() == '.' || peek() == '_')) {
      ++pos_;
    }
    std::string tok(text_.substr(start, pos_ - start));
    std::erase(tok, '_');
    if (tok.empty()) fail("expected a value");
    const bool is_float = tok.find_first_of(".eE") != std::string::npos && tok.find("0x") == std::string::npos;
    const char* b = tok.data();
    const char* e = tok.data() + tok.size();
    if (!is_float) {
      if (tok.front() == '-') {
        std::int64_t v = 0;
        auto r = std::from_chars(b, e, v);
        if (r.ec == std::errc() && r.ptr == e) return v;
      } else {
        std::uint64_t v = 0;
        auto r = std::from_chars(b + (tok.front() == '+' ? 1 : 0), e, v);
        if (r.ec == std::errc() && r.ptr == e) return v;
      }
      fail("bad integer '" + tok + "'");
    }
    double v = 0.0;
    auto r = std::from_chars(b + (tok.front() == '+' ? 1 : 0), e, v);
    if (r.ec != std::errc() || r.ptr != e) fail("bad number '" + tok + "'");
    return v;
  }

  std::string_view text_;
  std::size_t pos_ = 0;
  std::size_t line_ = 1;
  std::set<std::string> headers_;
};

}  // namespace detail

inline json parse_toml(std::string_view text) { return detail::TomlReader(text).parse(); }

// ---------------------------------------------------------------------------
// Schema
// ---------------------------------------------------------------------------

enum class Kind { ShortestDistance, ObservedDistance, RandomOrbits, Lcs, LcsEncoded, Scrabble, Dimension, Entropy };

inline constexpr std::array<std::pair<Kind, std::string_view>, 8> kKindNames{{
    {Kind::ShortestDistance, "shortest-distance"},
    {Kind::ObservedDistance, "observed-distance"},
    {Kind::RandomOrbits, "random-orbits"},
    {Kind::Lcs, "lcs"},
    {Kind::LcsEncoded, "lcs-encoded"},
    {Kind::Scrabble, "scrabble"},
    {Kind::Dimension, "dimension"},
    {Kind::Entropy, "entropy"},
}};

inline std::string_view kind_name(Kind k) {
  for (const auto& [kind, name] : kKindNames) {
    if (kind == k) return name;
  }
  return "?";
}

inline bool is_distance_kind(Kind k) {
  return k == Kind::ShortestDistance || k == Kind::ObservedDistance || k == Kind::RandomOrbits;
}
inline bool is_sequence_kind(Kind k) {
  return k == Kind::Lcs || k == Kind::LcsEncoded || k == Kind::Scrabble || k == Kind::Entropy;
}

struct ExperimentConfig {
  Kind kind = Kind::ShortestDistance;
  std::size_t k = 2;
  std::vector<std::size_t> ladder;
  std::size_t replicas = 1;
  std::uint64_t seed = 0;
  std::string out = "results";

  std::optional<dynamics::MapSpec> map;
  dynamics::ObservationSpec observation{};
  distance::MetricKind metric = distance::MetricKind::TorusWrap;
  std::optional<symbolic::MarkovModel> markov;
  matching::EncoderSpec encoder{};
  std::vector<std::size_t> weights;
  matching::WindowConvention window = matching::WindowConvention::Original;
  dimension::RadiiLadder radii{};
  dimension::Estimator estimator = dimension::Estimator::Centered;
  std::size_t cylinder_length = 8;

  /// The parsed document with command-line overrides applied.
  json source;
};

namespace detail {

[[noreturn]] inline void invalid(const std::string& what) { throw Error(Errc::ConfigInvalid, what); }

inline void check_keys(const json& obj, std::initializer_list<std::string_view> allowed, const std::string& where) {
  if (!obj.is_object()) invalid(where + " must be a table");
  for (const auto& [key, value] : obj.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      invalid("unknown key '" + key + "' in " + where);
    }
  }
}

inline std::uint64_t get_uint(const json& obj, const std::string& key, const std::string& where) {
  const json& v = obj.at(key);
  if (!v.is_number_unsigned()) invalid(where + "." + key + " must be a non-negative integer");
  return v.get<std::uint64_t>();
}

inline double get_double(const json& obj, const std::string& key, const std::string& where) {
  const json& v = obj.at(key);
  if (!v.is_number()) invalid(where + "." + key + " must be a number");
  return v.get<double>();
}

inline std::string get_string(const json& obj, const std::string& key, const std::string& where) {
  const json& v = obj.at(key);
  if (!v.is_string()) invalid(where + "." + key + " must be a string");
  return v.get<std::string>();
}

template <typename T>
std::vector<T> get_array(const json& obj, const std::string& key, const std::string& where) {
  const json& v = obj.at(key);
  if (!v.is_array()) invalid(where + "." + key + " must be an array");
  std::vector<T> out;
  for (const json& e : v) {
    if constexpr (std::is_same_v<T, double>) {
      if (!e.is_number()) invalid(where + "." + key + " must hold numbers");
    } else {
      if (!e.is_number_unsigned()) invalid(where + "." + key + " must hold non-negative integers");
    }
    out.push_back(e.get<T>());
  }
  return out;
}

/// "b^lo..b^hi" expands to b^lo, b^(lo+1), ..., b^hi.
inline std::vector<std::size_t> parse_ladder_range(const std::string& s) {
  const auto dots = s.find("..");
  if (dots == std::string::npos) invalid("n_ladder string must look like 2^8..2^14");
  auto power = [&](std::string_view t) -> std::pair<std::uint64_t, std::uint64_t> {
    const auto caret = t.find('^');
    std::uint64_t b = 0, e = 0;
    if (caret == std::string_view::npos) invalid("n_ladder bound '" + std::string(t) + "' must be base^exponent");
    auto r1 = std::from_chars(t.data(), t.data() + caret, b);
    auto r2 = std::from_chars(t.data() + caret + 1, t.data() + t.size(), e);
    if (r1.ec != std::errc() || r1.ptr != t.data() + caret || r2.ec != std::errc() || r2.ptr != t.data() + t.size()) {
      invalid("n_ladder bound '" + std::string(t) + "' is malformed");
    }
    return {b, e};
  };
  const std::string_view sv(s);
  const auto [b1, lo] = power(sv.substr(0, dots));
  const auto [b2, hi] = power(sv.substr(dots + 2));
  if (b1 != b2 || b1 < 2) invalid("n_ladder bounds need a common base >= 2");
  if (hi < lo) invalid("n_ladder range is decreasing");
  std::vector<std::size_t> out;
  for (std::uint64_t e = lo; e <= hi; ++e) {
    const double v = std::pow(static_cast<double>(b1), static_cast<double>(e));
    if (v > 1e15) invalid("n_ladder entry too large");
    out.push_back(static_cast<std::size_t>(std::llround(v)));
  }
  return out;
}

inline dynamics::PiecewiseLinearMap parse_base(const json& sys) {
  if (!sys.contains("base_breaks")) return dynamics::PiecewiseLinearMap::four_branch();
  return dynamics::PiecewiseLinearMap{get_array<double>(sys, "base_breaks", "system"),
                                      get_array<double>(sys, "base_slopes", "system"),
                                      get_array<double>(sys, "base_intercepts", "system")};
}

inline dynamics::MapSpec parse_map(const json& sys) {
  const std::string map = get_string(sys, "map", "system");
  auto small_int = [&](const char* key) {
    const std::uint64_t v = get_uint(sys, key, "system");
    if (v > 1'000'000) invalid(std::string("system.") + key + " is too large");
    return static_cast<int>(v);
  };
  if (map == "m-times") return dynamics::MTimesMod1{small_int("m")};
  if (map == "beta") return dynamics::Beta{get_double(sys, "beta", "system")};
  if (map == "gauss") return dynamics::Gauss{};
  if (map == "piecewise-doubling") return dynamics::PiecewiseDoubling{};
  if (map == "torus") {
    return dynamics::TorusExpanding{get_uint(sys, "dim", "system"), small_int("factor")};
  }
  if (map == "skew") {
    const std::string preset = sys.contains("preset") ? get_string(sys, "preset", "system") : "";
    if (preset == "skew-2x3x") return dynamics::SkewProduct::two_three_example();
    if (!preset.empty()) invalid("unknown skew preset '" + preset + "'");
    std::vector<dynamics::MapSpec> fibers;
    for (auto m : get_array<std::size_t>(sys, "fibers", "system")) {
      if (m > 1'000'000) invalid("system.fibers factor is too large");
      fibers.emplace_back(dynamics::MTimesMod1{static_cast<int>(m)});
    }
    return dynamics::SkewProduct{parse_base(sys), get_array<double>(sys, "thresholds", "system"), std::move(fibers)};
  }
  invalid("unknown system.map '" + map + "'");
}

inline symbolic::MarkovModel parse_markov(const json& sys) {
  if (sys.contains("matrix")) {
    const json& m = sys.at("matrix");
    if (!m.is_array()) invalid("system.matrix must be an array of rows");
    std::vector<std::vector<double>> rows;
    for (const json& row : m) {
      if (!row.is_array()) invalid("system.matrix rows must be arrays");
      std::vector<double> r;
      for (const json& v : row) {
        if (!v.is_number()) invalid("system.matrix entries must be numbers");
        r.push_back(v.get<double>());
      }
      rows.push_back(std::move(r));
    }
    return symbolic::MarkovModel(symbolic::SquareMatrix::from_rows(rows));
  }
  if (sys.contains("bernoulli")) return symbolic::MarkovModel::bernoulli(get_array<double>(sys, "bernoulli", "system"));
  if (sys.contains("uniform")) return symbolic::MarkovModel::uniform(get_uint(sys, "uniform", "system"));
  invalid("system needs one of matrix, bernoulli or uniform");
}

inline dynamics::ObservationSpec parse_observation(const json& obs) {
  check_keys(obs, {"kind", "indices", "scale", "offset"}, "observation");
  const std::string kind = get_string(obs, "kind", "observation");
  if (kind == "identity") return dynamics::Identity{};
  if (kind == "projection") return dynamics::CoordinateProjection{get_array<std::size_t>(obs, "indices", "observation")};
  if (kind == "affine") {
    dynamics::Affine a;
    if (obs.contains("scale")) a.scale = get_double(obs, "scale", "observation");
    if (obs.contains("offset")) a.offset = get_double(obs, "offset", "observation");
    return a;
  }
  invalid("unknown observation.kind '" + kind + "'");
}

inline matching::EncoderSpec parse_encoder(const json& enc) {
  check_keys(enc, {"kind", "weights", "words", "output_alphabet"}, "encoder");
  const std::string kind = get_string(enc, "kind", "encoder");
  if (kind == "identity") return matching::IdentityEncoder{};
  if (kind == "repetition") return matching::LetterRepetition{get_array<std::size_t>(enc, "weights", "encoder")};
  if (kind == "substitution") {
    matching::BlockSubstitution b;
    const json& words = enc.at("words");
    if (!words.is_array()) invalid("encoder.words must be an array of arrays");
    for (const json& w : words) {
      std::vector<std::uint8_t> word;
      if (!w.is_array()) invalid("encoder.words entries must be arrays");
      for (const json& s : w) {
        if (!s.is_number_unsigned() || s.get<std::uint64_t>() > 255) invalid("encoder.words symbols must be 0..255");
        word.push_back(static_cast<std::uint8_t>(s.get<std::uint64_t>()));
      }
      b.words.push_back(std::move(word));
    }
    if (enc.contains("output_alphabet")) b.output_alphabet = get_uint(enc, "output_alphabet", "encoder");
    return b;
  }
  invalid("unknown encoder.kind '" + kind + "'");
}

}  // namespace detail

/// Validates a parsed document. Module-level checks (map parameters, Markov
/// ergodicity, weights) run here too, so a bad config fails before any work.
inline ExperimentConfig config_from_json(const json& doc) {
  using namespace detail;
  check_keys(doc,
             {"kind", "k", "n_ladder", "replicas", "seed", "out", "system", "observation", "encoder", "scrabble",
              "radii", "cylinder_length", "estimator"},
             "config");
  ExperimentConfig cfg;
  cfg.source = doc;
  if (!doc.contains("kind")) invalid("missing key 'kind'");
  const std::string kind = get_string(doc, "kind", "config");
  auto it = std::find_if(kKindNames.begin(), kKindNames.end(), [&](const auto& p) { return p.second == kind; });
  if (it == kKindNames.end()) invalid("unknown kind '" + kind + "'");
  cfg.kind = it->first;

  if (doc.contains("k")) cfg.k = get_uint(doc, "k", "config");
  if (cfg.k < 2) invalid("k must be >= 2");
  if (doc.contains("replicas")) cfg.replicas = get_uint(doc, "replicas", "config");
  if (cfg.replicas < 1) invalid("replicas must be >= 1");
  if (doc.contains("seed")) cfg.seed = get_uint(doc, "seed", "config");
  if (doc.contains("out")) cfg.out = get_string(doc, "out", "config");

  if (!doc.contains("n_ladder")) invalid("missing key 'n_ladder'");
  if (doc.at("n_ladder").is_string()) {
    cfg.ladder = parse_ladder_range(doc.at("n_ladder").get<std::string>());
  } else {
    cfg.ladder = get_array<std::size_t>(doc, "n_ladder", "config");
  }
  if (cfg.ladder.empty()) invalid("n_ladder is empty");
  if (cfg.ladder.front() < 1) invalid("n_ladder entries must be >= 1");
  for (std::size_t i = 1; i < cfg.ladder.size(); ++i) {
    if (cfg.ladder[i] <= cfg.ladder[i - 1]) invalid("n_ladder must be strictly increasing");
  }

  if (!doc.contains("system")) invalid("missing [system] table");
  const json& sys = doc.at("system");
  check_keys(sys,
             {"map", "m", "beta", "dim", "factor", "preset", "thresholds", "fibers", "base_breaks", "base_slopes",
              "base_intercepts", "metric", "matrix", "bernoulli", "uniform"},
             "system");

  try {
    if (is_distance_kind(cfg.kind) || cfg.kind == Kind::Dimension) {
      cfg.map = parse_map(sys);
      dynamics::validate(*cfg.map);
      const bool skew = cfg.map->is<dynamics::SkewProduct>();
      if (cfg.kind == Kind::RandomOrbits && !skew) invalid("random-orbits needs system.map = \"skew\"");
      if (cfg.kind != Kind::RandomOrbits && skew) invalid("skew products are only supported by random-orbits");
      const bool wrap_default = dynamics::is_integer_expanding(*cfg.map) || skew;
      cfg.metric = wrap_default ? distance::MetricKind::TorusWrap : distance::MetricKind::EuclideanBox;
      if (sys.contains("metric")) {
        const std::string m = get_string(sys, "metric", "system");
        if (m == "torus") cfg.metric = distance::MetricKind::TorusWrap;
        else if (m == "euclidean") cfg.metric = distance::MetricKind::EuclideanBox;
        else invalid("system.metric must be \"torus\" or \"euclidean\"");
      }
      if (cfg.ladder.front() < 2) invalid("distance ladders need n >= 2");
      if (cfg.kind == Kind::ObservedDistance) {
        if (!doc.contains("observation")) invalid("observed-distance needs an [observation] table");
        cfg.observation = parse_observation(doc.at("observation"));
        dynamics::validate(cfg.observation, dynamics::dimension(*cfg.map));
      }
    } else {
      cfg.markov = parse_markov(sys);
      cfg.markov->require_ergodic();
    }

    if (cfg.kind == Kind::LcsEncoded) {
      if (!doc.contains("encoder")) invalid("lcs-encoded needs an [encoder] table");
      cfg.encoder = parse_encoder(doc.at("encoder"));
      matching::validate(cfg.encoder, cfg.markov->alphabet_size());
    }
    if (cfg.kind == Kind::Scrabble) {
      if (!doc.contains("scrabble")) invalid("scrabble needs a [scrabble] table");
      const json& s = doc.at("scrabble");
      check_keys(s, {"weights", "window"}, "scrabble");
      cfg.weights = get_array<std::size_t>(s, "weights", "scrabble");
      matching::ScrabbleSpec(*cfg.markov, cfg.weights);
      if (s.contains("window")) {
        const std::string w = get_string(s, "window", "scrabble");
        if (w == "original") cfg.window = matching::WindowConvention::Original;
        else if (w == "encoded") cfg.window = matching::WindowConvention::Encoded;
        else invalid("scrabble.window must be \"original\" or \"encoded\"");
      }
    }
    if (cfg.kind == Kind::Dimension) {
      if (doc.contains("radii")) {
        const json& r = doc.at("radii");
        check_keys(r, {"r0", "count", "ratio"}, "radii");
        if (r.contains("r0")) cfg.radii.r0 = get_double(r, "r0", "radii");
        if (r.contains("count")) cfg.radii.count = get_uint(r, "count", "radii");
        if (r.contains("ratio")) cfg.radii.ratio = get_double(r, "ratio", "radii");
      }
      cfg.radii.validate();
      if (doc.contains("estimator")) {
        const std::string e = get_string(doc, "estimator", "config");
        if (e == "centered") cfg.estimator = dimension::Estimator::Centered;
        else if (e == "ktuple") cfg.estimator = dimension::Estimator::KTuple;
        else invalid("estimator must be \"centered\" or \"ktuple\"");
      }
      if (cfg.ladder.front() < cfg.k) invalid("dimension ladder entries are sample sizes and must be >= k");
    }
    if (cfg.kind == Kind::Entropy) {
      if (doc.contains("cylinder_length")) cfg.cylinder_length = get_uint(doc, "cylinder_length", "config");
      if (cfg.cylinder_length < 1) invalid("cylinder_length must be >= 1");
      if (cfg.ladder.front() < cfg.cylinder_length) invalid("sequence lengths must be >= cylinder_length");
    }
  } catch (const Error& e) {
    if (e.code() == Errc::ConfigInvalid) throw;
    throw Error(Errc::ConfigInvalid, e.what());
  }
  return cfg;
}

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> replicas;
  std::optional<std::string> out;
};

inline ExperimentConfig load_config(const std::string& path, const Overrides& over = {}) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::ConfigInvalid, "cannot read config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  json doc;
  try {
    doc = parse_toml(ss.str());
  } catch (const Error& e) {
    throw Error(Errc::ConfigInvalid, path + ": " + e.message());
  }
  if (over.seed) doc["seed"] = *over.seed;
  if (over.replicas) doc["replicas"] = *over.replicas;
  if (over.out) doc["out"] = *over.out;
  return config_from_json(doc);
}

}  // namespace orbitmatch::experiments
