#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include "orbitmatch/experiments/config.hpp"
#include "orbitmatch/experiments/report.hpp"
#include "orbitmatch/experiments/runner.hpp"

using namespace orbitmatch;
using namespace orbitmatch::experiments;

namespace {

ExperimentConfig cfg_from(const std::string& toml) { return config_from_json(parse_toml(toml)); }

std::string config_error(const std::string& toml) {
  try {
    cfg_from(toml);
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::ConfigInvalid) << e.what();
    return e.message();
  }
  ADD_FAILURE() << "accepted:\n" << toml;
  return {};
}

const std::string kDoubling = R"(
kind = "shortest-distance"
k = 2
n_ladder = [64, 128, 256]
replicas = 5
seed = 3
[system]
map = "m-times"
m = 2
)";

const std::string kLcs = R"(
kind = "lcs"
k = 2
n_ladder = [128, 512]
replicas = 4
seed = 9
[system]
matrix = [[0.7, 0.3], [0.4, 0.6]]
)";

std::filesystem::path scratch(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("orbitmatch_test_" + name);
  std::filesystem::remove_all(p);
  return p;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST(Toml, ScalarsTablesAndArrays) {
  const auto j = parse_toml(R"(# comment
name = "a \"quoted\" \\ value\n"  # trailing comment
count = 42
neg = -7
ratio = 2.5e-1
flag = true
off = false
a.b.c = 1

[table.sub]
xs = [1, 2,
      3,]   # multi-line with trailing comma
nested = [[0.5, 0.5], [1, 0]]
empty = []
)");
  EXPECT_EQ(j.at("name"), "a \"quoted\" \\ value\n");
  EXPECT_EQ(j.at("count").get<std::uint64_t>(), 42u);
  EXPECT_EQ(j.at("neg").get<std::int64_t>(), -7);
  EXPECT_DOUBLE_EQ(j.at("ratio").get<double>(), 0.25);
  EXPECT_TRUE(j.at("flag").get<bool>());
  EXPECT_FALSE(j.at("off").get<bool>());
  EXPECT_EQ(j.at("a").at("b").at("c"), 1);
  EXPECT_EQ(j.at("table").at("sub").at("xs"), json({1, 2, 3}));
  EXPECT_DOUBLE_EQ(j.at("table").at("sub").at("nested")[1][0].get<double>(), 1.0);
  EXPECT_TRUE(j.at("table").at("sub").at("empty").empty());
}

TEST(Toml, ErrorsCarryLineNumbers) {
  for (const char* bad : {"a = 1\na = 2\n", "a = \"open\n", "a = \n", "a = [1, 2\n", "[t\n", "x 1\n", "a = 1 2\n",
                          "a = tru\n", "[t]\nb = 1\n[t]\n"}) {
    try {
      parse_toml(bad);
      ADD_FAILURE() << "accepted: " << bad;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), Errc::ConfigInvalid);
      EXPECT_NE(std::string(e.message()).find("line"), std::string::npos) << e.what();
    }
  }
}

TEST(Config, LadderRange) {
  EXPECT_EQ(detail::parse_ladder_range("2^8..2^10"), (std::vector<std::size_t>{256, 512, 1024}));
  EXPECT_EQ(detail::parse_ladder_range("10^1..10^3"), (std::vector<std::size_t>{10, 100, 1000}));
  EXPECT_THROW(detail::parse_ladder_range("2^3..3^4"), Error);
  EXPECT_THROW(detail::parse_ladder_range("2^5..2^3"), Error);
  EXPECT_THROW(detail::parse_ladder_range("256"), Error);
}

TEST(Config, ParsesDoublingExample) {
  const auto cfg = cfg_from(kDoubling);
  EXPECT_EQ(cfg.kind, Kind::ShortestDistance);
  EXPECT_EQ(cfg.k, 2u);
  EXPECT_EQ(cfg.ladder, (std::vector<std::size_t>{64, 128, 256}));
  EXPECT_EQ(cfg.replicas, 5u);
  EXPECT_EQ(cfg.seed, 3u);
  EXPECT_EQ(cfg.metric, distance::MetricKind::TorusWrap);
  ASSERT_TRUE(cfg.map);
  EXPECT_TRUE(cfg.map->is<dynamics::MTimesMod1>());
}

TEST(Config, MetricDefaultsFollowTheMap) {
  const auto gauss = cfg_from(R"(kind = "shortest-distance"
n_ladder = [16]
[system]
map = "gauss")");
  EXPECT_EQ(gauss.metric, distance::MetricKind::EuclideanBox);
  const auto forced = cfg_from(R"(kind = "shortest-distance"
n_ladder = [16]
[system]
map = "m-times"
m = 3
metric = "euclidean")");
  EXPECT_EQ(forced.metric, distance::MetricKind::EuclideanBox);
}

TEST(Config, RejectsInvalidDocuments) {
  const std::string sys = "\n[system]\nmap = \"m-times\"\nm = 2\n";
  config_error("kind = \"shortest-distance\"\nn_ladder = [8]\nbogus = 1" + sys);
  config_error("kind = \"nope\"\nn_ladder = [8]" + sys);
  config_error("kind = \"shortest-distance\"\nk = 1\nn_ladder = [8]" + sys);
  config_error("kind = \"shortest-distance\"\nreplicas = 0\nn_ladder = [8]" + sys);
  config_error("kind = \"shortest-distance\"\nn_ladder = [8, 8]" + sys);
  config_error("kind = \"shortest-distance\"\nn_ladder = [1, 8]" + sys);
  config_error("kind = \"shortest-distance\"\nn_ladder = []" + sys);
  config_error("kind = \"shortest-distance\"" + sys);
  config_error("kind = \"shortest-distance\"\nn_ladder = [8]");
  config_error("kind = \"shortest-distance\"\nn_ladder = [8]\n[system]\nmap = \"m-times\"\nm = 1\n");
  config_error("kind = \"shortest-distance\"\nn_ladder = [8]\n[system]\nmap = \"warp\"\n");
  config_error("kind = \"shortest-distance\"\nn_ladder = [8]\n[system]\nmap = \"skew\"\npreset = \"skew-2x3x\"\n");
  config_error("kind = \"random-orbits\"\nn_ladder = [8]" + sys);
  config_error("kind = \"observed-distance\"\nn_ladder = [8]" + sys);
  config_error("kind = \"observed-distance\"\nn_ladder = [8]" + sys + "[observation]\nkind = \"projection\"\nindices = [1]\n");
  config_error("kind = \"shortest-distance\"\nn_ladder = [8]\n[system]\nmap = \"m-times\"\nm = 2\nmetric = \"l1\"\n");
  config_error("kind = \"lcs\"\nn_ladder = [8]\n[system]\nmatrix = [[0, 1], [1, 0]]\n");
  config_error("kind = \"lcs\"\nn_ladder = [8]\n[system]\nmatrix = [[0.5, 0.6], [1, 0]]\n");
  config_error("kind = \"lcs\"\nn_ladder = [8]\n[system]\n");
  config_error("kind = \"lcs-encoded\"\nn_ladder = [8]\n[system]\nuniform = 2\n");
  config_error("kind = \"lcs-encoded\"\nn_ladder = [8]\n[system]\nuniform = 2\n[encoder]\nkind = \"repetition\"\nweights = [1]\n");
  config_error("kind = \"scrabble\"\nn_ladder = [8]\n[system]\nuniform = 2\n[scrabble]\nweights = [2, 4]\n");
  config_error("kind = \"scrabble\"\nn_ladder = [8]\n[system]\nuniform = 2\n[scrabble]\nweights = [1, 2]\nwindow = \"x\"\n");
  config_error("kind = \"dimension\"\nn_ladder = [100]\nestimator = \"box\"" + sys);
  config_error("kind = \"dimension\"\nn_ladder = [100]" + sys + "[radii]\nr0 = 0.5\nratio = 1.5\n");
  config_error("kind = \"dimension\"\nk = 3\nn_ladder = [2]" + sys);
  config_error("kind = \"entropy\"\nn_ladder = [5]\ncylinder_length = 6\n[system]\nuniform = 2\n");
  config_error("kind = \"entropy\"\nn_ladder = [5]\ncylinder_length = 0\n[system]\nuniform = 2\n");
  config_error("kind = 3\nn_ladder = [8]" + sys);
  config_error("kind = \"shortest-distance\"\nk = -2\nn_ladder = [8]" + sys);
}

TEST(Config, LoadConfigNamesUnreadablePath) {
  try {
    load_config("/nonexistent/dir/cfg.toml");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::ConfigInvalid);
    EXPECT_NE(std::string(e.what()).find("/nonexistent/dir/cfg.toml"), std::string::npos);
  }
}

TEST(Config, OverridesReplaceConfigValues) {
  const auto dir = scratch("overrides");
  std::filesystem::create_directories(dir);
  std::ofstream(dir / "c.toml") << kDoubling;
  const auto cfg = load_config((dir / "c.toml").string(), Overrides{77, 2, std::string("elsewhere")});
  EXPECT_EQ(cfg.seed, 77u);
  EXPECT_EQ(cfg.replicas, 2u);
  EXPECT_EQ(cfg.out, "elsewhere");
  std::filesystem::remove_all(dir);
}

TEST(Theory, ConstantsEqualModuleOutputs) {
  EXPECT_EQ(*theoretical_constant(cfg_from(R"(kind = "shortest-distance"
k = 3
n_ladder = [16]
[system]
map = "m-times"
m = 2)")), 1.5);
  EXPECT_EQ(*theoretical_constant(cfg_from(R"(kind = "shortest-distance"
n_ladder = [16]
[system]
map = "torus"
dim = 2
factor = 3)")), 1.0);
  EXPECT_EQ(*theoretical_constant(cfg_from(R"(kind = "random-orbits"
n_ladder = [16]
[system]
map = "skew"
preset = "skew-2x3x")")), 2.0);

  const symbolic::MarkovModel m(std::vector<std::vector<double>>{{0.7, 0.3}, {0.4, 0.6}});
  EXPECT_EQ(*theoretical_constant(cfg_from(kLcs)), matching::lcs_limit_constant(m, 2));

  const auto scrabble = cfg_from(R"(kind = "scrabble"
k = 3
n_ladder = [16]
[system]
bernoulli = [0.5, 0.5]
[scrabble]
weights = [1, 2])");
  EXPECT_EQ(*theoretical_constant(scrabble),
            matching::scrabble_limit_constant(matching::ScrabbleSpec(symbolic::MarkovModel::uniform(2), {1, 2}), 3));

  const auto entropy = cfg_from(R"(kind = "entropy"
k = 3
n_ladder = [16]
[system]
matrix = [[0.7, 0.3], [0.4, 0.6]])");
  EXPECT_EQ(*theoretical_constant(entropy), symbolic::renyi_entropy_markov(m, 3));

  const auto dim = cfg_from(R"(kind = "dimension"
k = 3
n_ladder = [16]
[system]
map = "torus"
dim = 2
factor = 2)");
  EXPECT_EQ(*theoretical_constant(dim), *dimension::theoretical_Dk(*dim.map, 3));

  const auto observed = cfg_from(R"(kind = "observed-distance"
n_ladder = [16]
[system]
map = "torus"
dim = 2
factor = 2
[observation]
kind = "projection"
indices = [1])");
  EXPECT_EQ(*theoretical_constant(observed), 2.0);

  const auto substitution = cfg_from(R"(kind = "lcs-encoded"
n_ladder = [16]
[system]
uniform = 2
[encoder]
kind = "substitution"
words = [[0], [1, 1]])");
  EXPECT_FALSE(theoretical_constant(substitution));
}

TEST(Run, RowCountLevelsAndRegression) {
  const auto res = run(cfg_from(kDoubling), 1);
  ASSERT_EQ(res.rows.size(), 15u);
  ASSERT_EQ(res.levels.size(), 3u);
  // rows come out in (n, replica) order
  for (std::size_t i = 0; i < res.rows.size(); ++i) {
    EXPECT_EQ(res.rows[i].n, res.config.ladder[i / 5]);
    EXPECT_EQ(res.rows[i].replica, i % 5);
    EXPECT_GT(res.rows[i].statistic, 0.0);
  }
  ASSERT_TRUE(res.fit);
  EXPECT_EQ(res.estimate, res.fit->slope);
  EXPECT_EQ(res.theory, 2.0);
  EXPECT_EQ(res.abscissa_name, "-log n");
  EXPECT_NEAR(res.levels[0].abscissa, -std::log(64.0), 1e-12);
}

TEST(Run, EveryKindProducesRows) {
  const std::vector<std::string> docs{
      kDoubling,
      kLcs,
      "kind = \"observed-distance\"\nn_ladder = [32, 64]\nreplicas = 2\n[system]\nmap = \"torus\"\ndim = 2\nfactor = "
      "2\n[observation]\nkind = \"affine\"\nscale = 0.5\n",
      "kind = \"random-orbits\"\nn_ladder = [32, 64]\nreplicas = 2\n[system]\nmap = \"skew\"\npreset = \"skew-2x3x\"\n",
      "kind = \"lcs-encoded\"\nn_ladder = [64, 128]\nreplicas = 2\n[system]\nuniform = 2\n[encoder]\nkind = "
      "\"repetition\"\nweights = [1, 2]\n",
      "kind = \"scrabble\"\nn_ladder = [64, 128]\nreplicas = 2\n[system]\nuniform = 2\n[scrabble]\nweights = [1, "
      "2]\nwindow = \"encoded\"\n",
      "kind = \"dimension\"\nn_ladder = [500, 1000]\nreplicas = 2\n[system]\nmap = \"gauss\"\n",
      "kind = \"entropy\"\nn_ladder = [1000, 5000]\nreplicas = 2\ncylinder_length = 4\n[system]\nuniform = 2\n",
  };
  for (const auto& d : docs) {
    const auto cfg = cfg_from(d);
    const auto res = run(cfg, 1);
    EXPECT_EQ(res.rows.size(), cfg.ladder.size() * cfg.replicas) << d;
    EXPECT_TRUE(res.estimate.has_value()) << d;
    EXPECT_TRUE(res.theory.has_value()) << d;
  }
}

TEST(Run, ErrorsAreAnnotatedWithNAndReplica) {
  const auto cfg = cfg_from(R"(kind = "dimension"
n_ladder = [2]
replicas = 2
[system]
map = "m-times"
m = 2
[radii]
r0 = 1e-12
count = 4
ratio = 0.5)");
  try {
    run(cfg, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("n=2"), std::string::npos) << e.what();
    EXPECT_NE(std::string(e.what()).find("replica=0"), std::string::npos) << e.what();
  }
}

TEST(Run, DeterministicAcrossThreadCounts) {
  for (const auto* doc : {&kDoubling, &kLcs}) {
    const auto cfg = cfg_from(*doc);
    const auto a = run(cfg, 1), b = run(cfg, 3), c = run(cfg, 8);
    EXPECT_EQ(rows_csv(a), rows_csv(b));
    EXPECT_EQ(rows_csv(a), rows_csv(c));
    EXPECT_EQ(result_json(a).dump(), result_json(b).dump());
    EXPECT_EQ(plot_svg(a), plot_svg(c));
  }
}

TEST(Run, ThreadCountFallsBackToEnvironment) {
  ::setenv("ORBITMATCH_THREADS", "3", 1);
  EXPECT_EQ(detail::resolve_threads(0), 3u);
  EXPECT_EQ(detail::resolve_threads(2), 2u);
  ::unsetenv("ORBITMATCH_THREADS");
  EXPECT_EQ(detail::resolve_threads(0), 1u);
}

TEST(Run, DroppingAReplicaKeepsTheOthers) {
  auto cfg = cfg_from(kLcs);
  const auto full = run(cfg, 1);
  cfg.replicas = 3;
  const auto fewer = run(cfg, 1);
  std::vector<Row> kept;
  for (const Row& r : full.rows) {
    if (r.replica < 3) kept.push_back(r);
  }
  ASSERT_EQ(kept.size(), fewer.rows.size());
  for (std::size_t i = 0; i < kept.size(); ++i) {
    EXPECT_EQ(kept[i].n, fewer.rows[i].n);
    EXPECT_EQ(kept[i].replica, fewer.rows[i].replica);
    EXPECT_EQ(kept[i].statistic, fewer.rows[i].statistic);
  }
}

TEST(Report, CsvMeansMatchSummary) {
  const auto res = run(cfg_from(kDoubling), 1);
  std::istringstream csv(rows_csv(res));
  std::string line;
  std::getline(csv, line);
  EXPECT_EQ(line, "n,replica,statistic,exponent");
  std::map<std::size_t, std::pair<double, int>> acc;
  while (std::getline(csv, line)) {
    std::istringstream fields(line);
    std::string n, r, s;
    std::getline(fields, n, ',');
    std::getline(fields, r, ',');
    std::getline(fields, s, ',');
    auto& [sum, count] = acc[std::stoul(n)];
    sum += std::log(std::stod(s));
    ++count;
  }
  const auto summary = summary_json(res);
  for (const auto& lv : summary.at("levels")) {
    const auto& [sum, count] = acc.at(lv.at("n").get<std::size_t>());
    EXPECT_NEAR(sum / count, lv.at("mean_y").get<double>(), 1e-12);
  }
}

TEST(Report, SingleReplicaSingleLevel) {
  const auto res = run(cfg_from(R"(kind = "lcs"
n_ladder = [100]
[system]
uniform = 2)"), 1);
  const auto csv = rows_csv(res);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 2);
  EXPECT_FALSE(res.fit);
  const auto svg = plot_svg(res);
  EXPECT_NE(svg.find("<svg"), std::string::npos);
  EXPECT_NE(svg.find("</svg>"), std::string::npos);
}

TEST(Report, ResultJsonRoundTrip) {
  const auto res = run(cfg_from(kLcs), 1);
  const auto back = result_from_json(result_json(res));
  EXPECT_EQ(result_json(back).dump(), result_json(res).dump());
  EXPECT_EQ(rows_csv(back), rows_csv(res));
  EXPECT_EQ(plot_svg(back), plot_svg(res));
}

TEST(Report, WritesFilesAndReloads) {
  const auto dir = scratch("report");
  const auto res = run(cfg_from(kDoubling), 1);
  report(res, dir);
  write_runtime(res, dir);
  for (const char* f : {"rows.csv", "summary.json", "plot.svg", "result.json", "runtime.json"}) {
    EXPECT_TRUE(std::filesystem::exists(dir / f)) << f;
  }
  const auto summary = json::parse(slurp(dir / "summary.json"));
  EXPECT_EQ(summary.at("seed"), 3);
  EXPECT_EQ(summary.at("theory"), 2.0);
  EXPECT_FALSE(summary.at("config").contains("out"));
  const auto csv = slurp(dir / "rows.csv");
  std::filesystem::remove(dir / "rows.csv");
  report(load_result(dir), dir, Format::Csv);
  EXPECT_EQ(slurp(dir / "rows.csv"), csv);
  std::filesystem::remove_all(dir);
  try {
    load_result(dir);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::IoError);
  }
}

TEST(Report, FormatDouble) {
  EXPECT_EQ(format_double(0.5), "0.5");
  EXPECT_EQ(format_double(1.0 / 0.0), "inf");
  EXPECT_EQ(format_double(std::nan("")), "nan");
  EXPECT_EQ(std::stod(format_double(0.1 + 0.2)), 0.1 + 0.2);
}
