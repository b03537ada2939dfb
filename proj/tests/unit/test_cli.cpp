#include <gtest/gtest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path work_dir() {
  static const fs::path dir = [] {
    auto d = fs::temp_directory_path() / ("orbitmatch_cli_test_" + std::to_string(::getpid()));
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

Outcome cli(const std::string& args) {
  const auto out = work_dir() / "stdout.txt", err = work_dir() / "stderr.txt";
  const std::string cmd = std::string("\"") + ORBITMATCH_CLI + "\" " + args + " > \"" + out.string() + "\" 2> \"" +
                          err.string() + "\"";
  const int status = std::system(cmd.c_str());
  Outcome o;
  o.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  o.out = slurp(out);
  o.err = slurp(err);
  return o;
}

const std::string kQuick = std::string(ORBITMATCH_CONFIGS) + "/quick_doubling.toml";

}  // namespace

TEST(Cli, MissingConfigExitsTwoAndNamesPath) {
  const auto o = cli("run --config /no/such/missing.toml");
  EXPECT_EQ(o.code, 2);
  EXPECT_NE(o.err.find("/no/such/missing.toml"), std::string::npos) << o.err;
}

TEST(Cli, ListSystems) {
  const auto o = cli("list-systems");
  EXPECT_EQ(o.code, 0);
  for (const char* word : {"m-times", "beta", "gauss", "piecewise-doubling", "torus", "skew", "repetition",
                           "substitution", "shortest-distance", "scrabble"}) {
    EXPECT_NE(o.out.find(word), std::string::npos) << word;
  }
}

TEST(Cli, UsageErrorsExitTwo) {
  EXPECT_EQ(cli("").code, 2);
  EXPECT_EQ(cli("frobnicate").code, 2);
  EXPECT_EQ(cli("run").code, 2);
  EXPECT_EQ(cli("run --config " + kQuick + " --replicas 0").code, 2);
  EXPECT_EQ(cli("run --config " + kQuick + " --seed notanumber").code, 2);
  EXPECT_EQ(cli("report --out x --format pdf").code, 2);
}

TEST(Cli, InvalidConfigExitsTwo) {
  const auto bad = work_dir() / "bad.toml";
  std::ofstream(bad) << "kind = \"shortest-distance\"\nk = 1\nn_ladder = [8]\n[system]\nmap = \"gauss\"\n";
  const auto o = cli("run --config " + bad.string() + " --out " + (work_dir() / "bad").string());
  EXPECT_EQ(o.code, 2);
  EXPECT_NE(o.err.find("ConfigInvalid"), std::string::npos) << o.err;
}

TEST(Cli, RuntimeErrorExitsOne) {
  const auto o = cli("report --out " + (work_dir() / "nothing_here").string());
  EXPECT_EQ(o.code, 1);
  EXPECT_NE(o.err.find("result.json"), std::string::npos) << o.err;
}

TEST(Cli, SameSeedGivesIdenticalOutputs) {
  const auto a = work_dir() / "a", b = work_dir() / "b";
  const auto ra = cli("run --config " + kQuick + " --seed 7 --out " + a.string());
  ASSERT_EQ(ra.code, 0) << ra.err;
  const auto rb = cli("run --config " + kQuick + " --seed 7 --threads 3 --out " + b.string());
  ASSERT_EQ(rb.code, 0) << rb.err;
  for (const char* f : {"rows.csv", "summary.json", "plot.svg", "result.json"}) {
    EXPECT_FALSE(slurp(a / f).empty()) << f;
    EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
  }
  EXPECT_NE(slurp(a / "summary.json").find("\"seed\": 7"), std::string::npos);
  EXPECT_NE(ra.out.find("estimate="), std::string::npos);

  const auto c = work_dir() / "c";
  ASSERT_EQ(cli("run --config " + kQuick + " --seed 8 --out " + c.string()).code, 0);
  EXPECT_NE(slurp(a / "rows.csv"), slurp(c / "rows.csv"));
}

TEST(Cli, ReplicasOverride) {
  const auto d = work_dir() / "two";
  ASSERT_EQ(cli("run --config " + kQuick + " --replicas 2 --out " + d.string()).code, 0);
  const auto csv = slurp(d / "rows.csv");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 1 + 3 * 2);
}

TEST(Cli, ReportReEmitsOutputs) {
  const auto d = work_dir() / "re";
  ASSERT_EQ(cli("run --config " + kQuick + " --out " + d.string()).code, 0);
  const auto csv = slurp(d / "rows.csv"), svg = slurp(d / "plot.svg"), summary = slurp(d / "summary.json");
  fs::remove(d / "rows.csv");
  fs::remove(d / "plot.svg");
  fs::remove(d / "summary.json");
  EXPECT_EQ(cli("report --out " + d.string() + " --format csv").code, 0);
  EXPECT_EQ(slurp(d / "rows.csv"), csv);
  EXPECT_FALSE(fs::exists(d / "plot.svg"));
  EXPECT_EQ(cli("report --out " + d.string()).code, 0);
  EXPECT_EQ(slurp(d / "plot.svg"), svg);
  EXPECT_EQ(slurp(d / "summary.json"), summary);
}
