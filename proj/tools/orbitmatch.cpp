// orbitmatch: run experiments from a config file and re-emit their reports.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "orbitmatch/experiments/config.hpp"
#include "orbitmatch/experiments/report.hpp"
#include "orbitmatch/experiments/runner.hpp"

namespace om = orbitmatch;
namespace ex = orbitmatch::experiments;

namespace {

void print_summary(const ex::ExperimentResult& res) {
  auto show = [](const std::optional<double>& v) { return v ? ex::format_double(*v) : std::string("n/a"); };
  std::cout << ex::kind_name(res.config.kind) << ": k=" << res.config.k << " R=" << res.config.replicas
            << " seed=" << res.config.seed << "\n";
  for (const auto& lv : res.levels) {
    std::cout << "  n=" << lv.n << "  mean " << res.statistic_name << "=" << ex::format_double(lv.mean_statistic)
              << "  y=" << ex::format_double(lv.mean_y) << " +- " << ex::format_double(lv.stderr_y) << "\n";
  }
  std::cout << "estimate=" << show(res.estimate) << " theory=" << show(res.theory) << " rel_error=" << show(res.rel_error())
            << "\n";
}

void list_systems() {
  std::cout << "experiment kinds:\n";
  for (const auto& [kind, name] : ex::kKindNames) std::cout << "  " << name << "\n";
  std::cout << "maps ([system] map = ...):\n"
               "  m-times             m = integer >= 2\n"
               "  beta                beta = real > 1\n"
               "  gauss\n"
               "  piecewise-doubling\n"
               "  torus               dim = N >= 1, factor = integer >= 2\n"
               "  skew                preset = \"skew-2x3x\", or thresholds = [...], fibers = [m, ...]\n"
               "observations ([observation] kind = ...):\n"
               "  identity | projection (indices = [...]) | affine (scale, offset)\n"
               "sources for sequence kinds ([system]):\n"
               "  matrix = [[...], ...] | bernoulli = [p, ...] | uniform = a\n"
               "encoders ([encoder] kind = ...):\n"
               "  identity | repetition (weights = [...]) | substitution (words = [[...], ...], output_alphabet)\n"
               "metrics: torus | euclidean\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Shortest distances between orbits and longest common substrings"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> replicas;
  std::optional<std::string> out;
  std::size_t threads = 0;
  std::string format = "all";

  auto* run = app.add_subcommand("run", "run an experiment");
  run->add_option("--config", config_path, "config file")->required();
  run->add_option("--seed", seed, "master seed (overrides the config)");
  run->add_option("--out", out, "output directory (overrides the config)");
  run->add_option("--replicas", replicas, "replica count (overrides the config)")->check(CLI::PositiveNumber);
  run->add_option("--threads", threads, "worker threads (default: ORBITMATCH_THREADS or 1)")->check(CLI::PositiveNumber);

  auto* rep = app.add_subcommand("report", "re-emit outputs from DIR/result.json");
  std::string report_dir;
  rep->add_option("--out", report_dir, "directory holding result.json")->required();
  rep->add_option("--format", format, "csv | json | svg | all")
      ->check(CLI::IsMember({"csv", "json", "svg", "all"}));

  auto* list = app.add_subcommand("list-systems", "print supported kinds, maps and encoders");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    if (list->parsed()) {
      list_systems();
      return 0;
    }
    if (run->parsed()) {
      if (!std::filesystem::exists(config_path)) {
        std::cerr << "error: config file not found: " << config_path << "\n";
        return 2;
      }
      const ex::ExperimentConfig cfg = ex::load_config(config_path, ex::Overrides{seed, replicas, out});
      const ex::ExperimentResult res = ex::run(cfg, threads);
      ex::report(res, cfg.out);
      ex::write_runtime(res, cfg.out);
      print_summary(res);
      std::cout << "wrote " << cfg.out << "/{rows.csv,summary.json,plot.svg,result.json,runtime.json}\n";
      return 0;
    }
    if (rep->parsed()) {
      const ex::ExperimentResult res = ex::load_result(report_dir);
      const ex::Format f = format == "csv"    ? ex::Format::Csv
                           : format == "json" ? ex::Format::Json
                           : format == "svg"  ? ex::Format::Svg
                                              : ex::Format::All;
      ex::report(res, report_dir, f);
      print_summary(res);
      return 0;
    }
  } catch (const om::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.code() == om::Errc::ConfigInvalid ? 2 : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
