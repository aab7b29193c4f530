#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "cli_support.hpp"
#include "ood/experiment.hpp"

#include <cmath>
#include <map>

using namespace ood::testing;

TEST_CASE("invalid config exits with code 2 and writes nothing") {
  const auto dir = scratch_dir("bad");
  const auto cfg = write_config(dir / "bad.ini", "[experiment]\ntarget = g7\ndim = 2\n");
  CHECK(run_cli("bilevel", cfg, dir / "out") == 2);
  CHECK(!std::filesystem::exists(dir / "out"));

  const auto cfg2 = write_config(dir / "bad2.ini", tiny_config("g1", 2) + "[bilevel]\niterations = -4\n");
  CHECK(run_cli("bilevel", cfg2, dir / "out2") == 2);
  CHECK(!std::filesystem::exists(dir / "out2"));

  const auto cfg3 = write_config(dir / "bad3.ini", "[experiment]\nnot_a_key = 1\n");
  CHECK(run_cli("eval", cfg3, dir / "out3") == 2);
  CHECK(run_cli("eval", dir / "missing.ini", dir / "out4") == 2);
}

TEST_CASE("eval of the zero model reports Err 1") {
  const auto dir = scratch_dir("zero");
  const auto cfg = write_config(dir / "zero.ini", tiny_config("g1", 2) + "[eval]\nmodel = zero\n");
  REQUIRE(run_cli("eval", cfg, dir / "out") == 0);
  const auto rows = ood::read_results_csv((dir / "out" / "results.csv").string());
  REQUIRE(rows.size() == 2);
  for (const auto& [rep, row] : rows) CHECK(row.err == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("summary rows are the mean and two sample deviations of the results") {
  const auto dir = scratch_dir("summary");
  const auto cfg = write_config(dir / "b.ini", tiny_config("g1", 2, 3) +
                                                   "[baselines]\nkinds = normal, mixture, ncoreset\n");
  REQUIRE(run_cli("baselines", cfg, dir / "out") == 0);
  std::map<std::string, std::vector<double>> groups;
  for (const auto& [rep, row] : ood::read_results_csv((dir / "out" / "results.csv").string()))
    groups[row.distribution + "/" + std::to_string(row.train_samples)].push_back(row.err);
  REQUIRE(groups.size() == 3);

  const auto summary = read_csv(dir / "out" / "summary.csv");
  int checked = 0;
  for (const auto& cells : summary) {
    if (cells.at(1) != "err") continue;
    const auto& v = groups.at(cells.at(0) + "/" + cells.at(2));
    double mean = 0.0;
    for (double x : v) mean += x / static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    const double two_sigma = 2.0 * std::sqrt(ss / static_cast<double>(v.size() - 1));
    CHECK(std::abs(std::stod(cells.at(4)) - mean) < 1e-12);
    CHECK(std::abs(std::stod(cells.at(5)) - two_sigma) < 1e-12);
    CHECK(std::stoul(cells.at(6)) == v.size());
    ++checked;
  }
  CHECK(checked == 3);
}

TEST_CASE("every subcommand is byte-identical across reruns") {
  for (const auto& sub : subcommands()) {
    CAPTURE(sub);
    const auto dir = scratch_dir("det_" + sub);
    const auto cfg = write_config(dir / "c.ini", config_for(sub, dir));
    REQUIRE(run_cli(sub, cfg, dir / "a") == 0);
    REQUIRE(run_cli(sub, cfg, dir / "b") == 0);
    CHECK(same_tree(dir / "a", dir / "b"));
  }
}

TEST_CASE("bilevel trace has one row per iteration plus the start") {
  const auto dir = scratch_dir("trace");
  const auto cfg = write_config(dir / "c.ini", config_for("bilevel", dir));
  REQUIRE(run_cli("bilevel", cfg, dir / "out") == 0);
  const auto rows = read_csv(dir / "out" / "trace_rep0.csv");
  // header + iterations + 1
  CHECK(rows.size() == 1 + 6 + 1);
  CHECK(rows.front().at(0) == "iter");
}

TEST_CASE("eval scores the final parameters of a bilevel trace") {
  const auto dir = scratch_dir("eval_trace");
  const auto cfg = write_config(dir / "c.ini", config_for("bilevel", dir));
  REQUIRE(run_cli("bilevel", cfg, dir / "opt") == 0);
  const auto trace = (dir / "opt" / "trace_rep0.csv").string();
  const auto ecfg = write_config(dir / "e.ini", tiny_config("g1", 2) +
                                                    "[eval]\nmodel = trace\ntrace = " + trace + "\n");
  REQUIRE(run_cli("eval", ecfg, dir / "out") == 0);
  const auto rows = ood::read_results_csv((dir / "out" / "results.csv").string());
  REQUIRE(!rows.empty());
  CHECK(rows.front().second.err > 0.0);
  CHECK(rows.front().second.err < 1.5);
}
