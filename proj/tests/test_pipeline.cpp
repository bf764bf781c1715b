#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "../tools/cli.hpp"
#include "stitch3d/stitch3d.hpp"

using namespace stitch3d;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int run_cli(const std::vector<std::string>& args) {
  std::vector<const char*> argv{"stitch3d"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return stitch3d_cli::run_cli(static_cast<int>(argv.size()), argv.data());
}

// A 60-node geometric graph whose 1-hop pipeline covers every node; the
// seed was picked so no node falls below degree 4.
std::pair<GroundTruth, MeasurementGraph> covered_instance() {
  for (uint64_t seed = 1; seed < 64; ++seed) {
    auto [truth, g] = generate_unit_cube(60, 0.5, seed);
    const auto alive = prune_low_degree(g);
    bool all = true;
    for (char a : alive) all = all && a;
    if (all) return {truth, g};
  }
  throw std::runtime_error("no fully covered seed found");
}

}  // namespace

TEST(Pipeline, NoiselessEndToEndExactness) {
  auto [truth, g] = covered_instance();
  PipelineConfig cfg;
  cfg.seed = 5;
  const PipelineResult res = run_asap(g, cfg, &truth);
  EXPECT_EQ(res.report.localized_count, 60);
  const StageMetrics* final_m = res.report.stage("final");
  ASSERT_NE(final_m, nullptr);
  EXPECT_LT(final_m->ane, 1e-4);
  EXPECT_EQ(final_m->tau, 0.0);
}

TEST(Pipeline, DeterministicUnderSeed) {
  auto [truth, g] = covered_instance();
  PipelineConfig cfg;
  cfg.seed = 9;
  const PipelineResult a = run_asap(g, cfg, &truth);
  const PipelineResult b = run_asap(g, cfg, &truth);
  ASSERT_EQ(a.embedding.size(), b.embedding.size());
  for (int i = 0; i < a.embedding.size(); ++i) {
    ASSERT_EQ(a.embedding.coords[i].has_value(),
              b.embedding.coords[i].has_value());
    if (!a.embedding.coords[i]) continue;
    EXPECT_DOUBLE_EQ(a.embedding.coords[i]->x, b.embedding.coords[i]->x);
    EXPECT_DOUBLE_EQ(a.embedding.coords[i]->y, b.embedding.coords[i]->y);
    EXPECT_DOUBLE_EQ(a.embedding.coords[i]->z, b.embedding.coords[i]->z);
  }
}

TEST(Pipeline, EmptyEdgeGraphCleanReport) {
  MeasurementGraph g(10);
  PipelineConfig cfg;
  GroundTruth truth;
  for (int i = 0; i < 10; ++i)
    truth.coords.push_back({static_cast<double>(i), 0.5, 0.25});
  const PipelineResult res = run_asap(g, cfg, &truth);
  EXPECT_EQ(res.report.localized_count, 0);
  EXPECT_EQ(res.embedding.localized_count(), 0);
  EXPECT_EQ(res.report.patch_count, 0);
}

TEST(Pipeline, OriginalStageDeltaAtLeastOneInExpectation) {
  double delta_sum = 0;
  int runs = 0;
  for (uint64_t seed = 1; seed <= 20; ++seed) {
    auto [truth, g0] = generate_unit_cube(100, 0.4, seed);
    const MeasurementGraph g =
        generate_noisy_geometric_graph(truth, 0.4, {0.3, seed});
    delta_sum += scaling_stats(g, truth).delta;
    ++runs;
  }
  EXPECT_GE(delta_sum / runs, 1.0);
}

TEST(Pipeline, FragmentWorkflowUsesAnchoredReflections) {
  auto [truth, g0] = covered_instance();
  MeasurementGraph g = g0;
  Rng rng(derive_seed(71, "frag-pipeline"));
  // a handful of disjoint fragments with known chirality
  for (int f = 0; f < 4; ++f) {
    MolecularFragment frag;
    for (int k = 0; k < 5; ++k) {
      frag.node_ids.push_back(12 * f + k);
      frag.local_coords.push_back(truth.coords[12 * f + k]);
    }
    frag.reflection_known = true;
    g.fragments().push_back(frag);
  }
  PipelineConfig cfg;
  cfg.seed = 13;
  cfg.patch_strategy = PatchStrategy::Fragments;
  cfg.sync_mode = SyncMode::SplitZ2SO3;
  cfg.z2_method = Z2Method::QcqpDegree;
  const PipelineResult res = run_asap(g, cfg, &truth);
  const StageMetrics* final_m = res.report.stage("final");
  ASSERT_NE(final_m, nullptr);
  EXPECT_LT(final_m->ane, 1e-3);
  EXPECT_EQ(final_m->tau, 0.0);
  EXPECT_GE(res.report.localized_count, 55);
}

TEST(Pipeline, SplitEigenMatchesCombinedOnCleanData) {
  auto [truth, g] = covered_instance();
  PipelineConfig cfg;
  cfg.seed = 17;
  const PipelineResult combined = run_asap(g, cfg, &truth);
  cfg.sync_mode = SyncMode::SplitZ2SO3;
  cfg.z2_method = Z2Method::Eigen;
  const PipelineResult split = run_asap(g, cfg, &truth);
  EXPECT_LT(combined.report.stage("final")->ane, 1e-4);
  EXPECT_LT(split.report.stage("final")->ane, 1e-4);
}

TEST(Pipeline, SpectralPipelineOnTwoCommunities) {
  Rng rng(derive_seed(73, "sp-pipeline"));
  // two dense unit-cube clusters sharing a thick interface
  const int n = 80;
  GroundTruth truth;
  for (int i = 0; i < n; ++i) {
    const double shift = i < n / 2 ? 0.0 : 0.55;
    truth.coords.push_back(
        {shift + 0.6 * rng.unit(), rng.unit() * 0.6, rng.unit() * 0.6});
  }
  const MeasurementGraph g = generate_geometric_graph(truth, 0.42);
  const SimpleGraph sg = SimpleGraph::from_measurement(g);
  ASSERT_TRUE(sg.connected());
  PipelineConfig cfg;
  cfg.seed = 19;
  const PipelineResult res = run_sp_asap(g, 2, cfg, &truth);
  EXPECT_EQ(res.report.strategy, "spectral");
  ASSERT_GE(res.report.localized_count, 70);
  EXPECT_LT(res.report.stage("final")->ane, 1e-3);
}

TEST(Pipeline, OversizedPartitionWarningReachesReport) {
  auto [truth, g] = generate_unit_cube(150, 0.5, 23);
  PipelineConfig cfg;
  cfg.seed = 23;
  cfg.size_cap = 30;
  const PipelineResult res = run_sp_asap(g, 2, cfg, &truth);
  bool warned = false;
  for (const auto& w : res.report.warnings)
    if (w.find("consider a larger K") != std::string::npos) warned = true;
  EXPECT_TRUE(warned);
}

TEST(Pipeline, PatchDumpJsonCarriesDecomposition) {
  auto [truth, g] = covered_instance();
  PipelineConfig cfg;
  cfg.seed = 31;
  const PipelineResult res = run_asap(g, cfg, &truth);
  const nlohmann::json j = patchset_to_json(res.patches);
  ASSERT_EQ(j["patch_count"].get<size_t>(), res.patches.patches.size());
  ASSERT_FALSE(j["patches"].empty());
  const auto& first = j["patches"][0];
  EXPECT_TRUE(first.contains("nodes"));
  EXPECT_TRUE(first.contains("origin"));
  EXPECT_TRUE(first.contains("coords"));
  EXPECT_EQ(first["nodes"].size(), first["coords"].size());
}

TEST(Benchmark, GridBookkeepingAndDeterminism) {
  BenchmarkSuite suite;
  suite.seed = 4;
  BenchmarkCell cell;
  cell.shape = "unitcube";
  cell.n = 50;
  cell.rho = 0.55;
  cell.etas = {0.0, 0.1};
  cell.reps = 2;
  suite.cells.push_back(cell);
  PipelineConfig cfg;
  const BenchmarkOutput a = run_benchmark(suite, cfg);
  ASSERT_EQ(a.rows.size(), 4u);  // 2 etas x 2 reps
  for (const auto& r : a.rows) EXPECT_TRUE(r.error.empty()) << r.error;

  std::stringstream csv_a, agg_a;
  write_benchmark_csv(a, csv_a, /*zero_timings=*/true);
  write_benchmark_aggregate_csv(a, agg_a);
  // 4 runs, 2 aggregate rows (one per eta)
  const std::string agg_text = agg_a.str();
  EXPECT_EQ(std::count(agg_text.begin(), agg_text.end(), '\n'), 3);

  const BenchmarkOutput b = run_benchmark(suite, cfg);
  std::stringstream csv_b;
  write_benchmark_csv(b, csv_b, /*zero_timings=*/true);
  EXPECT_EQ(csv_a.str(), csv_b.str());
}

TEST(Benchmark, SuiteSpecErrorsNameTheKey) {
  const auto j = nlohmann::json::parse(
      R"({"cells": [{"shape": "unitcube", "bogus_key": 3}]})");
  try {
    parse_suite(j);
    FAIL() << "expected schema error";
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find("bogus_key"), std::string::npos);
  }
}

TEST(Cli, HelpEnumeratesEveryFlag) {
  CLI::App app{"probe"};
  stitch3d_cli::CliState st;
  stitch3d_cli::build_cli(app, st);
  // walk every subcommand; each registered option must show up in that
  // subcommand's help text (no hidden flags)
  std::function<void(const CLI::App*)> walk = [&](const CLI::App* cmd) {
    const std::string help = const_cast<CLI::App*>(cmd)->help();
    for (const CLI::Option* opt : cmd->get_options()) {
      const std::string name = opt->get_name();
      if (name.empty()) continue;
      EXPECT_NE(help.find(name), std::string::npos)
          << "flag " << name << " missing from help of " << cmd->get_name();
    }
    for (const CLI::App* sub : cmd->get_subcommands({}))
      walk(sub);
  };
  walk(&app);
}

TEST(Cli, GenerateLocalizeEvaluateRoundTrip) {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "stitch3d_cli_test";
  fs::create_directories(dir);
  const auto graph = (dir / "g.txt").string();
  const auto truth = (dir / "t.csv").string();
  const auto emb = (dir / "e.csv").string();
  const auto rep = (dir / "r.json").string();

  ASSERT_EQ(run_cli({"generate", "--shape", "unitcube", "--n", "56", "--rho",
                     "0.5", "--eta", "0", "--seed", "21", "--out-graph", graph,
                     "--out-truth", truth}),
            0);
  const int rc = run_cli({"localize", graph, "--method", "asap", "--truth",
                          truth, "--out-embedding", emb, "--out-report", rep,
                          "--zero-timings", "--seed", "21"});
  EXPECT_TRUE(rc == 0 || rc == 3);
  const auto j = nlohmann::json::parse(slurp(rep));
  EXPECT_TRUE(j.contains("ane"));
  EXPECT_TRUE(j.contains("localized_count"));
  EXPECT_TRUE(j.contains("runtime_seconds"));
  EXPECT_TRUE(j.contains("stages"));
  EXPECT_EQ(j["runtime_seconds"], 0.0);
  EXPECT_LT(j["ane"].get<double>(), 1e-3);

  // byte-identical outputs under --zero-timings
  const auto emb2 = (dir / "e2.csv").string();
  const auto rep2 = (dir / "r2.json").string();
  run_cli({"localize", graph, "--method", "asap", "--truth", truth,
           "--out-embedding", emb2, "--out-report", rep2, "--zero-timings",
           "--seed", "21"});
  EXPECT_EQ(slurp(emb), slurp(emb2));
  EXPECT_EQ(slurp(rep), slurp(rep2));

  // evaluate identical files -> ane 0
  const auto rep3 = (dir / "r3.json").string();
  ASSERT_EQ(run_cli({"evaluate", "--truth", truth, "--embedding", truth,
                     "--graph", graph, "--out-report", rep3}),
            0);
  const auto j3 = nlohmann::json::parse(slurp(rep3));
  EXPECT_LT(j3["ane"].get<double>(), 1e-12);
  fs::remove_all(dir);
}

TEST(Cli, UsageErrorsExitTwo) {
  EXPECT_EQ(run_cli({"generate", "--shape", "dodecahedron"}), 2);
  EXPECT_EQ(run_cli({"localize", "/nonexistent/graph.txt"}), 2);
  EXPECT_EQ(run_cli({"benchmark", "/nonexistent/suite.json"}), 2);
}

TEST(Cli, BenchmarkSuiteFileRuns) {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "stitch3d_bench_test";
  fs::create_directories(dir);
  const auto suite = (dir / "suite.json").string();
  {
    std::ofstream out(suite);
    out << R"({"seed": 3, "cells": [
      {"shape": "unitcube", "n": 48, "rho": 0.55, "eta_list": [0.0], "reps": 1, "method": "asap"},
      {"shape": "spheres", "m_list": [3], "trials": 200}
    ]})";
  }
  const auto csv = (dir / "out.csv").string();
  const auto agg = (dir / "agg.csv").string();
  ASSERT_EQ(run_cli({"benchmark", suite, "--out-csv", csv, "--out-aggregate",
                     agg, "--zero-timings"}),
            0);
  const std::string body = slurp(csv);
  EXPECT_NE(body.find("generator,n,rho,eta,rep,ane,mse,tau,localized,seconds"),
            std::string::npos);
  EXPECT_NE(body.find("unitcube,48"), std::string::npos);
  EXPECT_NE(body.find("spheres-m3"), std::string::npos);
  fs::remove_all(dir);
}

TEST(Cli, BenchSpheresRuns) {
  EXPECT_EQ(run_cli({"bench", "spheres", "--m", "3", "--trials", "100",
                     "--seed", "5"}),
            0);
}
