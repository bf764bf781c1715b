#pragma once

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "stitch3d/stitch3d.hpp"

namespace stitch3d_cli {

// Exit codes: 0 success, 2 usage/input error, 3 partial localization,
// 4 numerical failure.
constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitPartial = 3;
constexpr int kExitNumerical = 4;

struct GenerateArgs {
  std::string shape = "unitcube";
  int n = 212;
  double rho = 0.3;
  double eta = 0.0;
  uint64_t seed = 0;
  std::string points_file;
  std::string out_graph = "graph.txt";
  std::string out_truth = "truth.csv";
};

struct LocalizeArgs {
  std::string graph_file;
  std::string method = "asap";
  int k = 25;
  std::string truth_file;
  std::string patch_strategy = "auto";  // auto | 1hop | fragments | spectral
  std::string sync = "auto";            // auto | combined | split
  std::string z2_method = "qcqp-degree";
  std::string wul = "feasibility";  // feasibility | full-sdp
  double eps = 1e-4;
  int min_overlap = 4;
  bool mda = false;
  bool no_mda = false;
  bool rescale = false;
  bool regularize = false;
  int refine_iters = 4000;
  uint64_t seed = 0;
  std::string out_embedding = "embedding.csv";
  std::string out_report = "report.json";
  std::string dump_patches;
  bool zero_timings = false;
};

struct EvaluateArgs {
  std::string truth_file;
  std::string embedding_file;
  std::string graph_file;
  std::string out_report;
};

struct BenchmarkArgs {
  std::string suite_file;
  std::string out_csv = "benchmark.csv";
  std::string out_aggregate = "benchmark_aggregate.csv";
  uint64_t seed = 0;
  bool zero_timings = false;
};

struct SpheresArgs {
  std::vector<int> m_list{5, 6, 7, 8};
  int trials = 15000;
  uint64_t seed = 0;
};

struct CliState {
  GenerateArgs generate;
  LocalizeArgs localize;
  EvaluateArgs evaluate;
  BenchmarkArgs benchmark;
  SpheresArgs spheres;
  CLI::App* generate_cmd = nullptr;
  CLI::App* localize_cmd = nullptr;
  CLI::App* evaluate_cmd = nullptr;
  CLI::App* benchmark_cmd = nullptr;
  CLI::App* bench_cmd = nullptr;
  CLI::App* spheres_cmd = nullptr;
};

/// Declares every subcommand and flag. Config-file values are overridden by
/// explicit CLI flags (CLI11 precedence), defaults used otherwise.
inline void build_cli(CLI::App& app, CliState& st) {
  app.set_config("--config", "", "read options from an INI/TOML config file");
  app.require_subcommand(0, 1);

  auto* gen = app.add_subcommand("generate",
                                 "generate a synthetic instance: graph file "
                                 "plus ground-truth CSV");
  gen->add_option("--shape", st.generate.shape,
                  "point cloud shape: unitcube, donut, letters, pointsfile")
      ->check(CLI::IsMember({"unitcube", "donut", "letters", "pointsfile"}));
  gen->add_option("--n", st.generate.n, "number of nodes");
  gen->add_option("--rho", st.generate.rho, "sensing radius");
  gen->add_option("--eta", st.generate.eta,
                  "multiplicative noise half-width in [0,1)");
  gen->add_option("--seed", st.generate.seed, "random seed");
  gen->add_option("--points", st.generate.points_file,
                  "CSV of coordinates for shape=pointsfile");
  gen->add_option("--out-graph", st.generate.out_graph, "graph output path");
  gen->add_option("--out-truth", st.generate.out_truth,
                  "ground-truth CSV output path");
  st.generate_cmd = gen;

  auto* loc = app.add_subcommand(
      "localize", "reconstruct coordinates from a measurement graph");
  loc->add_option("graph", st.localize.graph_file, "measurement graph file")
      ->required();
  loc->add_option("--method", st.localize.method,
                  "pipeline flavor: asap (1-hop patches) or sp-asap "
                  "(spectral partitions)")
      ->check(CLI::IsMember({"asap", "sp-asap"}));
  loc->add_option("--k", st.localize.k, "partition count for sp-asap");
  loc->add_option("--truth", st.localize.truth_file,
                  "ground-truth CSV enabling error metrics in the report");
  loc->add_option("--patch-strategy", st.localize.patch_strategy,
                  "override patch decomposition: auto, 1hop, fragments, "
                  "spectral")
      ->check(CLI::IsMember({"auto", "1hop", "fragments", "spectral"}));
  loc->add_option("--sync", st.localize.sync,
                  "reflection/rotation stage: auto, combined (O(3)), split "
                  "(Z2 then SO(3))")
      ->check(CLI::IsMember({"auto", "combined", "split"}));
  loc->add_option("--z2-method", st.localize.z2_method,
                  "sign synchronization for split mode: eigen, qcqp-unit, "
                  "qcqp-degree, sdp-y, sdp-xy")
      ->check(CLI::IsMember(
          {"eigen", "qcqp-unit", "qcqp-degree", "sdp-y", "sdp-xy"}));
  loc->add_option("--wul", st.localize.wul,
                  "localizable-subgraph extraction variant: feasibility or "
                  "full-sdp")
      ->check(CLI::IsMember({"feasibility", "full-sdp"}));
  loc->add_option("--eps", st.localize.eps,
                  "localizability threshold on the relaxation diagonal");
  loc->add_option("--min-overlap", st.localize.min_overlap,
                  "common nodes needed to align two patches");
  loc->add_flag("--mda", st.localize.mda,
                "median denoising between embedding and alignment");
  loc->add_flag("--no-mda", st.localize.no_mda, "disable median denoising");
  loc->add_flag("--rescale", st.localize.rescale,
                "correct global scale after least squares");
  loc->add_flag("--regularize", st.localize.regularize,
                "max-trace spreading term in the embedding relaxation");
  loc->add_option("--refine-iters", st.localize.refine_iters,
                  "gradient refinement iteration cap per patch");
  loc->add_option("--seed", st.localize.seed, "random seed");
  loc->add_option("--out-embedding", st.localize.out_embedding,
                  "embedding CSV output path");
  loc->add_option("--out-report", st.localize.out_report,
                  "report JSON output path");
  loc->add_option("--dump-patches", st.localize.dump_patches,
                  "write the patch decomposition (nodes, origins, local "
                  "coordinates) as JSON for debugging");
  loc->add_flag("--zero-timings", st.localize.zero_timings,
                "write zeroed runtimes for byte-reproducible output");
  st.localize_cmd = loc;

  auto* eval = app.add_subcommand(
      "evaluate", "error metrics between a truth CSV and an embedding CSV");
  eval->add_option("--truth", st.evaluate.truth_file, "ground-truth CSV")
      ->required();
  eval->add_option("--embedding", st.evaluate.embedding_file, "embedding CSV")
      ->required();
  eval->add_option("--graph", st.evaluate.graph_file,
                   "measurement graph for distance-scaling stats");
  eval->add_option("--out-report", st.evaluate.out_report,
                   "report JSON output path (stdout when omitted)");
  st.evaluate_cmd = eval;

  auto* bench_suite = app.add_subcommand(
      "benchmark", "run a JSON suite of generator/noise grids");
  bench_suite->add_option("suite", st.benchmark.suite_file,
                          "suite spec JSON file")
      ->required();
  bench_suite->add_option("--out-csv", st.benchmark.out_csv,
                          "per-run CSV output path");
  bench_suite->add_option("--out-aggregate", st.benchmark.out_aggregate,
                          "aggregated CSV output path");
  bench_suite->add_option("--seed", st.benchmark.seed,
                          "seed overriding the suite file");
  bench_suite->add_flag("--zero-timings", st.benchmark.zero_timings,
                        "write zeroed runtimes for byte-reproducible output");
  st.benchmark_cmd = bench_suite;

  auto* bench = app.add_subcommand("bench", "small built-in experiments");
  bench->require_subcommand(1);
  auto* spheres = bench->add_subcommand(
      "spheres", "Monte Carlo rate of three pairwise-overlapping spheres");
  spheres->add_option("--m", st.spheres.m_list, "sphere counts to test");
  spheres->add_option("--trials", st.spheres.trials, "trials per count");
  spheres->add_option("--seed", st.spheres.seed, "random seed");
  st.bench_cmd = bench;
  st.spheres_cmd = spheres;
}

inline int cmd_generate(const GenerateArgs& a) {
  using namespace stitch3d;
  GroundTruth truth;
  if (a.shape == "pointsfile") {
    if (a.points_file.empty()) {
      std::cerr << "generate: shape=pointsfile needs --points\n";
      return kExitUsage;
    }
    truth = load_truth(a.points_file);
  } else if (a.shape == "unitcube") {
    truth = generate_unit_cube(a.n, a.rho, a.seed).first;
  } else if (a.shape == "donut") {
    truth = generate_donut(a.n, a.seed);
  } else {
    truth = generate_letters(a.n, a.seed);
  }
  const MeasurementGraph g =
      generate_noisy_geometric_graph(truth, a.rho, {a.eta, a.seed});
  save_graph(g, a.out_graph);
  save_truth(truth, a.out_truth);
  std::cout << "wrote " << a.out_graph << " (" << g.n() << " nodes, " << g.m()
            << " edges) and " << a.out_truth << "\n";
  return kExitOk;
}

inline int cmd_localize(const LocalizeArgs& a) {
  using namespace stitch3d;
  const MeasurementGraph g = load_graph(a.graph_file);
  GroundTruth truth;
  const bool have_truth = !a.truth_file.empty();
  if (have_truth) truth = load_truth(a.truth_file);

  PipelineConfig cfg;
  cfg.seed = a.seed;
  cfg.eps = a.eps;
  cfg.min_overlap = a.min_overlap;
  cfg.refine_iters = a.refine_iters;
  cfg.regularize = a.regularize;
  cfg.rescale = a.rescale;
  cfg.mda = a.mda && !a.no_mda;
  cfg.wul_variant = a.wul == "full-sdp" ? WulVariant::FullSdp
                                        : WulVariant::Feasibility;
  if (a.patch_strategy == "1hop")
    cfg.patch_strategy = PatchStrategy::OneHop;
  else if (a.patch_strategy == "fragments")
    cfg.patch_strategy = PatchStrategy::Fragments;
  else if (a.patch_strategy == "spectral")
    cfg.patch_strategy = PatchStrategy::Spectral;
  else  // auto: fragments when present, else per --method
    cfg.patch_strategy = !g.fragments().empty() ? PatchStrategy::Fragments
                         : a.method == "sp-asap" ? PatchStrategy::Spectral
                                                 : PatchStrategy::OneHop;
  if (a.method == "sp-asap" && a.patch_strategy == "auto" &&
      g.fragments().empty())
    cfg.patch_strategy = PatchStrategy::Spectral;
  cfg.spectral_k = a.k;

  if (a.sync == "combined")
    cfg.sync_mode = SyncMode::CombinedO3;
  else if (a.sync == "split")
    cfg.sync_mode = SyncMode::SplitZ2SO3;
  else  // auto: split with anchors when fragment chirality is available
    cfg.sync_mode = !g.fragments().empty() ? SyncMode::SplitZ2SO3
                                           : SyncMode::CombinedO3;
  if (a.z2_method == "eigen")
    cfg.z2_method = Z2Method::Eigen;
  else if (a.z2_method == "qcqp-unit")
    cfg.z2_method = Z2Method::QcqpUnit;
  else if (a.z2_method == "qcqp-degree")
    cfg.z2_method = Z2Method::QcqpDegree;
  else if (a.z2_method == "sdp-y")
    cfg.z2_method = Z2Method::SdpY;
  else
    cfg.z2_method = Z2Method::SdpXY;

  PipelineResult res;
  try {
    if (cfg.patch_strategy == PatchStrategy::Spectral)
      res = run_sp_asap(g, a.k, cfg, have_truth ? &truth : nullptr);
    else
      res = run_asap(g, cfg, have_truth ? &truth : nullptr);
  } catch (const SolverFailure& err) {
    std::cerr << "localize: numerical failure: " << err.what() << "\n";
    return kExitNumerical;
  }

  save_embedding(res.embedding, a.out_embedding);
  {
    std::ofstream out(a.out_report);
    if (!out) {
      std::cerr << "localize: cannot write " << a.out_report << "\n";
      return kExitUsage;
    }
    out << report_to_json(res.report, a.zero_timings).dump(2) << "\n";
  }
  if (!a.dump_patches.empty()) {
    std::ofstream out(a.dump_patches);
    out << patchset_to_json(res.patches).dump(2) << "\n";
  }
  std::cout << "localized " << res.report.localized_count << "/" << g.n()
            << " nodes; wrote " << a.out_embedding << " and " << a.out_report
            << "\n";
  return res.report.localized_count == g.n() ? kExitOk : kExitPartial;
}

inline int cmd_evaluate(const EvaluateArgs& a) {
  using namespace stitch3d;
  const GroundTruth truth = load_truth(a.truth_file);
  const GlobalEmbedding emb = load_embedding(a.embedding_file);
  if (emb.size() != truth.size()) {
    std::cerr << "evaluate: truth has " << truth.size() << " rows, embedding "
              << emb.size() << "\n";
    return kExitUsage;
  }
  nlohmann::json j;
  j["localized_count"] = emb.localized_count();
  j["ane"] = ane(truth, emb);
  if (!a.graph_file.empty()) {
    const MeasurementGraph g = load_graph(a.graph_file);
    std::vector<double> est, len;
    for (const auto& e : g.edges()) {
      if (!emb.coords[e.i] || !emb.coords[e.j]) continue;
      est.push_back((emb.coords[e.i]->vec() - emb.coords[e.j]->vec()).norm());
      len.push_back(distance(truth.coords[e.i], truth.coords[e.j]));
    }
    if (!est.empty()) {
      const ScalingStats s = scaling_stats(est, len);
      j["delta"] = s.delta;
      j["kappa"] = s.kappa;
    }
  }
  if (a.out_report.empty()) {
    std::cout << j.dump(2) << "\n";
  } else {
    std::ofstream out(a.out_report);
    out << j.dump(2) << "\n";
    std::cout << "wrote " << a.out_report << "\n";
  }
  return kExitOk;
}

inline int cmd_benchmark(const BenchmarkArgs& a) {
  using namespace stitch3d;
  std::ifstream in(a.suite_file);
  if (!in) {
    std::cerr << "benchmark: cannot open " << a.suite_file << "\n";
    return kExitUsage;
  }
  BenchmarkSuite suite;
  try {
    suite = parse_suite(nlohmann::json::parse(in));
  } catch (const std::exception& err) {
    std::cerr << "benchmark: bad suite spec: " << err.what() << "\n";
    return kExitUsage;
  }
  if (a.seed != 0) suite.seed = a.seed;
  const BenchmarkOutput out = run_benchmark(suite, PipelineConfig{});
  {
    std::ofstream csv(a.out_csv);
    write_benchmark_csv(out, csv, a.zero_timings);
  }
  {
    std::ofstream agg(a.out_aggregate);
    write_benchmark_aggregate_csv(out, agg);
  }
  int failures = 0;
  for (const auto& r : out.rows) failures += !r.error.empty();
  std::cout << "ran " << out.rows.size() << " pipeline runs ("
            << failures << " failed) and " << out.sphere_m.size()
            << " sphere experiments; wrote " << a.out_csv << " and "
            << a.out_aggregate << "\n";
  return kExitOk;
}

inline int cmd_bench_spheres(const SpheresArgs& a) {
  using namespace stitch3d;
  std::cout << "m,rate\n";
  for (int m : a.m_list) {
    const double rate = sphere_packing_experiment(m, a.trials, a.seed);
    std::cout << m << "," << rate << "\n";
  }
  return kExitOk;
}

inline int run_cli(int argc, const char* const* argv) {
  CLI::App app{"stitch3d: 3D graph realization from sparse noisy distances "
               "by patch synchronization"};
  CliState st;
  build_cli(app, st);
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }
  try {
    if (st.generate_cmd->parsed()) return cmd_generate(st.generate);
    if (st.localize_cmd->parsed()) return cmd_localize(st.localize);
    if (st.evaluate_cmd->parsed()) return cmd_evaluate(st.evaluate);
    if (st.benchmark_cmd->parsed()) return cmd_benchmark(st.benchmark);
    if (st.bench_cmd->parsed() && st.spheres_cmd->parsed())
      return cmd_bench_spheres(st.spheres);
  } catch (const stitch3d::SolverFailure& err) {
    std::cerr << "numerical failure: " << err.what() << "\n";
    return kExitNumerical;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kExitUsage;
  }
  std::cout << app.help();
  return kExitOk;
}

}  // namespace stitch3d_cli
