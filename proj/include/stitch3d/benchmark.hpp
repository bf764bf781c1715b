#pragma once

#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "stitch3d/connectivity.hpp"
#include "stitch3d/pipeline.hpp"

namespace stitch3d {

inline nlohmann::json report_to_json(const EvaluationReport& rep,
                                     bool zero_timings = false) {
  nlohmann::json j;
  auto put = [](nlohmann::json& obj, const char* key, double v) {
    if (std::isfinite(v)) obj[key] = v;
  };
  const StageMetrics* final_m = rep.stage("final");
  if (final_m) {
    put(j, "ane", final_m->ane);
    put(j, "mse", final_m->mse);
    put(j, "tau", final_m->tau);
    put(j, "delta", final_m->delta);
    put(j, "kappa", final_m->kappa);
  }
  j["localized_count"] = rep.localized_count;
  j["runtime_seconds"] = zero_timings ? 0.0 : rep.runtime_seconds;
  j["patch_count"] = rep.patch_count;
  j["strategy"] = rep.strategy;

  nlohmann::json stages = nlohmann::json::object();
  for (const auto& [name, m] : rep.stages) {
    nlohmann::json s = nlohmann::json::object();
    put(s, "ane", m.ane);
    put(s, "mse", m.mse);
    put(s, "tau", m.tau);
    put(s, "delta", m.delta);
    put(s, "kappa", m.kappa);
    stages[name] = s;
  }
  j["stages"] = stages;

  nlohmann::json runtimes = nlohmann::json::object();
  for (const auto& [name, s] : rep.runtimes)
    runtimes[name] = zero_timings ? 0.0 : s;
  j["runtimes"] = runtimes;

  nlohmann::json sync = nlohmann::json::object();
  put(sync, "spectral_gap", rep.spectral_gap);
  put(sync, "delta_star", rep.delta_star);
  put(sync, "patch_graph_degree", rep.patch_graph_degree);
  if (!rep.top_eigenvalues.empty()) sync["top_eigenvalues"] = rep.top_eigenvalues;
  j["sync"] = sync;

  nlohmann::json denoise = nlohmann::json::object();
  put(denoise, "mean_patch_ane_sdp", rep.mean_patch_ane_sdp);
  put(denoise, "mean_patch_ane_mda", rep.mean_patch_ane_mda);
  put(denoise, "eta_bar_sdp", rep.eta_bar_sdp);
  put(denoise, "eta_bar_mda", rep.eta_bar_mda);
  j["denoising"] = denoise;

  j["warnings"] = rep.warnings;
  j["unlocalized_components"] = rep.unlocalized_components;
  return j;
}

/// Debug dump of a patch decomposition: per-patch node list, origin, and
/// embedded coordinates when present.
inline nlohmann::json patchset_to_json(const PatchSet& ps) {
  nlohmann::json j;
  j["patch_count"] = ps.patches.size();
  j["unpatched_nodes"] = ps.unpatched_nodes;
  j["warnings"] = ps.warnings;
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& p : ps.patches) {
    nlohmann::json pj;
    pj["id"] = p.id;
    pj["nodes"] = p.node_ids;
    switch (p.origin.kind) {
      case PatchOriginKind::OneHop:
        pj["origin"] = {{"kind", "1hop"}, {"center", p.origin.a}};
        break;
      case PatchOriginKind::Fragment:
        pj["origin"] = {{"kind", "fragment"}, {"fragment", p.origin.a}};
        break;
      case PatchOriginKind::Partition:
        pj["origin"] = {{"kind", "partition"}, {"cluster", p.origin.a}};
        break;
      case PatchOriginKind::LinkPatch:
        pj["origin"] = {{"kind", "link"},
                        {"clusters", {p.origin.a, p.origin.b}}};
        break;
    }
    if (p.reflection_known) pj["reflection_sign"] = p.reflection_sign;
    if (p.embedded()) {
      nlohmann::json coords = nlohmann::json::array();
      for (int k = 0; k < p.size(); ++k)
        coords.push_back({p.local_coords(0, k), p.local_coords(1, k),
                          p.local_coords(2, k)});
      pj["coords"] = coords;
    }
    arr.push_back(std::move(pj));
  }
  j["patches"] = arr;
  return j;
}

/// One benchmark grid entry: a generator plus a noise sweep.
struct BenchmarkCell {
  std::string shape = "unitcube";  // unitcube | donut | letters | spheres
  int n = 212;
  double rho = 0.3;
  std::vector<double> etas{0.0};
  int reps = 1;
  std::string method = "asap";  // asap | sp-asap
  int k = 8;                    // partitions for sp-asap
  // sphere experiment fields
  std::vector<int> m_list{5, 6, 7, 8};
  int trials = 15000;
};

struct BenchmarkSuite {
  std::vector<BenchmarkCell> cells;
  uint64_t seed = 0;
};

inline BenchmarkSuite parse_suite(const nlohmann::json& j) {
  BenchmarkSuite suite;
  if (!j.is_object() || !j.contains("cells") || !j["cells"].is_array())
    throw std::runtime_error("suite spec needs a 'cells' array");
  suite.seed = j.value("seed", 0);
  for (const auto& c : j["cells"]) {
    BenchmarkCell cell;
    for (const auto& [key, value] : c.items()) {
      if (key == "shape")
        cell.shape = value.get<std::string>();
      else if (key == "n")
        cell.n = value.get<int>();
      else if (key == "rho")
        cell.rho = value.get<double>();
      else if (key == "eta_list")
        cell.etas = value.get<std::vector<double>>();
      else if (key == "reps")
        cell.reps = value.get<int>();
      else if (key == "method")
        cell.method = value.get<std::string>();
      else if (key == "k")
        cell.k = value.get<int>();
      else if (key == "m_list")
        cell.m_list = value.get<std::vector<int>>();
      else if (key == "trials")
        cell.trials = value.get<int>();
      else
        throw std::runtime_error("unknown suite key '" + key + "'");
    }
    if (cell.shape != "unitcube" && cell.shape != "donut" &&
        cell.shape != "letters" && cell.shape != "spheres")
      throw std::runtime_error("unknown shape '" + cell.shape + "'");
    if (cell.method != "asap" && cell.method != "sp-asap")
      throw std::runtime_error("unknown method '" + cell.method + "'");
    suite.cells.push_back(std::move(cell));
  }
  return suite;
}

struct BenchmarkRow {
  std::string generator;
  int n = 0;
  double rho = 0.0;
  double eta = 0.0;
  int rep = 0;
  double ane = std::numeric_limits<double>::quiet_NaN();
  double mse = std::numeric_limits<double>::quiet_NaN();
  double tau = std::numeric_limits<double>::quiet_NaN();
  int localized = 0;
  double seconds = 0.0;
  std::string error;
};

struct BenchmarkOutput {
  std::vector<BenchmarkRow> rows;
  std::vector<double> sphere_rates;  // parallel to the sphere cells' m_list
  std::vector<int> sphere_m;
};

inline GroundTruth benchmark_truth(const std::string& shape, int n,
                                   uint64_t seed) {
  if (shape == "unitcube") {
    Rng rng(derive_seed(seed, "unitcube"));
    GroundTruth t;
    t.coords.reserve(n);
    for (int i = 0; i < n; ++i)
      t.coords.push_back({rng.unit(), rng.unit(), rng.unit()});
    return t;
  }
  if (shape == "donut") return generate_donut(n, seed);
  if (shape == "letters") return generate_letters(n, seed);
  throw std::runtime_error("no point generator for shape '" + shape + "'");
}

/// Runs the full grid; per-cell failures are recorded in the row and the
/// suite continues. Deterministic given the suite and its seed.
inline BenchmarkOutput run_benchmark(const BenchmarkSuite& suite,
                                     const PipelineConfig& base_cfg) {
  BenchmarkOutput out;
  for (size_t ci = 0; ci < suite.cells.size(); ++ci) {
    const BenchmarkCell& cell = suite.cells[ci];
    if (cell.shape == "spheres") {
      for (int m : cell.m_list) {
        out.sphere_m.push_back(m);
        out.sphere_rates.push_back(sphere_packing_experiment(
            m, cell.trials, derive_seed(suite.seed, "bench-spheres", m)));
      }
      continue;
    }
    for (size_t ei = 0; ei < cell.etas.size(); ++ei) {
      for (int rep = 0; rep < cell.reps; ++rep) {
        BenchmarkRow row;
        row.generator = cell.shape;
        row.n = cell.n;
        row.rho = cell.rho;
        row.eta = cell.etas[ei];
        row.rep = rep;
        const uint64_t run_seed = derive_seed(
            suite.seed, "bench-run", (ci * 97 + ei) * 1009 + rep);
        try {
          const GroundTruth truth =
              benchmark_truth(cell.shape, cell.n, run_seed);
          const MeasurementGraph g = generate_noisy_geometric_graph(
              truth, cell.rho, {cell.etas[ei], run_seed});
          PipelineConfig cfg = base_cfg;
          cfg.seed = run_seed;
          cfg.regularize = cell.etas[ei] > 0;
          cfg.mda = true;
          cfg.rescale = cell.etas[ei] > 0;
          const auto t0 = std::chrono::steady_clock::now();
          const PipelineResult res =
              cell.method == "sp-asap"
                  ? run_sp_asap(g, cell.k, cfg, &truth)
                  : run_asap(g, cfg, &truth);
          row.seconds = std::chrono::duration<double>(
                            std::chrono::steady_clock::now() - t0)
                            .count();
          if (const StageMetrics* m = res.report.stage("final")) {
            row.ane = m->ane;
            row.mse = m->mse;
            row.tau = m->tau;
          }
          row.localized = res.report.localized_count;
        } catch (const std::exception& err) {
          row.error = err.what();
        }
        out.rows.push_back(std::move(row));
      }
    }
  }
  return out;
}

inline void write_benchmark_csv(const BenchmarkOutput& out, std::ostream& os,
                                bool zero_timings = false) {
  os << "generator,n,rho,eta,rep,ane,mse,tau,localized,seconds\n";
  os << std::setprecision(10);
  for (const auto& r : out.rows) {
    os << r.generator << ',' << r.n << ',' << r.rho << ',' << r.eta << ','
       << r.rep << ',';
    if (!r.error.empty()) {
      os << "error,error,error," << r.localized << ",0\n";
      continue;
    }
    os << r.ane << ',' << r.mse << ',' << r.tau << ',' << r.localized << ','
       << (zero_timings ? 0.0 : r.seconds) << '\n';
  }
  for (size_t i = 0; i < out.sphere_m.size(); ++i)
    os << "spheres-m" << out.sphere_m[i] << ",,,,," << out.sphere_rates[i]
       << ",,,,\n";
}

/// Per-(generator, eta) mean and standard deviation of the error metrics.
inline void write_benchmark_aggregate_csv(const BenchmarkOutput& out,
                                          std::ostream& os) {
  os << "generator,n,rho,eta,reps,ane_mean,ane_std,mse_mean,tau_mean\n";
  os << std::setprecision(10);
  std::map<std::tuple<std::string, int, double, double>,
           std::vector<const BenchmarkRow*>>
      cells;
  for (const auto& r : out.rows)
    if (r.error.empty())
      cells[{r.generator, r.n, r.rho, r.eta}].push_back(&r);
  for (const auto& [key, rows] : cells) {
    double ane_mean = 0, mse_mean = 0, tau_mean = 0;
    for (const auto* r : rows) {
      ane_mean += r->ane;
      mse_mean += r->mse;
      tau_mean += r->tau;
    }
    const double k = static_cast<double>(rows.size());
    ane_mean /= k;
    mse_mean /= k;
    tau_mean /= k;
    double var = 0;
    for (const auto* r : rows) var += (r->ane - ane_mean) * (r->ane - ane_mean);
    os << std::get<0>(key) << ',' << std::get<1>(key) << ','
       << std::get<2>(key) << ',' << std::get<3>(key) << ',' << rows.size()
       << ',' << ane_mean << ',' << std::sqrt(var / k) << ',' << mse_mean
       << ',' << tau_mean << '\n';
  }
}

}  // namespace stitch3d
