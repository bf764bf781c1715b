#pragma once

#include <chrono>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "stitch3d/align.hpp"
#include "stitch3d/generate.hpp"
#include "stitch3d/graph_io.hpp"
#include "stitch3d/metrics.hpp"
#include "stitch3d/patches.hpp"
#include "stitch3d/sync_o3.hpp"
#include "stitch3d/sync_z2.hpp"
#include "stitch3d/translations.hpp"

namespace stitch3d {

enum class PatchStrategy { OneHop, Fragments, Spectral };
enum class SyncMode { CombinedO3, SplitZ2SO3 };
enum class Z2Method { Eigen, QcqpUnit, QcqpDegree, SdpY, SdpXY };
enum class LinkPatches { Auto, On, Off };

struct PipelineConfig {
  PatchStrategy patch_strategy = PatchStrategy::OneHop;
  int spectral_k = 8;
  LinkPatches link_patches = LinkPatches::Auto;
  EmbedMethod embed_method = EmbedMethod::Auto;
  WulVariant wul_variant = WulVariant::Feasibility;
  double eps = 1e-4;
  int min_overlap = 4;
  SyncMode sync_mode = SyncMode::CombinedO3;
  Z2Method z2_method = Z2Method::QcqpDegree;
  bool mda = false;
  bool rescale = false;
  bool regularize = false;  // max-trace spreading for noisy embeddings
  int refine_iters = 4000;
  int final_refine_iters = 3000;
  int size_cap = 70;
  uint64_t seed = 0;
  SdpOptions sdp{.tol = 1e-7, .max_iter = 160, .dim_cap = 220};

  void validate(const MeasurementGraph& g) const {
    if (patch_strategy == PatchStrategy::Fragments && g.fragments().empty())
      throw std::invalid_argument("fragment strategy needs fragments");
    if (sync_mode == SyncMode::SplitZ2SO3 && z2_method != Z2Method::Eigen &&
        g.fragments().empty())
      throw std::invalid_argument(
          "anchored reflection synchronization needs fragment patches; use "
          "the eigenvector method or supply fragments");
  }
};

struct StageMetrics {
  double ane = std::numeric_limits<double>::quiet_NaN();
  double mse = std::numeric_limits<double>::quiet_NaN();
  double tau = std::numeric_limits<double>::quiet_NaN();
  double delta = std::numeric_limits<double>::quiet_NaN();
  double kappa = std::numeric_limits<double>::quiet_NaN();
};

struct EvaluationReport {
  std::vector<std::pair<std::string, StageMetrics>> stages;
  std::vector<std::pair<std::string, double>> runtimes;  // per stage, seconds
  int localized_count = 0;
  double runtime_seconds = 0.0;
  int patch_count = 0;
  double patch_graph_degree = std::numeric_limits<double>::quiet_NaN();
  double delta_star = std::numeric_limits<double>::quiet_NaN();
  double spectral_gap = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> top_eigenvalues;
  // denoising diagnostics (truth required)
  double mean_patch_ane_sdp = std::numeric_limits<double>::quiet_NaN();
  double mean_patch_ane_mda = std::numeric_limits<double>::quiet_NaN();
  double eta_bar_sdp = std::numeric_limits<double>::quiet_NaN();
  double eta_bar_mda = std::numeric_limits<double>::quiet_NaN();
  std::vector<std::string> warnings;
  std::vector<std::vector<int>> unlocalized_components;
  std::string strategy;

  const StageMetrics* stage(const std::string& name) const {
    for (const auto& [n, m] : stages)
      if (n == name) return &m;
    return nullptr;
  }
};

namespace detail {

class StageTimer {
 public:
  explicit StageTimer(EvaluationReport& report) : report_(report) {}
  void start(const std::string& name) {
    flush();
    name_ = name;
    t0_ = std::chrono::steady_clock::now();
  }
  void flush() {
    if (name_.empty()) return;
    const double s = std::chrono::duration<double>(
                         std::chrono::steady_clock::now() - t0_)
                         .count();
    report_.runtimes.emplace_back(name_, s);
    report_.runtime_seconds += s;
    name_.clear();
  }

 private:
  EvaluationReport& report_;
  std::string name_;
  std::chrono::steady_clock::time_point t0_;
};

inline ScalingStats embedding_scaling(const MeasurementGraph& g,
                                      const GlobalEmbedding& emb,
                                      const GroundTruth& truth) {
  std::vector<double> est, len;
  for (const auto& e : g.edges()) {
    if (!emb.coords[e.i] || !emb.coords[e.j]) continue;
    est.push_back((emb.coords[e.i]->vec() - emb.coords[e.j]->vec()).norm());
    len.push_back(distance(truth.coords[e.i], truth.coords[e.j]));
  }
  if (est.empty()) return {std::numeric_limits<double>::quiet_NaN(),
                           std::numeric_limits<double>::quiet_NaN()};
  return scaling_stats(est, len);
}

/// True per-patch orthogonal transforms for the current local frames.
/// `decidable` marks patches whose chirality is a real property of the
/// data: registering onto the truth as a rotation versus as a reflection
/// must fit materially differently, otherwise (badly folded or degenerate
/// embeddings) the "true reflection" does not exist and the patch cannot be
/// scored for reflection errors.
inline std::vector<Eigen::Matrix3d> true_patch_transforms(
    const PatchSet& ps, const GroundTruth& truth,
    std::vector<char>* decidable = nullptr) {
  std::vector<Eigen::Matrix3d> out(ps.patches.size(),
                                   Eigen::Matrix3d::Identity());
  if (decidable) decidable->assign(ps.patches.size(), 0);
  for (size_t k = 0; k < ps.patches.size(); ++k) {
    const Patch& p = ps.patches[k];
    Eigen::Matrix3Xd ref(3, p.size());
    for (int i = 0; i < p.size(); ++i)
      ref.col(i) = truth.coords[p.node_ids[i]].vec();
    const auto [rot, r_rot] =
        orthogonal_procrustes_det(ref, p.local_coords, +1);
    const auto [refl, r_refl] =
        orthogonal_procrustes_det(ref, p.local_coords, -1);
    out[k] = r_rot <= r_refl ? rot.O : refl.O;
    if (decidable) {
      const double better = std::min(r_rot, r_refl);
      const double worse = std::max(r_rot, r_refl);
      (*decidable)[k] = worse > 1.5 * better + 1e-12;
    }
  }
  return out;
}

inline double mean_patch_ane(const PatchSet& ps, const GroundTruth& truth) {
  if (ps.patches.empty()) return std::numeric_limits<double>::quiet_NaN();
  double sum = 0;
  int count = 0;
  for (const auto& p : ps.patches) {
    Eigen::Matrix3Xd ref(3, p.size());
    for (int i = 0; i < p.size(); ++i)
      ref.col(i) = truth.coords[p.node_ids[i]].vec();
    try {
      sum += ane_points(ref, p.local_coords);
      ++count;
    } catch (const DegenerateConfiguration&) {
    }
  }
  return count ? sum / count : std::numeric_limits<double>::quiet_NaN();
}

/// Mean relative noise of measured Noe edges across every patch embedding
/// containing them (the post-embedding analogue of the raw noise level).
inline double patch_edge_noise(const PatchSet& ps, const MeasurementGraph& g,
                               const GroundTruth& truth) {
  double sum = 0;
  int count = 0;
  for (const auto& p : ps.patches) {
    for (int a = 0; a < p.size(); ++a)
      for (int b = a + 1; b < p.size(); ++b) {
        const Edge* e = g.find_edge(p.node_ids[a], p.node_ids[b]);
        if (!e || e->kind == EdgeKind::Good) continue;
        const double l =
            distance(truth.coords[p.node_ids[a]], truth.coords[p.node_ids[b]]);
        sum += std::abs((p.local_coords.col(a) - p.local_coords.col(b)).norm() -
                        l) /
               l;
        ++count;
      }
  }
  return count ? sum / count : std::numeric_limits<double>::quiet_NaN();
}

inline double mda_edge_noise(const MdaResult& mda, const MeasurementGraph& g,
                             const GroundTruth& truth) {
  double sum = 0;
  int count = 0;
  for (const auto& [key, est] : mda.estimates) {
    const Edge* e = g.find_edge(key.first, key.second);
    if (!e || e->kind == EdgeKind::Good) continue;
    const double l = distance(truth.coords[key.first], truth.coords[key.second]);
    sum += std::abs(est - l) / l;
    ++count;
  }
  return count ? sum / count : std::numeric_limits<double>::quiet_NaN();
}

inline std::vector<double> mda_existing_edge_estimates(
    const MdaResult& mda, const MeasurementGraph& g,
    std::vector<double>* true_lengths, const GroundTruth* truth) {
  std::vector<double> est;
  for (const auto& e : g.edges()) {
    const auto it = mda.estimates.find({e.i, e.j});
    if (it == mda.estimates.end()) continue;
    est.push_back(it->second);
    if (truth && true_lengths)
      true_lengths->push_back(distance(truth->coords[e.i], truth->coords[e.j]));
  }
  return est;
}

}  // namespace detail

struct PipelineResult {
  GlobalEmbedding embedding;
  EvaluationReport report;
  PatchSet patches;  // final state of the decomposition, for inspection
};

/// End-to-end localization: decompose into patches, embed each locally,
/// optionally denoise, synchronize reflections/rotations by the eigenvector
/// method (or split reflection and rotation stages when prior chirality is
/// available), solve translations by least squares, and optionally correct
/// the global scale.
inline PipelineResult run_asap(const MeasurementGraph& g,
                               const PipelineConfig& cfg,
                               const GroundTruth* truth = nullptr) {
  cfg.validate(g);
  PipelineResult out;
  EvaluationReport& rep = out.report;
  detail::StageTimer timer(rep);

  switch (cfg.patch_strategy) {
    case PatchStrategy::OneHop:
      rep.strategy = "1hop";
      break;
    case PatchStrategy::Fragments:
      rep.strategy = "fragments";
      break;
    case PatchStrategy::Spectral:
      rep.strategy = "spectral";
      break;
  }

  if (truth) {
    StageMetrics original;
    if (g.m() > 0) {
      const ScalingStats s = scaling_stats(g, *truth);
      original.delta = s.delta;
      original.kappa = s.kappa;
    }
    rep.stages.emplace_back("original", original);
  }

  // 1. patch decomposition
  timer.start("patch_extraction");
  PatchConfig pcfg;
  pcfg.eps = cfg.eps;
  pcfg.wul_variant = cfg.wul_variant;
  pcfg.seed = cfg.seed;
  pcfg.sdp = cfg.sdp;
  pcfg.size_cap = cfg.size_cap;
  PatchSet ps;
  switch (cfg.patch_strategy) {
    case PatchStrategy::OneHop:
      ps = build_patches_1hop(g, pcfg);
      break;
    case PatchStrategy::Fragments:
      ps = build_patches_fragments(g, pcfg);
      break;
    case PatchStrategy::Spectral: {
      bool links = cfg.link_patches == LinkPatches::On;
      if (cfg.link_patches == LinkPatches::Auto) {
        // Link patches only pay off when the extended partitions overlap
        // thinly; with four shared nodes a pair already aligns directly.
        const auto parts = spectral_partition(g, cfg.spectral_k, cfg.seed);
        const auto adj = g.adjacency();
        std::vector<std::set<int>> ext(parts.size());
        for (size_t c = 0; c < parts.size(); ++c) {
          ext[c] = std::set<int>(parts[c].begin(), parts[c].end());
          for (int v : parts[c])
            for (const auto& [w, e] : adj[v]) ext[c].insert(w);
        }
        double overlap_sum = 0;
        int overlap_pairs = 0;
        for (size_t a = 0; a < ext.size(); ++a)
          for (size_t b = a + 1; b < ext.size(); ++b) {
            int common = 0;
            for (int v : ext[a]) common += ext[b].count(v);
            if (common > 0) {
              overlap_sum += common;
              ++overlap_pairs;
            }
          }
        links = overlap_pairs == 0 || overlap_sum / overlap_pairs < 4.0;
      }
      ps = build_patches_spectral(g, cfg.spectral_k, links, pcfg);
      break;
    }
  }
  rep.patch_count = static_cast<int>(ps.patches.size());
  for (const auto& w : ps.warnings) rep.warnings.push_back(w);

  if (ps.patches.empty()) {
    timer.flush();
    out.embedding = GlobalEmbedding(g.n());
    if (truth) rep.stages.emplace_back("final", StageMetrics{});
    return out;
  }

  // 2. local embeddings
  timer.start("patch_embedding");
  embed_all_patches(g, ps, cfg.embed_method, cfg.regularize, cfg.sdp,
                    cfg.refine_iters);
  register_fragment_patches(g, ps);
  if (truth) {
    rep.mean_patch_ane_sdp = detail::mean_patch_ane(ps, *truth);
    rep.eta_bar_sdp = detail::patch_edge_noise(ps, g, *truth);
  }

  // 3. median denoising
  if (cfg.mda) {
    timer.start("denoising");
    const MdaResult mda = mda_denoise(ps, g);
    if (truth) {
      rep.mean_patch_ane_mda = detail::mean_patch_ane(ps, *truth);
      rep.eta_bar_mda = detail::mda_edge_noise(mda, g, *truth);
      StageMetrics m;
      std::vector<double> true_len;
      const std::vector<double> est =
          detail::mda_existing_edge_estimates(mda, g, &true_len, truth);
      if (!est.empty()) {
        const ScalingStats s = scaling_stats(est, true_len);
        m.delta = s.delta;
        m.kappa = s.kappa;
      }
      m.ane = rep.mean_patch_ane_mda;
      rep.stages.emplace_back("post_mda", m);
    }
  }

  // 4. reflection/rotation synchronization
  timer.start(cfg.sync_mode == SyncMode::CombinedO3 ? "sync_o3"
                                                    : "sync_z2_so3");
  SyncOptions sopts;
  sopts.min_overlap = cfg.min_overlap;
  std::vector<Eigen::Matrix3d> transforms;
  SyncO3Result sync_res;
  if (cfg.sync_mode == SyncMode::CombinedO3) {
    const PatchGraph pg = build_patch_graph(ps, cfg.min_overlap);
    if (!pg.edges.empty()) {
      double dsum = 0;
      for (int d : pg.degrees) dsum += d;
      rep.patch_graph_degree = dsum / pg.patch_count;
    }
    sync_res = sync_O3(pg, sopts);
    transforms = sync_res.transforms;
  } else {
    const PatchGraph pg = build_patch_graph(ps, cfg.min_overlap);
    if (!pg.edges.empty()) {
      double dsum = 0;
      for (int d : pg.degrees) dsum += d;
      rep.patch_graph_degree = dsum / pg.patch_count;
    }
    // Reflection measurements are the alignment determinants; only patches
    // in the main alignment component can be synchronized (isolated patches
    // stay at +1 and will not localize anyway).
    const int N = static_cast<int>(ps.patches.size());
    std::vector<int> signs(N, 1);
    const std::vector<int> comp = detail::patch_graph_components(pg);
    std::vector<int> comp_size;
    for (int c : comp) {
      if (c >= static_cast<int>(comp_size.size())) comp_size.resize(c + 1, 0);
      ++comp_size[c];
    }
    const int main_c = static_cast<int>(
        std::max_element(comp_size.begin(), comp_size.end()) -
        comp_size.begin());
    std::vector<int> members;
    std::vector<int> local(N, -1);
    for (int i = 0; i < N; ++i)
      if (comp[i] == main_c) {
        local[i] = static_cast<int>(members.size());
        members.push_back(i);
      }
    const int M = static_cast<int>(members.size());

    if (cfg.z2_method == Z2Method::Eigen) {
      Eigen::MatrixXd Z = Eigen::MatrixXd::Zero(M, M);
      for (const auto& e : pg.edges) {
        const int a = local[e.k], b = local[e.l];
        if (a < 0 || b < 0) continue;
        Z(a, b) = Z(b, a) = e.h.determinant() < 0 ? -1.0 : 1.0;
      }
      if (M > 1) {
        const Z2EigenResult res = sync_z2_eigen(Z);
        for (int i = 0; i < M; ++i) signs[members[i]] = res.signs[i];
        if (res.ambiguous > 0)
          rep.warnings.push_back(std::to_string(res.ambiguous) +
                                 " patch reflections were ambiguous");
      }
    } else {
      // anchors: patches whose chirality is known from their fragment
      std::vector<int> anchor_ids, sensor_ids;
      std::vector<int> role(N, -1);
      for (int i : members) {
        if (ps.patches[i].reflection_known) {
          role[i] = static_cast<int>(anchor_ids.size());
          anchor_ids.push_back(i);
        }
      }
      for (int i : members)
        if (!ps.patches[i].reflection_known) {
          role[i] = static_cast<int>(sensor_ids.size());
          sensor_ids.push_back(i);
        }
      if (anchor_ids.empty())
        throw std::invalid_argument("anchored Z2 method without known reflections");
      const int l = static_cast<int>(sensor_ids.size());
      const int k = static_cast<int>(anchor_ids.size());
      Z2Problem zp;
      zp.S = Eigen::MatrixXd::Zero(l, l);
      zp.U = Eigen::MatrixXd::Zero(l, k);
      zp.a = Eigen::VectorXd::Zero(k);
      for (int j = 0; j < k; ++j)
        zp.a(j) = ps.patches[anchor_ids[j]].reflection_sign;
      for (const auto& e : pg.edges) {
        if (local[e.k] < 0 || local[e.l] < 0) continue;
        const double m = e.h.determinant() < 0 ? -1.0 : 1.0;
        const bool ka = ps.patches[e.k].reflection_known;
        const bool la = ps.patches[e.l].reflection_known;
        if (!ka && !la)
          zp.S(role[e.k], role[e.l]) = zp.S(role[e.l], role[e.k]) = m;
        else if (!ka && la)
          zp.U(role[e.k], role[e.l]) = m;
        else if (ka && !la)
          zp.U(role[e.l], role[e.k]) = m;
        // anchor-anchor measurements are implied by the known signs
      }
      std::vector<int> sensor_signs;
      if (l > 0) {
        if (cfg.z2_method == Z2Method::QcqpUnit) {
          sensor_signs =
              sync_z2_anchors_qcqp(zp, QcqpConstraint::UnitSphere).signs;
        } else if (cfg.z2_method == Z2Method::QcqpDegree) {
          sensor_signs =
              sync_z2_anchors_qcqp(zp, QcqpConstraint::DegreeWeighted).signs;
        } else {
          sensor_signs = sync_z2_anchors_sdp(
              zp,
              cfg.z2_method == Z2Method::SdpY ? Z2SdpForm::Y : Z2SdpForm::XY,
              cfg.sdp);
        }
      }
      for (int i : members)
        signs[i] = ps.patches[i].reflection_known
                       ? ps.patches[i].reflection_sign
                       : sensor_signs[role[i]];
    }
    auto [mirrored, res] = sync_SO3_given_reflections(ps, signs, sopts);
    ps = std::move(mirrored);
    sync_res = std::move(res);
    transforms = sync_res.transforms;
  }
  rep.spectral_gap = sync_res.spectral_gap;
  for (int i = 0; i < sync_res.top_eigenvalues.size(); ++i)
    rep.top_eigenvalues.push_back(sync_res.top_eigenvalues(i));

  StageMetrics ls_metrics;
  if (truth) {
    std::vector<char> decidable;
    const auto truth_tf = detail::true_patch_transforms(ps, *truth, &decidable);
    std::vector<Eigen::Matrix3d> est_main, truth_main;
    for (size_t i = 0; i < transforms.size(); ++i)
      if (sync_res.in_main[i] && decidable[i]) {
        est_main.push_back(transforms[i]);
        truth_main.push_back(truth_tf[i]);
      }
    if (!est_main.empty()) {
      const auto [mse, tau] = mse_transforms(est_main, truth_main);
      ls_metrics.mse = mse;
      ls_metrics.tau = tau;
    }
  }

  // 5. translation least squares
  timer.start("translations");
  TranslationInfo tinfo;
  GlobalEmbedding emb = sync_translations(ps, transforms, g, &tinfo);
  rep.unlocalized_components = tinfo.unlocalized_components;
  if (truth && emb.localized_count() >= 3) {
    try {
      ls_metrics.ane = ane(*truth, emb);
    } catch (const DegenerateConfiguration&) {
    }
    const ScalingStats s = detail::embedding_scaling(g, emb, *truth);
    ls_metrics.delta = s.delta;
    ls_metrics.kappa = s.kappa;
  }
  if (truth) rep.stages.emplace_back("post_ls", ls_metrics);

  // 6. rescale and final refinement
  if (cfg.rescale) {
    timer.start("rescale_refine");
    auto [rescaled, delta_star] =
        rescale_embedding(g, emb, cfg.final_refine_iters);
    emb = std::move(rescaled);
    rep.delta_star = delta_star;
    if (truth && emb.localized_count() >= 3) {
      StageMetrics m;
      try {
        m.ane = ane(*truth, emb);
      } catch (const DegenerateConfiguration&) {
      }
      const ScalingStats s = detail::embedding_scaling(g, emb, *truth);
      m.delta = s.delta;
      m.kappa = s.kappa;
      rep.stages.emplace_back("post_rescale", m);
    }
  } else if (cfg.final_refine_iters > 0 && emb.localized_count() >= 4) {
    // plain polish on the measured distances
    timer.start("final_refine");
    std::vector<int> local(g.n(), -1), members;
    for (int v = 0; v < g.n(); ++v)
      if (emb.coords[v]) {
        local[v] = static_cast<int>(members.size());
        members.push_back(v);
      }
    Eigen::Matrix3Xd x(3, members.size());
    for (size_t k = 0; k < members.size(); ++k)
      x.col(k) = emb.coords[members[k]]->vec();
    std::vector<DistanceTarget> targets;
    for (const auto& e : g.edges()) {
      if (local[e.i] < 0 || local[e.j] < 0) continue;
      targets.push_back({local[e.i], local[e.j], e.d,
                         e.kind == EdgeKind::Good ? 10.0 : 1.0});
    }
    refine_gradient(x, targets, cfg.final_refine_iters);
    for (size_t k = 0; k < members.size(); ++k)
      emb.coords[members[k]] = Point3(x.col(k));
  }
  timer.flush();

  if (truth) {
    StageMetrics final_m;
    final_m.mse = ls_metrics.mse;
    final_m.tau = ls_metrics.tau;
    if (emb.localized_count() >= 3) {
      try {
        final_m.ane = ane(*truth, emb);
      } catch (const DegenerateConfiguration&) {
      }
      const ScalingStats s = detail::embedding_scaling(g, emb, *truth);
      final_m.delta = s.delta;
      final_m.kappa = s.kappa;
    }
    rep.stages.emplace_back("final", final_m);
  }
  rep.localized_count = emb.localized_count();
  out.embedding = std::move(emb);
  out.patches = std::move(ps);
  return out;
}

/// Spectral-partition front end: identical pipeline with the partition
/// patch strategy substituted.
inline PipelineResult run_sp_asap(const MeasurementGraph& g, int K,
                                  PipelineConfig cfg,
                                  const GroundTruth* truth = nullptr) {
  const SimpleGraph sg = SimpleGraph::from_measurement(g);
  if (!sg.connected())
    throw std::invalid_argument("spectral pipeline needs a connected graph");
  cfg.patch_strategy = PatchStrategy::Spectral;
  cfg.spectral_k = K;
  return run_asap(g, cfg, truth);
}

}  // namespace stitch3d
