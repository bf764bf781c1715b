#pragma once

#include <array>
#include <cmath>
#include <stdexcept>
#include <utility>
#include <vector>

#include "stitch3d/rng.hpp"
#include "stitch3d/types.hpp"

namespace stitch3d {

/// Geometric-graph rule: an edge exists exactly between pairs within
/// sensing radius rho, labelled with the true distance.
inline MeasurementGraph generate_geometric_graph(const GroundTruth& truth,
                                                 double rho) {
  if (!(rho > 0)) throw std::invalid_argument("rho must be positive");
  const int n = truth.size();
  MeasurementGraph g(n);
  g.set_rho(rho);
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const double d = distance(truth.coords[i], truth.coords[j]);
      if (d <= rho && d > 0) g.add_edge(i, j, d, EdgeKind::Noe);
    }
  }
  return g;
}

/// n points i.i.d. uniform in the unit cube, plus the induced geometric
/// graph of radius rho.
inline std::pair<GroundTruth, MeasurementGraph> generate_unit_cube(
    int n, double rho, uint64_t seed) {
  if (n < 4) throw std::invalid_argument("need n >= 4");
  if (!(rho > 0)) throw std::invalid_argument("rho must be positive");
  Rng rng(derive_seed(seed, "unitcube"));
  GroundTruth truth;
  truth.coords.reserve(n);
  for (int i = 0; i < n; ++i)
    truth.coords.push_back({rng.unit(), rng.unit(), rng.unit()});
  return {truth, generate_geometric_graph(truth, rho)};
}

/// Uniform sample of a solid torus (ring radius R, tube radius r).
/// Sized so that n=500, rho=0.92 lands in the usual average-degree range.
inline GroundTruth generate_donut(int n, uint64_t seed, double ring_radius = 3.0,
                                  double tube_radius = 1.05) {
  Rng rng(derive_seed(seed, "donut"));
  GroundTruth truth;
  truth.coords.reserve(n);
  while (truth.size() < n) {
    const double u = rng.uniform(0, 6.283185307179586);
    const double a = rng.uniform(-tube_radius, tube_radius);
    const double b = rng.uniform(-tube_radius, tube_radius);
    if (a * a + b * b > tube_radius * tube_radius) continue;
    // Accept with probability proportional to the ring circumference at a,
    // which makes the sample uniform in the solid.
    if (rng.unit() > (ring_radius + a) / (ring_radius + tube_radius)) continue;
    truth.coords.push_back({(ring_radius + a) * std::cos(u),
                            (ring_radius + a) * std::sin(u), b});
  }
  return truth;
}

/// Letter-stroke point cloud (four glyphs side by side) with a slab of
/// thickness in all three axes; a plot-friendly irregular topology.
inline GroundTruth generate_letters(int n, uint64_t seed) {
  using Seg = std::array<double, 4>;  // x0,y0,x1,y1 in glyph-local units
  static const std::vector<std::vector<Seg>> glyphs = {
      // P
      {{0, 0, 0, 4}, {0, 4, 2, 4}, {2, 4, 2, 2}, {2, 2, 0, 2}},
      // A
      {{0, 0, 1, 4}, {1, 4, 2, 0}, {0.5, 2, 1.5, 2}},
      // C
      {{2, 0, 0, 0}, {0, 0, 0, 4}, {0, 4, 2, 4}},
      // M
      {{0, 0, 0, 4}, {0, 4, 1, 2}, {1, 2, 2, 4}, {2, 4, 2, 0}},
  };
  Rng rng(derive_seed(seed, "letters"));
  std::vector<std::pair<int, int>> segs;  // (glyph, segment)
  std::vector<double> lens;
  double total = 0;
  for (int gi = 0; gi < static_cast<int>(glyphs.size()); ++gi)
    for (int si = 0; si < static_cast<int>(glyphs[gi].size()); ++si) {
      const auto& s = glyphs[gi][si];
      const double len = std::hypot(s[2] - s[0], s[3] - s[1]);
      segs.emplace_back(gi, si);
      lens.push_back(len);
      total += len;
    }
  GroundTruth truth;
  truth.coords.reserve(n);
  const double spacing = 3.2, thickness = 0.6;
  for (int i = 0; i < n; ++i) {
    double r = rng.uniform(0, total);
    size_t pick = 0;
    while (pick + 1 < lens.size() && r > lens[pick]) r -= lens[pick++];
    const auto& s = glyphs[segs[pick].first][segs[pick].second];
    const double t = rng.unit();
    truth.coords.push_back(
        {s[0] + t * (s[2] - s[0]) + segs[pick].first * spacing +
             rng.uniform(-thickness / 2, thickness / 2),
         s[1] + t * (s[3] - s[1]) + rng.uniform(-thickness / 2, thickness / 2),
         rng.uniform(-thickness / 2, thickness / 2)});
  }
  return truth;
}

/// Perceived-radius measurement model: every pair is ranged with
/// multiplicative uniform noise d = l*(1+u), u ~ U[-eta, eta], and an edge
/// is observed exactly when the noisy measurement falls within the sensing
/// radius. True lengths just over rho can slip in and lengths just under it
/// can drop out, which skews the surviving measurements short on average.
inline MeasurementGraph generate_noisy_geometric_graph(const GroundTruth& truth,
                                                       double rho,
                                                       const NoiseSpec& spec) {
  if (!(rho > 0)) throw std::invalid_argument("rho must be positive");
  if (spec.eta < 0 || spec.eta >= 1)
    throw std::invalid_argument("eta must lie in [0, 1)");
  const int n = truth.size();
  MeasurementGraph g(n);
  g.set_rho(rho);
  Rng rng(derive_seed(spec.seed, "noise"));
  const double reach = rho / (1.0 - spec.eta);
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const double l = distance(truth.coords[i], truth.coords[j]);
      if (l > reach || l <= 0) continue;  // could never be perceived in range
      const double d = l * (1.0 + rng.uniform(-spec.eta, spec.eta));
      if (d <= rho) g.add_edge(i, j, d, EdgeKind::Noe);
    }
  }
  return g;
}

/// Multiplicative uniform noise applied to an existing measurement graph:
/// each Noe length l becomes l*(1+u) with u ~ U[-eta, eta]. Good edges pass
/// through untouched. When the graph has a sensing radius, a perturbed
/// measurement that exceeds it is no longer observable and the edge drops.
inline MeasurementGraph apply_noise(const MeasurementGraph& g,
                                    const NoiseSpec& spec) {
  if (spec.eta < 0 || spec.eta >= 1)
    throw std::invalid_argument("eta must lie in [0, 1)");
  Rng rng(derive_seed(spec.seed, "noise"));
  MeasurementGraph out(g.n());
  if (g.rho()) out.set_rho(*g.rho());
  out.anchors() = g.anchors();
  out.fragments() = g.fragments();
  for (const auto& e : g.edges()) {
    if (e.kind == EdgeKind::Good) {
      out.add_edge(e.i, e.j, e.d, e.kind);
      continue;
    }
    const double u = rng.uniform(-spec.eta, spec.eta);
    const double d = e.d * (1.0 + u);
    if (g.rho() && d > *g.rho()) continue;
    out.add_edge(e.i, e.j, d, e.kind);
  }
  return out;
}

}  // namespace stitch3d
