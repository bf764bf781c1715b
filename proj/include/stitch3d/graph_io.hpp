#pragma once

#include <charconv>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>

#include "stitch3d/types.hpp"

namespace stitch3d {

// Graph text format, line oriented and diffable:
//   n rho            header; rho = -1 when no sensing radius applies
//   i j d kind       one line per edge, kind in {good, noe}
//   anchor i x y z
//   fragment c r     fragment block: c member lines follow, r = reflection
//   i x y z            known flag (0/1)
// '#' starts a comment line.

namespace detail {

inline double parse_double(const std::string& tok, int line,
                           const char* field) {
  try {
    size_t used = 0;
    const double v = std::stod(tok, &used);
    if (used != tok.size()) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    throw ParseError(line, std::string("bad ") + field + " '" + tok + "'");
  }
}

inline int parse_int(const std::string& tok, int line, const char* field) {
  try {
    size_t used = 0;
    const int v = std::stoi(tok, &used);
    if (used != tok.size()) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    throw ParseError(line, std::string("bad ") + field + " '" + tok + "'");
  }
}

inline std::vector<std::string> tokens(const std::string& line) {
  std::istringstream in(line);
  std::vector<std::string> out;
  std::string t;
  while (in >> t) out.push_back(t);
  return out;
}

}  // namespace detail

inline void save_graph(const MeasurementGraph& g, std::ostream& out) {
  out << std::setprecision(17);
  out << g.n() << ' ' << (g.rho() ? *g.rho() : -1.0) << '\n';
  for (const auto& e : g.edges())
    out << e.i << ' ' << e.j << ' ' << e.d << ' '
        << (e.kind == EdgeKind::Good ? "good" : "noe") << '\n';
  for (const auto& [id, p] : g.anchors())
    out << "anchor " << id << ' ' << p.x << ' ' << p.y << ' ' << p.z << '\n';
  for (const auto& f : g.fragments()) {
    out << "fragment " << f.node_ids.size() << ' '
        << (f.reflection_known ? 1 : 0) << '\n';
    for (size_t k = 0; k < f.node_ids.size(); ++k)
      out << f.node_ids[k] << ' ' << f.local_coords[k].x << ' '
          << f.local_coords[k].y << ' ' << f.local_coords[k].z << '\n';
  }
}

inline void save_graph(const MeasurementGraph& g, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  save_graph(g, out);
}

inline MeasurementGraph load_graph(std::istream& in) {
  std::string line;
  int line_no = 0;
  auto next_line = [&](std::vector<std::string>& toks) -> bool {
    while (std::getline(in, line)) {
      ++line_no;
      if (!line.empty() && line[0] == '#') continue;
      toks = detail::tokens(line);
      if (!toks.empty()) return true;
    }
    return false;
  };

  std::vector<std::string> toks;
  if (!next_line(toks)) throw ParseError(1, "missing header");
  if (toks.size() != 2) throw ParseError(line_no, "header must be 'n rho'");
  const int n = detail::parse_int(toks[0], line_no, "node count");
  const double rho = detail::parse_double(toks[1], line_no, "rho");
  if (n < 0) throw ParseError(line_no, "negative node count");
  MeasurementGraph g(n);
  if (rho > 0) g.set_rho(rho);

  while (next_line(toks)) {
    if (toks[0] == "anchor") {
      if (toks.size() != 5) throw ParseError(line_no, "anchor needs 'anchor i x y z'");
      const int id = detail::parse_int(toks[1], line_no, "anchor id");
      g.anchors().emplace_back(
          id, Point3{detail::parse_double(toks[2], line_no, "x"),
                     detail::parse_double(toks[3], line_no, "y"),
                     detail::parse_double(toks[4], line_no, "z")});
    } else if (toks[0] == "fragment") {
      if (toks.size() != 3)
        throw ParseError(line_no, "fragment needs 'fragment count reflection'");
      const int count = detail::parse_int(toks[1], line_no, "fragment count");
      MolecularFragment f;
      f.reflection_known = detail::parse_int(toks[2], line_no, "reflection") != 0;
      for (int k = 0; k < count; ++k) {
        if (!next_line(toks)) throw ParseError(line_no, "truncated fragment block");
        if (toks.size() != 4)
          throw ParseError(line_no, "fragment member needs 'i x y z'");
        f.node_ids.push_back(detail::parse_int(toks[0], line_no, "node id"));
        f.local_coords.push_back({detail::parse_double(toks[1], line_no, "x"),
                                  detail::parse_double(toks[2], line_no, "y"),
                                  detail::parse_double(toks[3], line_no, "z")});
      }
      g.fragments().push_back(std::move(f));
    } else {
      if (toks.size() != 4) throw ParseError(line_no, "edge needs 'i j d kind'");
      const int i = detail::parse_int(toks[0], line_no, "node id");
      const int j = detail::parse_int(toks[1], line_no, "node id");
      const double d = detail::parse_double(toks[2], line_no, "distance");
      EdgeKind kind;
      if (toks[3] == "good")
        kind = EdgeKind::Good;
      else if (toks[3] == "noe")
        kind = EdgeKind::Noe;
      else
        throw ParseError(line_no, "edge kind must be 'good' or 'noe'");
      try {
        g.add_edge(i, j, d, kind);
      } catch (const std::invalid_argument& err) {
        throw ParseError(line_no, err.what());
      }
    }
  }
  try {
    g.validate();
  } catch (const std::logic_error& err) {
    throw ParseError(line_no, err.what());
  }
  return g;
}

inline MeasurementGraph load_graph(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return load_graph(in);
}

// Embedding CSV: header then one `id,x,y,z,localized` row per node.
// Unlocalized rows carry nan coordinates and localized=0. Ground truth uses
// the same format with every row localized.

inline void save_embedding(const GlobalEmbedding& emb, std::ostream& out) {
  out << std::setprecision(17);
  out << "id,x,y,z,localized\n";
  for (int i = 0; i < emb.size(); ++i) {
    if (emb.coords[i])
      out << i << ',' << emb.coords[i]->x << ',' << emb.coords[i]->y << ','
          << emb.coords[i]->z << ",1\n";
    else
      out << i << ",nan,nan,nan,0\n";
  }
}

inline void save_embedding(const GlobalEmbedding& emb, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  save_embedding(emb, out);
}

inline void save_truth(const GroundTruth& truth, const std::string& path) {
  GlobalEmbedding emb(truth.size());
  for (int i = 0; i < truth.size(); ++i) emb.coords[i] = truth.coords[i];
  save_embedding(emb, path);
}

inline GlobalEmbedding load_embedding(std::istream& in) {
  std::string line;
  int line_no = 0;
  std::vector<std::pair<int, std::optional<Point3>>> rows;
  int max_id = -1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "id,x,y,z,localized") continue;
    std::vector<std::string> toks;
    std::string tok;
    std::istringstream ls(line);
    while (std::getline(ls, tok, ',')) toks.push_back(tok);
    if (toks.size() != 5) throw ParseError(line_no, "row needs 5 fields");
    const int id = detail::parse_int(toks[0], line_no, "id");
    const int loc = detail::parse_int(toks[4], line_no, "localized flag");
    max_id = std::max(max_id, id);
    if (loc) {
      rows.emplace_back(id,
                        Point3{detail::parse_double(toks[1], line_no, "x"),
                               detail::parse_double(toks[2], line_no, "y"),
                               detail::parse_double(toks[3], line_no, "z")});
    } else {
      rows.emplace_back(id, std::nullopt);
    }
  }
  GlobalEmbedding emb(max_id + 1);
  for (auto& [id, p] : rows) emb.coords[id] = p;
  return emb;
}

inline GlobalEmbedding load_embedding(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return load_embedding(in);
}

inline GroundTruth load_truth(const std::string& path) {
  const GlobalEmbedding emb = load_embedding(path);
  GroundTruth t;
  t.coords.reserve(emb.size());
  for (int i = 0; i < emb.size(); ++i) {
    if (!emb.coords[i])
      throw std::runtime_error(path + ": ground truth row " +
                               std::to_string(i) + " is not localized");
    t.coords.push_back(*emb.coords[i]);
  }
  return t;
}

}  // namespace stitch3d
