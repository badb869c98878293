#pragma once

#include <array>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "fincover/graph.hpp"
#include "fincover/rational.hpp"

namespace fincover {

// Closed immersed loop: consecutive darts share a vertex and never backtrack
// (cyclically, including the wrap-around seam).
struct Fin {
  std::string id;
  std::vector<int> cycle;

  int length() const { return static_cast<int>(cycle.size()); }
};

struct OrientedFin {
  int fin = -1;
  bool reversed = false;

  OrientedFin reverse() const { return {fin, !reversed}; }
  friend auto operator<=>(const OrientedFin&, const OrientedFin&) = default;
};

// Colour of (fin, forward) at [0], (fin, backward) at [1].
using FinColours = std::array<std::string, 2>;

struct GraphWithFins {
  Graph graph;
  std::vector<Fin> fins;
  std::vector<FinColours> colours;

  int n_fins() const { return static_cast<int>(fins.size()); }
  const std::string& colour(OrientedFin s) const { return colours[s.fin][s.reversed ? 1 : 0]; }
};

// Traversal of the fin as seen in the given direction: backward walks the
// reversed darts in reverse order.
inline std::vector<int> oriented_cycle(const Fin& f, bool reversed) {
  if (!reversed) return f.cycle;
  std::vector<int> out;
  out.reserve(f.cycle.size());
  for (auto it = f.cycle.rbegin(); it != f.cycle.rend(); ++it) out.push_back(dart_reverse(*it));
  return out;
}

// Closed immersed dart cycle, including the wrap-around seam.
inline void validate_closed_immersed(const Graph& g, const std::vector<int>& cycle,
                                     const std::string& what) {
  if (cycle.empty()) throw Error(ErrorCode::DanglingDart, what + " has an empty cycle");
  int n = static_cast<int>(cycle.size());
  for (int i = 0; i < n; ++i) {
    int d = cycle[i];
    if (d < 0 || d >= g.n_darts())
      throw Error(ErrorCode::DanglingDart, what + " references a missing dart");
    int next = cycle[(i + 1) % n];
    if (g.dart_terminus(d) != g.dart_origin(next))
      throw Error(ErrorCode::DanglingDart, what + " is not closed between positions " +
                                               std::to_string(i) + " and " +
                                               std::to_string((i + 1) % n));
    if (dart_reverse(d) == next)
      throw Error(ErrorCode::BacktrackingLoop,
                  what + " backtracks at position " + std::to_string((i + 1) % n));
  }
}

// Validates cycles; absent colours default to one fresh colour per oriented
// fin ("<id>+" / "<id>-").
inline GraphWithFins build_graph_with_fins(Graph graph, std::vector<Fin> fins,
                                           std::vector<FinColours> colours = {}) {
  GraphWithFins x;
  x.graph = std::move(graph);
  x.fins = std::move(fins);
  std::set<std::string> ids;
  for (const Fin& f : x.fins) {
    if (f.id.empty() || !ids.insert(f.id).second)
      throw Error(ErrorCode::ParseError, "duplicate or empty fin id '" + f.id + "'");
    validate_closed_immersed(x.graph, f.cycle, "fin '" + f.id + "'");
  }
  if (colours.empty()) {
    for (const Fin& f : x.fins) colours.push_back({f.id + "+", f.id + "-"});
  }
  if (colours.size() != x.fins.size())
    throw Error(ErrorCode::ParseError, "colour table size disagrees with fin count");
  for (const FinColours& c : colours) {
    if (c[0].empty() || c[1].empty()) throw Error(ErrorCode::ParseError, "empty colour value");
  }
  x.colours = std::move(colours);
  return x;
}

inline int fin_index(const GraphWithFins& x, const std::string& id) {
  for (int i = 0; i < x.n_fins(); ++i)
    if (x.fins[i].id == id) return i;
  return -1;
}

inline std::set<std::string> colours_used(const GraphWithFins& x) {
  std::set<std::string> out;
  for (const FinColours& c : x.colours) {
    out.insert(c[0]);
    out.insert(c[1]);
  }
  return out;
}

// Sum of lengths of oriented fins of the colour, over the vertex count.
// A fin whose two orientations share the colour contributes twice.
inline Rational density(const GraphWithFins& x, const std::string& colour) {
  Int total = 0;
  for (int f = 0; f < x.n_fins(); ++f) {
    if (x.colours[f][0] == colour) total += x.fins[f].length();
    if (x.colours[f][1] == colour) total += x.fins[f].length();
  }
  return Rational(total, Int(x.graph.n_vertices()));
}

// Replaces every edge by a path of k edges. Midpoint vertices and edge pieces
// are indexed deterministically: midpoint j of edge e is vertex
// n_vertices + e*(k-1) + (j-1); piece j of edge e is edge e*k + j.
inline GraphWithFins subdivide(const GraphWithFins& x, int k) {
  if (k < 1) throw Error(ErrorCode::ParseError, "subdivision factor must be positive");
  if (k == 1) return x;
  const Graph& g = x.graph;
  std::vector<std::string> vertices = g.vertex_names;
  std::vector<std::string> edges;
  std::vector<int> from, to;
  for (int e = 0; e < g.n_edges(); ++e) {
    for (int j = 1; j < k; ++j)
      vertices.push_back(g.edge_names[e] + "." + std::to_string(j));
    for (int j = 0; j < k; ++j) {
      edges.push_back(g.edge_names[e] + "." + std::to_string(j));
      int a = (j == 0) ? g.edge_from[e] : g.n_vertices() + e * (k - 1) + (j - 1);
      int b = (j == k - 1) ? g.edge_to[e] : g.n_vertices() + e * (k - 1) + j;
      from.push_back(a);
      to.push_back(b);
    }
  }
  Graph sub = make_graph(std::move(vertices), std::move(edges), std::move(from), std::move(to));
  std::vector<Fin> fins;
  fins.reserve(x.fins.size());
  for (const Fin& f : x.fins) {
    Fin nf;
    nf.id = f.id;
    nf.cycle.reserve(f.cycle.size() * static_cast<size_t>(k));
    for (int d : f.cycle) {
      int e = d >> 1;
      if ((d & 1) == 0) {
        for (int j = 0; j < k; ++j) nf.cycle.push_back(2 * (e * k + j));
      } else {
        for (int j = k - 1; j >= 0; --j) nf.cycle.push_back(2 * (e * k + j) + 1);
      }
    }
    fins.push_back(std::move(nf));
  }
  return build_graph_with_fins(std::move(sub), std::move(fins), x.colours);
}

}  // namespace fincover
