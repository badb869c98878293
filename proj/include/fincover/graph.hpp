#pragma once

#include <map>
#include <string>
#include <vector>

#include "fincover/errors.hpp"

namespace fincover {

// Undirected multigraph with named vertices and edges. Edge e carries two
// darts 2e (forward, from->to) and 2e+1 (backward); reversal is index xor 1,
// so reversal is a fixed-point-free involution by construction. Loops and
// parallel edges are allowed.
struct Graph {
  std::vector<std::string> vertex_names;
  std::vector<std::string> edge_names;
  std::vector<int> edge_from;
  std::vector<int> edge_to;
  std::vector<std::vector<int>> star;  // darts with origin v, in dart order

  int n_vertices() const { return static_cast<int>(vertex_names.size()); }
  int n_edges() const { return static_cast<int>(edge_names.size()); }
  int n_darts() const { return 2 * n_edges(); }

  int dart_origin(int d) const { return (d & 1) ? edge_to[d >> 1] : edge_from[d >> 1]; }
  int dart_terminus(int d) const { return dart_origin(d ^ 1); }
  std::string dart_name(int d) const { return edge_names[d >> 1] + ((d & 1) ? "-" : "+"); }
  int valence(int v) const { return static_cast<int>(star[v].size()); }
};

inline int dart_reverse(int d) { return d ^ 1; }

inline void rebuild_star(Graph& g) {
  g.star.assign(g.vertex_names.size(), {});
  for (int d = 0; d < g.n_darts(); ++d) g.star[g.dart_origin(d)].push_back(d);
}

// Validates name uniqueness and endpoint existence; indices are resolved by
// the JSON layer, so here endpoints are plain bounds checks.
inline Graph make_graph(std::vector<std::string> vertices, std::vector<std::string> edges,
                        std::vector<int> from, std::vector<int> to) {
  Graph g;
  g.vertex_names = std::move(vertices);
  g.edge_names = std::move(edges);
  g.edge_from = std::move(from);
  g.edge_to = std::move(to);
  if (g.edge_from.size() != g.edge_names.size() || g.edge_to.size() != g.edge_names.size())
    throw Error(ErrorCode::ParseError, "edge arrays disagree in length");
  std::map<std::string, int> seen;
  for (int v = 0; v < g.n_vertices(); ++v) {
    if (g.vertex_names[v].empty() || !seen.emplace(g.vertex_names[v], v).second)
      throw Error(ErrorCode::ParseError, "duplicate or empty vertex name '" + g.vertex_names[v] + "'");
  }
  seen.clear();
  for (int e = 0; e < g.n_edges(); ++e) {
    if (g.edge_names[e].empty() || !seen.emplace(g.edge_names[e], e).second)
      throw Error(ErrorCode::ParseError, "duplicate or empty edge name '" + g.edge_names[e] + "'");
    if (g.edge_from[e] < 0 || g.edge_from[e] >= g.n_vertices() || g.edge_to[e] < 0 ||
        g.edge_to[e] >= g.n_vertices())
      throw Error(ErrorCode::ParseError, "edge '" + g.edge_names[e] + "' has a missing endpoint");
  }
  rebuild_star(g);
  return g;
}

inline bool is_connected(const Graph& g) {
  if (g.n_vertices() == 0) return false;
  std::vector<char> seen(g.vertex_names.size(), 0);
  std::vector<int> stack{0};
  seen[0] = 1;
  int reached = 1;
  while (!stack.empty()) {
    int v = stack.back();
    stack.pop_back();
    for (int d : g.star[v]) {
      int w = g.dart_terminus(d);
      if (!seen[w]) {
        seen[w] = 1;
        ++reached;
        stack.push_back(w);
      }
    }
  }
  return reached == g.n_vertices();
}

inline int euler_characteristic(const Graph& g) { return g.n_vertices() - g.n_edges(); }

}  // namespace fincover
