#pragma once

// Seeded random instances for property tests. Everything draws from an
// mt19937_64 via modulo, never from distribution objects, so the sequences
// are identical across runs and toolchains.

#include <random>
#include <string>
#include <vector>

#include "fincover/covering.hpp"
#include "fincover/fins.hpp"

namespace testsupport {

using namespace fincover;

inline int draw(std::mt19937_64& rng, int n) { return static_cast<int>(rng() % static_cast<std::uint64_t>(n)); }

// Connected graph: spanning tree plus a few extra edges (loops allowed).
inline Graph random_connected_graph(std::mt19937_64& rng, int max_v, int max_extra) {
  int nv = 1 + draw(rng, max_v);
  std::vector<std::string> vnames;
  for (int v = 0; v < nv; ++v) vnames.push_back("v" + std::to_string(v));
  std::vector<std::string> enames;
  std::vector<int> from, to;
  for (int v = 1; v < nv; ++v) {
    from.push_back(draw(rng, v));
    to.push_back(v);
    enames.push_back("e" + std::to_string(enames.size()));
  }
  int extra = 1 + draw(rng, max_extra);
  for (int i = 0; i < extra; ++i) {
    from.push_back(draw(rng, nv));
    to.push_back(draw(rng, nv));
    enames.push_back("e" + std::to_string(enames.size()));
  }
  return make_graph(std::move(vnames), std::move(enames), std::move(from), std::move(to));
}

// Closed immersed loop by a non-backtracking random walk; empty on failure.
inline std::vector<int> random_fin_cycle(const Graph& g, std::mt19937_64& rng, int max_len) {
  for (int attempt = 0; attempt < 40; ++attempt) {
    int start = draw(rng, g.n_vertices());
    std::vector<int> cyc;
    int at = start;
    for (int step = 0; step < max_len; ++step) {
      std::vector<int> cands;
      for (int d : g.star[static_cast<size_t>(at)]) {
        if (!cyc.empty() && d == dart_reverse(cyc.back())) continue;
        cands.push_back(d);
      }
      if (cands.empty()) break;
      int d = cands[static_cast<size_t>(draw(rng, static_cast<int>(cands.size())))];
      cyc.push_back(d);
      at = g.dart_terminus(d);
      if (at == start && cyc.size() >= 1 && cyc.back() != dart_reverse(cyc.front())) return cyc;
    }
  }
  return {};
}

inline GraphWithFins random_gwf(std::mt19937_64& rng, int max_v = 8, int max_extra = 4,
                                int max_fins = 3) {
  Graph g = random_connected_graph(rng, max_v, max_extra);
  std::vector<Fin> fins;
  int want = draw(rng, max_fins + 1);
  for (int i = 0; i < want; ++i) {
    std::vector<int> cyc = random_fin_cycle(g, rng, 2 * g.n_edges() + 2);
    if (cyc.empty()) continue;
    fins.push_back(Fin{"S" + std::to_string(fins.size()), std::move(cyc)});
  }
  return build_graph_with_fins(std::move(g), std::move(fins));
}

// Permutation voltage cover: vertices (v, i), one edge (e, i) from
// (from_e, i) to (to_e, sigma_e(i)). Always a covering of the base graph.
inline GraphCover random_permutation_cover(const Graph& base, int degree, std::mt19937_64& rng) {
  std::vector<std::vector<int>> sigma(static_cast<size_t>(base.n_edges()));
  for (int e = 0; e < base.n_edges(); ++e) {
    std::vector<int>& p = sigma[static_cast<size_t>(e)];
    p.resize(static_cast<size_t>(degree));
    for (int i = 0; i < degree; ++i) p[static_cast<size_t>(i)] = i;
    for (int i = degree - 1; i > 0; --i) std::swap(p[static_cast<size_t>(i)], p[static_cast<size_t>(draw(rng, i + 1))]);
  }
  std::vector<std::string> vnames;
  std::vector<int> vmap;
  for (int v = 0; v < base.n_vertices(); ++v)
    for (int i = 0; i < degree; ++i) {
      vnames.push_back(base.vertex_names[static_cast<size_t>(v)] + "^" + std::to_string(i));
      vmap.push_back(v);
    }
  auto vid = [&](int v, int i) { return v * degree + i; };
  std::vector<std::string> enames;
  std::vector<int> from, to;
  std::vector<int> dmap;
  for (int e = 0; e < base.n_edges(); ++e)
    for (int i = 0; i < degree; ++i) {
      enames.push_back(base.edge_names[static_cast<size_t>(e)] + "^" + std::to_string(i));
      from.push_back(vid(base.edge_from[static_cast<size_t>(e)], i));
      to.push_back(vid(base.edge_to[static_cast<size_t>(e)], sigma[static_cast<size_t>(e)][static_cast<size_t>(i)]));
      dmap.push_back(2 * e);
      dmap.push_back(2 * e + 1);
    }
  Graph total = make_graph(std::move(vnames), std::move(enames), std::move(from), std::move(to));
  return GraphCover{std::move(total), std::move(vmap), std::move(dmap)};
}

}  // namespace testsupport
