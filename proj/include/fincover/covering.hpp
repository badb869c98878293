#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fincover/fins.hpp"

namespace fincover {

// Image of a source fin: traversing the source fin forward reads the target
// fin in direction `reversed`, `degree` times, starting at `rotation`
// (normalized to [0, target length)).
struct FinImage {
  int fin = -1;
  int rotation = 0;
  int degree = 1;
  bool reversed = false;
};

struct CoveringMap {
  GraphWithFins source;
  GraphWithFins target;
  std::vector<int> vertex_map;
  std::vector<int> dart_map;
  std::vector<FinImage> fin_map;
};

// Plain graph covering, used as input when the fin structure is induced.
struct GraphCover {
  Graph total;
  std::vector<int> vertex_map;
  std::vector<int> dart_map;
};

struct CoveringReport {
  bool pass = true;
  int degree = 0;
  std::vector<std::string> failures;

  void fail(std::string why) {
    pass = false;
    failures.push_back(std::move(why));
  }
};

inline void check_graph_cover_maps(const Graph& src, const Graph& tgt,
                                   const std::vector<int>& vertex_map,
                                   const std::vector<int>& dart_map, CoveringReport& r) {
  if (static_cast<int>(vertex_map.size()) != src.n_vertices() ||
      static_cast<int>(dart_map.size()) != src.n_darts()) {
    r.fail("map arrays disagree with source sizes");
    return;
  }
  for (int v = 0; v < src.n_vertices(); ++v)
    if (vertex_map[v] < 0 || vertex_map[v] >= tgt.n_vertices()) {
      r.fail("vertex image out of range");
      return;
    }
  for (int d = 0; d < src.n_darts(); ++d)
    if (dart_map[d] < 0 || dart_map[d] >= tgt.n_darts()) {
      r.fail("dart image out of range");
      return;
    }
  for (int d = 0; d < src.n_darts(); ++d) {
    if (dart_map[dart_reverse(d)] != dart_reverse(dart_map[d]))
      r.fail("dart map does not commute with reversal at " + src.dart_name(d));
    if (vertex_map[src.dart_origin(d)] != tgt.dart_origin(dart_map[d]))
      r.fail("dart map does not commute with origin at " + src.dart_name(d));
  }
  if (!r.pass) return;
  // Local bijectivity at every source vertex.
  for (int v = 0; v < src.n_vertices(); ++v) {
    int w = vertex_map[v];
    if (src.valence(v) != tgt.valence(w)) {
      r.fail("valence mismatch over vertex " + src.vertex_names[v]);
      continue;
    }
    std::vector<char> hit(tgt.star[w].size(), 0);
    for (int d : src.star[v]) {
      int img = dart_map[d];
      size_t slot = 0;
      for (; slot < tgt.star[w].size(); ++slot)
        if (tgt.star[w][slot] == img) break;
      if (slot == tgt.star[w].size() || hit[slot]) {
        r.fail("star map not a bijection at vertex " + src.vertex_names[v]);
        break;
      }
      hit[slot] = 1;
    }
  }
  if (!r.pass) return;
  // Constant fibre cardinality.
  if (tgt.n_vertices() == 0 || src.n_vertices() % tgt.n_vertices() != 0) {
    r.fail("vertex count is not a multiple of the target's");
    return;
  }
  int d = src.n_vertices() / tgt.n_vertices();
  if (d < 1) {
    r.fail("empty source");
    return;
  }
  std::vector<int> fibre(tgt.n_vertices(), 0);
  for (int v = 0; v < src.n_vertices(); ++v) fibre[vertex_map[v]]++;
  for (int w = 0; w < tgt.n_vertices(); ++w)
    if (fibre[w] != d) {
      r.fail("fibre over vertex " + tgt.vertex_names[w] + " has size " + std::to_string(fibre[w]) +
             ", expected " + std::to_string(d));
    }
  r.degree = d;
}

// Full verification: graph covering, fin compatibility, colour preservation.
inline CoveringReport verify_covering(const CoveringMap& c) {
  CoveringReport r;
  check_graph_cover_maps(c.source.graph, c.target.graph, c.vertex_map, c.dart_map, r);
  if (static_cast<int>(c.fin_map.size()) != c.source.n_fins()) {
    r.fail("fin map size disagrees with source fin count");
    return r;
  }
  for (int f = 0; f < c.source.n_fins() && r.pass; ++f) {
    const FinImage& im = c.fin_map[f];
    if (im.fin < 0 || im.fin >= c.target.n_fins()) {
      r.fail("fin image out of range for fin " + c.source.fins[f].id);
      continue;
    }
    const Fin& sf = c.source.fins[f];
    const Fin& tf = c.target.fins[im.fin];
    int lt = tf.length();
    if (im.degree < 1 || sf.length() != im.degree * lt) {
      r.fail("fin " + sf.id + " has length " + std::to_string(sf.length()) +
             ", not degree*target length");
      continue;
    }
    if (im.rotation < 0 || im.rotation >= lt) {
      r.fail("fin " + sf.id + " rotation not normalized");
      continue;
    }
    std::vector<int> oc = oriented_cycle(tf, im.reversed);
    for (int i = 0; i < sf.length(); ++i) {
      if (c.dart_map[sf.cycle[i]] != oc[(im.rotation + i) % lt]) {
        r.fail("fin " + sf.id + " does not trace its image at position " + std::to_string(i));
        break;
      }
    }
    const std::string& fwd = c.source.colours[f][0];
    const std::string& bwd = c.source.colours[f][1];
    if (fwd != c.target.colour({im.fin, im.reversed}) ||
        bwd != c.target.colour({im.fin, !im.reversed}))
      r.fail("fin " + sf.id + " does not preserve colours");
  }
  return r;
}

inline OrientedFin map_oriented_fin(const CoveringMap& c, OrientedFin s) {
  const FinImage& im = c.fin_map[s.fin];
  return {im.fin, s.reversed != im.reversed};
}

// Finds the (fin, rotation, degree, direction) presentation of a dart cycle
// inside the target's fin structure, or nothing if it traces no fin.
inline std::optional<FinImage> locate_fin_image(const std::vector<int>& image_cycle,
                                                const GraphWithFins& target) {
  const int n = static_cast<int>(image_cycle.size());
  for (int g = 0; g < target.n_fins(); ++g) {
    const Fin& tf = target.fins[g];
    int lt = tf.length();
    if (n % lt != 0) continue;
    for (int rev = 0; rev < 2; ++rev) {
      std::vector<int> oc = oriented_cycle(tf, rev != 0);
      for (int rot = 0; rot < lt; ++rot) {
        if (oc[rot] != image_cycle[0]) continue;
        bool ok = true;
        for (int i = 1; i < n; ++i)
          if (image_cycle[i] != oc[(rot + i) % lt]) {
            ok = false;
            break;
          }
        if (ok) {
          FinImage im;
          im.fin = g;
          im.rotation = rot;
          im.degree = n / lt;
          im.reversed = (rev != 0);
          return im;
        }
      }
    }
  }
  return std::nullopt;
}

inline std::optional<std::vector<FinImage>> derive_fin_map(const GraphWithFins& source,
                                                           const std::vector<int>& dart_map,
                                                           const GraphWithFins& target) {
  std::vector<FinImage> out;
  out.reserve(source.fins.size());
  for (const Fin& f : source.fins) {
    std::vector<int> image;
    image.reserve(f.cycle.size());
    for (int d : f.cycle) image.push_back(dart_map[d]);
    auto im = locate_fin_image(image, target);
    if (!im) return std::nullopt;
    out.push_back(*im);
  }
  return out;
}

// Lifts the fin structure of `target` through a verified graph covering.
// Every component of every fin preimage becomes a fin; colours pull back.
inline CoveringMap induced_cover(const GraphWithFins& target, const GraphCover& gc) {
  CoveringReport r;
  check_graph_cover_maps(gc.total, target.graph, gc.vertex_map, gc.dart_map, r);
  if (!r.pass)
    throw Error(ErrorCode::InvalidGraphCover, gc.total.vertex_names.empty() || r.failures.empty()
                                                  ? "invalid graph cover"
                                                  : r.failures.front());
  const Graph& up = gc.total;
  // star-indexed lookup: lift of target dart t at cover vertex v.
  auto lift_dart = [&](int v, int t) {
    for (int d : up.star[v])
      if (gc.dart_map[d] == t) return d;
    return -1;
  };
  std::vector<Fin> fins;
  std::vector<FinColours> colours;
  std::vector<FinImage> fin_map;
  for (int f = 0; f < target.n_fins(); ++f) {
    const Fin& tf = target.fins[f];
    int l = tf.length();
    int base = target.graph.dart_origin(tf.cycle[0]);
    std::vector<char> used(up.vertex_names.size(), 0);
    int comp = 0;
    for (int v0 = 0; v0 < up.n_vertices(); ++v0) {
      if (gc.vertex_map[v0] != base || used[v0]) continue;
      Fin nf;
      nf.id = tf.id + "^" + std::to_string(comp++);
      int v = v0;
      int i = 0;
      do {
        used[v] = 1;
        for (int j = 0; j < l; ++j) {
          int d = lift_dart(v, tf.cycle[j]);
          nf.cycle.push_back(d);
          v = up.dart_terminus(d);
        }
        ++i;
      } while (v != v0);
      fins.push_back(std::move(nf));
      colours.push_back(target.colours[f]);
      FinImage im;
      im.fin = f;
      im.rotation = 0;
      im.degree = i;
      im.reversed = false;
      fin_map.push_back(im);
    }
  }
  CoveringMap c;
  c.source = build_graph_with_fins(up, std::move(fins), std::move(colours));
  c.target = target;
  c.vertex_map = gc.vertex_map;
  c.dart_map = gc.dart_map;
  c.fin_map = std::move(fin_map);
  return c;
}

// g after f, for coverings f: Z -> Y and g: Y -> X. The composite fin map is
// re-derived from the composed dart map, which keeps rotation bookkeeping in
// one place (locate_fin_image).
inline CoveringMap compose_coverings(const CoveringMap& f, const CoveringMap& g) {
  CoveringMap c;
  c.source = f.source;
  c.target = g.target;
  c.vertex_map.resize(f.vertex_map.size());
  for (size_t v = 0; v < f.vertex_map.size(); ++v) c.vertex_map[v] = g.vertex_map[f.vertex_map[v]];
  c.dart_map.resize(f.dart_map.size());
  for (size_t d = 0; d < f.dart_map.size(); ++d) c.dart_map[d] = g.dart_map[f.dart_map[d]];
  auto fm = derive_fin_map(c.source, c.dart_map, c.target);
  if (!fm) throw Error(ErrorCode::InvalidGraphCover, "composite does not respect fins");
  c.fin_map = std::move(*fm);
  return c;
}

}  // namespace fincover
