#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "fincover/covering.hpp"
#include "fincover/local_types.hpp"
#include "fincover/rational.hpp"

namespace fincover {

// Common finite covers of two graphs with coloured fins.
//
// Everything happens at the subdivided scale of the joint type refinement
// and is contracted back to the original scale at the end. The building
// blocks are instances of vertex pairs: a pair of same-type vertices with a
// star bijection and a compatible bijection of the fin arcs through them.
// Gluing data lives on faces: an edge of the first input together with a
// matching dart of the second and the induced bijection of fin crossings.

// Oriented fin arc through a vertex, anchored at a fin position.
struct OArc {
  int fin = 0, pos = 0;
  bool rev = false;
  int slot_in = 0, slot_out = 0;  // darts at the vertex; traversal enters
                                  // along reverse(slot_in), leaves by slot_out
  Hash label = 0;                 // stable label of this orientation
  Hash rlabel = 0;                // stable label of the reversed arc
};

// Fin crossing along a dart: consecutive arcs at its two endpoints.
struct Crossing {
  int fin = 0, pos = 0;
  bool rev = false;
  int tail_arc = 0;  // index into the arc list at origin(dart)
  int head_arc = 0;  // index into the arc list at terminus(dart)
};

struct PairInstance {
  int v1 = 0, v2 = 0;        // subdivided-scale vertices of the two inputs
  Hash type = 0;             // shared stable vertex label
  std::vector<int> dart_to;  // star(v1) slot k -> dart of the second input
  std::vector<int> arc_to;   // arc index at v1 -> arc index at v2
};

struct FaceInstance {
  int e1 = 0;            // subdivided edge of the first input
  int m = 0;             // image dart of the forward dart 2*e1
  std::vector<int> chi;  // crossing index along 2*e1 -> crossing index along m
  Hash t_left = 0, t_right = 0;
  std::vector<std::pair<int, int>> left, right;  // (instance, slot dart)
};

struct LeightonProblem {
  GraphWithFins x1, x2;
  TypeTable types;  // joint refinement of {x1, x2}
  std::vector<std::vector<OArc>> arcs1, arcs2;            // per sub vertex
  std::vector<std::vector<Crossing>> cross1, cross2;      // per sub dart
  std::vector<PairInstance> instances;
  std::vector<FaceInstance> faces;
};

struct HaarWeights {
  std::map<Hash, Int> mu;  // per stable vertex type, minimal positive

  const Int& weight(Hash type) const { return mu.at(type); }
};

struct CommonCoverWitness {
  GraphWithFins common;  // original scale
  CoveringMap to1, to2;
};

namespace detail {

inline std::vector<std::vector<OArc>> build_arcs(const SubScale& s) {
  std::vector<std::vector<OArc>> arcs(s.sub.graph.n_vertices());
  for (int v = 0; v < s.sub.graph.n_vertices(); ++v) {
    for (auto [f, i] : s.arcs_at[v]) {
      const auto& cyc = s.sub.fins[f].cycle;
      const int L = static_cast<int>(cyc.size());
      int a = dart_reverse(cyc[(i + L - 1) % L]);
      int b = cyc[i];
      arcs[v].push_back({f, i, false, a, b, s.oa[f][i].fwd, s.oa[f][i].bwd});
      arcs[v].push_back({f, i, true, b, a, s.oa[f][i].bwd, s.oa[f][i].fwd});
    }
  }
  return arcs;
}

inline std::vector<std::vector<Crossing>> build_crossings(
    const SubScale& s, const std::vector<std::vector<OArc>>& arcs) {
  const Graph& g = s.sub.graph;
  std::vector<std::vector<Crossing>> cross(g.n_darts());
  auto arc_index = [&](int v, int fin, int pos, bool rev) {
    const auto& list = arcs[v];
    for (size_t k = 0; k < list.size(); ++k)
      if (list[k].fin == fin && list[k].pos == pos && list[k].rev == rev)
        return static_cast<int>(k);
    throw Error(ErrorCode::DanglingDart, "arc lookup failed");
  };
  for (size_t f = 0; f < s.sub.fins.size(); ++f) {
    const auto& cyc = s.sub.fins[f].cycle;
    const int L = static_cast<int>(cyc.size());
    for (int i = 0; i < L; ++i) {
      int succ = (i + 1) % L;
      int d = cyc[i];
      cross[d].push_back({static_cast<int>(f), i, false,
                          arc_index(g.dart_origin(d), static_cast<int>(f), i, false),
                          arc_index(g.dart_terminus(d), static_cast<int>(f), succ, false)});
      int rd = dart_reverse(d);
      cross[rd].push_back({static_cast<int>(f), i, true,
                           arc_index(g.dart_origin(rd), static_cast<int>(f), succ, true),
                           arc_index(g.dart_terminus(rd), static_cast<int>(f), i, true)});
    }
  }
  return cross;
}

// All admissible instances at one vertex pair: star bijections preserving
// terminus types, extended by every arc bijection that preserves labels and
// commutes with arc reversal.
inline void enumerate_instances_at(const SubScale& s1, const SubScale& s2,
                                   const std::vector<std::vector<OArc>>& arcs1,
                                   const std::vector<std::vector<OArc>>& arcs2, int v1, int v2,
                                   std::vector<PairInstance>& out) {
  if (s1.vlabel[v1] != s2.vlabel[v2]) return;
  const auto& star1 = s1.sub.graph.star[v1];
  const auto& star2 = s2.sub.graph.star[v2];
  if (star1.size() != star2.size()) return;
  const int deg = static_cast<int>(star1.size());
  const auto& a1 = arcs1[v1];
  const auto& a2 = arcs2[v2];
  if (a1.size() != a2.size()) return;

  std::vector<int> assign(deg, -1);
  std::vector<bool> used(deg, false);

  auto extend_arcs = [&] {
    // Cells: arcs grouped by (mapped slots, label, reversed label).
    using Key = std::array<Hash, 4>;
    std::map<Key, std::vector<int>> cells1, cells2;
    // slot -> mapped dart of the second input
    std::map<int, int> dmap;
    for (int k = 0; k < deg; ++k) dmap[star1[k]] = star2[assign[k]];
    for (size_t k = 0; k < a1.size(); ++k)
      cells1[{static_cast<Hash>(dmap.at(a1[k].slot_in)), static_cast<Hash>(dmap.at(a1[k].slot_out)),
              a1[k].label, a1[k].rlabel}]
          .push_back(static_cast<int>(k));
    for (size_t k = 0; k < a2.size(); ++k)
      cells2[{static_cast<Hash>(a2[k].slot_in), static_cast<Hash>(a2[k].slot_out), a2[k].label,
              a2[k].rlabel}]
          .push_back(static_cast<int>(k));
    if (cells1.size() != cells2.size()) return;
    for (auto& [key, lst] : cells1) {
      auto it = cells2.find(key);
      if (it == cells2.end() || it->second.size() != lst.size()) return;
    }

    // Reverse pairing inside the arc lists: arcs come in adjacent pairs
    // (fwd at index 2j, bwd at 2j+1).
    auto rev_of = [](int idx) { return idx ^ 1; };

    // Primary cells carry free bijections; mirrored cells follow.
    std::vector<Key> primary;
    for (auto& [key, lst] : cells1) {
      Key mirror{key[1], key[0], key[3], key[2]};
      if (key <= mirror) primary.push_back(key);
    }
    std::vector<std::vector<int>> perms(primary.size());
    for (size_t pi = 0; pi < primary.size(); ++pi) {
      perms[pi].resize(cells1.at(primary[pi]).size());
      for (size_t j = 0; j < perms[pi].size(); ++j) perms[pi][j] = static_cast<int>(j);
    }
    std::vector<int> arc_to(a1.size(), -1);
    auto emit = [&] {
      for (size_t pi = 0; pi < primary.size(); ++pi) {
        const auto& c1 = cells1.at(primary[pi]);
        const auto& c2 = cells2.at(primary[pi]);
        for (size_t j = 0; j < c1.size(); ++j) {
          arc_to[c1[j]] = c2[perms[pi][j]];
          arc_to[rev_of(c1[j])] = rev_of(c2[perms[pi][j]]);
        }
      }
      PairInstance inst;
      inst.v1 = v1;
      inst.v2 = v2;
      inst.type = s1.vlabel[v1];
      inst.dart_to.resize(deg);
      for (int k = 0; k < deg; ++k) inst.dart_to[k] = star2[assign[k]];
      inst.arc_to = arc_to;
      out.push_back(std::move(inst));
    };
    auto rec = [&](auto&& self, size_t pi) -> void {
      if (pi == primary.size()) {
        emit();
        return;
      }
      std::vector<int>& p = perms[pi];
      std::sort(p.begin(), p.end());
      do {
        self(self, pi + 1);
      } while (std::next_permutation(p.begin(), p.end()));
    };
    rec(rec, 0);
  };

  auto rec = [&](auto&& self, int k) -> void {
    if (k == deg) {
      extend_arcs();
      return;
    }
    Hash want = s1.vlabel[s1.sub.graph.dart_terminus(star1[k])];
    for (int j = 0; j < deg; ++j) {
      if (used[j]) continue;
      if (s2.vlabel[s2.sub.graph.dart_terminus(star2[j])] != want) continue;
      used[j] = true;
      assign[k] = j;
      self(self, k + 1);
      used[j] = false;
      assign[k] = -1;
    }
  };
  rec(rec, 0);
}

}  // namespace detail

inline LeightonProblem enumerate_admissible_pairs(const GraphWithFins& x1,
                                                  const GraphWithFins& x2) {
  LeightonProblem lp;
  lp.x1 = x1;
  lp.x2 = x2;
  lp.types = refine_local_types({x1, x2});
  const SubScale& s1 = lp.types.scales[0];
  const SubScale& s2 = lp.types.scales[1];
  lp.arcs1 = detail::build_arcs(s1);
  lp.arcs2 = detail::build_arcs(s2);
  lp.cross1 = detail::build_crossings(s1, lp.arcs1);
  lp.cross2 = detail::build_crossings(s2, lp.arcs2);

  for (int v1 = 0; v1 < s1.sub.graph.n_vertices(); ++v1)
    for (int v2 = 0; v2 < s2.sub.graph.n_vertices(); ++v2)
      detail::enumerate_instances_at(s1, s2, lp.arcs1, lp.arcs2, v1, v2, lp.instances);

  std::vector<bool> hit1(s1.sub.graph.n_vertices(), false), hit2(s2.sub.graph.n_vertices(), false);
  for (const PairInstance& p : lp.instances) {
    hit1[p.v1] = true;
    hit2[p.v2] = true;
  }
  for (int v = 0; v < s1.sub.graph.n_vertices(); ++v)
    if (!hit1[v])
      throw Error(ErrorCode::NoAdmissiblePairs,
                  "no admissible pair instance covers vertex " + s1.sub.graph.vertex_names[v] +
                      " of the first input");
  for (int v = 0; v < s2.sub.graph.n_vertices(); ++v)
    if (!hit2[v])
      throw Error(ErrorCode::NoAdmissiblePairs,
                  "no admissible pair instance covers vertex " + s2.sub.graph.vertex_names[v] +
                      " of the second input");

  // Faces: deduplicated gluing data, each slot of each instance lands in
  // exactly one face, on the side given by the parity of its slot dart.
  std::map<std::tuple<int, int, std::vector<int>>, int> face_ids;
  for (size_t p = 0; p < lp.instances.size(); ++p) {
    const PairInstance& inst = lp.instances[p];
    const auto& star1 = s1.sub.graph.star[inst.v1];
    for (size_t k = 0; k < star1.size(); ++k) {
      int d1 = star1[k];
      int d2 = inst.dart_to[k];
      bool left = (d1 & 1) == 0;
      int e1 = d1 >> 1;
      int m = left ? d2 : dart_reverse(d2);
      const auto& crossings = lp.cross1[2 * e1];
      const auto& target = lp.cross2[m];
      std::vector<int> chi(crossings.size());
      for (size_t c = 0; c < crossings.size(); ++c) {
        int image_arc =
            left ? inst.arc_to[crossings[c].tail_arc] : inst.arc_to[crossings[c].head_arc];
        int found = -1;
        for (size_t t = 0; t < target.size(); ++t) {
          int probe = left ? target[t].tail_arc : target[t].head_arc;
          if (probe == image_arc) {
            found = static_cast<int>(t);
            break;
          }
        }
        if (found < 0)
          throw Error(ErrorCode::NoAdmissiblePairs, "crossing image missing along matched dart");
        chi[static_cast<size_t>(c)] = found;
      }
      auto key = std::make_tuple(e1, m, chi);
      auto [it, fresh] = face_ids.emplace(key, static_cast<int>(lp.faces.size()));
      if (fresh) {
        FaceInstance face;
        face.e1 = e1;
        face.m = m;
        face.chi = chi;
        face.t_left = s1.vlabel[s1.sub.graph.dart_origin(2 * e1)];
        face.t_right = s1.vlabel[s1.sub.graph.dart_terminus(2 * e1)];
        lp.faces.push_back(std::move(face));
      }
      FaceInstance& face = lp.faces[static_cast<size_t>(it->second)];
      (left ? face.left : face.right).push_back({static_cast<int>(p), d1});
    }
  }
  return lp;
}

struct ExtensionCount {
  int face = 0;
  Int left = 0, right = 0;
};

inline std::vector<ExtensionCount> extension_counts(const LeightonProblem& lp) {
  std::vector<ExtensionCount> out;
  for (size_t f = 0; f < lp.faces.size(); ++f)
    out.push_back({static_cast<int>(f), Int(lp.faces[f].left.size()),
                   Int(lp.faces[f].right.size())});
  return out;
}

// Weight per vertex type from the face ratio equations
//   mu(t_left) * |left| = mu(t_right) * |right|,
// propagated over a spanning tree and checked on every face; scaled to the
// minimal positive integers per connected component of the type graph.
inline HaarWeights haar_weights(const LeightonProblem& lp) {
  std::set<Hash> types;
  for (const PairInstance& p : lp.instances) types.insert(p.type);

  for (const FaceInstance& f : lp.faces)
    if (f.left.empty() || f.right.empty())
      throw Error(ErrorCode::InconsistentRatios,
                  "face over edge " + lp.types.scales[0].sub.graph.edge_names[f.e1] +
                      " admits extensions on one side only");

  std::map<Hash, Rational> pot;
  std::map<Hash, std::pair<Hash, int>> parent;  // child -> (parent, face)
  std::map<Hash, int> component;
  int comp = 0;
  for (Hash root : types) {
    if (pot.count(root)) continue;
    pot[root] = 1;
    component[root] = comp;
    bool grew = true;
    while (grew) {
      grew = false;
      for (size_t fi = 0; fi < lp.faces.size(); ++fi) {
        const FaceInstance& f = lp.faces[fi];
        bool hl = pot.count(f.t_left) > 0, hr = pot.count(f.t_right) > 0;
        Rational nl(static_cast<long>(f.left.size())), nr(static_cast<long>(f.right.size()));
        if (hl && hr) {
          if (pot[f.t_left] * nl != pot[f.t_right] * nr) {
            std::string cyc;
            for (Hash h = f.t_left; parent.count(h); h = parent[h].first)
              cyc += " <- " + hash_hex(h);
            for (Hash h = f.t_right; parent.count(h); h = parent[h].first)
              cyc += " <- " + hash_hex(h);
            throw Error(ErrorCode::InconsistentRatios,
                        "inconsistent extension ratios on the cycle through edge " +
                            lp.types.scales[0].sub.graph.edge_names[f.e1] + " (types" + cyc + ")");
          }
        } else if (hl && !hr) {
          pot[f.t_right] = pot[f.t_left] * nl / nr;
          parent[f.t_right] = {f.t_left, static_cast<int>(fi)};
          component[f.t_right] = component[f.t_left];
          grew = true;
        } else if (hr && !hl) {
          pot[f.t_left] = pot[f.t_right] * nr / nl;
          parent[f.t_left] = {f.t_right, static_cast<int>(fi)};
          component[f.t_left] = component[f.t_right];
          grew = true;
        }
      }
    }
    ++comp;
  }

  HaarWeights w;
  for (int c = 0; c < comp; ++c) {
    Int scale = 1;
    for (auto& [t, r] : pot)
      if (component[t] == c) scale = int_lcm(scale, rat_den(r));
    Int g = 0;
    for (auto& [t, r] : pot)
      if (component[t] == c) g = int_gcd(g, rat_to_int(r * Rational(scale)));
    for (auto& [t, r] : pot)
      if (component[t] == c) w.mu[t] = rat_to_int(r * Rational(scale)) / g;
  }
  for (auto& [t, v] : w.mu)
    if (v <= 0) throw Error(ErrorCode::NonPositiveSolution, "nonpositive weight");
  return w;
}

// Builds the common cover: weight-many copies of every instance, edges from
// pairing left and right slots of each face in lexicographic order, then
// contraction of the midpoint fibres back to the original scale.
inline CommonCoverWitness assemble_common_cover(const LeightonProblem& lp, const HaarWeights& w,
                                                bool component_only = false) {
  const SubScale& s1 = lp.types.scales[0];
  const SubScale& s2 = lp.types.scales[1];

  // Copy layout: copies of instance p get global indices offset[p] + c.
  std::vector<long> offset(lp.instances.size() + 1, 0);
  for (size_t p = 0; p < lp.instances.size(); ++p) {
    Int cnt = w.weight(lp.instances[p].type);
    offset[p + 1] = offset[p] + cnt.convert_to<long>();
  }
  const long n_copies = offset[lp.instances.size()];

  std::vector<std::string> names(static_cast<size_t>(n_copies));
  for (size_t p = 0; p < lp.instances.size(); ++p)
    for (long c = offset[p]; c < offset[p + 1]; ++c)
      names[static_cast<size_t>(c)] = s1.sub.graph.vertex_names[lp.instances[p].v1] + "~" +
                                      s2.sub.graph.vertex_names[lp.instances[p].v2] + "#" +
                                      std::to_string(p) + "." + std::to_string(c - offset[p]);

  // Sub-scale edges from face pairings.
  struct SubEdge {
    long from = 0, to = 0;  // copy indices (left, right)
    int d1 = 0, d2 = 0;     // images of the forward dart under the two legs
  };
  std::vector<SubEdge> sub_edges;
  std::map<std::pair<long, int>, std::pair<long, bool>> slot_edge;  // (copy, slot dart) -> (edge, side)
  for (const FaceInstance& f : lp.faces) {
    std::vector<std::pair<long, int>> lefts, rights;
    for (auto [p, d1] : f.left)
      for (long c = offset[static_cast<size_t>(p)]; c < offset[static_cast<size_t>(p) + 1]; ++c)
        lefts.push_back({c, d1});
    for (auto [p, d1] : f.right)
      for (long c = offset[static_cast<size_t>(p)]; c < offset[static_cast<size_t>(p) + 1]; ++c)
        rights.push_back({c, d1});
    if (lefts.size() != rights.size())
      throw Error(ErrorCode::InconsistentRatios, "face slot totals disagree after weighting");
    for (size_t k = 0; k < lefts.size(); ++k) {
      long eid = static_cast<long>(sub_edges.size());
      sub_edges.push_back({lefts[k].first, rights[k].first, 2 * f.e1, f.m});
      slot_edge[{lefts[k].first, lefts[k].second}] = {eid, false};
      slot_edge[{rights[k].first, rights[k].second}] = {eid, true};
    }
  }

  // Midpoint copies become original-scale edges; original copies survive.
  std::vector<long> orig_index(static_cast<size_t>(n_copies), -1);
  std::vector<long> orig_copies;
  std::vector<long> mid_copies;
  for (size_t p = 0; p < lp.instances.size(); ++p) {
    bool mid = s1.is_midpoint(lp.instances[p].v1);
    if (mid != s2.is_midpoint(lp.instances[p].v2))
      throw Error(ErrorCode::NoAdmissiblePairs, "midpoint paired with an original vertex");
    for (long c = offset[p]; c < offset[p + 1]; ++c)
      (mid ? mid_copies : orig_copies).push_back(c);
  }
  for (size_t k = 0; k < orig_copies.size(); ++k) orig_index[static_cast<size_t>(orig_copies[k])] =
      static_cast<long>(k);

  // Star of each copy at sub scale: slot dart -> (edge, side).
  auto incident = [&](long copy, int slot) -> std::pair<long, bool> {
    auto it = slot_edge.find({copy, slot});
    if (it == slot_edge.end())
      throw Error(ErrorCode::InconsistentRatios, "unfilled slot in the assembled cover");
    return it->second;
  };

  std::vector<std::string> vnames;
  std::vector<int> vmap1, vmap2;
  for (long c : orig_copies) {
    vnames.push_back(names[static_cast<size_t>(c)]);
    size_t p = 0;
    while (!(offset[p] <= c && c < offset[p + 1])) ++p;
    vmap1.push_back(lp.instances[p].v1);  // original vertex keeps its index
    vmap2.push_back(lp.instances[p].v2);
  }

  std::vector<std::string> enames;
  std::vector<int> efrom, eto;
  std::vector<int> edmap1, edmap2;  // image of the forward dart per new edge
  for (long mc : mid_copies) {
    size_t p = 0;
    while (!(offset[p] <= mc && mc < offset[p + 1])) ++p;
    const PairInstance& inst = lp.instances[p];
    const auto& star1 = s1.sub.graph.star[inst.v1];
    if (star1.size() != 2)
      throw Error(ErrorCode::InvalidGraphCover, "midpoint star is not a pair");
    // The two slots: one projects to the back piece, one to the forward piece.
    int d_back = -1, d_fwd = -1;
    for (int d : star1) {
      int piece = d >> 1;
      if ((d & 1) == 1 && piece % 2 == 0) d_back = d;    // reverse of piece 0
      if ((d & 1) == 0 && piece % 2 == 1) d_fwd = d;     // forward of piece 1
    }
    if (d_back < 0 || d_fwd < 0)
      throw Error(ErrorCode::InvalidGraphCover, "midpoint slots are not piece-aligned");
    int e_orig1 = (d_back >> 1) / 2;

    auto [eb, side_b] = incident(mc, d_back);
    auto [ef, side_f] = incident(mc, d_fwd);
    // terminus of the slot dart: the copy at the other end of the sub edge
    long A = side_b ? sub_edges[static_cast<size_t>(eb)].from : sub_edges[static_cast<size_t>(eb)].to;
    long B = side_f ? sub_edges[static_cast<size_t>(ef)].from : sub_edges[static_cast<size_t>(ef)].to;

    // Leg 2 image of the traversal A -> mc -> B.
    int slot_b = -1;
    for (size_t k = 0; k < star1.size(); ++k)
      if (star1[k] == d_back) slot_b = static_cast<int>(k);
    int img_b = inst.dart_to[static_cast<size_t>(slot_b)];  // sub dart of the second input
    int piece_b = img_b >> 1;
    int e_orig2 = piece_b / 2;
    int fwd2;
    if ((img_b & 1) == 1 && piece_b % 2 == 0)
      fwd2 = 2 * e_orig2;  // traversal runs the second input's edge forward
    else if ((img_b & 1) == 0 && piece_b % 2 == 1)
      fwd2 = 2 * e_orig2 + 1;  // traversal runs it backward
    else
      throw Error(ErrorCode::InvalidGraphCover, "midpoint image is not a midpoint slot");

    enames.push_back(lp.x1.graph.edge_names[e_orig1] + "~" + lp.x2.graph.edge_names[e_orig2] +
                     "#" + std::to_string(enames.size()));
    efrom.push_back(static_cast<int>(orig_index[static_cast<size_t>(A)]));
    eto.push_back(static_cast<int>(orig_index[static_cast<size_t>(B)]));
    edmap1.push_back(2 * e_orig1);
    edmap2.push_back(fwd2);
  }

  Graph big = make_graph(std::move(vnames), std::move(enames), std::move(efrom), std::move(eto));

  std::vector<int> dmap1(static_cast<size_t>(big.n_darts()));
  std::vector<int> dmap2(static_cast<size_t>(big.n_darts()));
  for (int e = 0; e < big.n_edges(); ++e) {
    dmap1[static_cast<size_t>(2 * e)] = edmap1[static_cast<size_t>(e)];
    dmap1[static_cast<size_t>(2 * e + 1)] = dart_reverse(edmap1[static_cast<size_t>(e)]);
    dmap2[static_cast<size_t>(2 * e)] = edmap2[static_cast<size_t>(e)];
    dmap2[static_cast<size_t>(2 * e + 1)] = dart_reverse(edmap2[static_cast<size_t>(e)]);
  }

  if (component_only) {
    std::vector<bool> keep(static_cast<size_t>(big.n_vertices()), false);
    std::vector<int> stack{0};
    keep[0] = true;
    while (!stack.empty()) {
      int v = stack.back();
      stack.pop_back();
      for (int d : big.star[static_cast<size_t>(v)]) {
        int u = big.dart_terminus(d);
        if (!keep[static_cast<size_t>(u)]) {
          keep[static_cast<size_t>(u)] = true;
          stack.push_back(u);
        }
      }
    }
    std::vector<int> vnew(static_cast<size_t>(big.n_vertices()), -1);
    std::vector<std::string> kv;
    std::vector<int> kvm1, kvm2;
    for (int v = 0; v < big.n_vertices(); ++v)
      if (keep[static_cast<size_t>(v)]) {
        vnew[static_cast<size_t>(v)] = static_cast<int>(kv.size());
        kv.push_back(big.vertex_names[static_cast<size_t>(v)]);
        kvm1.push_back(vmap1[static_cast<size_t>(v)]);
        kvm2.push_back(vmap2[static_cast<size_t>(v)]);
      }
    std::vector<std::string> ke;
    std::vector<int> kef, ket, kd1, kd2;
    for (int e = 0; e < big.n_edges(); ++e)
      if (keep[static_cast<size_t>(big.edge_from[static_cast<size_t>(e)])]) {
        ke.push_back(big.edge_names[static_cast<size_t>(e)]);
        kef.push_back(vnew[static_cast<size_t>(big.edge_from[static_cast<size_t>(e)])]);
        ket.push_back(vnew[static_cast<size_t>(big.edge_to[static_cast<size_t>(e)])]);
        kd1.push_back(dmap1[static_cast<size_t>(2 * e)]);
        kd2.push_back(dmap2[static_cast<size_t>(2 * e)]);
      }
    big = make_graph(std::move(kv), std::move(ke), std::move(kef), std::move(ket));
    vmap1 = std::move(kvm1);
    vmap2 = std::move(kvm2);
    dmap1.assign(static_cast<size_t>(big.n_darts()), 0);
    dmap2.assign(static_cast<size_t>(big.n_darts()), 0);
    for (int e = 0; e < big.n_edges(); ++e) {
      dmap1[static_cast<size_t>(2 * e)] = kd1[static_cast<size_t>(e)];
      dmap1[static_cast<size_t>(2 * e + 1)] = dart_reverse(kd1[static_cast<size_t>(e)]);
      dmap2[static_cast<size_t>(2 * e)] = kd2[static_cast<size_t>(e)];
      dmap2[static_cast<size_t>(2 * e + 1)] = dart_reverse(kd2[static_cast<size_t>(e)]);
    }
  }

  CommonCoverWitness wit;
  wit.to1 = induced_cover(lp.x1, GraphCover{big, vmap1, dmap1});
  wit.common = wit.to1.source;
  auto fm2 = derive_fin_map(wit.common, dmap2, lp.x2);
  if (!fm2)
    throw Error(ErrorCode::InvalidGraphCover,
                "assembled cover does not project its fins to the second input");
  wit.to2.source = wit.common;
  wit.to2.target = lp.x2;
  wit.to2.vertex_map = vmap2;
  wit.to2.dart_map = dmap2;
  wit.to2.fin_map = *fm2;
  return wit;
}

struct FinEquationEntry {
  std::string colour;
  std::string fin1, fin2;  // oriented fin names, id plus orientation sign
  Rational expected = 0;
  Int actual = 0;
  bool ok = false;
};

struct FinEquationReport {
  bool pass = false;
  bool densities_match = false;
  std::vector<FinEquationEntry> entries;
};

// Boundary sum identity: for same-colour oriented fins S1, S2 of the inputs,
// the total length of fins of the common cover projecting to the pair equals
// |common| * l(S1) * l(S2) / (rho_c * |X1| * |X2|).
inline FinEquationReport verify_fin_equation(const CommonCoverWitness& wit) {
  const GraphWithFins& x1 = wit.to1.target;
  const GraphWithFins& x2 = wit.to2.target;
  const GraphWithFins& xc = wit.common;
  FinEquationReport rep;
  rep.densities_match = true;

  std::map<std::pair<std::pair<int, bool>, std::pair<int, bool>>, Int> bucket;
  for (size_t f = 0; f < xc.fins.size(); ++f)
    for (bool r : {false, true}) {
      OrientedFin of{static_cast<int>(f), r};
      OrientedFin i1 = map_oriented_fin(wit.to1, of);
      OrientedFin i2 = map_oriented_fin(wit.to2, of);
      bucket[{{i1.fin, i1.reversed}, {i2.fin, i2.reversed}}] += xc.fins[f].length();
    }

  rep.pass = true;
  for (size_t f1 = 0; f1 < x1.fins.size(); ++f1)
    for (bool r1 : {false, true})
      for (size_t f2 = 0; f2 < x2.fins.size(); ++f2)
        for (bool r2 : {false, true}) {
          OrientedFin s1{static_cast<int>(f1), r1}, s2{static_cast<int>(f2), r2};
          std::string c = x1.colour(s1);
          if (x2.colour(s2) != c) continue;
          Rational rho = density(x1, c);
          if (density(x2, c) != rho || density(xc, c) != rho) rep.densities_match = false;
          FinEquationEntry e;
          e.colour = c;
          e.fin1 = x1.fins[f1].id + (r1 ? "-" : "+");
          e.fin2 = x2.fins[f2].id + (r2 ? "-" : "+");
          e.expected = Rational(xc.graph.n_vertices()) * Rational(x1.fins[f1].length()) *
                       Rational(x2.fins[f2].length()) /
                       (rho * Rational(x1.graph.n_vertices()) * Rational(x2.graph.n_vertices()));
          auto it = bucket.find({{static_cast<int>(f1), r1}, {static_cast<int>(f2), r2}});
          e.actual = it == bucket.end() ? Int(0) : it->second;
          e.ok = Rational(e.actual) == e.expected;
          if (!e.ok) rep.pass = false;
          rep.entries.push_back(std::move(e));
        }
  if (!rep.densities_match) rep.pass = false;
  return rep;
}

}  // namespace fincover
