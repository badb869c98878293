#pragma once

#include <algorithm>
#include <array>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "fincover/covering.hpp"
#include "fincover/fins.hpp"
#include "fincover/hashing.hpp"

namespace fincover {

// Local-type refinement.
//
// Every input is first subdivided once (k = 2). Midpoint vertices carry a
// static tag, so original and midpoint fibres can never be identified by a
// covering of the subdivided object; this also removes loop darts and the
// half-edge shift symmetry, making vertex stars honest local charts.
//
// Types are computed jointly for all inputs of one call: a vertex label and,
// for every fin position, one label per orientation of the arc anchored
// there. Labels are refined until the induced partitions stop splitting.
// Two vertices (of any inputs of the call) get equal stable labels exactly
// when the refinement cannot distinguish their universes of bounded radius.

struct FinTypeLabels {
  Hash fwd = 0;
  Hash bwd = 0;
};

struct InputTypes {
  std::vector<Hash> vertex_types;       // original-scale vertices
  std::vector<FinTypeLabels> fin_labels;
};

// Subdivided-scale working data, kept for the cover constructions.
struct SubScale {
  GraphWithFins sub;                    // subdivide(input, 2)
  int n_original_vertices = 0;          // sub vertex v is original iff v < this
  std::vector<std::vector<std::pair<int, int>>> arcs_at;  // per sub vertex: (fin, pos)
  std::vector<Hash> vlabel;                               // stable, per sub vertex
  std::vector<std::vector<FinTypeLabels>> oa;             // stable, [fin][pos]

  bool is_midpoint(int v) const { return v >= n_original_vertices; }
};

struct TypeTable {
  int rounds = 0;
  std::vector<InputTypes> inputs;
  std::vector<SubScale> scales;
};

namespace detail {

inline std::vector<Hash> least_rotation_hashes(const std::vector<Hash>& w) {
  const int n = static_cast<int>(w.size());
  int best = 0;
  for (int i = 1; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      Hash a = w[(i + j) % n], b = w[(best + j) % n];
      if (a != b) {
        if (a < b) best = i;
        break;
      }
    }
  std::vector<Hash> out(w.begin() + best, w.end());
  out.insert(out.end(), w.begin(), w.begin() + best);
  return out;
}

inline std::vector<Hash> primitive_root_hashes(const std::vector<Hash>& w) {
  const int n = static_cast<int>(w.size());
  for (int p = 1; p <= n; ++p) {
    if (n % p != 0) continue;
    bool period = true;
    for (int i = 0; i + p < n && period; ++i)
      if (w[i] != w[i + p]) period = false;
    if (period) return std::vector<Hash>(w.begin(), w.begin() + p);
  }
  return w;
}

// Exact canonical code of a decorated star: nodes with attributes plus
// labelled directed arcs between distinct nodes. Enumerates node orderings
// within attribute groups after an in-star refinement pass; falls back to a
// sorted (coarse but deterministic) code when the group product is huge.
struct StarArc {
  int from = 0, to = 0;  // node indices
  Hash label = 0;
};

inline Hash canonical_star_code(std::vector<Hash> attr, const std::vector<StarArc>& arcs) {
  const int n = static_cast<int>(attr.size());
  std::vector<std::vector<std::pair<int, Hash>>> out_of(n), in_of(n);
  for (const StarArc& a : arcs) {
    out_of[a.from].push_back({a.to, a.label});
    in_of[a.to].push_back({a.from, a.label});
  }
  // In-star refinement: propagate neighbour attributes along arcs.
  for (int round = 0; round < n; ++round) {
    std::vector<Hash> next(n);
    for (int d = 0; d < n; ++d) {
      std::vector<Hash> sig;
      for (auto& [o, l] : out_of[d]) sig.push_back(hash_combine(hash_combine(1, l), attr[o]));
      for (auto& [o, l] : in_of[d]) sig.push_back(hash_combine(hash_combine(2, l), attr[o]));
      next[d] = hash_combine(attr[d], hash_multiset(3, sig));
    }
    std::map<Hash, int> before, after;
    for (int d = 0; d < n; ++d) {
      before.emplace(attr[d], static_cast<int>(before.size()));
      after.emplace(next[d], static_cast<int>(after.size()));
    }
    bool stable = before.size() == after.size();
    attr = std::move(next);
    if (stable) break;
  }

  std::map<Hash, std::vector<int>> groups;
  for (int d = 0; d < n; ++d) groups[attr[d]].push_back(d);

  std::uint64_t candidates = 1;
  for (auto& [h, g] : groups) {
    for (size_t i = 2; i <= g.size() && candidates <= 40320; ++i) candidates *= i;
  }

  std::vector<Hash> best;
  auto consider = [&](const std::vector<int>& order) {
    std::vector<int> rank(n);
    for (int i = 0; i < n; ++i) rank[order[i]] = i;
    std::vector<Hash> code;
    code.reserve(attr.size() + arcs.size() * 3 + 1);
    code.push_back(static_cast<Hash>(n));
    for (int i = 0; i < n; ++i) code.push_back(attr[order[i]]);
    std::vector<std::array<Hash, 3>> triples;
    triples.reserve(arcs.size());
    for (const StarArc& a : arcs)
      triples.push_back({static_cast<Hash>(rank[a.from]), static_cast<Hash>(rank[a.to]), a.label});
    std::sort(triples.begin(), triples.end());
    for (auto& t : triples) {
      code.push_back(t[0]);
      code.push_back(t[1]);
      code.push_back(t[2]);
    }
    if (best.empty() || code < best) best = std::move(code);
  };

  if (candidates <= 40320) {
    std::vector<std::vector<int>> gs;
    for (auto& [h, g] : groups) gs.push_back(g);
    std::vector<int> order;
    auto rec = [&](auto&& self, size_t gi) -> void {
      if (gi == gs.size()) {
        order.clear();
        for (auto& g : gs) order.insert(order.end(), g.begin(), g.end());
        consider(order);
        return;
      }
      std::vector<int>& g = gs[gi];
      do {
        self(self, gi + 1);
      } while (std::next_permutation(g.begin(), g.end()));
    };
    rec(rec, 0);
  } else {
    // Coarse code: forgetful but deterministic and isomorphism-invariant.
    best.push_back(static_cast<Hash>(n));
    best.push_back(0x636f61727365u);
    std::vector<Hash> a2 = attr;
    std::sort(a2.begin(), a2.end());
    best.insert(best.end(), a2.begin(), a2.end());
    std::vector<std::array<Hash, 3>> triples;
    for (const StarArc& a : arcs) triples.push_back({attr[a.from], attr[a.to], a.label});
    std::sort(triples.begin(), triples.end());
    for (auto& t : triples) {
      best.push_back(t[0]);
      best.push_back(t[1]);
      best.push_back(t[2]);
    }
  }
  return hash_sequence(0x53544152u, best);
}

}  // namespace detail

inline TypeTable refine_local_types(const std::vector<GraphWithFins>& inputs) {
  TypeTable table;
  table.inputs.resize(inputs.size());
  for (const GraphWithFins& x : inputs) {
    SubScale s;
    s.sub = subdivide(x, 2);
    s.n_original_vertices = x.graph.n_vertices();
    s.arcs_at.resize(s.sub.graph.n_vertices());
    s.oa.resize(s.sub.fins.size());
    for (size_t f = 0; f < s.sub.fins.size(); ++f) {
      const auto& cyc = s.sub.fins[f].cycle;
      s.oa[f].resize(cyc.size());
      for (size_t i = 0; i < cyc.size(); ++i)
        s.arcs_at[s.sub.graph.dart_origin(cyc[i])].push_back({static_cast<int>(f),
                                                              static_cast<int>(i)});
    }
    table.scales.push_back(std::move(s));
  }

  // Seed labels: static vertex tags and user colours.
  for (SubScale& s : table.scales) {
    s.vlabel.resize(s.sub.graph.n_vertices());
    for (int v = 0; v < s.sub.graph.n_vertices(); ++v)
      s.vlabel[v] = hash_combine(hash_combine(0x5630u, s.is_midpoint(v) ? 1 : 0),
                                 static_cast<Hash>(s.sub.graph.valence(v)));
    for (size_t f = 0; f < s.sub.fins.size(); ++f) {
      Hash cf = hash_string(s.sub.colours[f][0]);
      Hash cb = hash_string(s.sub.colours[f][1]);
      for (auto& l : s.oa[f]) l = {hash_combine(0x4130u, cf), hash_combine(0x4130u, cb)};
    }
  }

  auto partition_signature = [&] {
    std::map<Hash, int> cls;
    std::vector<int> sig;
    for (const SubScale& s : table.scales) {
      for (Hash h : s.vlabel) sig.push_back(cls.emplace(h, static_cast<int>(cls.size())).first->second);
    }
    cls.clear();
    for (const SubScale& s : table.scales)
      for (const auto& fin : s.oa)
        for (const FinTypeLabels& l : fin) {
          sig.push_back(cls.emplace(l.fwd, static_cast<int>(cls.size())).first->second);
          sig.push_back(cls.emplace(l.bwd, static_cast<int>(cls.size())).first->second);
        }
    return sig;
  };

  std::vector<int> sig = partition_signature();
  // The joint partition refines at most once per item, so |sig| + 2 rounds
  // always reach stability.
  const long total = static_cast<long>(sig.size()) + 2;
  for (long round = 0; round < total; ++round) {
    // Arc labels: previous self, neighbours along the fin, anchor vertex.
    for (SubScale& s : table.scales) {
      std::vector<std::vector<FinTypeLabels>> next = s.oa;
      for (size_t f = 0; f < s.oa.size(); ++f) {
        const auto& cyc = s.sub.fins[f].cycle;
        const int L = static_cast<int>(cyc.size());
        for (int i = 0; i < L; ++i) {
          int prev = (i + L - 1) % L, succ = (i + 1) % L;
          Hash anchor = s.vlabel[s.sub.graph.dart_origin(cyc[i])];
          Hash hf = hash_combine(0x4152u, s.oa[f][i].fwd);
          hf = hash_combine(hf, s.oa[f][prev].fwd);
          hf = hash_combine(hf, s.oa[f][succ].fwd);
          hf = hash_combine(hf, anchor);
          Hash hb = hash_combine(0x4152u, s.oa[f][i].bwd);
          hb = hash_combine(hb, s.oa[f][succ].bwd);
          hb = hash_combine(hb, s.oa[f][prev].bwd);
          hb = hash_combine(hb, anchor);
          next[f][i] = {hf, hb};
        }
      }
      // Vertex labels: previous self plus canonical decorated star.
      std::vector<Hash> vnext(s.vlabel.size());
      for (int v = 0; v < s.sub.graph.n_vertices(); ++v) {
        const auto& star = s.sub.graph.star[v];
        std::map<int, int> node_of;
        std::vector<Hash> attr;
        for (size_t k = 0; k < star.size(); ++k) {
          node_of[star[k]] = static_cast<int>(k);
          attr.push_back(hash_combine(0x4454u, s.vlabel[s.sub.graph.dart_terminus(star[k])]));
        }
        std::vector<detail::StarArc> arcs;
        for (auto [f, i] : s.arcs_at[v]) {
          const auto& cyc = s.sub.fins[f].cycle;
          const int L = static_cast<int>(cyc.size());
          int a = dart_reverse(cyc[(i + L - 1) % L]);
          int b = cyc[i];
          arcs.push_back({node_of.at(a), node_of.at(b), s.oa[f][i].fwd});
          arcs.push_back({node_of.at(b), node_of.at(a), s.oa[f][i].bwd});
        }
        vnext[v] = hash_combine(hash_combine(0x5652u, s.vlabel[v]),
                                detail::canonical_star_code(std::move(attr), arcs));
      }
      s.oa = std::move(next);
      s.vlabel = std::move(vnext);
    }
    table.rounds = static_cast<int>(round) + 1;
    std::vector<int> nsig = partition_signature();
    if (nsig == sig) break;
    sig = std::move(nsig);
  }

  for (size_t xi = 0; xi < inputs.size(); ++xi) {
    const SubScale& s = table.scales[xi];
    InputTypes& t = table.inputs[xi];
    t.vertex_types.assign(s.vlabel.begin(), s.vlabel.begin() + s.n_original_vertices);
    t.fin_labels.resize(s.sub.fins.size());
    for (size_t f = 0; f < s.sub.fins.size(); ++f) {
      const int L = static_cast<int>(s.sub.fins[f].cycle.size());
      std::vector<Hash> wf, wb;
      for (int i = 0; i < L; ++i) wf.push_back(s.oa[f][i].fwd);
      for (int i = L - 1; i >= 0; --i) wb.push_back(s.oa[f][i].bwd);
      // Canonical label of an oriented fin: the rotation-normalized primitive
      // root of its stable arc word. Dropping the exponent keeps the label
      // invariant under pullback along finite covers.
      t.fin_labels[f].fwd = hash_sequence(
          0x464cu, detail::least_rotation_hashes(detail::primitive_root_hashes(wf)));
      t.fin_labels[f].bwd = hash_sequence(
          0x464cu, detail::least_rotation_hashes(detail::primitive_root_hashes(wb)));
    }
  }
  return table;
}

struct UniversalCoverReport {
  bool compatible = false;
  std::string witness;  // a stable vertex label present on one side only
};

inline UniversalCoverReport same_universal_cover(const GraphWithFins& a, const GraphWithFins& b) {
  TypeTable t = refine_local_types({a, b});
  std::set<Hash> la(t.scales[0].vlabel.begin(), t.scales[0].vlabel.end());
  std::set<Hash> lb(t.scales[1].vlabel.begin(), t.scales[1].vlabel.end());
  UniversalCoverReport rep;
  rep.compatible = la == lb;
  if (!rep.compatible) {
    for (Hash h : la)
      if (!lb.count(h)) {
        rep.witness = "vertex type " + hash_hex(h) + " occurs only in the first input";
        return rep;
      }
    for (Hash h : lb)
      if (!la.count(h)) {
        rep.witness = "vertex type " + hash_hex(h) + " occurs only in the second input";
        return rep;
      }
  }
  return rep;
}

// Canonical colouring induced by the refinement: one colour string per
// oriented fin, equal across inputs exactly when the stable labels agree.
inline std::vector<std::vector<FinColours>> canonical_colours_from(const TypeTable& t) {
  std::vector<std::vector<FinColours>> out;
  for (const InputTypes& it : t.inputs) {
    std::vector<FinColours> cols;
    for (const FinTypeLabels& l : it.fin_labels)
      cols.push_back({hash_hex(l.fwd), hash_hex(l.bwd)});
    out.push_back(std::move(cols));
  }
  return out;
}

struct CanonicalColours {
  TypeTable table;
  std::vector<std::vector<FinColours>> colours;
};

inline CanonicalColours compute_canonical_colours(const std::vector<GraphWithFins>& inputs) {
  CanonicalColours cc;
  cc.table = refine_local_types(inputs);
  cc.colours = canonical_colours_from(cc.table);
  return cc;
}

struct TransitivityViolation {
  std::string colour;                   // user colour split across classes
  std::vector<std::string> classes;     // canonical labels it meets
};

struct TransitivityReport {
  bool pass = false;
  std::vector<TransitivityViolation> violations;
};

// A user colouring is usable by the cover constructions when every user
// colour class sits inside a single canonical class.
inline TransitivityReport check_fin_transitivity(const std::vector<GraphWithFins>& inputs) {
  TypeTable t = refine_local_types(inputs);
  std::map<std::string, std::set<Hash>> seen;
  for (size_t xi = 0; xi < inputs.size(); ++xi)
    for (size_t f = 0; f < inputs[xi].fins.size(); ++f) {
      seen[inputs[xi].colours[f][0]].insert(t.inputs[xi].fin_labels[f].fwd);
      seen[inputs[xi].colours[f][1]].insert(t.inputs[xi].fin_labels[f].bwd);
    }
  TransitivityReport rep;
  rep.pass = true;
  for (auto& [col, classes] : seen)
    if (classes.size() > 1) {
      rep.pass = false;
      TransitivityViolation v;
      v.colour = col;
      for (Hash h : classes) v.classes.push_back(hash_hex(h));
      rep.violations.push_back(std::move(v));
    }
  return rep;
}

}  // namespace fincover
