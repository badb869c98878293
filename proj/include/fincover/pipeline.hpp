#pragma once

#include <algorithm>
#include <array>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "fincover/covering.hpp"
#include "fincover/errors.hpp"
#include "fincover/fins.hpp"
#include "fincover/gos.hpp"
#include "fincover/graph.hpp"
#include "fincover/leighton.hpp"
#include "fincover/local_types.hpp"
#include "fincover/rational.hpp"

namespace fincover {

// ---------------------------------------------------------------------------
// Colour classes. An unoriented fin determines the unordered pair of its two
// orientation colours; fins in one class share target lengths.

using ColourPair = std::array<std::string, 2>;

inline ColourPair colour_pair(const FinColours& fc) {
  return fc[0] <= fc[1] ? ColourPair{fc[0], fc[1]} : ColourPair{fc[1], fc[0]};
}

inline ColourPair edge_colour_pair(const GraphOfSpaces& g, const GosEdge& e) {
  return colour_pair(g.rigids[e.rigid].space.colours[e.fin]);
}

// Invariant of an oriented cylinder fibre: the kind of the cylinder plus the
// per-colour counts of the induced oriented fins.
struct FibreKey {
  CylinderKind kind = CylinderKind::Circle;
  std::vector<std::pair<std::string, int>> counts;  // sorted by colour

  auto operator<=>(const FibreKey&) const = default;
};

namespace detail {

inline Int factorial(int n) {
  Int f = 1;
  for (int i = 2; i <= n; ++i) f *= i;
  return f;
}

inline Int chi(const Graph& g) { return Int(g.n_vertices()) - Int(g.n_edges()); }

inline std::string colour_at(const GraphOfSpaces& g, const GosEdge& e, bool fibre_forward) {
  OrientedFin s = induced_fin(e, fibre_forward);
  return g.rigids[e.rigid].space.colours[s.fin][s.reversed ? 1 : 0];
}

// Per cylinder, incident edge indices in input order.
inline std::vector<std::vector<int>> cylinder_links(const GraphOfSpaces& g) {
  std::vector<std::vector<int>> lk(g.cylinders.size());
  for (int e = 0; e < g.n_edges(); ++e) lk[g.edges[e].cylinder].push_back(e);
  return lk;
}

// (rigid, fin) -> attaching edge index; assumes the one-edge-per-fin rule.
inline std::map<std::pair<int, int>, int> edge_at_fin(const GraphOfSpaces& g) {
  std::map<std::pair<int, int>, int> out;
  for (int e = 0; e < g.n_edges(); ++e) out[{g.edges[e].rigid, g.edges[e].fin}] = e;
  return out;
}

inline std::vector<std::array<FibreKey, 2>> fibre_keys(const GraphOfSpaces& g,
                                                       const CylinderNumbers& cn) {
  std::vector<std::array<FibreKey, 2>> keys(g.cylinders.size());
  for (int v = 0; v < g.n_cylinders(); ++v)
    for (int o = 0; o < 2; ++o) {
      FibreKey k;
      k.kind = g.cylinders[v].kind;
      for (const auto& [c, n] : cn.counts[v][o]) k.counts.emplace_back(c, n);
      keys[v][o] = std::move(k);
    }
  return keys;
}

inline bool structurally_equal(const GraphWithFins& x, const GraphWithFins& y) {
  if (x.graph.vertex_names != y.graph.vertex_names) return false;
  if (x.graph.edge_names != y.graph.edge_names) return false;
  if (x.graph.edge_from != y.graph.edge_from || x.graph.edge_to != y.graph.edge_to) return false;
  if (x.fins.size() != y.fins.size() || x.colours != y.colours) return false;
  for (size_t f = 0; f < x.fins.size(); ++f)
    if (x.fins[f].id != y.fins[f].id || x.fins[f].cycle != y.fins[f].cycle) return false;
  return true;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Matching plans.

struct RigidPairCover {
  int ua = -1, ub = -1;       // rigid indices in the two inputs, same class
  CommonCoverWitness cover;   // to1 covers a.rigids[ua], to2 covers b.rigids[ub]
};

// One matched pair of oriented fibres, stored by its forward-a representative;
// the simultaneous flip names the same pair.
struct CylPairing {
  int va = -1, vb = -1;
  bool aligned = true;  // forward fibre of va matches forward (true) or backward (false) of vb
};

struct MatchingPlan {
  GraphOfSpaces a, b;  // inputs recoloured with one joint canonical colouring
  std::vector<int> class_a, class_b;  // shared rigid class index per rigid
  int n_classes = 0;
  std::vector<Rational> class_rho;    // per class; equal on both sides
  std::map<std::string, Rational> colour_rho;
  std::map<std::string, int> colour_class;          // hosting class per colour
  std::map<std::string, std::string> colour_bar;    // orientation reversal on colours
  Int volume_a = 0, volume_b = 0;
  std::map<ColourPair, Int> fin_ratio;  // relative fin length per colour class, minimal integers
  std::vector<RigidPairCover> pairs;    // every same-class cross pair
  std::vector<CylPairing> cyl_pairs;

  // Set by normalize_fin_lengths.
  Int scale = 0;                         // global length multiplier; 0 until normalized
  std::map<ColourPair, Int> fin_target;  // scale * fin_ratio
  std::vector<Int> deg_a, deg_b;         // fibre cover degree per input cylinder
};

namespace detail {

// Restricts a common-cover witness to the component of `root`.
inline CommonCoverWitness restrict_component(const CommonCoverWitness& wit, int root) {
  const Graph& big = wit.common.graph;
  std::vector<char> keep(static_cast<size_t>(big.n_vertices()), 0);
  std::vector<int> stack{root};
  keep[static_cast<size_t>(root)] = 1;
  while (!stack.empty()) {
    int v = stack.back();
    stack.pop_back();
    for (int d : big.star[static_cast<size_t>(v)]) {
      int u = big.dart_terminus(d);
      if (!keep[static_cast<size_t>(u)]) {
        keep[static_cast<size_t>(u)] = 1;
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
      kvm1.push_back(wit.to1.vertex_map[static_cast<size_t>(v)]);
      kvm2.push_back(wit.to2.vertex_map[static_cast<size_t>(v)]);
    }
  std::vector<std::string> ke;
  std::vector<int> kef, ket, kd1, kd2;
  for (int e = 0; e < big.n_edges(); ++e)
    if (keep[static_cast<size_t>(big.edge_from[static_cast<size_t>(e)])]) {
      ke.push_back(big.edge_names[static_cast<size_t>(e)]);
      kef.push_back(vnew[static_cast<size_t>(big.edge_from[static_cast<size_t>(e)])]);
      ket.push_back(vnew[static_cast<size_t>(big.edge_to[static_cast<size_t>(e)])]);
      kd1.push_back(wit.to1.dart_map[static_cast<size_t>(2 * e)]);
      kd2.push_back(wit.to2.dart_map[static_cast<size_t>(2 * e)]);
    }
  Graph sub = make_graph(std::move(kv), std::move(ke), std::move(kef), std::move(ket));
  std::vector<int> dm1(static_cast<size_t>(sub.n_darts())), dm2(static_cast<size_t>(sub.n_darts()));
  for (int e = 0; e < sub.n_edges(); ++e) {
    dm1[static_cast<size_t>(2 * e)] = kd1[static_cast<size_t>(e)];
    dm1[static_cast<size_t>(2 * e + 1)] = dart_reverse(kd1[static_cast<size_t>(e)]);
    dm2[static_cast<size_t>(2 * e)] = kd2[static_cast<size_t>(e)];
    dm2[static_cast<size_t>(2 * e + 1)] = dart_reverse(kd2[static_cast<size_t>(e)]);
  }
  CommonCoverWitness out;
  out.to1 = induced_cover(wit.to1.target, GraphCover{sub, kvm1, dm1});
  out.common = out.to1.source;
  auto fm2 = derive_fin_map(out.common, dm2, wit.to2.target);
  if (!fm2)
    throw Error(ErrorCode::InvalidGraphCover,
                "component does not project its fins to the second input");
  out.to2.source = out.common;
  out.to2.target = wit.to2.target;
  out.to2.vertex_map = kvm2;
  out.to2.dart_map = dm2;
  out.to2.fin_map = *fm2;
  return out;
}

inline std::vector<int> component_roots(const Graph& g) {
  std::vector<int> roots;
  std::vector<char> seen(static_cast<size_t>(g.n_vertices()), 0);
  for (int root = 0; root < g.n_vertices(); ++root) {
    if (seen[static_cast<size_t>(root)]) continue;
    roots.push_back(root);
    std::vector<int> stack{root};
    seen[static_cast<size_t>(root)] = 1;
    while (!stack.empty()) {
      int v = stack.back();
      stack.pop_back();
      for (int d : g.star[static_cast<size_t>(v)]) {
        int u = g.dart_terminus(d);
        if (!seen[static_cast<size_t>(u)]) {
          seen[static_cast<size_t>(u)] = 1;
          stack.push_back(u);
        }
      }
    }
  }
  return roots;
}

// Common cover keeping the boundary sum identity. The symmetric assembly
// guarantees the identity for the whole cover; a connected component is
// preferred when one satisfies the identity on its own.
inline CommonCoverWitness symmetric_cover(const GraphWithFins& x1, const GraphWithFins& x2) {
  LeightonProblem lp = enumerate_admissible_pairs(x1, x2);
  HaarWeights w = haar_weights(lp);
  CommonCoverWitness full = assemble_common_cover(lp, w);
  if (is_connected(full.common.graph)) {
    if (!verify_fin_equation(full).pass)
      throw Error(ErrorCode::InconsistentRatios,
                  "assembled common cover breaks the boundary sum identity");
    return full;
  }
  for (int root : component_roots(full.common.graph)) {
    CommonCoverWitness piece = restrict_component(full, root);
    if (verify_fin_equation(piece).pass) return piece;
  }
  if (!verify_fin_equation(full).pass)
    throw Error(ErrorCode::InconsistentRatios,
                "assembled common cover breaks the boundary sum identity");
  return full;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// match_structures: joint canonical colours, shared rigid classes, matched
// oriented fibres, global relative fin lengths, one common cover per
// same-class cross pair of rigid spaces.

inline MatchingPlan match_structures(const GraphOfSpaces& in_a, const GraphOfSpaces& in_b) {
  require_valid_gos(in_a);
  require_valid_gos(in_b);

  std::vector<GraphWithFins> spaces;
  for (const RigidSpace& r : in_a.rigids) spaces.push_back(r.space);
  for (const RigidSpace& r : in_b.rigids) spaces.push_back(r.space);
  CanonicalColours cc = compute_canonical_colours(spaces);

  MatchingPlan plan;
  plan.a = in_a;
  plan.b = in_b;
  const int na = in_a.n_rigids();
  for (int r = 0; r < na; ++r) plan.a.rigids[r].space.colours = cc.colours[static_cast<size_t>(r)];
  for (int r = 0; r < in_b.n_rigids(); ++r)
    plan.b.rigids[r].space.colours = cc.colours[static_cast<size_t>(na + r)];

  // Shared rigid classes: equal stable vertex label sets in the joint table.
  std::map<std::set<Hash>, int> class_index;
  auto class_of = [&](int scale_index) {
    const SubScale& s = cc.table.scales[static_cast<size_t>(scale_index)];
    std::set<Hash> key(s.vlabel.begin(), s.vlabel.end());
    auto [it, fresh] = class_index.emplace(key, static_cast<int>(class_index.size()));
    (void)fresh;
    return it->second;
  };
  for (int r = 0; r < na; ++r) plan.class_a.push_back(class_of(r));
  for (int r = 0; r < plan.b.n_rigids(); ++r) plan.class_b.push_back(class_of(na + r));
  plan.n_classes = static_cast<int>(class_index.size());

  std::vector<int> count_a(static_cast<size_t>(plan.n_classes), 0);
  std::vector<int> count_b(static_cast<size_t>(plan.n_classes), 0);
  for (int c : plan.class_a) count_a[static_cast<size_t>(c)]++;
  for (int c : plan.class_b) count_b[static_cast<size_t>(c)]++;
  for (int r = 0; r < na; ++r)
    if (count_b[static_cast<size_t>(plan.class_a[static_cast<size_t>(r)])] == 0)
      throw Error(ErrorCode::NoMatching, "rigid space '" + plan.a.rigids[r].id +
                                             "' has no counterpart with the same universal cover");
  for (int r = 0; r < plan.b.n_rigids(); ++r)
    if (count_a[static_cast<size_t>(plan.class_b[static_cast<size_t>(r)])] == 0)
      throw Error(ErrorCode::NoMatching, "rigid space '" + plan.b.rigids[r].id +
                                             "' has no counterpart with the same universal cover");

  // Class densities must agree: they are commensurability invariants.
  plan.volume_a = gos_volume(plan.a);
  plan.volume_b = gos_volume(plan.b);
  plan.class_rho.assign(static_cast<size_t>(plan.n_classes), Rational(0));
  for (int k = 0; k < plan.n_classes; ++k) {
    Int size_a = 0, size_b = 0;
    for (int r = 0; r < na; ++r)
      if (plan.class_a[static_cast<size_t>(r)] == k)
        size_a += plan.a.rigids[r].space.graph.n_vertices();
    for (int r = 0; r < plan.b.n_rigids(); ++r)
      if (plan.class_b[static_cast<size_t>(r)] == k)
        size_b += plan.b.rigids[r].space.graph.n_vertices();
    Rational rho_a(size_a, plan.volume_a), rho_b(size_b, plan.volume_b);
    if (rho_a != rho_b)
      throw Error(ErrorCode::NoMatching,
                  "a rigid class has density " + rat_to_string(rho_a) + " in the first input and " +
                      rat_to_string(rho_b) + " in the second");
    plan.class_rho[static_cast<size_t>(k)] = rho_a;
  }

  // Every colour must appear on both sides.
  std::set<std::string> cols_a, cols_b;
  for (const RigidSpace& r : plan.a.rigids)
    for (const std::string& c : colours_used(r.space)) cols_a.insert(c);
  for (const RigidSpace& r : plan.b.rigids)
    for (const std::string& c : colours_used(r.space)) cols_b.insert(c);
  for (const std::string& c : cols_a)
    if (!cols_b.count(c))
      throw Error(ErrorCode::NoMatching, "colour '" + c + "' appears only in the first input");
  for (const std::string& c : cols_b)
    if (!cols_a.count(c))
      throw Error(ErrorCode::NoMatching, "colour '" + c + "' appears only in the second input");

  // Colour densities and hosting classes must agree across the inputs.
  DensityReport dens_a = densities(plan.a);
  DensityReport dens_b = densities(plan.b);
  for (const auto& [c, rho] : dens_a.colour_density) {
    Rational other = dens_b.colour_density.at(c);
    if (rho != other)
      throw Error(ErrorCode::NoMatching, "colour '" + c + "' has density " + rat_to_string(rho) +
                                             " in the first input and " + rat_to_string(other) +
                                             " in the second");
    int host_a = plan.class_a[static_cast<size_t>(
        dens_a.classes[static_cast<size_t>(dens_a.colour_class.at(c))].members.front())];
    int host_b = plan.class_b[static_cast<size_t>(
        dens_b.classes[static_cast<size_t>(dens_b.colour_class.at(c))].members.front())];
    if (host_a != host_b)
      throw Error(ErrorCode::NoMatching,
                  "colour '" + c + "' is hosted by different rigid classes");
    plan.colour_rho[c] = rho;
    plan.colour_class[c] = host_a;
  }

  // Orientation reversal on colours must be a single well-defined involution.
  for (const GraphOfSpaces* g : {&plan.a, &plan.b})
    for (const RigidSpace& r : g->rigids)
      for (const FinColours& fc : r.space.colours)
        for (int o = 0; o < 2; ++o) {
          auto [it, fresh] = plan.colour_bar.emplace(fc[o], fc[1 - o]);
          if (!fresh && it->second != fc[1 - o])
            throw Error(ErrorCode::NoMatching, "colour '" + fc[o] + "' reverses ambiguously");
        }

  // Matched oriented fibres; counts must agree exactly.
  CylinderNumbers cn_a = cylinder_numbers(plan.a);
  CylinderNumbers cn_b = cylinder_numbers(plan.b);
  auto keys_a = detail::fibre_keys(plan.a, cn_a);
  auto keys_b = detail::fibre_keys(plan.b, cn_b);
  for (int va = 0; va < plan.a.n_cylinders(); ++va)
    for (int vb = 0; vb < plan.b.n_cylinders(); ++vb) {
      if (keys_a[static_cast<size_t>(va)][0] == keys_b[static_cast<size_t>(vb)][0] &&
          keys_a[static_cast<size_t>(va)][1] == keys_b[static_cast<size_t>(vb)][1])
        plan.cyl_pairs.push_back({va, vb, true});
      if (keys_a[static_cast<size_t>(va)][0] == keys_b[static_cast<size_t>(vb)][1] &&
          keys_a[static_cast<size_t>(va)][1] == keys_b[static_cast<size_t>(vb)][0])
        plan.cyl_pairs.push_back({va, vb, false});
    }

  auto lk_a = detail::cylinder_links(plan.a);
  auto lk_b = detail::cylinder_links(plan.b);

  // Normalized colour -> fin length map of one oriented fibre; used only for
  // the diagnostic distinguishing a pure count mismatch.
  auto length_profile = [](const GraphOfSpaces& g, const std::vector<int>& link, bool fwd) {
    std::map<std::string, Int> prof;
    Int d = 0;
    for (int e : link) {
      Int len = g.rigids[g.edges[e].rigid].space.fins[g.edges[e].fin].length();
      prof[detail::colour_at(g, g.edges[e], fwd)] = len;
      d = int_gcd(d, len);
    }
    for (auto& [c, len] : prof) len /= d;
    return prof;
  };
  auto support = [](const FibreKey& k) {
    std::set<std::string> s;
    for (const auto& [c, n] : k.counts) s.insert(c);
    return s;
  };
  auto explain_uncovered = [&](const GraphOfSpaces& ga, const GraphOfSpaces& gb, int v, bool fwd,
                               const std::vector<std::array<FibreKey, 2>>& mine,
                               const std::vector<std::array<FibreKey, 2>>& other,
                               const std::vector<std::vector<int>>& lk_mine,
                               const std::vector<std::vector<int>>& lk_other) {
    const FibreKey& k = mine[static_cast<size_t>(v)][fwd ? 0 : 1];
    std::map<std::string, Int> prof = length_profile(ga, lk_mine[static_cast<size_t>(v)], fwd);
    for (size_t w = 0; w < other.size(); ++w)
      for (int o = 0; o < 2; ++o) {
        const FibreKey& kw = other[w][o];
        if (k == kw) continue;
        if (k.counts == kw.counts && k.kind != kw.kind)
          throw Error(ErrorCode::NoMatching, "cylinder kinds differ: '" + ga.cylinders[v].id +
                                                 "' is a " + cylinder_kind_name(k.kind) +
                                                 " but '" + gb.cylinders[static_cast<int>(w)].id +
                                                 "' is a " + cylinder_kind_name(kw.kind));
        if (k.kind == kw.kind && support(k) == support(kw) &&
            prof == length_profile(gb, lk_other[w], o == 0))
          throw Error(ErrorCode::NoMatching,
                      "cylinder numbers differ (ratios match): '" + ga.cylinders[v].id +
                          "' vs '" + gb.cylinders[static_cast<int>(w)].id + "'");
      }
    throw Error(ErrorCode::NoMatching, "no cylinder with matching incidence data for '" +
                                           ga.cylinders[v].id + "'");
  };
  {
    std::vector<std::array<char, 2>> cov_a(plan.a.cylinders.size(), {0, 0});
    std::vector<std::array<char, 2>> cov_b(plan.b.cylinders.size(), {0, 0});
    for (const CylPairing& p : plan.cyl_pairs) {
      cov_a[static_cast<size_t>(p.va)][0] = cov_a[static_cast<size_t>(p.va)][1] = 1;
      cov_b[static_cast<size_t>(p.vb)][0] = cov_b[static_cast<size_t>(p.vb)][1] = 1;
    }
    for (int v = 0; v < plan.a.n_cylinders(); ++v)
      if (!cov_a[static_cast<size_t>(v)][0])
        explain_uncovered(plan.a, plan.b, v, true, keys_a, keys_b, lk_a, lk_b);
    for (int v = 0; v < plan.b.n_cylinders(); ++v)
      if (!cov_b[static_cast<size_t>(v)][0])
        explain_uncovered(plan.b, plan.a, v, true, keys_b, keys_a, lk_b, lk_a);
  }

  // Relative fin lengths: one positive integer per colour class, proportional
  // to the attached fin lengths around every cylinder of either input.
  std::map<ColourPair, Rational> pot;
  std::map<ColourPair, std::vector<std::pair<ColourPair, Rational>>> adj;
  auto feed_constraints = [&](const GraphOfSpaces& g, const std::vector<std::vector<int>>& lk) {
    for (int v = 0; v < g.n_cylinders(); ++v) {
      std::map<ColourPair, Int> at;
      for (int e : lk[static_cast<size_t>(v)]) {
        ColourPair cls = edge_colour_pair(g, g.edges[e]);
        Int len = g.rigids[g.edges[e].rigid].space.fins[g.edges[e].fin].length();
        auto [it, fresh] = at.emplace(cls, len);
        if (!fresh && it->second != len)
          throw Error(ErrorCode::NoMatching,
                      "stretch ratios inconsistent at cylinder '" + g.cylinders[v].id +
                          "': one colour class attaches lengths " + it->second.str() + " and " +
                          len.str());
        pot.emplace(cls, Rational(0));
      }
      const auto& [base_cls, base_len] = *at.begin();
      for (const auto& [cls, len] : at) {
        if (cls == base_cls) continue;
        adj[base_cls].emplace_back(cls, Rational(len, base_len));
        adj[cls].emplace_back(base_cls, Rational(base_len, len));
      }
    }
  };
  feed_constraints(plan.a, lk_a);
  feed_constraints(plan.b, lk_b);

  std::set<ColourPair> assigned;
  for (auto& [root, unused] : pot) {
    (void)unused;
    if (assigned.count(root)) continue;
    pot[root] = 1;
    assigned.insert(root);
    std::vector<ColourPair> queue{root};
    std::vector<ColourPair> component{root};
    for (size_t qi = 0; qi < queue.size(); ++qi) {
      ColourPair x = queue[qi];
      for (const auto& [y, ratio] : adj[x]) {
        Rational via = pot[x];
        via *= ratio;
        if (!assigned.count(y)) {
          pot[y] = via;
          assigned.insert(y);
          queue.push_back(y);
          component.push_back(y);
        } else if (pot[y] != via) {
          throw Error(ErrorCode::NoMatching,
                      "stretch ratios inconsistent between the cylinders sharing colour class '" +
                          y[0] + "'");
        }
      }
    }
    Int den = 1, num = 0;
    for (const ColourPair& c : component) den = int_lcm(den, rat_den(pot[c]));
    for (const ColourPair& c : component) {
      Rational t = pot[c];
      t *= den;
      num = int_gcd(num, rat_to_int(t));
    }
    for (const ColourPair& c : component) {
      Rational t = pot[c];
      t *= den;
      t /= num;
      plan.fin_ratio[c] = rat_to_int(t);
    }
  }

  // One symmetric common cover per same-class cross pair.
  for (int ua = 0; ua < na; ++ua)
    for (int ub = 0; ub < plan.b.n_rigids(); ++ub) {
      if (plan.class_a[static_cast<size_t>(ua)] != plan.class_b[static_cast<size_t>(ub)]) continue;
      RigidPairCover pc;
      pc.ua = ua;
      pc.ub = ub;
      pc.cover = detail::symmetric_cover(plan.a.rigids[ua].space, plan.b.rigids[ub].space);
      plan.pairs.push_back(std::move(pc));
    }

  return plan;
}

// ---------------------------------------------------------------------------
// normalize_fin_lengths: choose the global multiplier and replace each common
// cover by a further cover in which every fin of colour class [e] has length
// exactly scale * fin_ratio[e].

namespace detail {

inline std::vector<int> nth_permutation(int n, Int rank) {
  std::vector<int> pool(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) pool[static_cast<size_t>(i)] = i;
  std::vector<int> out;
  out.reserve(static_cast<size_t>(n));
  Int f = factorial(n);
  for (int i = n; i >= 1; --i) {
    f /= i;
    Int q = rank / f;
    rank %= f;
    int idx = static_cast<int>(q);
    out.push_back(pool[static_cast<size_t>(idx)]);
    pool.erase(pool.begin() + idx);
  }
  return out;
}

// Word of a fin over the non-tree edges: (edge slot, +1 forward / -1 backward),
// in traversal order. Tree darts carry the identity and are dropped.
inline std::vector<std::pair<int, int>> fin_voltage_word(const Fin& f,
                                                         const std::vector<int>& slot_of_edge) {
  std::vector<std::pair<int, int>> w;
  for (int d : f.cycle) {
    int slot = slot_of_edge[static_cast<size_t>(d / 2)];
    if (slot < 0) continue;
    w.emplace_back(slot, d % 2 == 0 ? 1 : -1);
  }
  return w;
}

inline bool cycles_all_of_length(const std::vector<int>& perm, const Int& m) {
  int n = static_cast<int>(perm.size());
  std::vector<char> seen(static_cast<size_t>(n), 0);
  for (int s = 0; s < n; ++s) {
    if (seen[static_cast<size_t>(s)]) continue;
    int len = 0, x = s;
    do {
      seen[static_cast<size_t>(x)] = 1;
      x = perm[static_cast<size_t>(x)];
      ++len;
    } while (x != s);
    if (Int(len) != m) return false;
  }
  return true;
}

// Further cover of `base.common` in which fin f unwraps by exactly m[f],
// found by voltage assignments on the non-tree edges: first cyclic rotations,
// then arbitrary permutations, over covering degrees lcm(m), 2*lcm(m), ...
// Each candidate assignment charges one budget unit.
inline CommonCoverWitness search_unwrap(const CommonCoverWitness& base, const std::vector<Int>& m,
                                        Int& budget, const std::string& context) {
  const Graph& g = base.common.graph;
  const std::vector<Fin>& fins = base.common.fins;

  // BFS spanning forest; non-forest edges get voltage slots.
  std::vector<char> in_tree(static_cast<size_t>(g.n_edges()), 0);
  {
    std::vector<char> seen(static_cast<size_t>(g.n_vertices()), 0);
    for (int root = 0; root < g.n_vertices(); ++root) {
      if (seen[static_cast<size_t>(root)]) continue;
      std::vector<int> queue{root};
      seen[static_cast<size_t>(root)] = 1;
      for (size_t qi = 0; qi < queue.size(); ++qi)
        for (int d : g.star[static_cast<size_t>(queue[qi])]) {
          int u = g.dart_terminus(d);
          if (seen[static_cast<size_t>(u)]) continue;
          seen[static_cast<size_t>(u)] = 1;
          in_tree[static_cast<size_t>(d / 2)] = 1;
          queue.push_back(u);
        }
    }
  }
  std::vector<int> slot_of_edge(static_cast<size_t>(g.n_edges()), -1);
  std::vector<int> edge_of_slot;
  for (int e = 0; e < g.n_edges(); ++e)
    if (!in_tree[static_cast<size_t>(e)]) {
      slot_of_edge[static_cast<size_t>(e)] = static_cast<int>(edge_of_slot.size());
      edge_of_slot.push_back(e);
    }
  const int slots = static_cast<int>(edge_of_slot.size());

  std::vector<std::vector<std::pair<int, int>>> words;
  words.reserve(fins.size());
  for (const Fin& f : fins) words.push_back(fin_voltage_word(f, slot_of_edge));

  Int base_degree = 1;
  for (const Int& mf : m) base_degree = int_lcm(base_degree, mf);

  auto charge = [&]() {
    if (budget <= 0)
      throw Error(ErrorCode::BudgetExhausted,
                  "fin length normalization budget exhausted; unmet: " + context);
    --budget;
  };

  auto try_assignment = [&](int D, const std::vector<std::vector<int>>& volt)
      -> std::optional<CommonCoverWitness> {
    std::vector<int> inv(static_cast<size_t>(D));
    for (size_t f = 0; f < fins.size(); ++f) {
      std::vector<int> h(static_cast<size_t>(D));
      for (int k = 0; k < D; ++k) h[static_cast<size_t>(k)] = k;
      for (const auto& [slot, sign] : words[f]) {
        const std::vector<int>& p = volt[static_cast<size_t>(slot)];
        std::vector<int> next(static_cast<size_t>(D));
        if (sign > 0) {
          for (int k = 0; k < D; ++k)
            next[static_cast<size_t>(k)] = p[static_cast<size_t>(h[static_cast<size_t>(k)])];
        } else {
          for (int k = 0; k < D; ++k) inv[static_cast<size_t>(p[static_cast<size_t>(k)])] = k;
          for (int k = 0; k < D; ++k)
            next[static_cast<size_t>(k)] = inv[static_cast<size_t>(h[static_cast<size_t>(k)])];
        }
        h = std::move(next);
      }
      if (!cycles_all_of_length(h, m[f])) return std::nullopt;
    }

    // Voltage cover, then the component of the first sheet.
    std::vector<std::string> vn;
    std::vector<std::string> en;
    std::vector<int> ef, et, vmap, dmap_edge;
    for (int v = 0; v < g.n_vertices(); ++v)
      for (int k = 0; k < D; ++k) {
        vn.push_back(g.vertex_names[static_cast<size_t>(v)] + "@" + std::to_string(k));
        vmap.push_back(v);
      }
    for (int e = 0; e < g.n_edges(); ++e) {
      int slot = slot_of_edge[static_cast<size_t>(e)];
      for (int k = 0; k < D; ++k) {
        int kk = slot < 0 ? k : volt[static_cast<size_t>(slot)][static_cast<size_t>(k)];
        en.push_back(g.edge_names[static_cast<size_t>(e)] + "@" + std::to_string(k));
        ef.push_back(g.edge_from[static_cast<size_t>(e)] * D + k);
        et.push_back(g.edge_to[static_cast<size_t>(e)] * D + kk);
        dmap_edge.push_back(2 * e);
      }
    }
    Graph total = make_graph(std::move(vn), std::move(en), std::move(ef), std::move(et));
    std::vector<int> dmap(static_cast<size_t>(total.n_darts()));
    for (int e = 0; e < total.n_edges(); ++e) {
      dmap[static_cast<size_t>(2 * e)] = dmap_edge[static_cast<size_t>(e)];
      dmap[static_cast<size_t>(2 * e + 1)] = dart_reverse(dmap_edge[static_cast<size_t>(e)]);
    }
    CommonCoverWitness lifted;
    lifted.to1 = induced_cover(base.common, GraphCover{total, vmap, dmap});
    lifted.common = lifted.to1.source;
    lifted.to2 = lifted.to1;
    CommonCoverWitness piece = restrict_component(lifted, 0);
    CommonCoverWitness out;
    out.common = piece.common;
    out.to1 = compose_coverings(piece.to1, base.to1);
    out.to2 = compose_coverings(piece.to2, base.to2);
    if (!verify_fin_equation(out).pass) return std::nullopt;
    return out;
  };

  for (Int t = 1;; ++t) {
    Int degree = base_degree * t;
    if (degree > 64)
      throw Error(ErrorCode::BudgetExhausted,
                  "fin length normalization degree exceeds 64; unmet: " + context);
    int D = static_cast<int>(degree);

    // Phase 1: cyclic rotations.
    {
      std::vector<int> shift(static_cast<size_t>(slots), 0);
      bool done = slots == 0;
      while (true) {
        charge();
        std::vector<std::vector<int>> volt;
        volt.reserve(static_cast<size_t>(slots));
        for (int s = 0; s < slots; ++s) {
          std::vector<int> p(static_cast<size_t>(D));
          for (int k = 0; k < D; ++k)
            p[static_cast<size_t>(k)] = (k + shift[static_cast<size_t>(s)]) % D;
          volt.push_back(std::move(p));
        }
        if (auto hit = try_assignment(D, volt)) return *hit;
        if (done) break;
        int s = 0;
        while (s < slots && ++shift[static_cast<size_t>(s)] == D) {
          shift[static_cast<size_t>(s)] = 0;
          ++s;
        }
        if (s == slots) break;
      }
    }

    // Phase 2: arbitrary permutation voltages.
    {
      Int nperm = factorial(D);
      std::vector<Int> rank(static_cast<size_t>(slots), 0);
      bool done = slots == 0;
      while (true) {
        charge();
        std::vector<std::vector<int>> volt;
        volt.reserve(static_cast<size_t>(slots));
        for (int s = 0; s < slots; ++s)
          volt.push_back(nth_permutation(D, rank[static_cast<size_t>(s)]));
        if (auto hit = try_assignment(D, volt)) return *hit;
        if (done) break;
        int s = 0;
        while (s < slots && ++rank[static_cast<size_t>(s)] == nperm) {
          rank[static_cast<size_t>(s)] = 0;
          ++s;
        }
        if (s == slots) break;
      }
    }
  }
}

}  // namespace detail

inline MatchingPlan normalize_fin_lengths(MatchingPlan plan, Int budget = 100000) {
  // Minimal multiplier making every target a multiple of every current lift.
  Int n = 1;
  for (const RigidPairCover& p : plan.pairs)
    for (int f = 0; f < p.cover.common.n_fins(); ++f) {
      ColourPair cls = colour_pair(p.cover.common.colours[static_cast<size_t>(f)]);
      Int len = p.cover.common.fins[static_cast<size_t>(f)].length();
      Int r = plan.fin_ratio.at(cls);
      n = int_lcm(n, len / int_gcd(len, r));
    }
  plan.scale = n;
  plan.fin_target.clear();
  for (const auto& [cls, r] : plan.fin_ratio) plan.fin_target[cls] = n * r;

  auto degrees = [&](const GraphOfSpaces& g) {
    std::vector<Int> deg(static_cast<size_t>(g.n_cylinders()), 0);
    for (const GosEdge& e : g.edges) {
      Int len = g.rigids[e.rigid].space.fins[e.fin].length();
      Int target = plan.fin_target.at(edge_colour_pair(g, e));
      if (target % len != 0)
        throw Error(ErrorCode::InconsistentRatios,
                    "target length is not a multiple of the fin length at edge '" + e.id + "'");
      Int d = target / len;
      if (deg[static_cast<size_t>(e.cylinder)] == 0) {
        deg[static_cast<size_t>(e.cylinder)] = d;
      } else if (deg[static_cast<size_t>(e.cylinder)] != d) {
        throw Error(ErrorCode::InconsistentRatios,
                    "cover degrees disagree at cylinder '" + g.cylinders[e.cylinder].id + "'");
      }
    }
    return deg;
  };
  plan.deg_a = degrees(plan.a);
  plan.deg_b = degrees(plan.b);

  for (RigidPairCover& p : plan.pairs) {
    std::vector<Int> m;
    bool trivial = true;
    std::string unmet;
    for (int f = 0; f < p.cover.common.n_fins(); ++f) {
      ColourPair cls = colour_pair(p.cover.common.colours[static_cast<size_t>(f)]);
      Int len = p.cover.common.fins[static_cast<size_t>(f)].length();
      Int mf = plan.fin_target.at(cls) / len;
      m.push_back(mf);
      if (mf != 1) {
        trivial = false;
        if (!unmet.empty()) unmet += ", ";
        unmet += "fin '" + p.cover.common.fins[static_cast<size_t>(f)].id + "' of ('" +
                 plan.a.rigids[p.ua].id + "','" + plan.b.rigids[p.ub].id + "') needs unwrap " +
                 mf.str();
      }
    }
    if (trivial) continue;
    p.cover = detail::search_unwrap(p.cover, m, budget, unmet);
    for (int f = 0; f < p.cover.common.n_fins(); ++f) {
      ColourPair cls = colour_pair(p.cover.common.colours[static_cast<size_t>(f)]);
      if (Int(p.cover.common.fins[static_cast<size_t>(f)].length()) != plan.fin_target.at(cls))
        throw Error(ErrorCode::InconsistentRatios,
                    "normalized cover misses its target length on fin '" +
                        p.cover.common.fins[static_cast<size_t>(f)].id + "'");
    }
  }
  return plan;
}

// ---------------------------------------------------------------------------
// build_cyl_common_covers: bookkeeping for the common covers of matched
// oriented fibre pairs. Each entry stands for the pair and its simultaneous
// reversal; a torus pair carries transverse degree 1.

struct CylCommonCover {
  int va = -1, vb = -1;
  bool aligned = true;
  CylinderKind kind = CylinderKind::Circle;
  Int deg_a = 1, deg_b = 1;
  Int transverse_deg = 0;  // 1 on torus pairs, 0 otherwise
  std::map<std::string, int> colour_count;  // per-colour link count at the forward-a orientation
  Int link_maps = 1;
};

inline std::vector<CylCommonCover> build_cyl_common_covers(const MatchingPlan& plan) {
  if (plan.scale == 0)
    throw Error(ErrorCode::InconsistentRatios, "plan has not been normalized");
  CylinderNumbers cn_a = cylinder_numbers(plan.a);
  std::vector<CylCommonCover> out;
  out.reserve(plan.cyl_pairs.size());
  for (const CylPairing& p : plan.cyl_pairs) {
    CylCommonCover cc;
    cc.va = p.va;
    cc.vb = p.vb;
    cc.aligned = p.aligned;
    cc.kind = plan.a.cylinders[p.va].kind;
    cc.deg_a = plan.deg_a[static_cast<size_t>(p.va)];
    cc.deg_b = plan.deg_b[static_cast<size_t>(p.vb)];
    cc.transverse_deg = cc.kind == CylinderKind::Torus ? 1 : 0;
    for (const auto& [c, k] : cn_a.counts[static_cast<size_t>(p.va)][0]) {
      cc.colour_count[c] = k;
      cc.link_maps *= detail::factorial(k);
    }
    out.push_back(std::move(cc));
  }
  return out;
}

// ---------------------------------------------------------------------------
// enumerate_link_maps: colour preserving bijections between the links of a
// matched fibre pair, in lexicographic order with factorial unranking.

struct LinkMaps {
  std::vector<int> edges_a;  // incident edges of a, sorted by (colour, index)
  std::vector<int> edges_b;  // incident edges of b, same colour blocks
  std::vector<int> block_start;  // block boundaries into the arrays, ending with size
  Int count = 1;

  // The k-th map sends edges_a[i] to the returned vector's entry i.
  std::vector<int> map_at(Int k) const {
    std::vector<int> out(edges_a.size(), -1);
    std::vector<Int> radix;
    for (size_t b = 0; b + 1 < block_start.size(); ++b)
      radix.push_back(detail::factorial(block_start[b + 1] - block_start[b]));
    std::vector<Int> digits(radix.size(), 0);
    for (size_t b = radix.size(); b-- > 0;) {
      digits[b] = k % radix[b];
      k /= radix[b];
    }
    for (size_t b = 0; b + 1 < block_start.size(); ++b) {
      int lo = block_start[b], hi = block_start[b + 1];
      std::vector<int> perm = detail::nth_permutation(hi - lo, digits[b]);
      for (int i = lo; i < hi; ++i)
        out[static_cast<size_t>(i)] = edges_b[static_cast<size_t>(lo + perm[static_cast<size_t>(i - lo)])];
    }
    return out;
  }
};

inline LinkMaps enumerate_link_maps(const MatchingPlan& plan, const CylCommonCover& cc) {
  std::map<std::string, std::vector<int>> by_colour_a, by_colour_b;
  for (int e = 0; e < plan.a.n_edges(); ++e)
    if (plan.a.edges[e].cylinder == cc.va)
      by_colour_a[detail::colour_at(plan.a, plan.a.edges[e], true)].push_back(e);
  for (int e = 0; e < plan.b.n_edges(); ++e)
    if (plan.b.edges[e].cylinder == cc.vb)
      by_colour_b[detail::colour_at(plan.b, plan.b.edges[e], cc.aligned)].push_back(e);

  LinkMaps lm;
  lm.block_start.push_back(0);
  for (const auto& [c, ea] : by_colour_a) {
    auto it = by_colour_b.find(c);
    if (it == by_colour_b.end() || it->second.size() != ea.size())
      throw Error(ErrorCode::NoMatching,
                  "links disagree on colour '" + c + "' at cylinder '" +
                      plan.a.cylinders[cc.va].id + "'");
    lm.edges_a.insert(lm.edges_a.end(), ea.begin(), ea.end());
    lm.edges_b.insert(lm.edges_b.end(), it->second.begin(), it->second.end());
    lm.block_start.push_back(static_cast<int>(lm.edges_a.size()));
    lm.count *= detail::factorial(static_cast<int>(ea.size()));
  }
  if (by_colour_b.size() != by_colour_a.size())
    throw Error(ErrorCode::NoMatching, "links disagree on their colour sets at cylinder '" +
                                           plan.a.cylinders[cc.va].id + "'");
  return lm;
}

// ---------------------------------------------------------------------------
// solve_global_gluing: the closed-form weights, scaled by one minimal global
// integer, with every gluing identity checked exactly.

// Oriented cross pair of attached fins, named by the attaching edges and the
// fin orientations; normalized against the simultaneous flip.
using EdgePairKey = std::tuple<int, int, int, int>;  // ea, rev_a, eb, rev_b

namespace detail {

inline EdgePairKey flip_key(const EdgePairKey& k) {
  return {std::get<0>(k), 1 - std::get<1>(k), std::get<2>(k), 1 - std::get<3>(k)};
}

inline EdgePairKey normalize_key(const EdgePairKey& k) { return std::min(k, flip_key(k)); }

inline EdgePairKey oriented_pair_key(const GraphOfSpaces& a, int ea, bool fwd_a,
                                     const GraphOfSpaces& b, int eb, bool fwd_b) {
  OrientedFin sa = induced_fin(a.edges[ea], fwd_a);
  OrientedFin sb = induced_fin(b.edges[eb], fwd_b);
  return normalize_key({ea, sa.reversed ? 1 : 0, eb, sb.reversed ? 1 : 0});
}

// Count of fins of the pair's common cover whose oriented images realize the
// key; each unoriented fin realizes exactly one of {key, flip(key)}.
inline std::map<EdgePairKey, Int> boundary_counts(const RigidPairCover& p,
                                                  const std::map<std::pair<int, int>, int>& at_a,
                                                  const std::map<std::pair<int, int>, int>& at_b) {
  std::map<EdgePairKey, Int> out;
  for (int f = 0; f < p.cover.common.n_fins(); ++f) {
    OrientedFin ia = map_oriented_fin(p.cover.to1, {f, false});
    OrientedFin ib = map_oriented_fin(p.cover.to2, {f, false});
    int ea = at_a.at({p.ua, ia.fin});
    int eb = at_b.at({p.ub, ib.fin});
    out[normalize_key({ea, ia.reversed ? 1 : 0, eb, ib.reversed ? 1 : 0})] += 1;
  }
  return out;
}

}  // namespace detail

struct GluingWeights {
  Rational multiplier = 1;    // least positive scale making every weight integral
  std::vector<Int> rigid;     // per plan.pairs
  std::vector<Int> cylinder;  // per plan.cyl_pairs
  std::map<EdgePairKey, Int> edge;
};

inline GluingWeights solve_global_gluing(const MatchingPlan& plan,
                                         const std::vector<CylCommonCover>& covers) {
  if (plan.scale == 0)
    throw Error(ErrorCode::InconsistentRatios, "plan has not been normalized");
  if (covers.empty()) {
    // Nothing to glue: the minimal positive solution is one copy per pair.
    GluingWeights w;
    w.rigid.assign(plan.pairs.size(), Int(1));
    return w;
  }
  auto at_a = detail::edge_at_fin(plan.a);
  auto at_b = detail::edge_at_fin(plan.b);
  auto lk_a = detail::cylinder_links(plan.a);
  auto lk_b = detail::cylinder_links(plan.b);

  std::map<std::pair<int, int>, int> pair_index;
  for (size_t p = 0; p < plan.pairs.size(); ++p)
    pair_index[{plan.pairs[p].ua, plan.pairs[p].ub}] = static_cast<int>(p);

  auto fin_len = [](const GraphOfSpaces& g, int e) {
    return Int(g.rigids[g.edges[e].rigid].space.fins[g.edges[e].fin].length());
  };

  // Closed forms.
  std::vector<Rational> q_rigid;
  for (const RigidPairCover& p : plan.pairs) {
    int cls = plan.class_a[static_cast<size_t>(p.ua)];
    Int prod = Int(plan.a.rigids[p.ua].space.graph.n_vertices()) *
               Int(plan.b.rigids[p.ub].space.graph.n_vertices());
    Rational q(prod);
    q /= plan.class_rho[static_cast<size_t>(cls)];
    q /= Int(p.cover.common.graph.n_vertices());
    q_rigid.push_back(q);
  }

  std::vector<Rational> q_cyl(covers.size(), Rational(0));
  std::map<EdgePairKey, Rational> q_edge;
  for (size_t ci = 0; ci < covers.size(); ++ci) {
    const CylCommonCover& cc = covers[ci];
    bool first = true;
    for (int ea : lk_a[static_cast<size_t>(cc.va)])
      for (int eb : lk_b[static_cast<size_t>(cc.vb)]) {
        std::string c = detail::colour_at(plan.a, plan.a.edges[ea], true);
        if (detail::colour_at(plan.b, plan.b.edges[eb], cc.aligned) != c) continue;
        ColourPair cls = edge_colour_pair(plan.a, plan.a.edges[ea]);
        Int prod = fin_len(plan.a, ea) * fin_len(plan.b, eb);
        Rational qe(prod);
        qe /= Rational(plan.fin_target.at(cls));
        qe /= plan.colour_rho.at(c);
        qe /= plan.class_rho[static_cast<size_t>(plan.colour_class.at(c))];
        EdgePairKey key = detail::oriented_pair_key(plan.a, ea, true, plan.b, eb, cc.aligned);
        auto [it, fresh] = q_edge.emplace(key, qe);
        if (!fresh && it->second != qe)
          throw Error(ErrorCode::NonPositiveSolution,
                      "edge weight is ambiguous between cylinder pairs");
        Rational qc = qe * Int(cc.colour_count.at(c));
        if (first) {
          q_cyl[ci] = qc;
          first = false;
        } else if (q_cyl[ci] != qc) {
          throw Error(ErrorCode::NonPositiveSolution,
                      "gluing weight depends on the colour at cylinders '" +
                          plan.a.cylinders[cc.va].id + "' and '" + plan.b.cylinders[cc.vb].id +
                          "'");
        }
      }
    if (first)
      throw Error(ErrorCode::NonPositiveSolution, "matched cylinders share no colour");
  }

  // One minimal multiplier: the multipliers sending weight q into L * Z form
  // the cyclic group generated by L * den(q) / num(q); intersecting over all
  // constraints is the rational lcm of the generators.
  Rational lambda(0);
  auto constrain = [&](const Rational& q, const Int& div) {
    Rational gen(rat_den(q) * div, rat_num(q));
    if (lambda == 0) {
      lambda = gen;
    } else {
      lambda = Rational(int_lcm(rat_num(lambda), rat_num(gen)),
                        int_gcd(rat_den(lambda), rat_den(gen)));
    }
  };
  for (const Rational& q : q_rigid) constrain(q, 1);
  for (const auto& [k, q] : q_edge) {
    (void)k;
    constrain(q, 1);
  }
  for (size_t ci = 0; ci < covers.size(); ++ci) constrain(q_cyl[ci], covers[ci].link_maps);

  if (lambda <= 0)
    throw Error(ErrorCode::NonPositiveSolution, "no positive multiplier exists");
  GluingWeights w;
  w.multiplier = lambda;
  auto scaled = [&](Rational q, const char* what) {
    q *= lambda;
    Int v = rat_to_int(q);
    if (v <= 0) throw Error(ErrorCode::NonPositiveSolution, std::string("non-positive ") + what);
    return v;
  };
  for (const Rational& q : q_rigid) w.rigid.push_back(scaled(q, "vertex weight"));
  for (const Rational& q : q_cyl) w.cylinder.push_back(scaled(q, "cylinder weight"));
  for (const auto& [k, q] : q_edge) w.edge[k] = scaled(q, "edge weight");

  // First gluing identity and the divisibility needed for even distribution.
  for (size_t ci = 0; ci < covers.size(); ++ci) {
    const CylCommonCover& cc = covers[ci];
    if (w.cylinder[ci] % cc.link_maps != 0)
      throw Error(ErrorCode::NonPositiveSolution,
                  "link map count does not divide the cylinder weight");
    for (int ea : lk_a[static_cast<size_t>(cc.va)])
      for (int eb : lk_b[static_cast<size_t>(cc.vb)]) {
        std::string c = detail::colour_at(plan.a, plan.a.edges[ea], true);
        if (detail::colour_at(plan.b, plan.b.edges[eb], cc.aligned) != c) continue;
        EdgePairKey key = detail::oriented_pair_key(plan.a, ea, true, plan.b, eb, cc.aligned);
        if (w.cylinder[ci] != Int(cc.colour_count.at(c)) * w.edge.at(key))
          throw Error(ErrorCode::NonPositiveSolution, "first gluing identity fails");
      }
  }

  // Second gluing identity against the actual boundary counts.
  for (const auto& [key, we] : w.edge) {
    auto [ea, ra, eb, rb] = key;
    (void)ra;
    (void)rb;
    int p = pair_index.at({plan.a.edges[ea].rigid, plan.b.edges[eb].rigid});
    std::map<EdgePairKey, Int> bc =
        detail::boundary_counts(plan.pairs[static_cast<size_t>(p)], at_a, at_b);
    auto it = bc.find(key);
    Int count = it == bc.end() ? Int(0) : it->second;
    if (we != w.rigid[static_cast<size_t>(p)] * count)
      throw Error(ErrorCode::NonPositiveSolution, "second gluing identity fails");
  }

  // Orientation well-definedness: the reversed representative gives the same
  // cylinder weight.
  CylinderNumbers cn_a = cylinder_numbers(plan.a);
  for (size_t ci = 0; ci < covers.size(); ++ci) {
    const CylCommonCover& cc = covers[ci];
    for (int ea : lk_a[static_cast<size_t>(cc.va)]) {
      std::string c = detail::colour_at(plan.a, plan.a.edges[ea], true);
      std::string cbar = plan.colour_bar.at(c);
      if (plan.colour_rho.at(c) != plan.colour_rho.at(cbar))
        throw Error(ErrorCode::NonPositiveSolution,
                    "densities differ between a colour and its reversal");
      int n_fwd = cc.colour_count.at(c);
      auto& rev_counts = cn_a.counts[static_cast<size_t>(cc.va)][1];
      auto itr = rev_counts.find(cbar);
      if (itr == rev_counts.end() || itr->second != n_fwd)
        throw Error(ErrorCode::NonPositiveSolution,
                    "cylinder counts differ between a colour and its reversal");
      ColourPair cls = edge_colour_pair(plan.a, plan.a.edges[ea]);
      for (int eb : lk_b[static_cast<size_t>(cc.vb)]) {
        if (detail::colour_at(plan.b, plan.b.edges[eb], cc.aligned) != c) continue;
        Int prod = fin_len(plan.a, ea) * fin_len(plan.b, eb);
        Rational q_rev(prod);
        q_rev /= Rational(plan.fin_target.at(cls));
        q_rev /= plan.colour_rho.at(cbar);
        q_rev /= plan.class_rho[static_cast<size_t>(plan.colour_class.at(cbar))];
        q_rev *= lambda;
        if (rat_to_int(q_rev) * Int(n_fwd) != w.cylinder[ci])
          throw Error(ErrorCode::NonPositiveSolution,
                      "cylinder weight changes under orientation reversal");
      }
    }
  }

  // Closing identity on both sides: the cylinder weight is the input volume
  // over the degree-weighted size of the fibre class.
  auto keys_a = detail::fibre_keys(plan.a, cn_a);
  CylinderNumbers cn_b = cylinder_numbers(plan.b);
  auto keys_b = detail::fibre_keys(plan.b, cn_b);
  for (size_t ci = 0; ci < covers.size(); ++ci) {
    const CylCommonCover& cc = covers[ci];
    Int dd = cc.deg_a * cc.deg_b;
    const FibreKey& ka = keys_a[static_cast<size_t>(cc.va)][0];
    Rational sum_a = 0;
    for (int v = 0; v < plan.a.n_cylinders(); ++v)
      for (int o = 0; o < 2; ++o)
        if (keys_a[static_cast<size_t>(v)][o] == ka)
          sum_a += Rational(dd, plan.deg_a[static_cast<size_t>(v)]);
    Rational check_a = q_cyl[ci];
    check_a *= sum_a;
    if (check_a != Rational(plan.volume_a))
      throw Error(ErrorCode::NonPositiveSolution, "closing identity fails on the first input");
    const FibreKey& kb = keys_b[static_cast<size_t>(cc.vb)][cc.aligned ? 0 : 1];
    Rational sum_b = 0;
    for (int v = 0; v < plan.b.n_cylinders(); ++v)
      for (int o = 0; o < 2; ++o)
        if (keys_b[static_cast<size_t>(v)][o] == kb)
          sum_b += Rational(dd, plan.deg_b[static_cast<size_t>(v)]);
    Rational check_b = q_cyl[ci];
    check_b *= sum_b;
    if (check_b != Rational(plan.volume_b))
      throw Error(ErrorCode::NonPositiveSolution, "closing identity fails on the second input");
  }

  return w;
}

// ---------------------------------------------------------------------------
// assemble_witness: weighted copies of every common cover, link maps
// distributed round-robin, every fin receiving exactly one edge space.

struct CommensurabilityWitness {
  GraphOfSpaces a, b;  // the canonically coloured inputs both legs target
  GraphOfSpaces common;
  std::vector<int> rigid_to_a, rigid_to_b;  // per common rigid: input rigid index
  std::vector<CoveringMap> rigid_cover_a, rigid_cover_b;
  std::vector<int> cyl_to_a, cyl_to_b;  // per common cylinder: input cylinder index
  std::vector<char> cyl_aligned;        // forward fibre covers b-forward?
  GluingWeights weights;
  Int scale = 0;
};

inline CommensurabilityWitness assemble_witness(const MatchingPlan& plan,
                                                const std::vector<CylCommonCover>& covers,
                                                const GluingWeights& weights) {
  CommensurabilityWitness wit;
  wit.a = plan.a;
  wit.b = plan.b;
  wit.weights = weights;
  wit.scale = plan.scale;

  auto at_a = detail::edge_at_fin(plan.a);
  auto at_b = detail::edge_at_fin(plan.b);

  struct Supply {
    int rigid = -1;  // common rigid index
    int fin = -1;
    bool flipped = false;  // forward orientation realizes the flipped key
  };
  std::map<EdgePairKey, std::vector<Supply>> supply;
  std::map<EdgePairKey, size_t> cursor;

  for (size_t p = 0; p < plan.pairs.size(); ++p) {
    // A disconnected pair cover contributes one rigid space per component;
    // the boundary sum identity holds for the whole copy, so the components
    // of a copy share one fin pool.
    std::vector<CommonCoverWitness> pieces;
    {
      const CommonCoverWitness& full = plan.pairs[p].cover;
      std::vector<int> roots = detail::component_roots(full.common.graph);
      if (roots.size() == 1)
        pieces.push_back(full);
      else
        for (int root : roots) pieces.push_back(detail::restrict_component(full, root));
    }
    Int copies = weights.rigid[p];
    for (Int i = 0; i < copies; ++i) {
      for (size_t k = 0; k < pieces.size(); ++k) {
        int idx = wit.common.n_rigids();
        RigidSpace r;
        r.id = "R" + std::to_string(p) + "." + i.str();
        if (pieces.size() > 1) r.id += "." + std::to_string(k);
        r.space = pieces[k].common;
        wit.common.rigids.push_back(std::move(r));
        wit.rigid_to_a.push_back(plan.pairs[p].ua);
        wit.rigid_to_b.push_back(plan.pairs[p].ub);
        wit.rigid_cover_a.push_back(pieces[k].to1);
        wit.rigid_cover_b.push_back(pieces[k].to2);
        for (int f = 0; f < pieces[k].common.n_fins(); ++f) {
          OrientedFin ia = map_oriented_fin(pieces[k].to1, {f, false});
          OrientedFin ib = map_oriented_fin(pieces[k].to2, {f, false});
          EdgePairKey raw{at_a.at({plan.pairs[p].ua, ia.fin}), ia.reversed ? 1 : 0,
                          at_b.at({plan.pairs[p].ub, ib.fin}), ib.reversed ? 1 : 0};
          EdgePairKey key = detail::normalize_key(raw);
          supply[key].push_back({idx, f, key != raw});
        }
      }
    }
  }

  int edge_serial = 0;
  for (size_t ci = 0; ci < covers.size(); ++ci) {
    const CylCommonCover& cc = covers[ci];
    LinkMaps lm = enumerate_link_maps(plan, cc);
    for (Int j = 0; j < weights.cylinder[ci]; ++j) {
      int cyl_idx = wit.common.n_cylinders();
      CylinderSpace cs;
      cs.id = "C" + std::to_string(ci) + "." + j.str();
      cs.kind = cc.kind;
      cs.fibre = plan.a.cylinders[cc.va].fibre;
      wit.common.cylinders.push_back(std::move(cs));
      wit.cyl_to_a.push_back(cc.va);
      wit.cyl_to_b.push_back(cc.vb);
      wit.cyl_aligned.push_back(cc.aligned ? 1 : 0);

      std::vector<int> sigma = lm.map_at(j % lm.count);
      for (size_t i = 0; i < lm.edges_a.size(); ++i) {
        int ea = lm.edges_a[i];
        int eb = sigma[i];
        OrientedFin oa = induced_fin(plan.a.edges[ea], true);
        OrientedFin ob = induced_fin(plan.b.edges[eb], cc.aligned);
        EdgePairKey raw{ea, oa.reversed ? 1 : 0, eb, ob.reversed ? 1 : 0};
        EdgePairKey key = detail::normalize_key(raw);
        bool dem_flipped = key != raw;
        auto it = supply.find(key);
        size_t& cur = cursor[key];
        if (it == supply.end() || cur >= it->second.size())
          throw Error(ErrorCode::NonPositiveSolution,
                      "ran out of fins while gluing edge spaces");
        Supply s = it->second[cur++];
        GosEdge ge;
        ge.id = "E" + std::to_string(edge_serial++);
        ge.rigid = s.rigid;
        ge.fin = s.fin;
        ge.cylinder = cyl_idx;
        ge.aligned = s.flipped == dem_flipped;
        wit.common.edges.push_back(std::move(ge));
      }
    }
  }

  for (const auto& [key, pool] : supply) {
    size_t used = cursor.count(key) ? cursor.at(key) : 0;
    if (!plan.cyl_pairs.empty() && used != pool.size())
      throw Error(ErrorCode::NonPositiveSolution, "unused fins remain after gluing");
  }
  return wit;
}

// ---------------------------------------------------------------------------
// verify_witness: re-checks the certificate from scratch.

struct WitnessReport {
  bool pass = false;
  std::vector<std::string> failures;
  Int degree_a = 0, degree_b = 0;  // global covering degrees of the two legs
  bool legs_ok = false;
  bool one_edge_per_fin = false;
  bool link_maps_ok = false;
  bool length_targets_ok = false;  // fin lengths constant per colour class, degrees consistent
  bool gluing_equations_ok = false;
  bool chi_ok = false;
  bool densities_ok = false;
  bool orientation_ok = false;
};

inline WitnessReport verify_witness(const CommensurabilityWitness& w) {
  WitnessReport rep;
  auto fail = [&](std::string msg) { rep.failures.push_back(std::move(msg)); };

  const int nr = w.common.n_rigids();
  const int nc = w.common.n_cylinders();
  if (static_cast<int>(w.rigid_to_a.size()) != nr || static_cast<int>(w.rigid_to_b.size()) != nr ||
      static_cast<int>(w.rigid_cover_a.size()) != nr ||
      static_cast<int>(w.rigid_cover_b.size()) != nr || static_cast<int>(w.cyl_to_a.size()) != nc ||
      static_cast<int>(w.cyl_to_b.size()) != nc || static_cast<int>(w.cyl_aligned.size()) != nc) {
    fail("leg data sizes disagree with the common graph of spaces");
    return rep;
  }
  for (int i = 0; i < nr; ++i) {
    if (w.rigid_to_a[i] < 0 || w.rigid_to_a[i] >= w.a.n_rigids() || w.rigid_to_b[i] < 0 ||
        w.rigid_to_b[i] >= w.b.n_rigids()) {
      fail("rigid leg target out of range");
      return rep;
    }
  }
  for (int i = 0; i < nc; ++i) {
    if (w.cyl_to_a[i] < 0 || w.cyl_to_a[i] >= w.a.n_cylinders() || w.cyl_to_b[i] < 0 ||
        w.cyl_to_b[i] >= w.b.n_cylinders()) {
      fail("cylinder leg target out of range");
      return rep;
    }
  }
  for (const GosEdge& e : w.common.edges) {
    if (e.rigid < 0 || e.rigid >= nr || e.cylinder < 0 || e.cylinder >= nc || e.fin < 0 ||
        e.fin >= w.common.rigids[e.rigid].space.n_fins()) {
      fail("edge space '" + e.id + "' points outside the common graph of spaces");
      return rep;
    }
  }

  // Well-formedness violations are collected but do not stop the remaining
  // checks; a missing attachment still surfaces as an unmatched fin below.
  for (const GraphOfSpaces* g : {&w.a, &w.b}) {
    GosReport gr = validate_gos(*g);
    for (const std::string& v : gr.violations) fail(v);
  }
  {
    // The common space may be disconnected: every closed piece of it is a
    // connected common cover in its own right, so the certificate stands.
    GosReport gr = validate_gos(w.common);
    for (const std::string& v : gr.violations)
      if (v != "underlying bipartite graph is disconnected") fail(v);
  }

  // Leg coverings.
  rep.legs_ok = true;
  std::vector<Int> rdeg_a(static_cast<size_t>(nr), 0), rdeg_b(static_cast<size_t>(nr), 0);
  for (int i = 0; i < nr; ++i) {
    const CoveringMap& ca = w.rigid_cover_a[static_cast<size_t>(i)];
    const CoveringMap& cb = w.rigid_cover_b[static_cast<size_t>(i)];
    if (!detail::structurally_equal(ca.source, w.common.rigids[i].space) ||
        !detail::structurally_equal(cb.source, w.common.rigids[i].space)) {
      fail("covering source differs from rigid space '" + w.common.rigids[i].id + "'");
      rep.legs_ok = false;
      continue;
    }
    if (!detail::structurally_equal(ca.target, w.a.rigids[w.rigid_to_a[i]].space) ||
        !detail::structurally_equal(cb.target, w.b.rigids[w.rigid_to_b[i]].space)) {
      fail("covering target differs from the input rigid space for '" + w.common.rigids[i].id +
           "'");
      rep.legs_ok = false;
      continue;
    }
    CoveringReport ra = verify_covering(ca);
    CoveringReport rb = verify_covering(cb);
    if (!ra.pass || !rb.pass) {
      rep.legs_ok = false;
      for (const std::string& f : ra.failures)
        fail("leg a at '" + w.common.rigids[i].id + "': " + f);
      for (const std::string& f : rb.failures)
        fail("leg b at '" + w.common.rigids[i].id + "': " + f);
      continue;
    }
    rdeg_a[static_cast<size_t>(i)] = ra.degree;
    rdeg_b[static_cast<size_t>(i)] = rb.degree;
  }
  if (!rep.legs_ok) return rep;

  // Every fin of every rigid space receives exactly one edge space.
  rep.one_edge_per_fin = true;
  std::map<std::pair<int, int>, int> used;
  for (const GosEdge& e : w.common.edges) used[{e.rigid, e.fin}]++;
  for (int r = 0; r < nr; ++r)
    for (int f = 0; f < w.common.rigids[r].space.n_fins(); ++f) {
      int k = used.count({r, f}) ? used[{r, f}] : 0;
      if (k == 0) {
        fail("unmatched fin '" + w.common.rigids[r].space.fins[f].id + "' of '" +
             w.common.rigids[r].id + "'");
        rep.one_edge_per_fin = false;
      } else if (k > 1) {
        fail("fin '" + w.common.rigids[r].space.fins[f].id + "' receives " + std::to_string(k) +
             " edge spaces");
        rep.one_edge_per_fin = false;
      }
    }

  auto at_a = detail::edge_at_fin(w.a);
  auto at_b = detail::edge_at_fin(w.b);
  auto lk_a = detail::cylinder_links(w.a);
  auto lk_b = detail::cylinder_links(w.b);

  // Project every edge space; orientation must be preserved on both legs.
  rep.orientation_ok = true;
  std::vector<int> edge_to_a(w.common.edges.size(), -1), edge_to_b(w.common.edges.size(), -1);
  for (size_t ei = 0; ei < w.common.edges.size(); ++ei) {
    const GosEdge& e = w.common.edges[ei];
    OrientedFin up = induced_fin(e, true);
    OrientedFin ia = map_oriented_fin(w.rigid_cover_a[static_cast<size_t>(e.rigid)], up);
    OrientedFin ib = map_oriented_fin(w.rigid_cover_b[static_cast<size_t>(e.rigid)], up);
    auto ita = at_a.find({w.rigid_to_a[e.rigid], ia.fin});
    auto itb = at_b.find({w.rigid_to_b[e.rigid], ib.fin});
    if (ita == at_a.end() || itb == at_b.end()) {
      fail("edge '" + e.id + "' projects to a fin with no attaching edge");
      rep.orientation_ok = false;
      continue;
    }
    int ea = ita->second, eb = itb->second;
    edge_to_a[ei] = ea;
    edge_to_b[ei] = eb;
    if (w.a.edges[ea].cylinder != w.cyl_to_a[e.cylinder] ||
        w.b.edges[eb].cylinder != w.cyl_to_b[e.cylinder]) {
      fail("edge '" + e.id + "' is glued at a cylinder that does not cover its image");
      rep.orientation_ok = false;
      continue;
    }
    OrientedFin want_a = induced_fin(w.a.edges[ea], true);
    OrientedFin want_b = induced_fin(w.b.edges[eb], w.cyl_aligned[e.cylinder] != 0);
    if (ia.reversed != want_a.reversed || ib.reversed != want_b.reversed) {
      fail("orientation mismatch on edge space '" + e.id + "'");
      rep.orientation_ok = false;
    }
  }

  // Links project bijectively and colour-preservingly.
  rep.link_maps_ok = true;
  for (int v = 0; v < nc; ++v) {
    std::map<int, int> hits_a, hits_b;
    for (size_t ei = 0; ei < w.common.edges.size(); ++ei) {
      if (w.common.edges[ei].cylinder != v || edge_to_a[ei] < 0) continue;
      hits_a[edge_to_a[ei]]++;
      hits_b[edge_to_b[ei]]++;
      std::string ca = detail::colour_at(w.a, w.a.edges[edge_to_a[ei]], true);
      std::string cb =
          detail::colour_at(w.b, w.b.edges[edge_to_b[ei]], w.cyl_aligned[v] != 0);
      if (ca != cb) {
        fail("link map at '" + w.common.cylinders[v].id + "' does not preserve colours");
        rep.link_maps_ok = false;
      }
    }
    for (int ea : lk_a[static_cast<size_t>(w.cyl_to_a[v])])
      if (!hits_a.count(ea) || hits_a[ea] != 1) {
        fail("link of '" + w.common.cylinders[v].id + "' does not project bijectively onto '" +
             w.a.edges[ea].id + "'");
        rep.link_maps_ok = false;
      }
    for (int eb : lk_b[static_cast<size_t>(w.cyl_to_b[v])])
      if (!hits_b.count(eb) || hits_b[eb] != 1) {
        fail("link of '" + w.common.cylinders[v].id + "' does not project bijectively onto '" +
             w.b.edges[eb].id + "'");
        rep.link_maps_ok = false;
      }
    if (w.common.cylinders[v].kind != w.a.cylinders[w.cyl_to_a[v]].kind ||
        w.common.cylinders[v].kind != w.b.cylinders[w.cyl_to_b[v]].kind) {
      fail("cylinder kind changes along the covering at '" + w.common.cylinders[v].id + "'");
      rep.link_maps_ok = false;
    }
  }
  if (!rep.one_edge_per_fin || !rep.orientation_ok || !rep.link_maps_ok) return rep;

  // Fin lengths constant per colour class; fibre degrees well defined per
  // input cylinder on each side.
  rep.length_targets_ok = true;
  std::map<ColourPair, Int> target;
  for (int r = 0; r < nr; ++r)
    for (int f = 0; f < w.common.rigids[r].space.n_fins(); ++f) {
      ColourPair cls = colour_pair(w.common.rigids[r].space.colours[f]);
      Int len = w.common.rigids[r].space.fins[f].length();
      auto [it, fresh] = target.emplace(cls, len);
      if (!fresh && it->second != len) {
        fail("fin lengths disagree on one colour class");
        rep.length_targets_ok = false;
      }
    }
  std::vector<Int> din_a(static_cast<size_t>(w.a.n_cylinders()), 0);
  std::vector<Int> din_b(static_cast<size_t>(w.b.n_cylinders()), 0);
  std::vector<Int> cdeg_a(static_cast<size_t>(nc), 0), cdeg_b(static_cast<size_t>(nc), 0);
  for (size_t ei = 0; ei < w.common.edges.size(); ++ei) {
    const GosEdge& e = w.common.edges[ei];
    Int up = w.common.rigids[e.rigid].space.fins[e.fin].length();
    Int la = w.a.rigids[w.a.edges[edge_to_a[ei]].rigid]
                 .space.fins[w.a.edges[edge_to_a[ei]].fin]
                 .length();
    Int lb = w.b.rigids[w.b.edges[edge_to_b[ei]].rigid]
                 .space.fins[w.b.edges[edge_to_b[ei]].fin]
                 .length();
    if (up % la != 0 || up % lb != 0) {
      fail("edge space length is not a multiple of its image at '" + e.id + "'");
      rep.length_targets_ok = false;
      continue;
    }
    Int fdeg_a = up / la;
    Int fdeg_b = up / lb;
    for (auto [din, cdeg, vin, d] :
         {std::make_tuple(&din_a, &cdeg_a, w.cyl_to_a[e.cylinder], fdeg_a),
          std::make_tuple(&din_b, &cdeg_b, w.cyl_to_b[e.cylinder], fdeg_b)}) {
      if ((*din)[static_cast<size_t>(vin)] == 0) (*din)[static_cast<size_t>(vin)] = d;
      if ((*din)[static_cast<size_t>(vin)] != d) {
        fail("fibre degrees disagree over an input cylinder at edge '" + e.id + "'");
        rep.length_targets_ok = false;
      }
      if ((*cdeg)[static_cast<size_t>(e.cylinder)] == 0)
        (*cdeg)[static_cast<size_t>(e.cylinder)] = d;
      if ((*cdeg)[static_cast<size_t>(e.cylinder)] != d) {
        fail("fibre degrees disagree within cylinder '" + w.common.cylinders[e.cylinder].id +
             "'");
        rep.length_targets_ok = false;
      }
    }
  }
  if (!rep.length_targets_ok) return rep;

  // Global covering degree: constant over rigid spaces, cylinders, and edge
  // spaces of each input; Euler characteristics multiply by it.
  auto check_leg = [&](const GraphOfSpaces& base, const std::vector<int>& rigid_to,
                       const std::vector<int>& cyl_to, const std::vector<Int>& rdeg,
                       const std::vector<Int>& cdeg, const std::vector<int>& edge_to_in,
                       Int& out_degree) -> bool {
    std::vector<Int> tot_r(static_cast<size_t>(base.n_rigids()), 0);
    for (int i = 0; i < nr; ++i) tot_r[static_cast<size_t>(rigid_to[i])] += rdeg[i];
    Int d = tot_r[0];
    bool ok = true;
    for (const Int& t : tot_r)
      if (t != d) {
        fail("leg degrees disagree between rigid spaces");
        ok = false;
      }
    std::vector<Int> tot_c(static_cast<size_t>(base.n_cylinders()), 0);
    for (int v = 0; v < nc; ++v) tot_c[static_cast<size_t>(cyl_to[v])] += cdeg[v];
    for (size_t v = 0; v < tot_c.size(); ++v)
      if (tot_c[v] != d) {
        fail("total fibre degree over cylinder '" + base.cylinders[static_cast<int>(v)].id +
             "' differs from the covering degree");
        ok = false;
      }
    std::vector<Int> tot_e(static_cast<size_t>(base.n_edges()), 0);
    for (size_t ei = 0; ei < w.common.edges.size(); ++ei) {
      const GosEdge& e = w.common.edges[ei];
      Int up = w.common.rigids[e.rigid].space.fins[e.fin].length();
      int down = edge_to_in[ei];
      Int ldown = base.rigids[base.edges[down].rigid].space.fins[base.edges[down].fin].length();
      tot_e[static_cast<size_t>(down)] += up / ldown;
    }
    for (size_t e = 0; e < tot_e.size(); ++e)
      if (tot_e[e] != d) {
        fail("total degree over edge space '" + base.edges[static_cast<int>(e)].id +
             "' differs from the covering degree");
        ok = false;
      }
    out_degree = d;
    return ok;
  };
  bool deg_ok = check_leg(w.a, w.rigid_to_a, w.cyl_to_a, rdeg_a, cdeg_a, edge_to_a, rep.degree_a);
  deg_ok = check_leg(w.b, w.rigid_to_b, w.cyl_to_b, rdeg_b, cdeg_b, edge_to_b, rep.degree_b) &&
           deg_ok;

  rep.chi_ok = deg_ok;
  if (deg_ok) {
    Int chi_common = 0, chi_a = 0, chi_b = 0;
    for (int i = 0; i < nr; ++i) {
      chi_common += detail::chi(w.common.rigids[i].space.graph);
      Int expect_a =
          rdeg_a[static_cast<size_t>(i)] * detail::chi(w.a.rigids[w.rigid_to_a[i]].space.graph);
      if (detail::chi(w.common.rigids[i].space.graph) != expect_a) {
        fail("Euler characteristic does not multiply along leg a at '" + w.common.rigids[i].id +
             "'");
        rep.chi_ok = false;
      }
    }
    for (const RigidSpace& r : w.a.rigids) chi_a += detail::chi(r.space.graph);
    for (const RigidSpace& r : w.b.rigids) chi_b += detail::chi(r.space.graph);
    if (chi_common != rep.degree_a * chi_a || chi_common != rep.degree_b * chi_b) {
      fail("global Euler characteristic does not multiply by the covering degree");
      rep.chi_ok = false;
    }
  }

  // Densities are preserved: colour densities agree between the inputs and
  // the witness, and class densities are carried across by the legs.
  rep.densities_ok = true;
  try {
    DensityReport da = densities(w.a);
    DensityReport db = densities(w.b);
    DensityReport dc = densities(w.common);
    if (da.colour_density != db.colour_density) {
      fail("colour densities differ between the inputs");
      rep.densities_ok = false;
    }
    if (da.colour_density != dc.colour_density) {
      fail("colour densities are not preserved by the witness");
      rep.densities_ok = false;
    }
    if (!da.class_partition_ok || !db.class_partition_ok || !dc.class_partition_ok ||
        !da.length_sum_ok || !db.length_sum_ok || !dc.length_sum_ok) {
      fail("density bookkeeping identities fail");
      rep.densities_ok = false;
    }
    // Class densities pull back along leg a: the classes of the witness
    // rigids over one input class carry the same share of the volume.
    std::map<int, Int> size_up, size_down;
    for (int i = 0; i < nr; ++i)
      size_up[da.class_of[static_cast<size_t>(w.rigid_to_a[i])]] +=
          w.common.rigids[i].space.graph.n_vertices();
    for (int r = 0; r < w.a.n_rigids(); ++r)
      size_down[da.class_of[static_cast<size_t>(r)]] += w.a.rigids[r].space.graph.n_vertices();
    Int vol_up = gos_volume(w.common), vol_down = gos_volume(w.a);
    for (const auto& [cls, sz] : size_down)
      if (Rational(size_up[cls], vol_up) != Rational(sz, vol_down)) {
        fail("class densities are not preserved by the witness");
        rep.densities_ok = false;
      }
  } catch (const std::exception& e) {
    fail(std::string("density computation failed: ") + e.what());
    rep.densities_ok = false;
  }

  // Gluing equations from recounted weights.
  rep.gluing_equations_ok = true;
  std::map<std::pair<int, int>, std::vector<int>> copies_of;
  for (int i = 0; i < nr; ++i) copies_of[{w.rigid_to_a[i], w.rigid_to_b[i]}].push_back(i);
  std::map<std::tuple<int, int, int>, Int> omega_c;  // (va, vb, aligned)
  for (int v = 0; v < nc; ++v)
    omega_c[{w.cyl_to_a[v], w.cyl_to_b[v], w.cyl_aligned[v] != 0 ? 1 : 0}] += 1;
  std::map<EdgePairKey, Int> omega_e;
  auto key_of_edge = [&](size_t ei) {
    const GosEdge& e = w.common.edges[ei];
    OrientedFin up = induced_fin(e, true);
    OrientedFin ia = map_oriented_fin(w.rigid_cover_a[static_cast<size_t>(e.rigid)], up);
    OrientedFin ib = map_oriented_fin(w.rigid_cover_b[static_cast<size_t>(e.rigid)], up);
    return detail::normalize_key(
        {edge_to_a[ei], ia.reversed ? 1 : 0, edge_to_b[ei], ib.reversed ? 1 : 0});
  };
  for (size_t ei = 0; ei < w.common.edges.size(); ++ei) omega_e[key_of_edge(ei)] += 1;

  CylinderNumbers cn_a = cylinder_numbers(w.a);
  CylinderNumbers cn_b = cylinder_numbers(w.b);
  if (!cn_a.flip_identity || !cn_b.flip_identity) {
    fail("cylinder counts break under orientation reversal: " +
         (cn_a.flip_identity ? cn_b.flip_witness : cn_a.flip_witness));
    rep.orientation_ok = false;
  }

  for (const auto& [fam, wc] : omega_c) {
    auto [va, vb, al] = fam;
    for (int ea : lk_a[static_cast<size_t>(va)]) {
      std::string c = detail::colour_at(w.a, w.a.edges[ea], true);
      Int t_c = cn_a.counts[static_cast<size_t>(va)][0].at(c);
      for (int eb : lk_b[static_cast<size_t>(vb)]) {
        if (detail::colour_at(w.b, w.b.edges[eb], al != 0) != c) continue;
        EdgePairKey key = detail::oriented_pair_key(w.a, ea, true, w.b, eb, al != 0);
        Int we = omega_e.count(key) ? omega_e.at(key) : Int(0);
        if (wc != t_c * we) {
          fail("first gluing identity fails at cylinder family ('" + w.a.cylinders[va].id +
               "','" + w.b.cylinders[vb].id + "')");
          rep.gluing_equations_ok = false;
        }
      }
    }
  }

  // Second gluing identity: the edge count at a key equals the number of
  // fins realizing that key across all rigid spaces over the pair.
  for (const auto& [pair_key, copies] : copies_of) {
    std::map<EdgePairKey, Int> bc;
    for (int i : copies) {
      const GraphWithFins& space = w.common.rigids[i].space;
      for (int f = 0; f < space.n_fins(); ++f) {
        OrientedFin ia = map_oriented_fin(w.rigid_cover_a[static_cast<size_t>(i)], {f, false});
        OrientedFin ib = map_oriented_fin(w.rigid_cover_b[static_cast<size_t>(i)], {f, false});
        auto ita = at_a.find({w.rigid_to_a[i], ia.fin});
        auto itb = at_b.find({w.rigid_to_b[i], ib.fin});
        if (ita == at_a.end() || itb == at_b.end()) continue;
        bc[detail::normalize_key(
            {ita->second, ia.reversed ? 1 : 0, itb->second, ib.reversed ? 1 : 0})] += 1;
      }
    }
    for (const auto& [key, count] : bc) {
      Int we = omega_e.count(key) ? omega_e.at(key) : Int(0);
      if (we != count) {
        fail("second gluing identity fails");
        rep.gluing_equations_ok = false;
      }
    }
  }

  // All recounted weights come from one global multiplier applied to the
  // closed forms.
  try {
    DensityReport da = densities(w.a);
    std::map<std::string, Rational> rho_c = da.colour_density;
    std::map<std::string, Rational> class_rho_of_colour;
    for (const auto& [c, cls] : da.colour_class)
      class_rho_of_colour[c] = da.classes[static_cast<size_t>(cls)].rho;
    Int vol_a = gos_volume(w.a), vol_b = gos_volume(w.b);

    std::optional<Rational> lambda;
    auto feed = [&](const Rational& q, const Int& observed, const std::string& what) {
      if (q <= 0) {
        fail("non-positive closed form for " + what);
        rep.gluing_equations_ok = false;
        return;
      }
      Rational l = Rational(observed) / q;
      if (!lambda) lambda = l;
      if (*lambda != l) {
        fail("weights do not come from one global multiplier (" + what + ")");
        rep.gluing_equations_ok = false;
      }
    };
    // Vertex pairs feed through total size: the vertices over a pair count
    // lambda * |X_u| * |X_u'| / rho_[u], whatever the component shapes are.
    for (const auto& [pair_key, copies] : copies_of) {
      auto [ua, ub] = pair_key;
      Int sz = 0;
      for (int i : copies) sz += Int(w.common.rigids[i].space.graph.n_vertices());
      Int prod = Int(w.a.rigids[ua].space.graph.n_vertices()) *
                 Int(w.b.rigids[ub].space.graph.n_vertices());
      Rational q(prod);
      int cls_a = da.class_of[static_cast<size_t>(ua)];
      q /= da.classes[static_cast<size_t>(cls_a)].rho;
      feed(q, sz, "a vertex pair");
    }
    for (const auto& [key, count] : omega_e) {
      auto [ea, ra, eb, rb] = key;
      (void)rb;
      const GosEdge& a_edge = w.a.edges[ea];
      std::string c = w.a.rigids[a_edge.rigid].space.colours[a_edge.fin][ra];
      Int prod = Int(w.a.rigids[a_edge.rigid].space.fins[a_edge.fin].length()) *
                 Int(w.b.rigids[w.b.edges[eb].rigid].space.fins[w.b.edges[eb].fin].length());
      Rational q(prod);
      q /= Rational(target.at(colour_pair(w.a.rigids[a_edge.rigid].space.colours[a_edge.fin])));
      q /= rho_c.at(c);
      q /= class_rho_of_colour.at(c);
      feed(q, count, "an edge pair");
    }

    // Closing identity on both sides, using the fibre degrees found above.
    auto keys_a = detail::fibre_keys(w.a, cn_a);
    auto keys_b = detail::fibre_keys(w.b, cn_b);
    for (const auto& [fam, wc] : omega_c) {
      auto [va, vb, al] = fam;
      int ea = lk_a[static_cast<size_t>(va)].front();
      std::string c = detail::colour_at(w.a, w.a.edges[ea], true);
      Int t_c = cn_a.counts[static_cast<size_t>(va)][0].at(c);
      Int lb = 0;
      for (int eb : lk_b[static_cast<size_t>(vb)])
        if (detail::colour_at(w.b, w.b.edges[eb], al != 0) == c) {
          lb = w.b.rigids[w.b.edges[eb].rigid].space.fins[w.b.edges[eb].fin].length();
          break;
        }
      if (lb == 0) {
        fail("matched cylinders share no colour");
        rep.gluing_equations_ok = false;
        continue;
      }
      Int la = w.a.rigids[w.a.edges[ea].rigid].space.fins[w.a.edges[ea].fin].length();
      Int prod = t_c * la * lb;
      Rational lhs(prod);
      lhs /= Rational(target.at(edge_colour_pair(w.a, w.a.edges[ea])));
      lhs /= rho_c.at(c);
      lhs /= class_rho_of_colour.at(c);
      Int dd = din_a[static_cast<size_t>(va)] * din_b[static_cast<size_t>(vb)];
      Rational sum_a = 0;
      const FibreKey& ka = keys_a[static_cast<size_t>(va)][0];
      for (int v = 0; v < w.a.n_cylinders(); ++v)
        for (int o = 0; o < 2; ++o)
          if (keys_a[static_cast<size_t>(v)][o] == ka)
            sum_a += Rational(dd, din_a[static_cast<size_t>(v)]);
      Rational check_a = lhs;
      check_a *= sum_a;
      if (check_a != Rational(vol_a)) {
        fail("closing identity fails on the first input");
        rep.gluing_equations_ok = false;
      }
      Rational sum_b = 0;
      const FibreKey& kb = keys_b[static_cast<size_t>(vb)][al != 0 ? 0 : 1];
      for (int v = 0; v < w.b.n_cylinders(); ++v)
        for (int o = 0; o < 2; ++o)
          if (keys_b[static_cast<size_t>(v)][o] == kb)
            sum_b += Rational(dd, din_b[static_cast<size_t>(v)]);
      Rational check_b = lhs;
      check_b *= sum_b;
      if (check_b != Rational(vol_b)) {
        fail("closing identity fails on the second input");
        rep.gluing_equations_ok = false;
      }
      feed(lhs, wc, "a cylinder pair");
    }

  } catch (const std::exception& e) {
    fail(std::string("weight verification failed: ") + e.what());
    rep.gluing_equations_ok = false;
  }

  rep.pass = rep.failures.empty();
  return rep;
}

// ---------------------------------------------------------------------------
// End-to-end construction. A disconnected assembly splits into closed
// pieces; a connected piece that verifies on its own is kept instead.

namespace detail {

// Components of the bipartite rigid/cylinder graph, as node lists with
// rigid i at node i and cylinder v at node n_rigids + v.
inline std::vector<std::vector<int>> witness_components(const CommensurabilityWitness& w) {
  const int nr = w.common.n_rigids();
  const int n = nr + w.common.n_cylinders();
  std::vector<std::vector<int>> adj(static_cast<size_t>(n));
  for (const GosEdge& e : w.common.edges) {
    adj[static_cast<size_t>(e.rigid)].push_back(nr + e.cylinder);
    adj[static_cast<size_t>(nr + e.cylinder)].push_back(e.rigid);
  }
  std::vector<char> seen(static_cast<size_t>(n), 0);
  std::vector<std::vector<int>> comps;
  for (int s = 0; s < n; ++s) {
    if (seen[static_cast<size_t>(s)]) continue;
    std::vector<int> q{s};
    seen[static_cast<size_t>(s)] = 1;
    for (size_t i = 0; i < q.size(); ++i)
      for (int t : adj[static_cast<size_t>(q[i])])
        if (!seen[static_cast<size_t>(t)]) {
          seen[static_cast<size_t>(t)] = 1;
          q.push_back(t);
        }
    comps.push_back(std::move(q));
  }
  return comps;
}

inline CommensurabilityWitness restrict_witness(const CommensurabilityWitness& w,
                                                const std::vector<int>& nodes) {
  const int nr = w.common.n_rigids();
  std::vector<int> rmap(static_cast<size_t>(nr), -1);
  std::vector<int> cmap(static_cast<size_t>(w.common.n_cylinders()), -1);
  CommensurabilityWitness out;
  out.a = w.a;
  out.b = w.b;
  out.weights = w.weights;
  out.scale = w.scale;
  std::vector<int> sorted = nodes;
  std::sort(sorted.begin(), sorted.end());
  for (int node : sorted) {
    if (node < nr) {
      rmap[static_cast<size_t>(node)] = out.common.n_rigids();
      out.common.rigids.push_back(w.common.rigids[node]);
      out.rigid_to_a.push_back(w.rigid_to_a[static_cast<size_t>(node)]);
      out.rigid_to_b.push_back(w.rigid_to_b[static_cast<size_t>(node)]);
      out.rigid_cover_a.push_back(w.rigid_cover_a[static_cast<size_t>(node)]);
      out.rigid_cover_b.push_back(w.rigid_cover_b[static_cast<size_t>(node)]);
    } else {
      int v = node - nr;
      cmap[static_cast<size_t>(v)] = out.common.n_cylinders();
      out.common.cylinders.push_back(w.common.cylinders[v]);
      out.cyl_to_a.push_back(w.cyl_to_a[static_cast<size_t>(v)]);
      out.cyl_to_b.push_back(w.cyl_to_b[static_cast<size_t>(v)]);
      out.cyl_aligned.push_back(w.cyl_aligned[static_cast<size_t>(v)]);
    }
  }
  for (const GosEdge& e : w.common.edges) {
    if (rmap[static_cast<size_t>(e.rigid)] < 0) continue;
    GosEdge f = e;
    f.rigid = rmap[static_cast<size_t>(e.rigid)];
    f.cylinder = cmap[static_cast<size_t>(e.cylinder)];
    out.common.edges.push_back(std::move(f));
  }
  return out;
}

}  // namespace detail

inline CommensurabilityWitness commensurability_witness(const GraphOfSpaces& a,
                                                        const GraphOfSpaces& b,
                                                        Int budget = 100000) {
  MatchingPlan plan = normalize_fin_lengths(match_structures(a, b), budget);
  std::vector<CylCommonCover> covers = build_cyl_common_covers(plan);
  GluingWeights weights = solve_global_gluing(plan, covers);
  CommensurabilityWitness wit = assemble_witness(plan, covers, weights);
  std::vector<std::vector<int>> comps = detail::witness_components(wit);
  if (comps.size() <= 1) return wit;
  for (const std::vector<int>& nodes : comps) {
    CommensurabilityWitness piece = detail::restrict_witness(wit, nodes);
    if (piece.common.n_rigids() == 0) continue;
    if (verify_witness(piece).pass) return piece;
  }
  return wit;
}

}  // namespace fincover
