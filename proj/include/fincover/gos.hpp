#pragma once

#include <algorithm>
#include <array>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "fincover/errors.hpp"
#include "fincover/fins.hpp"
#include "fincover/graph.hpp"
#include "fincover/local_types.hpp"
#include "fincover/rational.hpp"
#include "fincover/words.hpp"

namespace fincover {

// ---------------------------------------------------------------------------
// Lines carried by closed dart cycles

// Traversal of the same loop in the opposite direction.
inline std::vector<int> inverted_dart_cycle(const std::vector<int>& c) {
  std::vector<int> out;
  out.reserve(c.size());
  for (auto it = c.rbegin(); it != c.rend(); ++it) out.push_back(dart_reverse(*it));
  return out;
}

// Canonical representative of the line spanned by a closed loop: the
// primitive root, up to rotation and up to reversing the traversal.
inline std::vector<int> dart_line_key(const std::vector<int>& cycle) {
  CyclicWord root = primitive_root(make_cyclic(cycle)).first;
  CyclicWord anti = make_cyclic(inverted_dart_cycle(root.letters));
  return std::min(root.letters, anti.letters);
}

// The loops wrap a common line, i.e. share a power up to free homotopy.
inline bool commensurable_cycles(const std::vector<int>& a, const std::vector<int>& b) {
  return dart_line_key(a) == dart_line_key(b);
}

// ---------------------------------------------------------------------------
// Graphs of spaces: rigid vertices carry graphs with fins, cylindrical
// vertices carry a marked fibre circle, and every edge glues one fin to the
// fibre of one cylinder.

struct RigidSpace {
  std::string id;
  GraphWithFins space;
};

// A circle cylinder is a bare fibre circle; a torus cylinder has one
// transverse circle direction as well. Higher transverse rank is not
// representable.
enum class CylinderKind { Circle, Torus };

inline const char* cylinder_kind_name(CylinderKind k) {
  return k == CylinderKind::Circle ? "circle" : "torus";
}

struct CylinderSpace {
  std::string id;
  CylinderKind kind = CylinderKind::Circle;
  std::string fibre = "fibre";  // marker for the fibre circle
};

// `aligned` records whether the forward fibre direction of the cylinder
// matches the forward traversal of the attached fin.
struct GosEdge {
  std::string id;
  int rigid = -1;
  int fin = -1;
  int cylinder = -1;
  bool aligned = true;
};

struct GraphOfSpaces {
  std::vector<RigidSpace> rigids;
  std::vector<CylinderSpace> cylinders;
  std::vector<GosEdge> edges;

  int n_rigids() const { return static_cast<int>(rigids.size()); }
  int n_cylinders() const { return static_cast<int>(cylinders.size()); }
  int n_edges() const { return static_cast<int>(edges.size()); }

  int rigid_index(const std::string& id) const {
    for (int i = 0; i < n_rigids(); ++i)
      if (rigids[i].id == id) return i;
    return -1;
  }
  int cylinder_index(const std::string& id) const {
    for (int i = 0; i < n_cylinders(); ++i)
      if (cylinders[i].id == id) return i;
    return -1;
  }
};

// Oriented fin seen at the rigid end when the fibre is traversed forward or
// backward; flipping the fibre flips the induced traversal.
inline OrientedFin induced_fin(const GosEdge& e, bool fibre_forward) {
  return {e.fin, fibre_forward != e.aligned};
}

struct GosReport {
  bool pass = false;
  std::vector<std::string> violations;
};

// Checks every structural invariant and collects all violations: ids, index
// ranges, connectivity, the one-edge-per-fin rule, nonempty cylinder links,
// and pairwise non-commensurability of the fins at each rigid vertex.
inline GosReport validate_gos(const GraphOfSpaces& g) {
  GosReport rep;
  auto bad = [&](std::string msg) { rep.violations.push_back(std::move(msg)); };

  if (g.rigids.empty()) bad("no rigid vertex spaces");
  std::set<std::string> ids;
  for (const RigidSpace& r : g.rigids)
    if (r.id.empty() || !ids.insert(r.id).second) bad("duplicate or empty rigid id '" + r.id + "'");
  for (const CylinderSpace& c : g.cylinders)
    if (c.id.empty() || !ids.insert(c.id).second)
      bad("duplicate or empty cylinder id '" + c.id + "'");
  for (const GosEdge& e : g.edges)
    if (e.id.empty() || !ids.insert(e.id).second) bad("duplicate or empty edge id '" + e.id + "'");

  for (const RigidSpace& r : g.rigids)
    if (!is_connected(r.space.graph)) bad("rigid space '" + r.id + "' is disconnected");

  bool indexed = true;
  for (const GosEdge& e : g.edges) {
    if (e.rigid < 0 || e.rigid >= g.n_rigids()) {
      bad("edge '" + e.id + "' references a missing rigid vertex");
      indexed = false;
      continue;
    }
    if (e.cylinder < 0 || e.cylinder >= g.n_cylinders()) {
      bad("edge '" + e.id + "' references a missing cylinder");
      indexed = false;
      continue;
    }
    if (e.fin < 0 || e.fin >= g.rigids[e.rigid].space.n_fins()) {
      bad("edge '" + e.id + "' references a missing fin of '" + g.rigids[e.rigid].id + "'");
      indexed = false;
    }
  }

  if (indexed) {
    std::map<std::pair<int, int>, int> attached;
    for (const GosEdge& e : g.edges) attached[{e.rigid, e.fin}]++;
    for (int r = 0; r < g.n_rigids(); ++r)
      for (int f = 0; f < g.rigids[r].space.n_fins(); ++f) {
        int k = attached.count({r, f}) ? attached[{r, f}] : 0;
        if (k != 1)
          bad("fin '" + g.rigids[r].space.fins[f].id + "' of '" + g.rigids[r].id +
              "' is attached " + std::to_string(k) + " times");
      }

    std::vector<int> link(g.n_cylinders(), 0);
    for (const GosEdge& e : g.edges) link[e.cylinder]++;
    for (int v = 0; v < g.n_cylinders(); ++v)
      if (link[v] == 0) bad("cylinder '" + g.cylinders[v].id + "' has no incident edges");

    // Bipartite incidence graph: rigid nodes then cylinder nodes.
    int n = g.n_rigids() + g.n_cylinders();
    std::vector<std::vector<int>> adj(n);
    for (const GosEdge& e : g.edges) {
      adj[e.rigid].push_back(g.n_rigids() + e.cylinder);
      adj[g.n_rigids() + e.cylinder].push_back(e.rigid);
    }
    if (n > 0) {
      std::vector<char> seen(n, 0);
      std::vector<int> queue{0};
      seen[0] = 1;
      for (size_t i = 0; i < queue.size(); ++i)
        for (int w : adj[queue[i]])
          if (!seen[w]) {
            seen[w] = 1;
            queue.push_back(w);
          }
      if (static_cast<int>(queue.size()) != n) bad("underlying bipartite graph is disconnected");
    }
  }

  for (const RigidSpace& r : g.rigids) {
    const auto& fins = r.space.fins;
    for (size_t i = 0; i < fins.size(); ++i)
      for (size_t j = i + 1; j < fins.size(); ++j)
        if (commensurable_cycles(fins[i].cycle, fins[j].cycle))
          bad("fins '" + fins[i].id + "' and '" + fins[j].id + "' of '" + r.id +
              "' wrap a common line");
  }

  rep.pass = rep.violations.empty();
  return rep;
}

inline void require_valid_gos(const GraphOfSpaces& g) {
  GosReport rep = validate_gos(g);
  if (!rep.pass) throw Error(ErrorCode::ParseError, rep.violations.front());
}

// ---------------------------------------------------------------------------
// Colourings of the fins of a graph of spaces, indexed [rigid][fin].

using GosColouring = std::vector<std::vector<FinColours>>;

inline GosColouring own_colouring(const GraphOfSpaces& g) {
  GosColouring out;
  out.reserve(g.rigids.size());
  for (const RigidSpace& r : g.rigids) out.push_back(r.space.colours);
  return out;
}

inline void check_colouring_shape(const GraphOfSpaces& g, const GosColouring& colouring) {
  if (colouring.size() != g.rigids.size())
    throw Error(ErrorCode::ParseError, "colouring does not cover every rigid space");
  for (int r = 0; r < g.n_rigids(); ++r)
    if (static_cast<int>(colouring[r].size()) != g.rigids[r].space.n_fins())
      throw Error(ErrorCode::ParseError,
                  "colouring does not cover every fin of '" + g.rigids[r].id + "'");
}

inline GraphOfSpaces apply_colouring(GraphOfSpaces g, const GosColouring& colouring) {
  check_colouring_shape(g, colouring);
  for (int r = 0; r < g.n_rigids(); ++r) g.rigids[r].space.colours = colouring[r];
  return g;
}

// ---------------------------------------------------------------------------
// Cylinder numbers: incident-edge counts per colour, per fibre orientation.

struct CylinderNumbers {
  // counts[v][o][c]: edges at cylinder v whose induced oriented fin has
  // colour c, with o = 0 the forward fibre direction and o = 1 the backward.
  std::vector<std::array<std::map<std::string, int>, 2>> counts;
  // Reversing the fibre matches counts through the colour reversal map.
  bool flip_identity = false;
  std::string flip_witness;
};

inline CylinderNumbers cylinder_numbers(const GraphOfSpaces& g, const GosColouring& colouring) {
  check_colouring_shape(g, colouring);
  CylinderNumbers out;
  out.counts.resize(g.cylinders.size());
  for (const GosEdge& e : g.edges) {
    for (int o = 0; o < 2; ++o) {
      OrientedFin s = induced_fin(e, o == 0);
      const std::string& c = colouring[e.rigid][s.fin][s.reversed ? 1 : 0];
      out.counts[e.cylinder][o][c]++;
    }
  }

  // The reversal map colour(S, fwd) <-> colour(S, bwd) must not depend on S.
  std::map<std::string, std::string> bar;
  out.flip_identity = true;
  for (int r = 0; r < g.n_rigids() && out.flip_identity; ++r)
    for (int f = 0; f < g.rigids[r].space.n_fins() && out.flip_identity; ++f) {
      const FinColours& fc = colouring[r][f];
      for (int o = 0; o < 2; ++o) {
        auto [it, fresh] = bar.emplace(fc[o], fc[1 - o]);
        if (!fresh && it->second != fc[1 - o]) {
          out.flip_identity = false;
          out.flip_witness = "colour '" + fc[o] + "' reverses ambiguously";
          break;
        }
      }
    }
  if (out.flip_identity) {
    for (size_t v = 0; v < out.counts.size() && out.flip_identity; ++v)
      for (int o = 0; o < 2 && out.flip_identity; ++o)
        for (const auto& [c, k] : out.counts[v][o]) {
          auto it = out.counts[v][1 - o].find(bar.at(c));
          if (it == out.counts[v][1 - o].end() || it->second != k) {
            out.flip_identity = false;
            out.flip_witness = "cylinder '" + g.cylinders[v].id + "' breaks the flip at colour '" +
                               c + "'";
            break;
          }
        }
  }
  return out;
}

inline CylinderNumbers cylinder_numbers(const GraphOfSpaces& g) {
  return cylinder_numbers(g, own_colouring(g));
}

// ---------------------------------------------------------------------------
// Stretch ratio of a cylinder: attached fin lengths over their gcd.

struct StretchRatio {
  std::vector<std::string> edge_ids;
  std::vector<Int> ratio;  // parallel to edge_ids, gcd-reduced
};

inline StretchRatio stretch_ratio(const GraphOfSpaces& g, int cylinder) {
  if (cylinder < 0 || cylinder >= g.n_cylinders())
    throw Error(ErrorCode::ParseError, "no such cylinder");
  StretchRatio out;
  Int d = 0;
  for (const GosEdge& e : g.edges) {
    if (e.cylinder != cylinder) continue;
    Int len = g.rigids[e.rigid].space.fins[e.fin].length();
    out.edge_ids.push_back(e.id);
    out.ratio.push_back(len);
    d = int_gcd(d, len);
  }
  if (out.ratio.empty())
    throw Error(ErrorCode::ParseError,
                "cylinder '" + g.cylinders[cylinder].id + "' has no incident edges");
  for (Int& r : out.ratio) r /= d;
  return out;
}

inline Int gos_volume(const GraphOfSpaces& g) {
  Int total = 0;
  for (const RigidSpace& r : g.rigids) total += r.space.graph.n_vertices();
  return total;
}

// ---------------------------------------------------------------------------
// Densities. Rigid spaces sharing a universal cover form a class; the class
// density is its share of the total vertex count, and each colour has one
// hosting class on which its per-space density is constant.

struct RigidClassInfo {
  std::vector<int> members;  // rigid indices, ascending
  Rational rho = 0;
};

struct DensityReport {
  Int volume = 0;
  std::vector<RigidClassInfo> classes;
  std::vector<int> class_of;                       // per rigid index
  std::map<std::string, Rational> colour_density;  // rho_c
  std::map<std::string, int> colour_class;         // hosting class per colour
  bool class_partition_ok = false;
  // For every colour, the total length of attached oriented fins of that
  // colour equals rho_c * rho_class * volume.
  bool length_sum_ok = false;
};

namespace detail {

inline Rational colour_density_in(const GraphWithFins& x, const std::vector<FinColours>& cols,
                                  const std::string& colour) {
  Int total = 0;
  for (int f = 0; f < x.n_fins(); ++f) {
    if (cols[f][0] == colour) total += x.fins[f].length();
    if (cols[f][1] == colour) total += x.fins[f].length();
  }
  return Rational(total, Int(x.graph.n_vertices()));
}

}  // namespace detail

// Classes come from one joint refinement of all rigid spaces, so membership
// is transitive by construction.
inline std::vector<int> rigid_classes(const GraphOfSpaces& g) {
  std::vector<GraphWithFins> inputs;
  inputs.reserve(g.rigids.size());
  for (const RigidSpace& r : g.rigids) inputs.push_back(r.space);
  TypeTable t = refine_local_types(inputs);
  std::map<std::set<Hash>, int> index;
  std::vector<int> out;
  for (size_t i = 0; i < inputs.size(); ++i) {
    std::set<Hash> key(t.scales[i].vlabel.begin(), t.scales[i].vlabel.end());
    auto [it, fresh] = index.emplace(key, static_cast<int>(index.size()));
    (void)fresh;
    out.push_back(it->second);
  }
  return out;
}

inline DensityReport densities(const GraphOfSpaces& g, const GosColouring& colouring) {
  check_colouring_shape(g, colouring);
  DensityReport rep;
  rep.volume = gos_volume(g);
  rep.class_of = rigid_classes(g);

  int n_classes = 0;
  for (int c : rep.class_of) n_classes = std::max(n_classes, c + 1);
  rep.classes.resize(n_classes);
  for (int r = 0; r < g.n_rigids(); ++r) rep.classes[rep.class_of[r]].members.push_back(r);
  Rational total_rho = 0;
  for (RigidClassInfo& cls : rep.classes) {
    Int size = 0;
    for (int r : cls.members) size += g.rigids[r].space.graph.n_vertices();
    cls.rho = Rational(size, rep.volume);
    total_rho += cls.rho;
  }
  rep.class_partition_ok = total_rho == 1;

  std::set<std::string> colours;
  for (const auto& row : colouring)
    for (const FinColours& fc : row) {
      colours.insert(fc[0]);
      colours.insert(fc[1]);
    }

  for (const std::string& c : colours) {
    int host = -1;
    for (int r = 0; r < g.n_rigids(); ++r) {
      Rational d = detail::colour_density_in(g.rigids[r].space, colouring[r], c);
      if (d == 0) continue;
      if (host == -1) host = rep.class_of[r];
      if (rep.class_of[r] != host)
        throw Error(ErrorCode::InconsistentClassDensity,
                    "colour '" + c + "' appears in two distinct rigid classes");
    }
    Rational rho_c = 0;
    for (int r : rep.classes[host].members) {
      Rational d = detail::colour_density_in(g.rigids[r].space, colouring[r], c);
      if (r == rep.classes[host].members.front()) {
        rho_c = d;
      } else if (d != rho_c) {
        throw Error(ErrorCode::InconsistentClassDensity,
                    "rigid spaces '" + g.rigids[rep.classes[host].members.front()].id + "' and '" +
                        g.rigids[r].id + "' disagree on the density of colour '" + c + "'");
      }
    }
    rep.colour_density[c] = rho_c;
    rep.colour_class[c] = host;
  }

  rep.length_sum_ok = true;
  for (const auto& [c, rho_c] : rep.colour_density) {
    Rational sum = 0;
    for (const GosEdge& e : g.edges)
      for (int o = 0; o < 2; ++o) {
        OrientedFin s = induced_fin(e, o == 0);
        if (colouring[e.rigid][s.fin][s.reversed ? 1 : 0] == c)
          sum += g.rigids[e.rigid].space.fins[s.fin].length();
      }
    if (sum != rho_c * rep.classes[rep.colour_class.at(c)].rho * rep.volume)
      rep.length_sum_ok = false;
  }
  return rep;
}

inline DensityReport densities(const GraphOfSpaces& g) { return densities(g, own_colouring(g)); }

// ---------------------------------------------------------------------------
// Raw graphs of groups with cyclic edge groups: the balance test operates on
// these before any normalization into a graph of spaces.

// Attachment of one edge end: a closed immersed loop in the vertex graph,
// raised to a nonzero power.
struct RawAttach {
  std::vector<int> cycle;
  Int power = 1;
};

struct RawVertexGroup {
  std::string id;
  Graph graph;
};

struct RawEdgeGroup {
  std::string id;
  int from = -1;
  int to = -1;
  RawAttach at_from;  // lives in the `from` vertex graph
  RawAttach at_to;    // lives in the `to` vertex graph
};

struct RawGraphOfGroups {
  std::vector<RawVertexGroup> vertices;
  std::vector<RawEdgeGroup> edges;

  int n_vertices() const { return static_cast<int>(vertices.size()); }
  int vertex_index(const std::string& id) const {
    for (int i = 0; i < n_vertices(); ++i)
      if (vertices[i].id == id) return i;
    return -1;
  }
};

inline void validate_raw(const RawGraphOfGroups& raw) {
  if (raw.vertices.empty()) throw Error(ErrorCode::ParseError, "no vertex groups");
  std::set<std::string> ids;
  for (const RawVertexGroup& v : raw.vertices) {
    if (v.id.empty() || !ids.insert(v.id).second)
      throw Error(ErrorCode::ParseError, "duplicate or empty vertex id '" + v.id + "'");
    if (!is_connected(v.graph))
      throw Error(ErrorCode::ParseError, "vertex graph '" + v.id + "' is disconnected");
  }
  std::set<std::string> eids;
  for (const RawEdgeGroup& e : raw.edges) {
    if (e.id.empty() || !eids.insert(e.id).second)
      throw Error(ErrorCode::ParseError, "duplicate or empty edge id '" + e.id + "'");
    if (e.from < 0 || e.from >= raw.n_vertices() || e.to < 0 || e.to >= raw.n_vertices())
      throw Error(ErrorCode::ParseError, "edge '" + e.id + "' references a missing vertex");
    validate_closed_immersed(raw.vertices[e.from].graph, e.at_from.cycle,
                             "attachment of edge '" + e.id + "' at '" + raw.vertices[e.from].id +
                                 "'");
    validate_closed_immersed(raw.vertices[e.to].graph, e.at_to.cycle,
                             "attachment of edge '" + e.id + "' at '" + raw.vertices[e.to].id +
                                 "'");
    if (e.at_from.power == 0 || e.at_to.power == 0)
      throw Error(ErrorCode::ParseError, "edge '" + e.id + "' has a zero exponent");
  }
  // Underlying graph must be connected.
  std::vector<std::vector<int>> adj(raw.vertices.size());
  for (const RawEdgeGroup& e : raw.edges) {
    adj[e.from].push_back(e.to);
    adj[e.to].push_back(e.from);
  }
  std::vector<char> seen(raw.vertices.size(), 0);
  std::vector<int> queue{0};
  seen[0] = 1;
  for (size_t i = 0; i < queue.size(); ++i)
    for (int w : adj[queue[i]])
      if (!seen[w]) {
        seen[w] = 1;
        queue.push_back(w);
      }
  if (queue.size() != raw.vertices.size())
    throw Error(ErrorCode::ParseError, "underlying graph is disconnected");
}

// Balanced means: around every loop, the product of the indices by which the
// edge lines stretch is exactly 1. Equivalently there is no relation
// g h^p g^{-1} = h^q with |p| != |q|.
struct BalanceClassification {
  bool subgroup_separable = false;
  bool virtually_special = false;
  // Hyperbolic relative to subgroups that are virtually (free x Z).
  bool relatively_hyperbolic = false;
};

struct BalanceReport {
  bool balanced = false;
  BalanceClassification classification;
  // Unbalanced only: a loop of edge ids whose stretch product is not 1.
  std::vector<std::string> witness_edges;
  Rational holonomy = 1;  // stretch product around the witness loop, >= 1
};

inline BalanceReport balanced(const RawGraphOfGroups& raw) {
  validate_raw(raw);

  // Nodes of the cylinder multigraph: one per commensurability class of
  // attachment lines at each vertex group.
  std::map<std::pair<int, std::vector<int>>, int> node_of;
  auto node = [&](int vertex, const std::vector<int>& cycle) {
    auto key = std::make_pair(vertex, dart_line_key(cycle));
    auto [it, fresh] = node_of.emplace(key, static_cast<int>(node_of.size()));
    (void)fresh;
    return it->second;
  };

  struct MEdge {
    int a, b;
    Rational ratio;  // traversing a -> b multiplies the fibre index by this
    std::string id;
  };
  std::vector<MEdge> medges;
  for (const RawEdgeGroup& e : raw.edges) {
    int a = node(e.from, e.at_from.cycle);
    int b = node(e.to, e.at_to.cycle);
    // The stored cycle may itself be a proper power; fold that into the
    // exponent so the ratio compares line indices.
    Int ka = e.at_from.power * primitive_root(make_cyclic(e.at_from.cycle)).second;
    Int kb = e.at_to.power * primitive_root(make_cyclic(e.at_to.cycle)).second;
    medges.push_back({a, b, Rational(abs(kb), abs(ka)), e.id});
  }

  int n = static_cast<int>(node_of.size());
  std::vector<Rational> pot(n, Rational(0));
  std::vector<char> assigned(n, 0);
  std::vector<int> parent_edge(n, -1);  // medge index used to reach the node
  BalanceReport rep;
  rep.balanced = true;

  std::vector<std::vector<int>> at(n);
  for (int i = 0; i < static_cast<int>(medges.size()); ++i) {
    at[medges[i].a].push_back(i);
    at[medges[i].b].push_back(i);
  }

  auto path_to_root = [&](int x) {
    std::vector<int> out;
    while (parent_edge[x] != -1) {
      int ei = parent_edge[x];
      out.push_back(ei);
      x = (medges[ei].a == x) ? medges[ei].b : medges[ei].a;
    }
    return out;
  };

  for (int root = 0; root < n && rep.balanced; ++root) {
    if (assigned[root]) continue;
    pot[root] = 1;
    assigned[root] = 1;
    std::vector<int> queue{root};
    for (size_t qi = 0; qi < queue.size() && rep.balanced; ++qi) {
      int x = queue[qi];
      for (int ei : at[x]) {
        const MEdge& m = medges[ei];
        int y = (m.a == x) ? m.b : m.a;
        Rational via = pot[x];
        if (m.a == x)
          via *= m.ratio;
        else
          via /= m.ratio;
        if (!assigned[y]) {
          pot[y] = via;
          assigned[y] = 1;
          parent_edge[y] = ei;
          queue.push_back(y);
        } else if (pot[y] != via) {
          rep.balanced = false;
          // Witness loop: tree path from y, the offending edge, tree path
          // back from x. Shared prefix edges cancel but stay correct.
          std::vector<int> up = path_to_root(x), down = path_to_root(y);
          while (!up.empty() && !down.empty() && up.back() == down.back()) {
            up.pop_back();
            down.pop_back();
          }
          for (int pe : up) rep.witness_edges.push_back(medges[pe].id);
          rep.witness_edges.push_back(m.id);
          for (auto it = down.rbegin(); it != down.rend(); ++it)
            rep.witness_edges.push_back(medges[*it].id);
          rep.holonomy = via / pot[y];
          if (rep.holonomy < 1) rep.holonomy = 1 / rep.holonomy;
          break;
        }
      }
    }
  }

  rep.classification.subgroup_separable = rep.balanced;
  rep.classification.virtually_special = rep.balanced;
  rep.classification.relatively_hyperbolic = rep.balanced;
  return rep;
}

}  // namespace fincover
