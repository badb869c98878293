#pragma once

// Shared test fixtures. All are tiny hand-checked objects; the expected
// values asserted against them in the suites were computed by hand or by the
// independent oracles defined next to the tests.

#include <string>
#include <vector>

#include "fincover/covering.hpp"
#include "fincover/fins.hpp"
#include "fincover/gos.hpp"

namespace fixtures {

using namespace fincover;

// Single vertex with one loop and the fin running around it once.
inline GraphWithFins circle1(const std::string& fwd = "c+", const std::string& bwd = "c-") {
  Graph g = make_graph({"v"}, {"x"}, {0}, {0});
  return build_graph_with_fins(std::move(g), {Fin{"S", {0}}}, {{fwd, bwd}});
}

// Two vertices joined by edges a, b into a circle; the fin runs around once.
// This is the connected double cover of circle1.
inline GraphWithFins circle2(const std::string& fwd = "c+", const std::string& bwd = "c-") {
  Graph g = make_graph({"u0", "u1"}, {"a", "b"}, {0, 1}, {1, 0});
  return build_graph_with_fins(std::move(g), {Fin{"S", {0, 2}}}, {{fwd, bwd}});
}

inline CoveringMap circle_double_cover() {
  GraphWithFins c2 = circle2();
  GraphWithFins c1 = circle1();
  // a+ -> x+, a- -> x-, b+ -> x+, b- -> x-
  return CoveringMap{c2, c1, {0, 0}, {0, 1, 0, 1}, {FinImage{0, 0, 2, false}}};
}

// Rose with petals x, y and the fins x, y, xy (fresh colour per orientation).
inline GraphWithFins rose_xy_fins() {
  Graph g = make_graph({"v"}, {"x", "y"}, {0, 0}, {0, 0});
  std::vector<Fin> fins{Fin{"Sx", {0}}, Fin{"Sy", {2}}, Fin{"Sxy", {0, 2}}};
  return build_graph_with_fins(std::move(g), std::move(fins));
}

// Star with one centre and three leaves, no fins.
inline GraphWithFins star3() {
  Graph g = make_graph({"c", "l0", "l1", "l2"}, {"e0", "e1", "e2"}, {0, 0, 0}, {1, 2, 3});
  return build_graph_with_fins(std::move(g), {}, {});
}

// One vertex, `rank` loops named g0, g1, ...; loop k has darts 2k, 2k+1.
inline Graph rose_graph(int rank) {
  std::vector<std::string> enames;
  for (int i = 0; i < rank; ++i) enames.push_back("g" + std::to_string(i));
  return make_graph({"v"}, enames, std::vector<int>(rank, 0), std::vector<int>(rank, 0));
}

// Rose on x (darts 0, 1) and y (darts 2, 3) with the given fins.
inline GraphWithFins rose2_with_fins(std::vector<Fin> fins,
                                     std::vector<FinColours> colours = {}) {
  Graph g = make_graph({"v"}, {"x", "y"}, {0, 0}, {0, 0});
  return build_graph_with_fins(std::move(g), std::move(fins), std::move(colours));
}

// Baumslag-Solitar group BS(m, n) = <g, t | t g^m t^-1 = g^n> as a raw graph
// of groups: one rank-1 vertex group, one loop edge with exponents (m, n).
inline RawGraphOfGroups raw_bs(Int m, Int n) {
  RawGraphOfGroups raw;
  raw.vertices.push_back({"v", rose_graph(1)});
  raw.edges.push_back({"t", 0, 0, RawAttach{{0}, m}, RawAttach{{0}, n}});
  return raw;
}

// Two rose vertex spaces with fins of lengths 2 and 4 glued through one
// circle cylinder. The stretch ratio at the cylinder is [1, 2].
inline GraphOfSpaces amalgam_gos() {
  GraphOfSpaces g;
  g.rigids.push_back({"A", rose2_with_fins({Fin{"SA", {0, 2}}})});          // xy
  g.rigids.push_back({"B", rose2_with_fins({Fin{"SB", {0, 0, 2, 2}}})});    // xxyy
  g.cylinders.push_back({"Z", CylinderKind::Circle, "z"});
  g.edges.push_back({"eA", 0, 0, 0, true});
  g.edges.push_back({"eB", 1, 0, 0, true});
  return g;
}

// One rose vertex space whose single fin is the commutator xyXY, glued to a
// torus cylinder along its fibre.
inline GraphOfSpaces commutator_torus_gos() {
  GraphOfSpaces g;
  g.rigids.push_back({"R", rose2_with_fins({Fin{"Sw", {0, 2, 1, 3}}})});
  g.cylinders.push_back({"Z", CylinderKind::Torus, "z"});
  g.edges.push_back({"e", 0, 0, 0, true});
  return g;
}

// One rose vertex space with the fin xy, glued to one circle cylinder.
inline GraphOfSpaces one_fin_gos() {
  GraphOfSpaces g;
  g.rigids.push_back({"R", rose2_with_fins({Fin{"S", {0, 2}}})});
  g.cylinders.push_back({"Z", CylinderKind::Circle, "z"});
  g.edges.push_back({"e", 0, 0, 0, true});
  return g;
}

// The connected double cover of rose2 on which both x and y switch sheets.
// Each fin of the base lifts through induced_cover.
inline CoveringMap rose2_switch_double_cover(const GraphWithFins& base) {
  Graph tot = make_graph({"v0", "v1"}, {"x0", "x1", "y0", "y1"}, {0, 1, 0, 1}, {1, 0, 1, 0});
  std::vector<int> dmap{0, 1, 0, 1, 2, 3, 2, 3};
  return induced_cover(base, GraphCover{tot, {0, 0}, dmap});
}

// Degree-2 cover of amalgam_gos: both rose vertex spaces replaced by their
// switch double covers; each fin lifts to two fins, one cylinder per pair.
inline GraphOfSpaces amalgam_double_cover_gos() {
  CoveringMap covA = rose2_switch_double_cover(rose2_with_fins({Fin{"SA", {0, 2}}}));
  CoveringMap covB = rose2_switch_double_cover(rose2_with_fins({Fin{"SB", {0, 0, 2, 2}}}));
  GraphOfSpaces g;
  g.rigids.push_back({"A2", covA.source});
  g.rigids.push_back({"B2", covB.source});
  g.cylinders.push_back({"Z0", CylinderKind::Circle, "z"});
  g.cylinders.push_back({"Z1", CylinderKind::Circle, "z"});
  g.edges.push_back({"fA0", 0, 0, 0, true});
  g.edges.push_back({"fA1", 0, 1, 1, true});
  g.edges.push_back({"fB0", 1, 0, 0, true});
  g.edges.push_back({"fB1", 1, 1, 1, true});
  return g;
}

// Connected Z/3 cover of one_fin_gos along x: the fin xy lifts to a single
// fin of length 6.
inline GraphOfSpaces triple_cover_gos() {
  GraphWithFins base = rose2_with_fins({Fin{"S", {0, 2}}});
  Graph tot = make_graph({"v0", "v1", "v2"}, {"x0", "x1", "x2", "y0", "y1", "y2"},
                         {0, 1, 2, 0, 1, 2}, {1, 2, 0, 0, 1, 2});
  std::vector<int> dmap{0, 1, 0, 1, 0, 1, 2, 3, 2, 3, 2, 3};
  CoveringMap cov = induced_cover(base, GraphCover{tot, {0, 0, 0}, dmap});
  GraphOfSpaces g;
  g.rigids.push_back({"R3", cov.source});
  g.cylinders.push_back({"Z3", CylinderKind::Circle, "z"});
  g.edges.push_back({"e3", 0, 0, 0, true});
  return g;
}

// Switch double cover of one_fin_gos with both length-2 fin lifts attached
// to a single cylinder: the cylinder carries two link edges of one colour.
inline GraphOfSpaces crowded_cylinder_gos() {
  CoveringMap cov = rose2_switch_double_cover(rose2_with_fins({Fin{"S", {0, 2}}}));
  GraphOfSpaces g;
  g.rigids.push_back({"R2", cov.source});
  g.cylinders.push_back({"Z2", CylinderKind::Circle, "z"});
  g.edges.push_back({"f0", 0, 0, 0, true});
  g.edges.push_back({"f1", 0, 1, 0, true});
  return g;
}

// Circle with n vertices and a fin wrapping it once, glued to one cylinder.
inline GraphOfSpaces circle_gos(int n, const std::string& tag) {
  std::vector<std::string> vn, en;
  std::vector<int> from, to;
  for (int i = 0; i < n; ++i) {
    vn.push_back("v" + std::to_string(i));
    en.push_back("c" + std::to_string(i));
    from.push_back(i);
    to.push_back((i + 1) % n);
  }
  Graph g = make_graph(vn, en, from, to);
  std::vector<int> darts;
  for (int i = 0; i < n; ++i) darts.push_back(2 * i);
  GraphOfSpaces gos;
  gos.rigids.push_back({"R" + tag, build_graph_with_fins(std::move(g), {Fin{"S", darts}}, {})});
  gos.cylinders.push_back({"Z" + tag, CylinderKind::Circle, "z"});
  gos.edges.push_back({"e" + tag, 0, 0, 0, true});
  return gos;
}

}  // namespace fixtures
