#include <catch2/catch_amalgamated.hpp>

#include <set>
#include <string>
#include <vector>

#include "fincover/fins.hpp"
#include "fincover/gos.hpp"
#include "fincover/rational.hpp"

#include "fixtures.hpp"
#include "random_gwf.hpp"

using namespace fincover;
using fixtures::amalgam_gos;
using fixtures::commutator_torus_gos;
using fixtures::raw_bs;
using fixtures::rose2_with_fins;
using fixtures::rose_graph;

namespace {

// Error code raised by f, if any.
template <typename F>
ErrorCode code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::ParseError;
}

bool mentions(const std::vector<std::string>& violations, const std::string& needle) {
  for (const std::string& v : violations)
    if (v.find(needle) != std::string::npos) return true;
  return false;
}

}  // namespace

TEST_CASE("dart line keys identify loops wrapping a common line") {
  // x vs x^2
  CHECK(commensurable_cycles({0}, {0, 0}));
  // xy vs its rotation yx
  CHECK(commensurable_cycles({0, 2}, {2, 0}));
  // xy vs its inverse YX
  CHECK(commensurable_cycles({0, 2}, {3, 1}));
  // (YX)^2 vs xy
  CHECK(commensurable_cycles({3, 1, 3, 1}, {0, 2}));
  // xy vs xY are genuinely different lines
  CHECK_FALSE(commensurable_cycles({0, 2}, {0, 3}));
  // x vs y
  CHECK_FALSE(commensurable_cycles({0}, {2}));
}

TEST_CASE("validate_gos accepts the hand fixtures") {
  CHECK(validate_gos(amalgam_gos()).pass);
  CHECK(validate_gos(commutator_torus_gos()).pass);
}

TEST_CASE("validate_gos reports structural violations") {
  SECTION("unattached fin") {
    GraphOfSpaces g = amalgam_gos();
    g.edges.pop_back();  // SB is now loose, Z keeps one edge
    GosReport rep = validate_gos(g);
    CHECK_FALSE(rep.pass);
    CHECK(mentions(rep.violations, "attached 0 times"));
  }
  SECTION("doubly attached fin") {
    GraphOfSpaces g = amalgam_gos();
    g.edges.push_back({"eA2", 0, 0, 0, false});
    GosReport rep = validate_gos(g);
    CHECK_FALSE(rep.pass);
    CHECK(mentions(rep.violations, "attached 2 times"));
  }
  SECTION("commensurable fins at one rigid vertex") {
    GraphOfSpaces g;
    // xy and YX wrap the same line.
    g.rigids.push_back({"A", rose2_with_fins({Fin{"S1", {0, 2}}, Fin{"S2", {3, 1}}})});
    g.cylinders.push_back({"Z1", CylinderKind::Circle, "z1"});
    g.cylinders.push_back({"Z2", CylinderKind::Circle, "z2"});
    g.edges.push_back({"e1", 0, 0, 0, true});
    g.edges.push_back({"e2", 0, 1, 1, true});
    GosReport rep = validate_gos(g);
    CHECK_FALSE(rep.pass);
    CHECK(mentions(rep.violations, "common line"));
  }
  SECTION("disconnected shape") {
    GraphOfSpaces g;
    g.rigids.push_back({"A", rose2_with_fins({Fin{"S1", {0, 2}}})});
    g.rigids.push_back({"B", rose2_with_fins({Fin{"S2", {0, 3}}})});
    g.cylinders.push_back({"Z1", CylinderKind::Circle, "z1"});
    g.cylinders.push_back({"Z2", CylinderKind::Circle, "z2"});
    g.edges.push_back({"e1", 0, 0, 0, true});
    g.edges.push_back({"e2", 1, 0, 1, true});
    GosReport rep = validate_gos(g);
    CHECK_FALSE(rep.pass);
    CHECK(mentions(rep.violations, "disconnected"));
  }
  SECTION("cylinder without edges") {
    GraphOfSpaces g = amalgam_gos();
    g.cylinders.push_back({"Z2", CylinderKind::Circle, "z2"});
    CHECK(mentions(validate_gos(g).violations, "no incident edges"));
  }
  SECTION("missing fin index") {
    GraphOfSpaces g = amalgam_gos();
    g.edges[0].fin = 7;
    CHECK(mentions(validate_gos(g).violations, "missing fin"));
  }
}

TEST_CASE("cylinder numbers count incident oriented colours") {
  SECTION("single edge at a torus") {
    GraphOfSpaces g = commutator_torus_gos();
    CylinderNumbers t = cylinder_numbers(g);
    REQUIRE(t.counts.size() == 1);
    CHECK(t.counts[0][0].at("Sw+") == 1);
    CHECK(t.counts[0][0].size() == 1);
    CHECK(t.counts[0][1].at("Sw-") == 1);
    CHECK(t.flip_identity);
  }
  SECTION("two edges of the same colour give a count of two") {
    GraphOfSpaces g;
    g.rigids.push_back(
        {"A", rose2_with_fins({Fin{"S1", {0, 2}}, Fin{"S2", {0, 3, 0, 2}}},
                              {{"c", "d"}, {"c", "d"}})});
    g.cylinders.push_back({"Z", CylinderKind::Circle, "z"});
    g.edges.push_back({"e1", 0, 0, 0, true});
    g.edges.push_back({"e2", 0, 1, 0, true});
    REQUIRE(validate_gos(g).pass);
    CylinderNumbers t = cylinder_numbers(g);
    CHECK(t.counts[0][0].at("c") == 2);
    CHECK(t.counts[0][1].at("d") == 2);
    CHECK(t.flip_identity);

    // Reversing one attachment moves one count across the orientations.
    g.edges[1].aligned = false;
    t = cylinder_numbers(g);
    CHECK(t.counts[0][0].at("c") == 1);
    CHECK(t.counts[0][0].at("d") == 1);
    CHECK(t.counts[0][1].at("c") == 1);
    CHECK(t.flip_identity);
  }
  SECTION("ambiguous reversal is reported, not hidden") {
    GraphOfSpaces g;
    g.rigids.push_back(
        {"A", rose2_with_fins({Fin{"S1", {0, 2}}, Fin{"S2", {0, 3, 0, 2}}},
                              {{"c", "d"}, {"c", "e"}})});
    g.cylinders.push_back({"Z", CylinderKind::Circle, "z"});
    g.edges.push_back({"e1", 0, 0, 0, true});
    g.edges.push_back({"e2", 0, 1, 0, true});
    CylinderNumbers t = cylinder_numbers(g);
    CHECK_FALSE(t.flip_identity);
    CHECK(t.flip_witness.find("ambiguously") != std::string::npos);
  }
}

TEST_CASE("stretch ratios are attached fin lengths over their gcd") {
  SECTION("lengths 2 and 4 reduce to [1, 2]") {
    StretchRatio s = stretch_ratio(amalgam_gos(), 0);
    CHECK(s.edge_ids == std::vector<std::string>{"eA", "eB"});
    CHECK(s.ratio == std::vector<Int>{1, 2});
  }
  SECTION("single incident edge") {
    StretchRatio s = stretch_ratio(commutator_torus_gos(), 0);
    CHECK(s.ratio == std::vector<Int>{1});
  }
  SECTION("three fins of equal length") {
    GraphOfSpaces g;
    Graph r3 = rose_graph(3);
    g.rigids.push_back({"A", build_graph_with_fins(
                                 r3, {Fin{"S0", {0}}, Fin{"S1", {2}}, Fin{"S2", {4}}})});
    g.cylinders.push_back({"Z", CylinderKind::Circle, "z"});
    g.edges.push_back({"e0", 0, 0, 0, true});
    g.edges.push_back({"e1", 0, 1, 0, true});
    g.edges.push_back({"e2", 0, 2, 0, false});
    REQUIRE(validate_gos(g).pass);
    CHECK(stretch_ratio(g, 0).ratio == std::vector<Int>{1, 1, 1});
  }
  SECTION("invariant under subdividing every rigid space") {
    GraphOfSpaces g = amalgam_gos();
    for (RigidSpace& r : g.rigids) r.space = subdivide(r.space, 3);
    REQUIRE(validate_gos(g).pass);
    StretchRatio s = stretch_ratio(g, 0);
    CHECK(s.ratio == std::vector<Int>{1, 2});
  }
}

TEST_CASE("densities split the volume into rigid classes") {
  SECTION("two distinct classes of size one") {
    DensityReport rep = densities(amalgam_gos());
    CHECK(rep.volume == 2);
    REQUIRE(rep.classes.size() == 2);
    CHECK(rep.classes[0].rho == Rational(1, 2));
    CHECK(rep.classes[1].rho == Rational(1, 2));
    CHECK(rep.class_of == std::vector<int>{0, 1});
    CHECK(rep.colour_density.at("SA+") == 2);
    CHECK(rep.colour_density.at("SB-") == 4);
    CHECK(rep.colour_class.at("SA+") == 0);
    CHECK(rep.colour_class.at("SB+") == 1);
    CHECK(rep.class_partition_ok);
    CHECK(rep.length_sum_ok);
  }
  SECTION("one rigid space glued to a torus") {
    DensityReport rep = densities(commutator_torus_gos());
    CHECK(rep.volume == 1);
    REQUIRE(rep.classes.size() == 1);
    CHECK(rep.classes[0].rho == 1);
    CHECK(rep.colour_density.at("Sw+") == 4);
    CHECK(rep.class_partition_ok);
    CHECK(rep.length_sum_ok);
  }
  SECTION("two isomorphic rigid spaces share one class") {
    GraphOfSpaces g;
    g.rigids.push_back({"A", rose2_with_fins({Fin{"w", {0, 2}}})});
    g.rigids.push_back({"B", rose2_with_fins({Fin{"w", {0, 2}}})});
    g.cylinders.push_back({"Z", CylinderKind::Circle, "z"});
    g.edges.push_back({"eA", 0, 0, 0, true});
    g.edges.push_back({"eB", 1, 0, 0, true});
    REQUIRE(validate_gos(g).pass);
    DensityReport rep = densities(g);
    CHECK(rep.volume == 2);
    REQUIRE(rep.classes.size() == 1);
    CHECK(rep.classes[0].rho == 1);
    CHECK(rep.colour_density.at("w+") == 2);
    CHECK(rep.length_sum_ok);
  }
  SECTION("same-class spaces must agree on every colour density") {
    GraphOfSpaces g;
    g.rigids.push_back({"A", rose2_with_fins({Fin{"w", {0, 2}}})});
    g.rigids.push_back({"B", rose2_with_fins({Fin{"w", {0, 2}}})});
    g.cylinders.push_back({"Z", CylinderKind::Circle, "z"});
    g.edges.push_back({"eA", 0, 0, 0, true});
    g.edges.push_back({"eB", 1, 0, 0, true});
    GosColouring cols{{{"c", "d"}}, {{"e", "f"}}};
    CHECK(code_of([&] { densities(g, cols); }) == ErrorCode::InconsistentClassDensity);
  }
  SECTION("a colour may not straddle two classes") {
    GosColouring cols{{{"c", "d"}}, {{"c", "f"}}};
    CHECK(code_of([&] { densities(amalgam_gos(), cols); }) ==
          ErrorCode::InconsistentClassDensity);
  }
}

TEST_CASE("balance verdict for Baumslag-Solitar groups") {
  // BS(m, n) has one loop, so it is balanced exactly when |m| = |n|.
  for (int m = -3; m <= 3; ++m)
    for (int n = -3; n <= 3; ++n) {
      if (m == 0 || n == 0) continue;
      BalanceReport rep = balanced(raw_bs(m, n));
      bool expect = (m < 0 ? -m : m) == (n < 0 ? -n : n);
      INFO("BS(" << m << ", " << n << ")");
      CHECK(rep.balanced == expect);
      CHECK(rep.classification.subgroup_separable == expect);
      CHECK(rep.classification.virtually_special == expect);
      CHECK(rep.classification.relatively_hyperbolic == expect);
    }

  BalanceReport rep = balanced(raw_bs(1, 2));
  CHECK(rep.witness_edges == std::vector<std::string>{"t"});
  CHECK(rep.holonomy == 2);
}

TEST_CASE("trees are balanced and independent lines stay independent") {
  SECTION("one edge between two vertex groups") {
    RawGraphOfGroups raw;
    raw.vertices.push_back({"u", rose_graph(1)});
    raw.vertices.push_back({"v", rose_graph(1)});
    raw.edges.push_back({"e", 0, 1, RawAttach{{0}, 3}, RawAttach{{0}, 5}});
    CHECK(balanced(raw).balanced);
  }
  SECTION("a loop moving between two lines of one vertex group is a tree edge") {
    RawGraphOfGroups raw;
    raw.vertices.push_back({"v", rose_graph(2)});
    raw.edges.push_back({"t", 0, 0, RawAttach{{0}, 1}, RawAttach{{2}, 2}});
    CHECK(balanced(raw).balanced);
  }
  SECTION("only the unbalanced loop is reported") {
    RawGraphOfGroups raw;
    raw.vertices.push_back({"v", rose_graph(2)});
    raw.edges.push_back({"tx", 0, 0, RawAttach{{0}, 1}, RawAttach{{0}, 1}});
    raw.edges.push_back({"txy", 0, 0, RawAttach{{0, 2}, 1}, RawAttach{{0, 2}, 2}});
    BalanceReport rep = balanced(raw);
    CHECK_FALSE(rep.balanced);
    CHECK(rep.witness_edges == std::vector<std::string>{"txy"});
    CHECK(rep.holonomy == 2);
  }
  SECTION("a line and its inverse are the same line") {
    RawGraphOfGroups raw;
    raw.vertices.push_back({"v", rose_graph(1)});
    raw.edges.push_back({"t", 0, 0, RawAttach{{0}, 1}, RawAttach{{1}, 1}});
    CHECK(balanced(raw).balanced);
    raw.edges[0].at_to.power = 2;
    BalanceReport rep = balanced(raw);
    CHECK_FALSE(rep.balanced);
    CHECK(rep.holonomy == 2);
  }
}

TEST_CASE("balance is invariant under finite covers of the input") {
  // Unwrapping the loop of BS(1, 2) twice: a cycle of two edges, both
  // stretching by 2, with loop holonomy 4.
  RawGraphOfGroups cover2;
  cover2.vertices.push_back({"u", rose_graph(1)});
  cover2.vertices.push_back({"v", rose_graph(1)});
  cover2.edges.push_back({"t0", 0, 1, RawAttach{{0}, 1}, RawAttach{{0}, 2}});
  cover2.edges.push_back({"t1", 1, 0, RawAttach{{0}, 1}, RawAttach{{0}, 2}});
  BalanceReport rep = balanced(cover2);
  CHECK_FALSE(rep.balanced);
  CHECK(rep.holonomy == 4);
  CHECK(rep.witness_edges.size() == 2);

  // Same unwrapping of BS(2, 2) stays balanced.
  cover2.edges[0].at_from.power = 2;
  cover2.edges[1].at_from.power = 2;
  CHECK(balanced(cover2).balanced);

  // Doubling the vertex group instead: g^4 and g^6 lift to the squares of
  // the fibre circle of the double cover, and the holonomy 3/2 survives.
  RawGraphOfGroups vcover;
  Graph c2 = make_graph({"a", "b"}, {"p", "q"}, {0, 1}, {1, 0});
  vcover.vertices.push_back({"v", c2});
  vcover.edges.push_back({"t", 0, 0, RawAttach{{0, 2}, 2}, RawAttach{{0, 2}, 3}});
  BalanceReport base = balanced(raw_bs(4, 6));
  BalanceReport lifted = balanced(vcover);
  CHECK_FALSE(base.balanced);
  CHECK_FALSE(lifted.balanced);
  CHECK(base.holonomy == Rational(3, 2));
  CHECK(lifted.holonomy == base.holonomy);
}

TEST_CASE("imprimitive attachment cycles fold into the exponent") {
  RawGraphOfGroups raw = raw_bs(1, 1);
  raw.edges[0].at_to = RawAttach{{0, 0}, 1};  // g^2 stored as a doubled cycle
  BalanceReport rep = balanced(raw);
  CHECK_FALSE(rep.balanced);
  CHECK(rep.holonomy == 2);
  BalanceReport direct = balanced(raw_bs(1, 2));
  CHECK(rep.holonomy == direct.holonomy);
  CHECK(rep.witness_edges == direct.witness_edges);
}

TEST_CASE("raw input validation") {
  CHECK(code_of([] {
          RawGraphOfGroups raw = raw_bs(1, 0);
          validate_raw(raw);
        }) == ErrorCode::ParseError);
  CHECK(code_of([] {
          RawGraphOfGroups raw = raw_bs(1, 1);
          raw.edges[0].at_to.cycle = {0, 1};  // backtracks
          validate_raw(raw);
        }) == ErrorCode::BacktrackingLoop);
  CHECK(code_of([] {
          RawGraphOfGroups raw = raw_bs(1, 1);
          raw.edges[0].at_to.cycle = {5};
          validate_raw(raw);
        }) == ErrorCode::DanglingDart);
  CHECK(code_of([] {
          RawGraphOfGroups raw = raw_bs(1, 1);
          raw.vertices.push_back({"w", fixtures::rose_graph(1)});
          validate_raw(raw);
        }) == ErrorCode::ParseError);
}

TEST_CASE("identities hold on randomly generated graphs of spaces") {
  std::mt19937_64 rng(90210u);
  int used = 0;
  for (int round = 0; round < 30 && used < 12; ++round) {
    GraphWithFins x = testsupport::random_gwf(rng, 6, 3, 3);
    if (x.n_fins() == 0) continue;

    GraphOfSpaces g;
    g.rigids.push_back({"A", x});
    for (int f = 0; f < x.n_fins(); ++f) {
      std::string zid = "Z" + std::to_string(f);
      g.cylinders.push_back({zid, CylinderKind::Circle, zid});
      g.edges.push_back({"e" + std::to_string(f), 0, f, f, (f % 2) == 0});
    }
    if (!validate_gos(g).pass) continue;  // commensurable random fins
    ++used;

    CylinderNumbers t = cylinder_numbers(g);
    CHECK(t.flip_identity);
    for (const auto& per : t.counts) {
      int fwd = 0, bwd = 0;
      for (const auto& [c, k] : per[0]) fwd += k;
      for (const auto& [c, k] : per[1]) bwd += k;
      CHECK(fwd == bwd);
    }

    DensityReport rep = densities(g);
    CHECK(rep.class_partition_ok);
    CHECK(rep.length_sum_ok);
    CHECK(rep.volume == x.graph.n_vertices());

    // Subdividing the rigid space preserves the identities and the stretch.
    GraphOfSpaces gs = g;
    gs.rigids[0].space = subdivide(x, 2);
    REQUIRE(validate_gos(gs).pass);
    DensityReport reps = densities(gs);
    CHECK(reps.class_partition_ok);
    CHECK(reps.length_sum_ok);
    for (int v = 0; v < gs.n_cylinders(); ++v)
      CHECK(stretch_ratio(gs, v).ratio == stretch_ratio(g, v).ratio);
  }
  CHECK(used >= 5);
}
