#include <catch2/catch_amalgamated.hpp>

#include "fincover/covering.hpp"
#include "fincover/local_types.hpp"

#include "fixtures.hpp"
#include "random_gwf.hpp"

using namespace fincover;
using fixtures::circle1;
using fixtures::circle2;
using fixtures::rose_xy_fins;
using fixtures::star3;

TEST_CASE("refinement is deterministic") {
  GraphWithFins x = rose_xy_fins();
  TypeTable a = refine_local_types({x});
  TypeTable b = refine_local_types({x});
  CHECK(a.rounds == b.rounds);
  CHECK(a.inputs[0].vertex_types == b.inputs[0].vertex_types);
  for (size_t f = 0; f < x.fins.size(); ++f) {
    CHECK(a.inputs[0].fin_labels[f].fwd == b.inputs[0].fin_labels[f].fwd);
    CHECK(a.inputs[0].fin_labels[f].bwd == b.inputs[0].fin_labels[f].bwd);
  }
}

TEST_CASE("a circle and its double cover share a universal cover") {
  UniversalCoverReport rep = same_universal_cover(circle1(), circle2());
  CHECK(rep.compatible);
  CHECK(rep.witness.empty());
}

TEST_CASE("different local structures are incompatible") {
  SECTION("fin against no fin") {
    Graph g = make_graph({"v"}, {"x"}, {0}, {0});
    GraphWithFins bare = build_graph_with_fins(std::move(g), {}, {});
    UniversalCoverReport rep = same_universal_cover(circle1(), bare);
    CHECK_FALSE(rep.compatible);
    CHECK_FALSE(rep.witness.empty());
  }
  SECTION("different valences") {
    Graph rose = make_graph({"v"}, {"x", "y"}, {0, 0}, {0, 0});
    GraphWithFins r = build_graph_with_fins(std::move(rose), {}, {});
    Graph loop = make_graph({"v"}, {"x"}, {0}, {0});
    GraphWithFins c = build_graph_with_fins(std::move(loop), {}, {});
    CHECK_FALSE(same_universal_cover(r, c).compatible);
  }
  SECTION("subdivision changes the scale at branching vertices") {
    GraphWithFins x = rose_xy_fins();
    CHECK_FALSE(same_universal_cover(x, subdivide(x, 2)).compatible);
  }
  SECTION("circles are self similar, so subdividing one stays compatible") {
    GraphWithFins x = circle1();
    CHECK(same_universal_cover(x, subdivide(x, 2)).compatible);
  }
}

TEST_CASE("canonical colours are invariant under pullback") {
  GraphWithFins base = circle1();
  GraphWithFins cover = circle2();
  CanonicalColours cc = compute_canonical_colours({base, cover});
  // the lifted fin gets the same canonical colour as its image
  CHECK(cc.colours[0][0][0] == cc.colours[1][0][0]);
  CHECK(cc.colours[0][0][1] == cc.colours[1][0][1]);
}

TEST_CASE("canonical colours are invariant under pullback along random covers",
          "[property]") {
  std::mt19937_64 rng(31337u);
  for (int round = 0; round < 12; ++round) {
    GraphWithFins base = testsupport::random_gwf(rng, 5, 3, 2);
    if (base.fins.empty()) continue;
    int degree = 1 + testsupport::draw(rng, 3);
    GraphCover gc = testsupport::random_permutation_cover(base.graph, degree, rng);
    CoveringMap c = induced_cover(base, gc);
    CanonicalColours cc = compute_canonical_colours({base, c.source});
    for (size_t f = 0; f < c.source.fins.size(); ++f) {
      const FinImage& im = c.fin_map[f];
      CAPTURE(round, f, im.fin, im.reversed);
      // forward orientation of the lift projects to (im.fin, im.reversed)
      REQUIRE(cc.colours[1][f][0] == cc.colours[0][static_cast<size_t>(im.fin)][im.reversed ? 1 : 0]);
      REQUIRE(cc.colours[1][f][1] == cc.colours[0][static_cast<size_t>(im.fin)][im.reversed ? 0 : 1]);
    }
  }
}

TEST_CASE("power fins are locally distinguishable from simple fins") {
  Graph g1 = make_graph({"v"}, {"x"}, {0}, {0});
  GraphWithFins once = build_graph_with_fins(std::move(g1), {Fin{"S", {0}}}, {{"c+", "c-"}});
  Graph g2 = make_graph({"v"}, {"x"}, {0}, {0});
  GraphWithFins twice = build_graph_with_fins(std::move(g2), {Fin{"S", {0, 0}}}, {{"c+", "c-"}});
  // the doubly wrapping fin puts two arcs through the vertex
  CHECK_FALSE(same_universal_cover(once, twice).compatible);
}

TEST_CASE("fin transitivity check") {
  SECTION("pass: symmetric petals sharing a colour") {
    Graph rose = make_graph({"v"}, {"x", "y"}, {0, 0}, {0, 0});
    GraphWithFins x = build_graph_with_fins(
        std::move(rose), {Fin{"Sx", {0}}, Fin{"Sy", {2}}}, {{"c", "d"}, {"c", "d"}});
    TransitivityReport rep = check_fin_transitivity({x});
    CHECK(rep.pass);
    CHECK(rep.violations.empty());
  }
  SECTION("fail: structurally different fins sharing a colour") {
    Graph rose = make_graph({"v"}, {"x", "y"}, {0, 0}, {0, 0});
    GraphWithFins x = build_graph_with_fins(
        std::move(rose), {Fin{"Sx", {0}}, Fin{"Sxy", {0, 2}}}, {{"c", "d"}, {"c", "e"}});
    TransitivityReport rep = check_fin_transitivity({x});
    REQUIRE_FALSE(rep.pass);
    REQUIRE(rep.violations.size() >= 1);
    CHECK(rep.violations[0].colour == "c");
    CHECK(rep.violations[0].classes.size() == 2);
  }
}

TEST_CASE("vertex types separate originals from midpoints") {
  // a path of length 2 looks like a subdivided edge, but as an input its
  // middle vertex is an original vertex and cannot be confused with a
  // midpoint of the subdivision
  Graph path = make_graph({"a", "m", "b"}, {"e0", "e1"}, {0, 1}, {1, 2});
  GraphWithFins p = build_graph_with_fins(std::move(path), {}, {});
  Graph edge = make_graph({"a", "b"}, {"e"}, {0}, {1});
  GraphWithFins e = build_graph_with_fins(std::move(edge), {}, {});
  CHECK_FALSE(same_universal_cover(p, e).compatible);
}

TEST_CASE("star refinement separates the centre of a star from its leaves") {
  TypeTable t = refine_local_types({star3()});
  const auto& vt = t.inputs[0].vertex_types;
  CHECK(vt[0] != vt[1]);
  CHECK(vt[1] == vt[2]);
  CHECK(vt[2] == vt[3]);
}
