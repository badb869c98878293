#include <catch2/catch_amalgamated.hpp>

#include "fincover/covering.hpp"
#include "fincover/fins.hpp"
#include "fincover/graph.hpp"
#include "fincover/rational.hpp"

#include "fixtures.hpp"
#include "iso.hpp"
#include "random_gwf.hpp"

using namespace fincover;
using fixtures::circle1;
using fixtures::circle2;
using fixtures::circle_double_cover;
using fixtures::rose_xy_fins;

TEST_CASE("graph construction validates names and endpoints") {
  CHECK_THROWS_MATCHES(make_graph({"v", "v"}, {}, {}, {}), Error,
                       Catch::Matchers::Predicate<Error>([](const Error& e) {
                         return e.code() == ErrorCode::ParseError;
                       }));
  CHECK_THROWS_AS(make_graph({"v"}, {"e"}, {0}, {1}), Error);
  CHECK_THROWS_AS(make_graph({"v"}, {"e", "e"}, {0, 0}, {0, 0}), Error);
}

TEST_CASE("dart arithmetic on a two-vertex circle") {
  Graph g = make_graph({"u0", "u1"}, {"a", "b"}, {0, 1}, {1, 0});
  CHECK(g.n_darts() == 4);
  CHECK(g.dart_origin(0) == 0);
  CHECK(g.dart_terminus(0) == 1);
  CHECK(g.dart_origin(1) == 1);
  CHECK(dart_reverse(0) == 1);
  CHECK(dart_reverse(3) == 2);
  CHECK(g.valence(0) == 2);
  CHECK(is_connected(g));
  CHECK(euler_characteristic(g) == 0);
}

TEST_CASE("fin validation rejects open and backtracking cycles") {
  Graph g = make_graph({"u0", "u1"}, {"a", "b"}, {0, 1}, {1, 0});
  // not closed: a+ then a+ again starts at the wrong vertex
  CHECK_THROWS_MATCHES(build_graph_with_fins(Graph(g), {Fin{"S", {0, 0}}}, {}), Error,
                       Catch::Matchers::Predicate<Error>([](const Error& e) {
                         return e.code() == ErrorCode::DanglingDart;
                       }));
  // immediate backtrack a+ a-
  CHECK_THROWS_MATCHES(build_graph_with_fins(Graph(g), {Fin{"S", {0, 1}}}, {}), Error,
                       Catch::Matchers::Predicate<Error>([](const Error& e) {
                         return e.code() == ErrorCode::BacktrackingLoop;
                       }));
  // cyclic backtrack at the seam
  Graph rose = make_graph({"v"}, {"x", "y"}, {0, 0}, {0, 0});
  CHECK_THROWS_MATCHES(build_graph_with_fins(Graph(rose), {Fin{"S", {0, 2, 3, 1}}}, {}), Error,
                       Catch::Matchers::Predicate<Error>([](const Error& e) {
                         return e.code() == ErrorCode::BacktrackingLoop;
                       }));
  // dart out of range
  CHECK_THROWS_MATCHES(build_graph_with_fins(Graph(g), {Fin{"S", {9}}}, {}), Error,
                       Catch::Matchers::Predicate<Error>([](const Error& e) {
                         return e.code() == ErrorCode::DanglingDart;
                       }));
  // duplicate fin id
  CHECK_THROWS_AS(
      build_graph_with_fins(Graph(g), {Fin{"S", {0, 2}}, Fin{"S", {0, 2}}}, {}), Error);
}

TEST_CASE("densities on the rose with fins x, y, xy") {
  GraphWithFins x = rose_xy_fins();
  // one vertex; oriented fin lengths are summed per colour
  CHECK(density(x, "Sx+") == Rational(1));
  CHECK(density(x, "Sx-") == Rational(1));
  CHECK(density(x, "Sxy+") == Rational(2));
  CHECK(density(x, "Sxy-") == Rational(2));
  CHECK(density(x, "absent") == Rational(0));
}

TEST_CASE("subdivision scales fins and vertex counts") {
  GraphWithFins x = rose_xy_fins();
  GraphWithFins s2 = subdivide(x, 2);
  CHECK(s2.graph.n_vertices() == 3);  // 1 original + 2 midpoints
  CHECK(s2.graph.n_edges() == 4);
  CHECK(s2.fins[2].length() == 4);
  // 4 darts of fin Sxy over 3 vertices
  CHECK(density(s2, "Sxy+") == Rational(4, 3));
  CHECK(density(s2, "Sx+") == Rational(2, 3));

  GraphWithFins s3 = subdivide(x, 3);
  CHECK(s3.graph.n_vertices() == 5);
  CHECK(density(s3, "Sx+") == Rational(3, 5));

  // composite subdivision equals one-shot subdivision up to isomorphism
  CHECK(testsupport::isomorphic(subdivide(subdivide(x, 2), 3), subdivide(x, 6)));
  CHECK(testsupport::isomorphic(subdivide(x, 1), x));
}

TEST_CASE("verify_covering accepts the circle double cover") {
  CoveringMap c = circle_double_cover();
  CoveringReport rep = verify_covering(c);
  CAPTURE(rep.failures);
  CHECK(rep.pass);
  CHECK(rep.degree == 2);
}

TEST_CASE("verify_covering rejects mutations") {
  SECTION("broken reversal") {
    CoveringMap c = circle_double_cover();
    c.dart_map[1] = 0;
    CHECK_FALSE(verify_covering(c).pass);
  }
  SECTION("broken local bijection") {
    CoveringMap c = circle_double_cover();
    c.dart_map[2] = 1;
    c.dart_map[3] = 0;
    CHECK_FALSE(verify_covering(c).pass);
  }
  SECTION("wrong fin degree") {
    CoveringMap c = circle_double_cover();
    c.fin_map[0].degree = 1;
    CHECK_FALSE(verify_covering(c).pass);
  }
  SECTION("unnormalized rotation") {
    CoveringMap c = circle_double_cover();
    c.fin_map[0].rotation = 1;
    CHECK_FALSE(verify_covering(c).pass);
  }
  SECTION("colour clash") {
    CoveringMap c = circle_double_cover();
    c.source.colours[0] = {"other+", "other-"};
    CHECK_FALSE(verify_covering(c).pass);
  }
}

TEST_CASE("induced_cover lifts fins along a graph cover") {
  GraphWithFins base = circle1();
  GraphWithFins upstairs = circle2();
  GraphCover gc{upstairs.graph, {0, 0}, {0, 1, 0, 1}};
  CoveringMap c = induced_cover(base, gc);
  REQUIRE(c.source.fins.size() == 1);
  CHECK(c.source.fins[0].length() == 2);
  CHECK(c.source.colours[0] == base.colours[0]);
  CHECK(c.fin_map[0].degree == 2);
  CHECK(verify_covering(c).pass);

  SECTION("mutated dart map is rejected") {
    GraphCover bad = gc;
    bad.dart_map[0] = 1;
    CHECK_THROWS_MATCHES(induced_cover(base, bad), Error,
                         Catch::Matchers::Predicate<Error>([](const Error& e) {
                           return e.code() == ErrorCode::InvalidGraphCover;
                         }));
  }
}

TEST_CASE("induced covers over random permutation voltages verify", "[property]") {
  std::mt19937_64 rng(20260814u);
  int built = 0;
  for (int round = 0; round < 25; ++round) {
    GraphWithFins base = testsupport::random_gwf(rng);
    int degree = 1 + testsupport::draw(rng, 3);
    GraphCover gc = testsupport::random_permutation_cover(base.graph, degree, rng);
    CoveringMap c = induced_cover(base, gc);
    CoveringReport rep = verify_covering(c);
    CAPTURE(round, rep.failures);
    REQUIRE(rep.pass);
    REQUIRE(rep.degree == degree);
    // total fin length upstairs is degree times the base total
    Int up = 0, down = 0;
    for (const Fin& f : c.source.fins) up += f.length();
    for (const Fin& f : base.fins) down += f.length();
    REQUIRE(up == Int(degree) * down);
    ++built;
  }
  REQUIRE(built == 25);
}

TEST_CASE("composition of coverings verifies and multiplies degrees") {
  GraphWithFins c1 = circle1();
  CoveringMap down = circle_double_cover();  // circle2 -> circle1
  // a double cover of circle2: the four cycle
  std::mt19937_64 rng(7u);
  GraphCover gc = testsupport::random_permutation_cover(down.source.graph, 2, rng);
  CoveringMap up = induced_cover(down.source, gc);  // C? -> circle2
  REQUIRE(verify_covering(up).pass);
  CoveringMap both = compose_coverings(up, down);
  CoveringReport rep = verify_covering(both);
  CAPTURE(rep.failures);
  CHECK(rep.pass);
  CHECK(rep.degree == 4);
  CHECK(both.target.graph.n_vertices() == c1.graph.n_vertices());
}
