#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "vcsim/geometry.hpp"

using namespace vcsim;

TEST_CASE("vec2 algebra", "[geometry]") {
  vec2 a{3, 4}, b{1, -2};
  CHECK((a + b).x == 4.0);
  CHECK((a - b).y == 6.0);
  CHECK(a.dot(b) == -5.0);
  CHECK(a.cross(b) == -10.0);
  CHECK(a.norm() == Catch::Approx(5.0));
  CHECK(a.unit().norm() == Catch::Approx(1.0));
  // rot90 is the left normal: +x maps to +y
  CHECK(vec2{1, 0}.rot90().x == 0.0);
  CHECK(vec2{1, 0}.rot90().y == 1.0);
  CHECK(vec2{0, 0}.unit().norm() == 0.0);
}

TEST_CASE("oriented rect local frame", "[geometry]") {
  oriented_rect r{{10, 5}, vec2{0, 1}, 4.0, 2.0};  // long axis along +y
  vec2 l = r.to_local({10, 7});
  CHECK(l.x == Catch::Approx(2.0));  // forward
  CHECK(l.y == Catch::Approx(0.0));
  l = r.to_local({9, 5});
  CHECK(l.x == Catch::Approx(0.0));
  CHECK(l.y == Catch::Approx(1.0));  // left of heading +y is -x side
}

TEST_CASE("segment rect clipping", "[geometry]") {
  oriented_rect r{{0, 0}, vec2{1, 0}, 4.0, 2.0};

  auto full = clip_segment_rect({-10, 0}, {10, 0}, r);
  REQUIRE(full.has_value());
  CHECK(full->first == Catch::Approx(0.4));   // enters at x=-2
  CHECK(full->second == Catch::Approx(0.6));  // leaves at x=+2

  CHECK_FALSE(clip_segment_rect({-10, 5}, {10, 5}, r).has_value());
  CHECK_FALSE(clip_segment_rect({-10, 0}, {-5, 0}, r).has_value());

  // fully inside
  auto in = clip_segment_rect({-1, 0}, {1, 0}, r);
  REQUIRE(in.has_value());
  CHECK(in->first == 0.0);
  CHECK(in->second == 1.0);

  // rotated rectangle: same clip in its own frame
  oriented_rect rot{{0, 0}, vec2{std::sqrt(0.5), std::sqrt(0.5)}, 4.0, 2.0};
  auto diag = clip_segment_rect({-10 * std::sqrt(0.5), -10 * std::sqrt(0.5)},
                                {10 * std::sqrt(0.5), 10 * std::sqrt(0.5)}, rot);
  REQUIRE(diag.has_value());
  CHECK(diag->first == Catch::Approx(0.4));
  CHECK(diag->second == Catch::Approx(0.6));
}

TEST_CASE("segment length in polygon", "[geometry]") {
  std::vector<vec2> square{{0, 0}, {10, 0}, {10, 10}, {0, 10}};
  CHECK(segment_length_in_polygon({-5, 5}, {15, 5}, square) == Catch::Approx(10.0));
  CHECK(segment_length_in_polygon({2, 2}, {8, 2}, square) == Catch::Approx(6.0));
  CHECK(segment_length_in_polygon({-5, 15}, {15, 15}, square) == Catch::Approx(0.0));
  // diagonal crossing
  CHECK(segment_length_in_polygon({-1, -1}, {11, 11}, square) ==
        Catch::Approx(10.0 * std::sqrt(2.0)).epsilon(1e-9));
  // degenerate polygon
  CHECK(segment_length_in_polygon({0, 0}, {1, 0}, {{0, 0}, {1, 1}}) == 0.0);
}

TEST_CASE("geo projection", "[geometry]") {
  geo_anchor o{48.0, 16.0};
  vec2 p = geo_to_local(o, 48.0, 16.0);
  CHECK(p.x == 0.0);
  CHECK(p.y == 0.0);
  // one degree of latitude is about 111.3 km on this sphere radius
  vec2 north = geo_to_local(o, 49.0, 16.0);
  CHECK(north.y == Catch::Approx(111319.0).epsilon(1e-3));
  CHECK(north.x == 0.0);
  // longitude shrinks with cos(lat)
  vec2 east = geo_to_local(o, 48.0, 17.0);
  CHECK(east.x == Catch::Approx(111319.0 * std::cos(48.0 * pi / 180.0)).epsilon(1e-3));
}
