#include <catch2/catch_amalgamated.hpp>

#include "vcsim/textconfig.hpp"

using namespace vcsim;

static const char* kSample = R"(
# comment line
schema = 1
seed = 9

[alpha]
x = 1.5
name = hello world
p = 3, -4

[alpha]
x = 2.5

[beta.gamma]
flag = yes
)";

TEST_CASE("parse sections and keys", "[textconfig]") {
  auto doc = text::parse_string(kSample);
  CHECK(doc.top.integer("schema") == 1);
  CHECK(doc.top.integer("seed") == 9);
  CHECK(doc.sections.size() == 3);

  auto alphas = doc.all_sections("alpha");
  REQUIRE(alphas.size() == 2);
  CHECK(alphas[0]->num("x") == 1.5);
  CHECK(alphas[1]->num("x") == 2.5);
  CHECK(alphas[0]->str("name") == "hello world");

  vec2 p = alphas[0]->point("p");
  CHECK(p.x == 3.0);
  CHECK(p.y == -4.0);

  CHECK(doc.find("beta.gamma") != nullptr);
  CHECK(doc.find("missing") == nullptr);
  CHECK_THROWS_AS(doc.require("missing"), format_error);
}

TEST_CASE("defaults and repeated keys", "[textconfig]") {
  auto doc = text::parse_string("[v]\nw = 1\nw = 2\nw = 3\n");
  const auto& v = *doc.find("v");
  auto ws = v.all("w");
  REQUIRE(ws.size() == 3);
  CHECK(ws[2] == "3");
  CHECK(v.num_or("absent", -1.0) == -1.0);
  CHECK(v.str_or("absent", "d") == "d");
  CHECK(v.has("w"));
  CHECK_FALSE(v.has("absent"));
}

TEST_CASE("parse errors carry context", "[textconfig]") {
  CHECK_THROWS_AS(text::parse_string("[v]\nx = abc\n").find("v")->num("x"), format_error);
  CHECK_THROWS_AS(text::parse_string("[v]\nx = 1.5\n").find("v")->integer("x"), format_error);
  CHECK_THROWS_AS(text::section::parse_point("1;2", "p"), format_error);
  CHECK_THROWS_WITH(text::parse_string("[v]\n").find("v")->str("k"),
                    Catch::Matchers::ContainsSubstring("missing key 'k'"));
  // malformed section header / keyless line
  CHECK_THROWS_AS(text::parse_string("[unclosed\n"), format_error);
  CHECK_THROWS_AS(text::parse_string("justtext\n"), format_error);
}

TEST_CASE("split helper", "[textconfig]") {
  auto parts = text::split(" a ; b;c ", ';');
  REQUIRE(parts.size() == 3);
  CHECK(parts[0] == "a");
  CHECK(parts[1] == "b");
  CHECK(parts[2] == "c");
}
