#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <string>

#include "vcsim/rng.hpp"
#include "vcsim/tensor.hpp"

using namespace vcsim;

namespace {

channel_tensor make_tensor(uint32_t T = 4, uint32_t Q = 8) {
  channel_tensor t;
  t.n_nodes = 3;
  t.T = T;
  t.Q = Q;
  t.f_c_hz = 5.9e9;
  t.delta_f_hz = 250e3;
  t.t_sys_s = 500e-6;
  t.freq_convention = 0;
  counter_rng rng(99);
  for (auto [a, b] : {std::pair<int, int>{1, 2}, {2, 3}}) {
    channel_tensor::link_data l;
    l.a = static_cast<uint16_t>(a);
    l.b = static_cast<uint16_t>(b);
    l.g.resize(static_cast<std::size_t>(T) * Q);
    for (auto& v : l.g)
      v = cf(static_cast<float>(rng.uniform() - 0.5), static_cast<float>(rng.uniform() - 0.5));
    t.links.push_back(std::move(l));
  }
  return t;
}

}  // namespace

TEST_CASE("mnct round trip is lossless", "[tensor]") {
  channel_tensor t = make_tensor();
  std::string buf = mnct::serialize(t);
  channel_tensor u = mnct::deserialize(reinterpret_cast<const unsigned char*>(buf.data()), buf.size());

  CHECK(u.n_nodes == t.n_nodes);
  CHECK(u.T == t.T);
  CHECK(u.Q == t.Q);
  CHECK(u.f_c_hz == t.f_c_hz);
  CHECK(u.delta_f_hz == t.delta_f_hz);
  CHECK(u.t_sys_s == t.t_sys_s);
  CHECK(u.freq_convention == t.freq_convention);
  REQUIRE(u.links.size() == t.links.size());
  for (std::size_t i = 0; i < t.links.size(); ++i) {
    CHECK(u.links[i].a == t.links[i].a);
    CHECK(u.links[i].b == t.links[i].b);
    CHECK(u.links[i].g == t.links[i].g);
  }
  // serialization itself is deterministic
  CHECK(mnct::serialize(u) == buf);
}

TEST_CASE("mnct file io", "[tensor]") {
  channel_tensor t = make_tensor(2, 4);
  std::string path = "test_tensor_io.mnct";
  mnct::write_file(path, t);
  channel_tensor u = mnct::read_file(path);
  CHECK(u.links[0].g == t.links[0].g);
  std::remove(path.c_str());
  CHECK_THROWS_AS(mnct::read_file("does_not_exist.mnct"), format_error);
}

TEST_CASE("mnct rejects corrupt input", "[tensor]") {
  channel_tensor t = make_tensor(2, 4);
  std::string buf = mnct::serialize(t);

  SECTION("bad magic") {
    std::string bad = buf;
    bad[0] = 'X';
    CHECK_THROWS_WITH(
        mnct::deserialize(reinterpret_cast<const unsigned char*>(bad.data()), bad.size()),
        Catch::Matchers::ContainsSubstring("magic"));
  }
  SECTION("truncated header names the offset") {
    CHECK_THROWS_WITH(mnct::deserialize(reinterpret_cast<const unsigned char*>(buf.data()), 11),
                      Catch::Matchers::ContainsSubstring("byte offset"));
  }
  SECTION("truncated payload") {
    CHECK_THROWS_WITH(
        mnct::deserialize(reinterpret_cast<const unsigned char*>(buf.data()), buf.size() - 5),
        Catch::Matchers::ContainsSubstring("size mismatch"));
  }
  SECTION("unknown convention") {
    std::string bad = buf;
    bad[5 + 16 + 24] = 7;  // convention byte after 4 u32 + 3 doubles
    CHECK_THROWS_WITH(
        mnct::deserialize(reinterpret_cast<const unsigned char*>(bad.data()), bad.size()),
        Catch::Matchers::ContainsSubstring("convention"));
  }
}

TEST_CASE("frequency axis conventions", "[tensor]") {
  channel_tensor t = make_tensor(1, 8);
  t.freq_convention = 0;  // centered: bin Q/2 is DC
  CHECK(t.freq_hz(4) == 0.0);
  CHECK(t.freq_hz(0) == -4 * 250e3);
  CHECK(t.freq_hz(7) == 3 * 250e3);

  t.freq_convention = 1;  // FFT order: DC first, negatives in the upper half
  CHECK(t.freq_hz(0) == 0.0);
  CHECK(t.freq_hz(1) == 250e3);
  CHECK(t.freq_hz(3) == 3 * 250e3);
  CHECK(t.freq_hz(4) == -4 * 250e3);
  CHECK(t.freq_hz(7) == -1 * 250e3);

  // odd Q, centered
  channel_tensor o = make_tensor(1, 7);
  CHECK(o.freq_hz(3) == 0.0);
  o.freq_convention = 1;
  CHECK(o.freq_hz(3) == 3 * 250e3);
  CHECK(o.freq_hz(4) == -3 * 250e3);
}

TEST_CASE("schedule timing per link", "[tensor]") {
  channel_tensor t = make_tensor();
  CHECK(t.t_s_s() == Catch::Approx(250e-6));
  CHECK(t.snapshot_time(0, 0) == Catch::Approx(0.0));          // link (1,2): phase 0
  CHECK(t.snapshot_time(1, 0) == Catch::Approx(250e-6));       // link (2,3): phase 1
  CHECK(t.snapshot_time(1, 2) == Catch::Approx(2 * 500e-6 + 250e-6));
  CHECK(t.find_link(1, 2) == 0);
  CHECK(t.find_link(2, 3) == 1);
  CHECK(t.find_link(3, 1) == -1);
}
