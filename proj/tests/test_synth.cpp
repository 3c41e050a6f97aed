#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>
#include <vector>

#include "vcsim/gscm.hpp"
#include "vcsim/synth.hpp"

using namespace vcsim;

namespace {

scenario::scenario parse_scenario(const std::string& body) {
  return scenario::load(text::parse_string(body));
}

const char* kThreeStatic = R"(
schema = 1
[scatterer_params.los]
sigma_db = 0
[vehicle]
id = a
role = node
node = 1
waypoint = 0, 0, 0
waypoint = 10, 0, 0
[vehicle]
id = b
role = node
node = 2
waypoint = 0, 20, 0
waypoint = 10, 20, 0
[vehicle]
id = c
role = node
node = 3
waypoint = 0, 0, 30
waypoint = 10, 0, 30
)";

}  // namespace

TEST_CASE("sounder config invariants", "[synth]") {
  auto cfg = synth::sounder_config::table2();
  CHECK(cfg.q_subcarriers == 601);
  CHECK(cfg.t_s_s() == Catch::Approx(250e-6));
  CHECK(cfg.region_snapshots() == 240);
  CHECK(cfg.doppler_res_hz() == Catch::Approx(1.0 / 0.12).epsilon(1e-12));
  CHECK(cfg.delay_res_s() == Catch::Approx(1.0 / (601.0 * 250e3)).epsilon(1e-12));
  cfg.validate();

  // snapshot interval must beat the stationarity bound c0 / (2 f_c v_max)
  auto bad = cfg;
  bad.v_max_ms = 60.0;
  CHECK_THROWS_AS(bad.validate(), validation_error);

  CHECK(synth::max_doppler_hz(3, 250e-6) == Catch::Approx(1000.0));
  CHECK(synth::max_doppler_hz(2, 500e-6) == Catch::Approx(1000.0));

  auto desk = synth::sounder_config::desk();
  CHECK(desk.q_subcarriers == 61);
  CHECK(desk.t_sys_s == cfg.t_sys_s);
}

TEST_CASE("synthesis matches the direct tone sum", "[synth]") {
  auto sc = parse_scenario(kThreeStatic);
  auto cfg = synth::sounder_config::desk();
  cfg.q_subcarriers = 17;

  auto t = synth::synthesize(sc, {{1, 2}, {1, 3}}, 0.005, cfg, 42);
  REQUIRE(t.T == 10);
  REQUIRE(t.Q == 17);
  REQUIRE(t.links.size() == 2);

  // oracle: re-enumerate paths independently and sum tones with std::polar
  auto pop = scenario::populate_diffuse(sc.geometry, sc.params, 42);
  for (std::size_t li = 0; li < 2; ++li) {
    int a = t.links[li].a, b = t.links[li].b;
    for (uint32_t m = 0; m < t.T; ++m) {
      double ts = t.snapshot_time(li, m);
      auto paths = gscm::enumerate_paths(sc, pop, a, b, ts, cfg.f_c_hz, 42);
      for (uint32_t q = 0; q < t.Q; ++q) {
        double fq = (static_cast<double>(q) - 8.0) * cfg.delta_f_hz;
        cd sum(0, 0);
        for (const auto& p : paths) sum += p.gain * std::polar(1.0, -2.0 * pi * fq * p.delay_s);
        cf got = t.at(li, m, q);
        CHECK(std::abs(cd(got) - sum) < 1e-6);
      }
    }
  }
}

TEST_CASE("reverse link is the conjugate of the forward pass", "[synth]") {
  auto sc = parse_scenario(kThreeStatic);
  auto cfg = synth::sounder_config::desk();
  cfg.noise_enable = true;
  cfg.noise_floor_db = -60.0;

  auto t = synth::synthesize(sc, {{1, 2}, {2, 1}}, 0.01, cfg, 5);
  REQUIRE(t.links.size() == 2);
  REQUIRE(t.links[0].a == 1);
  REQUIRE(t.links[1].a == 2);
  for (std::size_t i = 0; i < t.links[0].g.size(); ++i)
    CHECK(t.links[1].g[i] == std::conj(t.links[0].g[i]));
}

TEST_CASE("noise level and determinism", "[synth]") {
  auto sc = parse_scenario(kThreeStatic);
  auto cfg = synth::sounder_config::desk();
  cfg.noise_enable = true;
  cfg.noise_floor_db = -50.0;

  auto t1 = synth::synthesize(sc, {{2, 3}}, 0.1, cfg, 9);
  auto t2 = synth::synthesize(sc, {{2, 3}}, 0.1, cfg, 9);
  CHECK(mnct::serialize(t1) == mnct::serialize(t2));

  auto t3 = synth::synthesize(sc, {{2, 3}}, 0.1, cfg, 10);
  CHECK(mnct::serialize(t1) != mnct::serialize(t3));

  // mean noise power: subtract the deterministic part
  cfg.noise_enable = false;
  auto clean = synth::synthesize(sc, {{2, 3}}, 0.1, cfg, 9);
  double acc = 0.0;
  for (std::size_t i = 0; i < t1.links[0].g.size(); ++i)
    acc += std::norm(cd(t1.links[0].g[i]) - cd(clean.links[0].g[i]));
  acc /= static_cast<double>(t1.links[0].g.size());
  CHECK(pow_to_db(acc) == Catch::Approx(-50.0).margin(0.5));
}

TEST_CASE("synthesis validation", "[synth]") {
  auto sc = parse_scenario(kThreeStatic);
  auto cfg = synth::sounder_config::desk();
  CHECK_THROWS_AS(synth::synthesize(sc, {}, 0.01, cfg, 1), validation_error);
  CHECK_THROWS_AS(synth::synthesize(sc, {{1, 4}}, 0.01, cfg, 1), validation_error);
  CHECK_THROWS_AS(synth::synthesize(sc, {{1, 1}}, 0.01, cfg, 1), validation_error);
  CHECK_THROWS_AS(synth::synthesize(sc, {{1, 2}}, 1e-9, cfg, 1), validation_error);
  cfg.n_nodes = 2;
  CHECK_THROWS_AS(synth::synthesize(sc, {{1, 2}}, 0.01, cfg, 1), validation_error);
}

TEST_CASE("sounding signal crest factor", "[synth]") {
  // optimized phases stay under 6 dB at full scale
  auto sig = synth::generate_sounding_signal(601, 1);
  CHECK(sig.crest_db <= 6.0);
  CHECK(sig.crest_db == Catch::Approx(synth::crest_factor_db(sig.x)));
  for (const auto& v : sig.x) CHECK(std::abs(v) == Catch::Approx(1.0));

  auto desk = synth::generate_sounding_signal(61, 1);
  CHECK(desk.crest_db <= 6.0);

  // zero-phase multitone is the pathological reference
  std::vector<cd> flat(601, cd(1.0, 0.0));
  CHECK(synth::crest_factor_db(flat) > 20.0);

  // a single tone has no envelope variation at all
  std::vector<cd> tone(1, cd(1.0, 0.0));
  CHECK(synth::crest_factor_db(tone) == Catch::Approx(0.0).margin(1e-9));

  CHECK_THROWS_AS(synth::generate_sounding_signal(0, 1), validation_error);
}

TEST_CASE("calibration inverts the reference chain", "[synth]") {
  auto sc = parse_scenario(kThreeStatic);
  auto cfg = synth::sounder_config::desk();
  auto clean = synth::synthesize(sc, {{1, 2}}, 0.005, cfg, 4);

  auto sig = synth::generate_sounding_signal(cfg.q_subcarriers, 2);
  std::vector<cd> g_cal(cfg.q_subcarriers);
  for (std::size_t q = 0; q < g_cal.size(); ++q)
    g_cal[q] = std::polar(1.0 + 0.1 * std::sin(0.3 * static_cast<double>(q)),
                          0.2 * static_cast<double>(q));

  // apply the reference chain, then undo it
  channel_tensor raw = clean;
  for (uint32_t m = 0; m < raw.T; ++m)
    for (uint32_t q = 0; q < raw.Q; ++q) {
      cd v = cd(raw.at(0, m, q)) * sig.x[q] * g_cal[q];
      raw.at(0, m, q) = cf(static_cast<float>(v.real()), static_cast<float>(v.imag()));
    }
  channel_tensor rec = synth::calibrate(raw, sig.x, g_cal);
  for (std::size_t i = 0; i < rec.links[0].g.size(); ++i)
    CHECK(std::abs(cd(rec.links[0].g[i]) - cd(clean.links[0].g[i])) < 2e-5);

  // zero reference trips the numeric guard and names the bin
  std::vector<cd> bad = sig.x;
  bad[3] = cd(0.0, 0.0);
  CHECK_THROWS_WITH(synth::calibrate(raw, bad, g_cal),
                    Catch::Matchers::ContainsSubstring("subcarrier 3"));

  std::vector<cd> row(raw.Q);
  for (uint32_t q = 0; q < raw.Q; ++q) row[q] = cd(raw.at(0, 0, q));
  auto fixed = synth::calibrate_row(row, sig.x, g_cal);
  CHECK(std::abs(fixed[5] - cd(clean.at(0, 0, 5))) < 2e-5);
  CHECK_THROWS_AS(synth::calibrate_row(row, std::vector<cd>(3), g_cal), validation_error);
}
