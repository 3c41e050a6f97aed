// Command-line front end: simulate -> analyze -> interp -> per -> compare.
// Every command is a pure function of its input files, flags, and seed; a JSON
// sidecar written next to each binary artifact records enough to replay it.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "vcsim/chstats.hpp"
#include "vcsim/csv.hpp"
#include "vcsim/dpsinterp.hpp"
#include "vcsim/linksim.hpp"
#include "vcsim/scenario.hpp"
#include "vcsim/synth.hpp"
#include "vcsim/tensor.hpp"

namespace {

using namespace vcsim;
using nlohmann::json;

uint64_t fnv1a(const std::string& s, uint64_t h = 1469598103934665603ull) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string hex64(uint64_t h) {
  char b[17];
  std::snprintf(b, sizeof b, "%016llx", static_cast<unsigned long long>(h));
  return b;
}

std::string file_bytes(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw format_error("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void write_text(const std::string& path, const std::string& body) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw format_error("cannot open '" + path + "' for writing");
  f << body;
}

// "out.mnct" + "_s42" -> "out_s42.mnct"
std::string with_suffix(const std::string& path, const std::string& suffix) {
  std::filesystem::path p(path);
  std::filesystem::path q = p.parent_path() / (p.stem().string() + suffix + p.extension().string());
  return q.string();
}

std::pair<int, int> parse_link(const std::string& s) {
  auto parts = text::split(s, ',');
  if (parts.size() != 2) throw validation_error("link must be 'a,b', got '" + s + "'");
  return {static_cast<int>(std::lround(text::parse_num(parts[0], "link node"))),
          static_cast<int>(std::lround(text::parse_num(parts[1], "link node")))};
}

std::size_t select_link(const channel_tensor& t, const std::string& spec) {
  auto [a, b] = parse_link(spec);
  int li = t.find_link(a, b);
  if (li < 0)
    throw validation_error("link (" + std::to_string(a) + "," + std::to_string(b) +
                           ") is not stored in the tensor");
  return static_cast<std::size_t>(li);
}

int region_snapshots_from_header(const channel_tensor& t) {
  if (t.t_sys_s <= 0.0) throw format_error("tensor header has non-positive snapshot interval");
  long m = std::lround(0.12 / t.t_sys_s);
  if (m < 2) throw validation_error("snapshot interval too coarse for a 0.12 s region");
  return static_cast<int>(m);
}

// --- simulate ---------------------------------------------------------------

struct simulate_opts {
  std::string scenario_file;
  std::vector<std::string> links;
  double duration = 0.0;
  uint64_t seed = 0;
  int n_seeds = 1;
  std::string preset = "paper_table2";
  double noise_floor_db = -100.0;
  std::string out;
  bool seed_given = false;
  bool noise_given = false;
};

int run_simulate(const simulate_opts& o) {
  auto sc = scenario::load_file(o.scenario_file);
  synth::sounder_config cfg =
      o.preset == "desk" ? synth::sounder_config::desk() : synth::sounder_config::table2();
  cfg.n_nodes = sc.n_nodes();
  if (o.noise_given) {
    cfg.noise_enable = true;
    cfg.noise_floor_db = o.noise_floor_db;
  }
  std::vector<std::pair<int, int>> links;
  for (const auto& s : o.links) links.push_back(parse_link(s));
  uint64_t base_seed = o.seed_given ? o.seed : sc.seed;

  uint64_t cfg_hash = fnv1a(file_bytes(o.scenario_file));
  {
    std::ostringstream cs;
    cs << o.preset << '|' << cfg.q_subcarriers << '|' << cfg.delta_f_hz << '|' << cfg.t_sys_s
       << '|' << cfg.noise_enable << '|' << cfg.noise_floor_db << '|' << o.duration;
    for (auto [a, b] : links) cs << '|' << a << ',' << b;
    cfg_hash = fnv1a(cs.str(), cfg_hash);
  }

  for (int i = 0; i < o.n_seeds; ++i) {
    uint64_t seed = base_seed + static_cast<uint64_t>(i);
    auto t = synth::synthesize(sc, links, o.duration, cfg, seed);
    std::string path = o.n_seeds > 1 ? with_suffix(o.out, "_s" + std::to_string(seed)) : o.out;
    mnct::write_file(path, t);

    json side;
    side["command"] = "simulate";
    side["scenario"] = o.scenario_file;
    side["links"] = o.links;
    side["duration_s"] = o.duration;
    side["preset"] = o.preset;
    side["noise_floor_db"] = cfg.noise_enable ? json(cfg.noise_floor_db) : json();
    side["seed"] = seed;
    side["config_hash"] = hex64(cfg_hash);
    side["snapshots"] = t.T;
    side["subcarriers"] = t.Q;
    write_text(path + ".json", side.dump(2) + "\n");
    std::printf("wrote %s: %u snapshots x %u subcarriers, %zu links, seed %llu\n", path.c_str(),
                t.T, t.Q, t.links.size(), static_cast<unsigned long long>(seed));
  }
  return 0;
}

// --- analyze ----------------------------------------------------------------

struct analyze_opts {
  std::string in;
  std::string out;
  std::string link;  // "a,b"; empty selects every link
  int region = 0;    // 0: derive from the header
};

int run_analyze(const analyze_opts& o) {
  auto t = mnct::read_file(o.in);
  chstats::config cfg;
  cfg.region_snapshots = o.region > 0 ? o.region : region_snapshots_from_header(t);

  std::vector<std::size_t> sel;
  if (o.link.empty()) {
    for (std::size_t i = 0; i < t.links.size(); ++i) sel.push_back(i);
  } else {
    sel.push_back(select_link(t, o.link));
  }
  for (std::size_t li : sel) {
    auto ls = chstats::analyze_link(t, li, cfg);
    std::string path = sel.size() == 1
                           ? o.out
                           : with_suffix(o.out, "_" + std::to_string(ls.a) + "-" +
                                                    std::to_string(ls.b));
    csv::write_file(path, chstats::stats_table(ls));
    std::printf("wrote %s: link (%d,%d), %zu regions of %d snapshots\n", path.c_str(),
                static_cast<int>(ls.a), static_cast<int>(ls.b), ls.regions.size(),
                cfg.region_snapshots);
  }
  return 0;
}

// --- interp -----------------------------------------------------------------

struct interp_opts {
  std::string in;
  std::string out;
  std::string preset = "desk";
  std::optional<double> t_emu, f_emu, v_max, tau_max;
  std::optional<int> n_emu, block, overlap, d_t, d_f;
};

int run_interp(const interp_opts& o) {
  auto src = mnct::read_file(o.in);
  dpsinterp::interp_request req = o.preset == "paper_table6"
                                      ? dpsinterp::interp_request::table6()
                                      : dpsinterp::interp_request::desk();
  if (o.t_emu) req.t_e_s = *o.t_emu;
  if (o.f_emu) req.f_e_hz = *o.f_emu;
  if (o.n_emu) req.n_e = *o.n_emu;
  if (o.block) req.m_s = *o.block;
  if (o.overlap) req.delta = *o.overlap;
  if (o.v_max) req.v_max_ms = *o.v_max;
  if (o.tau_max) req.tau_max_s = *o.tau_max;
  if (o.d_t) req.d_t_override = *o.d_t;
  if (o.d_f) req.d_f_override = *o.d_f;

  auto res = dpsinterp::interpolate(src, req);
  mnct::write_file(o.out, res.tensor);

  json side;
  side["command"] = "interp";
  side["input"] = o.in;
  side["input_hash"] = hex64(fnv1a(file_bytes(o.in)));
  side["preset"] = o.preset;
  side["plan"] = {{"r_t_s", res.plan.r_t_s}, {"r_t_e", res.plan.r_t_e},
                  {"r_f_s", res.plan.r_f_s}, {"r_f_e", res.plan.r_f_e},
                  {"m_i", res.plan.m_i},     {"n_i", res.plan.n_i},
                  {"m_e", res.plan.m_e},     {"n_e", res.plan.n_e},
                  {"delta", res.plan.delta}};
  side["d_t"] = res.d_t;
  side["d_f"] = res.d_f;
  side["nu_max"] = res.nu_max;
  side["theta_max"] = res.theta_max;
  write_text(o.out + ".json", side.dump(2) + "\n");
  std::printf("wrote %s: %u snapshots x %u subcarriers (subspace %d x %d)\n", o.out.c_str(),
              res.tensor.T, res.tensor.Q, res.d_t, res.d_f);
  return 0;
}

// --- per --------------------------------------------------------------------

struct per_opts {
  std::vector<std::string> in;
  std::string link;  // "a,b"; empty takes the first stored link
  std::string mod = "qpsk";
  uint64_t seed = 1;
  double packet_rate_hz = 1000.0;
  double tx_power_dbm = 0.0;
  std::string out;
  std::string ref;
  std::string ratio_out;
};

linksim::per_series series_from_csv(const std::string& path) {
  auto t = csv::read_file(path);
  int ct = t.column("t_center_s");
  int cp = t.column("per");
  linksim::per_series s;
  for (const auto& row : t.rows) {
    s.t_center_s.push_back(row[static_cast<std::size_t>(ct)]);
    s.per.push_back(row[static_cast<std::size_t>(cp)]);
  }
  return s;
}

int run_per(const per_opts& o) {
  linksim::phy_config phy;
  if (o.mod == "qam64") {
    phy.mod = linksim::modulation::qam64;
    phy.rate = linksim::code_rate::three_quarter;
  }
  phy.packet_rate_hz = o.packet_rate_hz;
  phy.tx_power_dbm = o.tx_power_dbm;

  std::vector<linksim::per_series> runs;
  for (const auto& path : o.in) {
    auto t = mnct::read_file(path);
    std::size_t li = o.link.empty() ? 0 : select_link(t, o.link);
    runs.push_back(linksim::run_link(t, li, phy, o.seed));
  }

  auto env = linksim::ensemble(runs);
  if (!o.out.empty()) {
    if (runs.size() == 1)
      csv::write_file(o.out, linksim::per_table(runs.front()));
    else
      csv::write_file(o.out, linksim::envelope_table(env));
    std::printf("wrote %s: %zu windows, %zu run(s)\n", o.out.c_str(), env.lo.size(), runs.size());
  }

  if (!o.ref.empty()) {
    auto ref = series_from_csv(o.ref);
    double frac = linksim::envelope_containment(ref, env);
    std::printf("time-in-envelope: %.1f%% (%zu windows)\n", 100.0 * frac, ref.per.size());
    if (!o.ratio_out.empty()) {
      auto cdf = linksim::per_ratio_cdf(ref, env.mean);
      csv::table tb;
      tb.header = {"ratio", "cdf"};
      for (std::size_t i = 0; i < cdf.ratios.size(); ++i)
        tb.rows.push_back({cdf.ratios[i], static_cast<double>(i + 1) /
                                              static_cast<double>(cdf.ratios.size())});
      csv::write_file(o.ratio_out, tb);
      std::printf("wrote %s: %zu ratios (%d zero-mean windows excluded)\n", o.ratio_out.c_str(),
                  cdf.ratios.size(), cdf.excluded);
    }
  }
  return 0;
}

// --- compare ----------------------------------------------------------------

struct compare_opts {
  std::string ref;
  std::vector<std::string> sims;
  std::string out;
};

int run_compare(const compare_opts& o) {
  auto ref = csv::read_file(o.ref);
  int kc = ref.column("k");
  const char* quantities[] = {"path_loss_db", "rms_delay_ns", "rms_doppler_hz"};

  std::vector<csv::table> sims;
  for (const auto& p : o.sims) {
    auto t = csv::read_file(p);
    if (t.rows.size() != ref.rows.size())
      throw validation_error("'" + p + "' has " + std::to_string(t.rows.size()) +
                             " regions, reference has " + std::to_string(ref.rows.size()));
    int kc2 = t.column("k");
    for (std::size_t r = 0; r < t.rows.size(); ++r)
      if (t.rows[r][static_cast<std::size_t>(kc2)] != ref.rows[r][static_cast<std::size_t>(kc)])
        throw validation_error("'" + p + "' region indices do not align with the reference");
    sims.push_back(std::move(t));
  }

  csv::table out;
  out.header = {"quantity_index", "offset", "cdf"};
  for (int qi = 0; qi < 3; ++qi) {
    const char* q = quantities[qi];
    int rc = ref.column(q);
    std::vector<int> scs;
    for (const auto& s : sims) scs.push_back(s.column(q));

    std::vector<double> offsets;
    for (std::size_t r = 0; r < ref.rows.size(); ++r) {
      double acc = 0.0;
      for (std::size_t si = 0; si < sims.size(); ++si)
        acc += sims[si].rows[r][static_cast<std::size_t>(scs[si])];
      double offset = std::abs(acc / static_cast<double>(sims.size()) -
                               ref.rows[r][static_cast<std::size_t>(rc)]);
      if (std::isfinite(offset)) offsets.push_back(offset);
    }
    if (offsets.empty()) throw numeric_error(std::string("no finite offsets for ") + q);
    std::sort(offsets.begin(), offsets.end());
    for (std::size_t i = 0; i < offsets.size(); ++i)
      out.rows.push_back({static_cast<double>(qi), offsets[i],
                          static_cast<double>(i + 1) / static_cast<double>(offsets.size())});
    std::size_t i80 = static_cast<std::size_t>(
        std::ceil(0.8 * static_cast<double>(offsets.size()))) - 1;
    std::printf("%s: 80th percentile offset %.6g over %zu regions\n", q, offsets[i80],
                offsets.size());
  }
  csv::write_file(o.out, out);
  std::printf("wrote %s (quantity_index: 0=path_loss_db, 1=rms_delay_ns, 2=rms_doppler_hz)\n",
              o.out.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"vehicular wireless channel simulation and analysis toolkit"};
  app.require_subcommand(1);

  simulate_opts so;
  auto* sim = app.add_subcommand("simulate", "synthesize a channel tensor from a scenario");
  sim->add_option("--scenario", so.scenario_file, "scenario description file")
      ->required()
      ->check(CLI::ExistingFile);
  sim->add_option("--link", so.links, "link as 'a,b' (repeatable)")->required();
  sim->add_option("--duration", so.duration, "record length in seconds")->required();
  auto* seed_opt = sim->add_option("--seed", so.seed, "base seed (default: scenario seed)");
  sim->add_option("--seeds", so.n_seeds, "number of consecutive seeds")
      ->check(CLI::Range(1, 1000000));
  sim->add_option("--preset", so.preset,
                  "sounding grid: paper_table2 (601 x 250 kHz), paper_table5 (alias, default "
                  "scatterer parameters are always in effect), desk (61 subcarriers)")
      ->check(CLI::IsMember({"paper_table2", "paper_table5", "desk"}));
  auto* noise_opt = sim->add_option("--noise-floor-db", so.noise_floor_db,
                                    "enable measurement noise at this floor (dB)");
  sim->add_option("--out", so.out, "output tensor file")->required();

  analyze_opts ao;
  auto* ana = app.add_subcommand("analyze", "region statistics of a stored tensor");
  ana->add_option("--in", ao.in, "input tensor file")->required()->check(CLI::ExistingFile);
  ana->add_option("--out", ao.out, "output statistics CSV")->required();
  ana->add_option("--link", ao.link, "restrict to one link 'a,b' (default: all)");
  ana->add_option("--region", ao.region, "snapshots per region (default: 0.12 s from header)");

  interp_opts io;
  auto* itp = app.add_subcommand("interp", "subspace interpolation onto an emulation grid");
  itp->add_option("--in", io.in, "input tensor file")->required()->check(CLI::ExistingFile);
  itp->add_option("--out", io.out, "output tensor file")->required();
  itp->add_option("--preset", io.preset, "grid preset")
      ->check(CLI::IsMember({"desk", "paper_table6"}));
  itp->add_option("--t-emu", io.t_emu, "emulation snapshot interval (s)");
  itp->add_option("--f-emu", io.f_emu, "emulation subcarrier spacing (Hz)");
  itp->add_option("--n-emu", io.n_emu, "emulation subcarriers (0: widest even fit)");
  itp->add_option("--block", io.block, "snapshots per fitted block");
  itp->add_option("--overlap", io.overlap, "extra snapshots per side of each block");
  itp->add_option("--vmax", io.v_max, "mobility bound for the Doppler band (m/s)");
  itp->add_option("--tau-max", io.tau_max, "delay support for the frequency band (s)");
  itp->add_option("--dt", io.d_t, "time subspace dimension override");
  itp->add_option("--df", io.d_f, "frequency subspace dimension override");

  per_opts po;
  auto* per = app.add_subcommand("per", "packet error rate over stored tensors");
  per->add_option("--in", po.in, "input tensor file(s); several form an envelope")
      ->required()
      ->check(CLI::ExistingFile);
  per->add_option("--link", po.link, "link 'a,b' (default: first stored)");
  per->add_option("--mod", po.mod, "qpsk (rate 1/2) or qam64 (rate 3/4)")
      ->check(CLI::IsMember({"qpsk", "qam64"}));
  per->add_option("--seed", po.seed, "payload/noise seed");
  per->add_option("--packet-rate", po.packet_rate_hz, "packets per second");
  per->add_option("--tx-dbm", po.tx_power_dbm, "transmit power (dBm)");
  per->add_option("--out", po.out, "output CSV (series, or envelope for several inputs)");
  per->add_option("--ref", po.ref, "reference PER series CSV; reports time-in-envelope")
      ->check(CLI::ExistingFile);
  per->add_option("--ratio-out", po.ratio_out, "CSV of reference/mean ratio CDF");

  compare_opts co;
  auto* cmp = app.add_subcommand("compare", "offset CDFs of simulated stats vs a reference");
  cmp->add_option("--ref", co.ref, "reference statistics CSV")
      ->required()
      ->check(CLI::ExistingFile);
  cmp->add_option("sims", co.sims, "simulated statistics CSVs")
      ->required()
      ->check(CLI::ExistingFile);
  cmp->add_option("--out", co.out, "output offset CDF CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  so.seed_given = seed_opt->count() > 0;
  so.noise_given = noise_opt->count() > 0;

  try {
    if (sim->parsed()) return run_simulate(so);
    if (ana->parsed()) return run_analyze(ao);
    if (itp->parsed()) return run_interp(io);
    if (per->parsed()) return run_per(po);
    if (cmp->parsed()) return run_compare(co);
  } catch (const validation_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const format_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  } catch (const numeric_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 4;
  } catch (const std::bad_alloc&) {
    std::fprintf(stderr, "error: out of memory (reduce --region or the grid sizes)\n");
    return 4;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 4;
  }
  return 0;
}
