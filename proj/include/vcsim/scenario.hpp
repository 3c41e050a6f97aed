#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "vcsim/common.hpp"
#include "vcsim/csv.hpp"
#include "vcsim/geometry.hpp"
#include "vcsim/rng.hpp"
#include "vcsim/textconfig.hpp"

namespace vcsim::scenario {

// Natural cubic spline through strictly increasing knots; linear for two
// points. Evaluation outside the knot span is a validation error.
class spline1d {
 public:
  spline1d() = default;

  spline1d(std::vector<double> t, std::vector<double> y) : t_(std::move(t)), y_(std::move(y)) {
    const std::size_t n = t_.size();
    if (n < 2 || y_.size() != n) throw validation_error("spline needs >= 2 samples");
    for (std::size_t i = 1; i < n; ++i)
      if (!(t_[i] > t_[i - 1])) throw validation_error("spline times must be strictly increasing");
    m_.assign(n, 0.0);
    if (n > 2) {
      // Thomas solve for interior second derivatives, natural ends.
      std::vector<double> diag(n, 0.0), rhs(n, 0.0), sup(n, 0.0);
      for (std::size_t i = 1; i + 1 < n; ++i) {
        double h0 = t_[i] - t_[i - 1];
        double h1 = t_[i + 1] - t_[i];
        diag[i] = 2.0 * (h0 + h1);
        sup[i] = h1;
        rhs[i] = 6.0 * ((y_[i + 1] - y_[i]) / h1 - (y_[i] - y_[i - 1]) / h0);
      }
      for (std::size_t i = 2; i + 1 < n; ++i) {
        double h0 = t_[i] - t_[i - 1];
        double f = h0 / diag[i - 1];
        diag[i] -= f * sup[i - 1];
        rhs[i] -= f * rhs[i - 1];
      }
      for (std::size_t i = n - 2; i >= 1; --i) {
        m_[i] = (rhs[i] - sup[i] * m_[i + 1]) / diag[i];
        if (i == 1) break;
      }
    }
  }

  double t_min() const { return t_.front(); }
  double t_max() const { return t_.back(); }

  double value(double t) const {
    std::size_t i = segment(t);
    double h = t_[i + 1] - t_[i];
    double a = (t_[i + 1] - t) / h;
    double b = (t - t_[i]) / h;
    return a * y_[i] + b * y_[i + 1] +
           ((a * a * a - a) * m_[i] + (b * b * b - b) * m_[i + 1]) * h * h / 6.0;
  }

  double derivative(double t) const {
    std::size_t i = segment(t);
    double h = t_[i + 1] - t_[i];
    double a = (t_[i + 1] - t) / h;
    double b = (t - t_[i]) / h;
    return (y_[i + 1] - y_[i]) / h +
           ((3.0 * b * b - 1.0) * m_[i + 1] - (3.0 * a * a - 1.0) * m_[i]) * h / 6.0;
  }

 private:
  std::size_t segment(double t) const {
    if (t < t_.front() - 1e-12 || t > t_.back() + 1e-12)
      throw validation_error("time " + std::to_string(t) + " outside trajectory span [" +
                             std::to_string(t_.front()) + ", " + std::to_string(t_.back()) + "]");
    auto it = std::upper_bound(t_.begin(), t_.end(), t);
    std::size_t i = static_cast<std::size_t>(std::distance(t_.begin(), it));
    if (i == 0) return 0;
    if (i >= t_.size()) return t_.size() - 2;
    return i - 1;
  }

  std::vector<double> t_, y_, m_;
};

struct pose {
  vec2 center;
  vec2 heading;  // unit
  double speed = 0.0;
};

class trajectory {
 public:
  trajectory() = default;

  trajectory(std::vector<double> t, std::vector<vec2> p, double heading_fallback_rad = 0.0)
      : fallback_(heading_fallback_rad) {
    std::vector<double> xs(p.size()), ys(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) {
      xs[i] = p[i].x;
      ys[i] = p[i].y;
    }
    x_ = spline1d(t, xs);
    y_ = spline1d(std::move(t), std::move(ys));
  }

  double t_min() const { return x_.t_min(); }
  double t_max() const { return x_.t_max(); }

  pose at(double t) const {
    vec2 v{x_.derivative(t), y_.derivative(t)};
    double speed = v.norm();
    vec2 h = speed > 1e-9 ? v.unit() : vec2{std::cos(fallback_), std::sin(fallback_)};
    return {{x_.value(t), y_.value(t)}, h, speed};
  }

 private:
  spline1d x_, y_;
  double fallback_ = 0.0;
};

// Piecewise-linear extra loss over the normalized axial coordinate
// u in [0, 1], front to back. Evaluation clamps outside the support.
struct obstruction_profile {
  std::vector<std::pair<double, double>> pts;  // (u, loss_db), u ascending

  bool empty() const { return pts.empty(); }

  double loss_db(double u) const {
    if (pts.empty()) return 0.0;
    if (u <= pts.front().first) return pts.front().second;
    if (u >= pts.back().first) return pts.back().second;
    for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
      if (u <= pts[i + 1].first) {
        double span = pts[i + 1].first - pts[i].first;
        double a = span > 0.0 ? (u - pts[i].first) / span : 1.0;
        return pts[i].second + a * (pts[i + 1].second - pts[i].second);
      }
    }
    return pts.back().second;
  }

  static obstruction_profile bus_default() { return {{{0.0, 8.6}, {1.0, 28.6}}}; }

  static obstruction_profile from_csv(const std::string& path) {
    auto t = csv::read_file(path);
    int ui = t.column("u");
    int li = t.column("loss_db");
    obstruction_profile p;
    for (const auto& r : t.rows) p.pts.emplace_back(r[ui], r[li]);
    std::sort(p.pts.begin(), p.pts.end());
    if (p.pts.empty()) throw format_error("obstruction profile '" + path + "' has no rows");
    return p;
  }
};

enum class role { node, mobile_scatterer };

struct vehicle {
  std::string id;
  role kind = role::mobile_scatterer;
  int node_id = 0;  // 1-based for role::node, 0 otherwise
  double length = 4.5;
  double width = 1.8;
  double antenna_height = 1.5;  // metadata; propagation is 2-D
  vec2 antenna_offset{0.0, 0.0};
  double gain_front_db = 0.0;  // reflection gain offsets per face
  double gain_back_db = 0.0;
  obstruction_profile obstruction;
  trajectory traj;

  pose at(double t) const { return traj.at(t); }

  oriented_rect rect_at(double t) const {
    pose s = at(t);
    return {s.center, s.heading, length, width};
  }

  vec2 antenna_at(double t) const {
    pose s = at(t);
    vec2 n = s.heading.rot90();
    return s.center + s.heading * antenna_offset.x + n * antenna_offset.y;
  }
};

struct wall_segment {
  vec2 a, b;
};

struct foliage_patch {
  double loss_db_per_m = 0.0;
  std::vector<vec2> poly;
};

struct static_geometry {
  std::vector<wall_segment> walls;
  std::vector<foliage_patch> foliage;
  std::vector<vec2> sd_sites;
};

enum class path_kind { los, sd, md, di };

struct type_params {
  double g0_db = 0.0;
  double n_path = 2.0;
  double sigma_db = 0.0;   // large-scale fading std dev; 0 disables fading
  double mu_c_m = 0.0;     // fading coherence distance
  double d_c_min_m = 0.0;  // lower clamp on the coherence distance
  double chi_per_m = 0.0;  // scatterer density along host geometry
  double w_m = 0.0;        // lateral placement band width

  double coherence_m() const { return std::max(mu_c_m, d_c_min_m); }
};

struct model_params {
  type_params los{-37.0, 1.9, 1.0, 1.2, 1.4, 0.0, 0.0};
  type_params sd{-89.0, 1.5, 3.1, 4.9, 1.0, 0.3, 0.3};
  type_params md{-97.0, 3.6, 3.13, 5.4, 1.1, 0.01, 0.01};
  type_params di{-39.0, 3.3, 0.0, 0.0, 0.0, 0.5, 0.5};
  int di_budget = 64;
  double di_tau_max_s = 4e-6;
  double d_ref_m = 1.0;

  const type_params& of(path_kind k) const {
    switch (k) {
      case path_kind::los: return los;
      case path_kind::sd: return sd;
      case path_kind::md: return md;
      default: return di;
    }
  }
};

struct scenario {
  int schema = 1;
  uint64_t seed = 1;
  geo_anchor origin;
  static_geometry geometry;
  std::vector<vehicle> vehicles;
  model_params params;

  int n_nodes() const {
    int n = 0;
    for (const auto& v : vehicles)
      if (v.kind == role::node) ++n;
    return n;
  }

  const vehicle& node(int node_id) const {
    for (const auto& v : vehicles)
      if (v.kind == role::node && v.node_id == node_id) return v;
    throw validation_error("no node with id " + std::to_string(node_id));
  }

  std::pair<double, double> time_span() const {
    double lo = -1e300, hi = 1e300;
    if (vehicles.empty()) throw validation_error("scenario has no vehicles");
    for (const auto& v : vehicles) {
      lo = std::max(lo, v.traj.t_min());
      hi = std::min(hi, v.traj.t_max());
    }
    if (!(hi > lo)) throw validation_error("vehicle trajectories share no common time span");
    return {lo, hi};
  }
};

// One diffuse scattering site, pinned at population time.
struct di_point {
  vec2 pos;
  double phase0 = 0.0;  // fixed initial phase
  uint32_t id = 0;      // stable site index, used for tie-breaks and RNG keys
};

// Diffuse sites along each wall: round(chi * length) points per segment,
// uniform along it, displaced by U[0, w] toward the wall's left normal.
// Reproducible from (geometry, params, seed) alone.
inline std::vector<di_point> populate_diffuse(const static_geometry& g, const model_params& p,
                                              uint64_t seed) {
  std::vector<di_point> out;
  counter_rng base = counter_rng(seed).stream(0xD1FFu);
  uint32_t next_id = 0;
  for (std::size_t wi = 0; wi < g.walls.size(); ++wi) {
    const auto& w = g.walls[wi];
    double len = dist(w.a, w.b);
    long count = std::lround(p.di.chi_per_m * len);
    if (count <= 0) continue;
    counter_rng rw = base.stream(wi);
    vec2 dir = (w.b - w.a).unit();
    vec2 nrm = dir.rot90();
    for (long i = 0; i < count; ++i) {
      double along = rw.uniform_at(3 * static_cast<uint64_t>(i)) * len;
      double off = rw.uniform_at(3 * static_cast<uint64_t>(i) + 1) * p.di.w_m;
      double ph = rw.uniform_at(3 * static_cast<uint64_t>(i) + 2) * 2.0 * pi;
      out.push_back({w.a + dir * along + nrm * off, ph, next_id++});
    }
  }
  return out;
}

// Keep at most `budget` sites whose two-hop delay is within tau_max, ranked by
// ascending two-hop distance, ties broken by site index. Pure in its inputs.
inline std::vector<const di_point*> select_relevant_diffuse(const std::vector<di_point>& pop,
                                                            vec2 tx, vec2 rx, double tau_max_s,
                                                            int budget) {
  struct ranked {
    double d;
    const di_point* p;
  };
  std::vector<ranked> keep;
  keep.reserve(pop.size());
  double d_max = tau_max_s * c0;
  for (const auto& s : pop) {
    double d = dist(tx, s.pos) + dist(s.pos, rx);
    if (d <= d_max) keep.push_back({d, &s});
  }
  std::sort(keep.begin(), keep.end(), [](const ranked& a, const ranked& b) {
    if (a.d != b.d) return a.d < b.d;
    return a.p->id < b.p->id;
  });
  if (budget >= 0 && keep.size() > static_cast<std::size_t>(budget))
    keep.resize(static_cast<std::size_t>(budget));
  std::vector<const di_point*> out;
  out.reserve(keep.size());
  for (const auto& r : keep) out.push_back(r.p);
  return out;
}

namespace detail {

inline void load_type_params(const text::document& doc, const std::string& name, type_params& tp) {
  const text::section* s = doc.find("scatterer_params." + name);
  if (!s) return;
  tp.g0_db = s->num_or("g0_db", tp.g0_db);
  tp.n_path = s->num_or("n_path", tp.n_path);
  tp.sigma_db = s->num_or("sigma_db", tp.sigma_db);
  tp.mu_c_m = s->num_or("mu_c_m", tp.mu_c_m);
  tp.d_c_min_m = s->num_or("d_c_min_m", tp.d_c_min_m);
  tp.chi_per_m = s->num_or("chi_per_m", tp.chi_per_m);
  tp.w_m = s->num_or("w_m", tp.w_m);
}

inline std::string dirname(const std::string& path) {
  auto pos = path.find_last_of('/');
  return pos == std::string::npos ? std::string(".") : path.substr(0, pos);
}

}  // namespace detail

inline scenario load(const text::document& doc, const std::string& base_dir = ".") {
  scenario sc;
  long schema = doc.top.has("schema") ? doc.top.integer("schema") : 0;
  if (schema != 1) throw format_error("unsupported scenario schema " + std::to_string(schema) + " (expected 1)");
  sc.schema = 1;
  sc.seed = static_cast<uint64_t>(doc.top.has("seed") ? doc.top.integer("seed") : 1);

  if (const text::section* g = doc.find("geometry")) {
    if (g->has("origin")) {
      vec2 ll = g->point("origin");
      sc.origin = {ll.x, ll.y};
    }
    for (const auto& w : g->all("wall")) {
      auto pts = text::split(w, ';');
      if (pts.size() != 2) throw format_error("wall needs 'x0,y0 ; x1,y1', got '" + w + "'");
      sc.geometry.walls.push_back(
          {text::section::parse_point(pts[0], "wall"), text::section::parse_point(pts[1], "wall")});
    }
    for (const auto& f : g->all("foliage")) {
      auto parts = text::split(f, ';');
      if (parts.size() < 4) throw format_error("foliage needs 'loss_db_per_m ; x,y ; x,y ; x,y...'");
      foliage_patch patch;
      patch.loss_db_per_m = text::parse_num(parts[0], "foliage loss");
      for (std::size_t i = 1; i < parts.size(); ++i)
        patch.poly.push_back(text::section::parse_point(parts[i], "foliage vertex"));
      sc.geometry.foliage.push_back(std::move(patch));
    }
    for (const auto& s : g->all("sd_site"))
      sc.geometry.sd_sites.push_back(text::section::parse_point(s, "sd_site"));
  }

  detail::load_type_params(doc, "los", sc.params.los);
  detail::load_type_params(doc, "sd", sc.params.sd);
  detail::load_type_params(doc, "md", sc.params.md);
  detail::load_type_params(doc, "di", sc.params.di);
  if (const text::section* d = doc.find("scatterer_params.di")) {
    sc.params.di_budget = static_cast<int>(d->has("budget") ? d->integer("budget") : sc.params.di_budget);
    sc.params.di_tau_max_s = d->num_or("tau_max_s", sc.params.di_tau_max_s);
  }

  for (const text::section* vs : doc.all_sections("vehicle")) {
    vehicle v;
    v.id = vs->str("id");
    std::string r = vs->str_or("role", "mobile_scatterer");
    if (r == "node")
      v.kind = role::node;
    else if (r == "mobile_scatterer")
      v.kind = role::mobile_scatterer;
    else
      throw format_error("vehicle '" + v.id + "': unknown role '" + r + "'");
    if (v.kind == role::node) {
      v.node_id = static_cast<int>(vs->integer("node"));
      if (v.node_id < 1) throw validation_error("vehicle '" + v.id + "': node ids are 1-based");
    }
    v.length = vs->num_or("length_m", v.length);
    v.width = vs->num_or("width_m", v.width);
    if (v.length <= 0.0 || v.width <= 0.0)
      throw validation_error("vehicle '" + v.id + "': non-positive footprint");
    v.antenna_height = vs->num_or("antenna_height_m", v.antenna_height);
    if (vs->has("antenna_offset")) v.antenna_offset = vs->point("antenna_offset");
    v.gain_front_db = vs->num_or("gain_front_db", 0.0);
    v.gain_back_db = vs->num_or("gain_back_db", 0.0);

    std::string obs = vs->str_or("obstruction", "none");
    if (obs == "bus_default")
      v.obstruction = obstruction_profile::bus_default();
    else if (obs != "none")
      v.obstruction = obstruction_profile::from_csv(base_dir + "/" + obs);

    std::vector<double> times;
    std::vector<vec2> pts;
    for (const auto& wp : vs->all("waypoint")) {
      auto cells = text::split(wp, ',');
      if (cells.size() != 3) throw format_error("waypoint needs 't, x, y', got '" + wp + "'");
      times.push_back(text::parse_num(cells[0], "waypoint t"));
      pts.push_back({text::parse_num(cells[1], "waypoint x"), text::parse_num(cells[2], "waypoint y")});
    }
    for (const auto& wp : vs->all("waypoint_geo")) {
      auto cells = text::split(wp, ',');
      if (cells.size() != 3) throw format_error("waypoint_geo needs 't, lat, lon', got '" + wp + "'");
      times.push_back(text::parse_num(cells[0], "waypoint t"));
      pts.push_back(geo_to_local(sc.origin, text::parse_num(cells[1], "waypoint lat"),
                                 text::parse_num(cells[2], "waypoint lon")));
    }
    if (times.size() < 2)
      throw validation_error("vehicle '" + v.id + "': needs at least 2 waypoints");
    double heading_deg = vs->num_or("heading_deg", 0.0);
    v.traj = trajectory(std::move(times), std::move(pts), heading_deg * pi / 180.0);
    sc.vehicles.push_back(std::move(v));
  }

  if (sc.vehicles.empty()) throw validation_error("scenario defines no vehicles");
  std::vector<int> ids;
  for (const auto& v : sc.vehicles)
    if (v.kind == role::node) ids.push_back(v.node_id);
  std::sort(ids.begin(), ids.end());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] != static_cast<int>(i) + 1)
      throw validation_error("node ids must be exactly 1..L without gaps");
  }
  return sc;
}

inline scenario load_file(const std::string& path) {
  return load(text::parse_file(path), detail::dirname(path));
}

}  // namespace vcsim::scenario
