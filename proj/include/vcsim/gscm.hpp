#pragma once

#include <cmath>
#include <map>
#include <optional>
#include <vector>

#include "vcsim/common.hpp"
#include "vcsim/geometry.hpp"
#include "vcsim/rng.hpp"
#include "vcsim/scenario.hpp"

namespace vcsim::gscm {

using scenario::path_kind;

// Zero-mean Gaussian large-scale process in dB with exponential spatial
// autocorrelation exp(-dx/d_c), realized as a first-order AR recursion over
// traveled distance. sigma == 0 disables the process.
class fading_process {
 public:
  fading_process(double sigma_db, double coherence_m, counter_rng rng)
      : sigma_(sigma_db), dc_(coherence_m), rng_(rng) {}

  double step(double dx_m) {
    if (sigma_ <= 0.0) return 0.0;
    if (!init_) {
      init_ = true;
      s_ = sigma_ * rng_.normal();
      return s_;
    }
    double rho = dc_ > 0.0 ? std::exp(-std::abs(dx_m) / dc_) : 0.0;
    s_ = rho * s_ + std::sqrt(std::max(0.0, 1.0 - rho * rho)) * sigma_ * rng_.normal();
    return s_;
  }

  double current() const { return s_; }

 private:
  double sigma_;
  double dc_;
  counter_rng rng_;
  double s_ = 0.0;
  bool init_ = false;
};

enum class face { front, back, side };

struct reflection {
  vec2 point;      // reflection point on the vehicle mid axis
  double x_axial;  // signed axial coordinate: +l/2 front, -l/2 back, 0 side
  face f = face::side;
};

// Single reflection point on the mid axis of a large vehicle. Front case when
// both endpoints lie ahead of the front face plane, back case when both lie
// behind the back face plane, mid-axis center otherwise. The dot-product tests
// are equivalent to the |angle| <= pi/2 / >= pi/2 conditions at the face
// midpoints and make the three cases mutually exclusive by construction.
inline reflection reflection_point(const oriented_rect& r, vec2 tx, vec2 rx) {
  vec2 h = r.heading;
  vec2 front_mid = r.center + h * (r.length / 2.0);
  vec2 back_mid = r.center - h * (r.length / 2.0);
  bool tx_ahead = (tx - front_mid).dot(h) >= 0.0;
  bool rx_ahead = (rx - front_mid).dot(h) >= 0.0;
  bool tx_behind = (tx - back_mid).dot(h) <= 0.0;
  bool rx_behind = (rx - back_mid).dot(h) <= 0.0;
  if (tx_ahead && rx_ahead) return {front_mid, r.length / 2.0, face::front};
  if (tx_behind && rx_behind) return {back_mid, -r.length / 2.0, face::back};
  return {r.center, 0.0, face::side};
}

inline bool blocks(const oriented_rect& r, vec2 tx, vec2 rx) {
  return clip_segment_rect(tx, rx, r).has_value();
}

struct obstruction_effect {
  bool obstructed = false;
  double extra_db = 0.0;        // profile loss at the axis crossing
  double alpha_exponent = 0.0;  // path-loss exponent increment (axial crossing)
};

// Obstruction of the tx-rx segment by one vehicle. The profile argument u is
// the normalized axial coordinate of the LOS / mid-axis crossing (0 front,
// 1 back), clamped when the crossing falls outside the footprint. When the
// segment passes through both the front and the back face, the LOS path-loss
// exponent additionally grows by 0.008 per meter of LOS distance.
inline obstruction_effect obstruct_los(const oriented_rect& r,
                                       const scenario::obstruction_profile& profile, vec2 tx,
                                       vec2 rx) {
  obstruction_effect eff;
  auto clip = clip_segment_rect(tx, rx, r);
  if (!clip) return eff;
  eff.obstructed = true;

  vec2 a = r.to_local(tx);
  vec2 b = r.to_local(rx);
  double u = 0.5;
  if (std::abs(a.y - b.y) > 1e-12) {
    double s = a.y / (a.y - b.y);
    double x_cross = a.x + s * (b.x - a.x);
    double half = r.length / 2.0;
    u = (half - std::clamp(x_cross, -half, half)) / r.length;
  }
  eff.extra_db = profile.loss_db(u);

  auto face_of = [&](double t) {
    vec2 p = a + (b - a) * t;
    double fx = std::abs(std::abs(p.x) - r.length / 2.0);
    double fy = std::abs(std::abs(p.y) - r.width / 2.0);
    if (fx <= fy) return p.x > 0.0 ? face::front : face::back;
    return face::side;
  };
  // Interior endpoints (clip parameter 0 or 1) touch no face.
  std::optional<face> f0, f1;
  if (clip->first > 0.0) f0 = face_of(clip->first);
  if (clip->second < 1.0) f1 = face_of(clip->second);
  bool front_hit = (f0 && *f0 == face::front) || (f1 && *f1 == face::front);
  bool back_hit = (f0 && *f0 == face::back) || (f1 && *f1 == face::back);
  if (front_hit && back_hit) eff.alpha_exponent = 0.008 * dist(tx, rx);
  return eff;
}

struct path {
  path_kind kind = path_kind::los;
  uint64_t source = 0;  // 0 LOS, sd site index, md vehicle index, di site id
  double distance_m = 0.0;
  double delay_s = 0.0;
  double power_db = 0.0;
  cd gain;
  bool olos = false;  // LOS only
};

// Per-link path enumerator. Holds the AR fading state of every path source,
// so sampling times must be nondecreasing across calls.
class link_sampler {
 public:
  link_sampler(const scenario::scenario& sc, const std::vector<scenario::di_point>& population,
               int node_a, int node_b, double f_c_hz, uint64_t seed)
      : sc_(sc),
        pop_(population),
        a_(&sc.node(node_a)),
        b_(&sc.node(node_b)),
        lambda_(c0 / f_c_hz) {
    if (node_a == node_b) throw validation_error("link endpoints must differ");
    int lo = std::min(node_a, node_b), hi = std::max(node_a, node_b);
    base_ = counter_rng(seed).stream(0xFADEu, static_cast<uint64_t>(lo), static_cast<uint64_t>(hi));
  }

  std::vector<path> at(double t) {
    vec2 tx = a_->antenna_at(t);
    vec2 rx = b_->antenna_at(t);
    double d_los = dist(tx, rx);
    if (d_los < 1e-9) throw validation_error("coincident antennas on link at t=" + std::to_string(t));

    std::vector<path> out;

    // LOS: vehicle obstruction (profile loss + axial exponent growth) and
    // foliage loss accumulate over all obstructors.
    double extra_db = 0.0;
    double alpha = 0.0;
    bool olos = false;
    for (const auto& v : sc_.vehicles) {
      if (&v == a_ || &v == b_) continue;
      auto eff = obstruct_los(v.rect_at(t), v.obstruction, tx, rx);
      if (eff.obstructed) {
        olos = true;
        extra_db += eff.extra_db;
        alpha += eff.alpha_exponent;
      }
    }
    for (const auto& fol : sc_.geometry.foliage)
      extra_db += fol.loss_db_per_m * segment_length_in_polygon(tx, rx, fol.poly);

    {
      const auto& tp = sc_.params.los;
      path p;
      p.kind = path_kind::los;
      p.source = 0;
      p.distance_m = d_los;
      p.delay_s = d_los / c0;
      p.olos = olos;
      double s = fading(path_kind::los, 0, d_los, tp);
      p.power_db = tp.g0_db - 10.0 * (tp.n_path + alpha) * std::log10(d_los / sc_.params.d_ref_m) +
                   s - extra_db;
      p.gain = amp(p.power_db, p.distance_m);
      out.push_back(p);
    }

    for (std::size_t i = 0; i < sc_.geometry.sd_sites.size(); ++i) {
      const auto& tp = sc_.params.sd;
      vec2 sp = sc_.geometry.sd_sites[i];
      path p;
      p.kind = path_kind::sd;
      p.source = i;
      p.distance_m = dist(tx, sp) + dist(sp, rx);
      p.delay_s = p.distance_m / c0;
      double s = fading(path_kind::sd, i, p.distance_m, tp);
      p.power_db = tp.g0_db - 10.0 * tp.n_path * std::log10(p.distance_m / sc_.params.d_ref_m) + s;
      p.gain = amp(p.power_db, p.distance_m);
      out.push_back(p);
    }

    for (std::size_t vi = 0; vi < sc_.vehicles.size(); ++vi) {
      const auto& v = sc_.vehicles[vi];
      if (&v == a_ || &v == b_) continue;
      oriented_rect r = v.rect_at(t);
      if (blocks(r, tx, rx)) continue;  // obstructing vehicles reflect nothing
      reflection refl = reflection_point(r, tx, rx);
      double face_gain = refl.f == face::front   ? v.gain_front_db
                         : refl.f == face::back ? v.gain_back_db
                                                : 0.0;
      const auto& tp = sc_.params.md;
      path p;
      p.kind = path_kind::md;
      p.source = vi;
      p.distance_m = dist(tx, refl.point) + dist(refl.point, rx);
      p.delay_s = p.distance_m / c0;
      double s = fading(path_kind::md, vi, p.distance_m, tp);
      p.power_db = tp.g0_db + face_gain -
                   10.0 * tp.n_path * std::log10(p.distance_m / sc_.params.d_ref_m) + s;
      p.gain = amp(p.power_db, p.distance_m);
      out.push_back(p);
    }

    const auto& dp = sc_.params.di;
    for (const scenario::di_point* s :
         scenario::select_relevant_diffuse(pop_, tx, rx, sc_.params.di_tau_max_s, sc_.params.di_budget)) {
      path p;
      p.kind = path_kind::di;
      p.source = s->id;
      p.distance_m = dist(tx, s->pos) + dist(s->pos, rx);
      p.delay_s = p.distance_m / c0;
      p.power_db = dp.g0_db - 10.0 * dp.n_path * std::log10(p.distance_m / sc_.params.d_ref_m);
      p.gain = amp(p.power_db, p.distance_m, s->phase0);
      out.push_back(p);
    }

    return out;
  }

 private:
  cd amp(double power_db, double d, double phase0 = 0.0) const {
    double ph = -2.0 * pi * d / lambda_ + phase0;
    return db_to_amp(power_db) * cd(std::cos(ph), std::sin(ph));
  }

  double fading(path_kind k, uint64_t source, double d_now, const scenario::type_params& tp) {
    if (tp.sigma_db <= 0.0) return 0.0;
    auto key = std::make_pair(static_cast<int>(k), source);
    auto it = states_.find(key);
    if (it == states_.end()) {
      fading_process fp(tp.sigma_db, tp.coherence_m(),
                        base_.stream(static_cast<uint64_t>(k) + 1, source));
      it = states_.emplace(key, state{fp, d_now}).first;
      it->second.fp.step(0.0);
      return it->second.fp.current();
    }
    double dx = std::abs(d_now - it->second.d_prev);
    it->second.d_prev = d_now;
    return it->second.fp.step(dx);
  }

  struct state {
    fading_process fp;
    double d_prev;
  };

  const scenario::scenario& sc_;
  const std::vector<scenario::di_point>& pop_;
  const scenario::vehicle* a_;
  const scenario::vehicle* b_;
  double lambda_;
  counter_rng base_{0};
  std::map<std::pair<int, uint64_t>, state> states_;
};

// One-shot enumeration without fading history (first AR sample only).
inline std::vector<path> enumerate_paths(const scenario::scenario& sc,
                                         const std::vector<scenario::di_point>& population,
                                         int node_a, int node_b, double t, double f_c_hz,
                                         uint64_t seed) {
  link_sampler ls(sc, population, node_a, node_b, f_c_hz, seed);
  return ls.at(t);
}

}  // namespace vcsim::gscm
