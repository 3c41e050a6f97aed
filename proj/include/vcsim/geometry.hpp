#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <utility>
#include <vector>

#include "vcsim/common.hpp"

namespace vcsim {

struct vec2 {
  double x = 0.0;
  double y = 0.0;

  vec2 operator+(vec2 o) const { return {x + o.x, y + o.y}; }
  vec2 operator-(vec2 o) const { return {x - o.x, y - o.y}; }
  vec2 operator*(double s) const { return {x * s, y * s}; }
  double dot(vec2 o) const { return x * o.x + y * o.y; }
  double cross(vec2 o) const { return x * o.y - y * o.x; }
  double norm() const { return std::hypot(x, y); }
  vec2 unit() const {
    double n = norm();
    return n > 0.0 ? vec2{x / n, y / n} : vec2{0.0, 0.0};
  }
  vec2 rot90() const { return {-y, x}; }  // left normal
};

inline double dist(vec2 a, vec2 b) { return (a - b).norm(); }

// Axis-oriented box in a local frame; world rectangles are handled by
// transforming into the frame of the owning vehicle.
struct oriented_rect {
  vec2 center;
  vec2 heading;  // unit vector along the long axis
  double length = 0.0;
  double width = 0.0;

  vec2 to_local(vec2 p) const {
    vec2 d = p - center;
    return {d.dot(heading), d.dot(heading.rot90())};
  }
};

// Intersection of segment p0->p1 with the rectangle, in segment parameters.
// Liang-Barsky clip against the box in the rectangle's local frame.
inline std::optional<std::pair<double, double>> clip_segment_rect(vec2 p0, vec2 p1,
                                                                  const oriented_rect& r) {
  vec2 h = r.heading;
  vec2 n = h.rot90();
  vec2 a{(p0 - r.center).dot(h), (p0 - r.center).dot(n)};
  vec2 b{(p1 - r.center).dot(h), (p1 - r.center).dot(n)};
  double hx = r.length / 2.0, hy = r.width / 2.0;
  double t0 = 0.0, t1 = 1.0;
  double d[2] = {b.x - a.x, b.y - a.y};
  double p[2] = {a.x, a.y};
  double lim[2] = {hx, hy};
  for (int ax = 0; ax < 2; ++ax) {
    if (std::abs(d[ax]) < 1e-300) {
      if (p[ax] < -lim[ax] || p[ax] > lim[ax]) return std::nullopt;
      continue;
    }
    double ta = (-lim[ax] - p[ax]) / d[ax];
    double tb = (lim[ax] - p[ax]) / d[ax];
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
    if (t0 > t1) return std::nullopt;
  }
  return std::make_pair(t0, t1);
}

// Total length of segment p0->p1 inside a simple polygon (even-odd rule).
inline double segment_length_in_polygon(vec2 p0, vec2 p1, const std::vector<vec2>& poly) {
  if (poly.size() < 3) return 0.0;
  vec2 d = p1 - p0;
  double len = d.norm();
  if (len == 0.0) return 0.0;

  auto inside = [&](vec2 p) {
    bool in = false;
    for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
      vec2 a = poly[j], b = poly[i];
      if ((b.y > p.y) != (a.y > p.y)) {
        double xint = b.x + (p.y - b.y) * (a.x - b.x) / (a.y - b.y);
        if (p.x < xint) in = !in;
      }
    }
    return in;
  };

  std::vector<double> ts{0.0, 1.0};
  for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
    vec2 a = poly[j], b = poly[i];
    vec2 e = b - a;
    double denom = d.cross(e);
    if (std::abs(denom) < 1e-300) continue;
    double t = (a - p0).cross(e) / denom;
    double u = (a - p0).cross(d) / denom;
    if (t > 0.0 && t < 1.0 && u >= 0.0 && u < 1.0) ts.push_back(t);
  }
  std::sort(ts.begin(), ts.end());
  double acc = 0.0;
  for (std::size_t i = 0; i + 1 < ts.size(); ++i) {
    double mid = 0.5 * (ts[i] + ts[i + 1]);
    if (inside(p0 + d * mid)) acc += (ts[i + 1] - ts[i]) * len;
  }
  return acc;
}

// Local tangent-plane (equirectangular) projection around an anchor.
struct geo_anchor {
  double lat_deg = 0.0;
  double lon_deg = 0.0;
};

inline vec2 geo_to_local(const geo_anchor& o, double lat_deg, double lon_deg) {
  constexpr double earth_r = 6378137.0;
  double lat0 = o.lat_deg * pi / 180.0;
  double x = (lon_deg - o.lon_deg) * pi / 180.0 * earth_r * std::cos(lat0);
  double y = (lat_deg - o.lat_deg) * pi / 180.0 * earth_r;
  return {x, y};
}

}  // namespace vcsim
