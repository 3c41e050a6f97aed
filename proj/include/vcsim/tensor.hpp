#pragma once

#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "vcsim/common.hpp"

namespace vcsim {

// Multi-node channel tensor: per directed link, T snapshots x Q subcarriers,
// time-major. freq_convention: 0 = baseband-centered (DC at bin Q/2),
// 1 = FFT order (DC at bin 0).
struct channel_tensor {
  uint32_t n_nodes = 0;
  uint32_t T = 0;
  uint32_t Q = 0;
  double f_c_hz = 0.0;
  double delta_f_hz = 0.0;
  double t_sys_s = 0.0;
  uint8_t freq_convention = 0;

  struct link_data {
    uint16_t a = 0;  // 1-based node ids
    uint16_t b = 0;
    std::vector<cf> g;  // T*Q, time-major
  };
  std::vector<link_data> links;

  cf& at(std::size_t link, std::size_t m, std::size_t q) {
    return links[link].g[m * Q + q];
  }
  cf at(std::size_t link, std::size_t m, std::size_t q) const {
    return links[link].g[m * Q + q];
  }

  // Physical baseband frequency of bin q.
  double freq_hz(std::size_t q) const {
    if (freq_convention == 0) return (static_cast<double>(q) - static_cast<double>(Q / 2)) * delta_f_hz;
    long idx = static_cast<long>(q);
    if (idx >= static_cast<long>((Q + 1) / 2)) idx -= static_cast<long>(Q);
    return static_cast<double>(idx) * delta_f_hz;
  }

  double t_s_s() const { return n_nodes > 1 ? t_sys_s / static_cast<double>(n_nodes - 1) : t_sys_s; }

  // Sampling instant of snapshot m on the given link: the phase offset is set
  // by the transmitting node min(a, b).
  double snapshot_time(std::size_t link, std::size_t m) const {
    int phase = std::min(links[link].a, links[link].b) - 1;
    return static_cast<double>(m) * t_sys_s + static_cast<double>(phase) * t_s_s();
  }

  int find_link(int a, int b) const {
    for (std::size_t i = 0; i < links.size(); ++i)
      if (links[i].a == a && links[i].b == b) return static_cast<int>(i);
    return -1;
  }
};

// Reorder into baseband-centered bin order. Both conventions cover the same
// signed bin set [-Q/2, Q-1-Q/2]; this is a pure data permutation.
inline channel_tensor to_centered(const channel_tensor& t) {
  if (t.freq_convention == 0) return t;
  channel_tensor out = t;
  out.freq_convention = 0;
  for (std::size_t li = 0; li < t.links.size(); ++li)
    for (std::size_t m = 0; m < t.T; ++m)
      for (std::size_t q = 0; q < t.Q; ++q)
        out.at(li, m, q) = t.at(li, m, (q + t.Q - t.Q / 2) % t.Q);
  return out;
}

namespace mnct {

inline constexpr char magic[5] = {'M', 'N', 'C', 'T', '\x01'};

namespace detail {

template <typename T>
void put(std::string& buf, T v) {
  unsigned char b[sizeof(T)];
  std::memcpy(b, &v, sizeof(T));  // little-endian host
  buf.append(reinterpret_cast<char*>(b), sizeof(T));
}

struct reader {
  const unsigned char* p;
  std::size_t size;
  std::size_t off = 0;

  template <typename T>
  T get(const char* what) {
    if (off + sizeof(T) > size)
      throw format_error("mnct: truncated while reading " + std::string(what) + " at byte offset " +
                         std::to_string(off) + " (file size " + std::to_string(size) + ")");
    T v;
    std::memcpy(&v, p + off, sizeof(T));
    off += sizeof(T);
    return v;
  }
};

}  // namespace detail

inline std::string serialize(const channel_tensor& t) {
  std::string buf;
  buf.append(magic, sizeof(magic));
  detail::put<uint32_t>(buf, t.n_nodes);
  detail::put<uint32_t>(buf, static_cast<uint32_t>(t.links.size()));
  detail::put<uint32_t>(buf, t.T);
  detail::put<uint32_t>(buf, t.Q);
  detail::put<double>(buf, t.f_c_hz);
  detail::put<double>(buf, t.delta_f_hz);
  detail::put<double>(buf, t.t_sys_s);
  detail::put<uint8_t>(buf, t.freq_convention);
  for (const auto& l : t.links) {
    if (l.g.size() != static_cast<std::size_t>(t.T) * t.Q)
      throw validation_error("mnct: link payload size mismatch");
    detail::put<uint16_t>(buf, l.a);
    detail::put<uint16_t>(buf, l.b);
    for (const cf& v : l.g) {
      detail::put<float>(buf, v.real());
      detail::put<float>(buf, v.imag());
    }
  }
  return buf;
}

inline void write_file(const std::string& path, const channel_tensor& t) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw format_error("cannot open '" + path + "' for writing");
  std::string buf = serialize(t);
  f.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!f) throw format_error("short write to '" + path + "'");
}

inline channel_tensor deserialize(const unsigned char* data, std::size_t size) {
  detail::reader r{data, size};
  if (size < sizeof(magic) || std::memcmp(data, magic, sizeof(magic)) != 0)
    throw format_error("mnct: bad magic (not an MNCT v1 file)");
  r.off = sizeof(magic);
  channel_tensor t;
  t.n_nodes = r.get<uint32_t>("node count");
  uint32_t n_links = r.get<uint32_t>("link count");
  t.T = r.get<uint32_t>("snapshot count");
  t.Q = r.get<uint32_t>("subcarrier count");
  t.f_c_hz = r.get<double>("carrier frequency");
  t.delta_f_hz = r.get<double>("subcarrier spacing");
  t.t_sys_s = r.get<double>("snapshot interval");
  t.freq_convention = r.get<uint8_t>("frequency convention");
  if (t.freq_convention > 1)
    throw format_error("mnct: unknown frequency convention " + std::to_string(t.freq_convention));
  std::size_t expect = sizeof(magic) + 4 * 4 + 3 * 8 + 1 +
                       static_cast<std::size_t>(n_links) * (4 + static_cast<std::size_t>(t.T) * t.Q * 8);
  if (expect != size)
    throw format_error("mnct: size mismatch, header implies " + std::to_string(expect) +
                       " bytes but file has " + std::to_string(size) +
                       " (diverges at byte offset " + std::to_string(std::min(expect, size)) + ")");
  t.links.resize(n_links);
  for (auto& l : t.links) {
    l.a = r.get<uint16_t>("link node a");
    l.b = r.get<uint16_t>("link node b");
    l.g.resize(static_cast<std::size_t>(t.T) * t.Q);
    for (auto& v : l.g) {
      float re = r.get<float>("sample re");
      float im = r.get<float>("sample im");
      v = cf(re, im);
    }
  }
  return t;
}

inline channel_tensor read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw format_error("cannot open '" + path + "'");
  std::string buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return deserialize(reinterpret_cast<const unsigned char*>(buf.data()), buf.size());
}

}  // namespace mnct
}  // namespace vcsim
