#pragma once

#include <bit>
#include <complex>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "gfra/error.hpp"

namespace gfra::sig {

using cd = std::complex<double>;

struct ComplexSignal {
  std::vector<cd> samples;
  double fs = 1.0;
  double t0 = 0.0;

  std::size_t size() const { return samples.size(); }
  double duration() const { return static_cast<double>(samples.size()) / fs; }
  double energy() const {
    double e = 0.0;
    for (const auto& x : samples) e += std::norm(x);
    return e;
  }
};

namespace detail {

inline void put_f32_le(std::ostream& os, float v) {
  std::uint32_t u;
  std::memcpy(&u, &v, sizeof u);
  if constexpr (std::endian::native == std::endian::big) u = __builtin_bswap32(u);
  os.write(reinterpret_cast<const char*>(&u), sizeof u);
}

inline float get_f32_le(std::istream& is) {
  std::uint32_t u = 0;
  is.read(reinterpret_cast<char*>(&u), sizeof u);
  if constexpr (std::endian::native == std::endian::big) u = __builtin_bswap32(u);
  float v;
  std::memcpy(&v, &u, sizeof v);
  return v;
}

}  // namespace detail

// Interleaved float32 little-endian I/Q in `path`, plus `path`.json holding fs,
// t0 and the sample count.
inline void write_iq(const std::string& path, const ComplexSignal& s) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path + " for writing");
  for (const auto& x : s.samples) {
    detail::put_f32_le(os, static_cast<float>(x.real()));
    detail::put_f32_le(os, static_cast<float>(x.imag()));
  }
  std::ofstream hs(path + ".json");
  if (!hs) throw IoError("cannot open " + path + ".json for writing");
  nlohmann::json h{{"format", "cf32_le"}, {"fs", s.fs}, {"t0", s.t0}, {"samples", s.samples.size()}};
  hs << h.dump(2) << '\n';
  if (!os || !hs) throw IoError("write failed for " + path);
}

inline ComplexSignal read_iq(const std::string& path) {
  std::ifstream hs(path + ".json");
  if (!hs) throw IoError("missing header " + path + ".json");
  nlohmann::json h;
  try {
    hs >> h;
  } catch (const nlohmann::json::exception& ex) {
    throw IoError("bad header " + path + ".json: " + ex.what());
  }
  ComplexSignal s;
  s.fs = h.at("fs").get<double>();
  s.t0 = h.at("t0").get<double>();
  const auto n = h.at("samples").get<std::size_t>();
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path);
  s.samples.resize(n);
  for (auto& x : s.samples) {
    const float re = detail::get_f32_le(is);
    const float im = detail::get_f32_le(is);
    x = cd(re, im);
  }
  if (!is) throw IoError("truncated sample file " + path);
  return s;
}

}  // namespace gfra::sig
