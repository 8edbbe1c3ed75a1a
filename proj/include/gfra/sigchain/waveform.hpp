#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <numbers>
#include <numeric>
#include <random>
#include <vector>

#include "gfra/error.hpp"
#include "gfra/params.hpp"
#include "gfra/random.hpp"
#include "gfra/sigchain/signal.hpp"

namespace gfra::sig {

// Symbol-rate Zadoff-Chu sequence exp(-j pi u n (n + 1) / Nzc).
inline ComplexSignal zc_preamble(int nzc, int root) {
  if (nzc < 2 || root <= 0 || root >= nzc || std::gcd(nzc, root) != 1) {
    throw InvalidParams("ZC root must satisfy 0 < u < Nzc and gcd(u, Nzc) = 1");
  }
  ComplexSignal s;
  s.fs = 1.0;
  s.samples.resize(static_cast<std::size_t>(nzc));
  for (int n = 0; n < nzc; ++n) {
    const double ph = -std::numbers::pi * root * static_cast<double>(n) * (n + 1) / nzc;
    s.samples[static_cast<std::size_t>(n)] = std::polar(1.0, ph);
  }
  return s;
}

// Rectangular upsampling to `sps` samples per symbol.
inline std::vector<cd> upsample(const std::vector<cd>& symbols, int sps) {
  std::vector<cd> out;
  out.reserve(symbols.size() * static_cast<std::size_t>(sps));
  for (const auto& s : symbols)
    for (int k = 0; k < sps; ++k) out.push_back(s);
  return out;
}

inline std::vector<cd> preamble_waveform(const SystemParams& p) {
  return upsample(zc_preamble(p.preamble_length, p.zc_root).samples, p.samples_per_symbol());
}

// Nonnegative 4-PAM, Gray labelled: 00 -> 0, 01 -> 1, 11 -> 2, 10 -> 3, levels
// scaled by 1/sqrt(3.5) for unit mean power.
inline constexpr double kPamScale = 0.53452248382484879;  // 1 / sqrt(3.5)

inline int gray_level(int b0, int b1) {
  static constexpr std::array<int, 4> table{0, 1, 3, 2};  // index b0 b1
  return table[static_cast<std::size_t>(b0 * 2 + b1)];
}

inline std::array<int, 2> level_bits(int level) {
  static constexpr std::array<std::array<int, 2>, 4> table{{{0, 0}, {0, 1}, {1, 1}, {1, 0}}};
  return table[static_cast<std::size_t>(level)];
}

// Payload bits that fill one packet duration after the preamble.
inline int payload_bits(const SystemParams& p) {
  const int symbols = static_cast<int>(std::lround(p.packet_duration_s / p.symbol_duration_s)) - p.preamble_length;
  return std::max(0, 2 * symbols);
}

// Preamble then payload, rectangular pulses at Fs, rotated by the CFO. With
// `random_phase` a carrier phase is drawn from `rng`; otherwise rng is unused.
inline ComplexSignal synthesize_packet(const std::vector<int>& bits, const SystemParams& p, double cfo_hz, Rng& rng,
                                       bool random_phase = false) {
  if (bits.size() % 2 != 0) throw InvalidArgument("payload needs an even number of bits");
  const int sps = p.samples_per_symbol();
  std::vector<cd> symbols = zc_preamble(p.preamble_length, p.zc_root).samples;
  for (std::size_t i = 0; i < bits.size(); i += 2) {
    symbols.emplace_back(gray_level(bits[i] & 1, bits[i + 1] & 1) * kPamScale, 0.0);
  }
  ComplexSignal s;
  s.fs = p.sample_rate_hz;
  s.samples = upsample(symbols, sps);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  const double phi = random_phase ? phase(rng) : 0.0;
  if (cfo_hz != 0.0 || phi != 0.0) {
    for (std::size_t n = 0; n < s.samples.size(); ++n) {
      s.samples[n] *= std::polar(1.0, 2.0 * std::numbers::pi * cfo_hz * static_cast<double>(n) / s.fs + phi);
    }
  }
  return s;
}

// Multiplies by exp(-j 2 pi f n / fs), n counted from the first sample.
inline std::vector<cd> frequency_shift(const std::vector<cd>& x, double f_hz, double fs) {
  std::vector<cd> y(x.size());
  const double w = -2.0 * std::numbers::pi * f_hz / fs;
  for (std::size_t n = 0; n < x.size(); ++n) y[n] = x[n] * std::polar(1.0, w * static_cast<double>(n));
  return y;
}

// Noncoherent demapper for a CFO-corrected packet: symbol magnitudes after
// integrate-and-dump, normalised by the channel amplitude, sliced to the nearest
// level. Returns the payload bits.
inline std::vector<int> demap(const std::vector<cd>& packet, const SystemParams& p, double amplitude) {
  if (!(amplitude > 0.0)) throw InvalidArgument("channel amplitude must be positive");
  const int sps = p.samples_per_symbol();
  const std::size_t first = static_cast<std::size_t>(p.preamble_length) * static_cast<std::size_t>(sps);
  std::vector<int> bits;
  for (std::size_t s = first; s + static_cast<std::size_t>(sps) <= packet.size(); s += static_cast<std::size_t>(sps)) {
    cd acc{};
    for (int k = 0; k < sps; ++k) acc += packet[s + static_cast<std::size_t>(k)];
    const double level = std::abs(acc) / (sps * amplitude * kPamScale);
    const int idx = std::clamp(static_cast<int>(std::lround(level)), 0, 3);
    const auto b = level_bits(idx);
    bits.push_back(b[0]);
    bits.push_back(b[1]);
  }
  return bits;
}

// Adds circular complex Gaussian noise of variance `noise_power` per sample.
inline void add_noise(std::vector<cd>& x, double noise_power, Rng& rng) {
  std::normal_distribution<double> n(0.0, std::sqrt(noise_power / 2.0));
  for (auto& v : x) v += cd(n(rng), n(rng));
}

}  // namespace gfra::sig
