#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <numbers>
#include <optional>
#include <vector>

#include "gfra/error.hpp"
#include "gfra/params.hpp"
#include "gfra/sigchain/fft.hpp"
#include "gfra/sigchain/signal.hpp"
#include "gfra/sigchain/waveform.hpp"

namespace gfra::sig {

// ---------------------------------------------------------------------------
// Event framing

struct DetectionEvent {
  double start_s = 0.0;
  double end_s = 0.0;
  ComplexSignal buffer;
  double frame_s = 0.0;       // length of this frame, at most Tmax
  bool continued = false;     // a longer busy period goes on in the next frame
  bool resumed = false;       // this frame carries on from the previous one
};

struct FramingOptions {
  int window_symbols = 8;  // moving-average length of the power detector
  int gap_symbols = 4;     // quieter stretches up to this long do not end an event
  int pad_symbols = 1;     // margin kept on both sides of a busy run
};

// Busy periods of the smoothed instantaneous power. A long run of zero-level
// 4-PAM symbols must not split a packet, hence the fairly long window.
inline std::vector<DetectionEvent> frame_events(const ComplexSignal& sig, const SystemParams& p,
                                                double power_threshold, const FramingOptions& opt = {}) {
  std::vector<DetectionEvent> out;
  const std::size_t n = sig.size();
  if (n == 0) return out;
  const long sps = p.samples_per_symbol();
  const long half = std::max<long>(1, opt.window_symbols * sps / 2);
  std::vector<double> prefix(n + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) prefix[i + 1] = prefix[i] + std::norm(sig.samples[i]);
  std::vector<std::pair<long, long>> runs;  // [begin, end)
  long begin = -1;
  for (long i = 0; i <= static_cast<long>(n); ++i) {
    bool busy = false;
    if (i < static_cast<long>(n)) {
      const long a = std::max(0L, i - half);
      const long b = std::min(static_cast<long>(n), i + half);
      busy = (prefix[b] - prefix[a]) / static_cast<double>(b - a) > power_threshold;
    }
    if (busy && begin < 0) begin = i;
    if (!busy && begin >= 0) {
      runs.emplace_back(begin, i);
      begin = -1;
    }
  }
  std::vector<std::pair<long, long>> merged;
  for (const auto& r : runs) {
    if (!merged.empty() && r.first - merged.back().second <= opt.gap_symbols * sps) {
      merged.back().second = r.second;
    } else {
      merged.push_back(r);
    }
  }
  const long max_len = std::max<long>(1, std::lround(p.max_frame_s * sig.fs));
  for (auto [a, b] : merged) {
    a = std::max(0L, a - opt.pad_symbols * sps);
    b = std::min(static_cast<long>(n), b + opt.pad_symbols * sps);
    for (long s = a; s < b; s += max_len) {
      const long e = std::min(b, s + max_len);
      DetectionEvent ev;
      ev.buffer.fs = sig.fs;
      ev.buffer.t0 = sig.t0 + static_cast<double>(s) / sig.fs;
      ev.buffer.samples.assign(sig.samples.begin() + s, sig.samples.begin() + e);
      ev.start_s = ev.buffer.t0;
      ev.end_s = sig.t0 + static_cast<double>(e) / sig.fs;
      ev.frame_s = ev.end_s - ev.start_s;
      ev.continued = e < b;
      ev.resumed = s > a;
      out.push_back(std::move(ev));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// CFO estimation

struct PeriodogramOptions {
  int zero_pad = 4;
  double floor_db = 10.0;           // above the median bin
  double dynamic_range_db = 15.0;   // below the strongest peak
  double min_separation_bins = 2.0; // in units of fs / buffer length
};

// Carrier offsets of the packets in an event, from the Hann-windowed spectrum.
// Nonnegative PAM leaves a strong line at each packet's CFO.
inline std::vector<double> periodogram_cfos(const DetectionEvent& ev, const SystemParams& p,
                                            const PeriodogramOptions& opt = {}) {
  const auto& x = ev.buffer.samples;
  if (x.size() < 64) throw InvalidArgument("periodogram needs at least 64 samples");
  const std::size_t len = x.size();
  const std::size_t nfft = next_pow2(len * static_cast<std::size_t>(std::max(opt.zero_pad, 1)));
  std::vector<cd> w(len);
  for (std::size_t i = 0; i < len; ++i) {
    const double h = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * (static_cast<double>(i) + 0.5) / len);
    w[i] = x[i] * h;
  }
  FftPlan plan(nfft, false);
  const auto spec = plan.run(w);
  std::vector<double> mag(nfft);
  for (std::size_t k = 0; k < nfft; ++k) mag[k] = std::abs(spec[k]);
  std::vector<double> sorted = mag;
  std::nth_element(sorted.begin(), sorted.begin() + static_cast<long>(nfft / 2), sorted.end());
  const double median = sorted[nfft / 2];
  const double fs = ev.buffer.fs;
  auto freq = [&](double k) { return (k < nfft / 2.0 ? k : k - static_cast<double>(nfft)) * fs / nfft; };
  const double fmax = p.max_cfo_hz + p.bandwidth_hz;

  struct Cand {
    std::size_t k;
    double m;
  };
  std::vector<Cand> cands;
  double strongest = 0.0;
  for (std::size_t k = 0; k < nfft; ++k) {
    const double m = mag[k];
    const double l = mag[(k + nfft - 1) % nfft];
    const double r = mag[(k + 1) % nfft];
    if (!(m > l && m >= r)) continue;
    if (std::abs(freq(static_cast<double>(k))) > fmax) continue;
    if (!(m > median * std::pow(10.0, opt.floor_db / 20.0)) || m <= 0.0) continue;
    cands.push_back({k, m});
    strongest = std::max(strongest, m);
  }
  std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) { return a.m > b.m; });
  const double sep = opt.min_separation_bins * static_cast<double>(nfft) / static_cast<double>(len);
  const double floor = strongest * std::pow(10.0, -opt.dynamic_range_db / 20.0);
  std::vector<double> kept_bins, out;
  for (const auto& c : cands) {
    if (c.m < floor) break;
    bool near = false;
    for (double b : kept_bins) {
      double d = std::abs(static_cast<double>(c.k) - b);
      d = std::min(d, static_cast<double>(nfft) - d);
      if (d < sep) near = true;
    }
    if (near) continue;
    const double a = mag[(c.k + nfft - 1) % nfft], b = mag[c.k], g = mag[(c.k + 1) % nfft];
    const double den = a - 2.0 * b + g;
    const double delta = den != 0.0 ? 0.5 * (a - g) / den : 0.0;
    kept_bins.push_back(static_cast<double>(c.k));
    double k = static_cast<double>(c.k) + delta;
    if (k < 0) k += nfft;
    out.push_back(freq(k));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Preamble correlation

struct CorrelationPeaks {
  std::vector<long> positions;  // packet start, in samples from the buffer start
  std::vector<double> magnitudes;
  double threshold = 0.0;
};

// Matched filter of the buffer, shifted down by `cfo_hz`, against the upsampled
// preamble. Local maxima within half a symbol above eta * |preamble|^2.
inline CorrelationPeaks correlate_preamble(const DetectionEvent& ev, double cfo_hz, const std::vector<cd>& preamble,
                                           const SystemParams& p, double eta = 0.5) {
  CorrelationPeaks out;
  double energy = 0.0;
  for (const auto& v : preamble) energy += std::norm(v);
  out.threshold = eta * energy;
  if (ev.buffer.samples.empty() || preamble.empty()) return out;
  const auto y = frequency_shift(ev.buffer.samples, cfo_hz, ev.buffer.fs);
  const auto r = xcorr(y, preamble);
  std::vector<double> mag(r.size());
  for (std::size_t i = 0; i < r.size(); ++i) mag[i] = std::abs(r[i]);
  const long radius = std::max(1, p.samples_per_symbol() / 2);
  const long offset = static_cast<long>(preamble.size()) - 1;
  const long n = static_cast<long>(mag.size());
  for (long i = 0; i < n; ++i) {
    if (mag[i] <= out.threshold) continue;
    bool is_max = true;
    for (long j = std::max(0L, i - radius); j <= std::min(n - 1, i + radius) && is_max; ++j) {
      if (j == i) continue;
      if (mag[j] > mag[i] || (mag[j] == mag[i] && j < i)) is_max = false;
    }
    if (!is_max) continue;
    out.positions.push_back(i - offset);
    out.magnitudes.push_back(mag[i]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Peak drift under a residual frequency offset

struct DriftImage {
  long shift = 0;     // samples
  double gain = 0.0;  // relative to a matched preamble
};

struct DriftTable {
  double step_hz = 1.0;
  double max_hz = 0.0;
  int nzc = 0;
  double tb = 0.0;
  double fs = 0.0;
  std::vector<long> shift;    // Q, samples
  std::vector<double> gain;   // peak magnitude relative to a matched preamble
  // Every correlation maximum at least `min_image_gain` high, strongest first.
  // Near some offsets two images of similar height appear.
  std::vector<std::vector<DriftImage>> images;

  std::size_t index(double df) const {
    const double k = std::round((df + max_hz) / step_hz);
    return static_cast<std::size_t>(std::clamp(k, 0.0, static_cast<double>(shift.size() - 1)));
  }
  long q(double df) const { return shift[index(df)]; }
  double g(double df) const { return gain[index(df)]; }
  double frequency(std::size_t i) const { return -max_hz + step_hz * static_cast<double>(i); }
};

// Location of the correlation maximum when the preamble arrives with a residual
// offset df, for df on a uniform grid over [-max_hz, max_hz]. Lags are searched
// within +-floor(Nzc/2) symbols, the principal range of the cyclic drift.
inline DriftTable build_drift_table(int nzc, int root, double tb, double fs, double max_hz, double step_hz = 1.0,
                                    double min_image_gain = 0.2) {
  if (!(step_hz > 0.0) || !(max_hz >= 0.0)) throw InvalidArgument("bad drift grid");
  const int sps = static_cast<int>(std::lround(fs * tb));
  if (sps < 1) throw InvalidArgument("need at least one sample per symbol");
  DriftTable t;
  t.step_hz = step_hz;
  t.nzc = nzc;
  t.tb = tb;
  t.fs = fs;
  const long half = static_cast<long>(std::llround(max_hz / step_hz));
  t.max_hz = static_cast<double>(half) * step_hz;
  const auto pre = upsample(zc_preamble(nzc, root).samples, sps);
  const long len = static_cast<long>(pre.size());
  const double energy = static_cast<double>(pre.size());
  const std::size_t out_len = 2 * pre.size() - 1;
  const std::size_t nfft = next_pow2(out_len);
  const long reach = static_cast<long>(nzc / 2) * sps;
  const long radius = std::max(1, sps / 2);
  FftPlan fwd(nfft, false), inv(nfft, true);
  std::vector<cd> rev(pre.size());
  for (std::size_t i = 0; i < pre.size(); ++i) rev[i] = std::conj(pre[pre.size() - 1 - i]);
  const auto fh = fwd.run(rev);
  std::vector<double> mag(static_cast<std::size_t>(2 * reach + 1));
  for (long k = -half; k <= half; ++k) {
    const double df = static_cast<double>(k) * step_hz;
    std::vector<cd> x(pre.size());
    for (std::size_t n = 0; n < pre.size(); ++n)
      x[n] = pre[n] * std::polar(1.0, 2.0 * std::numbers::pi * df * static_cast<double>(n) / fs);
    auto fx = fwd.run(x);
    for (std::size_t i = 0; i < nfft; ++i) fx[i] *= fh[i];
    const auto y = inv.run(fx);
    for (long lag = -reach; lag <= reach; ++lag)
      mag[static_cast<std::size_t>(lag + reach)] =
          std::abs(y[static_cast<std::size_t>(lag + len - 1)]) / static_cast<double>(nfft) / energy;
    // Ties go to the smaller shift so that Q(0) = 0 exactly.
    long best = 0;
    for (long lag = -reach; lag <= reach; ++lag) {
      const double m = mag[static_cast<std::size_t>(lag + reach)];
      const double b = mag[static_cast<std::size_t>(best + reach)];
      if (m > b * (1.0 + 1e-12) || (std::abs(m - b) <= 1e-12 * b && std::abs(lag) < std::abs(best))) best = lag;
    }
    t.shift.push_back(best);
    t.gain.push_back(mag[static_cast<std::size_t>(best + reach)]);
    std::vector<DriftImage> imgs{{best, t.gain.back()}};
    for (long lag = -reach; lag <= reach; ++lag) {
      const double m = mag[static_cast<std::size_t>(lag + reach)];
      if (lag == best || m < min_image_gain) continue;
      bool is_max = true;
      for (long j = std::max(-reach, lag - radius); j <= std::min(reach, lag + radius) && is_max; ++j)
        if (j != lag && mag[static_cast<std::size_t>(j + reach)] > m) is_max = false;
      if (is_max && std::abs(lag - best) > radius) imgs.push_back({lag, m});
    }
    std::sort(imgs.begin() + 1, imgs.end(), [](const DriftImage& a, const DriftImage& b) { return a.gain > b.gain; });
    t.images.push_back(std::move(imgs));
  }
  return t;
}

// ---------------------------------------------------------------------------
// Successive peak cancellation

struct PeakBranch {
  double cfo_hz = 0.0;
  std::vector<long> positions;
  std::vector<double> magnitudes;
};

struct PeakMap {
  std::vector<PeakBranch> branches;
  double threshold = 0.0;  // detection threshold the peaks were picked with
};

struct ValidatedPeak {
  double cfo_hz = 0.0;
  long offset = 0;
  double magnitude = 0.0;
  int branch = 0;
};

struct SpcOptions {
  long tolerance = 1;           // samples
  double cfo_slack_hz = 2.0;    // CFO estimation error absorbed by the Q lookup
  double evidence_margin = 1.0; // only demand images expected this far above threshold
  // Images of an accepted peak land a few samples off once other signals overlap
  // them, so removal looks wider. Peaks well above the predicted image height
  // are left alone.
  long removal_tolerance = 10;
  double removal_gain_margin = 0.35;
  // Candidates weaker than this fraction of the strongest peak are dropped.
  // Channel inversion makes all packets arrive at the same power, so true peaks
  // are of similar height while overlapping ghosts rarely reach it.
  double relative_floor = 0.75;
};

// Picks true preamble peaks out of the per-CFO correlation peaks. A packet at
// offset tau with CFO f_j shows up in branch i at tau + Q(f_j - f_i). Candidates
// are visited strongest first; a candidate is accepted when every branch where
// its image should clearly exceed the threshold holds a peak at the predicted
// place. An accepted peak takes its images in the other branches with it.
// `accept`, when given, gets the final say on each candidate that passed the
// cross-branch test.
using PeakCheck = std::function<bool(const ValidatedPeak&)>;

inline std::vector<ValidatedPeak> spc_resolve(const PeakMap& pm, const DriftTable& dt, const SpcOptions& opt = {},
                                              const PeakCheck& accept = {}) {
  std::vector<ValidatedPeak> out;
  const std::size_t kb = pm.branches.size();
  std::vector<std::vector<char>> alive(kb);
  for (std::size_t b = 0; b < kb; ++b) alive[b].assign(pm.branches[b].positions.size(), 1);

  // Images (shift, gain) for offsets within the CFO slack of df; without
  // `all_images` only the main one.
  auto images = [&](double df, bool all_images) {
    std::vector<DriftImage> v;
    for (double d = df - opt.cfo_slack_hz; d <= df + opt.cfo_slack_hz + 1e-9; d += dt.step_hz) {
      const auto& row = dt.images[dt.index(d)];
      v.insert(v.end(), row.begin(), all_images ? row.end() : row.begin() + 1);
    }
    return v;
  };
  auto find = [&](std::size_t c, long pos, const std::vector<DriftImage>& imgs, long tol, double max_gain) {
    std::vector<std::size_t> hits;
    const auto& br = pm.branches[c];
    for (std::size_t i = 0; i < br.positions.size(); ++i) {
      if (!alive[c][i] && max_gain > 0.0) continue;
      for (const auto& im : imgs) {
        if (std::abs(br.positions[i] - (pos + im.shift)) > tol) continue;
        if (max_gain > 0.0 && br.magnitudes[i] > (im.gain + opt.removal_gain_margin) * max_gain) continue;
        hits.push_back(i);
        break;
      }
    }
    return hits;
  };

  double top = 0.0;
  for (const auto& br : pm.branches)
    for (double m : br.magnitudes) top = std::max(top, m);
  const double floor = opt.relative_floor * top;
  const long lobe = std::lround(dt.fs * dt.tb);

  for (;;) {
    std::size_t bb = kb, bi = 0;
    double best = -1.0;
    for (std::size_t b = 0; b < kb; ++b)
      for (std::size_t i = 0; i < alive[b].size(); ++i)
        if (alive[b][i] && pm.branches[b].magnitudes[i] > best) {
          best = pm.branches[b].magnitudes[i];
          bb = b;
          bi = i;
        }
    if (bb == kb || best < floor) break;
    alive[bb][bi] = 0;
    const auto& cand = pm.branches[bb];
    const long pos = cand.positions[bi];
    bool ok = true;
    for (std::size_t c = 0; c < kb && ok; ++c) {
      if (c == bb) continue;
      const double df = cand.cfo_hz - pm.branches[c].cfo_hz;
      if (dt.g(df) * best < pm.threshold * (1.0 + opt.evidence_margin)) continue;
      if (find(c, pos, images(df, false), opt.tolerance, 0.0).empty()) ok = false;
    }
    if (!ok) continue;
    const ValidatedPeak v{cand.cfo_hz, pos, best, static_cast<int>(bb)};
    if (accept && !accept(v)) continue;
    out.push_back(v);
    for (std::size_t c = 0; c < kb; ++c) {
      const double df = cand.cfo_hz - pm.branches[c].cfo_hz;
      for (std::size_t i : find(c, pos, images(df, true), opt.removal_tolerance, best)) alive[c][i] = 0;
    }
    // The rest of the main lobe in its own branch belongs to it as well.
    for (std::size_t i = 0; i < cand.positions.size(); ++i)
      if (std::abs(cand.positions[i] - pos) <= lobe) alive[bb][i] = 0;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Sequence extraction and the full chain

struct ExtractedSequence {
  ComplexSignal z;        // CFO-corrected samples of one packet
  double cfo_hz = 0.0;
  long offset = 0;        // packet start within the event buffer
  double amplitude = 0.0; // channel amplitude from the correlation peak
  bool partial = false;   // packet runs past the buffer; zero-filled
};

// Cuts each validated packet out of `source`, which must contain the event.
// A packet may end after the event did (trailing zero-level symbols look like
// silence to the framer), so the full stream is the better source.
inline std::vector<ExtractedSequence> extract_sequences(const ComplexSignal& source, const DetectionEvent& ev,
                                                        const std::vector<ValidatedPeak>& peaks,
                                                        const SystemParams& p) {
  std::vector<ExtractedSequence> out;
  const long len = std::lround(p.packet_duration_s * source.fs);
  const long pre_len = static_cast<long>(p.preamble_length) * p.samples_per_symbol();
  const long n = static_cast<long>(source.size());
  const long base = std::lround((ev.buffer.t0 - source.t0) * source.fs);
  const double w = -2.0 * std::numbers::pi / source.fs;
  for (const auto& v : peaks) {
    ExtractedSequence s;
    s.cfo_hz = v.cfo_hz;
    s.offset = v.offset;
    s.amplitude = v.magnitude / static_cast<double>(pre_len);
    s.z.fs = source.fs;
    s.z.t0 = ev.buffer.t0 + static_cast<double>(v.offset) / source.fs;
    s.z.samples.assign(static_cast<std::size_t>(len), cd{});
    for (long i = 0; i < len; ++i) {
      const long k = base + v.offset + i;
      if (k < 0 || k >= n) {
        s.partial = true;
        continue;
      }
      // Same phase reference as a shift of the event buffer.
      s.z.samples[static_cast<std::size_t>(i)] =
          source.samples[static_cast<std::size_t>(k)] * std::polar(1.0, w * v.cfo_hz * static_cast<double>(v.offset + i));
    }
    out.push_back(std::move(s));
  }
  return out;
}

inline std::vector<ExtractedSequence> extract_sequences(const DetectionEvent& ev,
                                                        const std::vector<ValidatedPeak>& peaks,
                                                        const SystemParams& p) {
  return extract_sequences(ev.buffer, ev, peaks, p);
}

// Nonnegative PAM leaves a carrier of mean level 1.5 / sqrt(3.5) times the
// amplitude. Averaged over the payload at the right CFO it stands out; a ghost
// seen through a wrong CFO branch averages away.
inline double payload_carrier(const DetectionEvent& ev, const ValidatedPeak& v, const SystemParams& p) {
  const long pre_len = static_cast<long>(p.preamble_length) * p.samples_per_symbol();
  const long len = std::lround(p.packet_duration_s * ev.buffer.fs);
  const long n = static_cast<long>(ev.buffer.size());
  if (v.magnitude <= 0.0) return 0.0;
  // Samples outside the event count as silence, except across a Tmax split.
  long a = v.offset + pre_len, b = v.offset + len;
  if (ev.resumed) a = std::max(a, 0L);
  if (ev.continued) b = std::min(b, n);
  if (b <= a) return 0.0;
  const double w = 2.0 * std::numbers::pi * v.cfo_hz / ev.buffer.fs;
  cd acc{};
  for (long i = std::clamp(a, 0L, n); i < std::clamp(b, 0L, n); ++i)
    acc += ev.buffer.samples[static_cast<std::size_t>(i)] * std::polar(1.0, -w * static_cast<double>(i));
  const double amplitude = v.magnitude / static_cast<double>(pre_len);
  return std::abs(acc) / static_cast<double>(b - a) / (amplitude * 1.5 * kPamScale);
}

// Subtracts one packet from `x` (sampled at fs, index 0 at the packet's time
// origin minus `offset`): the known preamble plus the payload as sliced
// coherently, both scaled by the complex gain measured on the preamble.
inline void cancel_packet(std::vector<cd>& x, double fs, long offset, double cfo_hz, const SystemParams& p,
                          const std::vector<cd>& preamble) {
  const long n = static_cast<long>(x.size());
  const long len = std::lround(p.packet_duration_s * fs);
  const long pre_len = static_cast<long>(preamble.size());
  const int sps = p.samples_per_symbol();
  const double w = 2.0 * std::numbers::pi * cfo_hz / fs;
  auto rot = [&](long k) { return std::polar(1.0, w * static_cast<double>(k)); };
  cd h{};
  double energy = 0.0;
  for (long i = 0; i < pre_len; ++i) {
    const long k = offset + i;
    if (k < 0 || k >= n) continue;
    h += x[static_cast<std::size_t>(k)] * std::conj(rot(k) * preamble[static_cast<std::size_t>(i)]);
    energy += std::norm(preamble[static_cast<std::size_t>(i)]);
  }
  if (energy <= 0.0 || std::abs(h) <= 0.0) return;
  h /= energy;
  for (long i = 0; i < pre_len; ++i) {
    const long k = offset + i;
    if (k >= 0 && k < n) x[static_cast<std::size_t>(k)] -= h * rot(k) * preamble[static_cast<std::size_t>(i)];
  }
  const cd unit = h / std::abs(h);
  for (long s0 = pre_len; s0 + sps <= len; s0 += sps) {
    cd acc{};
    for (long i = s0; i < s0 + sps; ++i) {
      const long k = offset + i;
      if (k >= 0 && k < n) acc += x[static_cast<std::size_t>(k)] * std::conj(rot(k));
    }
    const double level = std::clamp(
        std::round((acc * std::conj(unit)).real() / (sps * std::abs(h) * kPamScale)), 0.0, 3.0);
    const cd sym = h * (level * kPamScale);
    for (long i = s0; i < s0 + sps; ++i) {
      const long k = offset + i;
      if (k >= 0 && k < n) x[static_cast<std::size_t>(k)] -= sym * rot(k);
    }
  }
}

struct ReceiverOptions {
  double power_threshold = 0.1;  // per-sample power, relative to a unit-amplitude packet
  double eta = 0.5;
  double min_carrier = 0.5;      // payload_carrier below this rejects a peak; 0 disables
  FramingOptions framing;
  PeriodogramOptions periodogram;
  SpcOptions spc;
};

struct ReceivedPacket {
  double start_s = 0.0;
  double cfo_hz = 0.0;
  std::vector<int> bits;
  bool partial = false;
};

// Framing, CFO search, correlation, SPC, extraction and demapping.
inline std::vector<ReceivedPacket> receive(const ComplexSignal& sig, const SystemParams& p, const DriftTable& dt,
                                           const ReceiverOptions& opt = {}) {
  std::vector<ReceivedPacket> out;
  const auto pre = preamble_waveform(p);
  for (const auto& ev : frame_events(sig, p, opt.power_threshold, opt.framing)) {
    if (ev.buffer.size() < 64) continue;
    PeakMap pm;
    for (double f : periodogram_cfos(ev, p, opt.periodogram)) {
      const auto c = correlate_preamble(ev, f, pre, p, opt.eta);
      pm.threshold = c.threshold;
      pm.branches.push_back({f, c.positions, c.magnitudes});
    }
    // Carrier test on what the packets accepted so far leave behind.
    DetectionEvent residual = ev;
    PeakCheck check;
    if (opt.min_carrier > 0.0) {
      check = [&](const ValidatedPeak& v) {
        if (payload_carrier(residual, v, p) < opt.min_carrier) return false;
        cancel_packet(residual.buffer.samples, residual.buffer.fs, v.offset, v.cfo_hz, p, pre);
        return true;
      };
    }
    const auto peaks = spc_resolve(pm, dt, opt.spc, check);
    for (const auto& s : extract_sequences(sig, ev, peaks, p)) {
      ReceivedPacket r;
      r.start_s = s.z.t0;
      r.cfo_hz = s.cfo_hz;
      r.partial = s.partial;
      r.bits = demap(s.z.samples, p, s.amplitude);
      out.push_back(std::move(r));
    }
  }
  std::sort(out.begin(), out.end(), [](const ReceivedPacket& a, const ReceivedPacket& b) { return a.start_s < b.start_s; });
  return out;
}

inline DriftTable default_drift_table(const SystemParams& p) {
  return build_drift_table(p.preamble_length, p.zc_root, p.symbol_duration_s, p.sample_rate_hz,
                           2.0 * p.max_cfo_hz + p.bandwidth_hz, 1.0);
}

}  // namespace gfra::sig
