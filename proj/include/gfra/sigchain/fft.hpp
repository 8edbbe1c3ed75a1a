#pragma once

#include <complex>
#include <cstddef>
#include <mutex>
#include <vector>

#include <fftw3.h>

#include "gfra/error.hpp"

namespace gfra::sig {

namespace detail {

// FFTW planning is not thread-safe; execution on distinct plans is.
inline std::mutex& fftw_plan_mutex() {
  static std::mutex m;
  return m;
}

}  // namespace detail

// In-place complex transform of a fixed size with its own aligned buffer.
class FftPlan {
 public:
  FftPlan(std::size_t n, bool inverse) : n_(n) {
    if (n == 0) throw InvalidArgument("FFT size must be positive");
    buf_ = fftw_alloc_complex(n);
    if (!buf_) throw Error("fftw_alloc_complex failed");
    std::lock_guard lock(detail::fftw_plan_mutex());
    plan_ = fftw_plan_dft_1d(static_cast<int>(n), buf_, buf_, inverse ? FFTW_BACKWARD : FFTW_FORWARD, FFTW_ESTIMATE);
    if (!plan_) {
      fftw_free(buf_);
      throw Error("fftw planning failed");
    }
  }
  ~FftPlan() {
    std::lock_guard lock(detail::fftw_plan_mutex());
    fftw_destroy_plan(plan_);
    fftw_free(buf_);
  }
  FftPlan(const FftPlan&) = delete;
  FftPlan& operator=(const FftPlan&) = delete;

  std::size_t size() const { return n_; }

  // Zero-pads or truncates `in` to the plan size. Unnormalised.
  std::vector<std::complex<double>> run(const std::vector<std::complex<double>>& in) {
    for (std::size_t i = 0; i < n_; ++i) {
      const auto v = i < in.size() ? in[i] : std::complex<double>{};
      buf_[i][0] = v.real();
      buf_[i][1] = v.imag();
    }
    fftw_execute(plan_);
    std::vector<std::complex<double>> out(n_);
    for (std::size_t i = 0; i < n_; ++i) out[i] = {buf_[i][0], buf_[i][1]};
    return out;
  }

 private:
  std::size_t n_;
  fftw_complex* buf_ = nullptr;
  fftw_plan plan_ = nullptr;
};

inline std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

// Full linear cross-correlation r[k] = sum_n x[n + k] conj(h[n]) for
// k in [-(len(h) - 1), len(x) - 1]; element i of the result is lag i - (len(h) - 1).
inline std::vector<std::complex<double>> xcorr(const std::vector<std::complex<double>>& x,
                                               const std::vector<std::complex<double>>& h) {
  if (x.empty() || h.empty()) return {};
  const std::size_t out_len = x.size() + h.size() - 1;
  const std::size_t n = next_pow2(out_len);
  FftPlan fwd(n, false), inv(n, true);
  auto fx = fwd.run(x);
  // Reverse-conjugate h so the convolution becomes a correlation.
  std::vector<std::complex<double>> hr(h.size());
  for (std::size_t i = 0; i < h.size(); ++i) hr[i] = std::conj(h[h.size() - 1 - i]);
  auto fh = fwd.run(hr);
  for (std::size_t i = 0; i < n; ++i) fx[i] *= fh[i];
  auto y = inv.run(fx);
  y.resize(out_len);
  for (auto& v : y) v /= static_cast<double>(n);
  return y;
}

}  // namespace gfra::sig
