#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "gfra/error.hpp"
#include "gfra/log.hpp"
#include "gfra/params.hpp"
#include "gfra/policy.hpp"
#include "gfra/random.hpp"

namespace gfra {

inline constexpr std::size_t kDefaultGridPoints = 2048;

// Distribution of an aggregate overlap area on a uniform lattice s_i = i * step.
// Mass beyond the last grid point is kept implicitly as 1 - cdf.back().
struct InterferenceCdf {
  std::vector<double> grid;
  std::vector<double> cdf;
  // Construction metadata.
  double packet_duration_s = 0.0;
  double bandwidth_hz = 0.0;
  double max_cfo_hz = 0.0;
  double count = 0.0;  // interferer count n, or replica rate g for mixtures
  // Probability that one interferer inside the vulnerable period overlaps at all.
  // The conditional law in `cdf` applies to the overlapping ones.
  double overlap_probability = 1.0;

  std::size_t size() const { return grid.size(); }
  double step() const { return grid.size() > 1 ? grid[1] - grid[0] : 0.0; }
  double max() const { return grid.empty() ? 0.0 : grid.back(); }
  double tail_mass() const { return cdf.empty() ? 1.0 : 1.0 - cdf.back(); }

  // F(s), linearly interpolated between grid points.
  double at(double s) const {
    if (cdf.empty() || s < 0.0) return 0.0;
    if (s >= grid.back()) return cdf.back();
    const double x = s / step();
    const auto i = static_cast<std::size_t>(x);
    const double t = x - static_cast<double>(i);
    return cdf[i] + t * (cdf[i + 1] - cdf[i]);
  }

  // Smallest grid value with F >= q (grid max when q is never reached).
  double quantile(double q) const {
    auto it = std::lower_bound(cdf.begin(), cdf.end(), q);
    if (it == cdf.end()) return max();
    return grid[static_cast<std::size_t>(it - cdf.begin())];
  }

  std::vector<double> pmf() const {
    std::vector<double> m(cdf.size());
    double prev = 0.0;
    for (std::size_t i = 0; i < cdf.size(); ++i) {
      m[i] = cdf[i] - prev;
      prev = cdf[i];
    }
    return m;
  }
};

inline std::vector<double> uniform_grid(double max_value, std::size_t points = kDefaultGridPoints) {
  if (points < 2 || !(max_value > 0.0)) throw InvalidArgument("grid needs >= 2 points and a positive extent");
  std::vector<double> g(points);
  const double h = max_value / static_cast<double>(points - 1);
  for (std::size_t i = 0; i < points; ++i) g[i] = h * static_cast<double>(i);
  return g;
}

inline InterferenceCdf cdf_from_pmf(std::vector<double> grid, const std::vector<double>& pmf) {
  InterferenceCdf out;
  out.grid = std::move(grid);
  out.cdf.resize(pmf.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < pmf.size(); ++i) {
    acc += pmf[i];
    out.cdf[i] = std::min(acc, 1.0);
  }
  return out;
}

// Point mass at zero: the law of an empty sum.
inline InterferenceCdf unit_step(const std::vector<double>& grid) {
  InterferenceCdf out;
  out.grid = grid;
  out.cdf.assign(grid.size(), 1.0);
  return out;
}

inline void copy_meta(InterferenceCdf& dst, const InterferenceCdf& src) {
  dst.packet_duration_s = src.packet_duration_s;
  dst.bandwidth_hz = src.bandwidth_hz;
  dst.max_cfo_hz = src.max_cfo_hz;
  dst.overlap_probability = src.overlap_probability;
}

// Replica SINR under aggregate overlap area M: 1 / (M / (W Tp) + 1 / gamma).
inline double sinr(double aggregate_overlap, const SystemParams& p) {
  return 1.0 / (aggregate_overlap / p.replica_area() + 1.0 / p.replica_snr());
}

struct ClampedProbability {
  double value = 0.0;
  bool clamped = false;
};

// Closed-form single-interferer exceedance probability Pr(S > s),
// (1 / (Tp Fm)) [W (Tp - s/W) + s ln(s / (Tp W))], clamped to [0, 1].
inline ClampedProbability overlap_ccdf_closed_form(double s, const SystemParams& p) {
  const double area = p.replica_area();
  if (!(s >= 0.0) || s > area * (1.0 + 1e-12)) throw DomainError("overlap area outside [0, W Tp]");
  if (!(p.max_cfo_hz > 0.0)) throw DomainError("closed-form overlap law needs Fm > 0");
  const double tp = p.packet_duration_s;
  const double w = p.bandwidth_hz;
  s = std::min(s, area);
  const double log_term = s > 0.0 ? s * std::log(s / area) : 0.0;  // s ln s -> 0
  const double raw = (w * (tp - s / w) + log_term) / (tp * p.max_cfo_hz);
  ClampedProbability out;
  out.value = std::clamp(raw, 0.0, 1.0);
  out.clamped = raw != out.value;
  return out;
}

// CDF built from the clamped closed form, on [0, grid_max].
inline InterferenceCdf paper_literal_cdf(const SystemParams& p, double grid_max,
                                         std::size_t points = kDefaultGridPoints) {
  InterferenceCdf out;
  out.grid = uniform_grid(grid_max, points);
  out.cdf.resize(points);
  const double area = p.replica_area();
  double prev = 0.0;
  for (std::size_t i = 0; i < points; ++i) {
    const double s = out.grid[i];
    const double f = s >= area ? 1.0 : 1.0 - overlap_ccdf_closed_form(s, p).value;
    prev = std::max(prev, f);  // keep monotone
    out.cdf[i] = prev;
  }
  out.packet_duration_s = p.packet_duration_s;
  out.bandwidth_hz = p.bandwidth_hz;
  out.max_cfo_hz = p.max_cfo_hz;
  out.count = 1.0;
  out.overlap_probability = 1.0;
  return out;
}

enum class CfoDifferenceLaw {
  Triangular,  // difference of two independent uniforms on [-Fm, Fm]
  Uniform,     // uniform on [-2Fm, 2Fm]
};

struct OverlapOracleOptions {
  CfoDifferenceLaw cfo_law = CfoDifferenceLaw::Triangular;
  std::optional<double> fixed_time_offset_s;  // pins the start-time offset
  double grid_max = 0.0;                      // 0 selects N W Tp
  std::size_t points = kDefaultGridPoints;
};

// Overlap area between two W x Tp rectangles offset by (dt, df).
inline double rectangle_overlap(double dt, double df, double tp, double w) {
  const double time = tp - std::abs(dt);
  const double freq = w - std::abs(df);
  return (time > 0.0 && freq > 0.0) ? time * freq : 0.0;
}

// Adds `weight` at position x, split linearly between the two neighbouring
// lattice points so the mean is preserved.
inline void deposit(std::vector<double>& mass, double x_over_step, double weight) {
  if (x_over_step <= 0.0) {
    mass.front() += weight;
    return;
  }
  const auto j = static_cast<std::size_t>(x_over_step);
  if (j + 1 >= mass.size()) {
    if (j + 1 == mass.size() && x_over_step == static_cast<double>(j)) mass.back() += weight;
    return;  // beyond the grid: stays in the implicit tail
  }
  const double t = x_over_step - static_cast<double>(j);
  mass[j] += (1.0 - t) * weight;
  mass[j + 1] += t * weight;
}

// Monte Carlo law of the overlap between the reference replica [0,Tp]x[0,W] and
// one interferer whose start lies uniformly in (-Tp, Tp), conditioned on a
// non-empty overlap. overlap_probability holds the unconditional hit rate.
inline InterferenceCdf overlap_cdf_oracle(Rng& rng, const SystemParams& p, std::size_t samples,
                                          const OverlapOracleOptions& opt = {}) {
  if (samples < 10000) throw InvalidArgument("overlap oracle needs at least 1e4 samples");
  const double tp = p.packet_duration_s;
  const double w = p.bandwidth_hz;
  const double fm = p.max_cfo_hz;
  const double grid_max = opt.grid_max > 0.0 ? opt.grid_max : p.replicas * p.replica_area();
  InterferenceCdf out;
  out.grid = uniform_grid(grid_max, opt.points);
  std::vector<double> mass(opt.points, 0.0);
  const double inv_step = 1.0 / out.step();

  std::uniform_real_distribution<double> time(-tp, tp);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::size_t hits = 0;
  for (std::size_t k = 0; k < samples; ++k) {
    const double dt = opt.fixed_time_offset_s ? *opt.fixed_time_offset_s : time(rng);
    double df = 0.0;
    if (fm > 0.0) {
      df = opt.cfo_law == CfoDifferenceLaw::Triangular ? fm * unit(rng) - fm * unit(rng) : 2.0 * fm * unit(rng);
    }
    const double s = rectangle_overlap(dt, df, tp, w);
    if (s <= 0.0) continue;
    ++hits;
    deposit(mass, s * inv_step, 1.0);
  }
  if (hits == 0) {
    out = unit_step(out.grid);
  } else {
    for (double& m : mass) m /= static_cast<double>(hits);
    out = cdf_from_pmf(out.grid, mass);
  }
  out.packet_duration_s = tp;
  out.bandwidth_hz = w;
  out.max_cfo_hz = fm;
  out.count = 1.0;
  out.overlap_probability = static_cast<double>(hits) / static_cast<double>(samples);
  return out;
}

// Law of the sum of two independent areas on the same lattice.
inline InterferenceCdf convolve(const InterferenceCdf& a, const InterferenceCdf& b) {
  if (a.size() != b.size() || std::abs(a.step() - b.step()) > 1e-12 * std::max(1.0, a.step())) {
    throw InvalidArgument("cannot convolve CDFs defined on different grids");
  }
  const auto pa = a.pmf();
  const auto pb = b.pmf();
  const std::size_t n = pa.size();
  std::vector<double> r(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (pa[i] == 0.0) continue;
    const double ai = pa[i];
    for (std::size_t j = 0; i + j < n; ++j) r[i + j] += ai * pb[j];
  }
  auto out = cdf_from_pmf(a.grid, r);
  copy_meta(out, a);
  out.count = a.count + b.count;
  return out;
}

// n-fold sum of i.i.d. areas drawn from `base`; n = 0 gives the unit step.
inline InterferenceCdf convolve_cdf(const InterferenceCdf& base, int n) {
  if (n < 0) throw InvalidArgument("negative convolution order");
  if (n == 0) {
    auto out = unit_step(base.grid);
    copy_meta(out, base);
    out.count = 0;
    return out;
  }
  InterferenceCdf acc = base;
  for (int k = 1; k < n; ++k) acc = convolve(acc, base);
  acc.count = n;
  return acc;
}

enum class MixtureMode {
  PoissonMixture,  // sum over Poisson interferer counts
  MeanCount,       // fixed count ceil(2 g Tp) - 1
};

enum class MrcOutageModel {
  SinrSum,     // Pr(sum_i SINR(M_i) < St) with i.i.d. per-replica areas
  SummedArea,  // Pr(sum_i M_i > W Tp (N/St - 1/gamma))
};

// Caches the convolution powers of a single-interferer law so that unconditional
// laws can be evaluated cheaply at many replica rates.
class InterferenceModel {
 public:
  explicit InterferenceModel(InterferenceCdf base) : base_(std::move(base)) {
    powers_.push_back(convolve_cdf(base_, 0));
    powers_.push_back(base_);
  }

  const InterferenceCdf& base() const { return base_; }

  const InterferenceCdf& power(int n) {
    if (n < 0) throw InvalidArgument("negative convolution order");
    while (static_cast<int>(powers_.size()) <= n) {
      const InterferenceCdf& last = powers_.back();
      if (last.cdf.back() < 1e-15) {
        InterferenceCdf empty = last;
        std::fill(empty.cdf.begin(), empty.cdf.end(), 0.0);
        empty.count = static_cast<double>(powers_.size());
        powers_.push_back(std::move(empty));
      } else {
        powers_.push_back(convolve(last, base_));
      }
    }
    return powers_[static_cast<std::size_t>(n)];
  }

  // Unconditional per-replica law at aggregate replica rate g. Each interferer in
  // the 2 Tp vulnerable period overlaps with base().overlap_probability.
  InterferenceCdf unconditional(double g, const SystemParams& p, MixtureMode mode) {
    if (g < 0.0) throw InvalidArgument("negative replica rate");
    const double q = base_.overlap_probability;
    std::vector<double> f(base_.size(), 0.0);
    auto accumulate = [&](int n, double w) {
      if (w == 0.0) return;
      const auto& pn = power(n);
      for (std::size_t i = 0; i < f.size(); ++i) f[i] += w * pn.cdf[i];
    };
    if (mode == MixtureMode::PoissonMixture) {
      const double mu = 2.0 * g * p.packet_duration_s * q;
      double cum = 0.0;
      for (int n = 0;; ++n) {
        const double w = mu > 0.0 ? std::exp(-mu + n * std::log(mu) - std::lgamma(n + 1.0)) : (n == 0 ? 1.0 : 0.0);
        accumulate(n, w);
        cum += w;
        if (1.0 - cum < 1e-9 && n >= mu) break;
        if (power(n).cdf.back() < 1e-15) break;  // higher counts put no mass on the grid
        if (n > 100000) break;
      }
    } else {
      const int n = std::max(0, static_cast<int>(std::ceil(2.0 * g * p.packet_duration_s - 1e-12)) - 1);
      // Binomial thinning of the n interferers.
      for (int k = 0; k <= n; ++k) {
        const double logc = std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
        double w;
        if (q >= 1.0) {
          w = k == n ? 1.0 : 0.0;
        } else if (q <= 0.0) {
          w = k == 0 ? 1.0 : 0.0;
        } else {
          w = std::exp(logc + k * std::log(q) + (n - k) * std::log1p(-q));
        }
        accumulate(k, w);
      }
    }
    InterferenceCdf out;
    out.grid = base_.grid;
    out.cdf = std::move(f);
    double prev = 0.0;
    for (double& v : out.cdf) {
      v = std::clamp(v, prev, 1.0);
      prev = v;
    }
    copy_meta(out, base_);
    out.count = g;
    return out;
  }

 private:
  InterferenceCdf base_;
  std::vector<InterferenceCdf> powers_;
};

inline InterferenceCdf unconditional_cdf(const InterferenceCdf& base, double g, const SystemParams& p,
                                         MixtureMode mode) {
  InterferenceModel model(base);
  return model.unconditional(g, p, mode);
}

// Pr(SINR < St) for one replica: 1 - F(W Tp (1/St - 1/gamma)).
inline double outage_single(const InterferenceCdf& cdf, const SystemParams& p) {
  const double snr = p.replica_snr();
  if (p.sinr_threshold > snr * (1.0 + kThresholdSlack)) {
    warn("decoding threshold exceeds the interference-free SNR; outage is 1");
    return 1.0;
  }
  const double arg = p.replica_area() * (1.0 / p.sinr_threshold - 1.0 / snr);
  return std::clamp(1.0 - cdf.at(std::max(arg, 0.0)), 0.0, 1.0);
}

// Every one of the N replicas fails on its own.
inline double outage_independent(const InterferenceCdf& cdf, const SystemParams& p) {
  const double single = outage_single(cdf, p);
  return std::pow(single, p.replicas);
}

// MRC outage from the law of the summed interference areas of the N replicas.
inline double outage_mrc_summed(const InterferenceCdf& summed, const SystemParams& p) {
  const double arg = p.replica_area() * (p.replicas / p.sinr_threshold - 1.0 / p.replica_snr());
  if (arg < 0.0) return 1.0;
  return std::clamp(1.0 - summed.at(arg), 0.0, 1.0);
}

namespace detail {

// Probability that the sum of N i.i.d. SINRs falls below St, where each SINR is
// 1 / (M / (W Tp) + 1/gamma) and M follows `per_replica`.
inline double sinr_sum_outage(const InterferenceCdf& per_replica, const SystemParams& p,
                              std::size_t lattice = 2048) {
  const double snr = p.replica_snr();
  const double step = snr / static_cast<double>(lattice);
  std::vector<double> single(lattice + 1, 0.0);
  const auto mass = per_replica.pmf();
  for (std::size_t i = 0; i < mass.size(); ++i) {
    if (mass[i] <= 0.0) continue;
    deposit(single, sinr(per_replica.grid[i], p) / step, mass[i]);
  }
  single.front() += per_replica.tail_mass();  // beyond the grid: SINR ~ 0

  std::vector<double> acc = single;
  for (int k = 1; k < p.replicas; ++k) {
    std::vector<double> next(acc.size() + lattice, 0.0);
    for (std::size_t i = 0; i < acc.size(); ++i) {
      if (acc[i] == 0.0) continue;
      for (std::size_t j = 0; j < single.size(); ++j) next[i + j] += acc[i] * single[j];
    }
    acc.swap(next);
  }
  const double limit = p.sinr_threshold * (1.0 - kThresholdSlack);
  double below = 0.0;
  for (std::size_t i = 0; i < acc.size(); ++i) {
    if (static_cast<double>(i) * step < limit) below += acc[i];
  }
  return std::clamp(below, 0.0, 1.0);
}

}  // namespace detail

// MRC outage from the per-replica law. SinrSum evaluates the combined SINR
// exactly for independent replicas; SummedArea applies the summed-area threshold.
inline double outage_mrc(const InterferenceCdf& per_replica, const SystemParams& p,
                         MrcOutageModel model = MrcOutageModel::SinrSum) {
  if (p.replicas < 1) throw InvalidParams("need N >= 1");
  if (model == MrcOutageModel::SummedArea) return outage_mrc_summed(convolve_cdf(per_replica, p.replicas), p);
  return detail::sinr_sum_outage(per_replica, p);
}

inline void write_cdf_csv(std::ostream& os, const InterferenceCdf& cdf) {
  os << "s,F\n";
  os.precision(12);
  for (std::size_t i = 0; i < cdf.size(); ++i) os << cdf.grid[i] << ',' << cdf.cdf[i] << '\n';
}

enum class BaseLaw { Oracle, PaperLiteral };

// Single-interferer law on the standard [0, N W Tp] grid.
inline InterferenceCdf make_base_law(const SystemParams& p, BaseLaw law, std::uint64_t seed = 1,
                                     std::size_t samples = 1'000'000, std::size_t points = kDefaultGridPoints,
                                     CfoDifferenceLaw cfo_law = CfoDifferenceLaw::Triangular) {
  const double grid_max = p.replicas * p.replica_area();
  if (law == BaseLaw::PaperLiteral) return paper_literal_cdf(p, grid_max, points);
  Rng rng = substream(seed, 0xB45E);
  OverlapOracleOptions opt;
  opt.grid_max = grid_max;
  opt.points = points;
  opt.cfo_law = cfo_law;
  return overlap_cdf_oracle(rng, p, samples, opt);
}

// Aggregate rates at one operating point.
struct LoadPoint {
  double lambda = 0.0;        // new packets per second
  double g = 0.0;             // replica transmissions per second
  double offered_load = 0.0;  // W / (2Fm + W) g Tp
  double outage = 0.0;
  int iterations = 0;
  bool converged = false;
  bool overload = false;
};

struct SolverOptions {
  double damping = 0.5;
  double tolerance = 1e-6;
  int max_iterations = 200;
};

// Fixed point g = N lambda / (1 - Po(g)) with damping. Po is any callable
// double(double g).
template <class OutageAt>
LoadPoint solve_offered_load(double lambda, const SystemParams& p, OutageAt&& outage_at,
                             const SolverOptions& opt = {}) {
  if (lambda < 0.0) throw InvalidArgument("negative arrival rate");
  LoadPoint lp;
  lp.lambda = lambda;
  const double base = p.replicas * lambda;
  double g = base;
  if (lambda == 0.0) {
    lp.g = 0.0;
    lp.outage = outage_at(0.0);
    lp.converged = true;
    return lp;
  }
  // Beyond this rate the channel is saturated for any practical purpose.
  const double g_cap = std::max(1e3 * base, 1e3 / p.packet_duration_s);
  for (int it = 1; it <= opt.max_iterations; ++it) {
    const double po = outage_at(g);
    lp.iterations = it;
    lp.outage = po;
    if (po >= 1.0 - 1e-12) {
      lp.overload = true;
      break;
    }
    const double target = base / (1.0 - po);
    const double next = (1.0 - opt.damping) * g + opt.damping * target;
    const bool done = std::abs(next - g) <= opt.tolerance * std::max(g, 1e-12);
    g = next;
    if (done) {
      lp.converged = true;
      lp.outage = outage_at(g);
      break;
    }
    if (g > g_cap) {
      lp.overload = true;
      break;
    }
  }
  if (!lp.converged) lp.overload = true;
  lp.g = g;
  lp.offered_load = p.load_from_rate(g);
  return lp;
}

// Binds an interference model to a combining policy for repeated Po(g) queries.
class AnalyticOutage {
 public:
  AnalyticOutage(SystemParams p, InterferenceCdf base, CombiningPolicy policy,
                 MixtureMode mixture = MixtureMode::PoissonMixture, MrcOutageModel mrc = MrcOutageModel::SinrSum)
      : p_(p), model_(std::move(base)), policy_(policy), mixture_(mixture), mrc_(mrc) {
    if (policy_ == CombiningPolicy::Selection) {
      throw InvalidArgument("fragment (SC) combining has no closed-form outage");
    }
  }

  double per_replica_outage(double g) {
    return outage_single(model_.unconditional(g, p_, mixture_), p_);
  }

  double operator()(double g) {
    auto f = model_.unconditional(g, p_, mixture_);
    return policy_ == CombiningPolicy::MaxRatio ? outage_mrc(f, p_, mrc_) : outage_independent(f, p_);
  }

  InterferenceModel& model() { return model_; }
  const SystemParams& params() const { return p_; }

 private:
  SystemParams p_;
  InterferenceModel model_;
  CombiningPolicy policy_;
  MixtureMode mixture_;
  MrcOutageModel mrc_;
};

inline LoadPoint solve_offered_load(double lambda, const SystemParams& p, AnalyticOutage& outage,
                                    const SolverOptions& opt = {}) {
  return solve_offered_load(lambda, p, [&](double g) { return outage(g); }, opt);
}

}  // namespace gfra
