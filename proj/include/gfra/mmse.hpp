#pragma once

#include <cmath>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "gfra/error.hpp"

namespace gfra {

// MMSE replica-combining weights for Y_i = X + Omega_i. Solves
// [sx2 * 1 1^T + diag(si2)] w = sx2 * 1 with a pivoted LU.
inline std::vector<double> mmse_weights(double signal_power, std::span<const double> noise_powers) {
  const auto n = static_cast<Eigen::Index>(noise_powers.size());
  if (n == 0) throw DegenerateInput("no branches to combine");
  if (!(signal_power > 0.0)) throw DegenerateInput("signal power must be positive");
  Eigen::MatrixXd a = Eigen::MatrixXd::Constant(n, n, signal_power);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double s = noise_powers[static_cast<std::size_t>(i)];
    if (!(s > 0.0) || !std::isfinite(s)) throw DegenerateInput("branch noise powers must be positive and finite");
    a(i, i) += s;
  }
  const Eigen::VectorXd rhs = Eigen::VectorXd::Constant(n, signal_power);
  const Eigen::VectorXd w = a.fullPivLu().solve(rhs);
  if (!w.allFinite()) throw DegenerateInput("combining system is singular");
  return {w.data(), w.data() + n};
}

// Relative residual ||A w - b|| / ||b|| of the combining system.
inline double mmse_residual(double signal_power, std::span<const double> noise_powers, std::span<const double> w) {
  const std::size_t n = noise_powers.size();
  double sum_w = 0.0;
  for (double x : w) sum_w += x;
  double r2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double row = signal_power * sum_w + noise_powers[i] * w[i] - signal_power;
    r2 += row * row;
  }
  return std::sqrt(r2) / (signal_power * std::sqrt(static_cast<double>(n)));
}

// Post-combining SINR (sum w)^2 sx2 / sum w_i^2 si2.
inline double combined_sinr(double signal_power, std::span<const double> noise_powers, std::span<const double> w) {
  double sum_w = 0.0, noise = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    sum_w += w[i];
    noise += w[i] * w[i] * noise_powers[i];
  }
  return sum_w * sum_w * signal_power / noise;
}

}  // namespace gfra
