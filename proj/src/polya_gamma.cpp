#include "stlgm/polya_gamma.hpp"

#include <cmath>
#include <numbers>

namespace stlgm {
namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kTrunc = 0.64;
constexpr double kPi2Over8 = kPi * kPi / 8.0;

double log_normal_cdf(double x) { return std::log(0.5 * std::erfc(-x / std::numbers::sqrt2)); }

// n-th coefficient of the alternating series for the J*(1, z) density.
double series_term(int n, double x) {
  const double k = n + 0.5;
  if (x > kTrunc) return kPi * k * std::exp(-0.5 * k * k * kPi * kPi * x);
  return std::pow(2.0 / (kPi * x), 1.5) * kPi * k * std::exp(-2.0 * k * k / x);
}

// Probability of the exponential piece (x > t) in the proposal mixture.
double exponential_piece_mass(double z) {
  const double fz = kPi2Over8 + 0.5 * z * z;
  const double root_inv_t = std::sqrt(1.0 / kTrunc);
  const double b = root_inv_t * (kTrunc * z - 1.0);
  const double a = -root_inv_t * (kTrunc * z + 1.0);
  const double x0 = std::log(fz) + fz * kTrunc;
  const double xb = x0 - z + log_normal_cdf(b);
  const double xa = x0 + z + log_normal_cdf(a);
  const double q_over_p = 4.0 / kPi * (std::exp(xb) + std::exp(xa));
  return 1.0 / (1.0 + q_over_p);
}

double exponential_draw(Rng& rng) { return std::exponential_distribution<double>(1.0)(rng); }

// Inverse Gaussian IG(1/z, 1) truncated to (0, t).
double truncated_inverse_gaussian(double z, Rng& rng) {
  double x = kTrunc + 1.0;
  if (1.0 / z > kTrunc || z == 0.0) {
    double alpha = 0.0;
    double u = 1.0;
    while (u > alpha) {
      double e1 = exponential_draw(rng);
      double e2 = exponential_draw(rng);
      while (e1 * e1 > 2.0 * e2 / kTrunc) {
        e1 = exponential_draw(rng);
        e2 = exponential_draw(rng);
      }
      x = 1.0 + e1 * kTrunc;
      x = kTrunc / (x * x);
      alpha = std::exp(-0.5 * z * z * x);
      u = uniform01(rng);
    }
  } else {
    const double mu = 1.0 / z;
    while (x > kTrunc) {
      const double n = standard_normal(rng);
      const double y = n * n;
      const double muy = mu * y;
      x = mu + 0.5 * mu * muy - 0.5 * mu * std::sqrt(4.0 * muy + muy * muy);
      if (uniform01(rng) > mu / (mu + x)) x = mu * mu / x;
    }
  }
  return x;
}

}  // namespace

double sample_polya_gamma(double c, Rng& rng) {
  const double z = 0.5 * std::abs(c);
  const double k = kPi2Over8 + 0.5 * z * z;
  const double p_exp = exponential_piece_mass(z);
  for (;;) {
    double x;
    if (uniform01(rng) < p_exp) {
      x = kTrunc + exponential_draw(rng) / k;
    } else {
      x = truncated_inverse_gaussian(z, rng);
    }
    double s = series_term(0, x);
    const double y = uniform01(rng) * s;
    for (int n = 1;; ++n) {
      if (n % 2 == 1) {
        s -= series_term(n, x);
        if (y <= s) return 0.25 * x;
      } else {
        s += series_term(n, x);
        if (y > s) break;
      }
    }
  }
}

double polya_gamma_mean(double c) {
  const double a = std::abs(c);
  if (a < 1e-6) return 0.25 - a * a / 48.0;
  return std::tanh(0.5 * a) / (2.0 * a);
}

double polya_gamma_variance(double c) {
  const double a = std::abs(c);
  if (a < 1e-3) return 1.0 / 24.0 - a * a / 240.0;
  const double ch = std::cosh(0.5 * a);
  return (std::sinh(a) - a) / (4.0 * a * a * a * ch * ch);
}

}  // namespace stlgm
