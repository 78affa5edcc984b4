#include "stlgm/covariance.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "stlgm/error.hpp"

namespace stlgm {

double CovarianceParams::sill() const {
  double s = 0.0;
  for (const auto& c : components) s += c.sigma * c.sigma;
  return s;
}

bool CovarianceParams::valid() const {
  if (components.empty()) return false;
  for (const auto& c : components) {
    for (double v : {c.sigma, c.phi, c.lambda}) {
      if (!(v > 0.0) || !std::isfinite(v)) return false;
    }
  }
  return true;
}

void CovarianceParams::validate() const {
  if (components.empty()) throw ValidationError("covariance needs at least one component");
  for (std::size_t l = 0; l < components.size(); ++l) {
    const auto& c = components[l];
    for (double v : {c.sigma, c.phi, c.lambda}) {
      if (!(v > 0.0) || !std::isfinite(v)) {
        throw ValidationError("covariance component " + std::to_string(l + 1) +
                              " has a nonpositive or non-finite parameter");
      }
    }
  }
}

Eigen::VectorXd CovarianceParams::to_vector() const {
  Eigen::VectorXd v(3 * static_cast<Eigen::Index>(components.size()));
  for (std::size_t l = 0; l < components.size(); ++l) {
    v[3 * l] = components[l].sigma;
    v[3 * l + 1] = components[l].phi;
    v[3 * l + 2] = components[l].lambda;
  }
  return v;
}

CovarianceParams CovarianceParams::from_vector(const Eigen::VectorXd& v) {
  CovarianceParams p;
  for (Eigen::Index l = 0; l + 2 < v.size(); l += 3) {
    p.components.push_back({v[l], v[l + 1], v[l + 2]});
  }
  return p;
}

double exp_correlation(double delta, double range) {
  if (!(range > 0.0) || !std::isfinite(range)) {
    throw ValidationError("correlation range must be positive and finite");
  }
  if (delta < 0.0) throw ValidationError("lag must be nonnegative");
  return std::exp(-delta / range);
}

double cov_value(const CovarianceParams& theta, double ds, double dt) {
  theta.validate();
  if (ds < 0.0 || dt < 0.0) throw ValidationError("lags must be nonnegative");
  double k = 0.0;
  for (const auto& c : theta.components) {
    k += c.sigma * c.sigma * exp_correlation(ds, c.phi) * exp_correlation(dt, c.lambda);
  }
  return k;
}

double cov_value(const CovarianceParams& theta, const SpaceTimeCoord& a, const SpaceTimeCoord& b) {
  return cov_value(theta, spatial_distance(a, b), temporal_distance(a, b));
}

Eigen::MatrixXd cov_matrix(const CovarianceParams& theta, std::span<const SpaceTimeCoord> a,
                           std::span<const SpaceTimeCoord> b) {
  theta.validate();
  Eigen::MatrixXd k(static_cast<Eigen::Index>(a.size()), static_cast<Eigen::Index>(b.size()));
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < b.size(); ++j) {
      k(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          cov_value_unchecked(theta, spatial_distance(a[i], b[j]), temporal_distance(a[i], b[j]));
    }
  }
  return k;
}

GammaHyper gamma_hyper(const GammaPrior& prior) {
  if (!(prior.mean > 0.0) || !(prior.sd > 0.0) || !std::isfinite(prior.mean) ||
      !std::isfinite(prior.sd)) {
    throw ValidationError("gamma prior mean and sd must be positive");
  }
  const double var = prior.sd * prior.sd;
  return {prior.mean * prior.mean / var, prior.mean / var};
}

double gamma_log_pdf(double x, const GammaHyper& h) {
  if (!(x > 0.0) || !std::isfinite(x)) return -std::numeric_limits<double>::infinity();
  return h.shape * std::log(h.rate) - std::lgamma(h.shape) + (h.shape - 1.0) * std::log(x) -
         h.rate * x;
}

double normal_log_pdf(double x, double mean, double sd) {
  const double z = (x - mean) / sd;
  return -0.5 * z * z - std::log(sd) - 0.5 * std::log(2.0 * std::numbers::pi);
}

void PriorSpec::validate() const {
  if (components.empty()) throw ValidationError("priors: at least one covariance component required");
  for (const auto& c : components) {
    gamma_hyper(c.sigma);
    gamma_hyper(c.phi);
    gamma_hyper(c.lambda);
  }
  if (tau) gamma_hyper(*tau);
  if (!(alpha.sd > 0.0) || !std::isfinite(alpha.sd) || !std::isfinite(alpha.mean)) {
    throw ValidationError("priors: alpha needs finite mean and positive sd");
  }
  for (std::size_t l = 1; l < components.size(); ++l) {
    if (!(components[l - 1].phi.mean > components[l].phi.mean)) {
      throw ValidationError("priors: spatial-range prior means must decrease across components "
                            "(component 1 is the large-scale process)");
    }
  }
}

CovarianceParams PriorSpec::prior_mean_theta() const {
  CovarianceParams theta;
  for (const auto& c : components) theta.components.push_back({c.sigma.mean, c.phi.mean, c.lambda.mean});
  return theta;
}

double log_prior_theta_tau(const CovarianceParams& theta, std::optional<double> tau,
                           const PriorSpec& priors) {
  constexpr double kNegInf = -std::numeric_limits<double>::infinity();
  if (theta.size() != priors.components.size()) {
    throw ValidationError("priors and covariance parameters disagree on the number of components");
  }
  double lp = 0.0;
  for (std::size_t l = 0; l < theta.size(); ++l) {
    const auto& c = theta.components[l];
    const auto& p = priors.components[l];
    lp += gamma_log_pdf(c.sigma, gamma_hyper(p.sigma));
    lp += gamma_log_pdf(c.phi, gamma_hyper(p.phi));
    lp += gamma_log_pdf(c.lambda, gamma_hyper(p.lambda));
  }
  if (tau) {
    if (!priors.tau) throw ValidationError("tau supplied but the prior set has no tau prior");
    lp += gamma_log_pdf(*tau, gamma_hyper(*priors.tau));
  }
  return std::isnan(lp) ? kNegInf : lp;
}

double log_prior(const CovarianceParams& theta, std::optional<double> tau, double alpha,
                 const PriorSpec& priors) {
  const double lp = log_prior_theta_tau(theta, tau, priors);
  if (!std::isfinite(alpha)) return -std::numeric_limits<double>::infinity();
  return lp + normal_log_pdf(alpha, priors.alpha.mean, priors.alpha.sd);
}

double semivariogram_value(const CovarianceParams& theta, double ds, double dt) {
  double g = 0.0;
  for (const auto& c : theta.components) {
    // sigma^2 (1 - exp(-a)) computed with expm1 to keep small lags accurate
    g -= c.sigma * c.sigma * std::expm1(-ds / c.phi - dt / c.lambda);
  }
  return g;
}

std::vector<std::optional<double>> theoretical_semivariogram(
    const CovarianceParams& theta, const std::vector<std::vector<LagPair>>& pairs_per_bin) {
  theta.validate();
  std::vector<std::optional<double>> out(pairs_per_bin.size());
  for (std::size_t k = 0; k < pairs_per_bin.size(); ++k) {
    const auto& bin = pairs_per_bin[k];
    if (bin.empty()) continue;
    double sum = 0.0;
    for (const auto& p : bin) sum += semivariogram_value(theta, p.ds, p.dt);
    out[k] = sum / static_cast<double>(bin.size());
  }
  return out;
}

std::vector<std::optional<double>> normalize_by_max(const std::vector<std::optional<double>>& gamma) {
  double top = 0.0;
  for (const auto& g : gamma) {
    if (g) top = std::max(top, *g);
  }
  std::vector<std::optional<double>> out(gamma.size());
  for (std::size_t k = 0; k < gamma.size(); ++k) {
    if (gamma[k] && top > 0.0) out[k] = *gamma[k] / top;
  }
  return out;
}

}  // namespace stlgm
