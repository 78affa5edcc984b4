#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "stlgm/data_model.hpp"

namespace stlgm {

/// One separable exponential component: sigma^2 exp(-ds/phi) exp(-dt/lambda).
struct CovarianceComponent {
  double sigma = 1.0;   // standard deviation of the component field
  double phi = 1.0;     // spatial range, km
  double lambda = 1.0;  // temporal range, years

  friend bool operator==(const CovarianceComponent&, const CovarianceComponent&) = default;
};

/// Sum-of-separables covariance parameters. Component 0 is by convention the
/// large-scale process; nothing enforces that except the priors.
struct CovarianceParams {
  std::vector<CovarianceComponent> components;

  std::size_t size() const noexcept { return components.size(); }
  /// K(0,0) = sum of sigma^2.
  double sill() const;
  bool valid() const;
  /// Throws ValidationError unless every entry is finite and positive.
  void validate() const;

  /// Flattened (sigma, phi, lambda) per component.
  Eigen::VectorXd to_vector() const;
  static CovarianceParams from_vector(const Eigen::VectorXd& v);

  friend bool operator==(const CovarianceParams&, const CovarianceParams&) = default;
};

double exp_correlation(double delta, double range);

/// Covariance at spatial lag ds (km) and temporal lag dt (years).
/// No validation; callers hold validated parameters.
inline double cov_value_unchecked(const CovarianceParams& theta, double ds, double dt) {
  double k = 0.0;
  for (const auto& c : theta.components) {
    k += c.sigma * c.sigma * std::exp(-ds / c.phi - dt / c.lambda);
  }
  return k;
}

double cov_value(const CovarianceParams& theta, double ds, double dt);
double cov_value(const CovarianceParams& theta, const SpaceTimeCoord& a, const SpaceTimeCoord& b);

Eigen::MatrixXd cov_matrix(const CovarianceParams& theta, std::span<const SpaceTimeCoord> a,
                           std::span<const SpaceTimeCoord> b);

/// Diagonal jitter used when a dense covariance system is singular.
constexpr double kJitterFraction = 1e-8;

// ---- priors ---------------------------------------------------------------

/// Gamma prior given by its mean and standard deviation.
struct GammaPrior {
  double mean = 1.0;
  double sd = 1.0;
  friend bool operator==(const GammaPrior&, const GammaPrior&) = default;
};

struct GammaHyper {
  double shape = 1.0;
  double rate = 1.0;
};

/// shape = mean^2 / sd^2, rate = mean / sd^2.
GammaHyper gamma_hyper(const GammaPrior& prior);

double gamma_log_pdf(double x, const GammaHyper& h);

struct NormalPrior {
  double mean = 0.0;
  double sd = 1.0;
  double precision() const { return 1.0 / (sd * sd); }
  friend bool operator==(const NormalPrior&, const NormalPrior&) = default;
};

double normal_log_pdf(double x, double mean, double sd);

struct ComponentPriors {
  GammaPrior sigma;
  GammaPrior phi;
  GammaPrior lambda;
  friend bool operator==(const ComponentPriors&, const ComponentPriors&) = default;
};

/// Priors for one model stage. `tau` is present only for the normal model.
struct PriorSpec {
  std::vector<ComponentPriors> components;
  std::optional<GammaPrior> tau;
  NormalPrior alpha;

  /// Throws ValidationError on nonpositive hyperparameters or when the
  /// spatial-range prior means are not strictly decreasing across components.
  void validate() const;
  /// Covariance parameters at the prior means.
  CovarianceParams prior_mean_theta() const;

  friend bool operator==(const PriorSpec&, const PriorSpec&) = default;
};

/// Sum of gamma log densities for theta (and tau when given) plus the normal
/// log density of alpha. Returns -infinity outside the support.
double log_prior(const CovarianceParams& theta, std::optional<double> tau, double alpha,
                 const PriorSpec& priors);

/// Same, without the alpha term (for the Metropolis block).
double log_prior_theta_tau(const CovarianceParams& theta, std::optional<double> tau,
                           const PriorSpec& priors);

// ---- semivariogram --------------------------------------------------------

struct LagPair {
  double ds = 0.0;
  double dt = 0.0;
};

/// K(0,0) - K(ds, dt).
double semivariogram_value(const CovarianceParams& theta, double ds, double dt);

/// Binned theoretical semivariogram; empty bins come back as nullopt.
std::vector<std::optional<double>> theoretical_semivariogram(
    const CovarianceParams& theta, const std::vector<std::vector<LagPair>>& pairs_per_bin);

/// Divides every present bin by the largest present bin value.
std::vector<std::optional<double>> normalize_by_max(const std::vector<std::optional<double>>& gamma);

}  // namespace stlgm
