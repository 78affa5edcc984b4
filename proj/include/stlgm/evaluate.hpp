#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "stlgm/covariance.hpp"
#include "stlgm/data_model.hpp"
#include "stlgm/samplers.hpp"

namespace stlgm {

// ---- folds ------------------------------------------------------------------

struct FoldAssignment {
  std::map<std::string, std::size_t> fold;  // plot_id -> 1..k
  std::size_t k = 0;
  std::uint64_t seed = 0;

  std::size_t of(const std::string& plot_id) const;
  std::vector<std::size_t> sizes() const;
};

/// Shuffles the distinct plot ids and deals them into k folds whose sizes
/// differ by at most one (the first n mod k folds get the extra plot).
FoldAssignment assign_folds(std::span<const std::string> plot_ids, std::size_t k, std::uint64_t seed);

// ---- metrics ------------------------------------------------------------------

double mse(std::span<const double> predicted, std::span<const double> truth);

/// 1 - n MSE / sum (b_i - mean b)^2. Throws when the truth has no variance.
double r_squared(std::span<const double> predicted, std::span<const double> truth);

/// Per point: log (1/M) sum_m N(y_i | mean(m, i), sd(m, i)^2).
Eigen::VectorXd log_predictive_y(const Eigen::MatrixXd& mean, const Eigen::MatrixXd& sd,
                                 const Eigen::VectorXd& truth);
double mlpd_y(const Eigen::MatrixXd& mean, const Eigen::MatrixXd& sd, const Eigen::VectorXd& truth);

/// Per point: log (1/M) sum_m [p z + (1 - p)(1 - z)], p clamped to
/// [1e-12, 1 - 1e-12].
Eigen::VectorXd log_predictive_z(const Eigen::MatrixXd& prob, const Eigen::VectorXd& z);
double mlpd_z(const Eigen::MatrixXd& prob, const Eigen::VectorXd& z);

/// Needs at least this many draws per point.
constexpr std::size_t kCoverageMinDraws = 40;

/// Fraction of points whose truth lies in the [2.5%, 97.5%] draw quantiles.
double coverage95(const Eigen::MatrixXd& draws, const Eigen::VectorXd& truth);

// ---- cross-validation ---------------------------------------------------------

struct CvConfig {
  McmcConfig mcmc_y;
  McmcConfig mcmc_z;
  std::size_t k = 10;
  std::uint64_t seed = 1;
  RootTransform transform{3};
  std::vector<double> probs{0.025, 0.975};
  /// Folds run concurrently on up to this many workers.
  unsigned threads = 1;
  bool include_noise = true;
};

struct CvRecord {
  std::string plot_id;
  SpaceTimeCoord coord;
  std::size_t fold = 0;
  double agbd = 0.0;
  double mean_b = 0.0;
  double sd_b = 0.0;
  std::vector<double> b_quantiles;
  double prob_forest = 0.0;
  double lpd_z = 0.0;
  bool forested = false;
  // Forested measurements only:
  double y_true = 0.0;
  double y_lo = 0.0;
  double y_hi = 0.0;
  double lpd_y = 0.0;
};

struct CvReport {
  double mse = 0.0;
  double r2 = 0.0;
  double mlpd_y = 0.0;
  double mlpd_z = 0.0;
  double coverage95 = 0.0;
  std::size_t n = 0;
  std::size_t n_forested = 0;
  double mean_b = 0.0;
  std::size_t k = 0;
  std::uint64_t seed = 0;
  std::size_t draws = 0;
  std::vector<double> probs;
  std::vector<CvRecord> records;  // input order
  std::vector<std::string> warnings;
};

/// Plot-blocked k-fold CV of the two-stage model. Every measurement is
/// predicted exactly once from a fit that excluded its plot.
CvReport run_cross_validation(std::span<const PlotMeasurement> measurements, const PriorSpec& priors_y,
                              const PriorSpec& priors_z, const CvConfig& config);

void write_cv_records_csv(std::ostream& out, const CvReport& report);
void write_cv_metrics_csv(std::ostream& out, const CvReport& report);
void write_cv_summary(std::ostream& out, const CvReport& report);

// ---- semivariogram ------------------------------------------------------------

/// Rectangular bins; spatial and temporal edges ascending. A lag lands in
/// [lo, hi), with the last edge of each axis inclusive.
struct LagBins {
  std::vector<double> space_edges;
  std::vector<double> time_edges;

  void validate() const;
  std::size_t space_bins() const { return space_edges.size() - 1; }
  std::size_t time_bins() const { return time_edges.size() - 1; }
  std::size_t size() const { return space_bins() * time_bins(); }
  /// Flat bin index (space-major) or nullopt when outside every bin.
  std::optional<std::size_t> locate(double ds, double dt) const;
};

/// Evenly spaced edges from zero to the largest spatial and temporal lag.
LagBins default_lag_bins(std::span<const SpaceTimeCoord> coords, std::size_t space_bins = 10,
                         std::size_t time_bins = 5);

struct VariogramBin {
  double ds_lo = 0.0, ds_hi = 0.0, dt_lo = 0.0, dt_hi = 0.0;
  std::size_t pairs = 0;
  double mean_ds = 0.0;
  double mean_dt = 0.0;
  std::optional<double> gamma;
  std::optional<double> theoretical;
};

struct VariogramOptions {
  std::optional<double> space_cutoff;
  /// When set, each bin also carries the pair-averaged theoretical value.
  std::optional<CovarianceParams> theta;
  /// Observation noise sd added as a nugget to the theoretical curve.
  double tau = 0.0;
  unsigned threads = 1;
};

/// gamma(B) = 1 / (2 |B|) sum over pairs i < j in B of (y_i - y_j)^2.
std::vector<VariogramBin> empirical_semivariogram(std::span<const SpaceTimeCoord> coords,
                                                  const Eigen::VectorXd& values, const LagBins& bins,
                                                  const VariogramOptions& options = {});

/// Divides both curves by their largest present bin value.
std::vector<VariogramBin> normalize_variogram(std::vector<VariogramBin> bins);

void write_variogram_csv(std::ostream& out, const std::vector<VariogramBin>& bins);

// ---- design-based comparator --------------------------------------------------

struct CycleBounds {
  std::string label;
  double start = 0.0;  // inclusive
  double end = 0.0;    // exclusive
  friend bool operator==(const CycleBounds&, const CycleBounds&) = default;
};

struct HtEstimate {
  CycleBounds cycle;
  double mean = 0.0;
  std::optional<double> se;  // absent when n < 2
  std::size_t n = 0;
  double mean_year = 0.0;
};

/// Sample mean and sd / sqrt(n) of the measurements whose year lies in the
/// cycle, under equal inclusion probabilities.
HtEstimate horvitz_thompson(std::span<const PlotMeasurement> measurements, const CycleBounds& cycle);

void write_ht_csv(std::ostream& out, const std::vector<HtEstimate>& estimates);

// ---- synthetic data -----------------------------------------------------------

struct PlotLayout {
  std::size_t n_plots = 100;
  double width = 100.0;   // km
  double height = 100.0;  // km
  double first_year = 2001.0;
  /// First visits are spread uniformly over this many years.
  double panel_years = 10.0;
  /// Offsets of every visit from the first one, in years.
  std::vector<double> visit_offsets{0.0, 10.0};
  /// When positive, plots scatter around this many uniform cluster centers.
  std::size_t clusters = 0;
  double cluster_sd = 2.0;  // km
  friend bool operator==(const PlotLayout&, const PlotLayout&) = default;
};

struct SimulationSpec {
  double alpha_y = 5.0;
  CovarianceParams theta_y;
  double tau = 0.1;
  double alpha_z = 2.0;
  CovarianceParams theta_z;
  bool force_forest = false;
  PlotLayout layout;
  RootTransform transform{3};
  std::uint64_t seed = 1;
  /// 0 selects exact dense simulation; otherwise NNGP simulation with this
  /// many neighbors.
  std::size_t nngp_m = 0;
  friend bool operator==(const SimulationSpec&, const SimulationSpec&) = default;
};

constexpr std::size_t kDenseSimulationLimit = 3000;

struct SyntheticData {
  std::vector<PlotMeasurement> measurements;
  Eigen::VectorXd w_y;
  Eigen::VectorXd w_z;
  Eigen::VectorXd y;
  Eigen::VectorXd z;
};

SyntheticData simulate_synthetic(const SimulationSpec& spec);

/// One zero-mean field draw at the given coordinates (dense or NNGP).
Eigen::VectorXd simulate_field(std::span<const SpaceTimeCoord> coords, const CovarianceParams& theta,
                               std::size_t nngp_m, Rng& rng);

}  // namespace stlgm
