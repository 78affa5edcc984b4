#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "stlgm/data_model.hpp"
#include "stlgm/samplers.hpp"

namespace stlgm {

/// Planar polygon set in km. Rings are combined with the even-odd rule, so
/// holes and multipolygons need no special casing.
struct Region {
  using Ring = std::vector<std::array<double, 2>>;
  std::vector<Ring> rings;

  bool contains(double x, double y) const;
  /// {min_x, min_y, max_x, max_y}
  std::array<double, 4> bounds() const;
  double area() const;

  static Region rectangle(double x0, double y0, double x1, double y1);
};

/// Accepts a GeoJSON Polygon, MultiPolygon, Feature, or FeatureCollection
/// whose coordinates are already in projected km.
Region parse_geojson_region(std::istream& in);
Region read_region(const std::filesystem::path& path);

/// Space lattice crossed with a list of years. Coordinates are year-major:
/// coords[y * cells() + c].
struct PredictionGrid {
  std::vector<std::array<double, 2>> cell_centers;
  std::vector<double> years;
  std::vector<SpaceTimeCoord> coords;
  double spacing = 1.0;
  double cell_area = 1.0;  // km^2
  std::vector<char> mask;  // one flag per cell

  std::size_t cells() const { return cell_centers.size(); }
  std::size_t index(std::size_t cell, std::size_t year) const { return year * cells() + cell; }
  std::size_t year_index(double year) const;
  std::size_t masked_cells() const;
};

/// Lattice anchored at the region's lower-left bound with cell centers at
/// min + (i + 0.5) spacing; a cell is kept when its center is inside the
/// region. Without a mask region every kept cell is masked in.
PredictionGrid make_grid(const Region& region, double spacing, std::vector<double> years,
                         const Region* mask_region = nullptr);

struct PredictOptions {
  std::size_t m = 25;
  std::uint64_t seed = 1;
  unsigned threads = 1;
  /// Add N(0, tau^2) observation noise to y predictions.
  bool include_noise = true;
};

/// Draws of the latent field at new points, one row per posterior draw that
/// carries w. `mean` and `var` are the conditional moments of alpha + w_P
/// given that draw; `field` is one sample of alpha + w_P.
struct LatentDraws {
  std::vector<std::size_t> posterior_rows;
  Eigen::MatrixXd mean;
  Eigen::MatrixXd var;
  Eigen::MatrixXd field;
};

LatentDraws predict_latent(const PosteriorSamples& posterior, std::span<const SpaceTimeCoord> points,
                           const PredictOptions& options);

/// y_P = alpha + w_P (+ noise), M x |P|.
Eigen::MatrixXd predict_y(const PosteriorSamples& posterior, std::span<const SpaceTimeCoord> points,
                          const PredictOptions& options);

struct ForestDraws {
  Eigen::MatrixXd prob;  // logit^-1(alpha + w_P)
  Eigen::MatrixXd z;     // Bernoulli(prob)
};

ForestDraws predict_z(const PosteriorSamples& posterior, std::span<const SpaceTimeCoord> points,
                      const PredictOptions& options);

/// y draws with noise added from the latent draws (seeded per draw).
Eigen::MatrixXd y_from_latent(const PosteriorSamples& posterior, const LatentDraws& latent,
                              bool include_noise, std::uint64_t seed);
ForestDraws z_from_latent(const LatentDraws& latent, std::uint64_t seed);

double logistic(double x);

/// b = g^-1(y) z elementwise; y and z draws are paired by row.
Eigen::MatrixXd compose_biomass(const Eigen::MatrixXd& y, const Eigen::MatrixXd& z,
                                const RootTransform& transform);

/// Per draw (rows) and year (columns): unweighted mean of b over masked cells.
Eigen::MatrixXd area_average_series(const Eigen::MatrixXd& b, const PredictionGrid& grid);

struct ChangeSummary {
  double t0 = 0.0;
  double t1 = 0.0;
  Eigen::VectorXd cell_expected;  // E[b(s, t1) - b(s, t0)] per cell
  Eigen::VectorXd area_draws;     // masked-mean change per draw
  double expected = 0.0;
  double prob_loss = 0.0;  // fraction of draws with area change < 0
};

ChangeSummary change_summary(const Eigen::MatrixXd& b, const PredictionGrid& grid, double t0,
                             double t1);

struct ColumnSummary {
  Eigen::VectorXd mean;
  Eigen::VectorXd sd;
  std::vector<double> probs;
  Eigen::MatrixXd quantiles;  // probs.size() x columns
};

/// Column summaries; quantiles interpolate linearly between order
/// statistics at position p (M - 1).
ColumnSummary summarize(const Eigen::MatrixXd& samples, const std::vector<double>& probs);

double quantile_sorted(std::span<const double> sorted, double p);

/// Column label for a quantile, e.g. 0.025 -> "q2.5".
std::string quantile_label(double p);

void write_grid_csv(std::ostream& out, const PredictionGrid& grid, const Eigen::MatrixXd& b,
                    const Eigen::MatrixXd& forest_prob, const std::vector<double>& probs);
void write_area_series_csv(std::ostream& out, const PredictionGrid& grid, const Eigen::MatrixXd& series,
                           const std::vector<double>& probs);
void write_change_csv(std::ostream& out, const PredictionGrid& grid, const ChangeSummary& change);
void write_change_area_csv(std::ostream& out, const ChangeSummary& change,
                           const std::vector<double>& probs);

}  // namespace stlgm
