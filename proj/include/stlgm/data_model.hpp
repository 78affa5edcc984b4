#pragma once

#include <cmath>
#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace stlgm {

/// A point in projected planar space (km) and time (decimal years).
struct SpaceTimeCoord {
  double x = 0.0;
  double y = 0.0;
  double t = 0.0;

  friend bool operator==(const SpaceTimeCoord&, const SpaceTimeCoord&) = default;
};

inline double spatial_distance(const SpaceTimeCoord& a, const SpaceTimeCoord& b) {
  return std::hypot(a.x - b.x, a.y - b.y);
}

inline double temporal_distance(const SpaceTimeCoord& a, const SpaceTimeCoord& b) {
  return std::abs(a.t - b.t);
}

/// One plot visit.
struct PlotMeasurement {
  std::string plot_id;
  SpaceTimeCoord coord;
  double agbd = 0.0;  // Mg/ha
};

struct CalendarDate {
  int year = 0;
  int month = 0;
  int day = 0;
};

/// Parses YYYY-MM-DD; throws ValidationError on malformed or impossible dates.
CalendarDate parse_iso_date(std::string_view text);

/// year + day_of_year / 365.25 with January 1 as day 1.
double to_decimal_year(const CalendarDate& date);

/// Root transform g(b) = b^(1/r) with the clamped inverse max(y, 0)^r.
class RootTransform {
 public:
  explicit RootTransform(int root = 1);

  int root() const noexcept { return root_; }
  double forward(double agbd) const;
  double inverse(double y) const;

  friend bool operator==(const RootTransform&, const RootTransform&) = default;

 private:
  int root_;
};

/// Coordinates paired with one value per coordinate.
struct ObservedField {
  std::vector<SpaceTimeCoord> coords;
  Eigen::VectorXd values;

  std::size_t size() const noexcept { return coords.size(); }
};

/// Binary forest indicator over all measurements and the transformed
/// biomass over the forested subset. `forested_rows[k]` is the binary-set
/// row of continuous entry k.
struct ObservationSets {
  ObservedField binary;
  ObservedField continuous;
  std::vector<std::size_t> forested_rows;
};

/// Reads a comma-delimited plot table with header columns plot_id, x_km,
/// y_km, agbd_mg_ha and one of year (decimal) or date (ISO-8601).
std::vector<PlotMeasurement> parse_plot_table(std::istream& in);
std::vector<PlotMeasurement> read_plot_table(const std::filesystem::path& path);

/// Writes the table in the same schema parse_plot_table reads (year column).
void write_plot_table(std::ostream& out, std::span<const PlotMeasurement> rows);

ObservationSets split_observations(std::span<const PlotMeasurement> measurements,
                                   const RootTransform& transform);

double inverse_transform(double y, const RootTransform& transform);

/// Audit dump: stage,x_km,y_km,year,value rows for both sets.
void write_observation_sets(std::ostream& out, const ObservationSets& sets);

}  // namespace stlgm
