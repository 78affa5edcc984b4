#include "stlgm/data_model.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <utility>

#include "stlgm/csv.hpp"
#include "stlgm/error.hpp"

namespace stlgm {
namespace {

bool is_leap(int year) {
  return (year % 4 == 0 && year % 100 != 0) || year % 400 == 0;
}

int days_in_month(int year, int month) {
  static constexpr int kDays[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
  if (month == 2 && is_leap(year)) return 29;
  return kDays[month - 1];
}

bool parse_int(std::string_view text, int& out) {
  if (text.empty()) return false;
  auto res = std::from_chars(text.data(), text.data() + text.size(), out);
  return res.ec == std::errc() && res.ptr == text.data() + text.size();
}

std::string trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return std::string(s);
}

}  // namespace

CalendarDate parse_iso_date(std::string_view text) {
  const std::string s = trim(text);
  CalendarDate date;
  if (s.size() != 10 || s[4] != '-' || s[7] != '-' ||
      !parse_int(std::string_view(s).substr(0, 4), date.year) ||
      !parse_int(std::string_view(s).substr(5, 2), date.month) ||
      !parse_int(std::string_view(s).substr(8, 2), date.day)) {
    throw ValidationError("invalid date '" + s + "': expected YYYY-MM-DD");
  }
  if (date.month < 1 || date.month > 12 || date.day < 1 ||
      date.day > days_in_month(date.year, date.month)) {
    throw ValidationError("invalid date '" + s + "': no such calendar day");
  }
  return date;
}

double to_decimal_year(const CalendarDate& date) {
  if (date.month < 1 || date.month > 12 || date.day < 1 ||
      date.day > days_in_month(date.year, date.month)) {
    throw ValidationError("invalid calendar date");
  }
  int day_of_year = date.day;
  for (int m = 1; m < date.month; ++m) day_of_year += days_in_month(date.year, m);
  return date.year + day_of_year / 365.25;
}

RootTransform::RootTransform(int root) : root_(root) {
  if (root < 1) throw ValidationError("transform root must be a positive integer");
}

double RootTransform::forward(double agbd) const {
  if (!(agbd >= 0.0) || !std::isfinite(agbd)) {
    throw ValidationError("root transform needs a finite nonnegative argument");
  }
  if (root_ == 1) return agbd;
  if (root_ == 2) return std::sqrt(agbd);
  if (root_ == 3) return std::cbrt(agbd);
  return std::pow(agbd, 1.0 / root_);
}

double RootTransform::inverse(double y) const {
  const double v = std::max(y, 0.0);
  double out = 1.0;
  for (int k = 0; k < root_; ++k) out *= v;
  return out;
}

double inverse_transform(double y, const RootTransform& transform) {
  return transform.inverse(y);
}

std::vector<PlotMeasurement> parse_plot_table(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("plot table is empty: header required");
  auto header = csv::split_record(line);
  std::map<std::string, std::size_t> column;
  for (std::size_t i = 0; i < header.size(); ++i) column[trim(header[i])] = i;

  std::vector<std::string> missing;
  for (const char* name : {"plot_id", "x_km", "y_km", "agbd_mg_ha"}) {
    if (!column.count(name)) missing.emplace_back(name);
  }
  const bool has_year = column.count("year") > 0;
  const bool has_date = column.count("date") > 0;
  if (!has_year && !has_date) missing.emplace_back("year|date");
  if (!missing.empty()) {
    std::string msg = "plot table schema error: missing column(s)";
    for (const auto& m : missing) msg += " " + m;
    throw ValidationError(msg);
  }

  std::vector<PlotMeasurement> rows;
  std::set<std::pair<std::string, double>> seen;
  std::map<std::string, std::pair<double, double>> plot_location;
  std::size_t row_index = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    ++row_index;
    const auto fields = csv::split_record(line);
    auto fail = [&](const std::string& what) {
      throw ValidationError("plot table row " + std::to_string(row_index) + ": " + what);
    };
    if (fields.size() < header.size()) fail("expected " + std::to_string(header.size()) + " fields");
    auto number = [&](const char* name) {
      double v = 0.0;
      if (!csv::parse_double(fields[column.at(name)], v) || !std::isfinite(v)) {
        fail(std::string("non-finite or unparsable ") + name + " '" + fields[column.at(name)] + "'");
      }
      return v;
    };
    PlotMeasurement m;
    m.plot_id = trim(fields[column.at("plot_id")]);
    if (m.plot_id.empty()) fail("empty plot_id");
    m.coord.x = number("x_km");
    m.coord.y = number("y_km");
    if (has_year) {
      m.coord.t = number("year");
    } else {
      try {
        m.coord.t = to_decimal_year(parse_iso_date(fields[column.at("date")]));
      } catch (const ValidationError& e) {
        fail(e.what());
      }
    }
    m.agbd = number("agbd_mg_ha");
    if (m.agbd < 0.0) fail("negative agbd_mg_ha");

    if (!seen.emplace(m.plot_id, m.coord.t).second) {
      fail("duplicate measurement of plot '" + m.plot_id + "' at the same time");
    }
    auto [it, inserted] = plot_location.emplace(m.plot_id, std::make_pair(m.coord.x, m.coord.y));
    if (!inserted && (it->second.first != m.coord.x || it->second.second != m.coord.y)) {
      fail("plot '" + m.plot_id + "' changes location between visits");
    }
    rows.push_back(std::move(m));
  }
  return rows;
}

std::vector<PlotMeasurement> read_plot_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open plot table " + path.string());
  return parse_plot_table(in);
}

void write_plot_table(std::ostream& out, std::span<const PlotMeasurement> rows) {
  out << "plot_id,x_km,y_km,year,agbd_mg_ha\n";
  for (const auto& r : rows) {
    csv::write_record(out, {csv::quote_if_needed(r.plot_id), csv::format_double(r.coord.x),
                            csv::format_double(r.coord.y), csv::format_double(r.coord.t),
                            csv::format_double(r.agbd)});
  }
}

ObservationSets split_observations(std::span<const PlotMeasurement> measurements,
                                   const RootTransform& transform) {
  ObservationSets sets;
  const std::size_t n = measurements.size();
  sets.binary.coords.reserve(n);
  sets.binary.values.resize(static_cast<Eigen::Index>(n));
  std::vector<double> y;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& m = measurements[i];
    if (!(m.agbd >= 0.0) || !std::isfinite(m.agbd)) {
      throw ValidationError("measurement " + std::to_string(i) + " has invalid agbd");
    }
    const bool forested = m.agbd > 0.0;
    sets.binary.coords.push_back(m.coord);
    sets.binary.values[static_cast<Eigen::Index>(i)] = forested ? 1.0 : 0.0;
    if (forested) {
      sets.continuous.coords.push_back(m.coord);
      y.push_back(transform.forward(m.agbd));
      sets.forested_rows.push_back(i);
    }
  }
  sets.continuous.values = Eigen::Map<Eigen::VectorXd>(y.data(), static_cast<Eigen::Index>(y.size()));
  return sets;
}

void write_observation_sets(std::ostream& out, const ObservationSets& sets) {
  out << "stage,x_km,y_km,year,value\n";
  auto dump = [&](const char* stage, const ObservedField& f) {
    for (std::size_t i = 0; i < f.size(); ++i) {
      csv::write_record(out, {stage, csv::format_double(f.coords[i].x), csv::format_double(f.coords[i].y),
                              csv::format_double(f.coords[i].t),
                              csv::format_double(f.values[static_cast<Eigen::Index>(i)])});
    }
  };
  dump("z", sets.binary);
  dump("y", sets.continuous);
}

}  // namespace stlgm
