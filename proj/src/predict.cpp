#include "stlgm/predict.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>

#include "json.hpp"

#include "stlgm/csv.hpp"
#include "stlgm/error.hpp"
#include "stlgm/nngp.hpp"
#include "stlgm/parallel.hpp"
#include "stlgm/rng.hpp"

namespace stlgm {

// ---- regions ----------------------------------------------------------------

namespace {

bool ring_contains(const Region::Ring& ring, double x, double y) {
  bool inside = false;
  const std::size_t n = ring.size();
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const auto& a = ring[i];
    const auto& b = ring[j];
    if ((a[1] > y) != (b[1] > y) && x < (b[0] - a[0]) * (y - a[1]) / (b[1] - a[1]) + a[0]) {
      inside = !inside;
    }
  }
  return inside;
}

}  // namespace

bool Region::contains(double x, double y) const {
  bool inside = false;
  for (const auto& ring : rings) inside ^= ring_contains(ring, x, y);
  return inside;
}

std::array<double, 4> Region::bounds() const {
  std::array<double, 4> b{HUGE_VAL, HUGE_VAL, -HUGE_VAL, -HUGE_VAL};
  for (const auto& ring : rings) {
    for (const auto& p : ring) {
      b[0] = std::min(b[0], p[0]);
      b[1] = std::min(b[1], p[1]);
      b[2] = std::max(b[2], p[0]);
      b[3] = std::max(b[3], p[1]);
    }
  }
  return b;
}

double Region::area() const {
  double total = 0.0;
  for (const auto& ring : rings) {
    double a = 0.0;
    for (std::size_t i = 0, j = ring.size() - 1; i < ring.size(); j = i++) {
      a += ring[j][0] * ring[i][1] - ring[i][0] * ring[j][1];
    }
    // rings nested an odd number of times are holes
    int depth = 0;
    for (const auto& other : rings) {
      if (&other != &ring && !ring.empty() && ring_contains(other, ring[0][0], ring[0][1])) ++depth;
    }
    total += (depth % 2 == 0 ? 1.0 : -1.0) * std::abs(a) / 2.0;
  }
  return total;
}

Region Region::rectangle(double x0, double y0, double x1, double y1) {
  return Region{{{{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}}}};
}

namespace {

using nlohmann::json;

Region::Ring parse_ring(const json& ring) {
  if (!ring.is_array()) throw ValidationError("GeoJSON ring must be an array of positions");
  Region::Ring out;
  for (const auto& pos : ring) {
    if (!pos.is_array() || pos.size() < 2 || !pos[0].is_number() || !pos[1].is_number()) {
      throw ValidationError("GeoJSON position must be [x, y]");
    }
    out.push_back({pos[0].get<double>(), pos[1].get<double>()});
  }
  if (out.size() >= 2 && out.front() == out.back()) out.pop_back();
  if (out.size() < 3) throw ValidationError("GeoJSON ring needs at least three distinct vertices");
  return out;
}

void collect(const json& node, Region& region) {
  if (!node.is_object() || !node.contains("type")) {
    throw ValidationError("GeoJSON object without a type");
  }
  const auto type = node["type"].get<std::string>();
  if (type == "FeatureCollection") {
    for (const auto& f : node.at("features")) collect(f, region);
  } else if (type == "Feature") {
    collect(node.at("geometry"), region);
  } else if (type == "Polygon") {
    for (const auto& ring : node.at("coordinates")) region.rings.push_back(parse_ring(ring));
  } else if (type == "MultiPolygon") {
    for (const auto& poly : node.at("coordinates")) {
      for (const auto& ring : poly) region.rings.push_back(parse_ring(ring));
    }
  } else {
    throw ValidationError("unsupported GeoJSON geometry type '" + type + "'");
  }
}

}  // namespace

Region parse_geojson_region(std::istream& in) {
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("invalid GeoJSON: ") + e.what());
  }
  Region region;
  try {
    collect(doc, region);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("invalid GeoJSON: ") + e.what());
  }
  if (region.rings.empty()) throw ValidationError("GeoJSON contains no polygon");
  if (!(region.area() > 0.0)) throw ValidationError("region polygon has zero area");
  return region;
}

Region read_region(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open region file " + path.string());
  return parse_geojson_region(in);
}

// ---- grid -------------------------------------------------------------------

std::size_t PredictionGrid::year_index(double year) const {
  for (std::size_t k = 0; k < years.size(); ++k) {
    if (years[k] == year) return k;
  }
  throw ValidationError("year " + csv::format_double(year) + " is not in the prediction grid");
}

std::size_t PredictionGrid::masked_cells() const {
  return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), 1));
}

PredictionGrid make_grid(const Region& region, double spacing, std::vector<double> years,
                         const Region* mask_region) {
  if (!(spacing > 0.0) || !std::isfinite(spacing)) throw ValidationError("grid spacing must be positive");
  if (years.empty()) throw ValidationError("grid needs at least one year");
  for (double y : years) {
    if (!std::isfinite(y)) throw ValidationError("grid years must be finite");
  }
  if (region.rings.empty() || !(region.area() > 0.0)) {
    throw ValidationError("grid region is empty or degenerate");
  }
  const auto b = region.bounds();
  const auto nx = static_cast<std::size_t>(std::ceil((b[2] - b[0]) / spacing));
  const auto ny = static_cast<std::size_t>(std::ceil((b[3] - b[1]) / spacing));
  PredictionGrid g;
  g.spacing = spacing;
  g.cell_area = spacing * spacing;
  g.years = std::move(years);
  for (std::size_t j = 0; j < ny; ++j) {
    const double cy = b[1] + (static_cast<double>(j) + 0.5) * spacing;
    for (std::size_t i = 0; i < nx; ++i) {
      const double cx = b[0] + (static_cast<double>(i) + 0.5) * spacing;
      if (!region.contains(cx, cy)) continue;
      g.cell_centers.push_back({cx, cy});
      g.mask.push_back(mask_region ? static_cast<char>(mask_region->contains(cx, cy)) : 1);
    }
  }
  if (g.cell_centers.empty()) {
    throw ValidationError("no grid cell center falls inside the region at spacing " +
                          csv::format_double(spacing));
  }
  for (double t : g.years) {
    for (const auto& c : g.cell_centers) g.coords.push_back({c[0], c[1], t});
  }
  return g;
}

// ---- latent prediction ------------------------------------------------------

LatentDraws predict_latent(const PosteriorSamples& posterior, std::span<const SpaceTimeCoord> points,
                           const PredictOptions& options) {
  if (posterior.w_rows.empty()) {
    throw ValidationError("posterior has no stored w draws; re-run the fit with w storage (mcmc.w_thin)");
  }
  const auto n = static_cast<Eigen::Index>(posterior.coords.size());
  if (posterior.w.cols() != n || posterior.w.rows() != static_cast<Eigen::Index>(posterior.w_rows.size())) {
    throw ValidationError("posterior w draws do not match its observation coordinates");
  }
  const auto neighbors = prediction_neighbors(posterior.coords, points, options.m);
  const std::size_t draws = posterior.w_rows.size();
  const auto p = static_cast<Eigen::Index>(points.size());
  LatentDraws out;
  out.posterior_rows = posterior.w_rows;
  out.mean.resize(static_cast<Eigen::Index>(draws), p);
  out.var.resize(static_cast<Eigen::Index>(draws), p);
  out.field.resize(static_cast<Eigen::Index>(draws), p);
  parallel_for(draws, options.threads, [&](std::size_t d) {
    const std::size_t row = posterior.w_rows[d];
    const auto proj = build_projection(posterior.coords, points, neighbors, posterior.theta(row));
    const Eigen::VectorXd w = posterior.w.row(static_cast<Eigen::Index>(d)).transpose();
    const Eigen::VectorXd mean = (proj.B * w).array() + posterior.alpha(row);
    Rng rng(stream_seed(options.seed, d));
    const auto r = static_cast<Eigen::Index>(d);
    for (Eigen::Index i = 0; i < p; ++i) {
      out.mean(r, i) = mean[i];
      out.var(r, i) = proj.F[i];
      out.field(r, i) = mean[i] + std::sqrt(proj.F[i]) * standard_normal(rng);
    }
  });
  return out;
}

Eigen::MatrixXd y_from_latent(const PosteriorSamples& posterior, const LatentDraws& latent,
                              bool include_noise, std::uint64_t seed) {
  Eigen::MatrixXd y = latent.field;
  if (!include_noise) return y;
  for (Eigen::Index d = 0; d < y.rows(); ++d) {
    const auto tau = posterior.tau(latent.posterior_rows[static_cast<std::size_t>(d)]);
    if (!tau) throw ValidationError("y prediction needs a normal-model posterior with tau");
    Rng rng(stream_seed(mix_seed(seed), static_cast<std::uint64_t>(d)));
    for (Eigen::Index i = 0; i < y.cols(); ++i) y(d, i) += *tau * standard_normal(rng);
  }
  return y;
}

double logistic(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

ForestDraws z_from_latent(const LatentDraws& latent, std::uint64_t seed) {
  ForestDraws out;
  out.prob = latent.field.unaryExpr([](double v) { return logistic(v); });
  out.z.resize(out.prob.rows(), out.prob.cols());
  for (Eigen::Index d = 0; d < out.prob.rows(); ++d) {
    Rng rng(stream_seed(mix_seed(seed), static_cast<std::uint64_t>(d)));
    for (Eigen::Index i = 0; i < out.prob.cols(); ++i) {
      out.z(d, i) = uniform01(rng) < out.prob(d, i) ? 1.0 : 0.0;
    }
  }
  return out;
}

Eigen::MatrixXd predict_y(const PosteriorSamples& posterior, std::span<const SpaceTimeCoord> points,
                          const PredictOptions& options) {
  if (posterior.kind != ModelKind::normal) throw ValidationError("predict_y needs the y-stage posterior");
  const auto latent = predict_latent(posterior, points, options);
  return y_from_latent(posterior, latent, options.include_noise, options.seed);
}

ForestDraws predict_z(const PosteriorSamples& posterior, std::span<const SpaceTimeCoord> points,
                      const PredictOptions& options) {
  if (posterior.kind != ModelKind::bernoulli) throw ValidationError("predict_z needs the z-stage posterior");
  return z_from_latent(predict_latent(posterior, points, options), options.seed);
}

// ---- composition and aggregation -------------------------------------------

Eigen::MatrixXd compose_biomass(const Eigen::MatrixXd& y, const Eigen::MatrixXd& z,
                                const RootTransform& transform) {
  if (y.rows() != z.rows() || y.cols() != z.cols()) {
    throw ValidationError("compose_biomass: y draws are " + std::to_string(y.rows()) + "x" +
                          std::to_string(y.cols()) + " but z draws are " + std::to_string(z.rows()) +
                          "x" + std::to_string(z.cols()));
  }
  Eigen::MatrixXd b(y.rows(), y.cols());
  for (Eigen::Index j = 0; j < y.cols(); ++j) {
    for (Eigen::Index i = 0; i < y.rows(); ++i) {
      b(i, j) = z(i, j) == 0.0 ? 0.0 : transform.inverse(y(i, j)) * z(i, j);
    }
  }
  return b;
}

Eigen::MatrixXd area_average_series(const Eigen::MatrixXd& b, const PredictionGrid& grid) {
  if (static_cast<std::size_t>(b.cols()) != grid.coords.size()) {
    throw ValidationError("area_average_series: draw columns do not match the grid");
  }
  const std::size_t masked = grid.masked_cells();
  if (masked == 0) throw ValidationError("area mask selects no grid cells");
  const auto years = static_cast<Eigen::Index>(grid.years.size());
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(b.rows(), years);
  for (Eigen::Index y = 0; y < years; ++y) {
    for (std::size_t c = 0; c < grid.cells(); ++c) {
      if (!grid.mask[c]) continue;
      out.col(y) += b.col(static_cast<Eigen::Index>(grid.index(c, static_cast<std::size_t>(y))));
    }
  }
  return out / static_cast<double>(masked);
}

ChangeSummary change_summary(const Eigen::MatrixXd& b, const PredictionGrid& grid, double t0,
                             double t1) {
  const std::size_t i0 = grid.year_index(t0);
  const std::size_t i1 = grid.year_index(t1);
  if (b.rows() == 0) throw ValidationError("change_summary needs at least one draw");
  ChangeSummary s;
  s.t0 = t0;
  s.t1 = t1;
  s.cell_expected.resize(static_cast<Eigen::Index>(grid.cells()));
  for (std::size_t c = 0; c < grid.cells(); ++c) {
    const auto a = static_cast<Eigen::Index>(grid.index(c, i0));
    const auto e = static_cast<Eigen::Index>(grid.index(c, i1));
    s.cell_expected[static_cast<Eigen::Index>(c)] = (b.col(e) - b.col(a)).mean();
  }
  const Eigen::MatrixXd series = area_average_series(b, grid);
  s.area_draws = series.col(static_cast<Eigen::Index>(i1)) - series.col(static_cast<Eigen::Index>(i0));
  s.expected = s.area_draws.mean();
  s.prob_loss = (s.area_draws.array() < 0.0).cast<double>().mean();
  return s;
}

// ---- summaries --------------------------------------------------------------

double quantile_sorted(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw ValidationError("quantile of an empty sample");
  if (!(p >= 0.0 && p <= 1.0)) throw ValidationError("quantile probability must lie in [0, 1]");
  const double pos = p * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

ColumnSummary summarize(const Eigen::MatrixXd& samples, const std::vector<double>& probs) {
  if (samples.rows() == 0) throw ValidationError("summarize needs at least one draw");
  ColumnSummary s;
  s.probs = probs;
  const auto cols = samples.cols();
  const auto m = samples.rows();
  s.mean = samples.colwise().mean().transpose();
  s.sd.resize(cols);
  s.quantiles.resize(static_cast<Eigen::Index>(probs.size()), cols);
  std::vector<double> col(static_cast<std::size_t>(m));
  for (Eigen::Index j = 0; j < cols; ++j) {
    double ss = 0.0;
    for (Eigen::Index i = 0; i < m; ++i) {
      const double d = samples(i, j) - s.mean[j];
      ss += d * d;
      col[static_cast<std::size_t>(i)] = samples(i, j);
    }
    s.sd[j] = m > 1 ? std::sqrt(ss / static_cast<double>(m - 1)) : 0.0;
    if (probs.empty()) continue;
    std::sort(col.begin(), col.end());
    for (std::size_t q = 0; q < probs.size(); ++q) {
      s.quantiles(static_cast<Eigen::Index>(q), j) = quantile_sorted(col, probs[q]);
    }
  }
  return s;
}

std::string quantile_label(double p) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "q%.10g", p * 100.0);
  return buf;
}

// ---- writers ----------------------------------------------------------------

void write_grid_csv(std::ostream& out, const PredictionGrid& grid, const Eigen::MatrixXd& b,
                    const Eigen::MatrixXd& forest_prob, const std::vector<double>& probs) {
  std::vector<std::string> header{"x_km", "y_km", "year", "mean_b", "sd_b"};
  for (double p : probs) header.push_back(quantile_label(p));
  header.push_back("prob_forest");
  csv::write_record(out, header);
  const auto s = summarize(b, probs);
  const Eigen::VectorXd pf = forest_prob.colwise().mean().transpose();
  for (std::size_t k = 0; k < grid.coords.size(); ++k) {
    const auto j = static_cast<Eigen::Index>(k);
    const auto& c = grid.coords[k];
    std::vector<std::string> row{csv::format_double(c.x), csv::format_double(c.y),
                                 csv::format_double(c.t), csv::format_double(s.mean[j]),
                                 csv::format_double(s.sd[j])};
    for (std::size_t q = 0; q < probs.size(); ++q) {
      row.push_back(csv::format_double(s.quantiles(static_cast<Eigen::Index>(q), j)));
    }
    row.push_back(csv::format_double(pf[j]));
    csv::write_record(out, row);
  }
}

void write_area_series_csv(std::ostream& out, const PredictionGrid& grid, const Eigen::MatrixXd& series,
                           const std::vector<double>& probs) {
  std::vector<std::string> header{"year", "mean"};
  for (double p : probs) header.push_back(quantile_label(p));
  csv::write_record(out, header);
  const auto s = summarize(series, probs);
  for (std::size_t y = 0; y < grid.years.size(); ++y) {
    const auto j = static_cast<Eigen::Index>(y);
    std::vector<std::string> row{csv::format_double(grid.years[y]), csv::format_double(s.mean[j])};
    for (std::size_t q = 0; q < probs.size(); ++q) {
      row.push_back(csv::format_double(s.quantiles(static_cast<Eigen::Index>(q), j)));
    }
    csv::write_record(out, row);
  }
}

void write_change_csv(std::ostream& out, const PredictionGrid& grid, const ChangeSummary& change) {
  csv::write_record(out, {"x_km", "y_km", "in_mask", "expected_change"});
  for (std::size_t c = 0; c < grid.cells(); ++c) {
    csv::write_record(out, {csv::format_double(grid.cell_centers[c][0]),
                            csv::format_double(grid.cell_centers[c][1]), grid.mask[c] ? "1" : "0",
                            csv::format_double(change.cell_expected[static_cast<Eigen::Index>(c)])});
  }
}

void write_change_area_csv(std::ostream& out, const ChangeSummary& change,
                           const std::vector<double>& probs) {
  std::vector<std::string> header{"t0", "t1", "expected_change"};
  for (double p : probs) header.push_back(quantile_label(p));
  header.push_back("prob_loss");
  csv::write_record(out, header);
  const auto s = summarize(change.area_draws, probs);
  std::vector<std::string> row{csv::format_double(change.t0), csv::format_double(change.t1),
                               csv::format_double(change.expected)};
  for (std::size_t q = 0; q < probs.size(); ++q) row.push_back(csv::format_double(s.quantiles(q, 0)));
  row.push_back(csv::format_double(change.prob_loss));
  csv::write_record(out, row);
}

}  // namespace stlgm
