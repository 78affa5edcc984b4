#include "stlgm/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <ostream>
#include <set>

#include <Eigen/Cholesky>

#include "stlgm/csv.hpp"
#include "stlgm/error.hpp"
#include "stlgm/nngp.hpp"
#include "stlgm/parallel.hpp"
#include "stlgm/predict.hpp"
#include "stlgm/rng.hpp"

namespace stlgm {

// ---- folds ------------------------------------------------------------------

std::size_t FoldAssignment::of(const std::string& plot_id) const {
  const auto it = fold.find(plot_id);
  if (it == fold.end()) throw ValidationError("plot '" + plot_id + "' has no fold");
  return it->second;
}

std::vector<std::size_t> FoldAssignment::sizes() const {
  std::vector<std::size_t> s(k, 0);
  for (const auto& [id, f] : fold) ++s[f - 1];
  return s;
}

FoldAssignment assign_folds(std::span<const std::string> plot_ids, std::size_t k, std::uint64_t seed) {
  if (k < 2) throw ValidationError("cv.k must be at least 2");
  const std::set<std::string> distinct(plot_ids.begin(), plot_ids.end());
  std::vector<std::string> ids(distinct.begin(), distinct.end());
  if (ids.size() < k) {
    throw ValidationError("cv.k = " + std::to_string(k) + " exceeds the " + std::to_string(ids.size()) +
                          " distinct plots");
  }
  Rng rng(seed);
  std::shuffle(ids.begin(), ids.end(), rng);
  FoldAssignment a;
  a.k = k;
  a.seed = seed;
  const std::size_t base = ids.size() / k;
  const std::size_t extra = ids.size() % k;
  std::size_t pos = 0;
  for (std::size_t f = 0; f < k; ++f) {
    const std::size_t size = base + (f < extra ? 1 : 0);
    for (std::size_t j = 0; j < size; ++j) a.fold[ids[pos++]] = f + 1;
  }
  return a;
}

// ---- metrics ------------------------------------------------------------------

namespace {

void check_lengths(std::span<const double> a, std::span<const double> b, const char* what) {
  if (a.size() != b.size()) {
    throw ValidationError(std::string(what) + ": predicted and true lengths differ (" +
                          std::to_string(a.size()) + " vs " + std::to_string(b.size()) + ")");
  }
  if (a.empty()) throw ValidationError(std::string(what) + ": no observations");
}

double log_mean_exp(const std::vector<double>& v) {
  const double mx = *std::max_element(v.begin(), v.end());
  if (!std::isfinite(mx)) return mx;
  double s = 0.0;
  for (double x : v) s += std::exp(x - mx);
  return mx + std::log(s / static_cast<double>(v.size()));
}

constexpr double kProbClamp = 1e-12;

}  // namespace

double mse(std::span<const double> predicted, std::span<const double> truth) {
  check_lengths(predicted, truth, "mse");
  double s = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) s += (predicted[i] - truth[i]) * (predicted[i] - truth[i]);
  return s / static_cast<double>(truth.size());
}

double r_squared(std::span<const double> predicted, std::span<const double> truth) {
  check_lengths(predicted, truth, "r_squared");
  if (truth.size() < 2) throw ValidationError("r_squared needs at least two observations");
  double mean = 0.0;
  for (double t : truth) mean += t;
  mean /= static_cast<double>(truth.size());
  double ss_tot = 0.0, ss_res = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    ss_tot += (truth[i] - mean) * (truth[i] - mean);
    ss_res += (predicted[i] - truth[i]) * (predicted[i] - truth[i]);
  }
  if (ss_tot == 0.0) throw ValidationError("r_squared is undefined: the true values have zero variance");
  return 1.0 - ss_res / ss_tot;
}

Eigen::VectorXd log_predictive_y(const Eigen::MatrixXd& mean, const Eigen::MatrixXd& sd,
                                 const Eigen::VectorXd& truth) {
  if (mean.rows() == 0) throw ValidationError("mlpd_y needs at least one draw");
  if (mean.rows() != sd.rows() || mean.cols() != sd.cols() || mean.cols() != truth.size()) {
    throw ValidationError("mlpd_y: draw matrices and truth do not conform");
  }
  const double half_log_2pi = 0.5 * std::log(2.0 * std::numbers::pi);
  Eigen::VectorXd out(truth.size());
  std::vector<double> terms(static_cast<std::size_t>(mean.rows()));
  for (Eigen::Index i = 0; i < truth.size(); ++i) {
    for (Eigen::Index m = 0; m < mean.rows(); ++m) {
      const double s = sd(m, i);
      const double z = (truth[i] - mean(m, i)) / s;
      terms[static_cast<std::size_t>(m)] = -half_log_2pi - std::log(s) - 0.5 * z * z;
    }
    out[i] = log_mean_exp(terms);
  }
  return out;
}

double mlpd_y(const Eigen::MatrixXd& mean, const Eigen::MatrixXd& sd, const Eigen::VectorXd& truth) {
  return log_predictive_y(mean, sd, truth).mean();
}

Eigen::VectorXd log_predictive_z(const Eigen::MatrixXd& prob, const Eigen::VectorXd& z) {
  if (prob.rows() == 0) throw ValidationError("mlpd_z needs at least one draw");
  if (prob.cols() != z.size()) throw ValidationError("mlpd_z: draw matrix and truth do not conform");
  Eigen::VectorXd out(z.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    double s = 0.0;
    for (Eigen::Index m = 0; m < prob.rows(); ++m) {
      const double p = std::clamp(prob(m, i), kProbClamp, 1.0 - kProbClamp);
      s += z[i] != 0.0 ? p : 1.0 - p;
    }
    out[i] = std::log(s / static_cast<double>(prob.rows()));
  }
  return out;
}

double mlpd_z(const Eigen::MatrixXd& prob, const Eigen::VectorXd& z) {
  return log_predictive_z(prob, z).mean();
}

double coverage95(const Eigen::MatrixXd& draws, const Eigen::VectorXd& truth) {
  if (static_cast<std::size_t>(draws.rows()) < kCoverageMinDraws) {
    throw ValidationError("coverage95 needs at least " + std::to_string(kCoverageMinDraws) +
                          " draws per point, got " + std::to_string(draws.rows()));
  }
  if (draws.cols() != truth.size() || truth.size() == 0) {
    throw ValidationError("coverage95: draw matrix and truth do not conform");
  }
  const auto s = summarize(draws, {0.025, 0.975});
  std::size_t hit = 0;
  for (Eigen::Index i = 0; i < truth.size(); ++i) {
    hit += truth[i] >= s.quantiles(0, i) && truth[i] <= s.quantiles(1, i);
  }
  return static_cast<double>(hit) / static_cast<double>(truth.size());
}

// ---- cross-validation ---------------------------------------------------------

namespace {

struct FoldResult {
  std::vector<std::size_t> rows;  // indices into the measurement list
  Eigen::MatrixXd b;              // M x held
  Eigen::MatrixXd prob;           // M x held
  Eigen::MatrixXd y;              // M x held (with noise when configured)
  Eigen::VectorXd lpd_y;          // held, NaN for non-forest
  Eigen::VectorXd lpd_z;
  std::vector<std::string> warnings;
};

FoldResult run_fold(std::span<const PlotMeasurement> measurements, const FoldAssignment& folds,
                    std::size_t fold, const PriorSpec& priors_y, const PriorSpec& priors_z,
                    const CvConfig& config) {
  std::vector<PlotMeasurement> train;
  FoldResult r;
  std::vector<SpaceTimeCoord> held;
  for (std::size_t i = 0; i < measurements.size(); ++i) {
    if (folds.of(measurements[i].plot_id) == fold) {
      r.rows.push_back(i);
      held.push_back(measurements[i].coord);
    } else {
      train.push_back(measurements[i]);
    }
  }
  const std::string where = "fold " + std::to_string(fold);
  const auto sets = split_observations(train, config.transform);
  const double ones = sets.binary.values.sum();
  if (ones == 0.0 || ones == static_cast<double>(sets.binary.size())) {
    throw ValidationError(where + ": the training split contains only one forest class");
  }
  if (sets.continuous.size() < 2) {
    throw ValidationError(where + ": the training split has fewer than 2 forested measurements");
  }

  auto mcmc_y = config.mcmc_y;
  auto mcmc_z = config.mcmc_z;
  mcmc_y.seed = stream_seed(config.seed, 4 * fold);
  mcmc_z.seed = stream_seed(config.seed, 4 * fold + 1);
  PosteriorSamples post_y, post_z;
  try {
    post_y = run_gibbs_normal(sets.continuous, priors_y, mcmc_y);
    post_z = run_gibbs_bernoulli(sets.binary, priors_z, mcmc_z);
  } catch (const NumericalError& e) {
    throw NumericalError(where + ": " + e.what());
  }
  for (const auto& w : post_y.meta.warnings) r.warnings.push_back(where + " (y): " + w);
  for (const auto& w : post_z.meta.warnings) r.warnings.push_back(where + " (z): " + w);

  PredictOptions opt_y{mcmc_y.m, stream_seed(config.seed, 4 * fold + 2), 1, config.include_noise};
  PredictOptions opt_z{mcmc_z.m, stream_seed(config.seed, 4 * fold + 3), 1, false};
  const auto latent_y = predict_latent(post_y, held, opt_y);
  const auto latent_z = predict_latent(post_z, held, opt_z);
  const Eigen::MatrixXd y_all = y_from_latent(post_y, latent_y, config.include_noise, opt_y.seed);
  const auto forest = z_from_latent(latent_z, opt_z.seed);
  const Eigen::Index m = std::min(y_all.rows(), forest.z.rows());
  r.y = y_all.topRows(m);
  r.prob = forest.prob.topRows(m);
  r.b = compose_biomass(r.y, forest.z.topRows(m), config.transform);

  const auto h = static_cast<Eigen::Index>(held.size());
  Eigen::VectorXd z_true(h);
  for (Eigen::Index i = 0; i < h; ++i) z_true[i] = measurements[r.rows[static_cast<std::size_t>(i)]].agbd > 0.0;
  r.lpd_z = log_predictive_z(r.prob, z_true);

  Eigen::MatrixXd sd(latent_y.var.rows(), h);
  for (Eigen::Index d = 0; d < sd.rows(); ++d) {
    const double tau = config.include_noise ? *post_y.tau(latent_y.posterior_rows[static_cast<std::size_t>(d)]) : 0.0;
    for (Eigen::Index i = 0; i < h; ++i) {
      sd(d, i) = std::sqrt(std::max(latent_y.var(d, i) + tau * tau, 1e-300));
    }
  }
  Eigen::VectorXd y_true(h);
  for (Eigen::Index i = 0; i < h; ++i) {
    const double agbd = measurements[r.rows[static_cast<std::size_t>(i)]].agbd;
    y_true[i] = agbd > 0.0 ? config.transform.forward(agbd) : 0.0;
  }
  r.lpd_y = log_predictive_y(latent_y.mean, sd, y_true);
  for (Eigen::Index i = 0; i < h; ++i) {
    if (z_true[i] == 0.0) r.lpd_y[i] = std::numeric_limits<double>::quiet_NaN();
  }
  return r;
}

}  // namespace

CvReport run_cross_validation(std::span<const PlotMeasurement> measurements, const PriorSpec& priors_y,
                              const PriorSpec& priors_z, const CvConfig& config) {
  config.mcmc_y.validate();
  config.mcmc_z.validate();
  priors_y.validate();
  priors_z.validate();
  for (double p : config.probs) {
    if (!(p >= 0.0 && p <= 1.0)) throw ValidationError("quantile probabilities must lie in [0, 1]");
  }
  std::vector<std::string> ids;
  ids.reserve(measurements.size());
  for (const auto& m : measurements) ids.push_back(m.plot_id);
  const auto folds = assign_folds(ids, config.k, config.seed);

  std::vector<FoldResult> results(config.k);
  parallel_for(config.k, config.threads, [&](std::size_t f) {
    results[f] = run_fold(measurements, folds, f + 1, priors_y, priors_z, config);
  });

  CvReport rep;
  rep.k = config.k;
  rep.seed = config.seed;
  rep.probs = config.probs;
  rep.records.resize(measurements.size());
  rep.draws = std::numeric_limits<std::size_t>::max();
  std::vector<double> pred, truth, lpd_y, lpd_z;
  std::size_t covered = 0;
  for (std::size_t f = 0; f < config.k; ++f) {
    const auto& r = results[f];
    rep.warnings.insert(rep.warnings.end(), r.warnings.begin(), r.warnings.end());
    rep.draws = std::min(rep.draws, static_cast<std::size_t>(r.b.rows()));
    if (static_cast<std::size_t>(r.y.rows()) < kCoverageMinDraws) {
      throw ValidationError("fold " + std::to_string(f + 1) + " produced " + std::to_string(r.y.rows()) +
                            " predictive draws; coverage needs at least " +
                            std::to_string(kCoverageMinDraws) + " (raise iterations or lower w_thin)");
    }
    const auto sb = summarize(r.b, config.probs);
    const auto sy = summarize(r.y, {0.025, 0.975});
    const Eigen::VectorXd pf = r.prob.colwise().mean().transpose();
    for (std::size_t j = 0; j < r.rows.size(); ++j) {
      const auto c = static_cast<Eigen::Index>(j);
      const auto& meas = measurements[r.rows[j]];
      auto& rec = rep.records[r.rows[j]];
      rec.plot_id = meas.plot_id;
      rec.coord = meas.coord;
      rec.fold = f + 1;
      rec.agbd = meas.agbd;
      rec.mean_b = sb.mean[c];
      rec.sd_b = sb.sd[c];
      for (std::size_t q = 0; q < config.probs.size(); ++q) {
        rec.b_quantiles.push_back(sb.quantiles(static_cast<Eigen::Index>(q), c));
      }
      rec.prob_forest = pf[c];
      rec.lpd_z = r.lpd_z[c];
      rec.forested = meas.agbd > 0.0;
      if (rec.forested) {
        rec.y_true = config.transform.forward(meas.agbd);
        rec.y_lo = sy.quantiles(0, c);
        rec.y_hi = sy.quantiles(1, c);
        rec.lpd_y = r.lpd_y[c];
      }
    }
  }
  for (const auto& rec : rep.records) {
    pred.push_back(rec.mean_b);
    truth.push_back(rec.agbd);
    lpd_z.push_back(rec.lpd_z);
    if (rec.forested) {
      lpd_y.push_back(rec.lpd_y);
      covered += rec.y_true >= rec.y_lo && rec.y_true <= rec.y_hi;
    }
  }
  rep.n = measurements.size();
  rep.n_forested = lpd_y.size();
  rep.mse = mse(pred, truth);
  double mean_b = 0.0;
  for (double t : truth) mean_b += t;
  rep.mean_b = mean_b / static_cast<double>(truth.size());
  try {
    rep.r2 = r_squared(pred, truth);
  } catch (const ValidationError& e) {
    rep.r2 = std::numeric_limits<double>::quiet_NaN();
    rep.warnings.push_back(e.what());
  }
  auto mean_of = [](const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? std::numeric_limits<double>::quiet_NaN() : s / static_cast<double>(v.size());
  };
  rep.mlpd_y = mean_of(lpd_y);
  rep.mlpd_z = mean_of(lpd_z);
  rep.coverage95 = lpd_y.empty() ? std::numeric_limits<double>::quiet_NaN()
                                 : static_cast<double>(covered) / static_cast<double>(lpd_y.size());
  return rep;
}

void write_cv_records_csv(std::ostream& out, const CvReport& report) {
  std::vector<std::string> header{"plot_id", "x_km", "y_km", "year", "fold", "agbd_mg_ha", "mean_b", "sd_b"};
  for (double p : report.probs) header.push_back(quantile_label(p));
  for (const char* h : {"prob_forest", "lpd_z", "y_true", "y_q2.5", "y_q97.5", "lpd_y"}) header.push_back(h);
  csv::write_record(out, header);
  for (const auto& r : report.records) {
    std::vector<std::string> row{csv::quote_if_needed(r.plot_id), csv::format_double(r.coord.x),
                                 csv::format_double(r.coord.y), csv::format_double(r.coord.t),
                                 std::to_string(r.fold), csv::format_double(r.agbd),
                                 csv::format_double(r.mean_b), csv::format_double(r.sd_b)};
    for (double q : r.b_quantiles) row.push_back(csv::format_double(q));
    row.push_back(csv::format_double(r.prob_forest));
    row.push_back(csv::format_double(r.lpd_z));
    if (r.forested) {
      for (double v : {r.y_true, r.y_lo, r.y_hi, r.lpd_y}) row.push_back(csv::format_double(v));
    } else {
      row.insert(row.end(), 4, "");
    }
    csv::write_record(out, row);
  }
}

void write_cv_metrics_csv(std::ostream& out, const CvReport& report) {
  csv::write_record(out, {"metric", "value"});
  const std::vector<std::pair<std::string, double>> rows{
      {"mse", report.mse},
      {"r2", report.r2},
      {"mlpd_y", report.mlpd_y},
      {"mlpd_z", report.mlpd_z},
      {"coverage95", report.coverage95},
      {"n", static_cast<double>(report.n)},
      {"n_forested", static_cast<double>(report.n_forested)},
      {"mean_b", report.mean_b},
      {"k", static_cast<double>(report.k)},
      {"seed", static_cast<double>(report.seed)},
      {"draws", static_cast<double>(report.draws)}};
  for (const auto& [k, v] : rows) csv::write_record(out, {k, csv::format_double(v)});
}

void write_cv_summary(std::ostream& out, const CvReport& report) {
  out << "cross-validation: " << report.k << " plot-blocked folds, seed " << report.seed << "\n";
  out << "measurements: " << report.n << " (forested " << report.n_forested << "), predictive draws "
      << report.draws << "\n";
  out << "mean AGBD: " << csv::format_fixed(report.mean_b, 6) << " Mg/ha\n";
  out << "MSE: " << csv::format_fixed(report.mse, 6) << " (Mg/ha)^2\n";
  out << "R^2: " << csv::format_fixed(report.r2, 6) << "\n";
  out << "MLPD y: " << csv::format_fixed(report.mlpd_y, 6) << " nats\n";
  out << "MLPD z: " << csv::format_fixed(report.mlpd_z, 6) << " nats\n";
  out << "95% interval coverage (y): " << csv::format_fixed(report.coverage95, 6) << "\n";
  for (const auto& w : report.warnings) out << "warning: " << w << "\n";
}

// ---- semivariogram ------------------------------------------------------------

void LagBins::validate() const {
  auto check = [](const std::vector<double>& e, const char* axis) {
    if (e.size() < 2) throw ValidationError(std::string(axis) + " bin edges need at least two values");
    for (std::size_t i = 0; i < e.size(); ++i) {
      if (!std::isfinite(e[i]) || e[i] < 0.0) {
        throw ValidationError(std::string(axis) + " bin edges must be finite and nonnegative");
      }
      if (i > 0 && !(e[i] > e[i - 1])) {
        throw ValidationError(std::string(axis) + " bin edges must be strictly ascending");
      }
    }
  };
  check(space_edges, "spatial");
  check(time_edges, "temporal");
}

namespace {

std::optional<std::size_t> locate_edge(const std::vector<double>& e, double v) {
  if (v < e.front() || v > e.back()) return std::nullopt;
  if (v == e.back()) return e.size() - 2;
  const auto it = std::upper_bound(e.begin(), e.end(), v);
  return static_cast<std::size_t>(it - e.begin()) - 1;
}

}  // namespace

std::optional<std::size_t> LagBins::locate(double ds, double dt) const {
  const auto i = locate_edge(space_edges, ds);
  if (!i) return std::nullopt;
  const auto j = locate_edge(time_edges, dt);
  if (!j) return std::nullopt;
  return *i * time_bins() + *j;
}

LagBins default_lag_bins(std::span<const SpaceTimeCoord> coords, std::size_t space_bins,
                         std::size_t time_bins) {
  if (coords.size() < 2) throw ValidationError("variogram needs at least 2 observations");
  if (space_bins < 1 || time_bins < 1) throw ValidationError("variogram needs at least one bin per axis");
  double x0 = HUGE_VAL, x1 = -HUGE_VAL, y0 = HUGE_VAL, y1 = -HUGE_VAL, t0 = HUGE_VAL, t1 = -HUGE_VAL;
  for (const auto& c : coords) {
    x0 = std::min(x0, c.x), x1 = std::max(x1, c.x);
    y0 = std::min(y0, c.y), y1 = std::max(y1, c.y);
    t0 = std::min(t0, c.t), t1 = std::max(t1, c.t);
  }
  const double smax = std::max(std::hypot(x1 - x0, y1 - y0), 1e-9);
  const double tmax = std::max(t1 - t0, 1e-9);
  LagBins b;
  for (std::size_t i = 0; i <= space_bins; ++i) b.space_edges.push_back(smax * static_cast<double>(i) / static_cast<double>(space_bins));
  for (std::size_t i = 0; i <= time_bins; ++i) b.time_edges.push_back(tmax * static_cast<double>(i) / static_cast<double>(time_bins));
  return b;
}

std::vector<VariogramBin> empirical_semivariogram(std::span<const SpaceTimeCoord> coords,
                                                  const Eigen::VectorXd& values, const LagBins& bins,
                                                  const VariogramOptions& options) {
  bins.validate();
  const std::size_t n = coords.size();
  if (n < 2) throw ValidationError("variogram needs at least 2 observations");
  if (static_cast<std::size_t>(values.size()) != n) {
    throw ValidationError("variogram: values and coordinates differ in length");
  }
  if (options.theta) options.theta->validate();
  const std::size_t nb = bins.size();
  struct Acc {
    std::vector<double> sq, ds, dt, theo;
    std::vector<std::size_t> count;
  };
  // Fixed interleaved blocks keep the floating-point reduction order
  // independent of the worker count.
  constexpr std::size_t kBlocks = 64;
  std::vector<Acc> acc(kBlocks);
  const double nugget = options.tau * options.tau;
  parallel_for(kBlocks, options.threads, [&](std::size_t blk) {
    Acc& a = acc[blk];
    a.sq.assign(nb, 0.0);
    a.ds.assign(nb, 0.0);
    a.dt.assign(nb, 0.0);
    a.theo.assign(nb, 0.0);
    a.count.assign(nb, 0);
    for (std::size_t i = blk; i < n; i += kBlocks) {
      for (std::size_t j = i + 1; j < n; ++j) {
        const double ds = spatial_distance(coords[i], coords[j]);
        if (options.space_cutoff && ds > *options.space_cutoff) continue;
        const double dt = temporal_distance(coords[i], coords[j]);
        const auto k = bins.locate(ds, dt);
        if (!k) continue;
        const double d = values[static_cast<Eigen::Index>(i)] - values[static_cast<Eigen::Index>(j)];
        a.sq[*k] += d * d;
        a.ds[*k] += ds;
        a.dt[*k] += dt;
        a.count[*k] += 1;
        if (options.theta) {
          const bool same = ds == 0.0 && dt == 0.0;
          a.theo[*k] += semivariogram_value(*options.theta, ds, dt) + (same ? 0.0 : nugget);
        }
      }
    }
  });
  std::vector<VariogramBin> out(nb);
  for (std::size_t si = 0; si < bins.space_bins(); ++si) {
    for (std::size_t ti = 0; ti < bins.time_bins(); ++ti) {
      auto& b = out[si * bins.time_bins() + ti];
      b.ds_lo = bins.space_edges[si];
      b.ds_hi = bins.space_edges[si + 1];
      b.dt_lo = bins.time_edges[ti];
      b.dt_hi = bins.time_edges[ti + 1];
    }
  }
  for (std::size_t k = 0; k < nb; ++k) {
    double sq = 0.0, ds = 0.0, dt = 0.0, theo = 0.0;
    std::size_t count = 0;
    for (const auto& a : acc) {
      if (a.count.empty()) continue;
      sq += a.sq[k];
      ds += a.ds[k];
      dt += a.dt[k];
      theo += a.theo[k];
      count += a.count[k];
    }
    auto& b = out[k];
    b.pairs = count;
    if (count == 0) continue;
    const double c = static_cast<double>(count);
    b.gamma = sq / (2.0 * c);
    b.mean_ds = ds / c;
    b.mean_dt = dt / c;
    if (options.theta) b.theoretical = theo / c;
  }
  return out;
}

std::vector<VariogramBin> normalize_variogram(std::vector<VariogramBin> bins) {
  std::vector<std::optional<double>> g, t;
  for (const auto& b : bins) {
    g.push_back(b.gamma);
    t.push_back(b.theoretical);
  }
  const bool any_theo = std::any_of(t.begin(), t.end(), [](const auto& v) { return v.has_value(); });
  const bool any_emp = std::any_of(g.begin(), g.end(), [](const auto& v) { return v.has_value(); });
  if (any_emp) g = normalize_by_max(g);
  if (any_theo) t = normalize_by_max(t);
  for (std::size_t k = 0; k < bins.size(); ++k) {
    bins[k].gamma = g[k];
    bins[k].theoretical = t[k];
  }
  return bins;
}

void write_variogram_csv(std::ostream& out, const std::vector<VariogramBin>& bins) {
  csv::write_record(out, {"ds_lo", "ds_hi", "dt_lo", "dt_hi", "pairs", "mean_ds", "mean_dt", "gamma",
                          "theoretical", "empty"});
  auto opt = [](const std::optional<double>& v) { return v ? csv::format_double(*v) : std::string(); };
  for (const auto& b : bins) {
    csv::write_record(out, {csv::format_double(b.ds_lo), csv::format_double(b.ds_hi),
                            csv::format_double(b.dt_lo), csv::format_double(b.dt_hi),
                            std::to_string(b.pairs), b.pairs ? csv::format_double(b.mean_ds) : "",
                            b.pairs ? csv::format_double(b.mean_dt) : "", opt(b.gamma), opt(b.theoretical),
                            b.pairs ? "0" : "1"});
  }
}

// ---- design-based comparator --------------------------------------------------

HtEstimate horvitz_thompson(std::span<const PlotMeasurement> measurements, const CycleBounds& cycle) {
  if (!(cycle.end > cycle.start)) {
    throw ValidationError("cycle '" + cycle.label + "' must have end > start");
  }
  HtEstimate e;
  e.cycle = cycle;
  double sum = 0.0, years = 0.0;
  std::vector<double> v;
  for (const auto& m : measurements) {
    if (m.coord.t < cycle.start || m.coord.t >= cycle.end) continue;
    v.push_back(m.agbd);
    sum += m.agbd;
    years += m.coord.t;
  }
  e.n = v.size();
  if (e.n == 0) throw ValidationError("cycle '" + cycle.label + "' contains no measurements");
  e.mean = sum / static_cast<double>(e.n);
  e.mean_year = years / static_cast<double>(e.n);
  if (e.n >= 2) {
    double ss = 0.0;
    for (double x : v) ss += (x - e.mean) * (x - e.mean);
    e.se = std::sqrt(ss / static_cast<double>(e.n - 1)) / std::sqrt(static_cast<double>(e.n));
  }
  return e;
}

void write_ht_csv(std::ostream& out, const std::vector<HtEstimate>& estimates) {
  csv::write_record(out, {"cycle", "start", "end", "mean", "se", "n", "mean_year"});
  for (const auto& e : estimates) {
    csv::write_record(out, {csv::quote_if_needed(e.cycle.label), csv::format_double(e.cycle.start),
                            csv::format_double(e.cycle.end), csv::format_double(e.mean),
                            e.se ? csv::format_double(*e.se) : "", std::to_string(e.n),
                            csv::format_double(e.mean_year)});
  }
}

// ---- synthetic data -----------------------------------------------------------

Eigen::VectorXd simulate_field(std::span<const SpaceTimeCoord> coords, const CovarianceParams& theta,
                               std::size_t nngp_m, Rng& rng) {
  theta.validate();
  const auto n = static_cast<Eigen::Index>(coords.size());
  Eigen::VectorXd eps(n);
  for (Eigen::Index i = 0; i < n; ++i) eps[i] = standard_normal(rng);
  if (nngp_m == 0) {
    if (coords.size() > kDenseSimulationLimit) {
      throw ValidationError("dense simulation is limited to " + std::to_string(kDenseSimulationLimit) +
                            " points (got " + std::to_string(coords.size()) +
                            "); set simulate.nngp_neighbors for approximate NNGP simulation");
    }
    Eigen::MatrixXd k = cov_matrix(theta, coords, coords);
    Eigen::LLT<Eigen::MatrixXd> llt(k);
    if (llt.info() != Eigen::Success) {
      k.diagonal().array() += kJitterFraction * theta.sill();
      llt.compute(k);
      if (llt.info() != Eigen::Success) throw NumericalError("simulation covariance is not positive definite");
    }
    return llt.matrixL() * eps;
  }
  const auto graph = build_graph(coords, nngp_m);
  const auto f = vecchia_factors(graph, theta);
  Eigen::VectorXd w(n);
  for (std::size_t i = 0; i < graph.size(); ++i) {
    double mean = 0.0;
    const auto& nb = graph.neighbors[i];
    for (std::size_t a = 0; a < nb.size(); ++a) mean += f.weights[i][a] * w[static_cast<Eigen::Index>(nb[a])];
    const auto ii = static_cast<Eigen::Index>(i);
    w[ii] = mean + std::sqrt(f.cond_var[ii]) * eps[ii];
  }
  return graph.to_original(w);
}

SyntheticData simulate_synthetic(const SimulationSpec& spec) {
  const auto& lay = spec.layout;
  if (lay.n_plots < 1) throw ValidationError("simulate: n_plots must be at least 1");
  if (!(lay.width > 0.0 && lay.height > 0.0)) throw ValidationError("simulate: domain must have positive size");
  if (lay.visit_offsets.empty()) throw ValidationError("simulate: at least one visit per plot");
  if (!(lay.panel_years > 0.0)) throw ValidationError("simulate: panel_years must be positive");
  if (!(spec.tau >= 0.0)) throw ValidationError("simulate: tau must be nonnegative");
  spec.theta_y.validate();
  if (!spec.force_forest) spec.theta_z.validate();

  Rng rng(spec.seed);
  std::uniform_real_distribution<double> ux(0.0, lay.width), uy(0.0, lay.height), u01(0.0, 1.0);
  std::vector<std::array<double, 2>> centers;
  for (std::size_t c = 0; c < lay.clusters; ++c) centers.push_back({ux(rng), uy(rng)});
  SyntheticData out;
  std::vector<SpaceTimeCoord> coords;
  const int digits = static_cast<int>(std::to_string(lay.n_plots).size());
  for (std::size_t p = 0; p < lay.n_plots; ++p) {
    double x, y;
    if (centers.empty()) {
      x = ux(rng);
      y = uy(rng);
    } else {
      const auto& c = centers[static_cast<std::size_t>(u01(rng) * static_cast<double>(centers.size())) % centers.size()];
      x = c[0] + lay.cluster_sd * standard_normal(rng);
      y = c[1] + lay.cluster_sd * standard_normal(rng);
    }
    const double first = lay.first_year + u01(rng) * lay.panel_years;
    std::string id = std::to_string(p + 1);
    id = "P" + std::string(static_cast<std::size_t>(digits) - id.size(), '0') + id;
    for (double off : lay.visit_offsets) {
      const SpaceTimeCoord c{x, y, first + off};
      coords.push_back(c);
      out.measurements.push_back({id, c, 0.0});
    }
  }
  out.w_y = simulate_field(coords, spec.theta_y, spec.nngp_m, rng);
  const auto n = static_cast<Eigen::Index>(coords.size());
  if (spec.force_forest) {
    out.w_z = Eigen::VectorXd::Zero(n);
  } else {
    out.w_z = simulate_field(coords, spec.theta_z, spec.nngp_m, rng);
  }
  out.y.resize(n);
  out.z.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    out.z[i] = spec.force_forest ? 1.0 : (u01(rng) < logistic(spec.alpha_z + out.w_z[i]) ? 1.0 : 0.0);
    out.y[i] = spec.alpha_y + out.w_y[i] + spec.tau * standard_normal(rng);
    out.measurements[static_cast<std::size_t>(i)].agbd = spec.transform.inverse(out.y[i]) * out.z[i];
  }
  return out;
}

}  // namespace stlgm
