#include "stlgm/cli.hpp"

#include <algorithm>
#include <chrono>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "toml.hpp"

#include "stlgm/csv.hpp"
#include "stlgm/data_model.hpp"
#include "stlgm/error.hpp"
#include "stlgm/evaluate.hpp"
#include "stlgm/parallel.hpp"
#include "stlgm/predict.hpp"
#include "stlgm/rng.hpp"

#ifndef STLGM_VERSION
#define STLGM_VERSION "unknown"
#endif

namespace stlgm {
namespace {

namespace fs = std::filesystem;

struct Invocation {
  Command command = Command::fit;
  std::string name;
  fs::path config_path;
  unsigned threads = 0;
  fs::path out_dir = "runs";
  std::optional<Stage> stage;
  fs::path y_run;
  fs::path z_run;
};

// Collects outputs, warnings, and extra manifest fields for one command.
class Run {
 public:
  Run(const Invocation& inv, const RunConfig& config, std::ostream& err)
      : inv_(inv), config_(config), err_(err), start_(std::chrono::steady_clock::now()) {
    const std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    std::ostringstream stamp;
    stamp << std::put_time(&tm, "%Y%m%dT%H%M%SZ");
    started_ = stamp.str();
    std::string leaf = inv.name;
    if (inv.stage) leaf += "-" + std::string(stage_name(*inv.stage));
    leaf += "-" + config_hash(config).substr(0, 12) + "-" + started_;
    dir_ = inv.out_dir / leaf;
    for (int k = 2; fs::exists(dir_); ++k) dir_ = inv.out_dir / (leaf + "-" + std::to_string(k));
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec) throw IoError("cannot create run directory " + dir_.string() + ": " + ec.message());
  }

  const fs::path& dir() const { return dir_; }

  std::ofstream open(const std::string& name, bool binary = false) {
    std::ofstream f(dir_ / name, binary ? std::ios::binary : std::ios::out);
    if (!f) throw IoError("cannot write " + (dir_ / name).string());
    outputs_.push_back(name);
    return f;
  }

  void warn(const std::string& message) {
    err_ << "warning: " << message << "\n";
    warnings_.push_back(message);
  }

  toml::table& extra() { return extra_; }

  void write_manifest(std::uint64_t seed) {
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    toml::array outputs, warnings;
    for (const auto& o : outputs_) outputs.push_back(o);
    for (const auto& w : warnings_) warnings.push_back(w);
    toml::table run{{"command", inv_.name},
                    {"version", std::string(build_version())},
                    {"seed", static_cast<std::int64_t>(seed)},
                    {"threads", static_cast<std::int64_t>(inv_.threads)},
                    {"started_utc", started_},
                    {"wall_time_s", wall},
                    {"config_path", fs::absolute(inv_.config_path).lexically_normal().string()},
                    {"config_hash", config_hash(config_)},
                    {"outputs", std::move(outputs)},
                    {"warnings", std::move(warnings)}};
    if (inv_.stage) run.insert("stage", std::string(stage_name(*inv_.stage)));
    for (auto&& [k, v] : extra_) run.insert(k, v);
    toml::table doc{{"run", std::move(run)}, {"config", toml::parse(to_toml(config_))}};
    std::ofstream f(dir_ / "manifest.toml");
    if (!f) throw IoError("cannot write manifest");
    f << doc << "\n";
  }

 private:
  const Invocation& inv_;
  const RunConfig& config_;
  std::ostream& err_;
  std::chrono::steady_clock::time_point start_;
  std::string started_;
  fs::path dir_;
  std::vector<std::string> outputs_;
  std::vector<std::string> warnings_;
  toml::table extra_;
};

std::vector<PlotMeasurement> load_data(const RunConfig& config) {
  return read_plot_table(config.data);
}

ObservedField stage_field(const RunConfig& config, Stage stage) {
  const auto data = load_data(config);
  auto sets = split_observations(data, config.transform());
  return stage == Stage::y ? std::move(sets.continuous) : std::move(sets.binary);
}

void cmd_fit(const Invocation& inv, const RunConfig& config, Run& run) {
  const Stage stage = *inv.stage;
  const auto field = stage_field(config, stage);
  const auto& priors = config.priors(stage);
  std::vector<PosteriorSamples> chains(config.chains);
  parallel_for(config.chains, inv.threads, [&](std::size_t c) {
    McmcConfig mc = config.mcmc(stage);
    if (c > 0) mc.seed = stream_seed(mc.seed, c);
    chains[c] = stage == Stage::y ? run_gibbs_normal(field, priors, mc) : run_gibbs_bernoulli(field, priors, mc);
  });
  toml::array meta;
  for (std::size_t c = 0; c < chains.size(); ++c) {
    const auto& s = chains[c];
    {
      auto f = run.open(posterior_file(stage, c));
      write_posterior_csv(f, s);
    }
    {
      auto f = run.open(w_draw_file(stage, c), true);
      write_w_draws(f, s);
    }
    for (const auto& w : s.meta.warnings) run.warn("chain " + std::to_string(c + 1) + ": " + w);
    meta.push_back(toml::table{{"chain", static_cast<std::int64_t>(c + 1)},
                               {"seed", static_cast<std::int64_t>(s.meta.config.seed)},
                               {"draws", static_cast<std::int64_t>(s.draws())},
                               {"w_draws", static_cast<std::int64_t>(s.w_rows.size())},
                               {"acceptance_rate", s.meta.acceptance_rate},
                               {"retained_acceptance", s.meta.retained_acceptance},
                               {"numerical_rejections", static_cast<std::int64_t>(s.meta.numerical_rejections)}});
  }
  run.extra().insert("observations", static_cast<std::int64_t>(field.size()));
  run.extra().insert("chains", std::move(meta));
  run.write_manifest(config.mcmc(stage).seed);
}

void cmd_predict(const Invocation& inv, const RunConfig& config, Run& run) {
  const auto& pc = config.predict;
  const fs::path& y_dir = pc.y_run;
  const fs::path& z_dir = pc.z_run;
  const auto post_y = load_fit(y_dir, Stage::y);
  const auto post_z = load_fit(z_dir, Stage::z);
  if (post_y.w_rows.empty() || post_z.w_rows.empty()) {
    throw ValidationError("both posteriors need stored w draws");
  }

  const Region region = read_region(pc.region);
  std::optional<Region> mask;
  if (!pc.mask.empty()) mask = read_region(pc.mask);
  const auto grid = make_grid(region, pc.spacing_km, pc.years, mask ? &*mask : nullptr);
  if (grid.cells() == 0) throw ValidationError("the prediction grid has no cells inside the region");

  double t_lo = std::numeric_limits<double>::infinity(), t_hi = -t_lo;
  for (const auto* p : {&post_y, &post_z}) {
    for (const auto& c : p->coords) {
      t_lo = std::min(t_lo, c.t);
      t_hi = std::max(t_hi, c.t);
    }
  }
  for (double year : grid.years) {
    if (year < t_lo || year > t_hi) {
      std::ostringstream msg;
      msg << "grid year " << year << " lies outside the observed span [" << t_lo << ", " << t_hi
          << "]; predictions there extrapolate";
      run.warn(msg.str());
    }
  }

  PredictOptions opt;
  opt.m = config.neighbors;
  opt.threads = inv.threads;
  opt.include_noise = pc.include_noise;
  opt.seed = stream_seed(pc.seed, 0);
  const auto y = predict_y(post_y, grid.coords, opt);
  opt.seed = stream_seed(pc.seed, 1);
  const auto z = predict_z(post_z, grid.coords, opt);
  Eigen::Index draws = std::min(y.rows(), z.z.rows());
  if (y.rows() != z.z.rows()) {
    run.warn("y and z posteriors carry " + std::to_string(y.rows()) + " and " + std::to_string(z.z.rows()) +
             " w draws; pairing the first " + std::to_string(draws));
  }
  const Eigen::MatrixXd b = compose_biomass(y.topRows(draws), z.z.topRows(draws), config.transform());
  const Eigen::MatrixXd prob = z.prob.topRows(draws);

  {
    auto f = run.open("grid.csv");
    write_grid_csv(f, grid, b, prob, pc.quantiles);
  }
  if (grid.masked_cells() == 0) {
    run.warn("no grid cell lies inside the mask; area outputs skipped");
  } else {
    {
      auto f = run.open("area_series.csv");
      write_area_series_csv(f, grid, area_average_series(b, grid), pc.quantiles);
    }
    const double t0 = pc.change.empty() ? grid.years.front() : pc.change[0];
    const double t1 = pc.change.empty() ? grid.years.back() : pc.change[1];
    const auto change = change_summary(b, grid, t0, t1);
    {
      auto f = run.open("change.csv");
      write_change_csv(f, grid, change);
    }
    {
      auto f = run.open("change_area.csv");
      write_change_area_csv(f, change, pc.quantiles);
    }
  }
  run.extra().insert("draws", static_cast<std::int64_t>(draws));
  run.extra().insert("cells", static_cast<std::int64_t>(grid.cells()));
  run.extra().insert("masked_cells", static_cast<std::int64_t>(grid.masked_cells()));
  run.write_manifest(pc.seed);
}

void cmd_cv(const Invocation& inv, const RunConfig& config, Run& run) {
  const auto data = load_data(config);
  CvConfig cv;
  cv.mcmc_y = config.mcmc_y;
  cv.mcmc_z = config.mcmc_z;
  cv.k = config.cv.k;
  cv.seed = config.cv.seed;
  cv.transform = config.transform();
  cv.probs = config.predict.quantiles;
  cv.threads = inv.threads;
  cv.include_noise = config.predict.include_noise;
  const auto report = run_cross_validation(data, config.priors_y, config.priors_z, cv);
  for (const auto& w : report.warnings) run.warn(w);
  {
    auto f = run.open("cv_records.csv");
    write_cv_records_csv(f, report);
  }
  {
    auto f = run.open("cv_metrics.csv");
    write_cv_metrics_csv(f, report);
  }
  {
    auto f = run.open("cv_summary.txt");
    write_cv_summary(f, report);
  }
  run.extra().insert("mse", report.mse);
  run.extra().insert("r2", report.r2);
  run.extra().insert("mlpd_y", report.mlpd_y);
  run.extra().insert("mlpd_z", report.mlpd_z);
  run.extra().insert("coverage95", report.coverage95);
  run.write_manifest(config.cv.seed);
}

void cmd_variogram(const Invocation& inv, const RunConfig& config, Run& run) {
  const auto& vc = config.variogram;
  const auto field = stage_field(config, vc.stage);
  if (field.size() < 2) throw ValidationError("the variogram needs at least two observations");
  const LagBins bins = vc.space_edges.empty() ? default_lag_bins(field.coords, vc.space_bins, vc.time_bins)
                                              : LagBins{vc.space_edges, vc.time_edges};
  VariogramOptions opt;
  opt.space_cutoff = vc.space_cutoff;
  opt.threads = inv.threads;
  if (!vc.posterior_run.empty()) {
    std::ifstream in(vc.posterior_run / posterior_file(vc.stage));
    if (!in) throw IoError("cannot open " + (vc.posterior_run / posterior_file(vc.stage)).string());
    const auto post = read_posterior_csv(in);
    const std::size_t row = post.map_row(config.priors(vc.stage));
    opt.theta = post.theta(row);
    opt.tau = post.tau(row).value_or(0.0);
    run.extra().insert("map_iteration", static_cast<std::int64_t>(post.iteration[row]));
  }
  for (const auto& [key, edges] :
       {std::pair{"space_edges", &bins.space_edges}, std::pair{"time_edges", &bins.time_edges}}) {
    toml::array a;
    for (double e : *edges) a.push_back(e);
    run.extra().insert(key, std::move(a));
  }
  auto result = empirical_semivariogram(field.coords, field.values, bins, opt);
  if (vc.normalize) result = normalize_variogram(std::move(result));
  std::size_t empty = 0;
  for (const auto& b : result) empty += b.pairs == 0;
  if (empty > 0) run.warn(std::to_string(empty) + " of " + std::to_string(result.size()) + " bins are empty");
  {
    auto f = run.open("variogram.csv");
    write_variogram_csv(f, result);
  }
  run.write_manifest(0);
}

void cmd_simulate(const Invocation&, const RunConfig& config, Run& run) {
  const auto data = simulate_synthetic(config.simulate);
  {
    auto f = run.open("plots.csv");
    write_plot_table(f, data.measurements);
  }
  {
    auto f = run.open("truth.csv");
    f << "plot_id,year,w_y,w_z,y,z\n";
    for (std::size_t i = 0; i < data.measurements.size(); ++i) {
      const auto& m = data.measurements[i];
      const auto k = static_cast<Eigen::Index>(i);
      f << m.plot_id << "," << csv::format_double(m.coord.t) << "," << csv::format_double(data.w_y[k]) << ","
        << csv::format_double(data.w_z[k]) << "," << csv::format_double(data.y[k]) << ","
        << csv::format_double(data.z[k]) << "\n";
    }
  }
  run.extra().insert("measurements", static_cast<std::int64_t>(data.measurements.size()));
  run.write_manifest(config.simulate.seed);
}

void cmd_ht(const Invocation&, const RunConfig& config, Run& run) {
  const auto data = load_data(config);
  std::vector<HtEstimate> estimates;
  for (const auto& cycle : config.ht_cycles) estimates.push_back(horvitz_thompson(data, cycle));
  {
    auto f = run.open("ht.csv");
    write_ht_csv(f, estimates);
  }
  run.write_manifest(0);
}

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::validation:
      return kExitValidation;
    case ErrorKind::numerical:
      return kExitNumerical;
    case ErrorKind::io:
      return kExitIo;
  }
  return kExitNumerical;
}

}  // namespace

std::string posterior_file(Stage stage, std::size_t chain) {
  std::string name = "posterior_" + std::string(stage_name(stage));
  if (chain > 0) name += "_chain" + std::to_string(chain + 1);
  return name + ".csv";
}

std::string w_draw_file(Stage stage, std::size_t chain) {
  std::string name = "w_" + std::string(stage_name(stage));
  if (chain > 0) name += "_chain" + std::to_string(chain + 1);
  return name + ".bin";
}

PosteriorSamples load_fit(const fs::path& run_dir, Stage stage, std::size_t chain) {
  const fs::path csv_path = run_dir / posterior_file(stage, chain);
  const fs::path w_path = run_dir / w_draw_file(stage, chain);
  std::ifstream csv_in(csv_path);
  if (!csv_in) throw IoError("cannot open " + csv_path.string());
  auto s = read_posterior_csv(csv_in);
  if ((stage == Stage::y) != (s.kind == ModelKind::normal)) {
    throw ValidationError(csv_path.string() + " holds the other model stage");
  }
  std::ifstream w_in(w_path, std::ios::binary);
  if (!w_in) throw IoError("cannot open " + w_path.string());
  read_w_draws(w_in, s);
  return s;
}

std::string_view build_version() { return STLGM_VERSION; }

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Space-time latent Gaussian models for forest biomass"};
  app.require_subcommand(1);
  Invocation inv;
  std::string stage;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", inv.config_path, "run configuration (TOML)")->required();
    sub->add_option("--threads", inv.threads, "worker threads (default: logical cores)");
    sub->add_option("--out", inv.out_dir, "parent of the run directory")->capture_default_str();
  };
  struct Entry {
    const char* name;
    Command command;
    const char* help;
  };
  const Entry entries[] = {{"fit", Command::fit, "sample one model stage"},
                           {"predict", Command::predict, "predict biomass on a grid"},
                           {"cv", Command::cv, "plot-blocked cross-validation"},
                           {"variogram", Command::variogram, "empirical semivariogram"},
                           {"simulate", Command::simulate, "synthetic plot table"},
                           {"ht", Command::ht, "design-based cycle means"}};
  std::vector<std::pair<CLI::App*, Command>> subs;
  for (const auto& e : entries) {
    auto* sub = app.add_subcommand(e.name, e.help);
    common(sub);
    if (e.command == Command::fit) {
      sub->add_option("--stage", stage, "y (continuous) or z (forest indicator)")
          ->required()
          ->check(CLI::IsMember({"y", "z"}));
    }
    if (e.command == Command::predict) {
      sub->add_option("--y-run", inv.y_run, "fit run directory for the y stage");
      sub->add_option("--z-run", inv.z_run, "fit run directory for the z stage");
    }
    subs.emplace_back(sub, e.command);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    std::ostringstream o, er;
    const int code = app.exit(e, o, er);
    out << o.str();
    err << er.str();
    return code == 0 ? kExitOk : kExitValidation;
  }
  for (const auto& [sub, command] : subs) {
    if (sub->parsed()) {
      inv.command = command;
      inv.name = sub->get_name();
    }
  }
  if (!stage.empty()) inv.stage = stage == "y" ? Stage::y : Stage::z;
  if (inv.threads == 0) inv.threads = default_threads();

  try {
    RunConfig config = load_config(inv.config_path);
    if (!inv.y_run.empty()) config.predict.y_run = fs::absolute(inv.y_run).lexically_normal();
    if (!inv.z_run.empty()) config.predict.z_run = fs::absolute(inv.z_run).lexically_normal();
    require_for(config, inv.command, inv.stage);
    Run run(inv, config, err);
    switch (inv.command) {
      case Command::fit:
        cmd_fit(inv, config, run);
        break;
      case Command::predict:
        cmd_predict(inv, config, run);
        break;
      case Command::cv:
        cmd_cv(inv, config, run);
        break;
      case Command::variogram:
        cmd_variogram(inv, config, run);
        break;
      case Command::simulate:
        cmd_simulate(inv, config, run);
        break;
      case Command::ht:
        cmd_ht(inv, config, run);
        break;
    }
    out << "run directory: " << run.dir().string() << "\n";
    return kExitOk;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitNumerical;
  }
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<const char*> argv{"stlgm"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace stlgm
