#include "stlgm/config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "toml.hpp"

#include "stlgm/error.hpp"

namespace stlgm {
namespace {

namespace fs = std::filesystem;

using Errors = std::vector<std::string>;

std::string join_path(const std::string& path, std::string_view key) {
  return path.empty() ? std::string(key) : path + "." + std::string(key);
}

// A TOML table plus the keys read from it so far.
class Section {
 public:
  Section(const toml::table* table, std::string path, Errors& errors, const fs::path& base)
      : table_(table), path_(std::move(path)), errors_(&errors), base_(&base) {}

  bool present() const { return table_ != nullptr; }
  bool has(std::string_view key) const { return table_ && table_->contains(key); }
  const std::string& path() const { return path_; }
  void error(std::string_view key, const std::string& message) {
    errors_->push_back(join_path(path_, key) + ": " + message);
  }

  const toml::node* node(std::string_view key) {
    if (!table_) return nullptr;
    used_.insert(std::string(key));
    return table_->get(key);
  }

  Section child(std::string_view key) {
    const auto* n = node(key);
    if (n && !n->is_table()) {
      error(key, "expected a table");
      n = nullptr;
    }
    return Section(n ? n->as_table() : nullptr, join_path(path_, key), *errors_, *base_);
  }

  void read(std::string_view key, double& out) {
    if (auto v = number(key)) out = *v;
  }

  void read_positive(std::string_view key, double& out) {
    if (auto v = number(key)) {
      if (*v > 0.0) {
        out = *v;
      } else {
        error(key, "must be positive");
      }
    }
  }

  void read(std::string_view key, std::optional<double>& out) {
    if (auto v = number(key)) out = *v;
  }

  void read(std::string_view key, std::size_t& out, std::size_t min = 0) {
    if (auto v = integer(key)) {
      if (*v < static_cast<std::int64_t>(min)) {
        error(key, "must be at least " + std::to_string(min));
      } else {
        out = static_cast<std::size_t>(*v);
      }
    }
  }

  void read(std::string_view key, int& out) {
    if (auto v = integer(key)) {
      if (*v < std::numeric_limits<int>::min() || *v > std::numeric_limits<int>::max()) {
        error(key, "out of range");
      } else {
        out = static_cast<int>(*v);
      }
    }
  }

  void read(std::string_view key, bool& out) {
    const auto* n = node(key);
    if (!n) return;
    if (auto v = n->value<bool>(); v && n->is_boolean()) {
      out = *v;
    } else {
      error(key, "expected true or false");
    }
  }

  void read(std::string_view key, std::string& out) {
    const auto* n = node(key);
    if (!n) return;
    if (n->is_string()) {
      out = *n->value<std::string>();
    } else {
      error(key, "expected a string");
    }
  }

  void read(std::string_view key, fs::path& out) {
    std::string s;
    if (!has(key)) return;
    read(key, s);
    if (s.empty()) {
      out.clear();
      return;
    }
    fs::path p(s);
    out = (p.is_absolute() ? p : *base_ / p).lexically_normal();
  }

  void read(std::string_view key, std::vector<double>& out) {
    const auto* n = node(key);
    if (!n) return;
    const auto* arr = n->as_array();
    if (!arr) {
      error(key, "expected an array of numbers");
      return;
    }
    std::vector<double> v;
    for (const auto& e : *arr) {
      if (!e.is_number()) {
        error(key, "expected an array of numbers");
        return;
      }
      v.push_back(*e.value<double>());
    }
    out = std::move(v);
  }

  // Array of tables; each entry gets its own section.
  std::vector<Section> tables(std::string_view key) {
    std::vector<Section> out;
    const auto* n = node(key);
    if (!n) return out;
    const auto* arr = n->as_array();
    if (!arr) {
      error(key, "expected an array of tables");
      return out;
    }
    for (std::size_t i = 0; i < arr->size(); ++i) {
      const auto& e = (*arr)[i];
      const std::string p = join_path(path_, key) + "[" + std::to_string(i) + "]";
      if (!e.is_table()) {
        errors_->push_back(p + ": expected a table");
        continue;
      }
      out.emplace_back(e.as_table(), p, *errors_, *base_);
    }
    return out;
  }

  void finish() {
    if (!table_) return;
    for (const auto& [k, v] : *table_) {
      if (!used_.count(std::string(k.str()))) {
        errors_->push_back(join_path(path_, k.str()) + ": unknown key");
      }
    }
  }

 private:
  std::optional<double> number(std::string_view key) {
    const auto* n = node(key);
    if (!n) return std::nullopt;
    if (!n->is_number()) {
      error(key, "expected a number");
      return std::nullopt;
    }
    const double v = *n->value<double>();
    if (!std::isfinite(v)) {
      error(key, "must be finite");
      return std::nullopt;
    }
    return v;
  }

  std::optional<std::int64_t> integer(std::string_view key) {
    const auto* n = node(key);
    if (!n) return std::nullopt;
    if (!n->is_integer()) {
      error(key, "expected an integer");
      return std::nullopt;
    }
    return *n->value<std::int64_t>();
  }

  const toml::table* table_;
  std::string path_;
  Errors* errors_;
  const fs::path* base_;
  std::set<std::string> used_;
};

void read_gamma(Section& sec, std::string_view key, GammaPrior& out) {
  auto s = sec.child(key);
  if (!s.present()) return;
  s.read("mean", out.mean);
  s.read("sd", out.sd);
  s.finish();
}

void read_gamma_list(Section& sec, std::string_view key, std::size_t components,
                     std::vector<ComponentPriors>& out, GammaPrior ComponentPriors::*field) {
  if (!sec.has(key)) return;
  auto entries = sec.tables(key);
  if (entries.size() != components) {
    sec.error(key, "expected " + std::to_string(components) + " entries, one per component");
    return;
  }
  for (std::size_t l = 0; l < components; ++l) {
    entries[l].read("mean", (out[l].*field).mean);
    entries[l].read("sd", (out[l].*field).sd);
    entries[l].finish();
  }
}

PriorSpec read_priors(Section& priors, Stage stage, std::size_t components, Errors& errors) {
  auto sec = priors.child(stage_name(stage));
  const bool defaults = components == 1 || components == 2;
  PriorSpec p;
  if (defaults) {
    p = default_priors(stage, components);
  } else {
    p.components.resize(components);
    if (stage == Stage::y) p.tau = GammaPrior{};
    for (const char* key : {"sigma", "phi", "lambda"}) {
      if (!sec.has(key)) {
        errors.push_back(join_path(sec.path(), key) + ": required when model.components is not 1 or 2");
      }
    }
  }
  auto alpha = sec.child("alpha");
  if (alpha.present()) {
    alpha.read("mean", p.alpha.mean);
    alpha.read("sd", p.alpha.sd);
    alpha.finish();
  }
  if (stage == Stage::y) {
    GammaPrior tau = p.tau.value_or(GammaPrior{});
    read_gamma(sec, "tau", tau);
    p.tau = tau;
  }
  read_gamma_list(sec, "sigma", components, p.components, &ComponentPriors::sigma);
  read_gamma_list(sec, "phi", components, p.components, &ComponentPriors::phi);
  read_gamma_list(sec, "lambda", components, p.components, &ComponentPriors::lambda);
  sec.finish();
  if (components > 0) {
    try {
      p.validate();
    } catch (const ValidationError& e) {
      errors.push_back(sec.path() + ": " + e.what());
    }
  }
  return p;
}

void read_mcmc(Section& sec, McmcConfig& c) {
  const bool derive_burn = sec.has("iterations") && !sec.has("burn_in");
  sec.read("iterations", c.iterations, 1);
  if (derive_burn) c.burn_in = c.iterations / 2;
  sec.read("burn_in", c.burn_in);
  sec.read("thin", c.thin, 1);
  sec.read("w_thin", c.w_thin, 1);
  sec.read("seed", c.seed);
  sec.read("adapt", c.adapt);
  sec.read("anneal", c.anneal);
  sec.read("target_acceptance", c.target_acceptance);
  sec.read("initial_step", c.initial_step);
}

CovarianceParams read_theta(Section& sec, std::string_view key, CovarianceParams theta) {
  if (!sec.has(key)) return theta;
  theta.components.clear();
  for (auto& e : sec.tables(key)) {
    CovarianceComponent c;
    e.read_positive("sigma", c.sigma);
    e.read_positive("phi", c.phi);
    e.read_positive("lambda", c.lambda);
    e.finish();
    theta.components.push_back(c);
  }
  if (theta.components.empty()) sec.error(key, "needs at least one component");
  return theta;
}

std::string to_hex(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

toml::array numbers(const std::vector<double>& v) {
  toml::array a;
  for (double x : v) a.push_back(x);
  return a;
}

toml::table gamma_table(const GammaPrior& g) { return toml::table{{"mean", g.mean}, {"sd", g.sd}}; }

toml::table priors_table(const PriorSpec& p) {
  toml::table t;
  t.insert("alpha", toml::table{{"mean", p.alpha.mean}, {"sd", p.alpha.sd}});
  if (p.tau) t.insert("tau", gamma_table(*p.tau));
  toml::array sigma, phi, lambda;
  for (const auto& c : p.components) {
    sigma.push_back(gamma_table(c.sigma));
    phi.push_back(gamma_table(c.phi));
    lambda.push_back(gamma_table(c.lambda));
  }
  t.insert("sigma", std::move(sigma));
  t.insert("phi", std::move(phi));
  t.insert("lambda", std::move(lambda));
  return t;
}

toml::table mcmc_table(const McmcConfig& c) {
  return toml::table{{"iterations", static_cast<std::int64_t>(c.iterations)},
                     {"burn_in", static_cast<std::int64_t>(c.burn_in)},
                     {"thin", static_cast<std::int64_t>(c.thin)},
                     {"w_thin", static_cast<std::int64_t>(c.w_thin)},
                     {"seed", static_cast<std::int64_t>(c.seed)},
                     {"adapt", c.adapt},
                     {"anneal", c.anneal},
                     {"target_acceptance", c.target_acceptance},
                     {"initial_step", c.initial_step}};
}

toml::array theta_array(const CovarianceParams& theta) {
  toml::array a;
  for (const auto& c : theta.components) {
    a.push_back(toml::table{{"sigma", c.sigma}, {"phi", c.phi}, {"lambda", c.lambda}});
  }
  return a;
}

void put_path(toml::table& t, std::string_view key, const fs::path& p) {
  if (!p.empty()) t.insert(key, p.string());
}

}  // namespace

std::string_view stage_name(Stage stage) { return stage == Stage::y ? "y" : "z"; }

PriorSpec default_priors(Stage stage, std::size_t components) {
  PriorSpec p;
  if (stage == Stage::y) {
    p.alpha = {5.0, 10.0};
    p.tau = GammaPrior{1.0, 1.0};
    if (components == 1) {
      p.components = {{{3.0, 2.9}, {25.0, 10.0}, {100.0, 90.0}}};
    } else if (components == 2) {
      p.components = {{{2.0, 1.9}, {50.0, 10.0}, {100.0, 90.0}}, {{4.0, 3.9}, {10.0, 5.0}, {100.0, 90.0}}};
    }
  } else {
    p.alpha = {1.5, 1.0 / std::sqrt(10.0)};
    if (components == 1) {
      p.components = {{{9.0, 8.9}, {25.0, 10.0}, {100.0, 90.0}}};
    } else if (components == 2) {
      p.components = {{{4.0, 3.9}, {50.0, 10.0}, {100.0, 90.0}}, {{8.0, 7.9}, {10.0, 5.0}, {100.0, 90.0}}};
    }
  }
  if (p.components.empty()) {
    throw ValidationError("no default priors for " + std::to_string(components) + " components");
  }
  return p;
}

RunConfig parse_config(std::string_view text, const fs::path& base_dir) {
  toml::table doc;
  try {
    doc = toml::parse(text);
  } catch (const toml::parse_error& e) {
    std::ostringstream msg;
    msg << "config is not valid TOML: " << e.description() << " (line " << e.source().begin.line << ")";
    throw ValidationError(msg.str());
  }
  Errors errors;
  const fs::path base = base_dir.empty() ? fs::current_path() : fs::absolute(base_dir);
  Section root(&doc, "", errors, base);
  RunConfig c;
  root.read("data", c.data);

  auto model = root.child("model");
  model.read("root", c.root);
  model.read("components", c.components, 1);
  model.read("neighbors", c.neighbors, 1);
  model.finish();
  if (c.root < 1) errors.push_back("model.root: must be at least 1");

  auto priors = root.child("priors");
  c.priors_y = read_priors(priors, Stage::y, c.components, errors);
  c.priors_z = read_priors(priors, Stage::z, c.components, errors);
  priors.finish();

  auto mcmc = root.child("mcmc");
  c.mcmc_y.m = c.neighbors;
  read_mcmc(mcmc, c.mcmc_y);
  mcmc.read("chains", c.chains, 1);
  c.mcmc_z = c.mcmc_y;
  auto mz = mcmc.child("z");
  if (mz.present()) {
    read_mcmc(mz, c.mcmc_z);
    mz.finish();
  }
  mcmc.finish();
  for (Stage s : {Stage::y, Stage::z}) {
    try {
      c.mcmc(s).validate();
    } catch (const ValidationError& e) {
      errors.push_back(std::string(s == Stage::y ? "mcmc" : "mcmc.z") + ": " + e.what());
    }
  }

  auto pred = root.child("predict");
  pred.read("region", c.predict.region);
  pred.read("mask", c.predict.mask);
  pred.read_positive("spacing_km", c.predict.spacing_km);
  pred.read("years", c.predict.years);
  pred.read("quantiles", c.predict.quantiles);
  pred.read("include_noise", c.predict.include_noise);
  pred.read("seed", c.predict.seed);
  pred.read("change", c.predict.change);
  pred.read("y_run", c.predict.y_run);
  pred.read("z_run", c.predict.z_run);
  pred.finish();
  for (double q : c.predict.quantiles) {
    if (!(q > 0.0 && q < 1.0)) errors.push_back("predict.quantiles: every entry must lie in (0, 1)");
  }
  if (!c.predict.change.empty() && c.predict.change.size() != 2) {
    errors.push_back("predict.change: expected [t0, t1]");
  }

  auto cv = root.child("cv");
  cv.read("k", c.cv.k);
  cv.read("seed", c.cv.seed);
  cv.finish();
  if (c.cv.k < 2) errors.push_back("cv.k: must be at least 2");

  auto ht = root.child("ht");
  for (auto& e : ht.tables("cycles")) {
    CycleBounds b;
    e.read("label", b.label);
    e.read("start", b.start);
    e.read("end", b.end);
    e.finish();
    if (!(b.end > b.start)) errors.push_back(e.path() + ": end must exceed start");
    c.ht_cycles.push_back(std::move(b));
  }
  ht.finish();

  auto vg = root.child("variogram");
  std::string stage = "y";
  vg.read("stage", stage);
  if (stage == "y") {
    c.variogram.stage = Stage::y;
  } else if (stage == "z") {
    c.variogram.stage = Stage::z;
  } else {
    errors.push_back("variogram.stage: expected \"y\" or \"z\"");
  }
  vg.read("space_edges", c.variogram.space_edges);
  vg.read("time_edges", c.variogram.time_edges);
  vg.read("space_bins", c.variogram.space_bins, 1);
  vg.read("time_bins", c.variogram.time_bins, 1);
  vg.read("normalize", c.variogram.normalize);
  vg.read("space_cutoff", c.variogram.space_cutoff);
  vg.read("posterior_run", c.variogram.posterior_run);
  vg.finish();
  if (c.variogram.space_edges.empty() != c.variogram.time_edges.empty()) {
    errors.push_back("variogram: space_edges and time_edges must be given together");
  } else if (!c.variogram.space_edges.empty()) {
    try {
      LagBins{c.variogram.space_edges, c.variogram.time_edges}.validate();
    } catch (const ValidationError& e) {
      errors.push_back(std::string("variogram: ") + e.what());
    }
  }

  auto sim = root.child("simulate");
  auto& s = c.simulate;
  s.theta_y = CovarianceParams{{{1.0, 40.0, 60.0}, {1.5, 8.0, 15.0}}};
  s.theta_z = CovarianceParams{{{2.0, 40.0, 60.0}, {3.0, 8.0, 15.0}}};
  sim.read("seed", s.seed);
  sim.read("alpha_y", s.alpha_y);
  sim.read("tau", s.tau);
  sim.read("alpha_z", s.alpha_z);
  sim.read("force_forest", s.force_forest);
  sim.read("nngp_neighbors", s.nngp_m);
  s.theta_y = read_theta(sim, "theta_y", s.theta_y);
  s.theta_z = read_theta(sim, "theta_z", s.theta_z);
  auto layout = sim.child("layout");
  layout.read("n_plots", s.layout.n_plots, 1);
  layout.read_positive("width_km", s.layout.width);
  layout.read_positive("height_km", s.layout.height);
  layout.read("first_year", s.layout.first_year);
  layout.read("panel_years", s.layout.panel_years);
  layout.read("visit_offsets", s.layout.visit_offsets);
  layout.read("clusters", s.layout.clusters);
  layout.read_positive("cluster_sd_km", s.layout.cluster_sd);
  layout.finish();
  sim.finish();
  s.transform = RootTransform(c.root < 1 ? 1 : c.root);
  if (s.tau < 0.0) errors.push_back("simulate.tau: must be nonnegative");
  if (s.layout.visit_offsets.empty()) errors.push_back("simulate.layout.visit_offsets: needs at least one visit");

  root.finish();
  if (!errors.empty()) {
    std::string msg = "invalid configuration (" + std::to_string(errors.size()) + " problem" +
                      (errors.size() == 1 ? "" : "s") + "):";
    for (const auto& e : errors) msg += "\n  " + e;
    throw ValidationError(msg);
  }
  return c;
}

RunConfig load_config(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open config file: " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str(), fs::absolute(path).parent_path());
}

std::string to_toml(const RunConfig& c) {
  toml::table doc;
  put_path(doc, "data", c.data);
  doc.insert("model", toml::table{{"root", c.root},
                                  {"components", static_cast<std::int64_t>(c.components)},
                                  {"neighbors", static_cast<std::int64_t>(c.neighbors)}});
  doc.insert("priors", toml::table{{"y", priors_table(c.priors_y)}, {"z", priors_table(c.priors_z)}});
  auto mcmc = mcmc_table(c.mcmc_y);
  mcmc.insert("chains", static_cast<std::int64_t>(c.chains));
  mcmc.insert("z", mcmc_table(c.mcmc_z));
  doc.insert("mcmc", std::move(mcmc));

  toml::table pred;
  put_path(pred, "region", c.predict.region);
  put_path(pred, "mask", c.predict.mask);
  pred.insert("spacing_km", c.predict.spacing_km);
  pred.insert("years", numbers(c.predict.years));
  pred.insert("quantiles", numbers(c.predict.quantiles));
  pred.insert("include_noise", c.predict.include_noise);
  pred.insert("seed", static_cast<std::int64_t>(c.predict.seed));
  pred.insert("change", numbers(c.predict.change));
  put_path(pred, "y_run", c.predict.y_run);
  put_path(pred, "z_run", c.predict.z_run);
  doc.insert("predict", std::move(pred));

  doc.insert("cv", toml::table{{"k", static_cast<std::int64_t>(c.cv.k)},
                               {"seed", static_cast<std::int64_t>(c.cv.seed)}});

  toml::array cycles;
  for (const auto& b : c.ht_cycles) {
    cycles.push_back(toml::table{{"label", b.label}, {"start", b.start}, {"end", b.end}});
  }
  doc.insert("ht", toml::table{{"cycles", std::move(cycles)}});

  toml::table vg;
  vg.insert("stage", std::string(stage_name(c.variogram.stage)));
  vg.insert("space_edges", numbers(c.variogram.space_edges));
  vg.insert("time_edges", numbers(c.variogram.time_edges));
  vg.insert("space_bins", static_cast<std::int64_t>(c.variogram.space_bins));
  vg.insert("time_bins", static_cast<std::int64_t>(c.variogram.time_bins));
  vg.insert("normalize", c.variogram.normalize);
  if (c.variogram.space_cutoff) vg.insert("space_cutoff", *c.variogram.space_cutoff);
  put_path(vg, "posterior_run", c.variogram.posterior_run);
  doc.insert("variogram", std::move(vg));

  const auto& s = c.simulate;
  toml::table sim{{"seed", static_cast<std::int64_t>(s.seed)},
                  {"alpha_y", s.alpha_y},
                  {"tau", s.tau},
                  {"alpha_z", s.alpha_z},
                  {"force_forest", s.force_forest},
                  {"nngp_neighbors", static_cast<std::int64_t>(s.nngp_m)},
                  {"theta_y", theta_array(s.theta_y)},
                  {"theta_z", theta_array(s.theta_z)}};
  sim.insert("layout", toml::table{{"n_plots", static_cast<std::int64_t>(s.layout.n_plots)},
                                   {"width_km", s.layout.width},
                                   {"height_km", s.layout.height},
                                   {"first_year", s.layout.first_year},
                                   {"panel_years", s.layout.panel_years},
                                   {"visit_offsets", numbers(s.layout.visit_offsets)},
                                   {"clusters", static_cast<std::int64_t>(s.layout.clusters)},
                                   {"cluster_sd_km", s.layout.cluster_sd}});
  doc.insert("simulate", std::move(sim));

  std::ostringstream out;
  out << doc << "\n";
  return out.str();
}

std::string config_hash(const RunConfig& config) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : to_toml(config)) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return to_hex(h);
}

void require_for(const RunConfig& c, Command command, std::optional<Stage> stage) {
  Errors errors;
  const bool needs_data = command == Command::fit || command == Command::cv ||
                          command == Command::variogram || command == Command::ht;
  if (needs_data && c.data.empty()) errors.push_back("data: required by this command");
  switch (command) {
    case Command::fit:
      if (stage && c.priors(*stage).components.size() != c.components) {
        errors.push_back("priors: component count does not match model.components");
      }
      break;
    case Command::predict:
      if (c.predict.region.empty()) errors.push_back("predict.region: required by predict");
      if (c.predict.years.empty()) errors.push_back("predict.years: required by predict");
      if (c.predict.y_run.empty()) errors.push_back("predict.y_run: required by predict (or --y-run)");
      if (c.predict.z_run.empty()) errors.push_back("predict.z_run: required by predict (or --z-run)");
      if (c.predict.change.size() == 2) {
        for (double t : c.predict.change) {
          bool found = false;
          for (double y : c.predict.years) found = found || y == t;
          if (!found) errors.push_back("predict.change: every entry must be one of predict.years");
        }
      }
      break;
    case Command::ht:
      if (c.ht_cycles.empty()) errors.push_back("ht.cycles: at least one cycle is required");
      break;
    case Command::simulate:
      if (c.simulate.layout.n_plots * c.simulate.layout.visit_offsets.size() > kDenseSimulationLimit &&
          c.simulate.nngp_m == 0) {
        errors.push_back("simulate.nngp_neighbors: layouts above " + std::to_string(kDenseSimulationLimit) +
                         " measurements need NNGP simulation");
      }
      break;
    case Command::cv:
    case Command::variogram:
      break;
  }
  if (!errors.empty()) {
    std::string msg = "invalid configuration for this command:";
    for (const auto& e : errors) msg += "\n  " + e;
    throw ValidationError(msg);
  }
}

}  // namespace stlgm
