#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>
#include <toml.hpp>

#include "stlgm/cli.hpp"
#include "stlgm/config.hpp"
#include "stlgm/data_model.hpp"

namespace stlgm {
namespace {

namespace fs = std::filesystem;

struct Outcome {
  int code = -1;
  std::string out;
  std::string err;
  fs::path dir;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::size_t lines(const fs::path& p) {
  const auto text = slurp(p);
  return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n'));
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    root_ = fs::temp_directory_path() /
            ("stlgm_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(root_);
    fs::create_directories(root_);
  }
  void TearDown() override { fs::remove_all(root_); }

  fs::path write(const std::string& name, const std::string& text) {
    const auto p = root_ / name;
    std::ofstream(p) << text;
    return p;
  }

  Outcome run(std::vector<std::string> args) {
    std::ostringstream out, err;
    Outcome o;
    o.code = run_cli(args, out, err);
    o.out = out.str();
    o.err = err.str();
    const std::string tag = "run directory: ";
    if (const auto at = o.out.find(tag); at != std::string::npos) {
      o.dir = o.out.substr(at + tag.size(), o.out.find('\n', at) - at - tag.size());
    }
    return o;
  }

  Outcome run(const std::string& command, const fs::path& config, std::vector<std::string> extra = {}) {
    std::vector<std::string> args{command, "--config", config.string(), "--out", (root_ / "runs").string()};
    args.insert(args.end(), extra.begin(), extra.end());
    return run(args);
  }

  // Simulated 24-plot table copied next to the configs.
  fs::path simulated_data(std::uint64_t seed = 3) {
    const auto cfg = write("sim.toml", "[simulate]\nseed = " + std::to_string(seed) +
                                           "\n[simulate.layout]\nn_plots = 24\nwidth_km = 30.0\nheight_km = 30.0\n");
    const auto o = run("simulate", cfg);
    EXPECT_EQ(o.code, 0) << o.err;
    const auto data = root_ / "plots.csv";
    fs::copy_file(o.dir / "plots.csv", data, fs::copy_options::overwrite_existing);
    return data;
  }

  static std::string quick_model() {
    return "[model]\nneighbors = 6\n[mcmc]\niterations = 60\nburn_in = 20\nthin = 2\nseed = 5\n";
  }

  fs::path root_;
};

TEST_F(CliTest, FitWritesDrawsAndManifest) {
  simulated_data();
  const auto cfg = write("fit.toml", "data = \"plots.csv\"\n" + quick_model());
  const auto o = run("fit", cfg, {"--stage", "y", "--threads", "1"});
  ASSERT_EQ(o.code, 0) << o.err;
  EXPECT_NE(o.dir.filename().string().find("fit-y-"), std::string::npos);
  EXPECT_EQ(lines(o.dir / "posterior_y.csv"), 1u + (60u - 20u) / 2u);
  EXPECT_TRUE(fs::exists(o.dir / "w_y.bin"));
  const auto manifest = toml::parse_file((o.dir / "manifest.toml").string());
  EXPECT_EQ(manifest["run"]["command"].value_or(std::string()), "fit");
  EXPECT_EQ(manifest["run"]["stage"].value_or(std::string()), "y");
  EXPECT_EQ(manifest["run"]["seed"].value_or(0), 5);
  EXPECT_TRUE(manifest["run"]["version"].is_string());
  EXPECT_TRUE(manifest["run"]["wall_time_s"].is_floating_point());
  EXPECT_TRUE(manifest["run"]["chains"][0]["acceptance_rate"].is_floating_point());
}

TEST_F(CliTest, RerunIsByteIdenticalAcrossThreadCounts) {
  simulated_data();
  const auto cfg = write("fit.toml", "data = \"plots.csv\"\n" + quick_model() + "chains = 2\n");
  const auto a = run("fit", cfg, {"--stage", "z", "--threads", "1"});
  const auto b = run("fit", cfg, {"--stage", "z", "--threads", "2"});
  ASSERT_EQ(a.code, 0) << a.err;
  ASSERT_EQ(b.code, 0) << b.err;
  EXPECT_NE(a.dir, b.dir);
  for (const auto* f : {"posterior_z.csv", "posterior_z_chain2.csv", "w_z.bin", "w_z_chain2.bin"}) {
    EXPECT_EQ(slurp(a.dir / f), slurp(b.dir / f)) << f;
  }
  EXPECT_NE(slurp(a.dir / "posterior_z.csv"), slurp(a.dir / "posterior_z_chain2.csv"));
}

TEST_F(CliTest, AllZeroIndicatorWarns) {
  std::vector<PlotMeasurement> rows;
  for (int i = 0; i < 12; ++i) rows.push_back({"p" + std::to_string(i), {1.0 * i, 2.0 * i, 2001.0 + i}, 0.0});
  std::ofstream(root_ / "zeros.csv") << [&] {
    std::ostringstream s;
    write_plot_table(s, rows);
    return s.str();
  }();
  const auto cfg = write("fit.toml", "data = \"zeros.csv\"\n" + quick_model());
  const auto o = run("fit", cfg, {"--stage", "z"});
  ASSERT_EQ(o.code, 0) << o.err;
  const auto manifest = toml::parse_file((o.dir / "manifest.toml").string());
  const auto* warnings = manifest["run"]["warnings"].as_array();
  ASSERT_NE(warnings, nullptr);
  EXPECT_FALSE(warnings->empty());
  EXPECT_NE(o.err.find("warning:"), std::string::npos);
}

TEST_F(CliTest, ManifestConfigReparsesIdentically) {
  simulated_data();
  const auto cfg = write("fit.toml", "data = \"plots.csv\"\n" + quick_model() +
                                         "[mcmc.z]\nthin = 4\n[predict]\nyears = [2003.0]\nquantiles = [0.1]\n");
  const auto o = run("fit", cfg, {"--stage", "y"});
  ASSERT_EQ(o.code, 0) << o.err;
  const auto manifest = toml::parse_file((o.dir / "manifest.toml").string());
  std::ostringstream echo;
  echo << *manifest["config"].as_table();
  const auto reparsed = parse_config(echo.str(), "/unrelated");
  EXPECT_EQ(reparsed, load_config(cfg));
  EXPECT_EQ(manifest["run"]["config_hash"].value_or(std::string()), config_hash(reparsed));
}

TEST_F(CliTest, PredictOneCellAndZeroChange) {
  simulated_data();
  const auto cfg = write("fit.toml", "data = \"plots.csv\"\n" + quick_model());
  const auto y = run("fit", cfg, {"--stage", "y"});
  const auto z = run("fit", cfg, {"--stage", "z"});
  ASSERT_EQ(y.code, 0) << y.err;
  ASSERT_EQ(z.code, 0) << z.err;
  write("cell.geojson", R"({"type":"Polygon","coordinates":[[[10,10],[11,10],[11,11],[10,11],[10,10]]]})");
  const auto pcfg = write("predict.toml", quick_model() +
                                              "[predict]\nregion = \"cell.geojson\"\nyears = [2006.0]\n"
                                              "change = [2006.0, 2006.0]\n");
  const auto p = run("predict", pcfg, {"--y-run", y.dir.string(), "--z-run", z.dir.string()});
  ASSERT_EQ(p.code, 0) << p.err;
  EXPECT_EQ(lines(p.dir / "grid.csv"), 2u);
  EXPECT_EQ(lines(p.dir / "area_series.csv"), 2u);
  const auto change = slurp(p.dir / "change.csv");
  EXPECT_EQ(change, "x_km,y_km,in_mask,expected_change\n10.5,10.5,1,0\n");
  const auto area = slurp(p.dir / "change_area.csv");
  EXPECT_NE(area.find("2006,2006,0,0,0,0"), std::string::npos) << area;

  const auto again = run("predict", pcfg, {"--y-run", y.dir.string(), "--z-run", z.dir.string(), "--threads", "2"});
  ASSERT_EQ(again.code, 0) << again.err;
  EXPECT_EQ(slurp(p.dir / "grid.csv"), slurp(again.dir / "grid.csv"));
}

TEST_F(CliTest, PredictWarnsOnExtrapolatedYears) {
  simulated_data();
  const auto cfg = write("fit.toml", "data = \"plots.csv\"\n" + quick_model());
  const auto y = run("fit", cfg, {"--stage", "y"});
  const auto z = run("fit", cfg, {"--stage", "z"});
  write("cell.geojson", R"({"type":"Polygon","coordinates":[[[0,0],[2,0],[2,1],[0,1],[0,0]]]})");
  const auto pcfg = write("predict.toml", quick_model() + "[predict]\nregion = \"cell.geojson\"\nyears = [2050.0]\n");
  const auto p = run("predict", pcfg, {"--y-run", y.dir.string(), "--z-run", z.dir.string()});
  ASSERT_EQ(p.code, 0) << p.err;
  EXPECT_NE(p.err.find("extrapolate"), std::string::npos);
}

TEST_F(CliTest, CrossValidationReport) {
  simulated_data();
  const auto cfg = write("cv.toml", "data = \"plots.csv\"\n[model]\nneighbors = 6\n"
                                       "[mcmc]\niterations = 60\nburn_in = 20\n[cv]\nk = 2\n");
  const auto o = run("cv", cfg);
  ASSERT_EQ(o.code, 0) << o.err;
  const auto metrics = slurp(o.dir / "cv_metrics.csv");
  for (const auto* m : {"mse", "r2", "mlpd_y", "mlpd_z", "coverage95"}) {
    EXPECT_NE(metrics.find(m), std::string::npos) << m;
  }
  EXPECT_EQ(lines(o.dir / "cv_records.csv"), 49u);
  EXPECT_TRUE(fs::exists(o.dir / "cv_summary.txt"));

  const auto bad = write("bad.toml", "data = \"plots.csv\"\n[cv]\nk = 1\n");
  EXPECT_EQ(run("cv", bad).code, kExitValidation);
}

TEST_F(CliTest, SimulateFeedsBackIntoParser) {
  const auto data = simulated_data(3);
  const auto rows = read_plot_table(data);
  EXPECT_EQ(rows.size(), 48u);
  const auto first = slurp(data);
  const auto other = slurp(simulated_data(4));
  EXPECT_NE(first, other);
  EXPECT_EQ(first.substr(0, first.find('\n')), other.substr(0, other.find('\n')));
}

TEST_F(CliTest, NoiselessRepeatVisitsFollowTheField) {
  const auto cfg = write("sim.toml", "[simulate]\ntau = 0.0\nforce_forest = true\n[simulate.layout]\nn_plots = 10\n");
  const auto o = run("simulate", cfg);
  ASSERT_EQ(o.code, 0) << o.err;
  std::ifstream in(o.dir / "truth.csv");
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "plot_id,year,w_y,w_z,y,z");
  int rows = 0;
  while (std::getline(in, line)) {
    std::istringstream s(line);
    std::string id, year, wy, wz, yv, zv;
    std::getline(s, id, ',');
    std::getline(s, year, ',');
    std::getline(s, wy, ',');
    std::getline(s, wz, ',');
    std::getline(s, yv, ',');
    std::getline(s, zv, ',');
    EXPECT_NEAR(std::stod(yv), 5.0 + std::stod(wy), 1e-12);
    ++rows;
  }
  EXPECT_EQ(rows, 20);
}

TEST_F(CliTest, HtAndVariogram) {
  simulated_data();
  const auto cfg = write("ht.toml", "data = \"plots.csv\"\n[ht]\ncycles = [{ label = \"c1\", start = 2001.0, "
                                    "end = 2011.0 }, { label = \"c2\", start = 2011.0, end = 2021.0 }]\n"
                                    "[variogram]\nspace_bins = 3\ntime_bins = 2\n");
  const auto h = run("ht", cfg);
  ASSERT_EQ(h.code, 0) << h.err;
  EXPECT_EQ(lines(h.dir / "ht.csv"), 3u);
  const auto v = run("variogram", cfg);
  ASSERT_EQ(v.code, 0) << v.err;
  EXPECT_EQ(lines(v.dir / "variogram.csv"), 7u);
  const auto manifest = toml::parse_file((v.dir / "manifest.toml").string());
  EXPECT_EQ(manifest["run"]["space_edges"].as_array()->size(), 4u);
  EXPECT_EQ(manifest["run"]["time_edges"].as_array()->size(), 3u);
}

TEST_F(CliTest, ExitCodes) {
  const auto bad = write("bad.toml", "[mcmc]\nitertions = 4\n");
  auto o = run("simulate", bad);
  EXPECT_EQ(o.code, kExitValidation);
  EXPECT_NE(o.err.find("itertions"), std::string::npos);

  const auto missing = write("missing.toml", "data = \"nowhere.csv\"\n");
  EXPECT_EQ(run("ht", missing).code, kExitValidation);
  EXPECT_EQ(run("variogram", missing).code, kExitIo);
  EXPECT_EQ(run("simulate", root_ / "absent.toml").code, kExitIo);
  EXPECT_EQ(run(std::vector<std::string>{"fit", "--config", bad.string(), "--stage", "q"}).code, kExitValidation);
  EXPECT_EQ(run(std::vector<std::string>{"bogus"}).code, kExitValidation);
}

}  // namespace
}  // namespace stlgm
