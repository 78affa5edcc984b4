#include <cmath>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "stlgm/data_model.hpp"
#include "stlgm/error.hpp"

namespace stlgm {
namespace {

TEST(PlotTable, ParsesDecimalYearRow) {
  std::istringstream in("plot_id,x_km,y_km,year,agbd_mg_ha\np1,10.0,20.0,2002.5,150.0\n");
  const auto rows = parse_plot_table(in);
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].plot_id, "p1");
  EXPECT_EQ(rows[0].coord.x, 10.0);
  EXPECT_EQ(rows[0].coord.y, 20.0);
  EXPECT_EQ(rows[0].coord.t, 2002.5);
  EXPECT_EQ(rows[0].agbd, 150.0);
}

TEST(PlotTable, ConvertsIsoDates) {
  std::istringstream in("plot_id,x_km,y_km,date,agbd_mg_ha\np1,0,0,2002-01-15,3\n");
  const auto rows = parse_plot_table(in);
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].coord.t, 2002 + 15 / 365.25);
  EXPECT_NEAR(rows[0].coord.t, 2002.04107, 1e-5);
}

TEST(PlotTable, RejectsNegativeBiomassWithRowIndex) {
  std::istringstream in("plot_id,x_km,y_km,year,agbd_mg_ha\np1,0,0,2001,1\np2,0,1,2001,-1\n");
  try {
    parse_plot_table(in);
    FAIL() << "expected a validation error";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("row 2"), std::string::npos) << e.what();
  }
}

TEST(PlotTable, MissingColumnIsNamed) {
  std::istringstream in("plot_id,x_km,year,agbd_mg_ha\np1,0,2001,1\n");
  try {
    parse_plot_table(in);
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("y_km"), std::string::npos);
  }
}

TEST(PlotTable, RejectsNonFiniteAndDuplicates) {
  std::istringstream bad("plot_id,x_km,y_km,year,agbd_mg_ha\np1,nan,0,2001,1\n");
  EXPECT_THROW(parse_plot_table(bad), ValidationError);
  std::istringstream dup("plot_id,x_km,y_km,year,agbd_mg_ha\np1,0,0,2001,1\np1,0,0,2001,2\n");
  EXPECT_THROW(parse_plot_table(dup), ValidationError);
  std::istringstream moved("plot_id,x_km,y_km,year,agbd_mg_ha\np1,0,0,2001,1\np1,0,5,2011,2\n");
  EXPECT_THROW(parse_plot_table(moved), ValidationError);
}

TEST(PlotTable, WriteThenParseReproducesRows) {
  std::vector<PlotMeasurement> rows{{"a", {1.25, -3.5, 2001.123456789}, 0.0},
                                    {"b,quoted", {0.1, 0.2, 2010.5}, 123.456}};
  std::ostringstream out;
  write_plot_table(out, rows);
  std::istringstream in(out.str());
  const auto back = parse_plot_table(in);
  ASSERT_EQ(back.size(), 2u);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(back[i].plot_id, rows[i].plot_id);
    EXPECT_EQ(back[i].coord, rows[i].coord);
    EXPECT_EQ(back[i].agbd, rows[i].agbd);
  }
}

TEST(DecimalYear, DayOfYearConvention) {
  EXPECT_EQ(to_decimal_year({2002, 1, 15}), 2002 + 15 / 365.25);
  EXPECT_EQ(to_decimal_year({2000, 1, 1}), 2000 + 1 / 365.25);
  // 2001 is not a leap year: December 31 is day 365.
  EXPECT_EQ(to_decimal_year({2001, 12, 31}), 2001 + 365 / 365.25);
  EXPECT_EQ(to_decimal_year({2004, 12, 31}), 2004 + 366 / 365.25);
}

TEST(DecimalYear, InvalidDatesThrow) {
  EXPECT_THROW(parse_iso_date("2001-02-29"), ValidationError);
  EXPECT_THROW(parse_iso_date("2001-13-01"), ValidationError);
  EXPECT_THROW(parse_iso_date("20010101"), ValidationError);
  EXPECT_NO_THROW(parse_iso_date("2000-02-29"));
}

TEST(DecimalYear, StrictlyMonotoneOverCalendar) {
  double prev = -1.0;
  for (int year = 1999; year <= 2005; ++year) {
    for (int month = 1; month <= 12; ++month) {
      for (int day = 1; day <= 31; ++day) {
        double t;
        try {
          t = to_decimal_year({year, month, day});
        } catch (const ValidationError&) {
          continue;
        }
        EXPECT_GT(t, prev);
        prev = t;
      }
    }
  }
}

TEST(RootTransform, ForwardAndClampedInverse) {
  const RootTransform cube(3), square(2);
  EXPECT_EQ(cube.forward(8.0), 2.0);
  EXPECT_EQ(inverse_transform(2.0, cube), 8.0);
  EXPECT_EQ(inverse_transform(-0.1, square), 0.0);
  EXPECT_EQ(inverse_transform(3.0, square), 9.0);
  EXPECT_NEAR(cube.forward(170.0), 5.5397, 1e-4);
  EXPECT_THROW(RootTransform(0), ValidationError);
}

TEST(RootTransform, RoundTripProperty) {
  std::mt19937_64 rng(7);
  std::lognormal_distribution<double> b(3.0, 2.0);
  for (int r = 1; r <= 5; ++r) {
    const RootTransform g(r);
    for (int k = 0; k < 2000; ++k) {
      const double v = b(rng);
      EXPECT_NEAR(g.inverse(g.forward(v)), v, 1e-12 * v);
      const double y = std::abs(b(rng));
      EXPECT_NEAR(g.forward(g.inverse(y)), y, 1e-12 * std::max(1.0, y));
    }
  }
}

TEST(SplitObservations, PartitionsByForestStatus) {
  std::vector<PlotMeasurement> m{{"a", {0, 0, 2001}, 0.0}, {"b", {1, 0, 2001}, 8.0}};
  const auto sets = split_observations(m, RootTransform(3));
  ASSERT_EQ(sets.binary.size(), 2u);
  EXPECT_EQ(sets.binary.values[0], 0.0);
  EXPECT_EQ(sets.binary.values[1], 1.0);
  ASSERT_EQ(sets.continuous.size(), 1u);
  EXPECT_EQ(sets.continuous.values[0], 2.0);
  EXPECT_EQ(sets.forested_rows, std::vector<std::size_t>{1});
}

TEST(SplitObservations, AllZeroGivesEmptyContinuousSet) {
  std::vector<PlotMeasurement> m{{"a", {0, 0, 2001}, 0.0}, {"b", {1, 0, 2001}, 0.0}};
  const auto sets = split_observations(m, RootTransform(2));
  EXPECT_EQ(sets.binary.size(), 2u);
  EXPECT_EQ(sets.continuous.size(), 0u);
}

TEST(SplitObservations, SizesMatchCountsOnRandomData) {
  std::mt19937_64 rng(3);
  std::bernoulli_distribution forest(0.7);
  std::vector<PlotMeasurement> m;
  std::size_t positive = 0;
  for (int i = 0; i < 500; ++i) {
    const double agbd = forest(rng) ? 1.0 + i : 0.0;
    positive += agbd > 0;
    m.push_back({"p" + std::to_string(i), {double(i), 0.0, 2001.0}, agbd});
  }
  const auto sets = split_observations(m, RootTransform(3));
  EXPECT_EQ(sets.binary.size(), m.size());
  EXPECT_EQ(sets.continuous.size(), positive);
}

}  // namespace
}  // namespace stlgm
