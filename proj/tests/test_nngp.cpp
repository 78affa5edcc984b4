#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include <Eigen/Dense>
#include <gtest/gtest.h>

#include "stlgm/error.hpp"
#include "stlgm/neighbor_index.hpp"
#include "stlgm/nngp.hpp"
#include "support/oracles.hpp"

namespace stlgm {
namespace {

Eigen::MatrixXd permute_cov(const Eigen::MatrixXd& k, const std::vector<std::size_t>& order) {
  const auto n = static_cast<Eigen::Index>(order.size());
  Eigen::MatrixXd out(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) out(i, j) = k(order[i], order[j]);
  }
  return out;
}

TEST(Ordering, TimeThenXThenYThenIndex) {
  const std::vector<SpaceTimeCoord> c{{5, 0, 2003}, {1, 0, 2001}, {1, -1, 2001}, {0, 9, 2001}, {1, -1, 2001}};
  const auto order = order_points(c);
  EXPECT_EQ(order, (std::vector<std::size_t>{3, 2, 4, 1, 0}));
}

TEST(Ordering, IsAPermutation) {
  std::mt19937_64 rng(4);
  auto c = testing::random_coords(300, rng);
  auto order = order_points(c);
  for (std::size_t k = 1; k < order.size(); ++k) {
    EXPECT_LE(c[order[k - 1]].t, c[order[k]].t);
  }
  std::sort(order.begin(), order.end());
  for (std::size_t k = 0; k < order.size(); ++k) EXPECT_EQ(order[k], k);
}

TEST(NeighborIndex, MatchesBruteForce) {
  std::mt19937_64 rng(21);
  for (std::size_t n : {1u, 7u, 50u, 333u, 500u}) {
    auto pts = testing::random_coords(n, rng, 10.0);
    // force exact spatial ties to exercise the secondary keys
    for (std::size_t i = 3; i < n; i += 5) {
      pts[i].x = pts[i - 3].x;
      pts[i].y = pts[i - 3].y;
    }
    const NeighborIndex tree(pts);
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    for (int q = 0; q < 60; ++q) {
      const std::size_t limit = pick(rng) + 1;
      const auto& query = pts[pick(rng)];
      for (std::size_t k : {1u, 4u, 15u, 40u}) {
        EXPECT_EQ(tree.nearest(query, k, limit), nearest_brute_force(pts, query, k, limit))
            << "n=" << n << " k=" << k << " limit=" << limit;
      }
    }
  }
}

TEST(Graph, NeighborsArePredecessorsAndSized) {
  std::mt19937_64 rng(2);
  const auto coords = testing::random_coords(450, rng);
  const auto g = build_graph(coords, 10);
  ASSERT_EQ(g.size(), coords.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    EXPECT_EQ(g.neighbors[i].size(), std::min<std::size_t>(i, 10));
    for (auto j : g.neighbors[i]) EXPECT_LT(j, i);
    EXPECT_EQ(g.ordered_coords[i], coords[g.order[i]]);
    EXPECT_EQ(g.rank[g.order[i]], i);
  }
  // tree path (n >= 200) agrees with the linear scan
  for (std::size_t i = 0; i < g.size(); ++i) {
    EXPECT_EQ(g.neighbors[i], nearest_brute_force(g.ordered_coords, g.ordered_coords[i], 10, i));
  }
}

TEST(Graph, PermutationHelpersRoundTrip) {
  std::mt19937_64 rng(8);
  const auto coords = testing::random_coords(40, rng);
  const auto g = build_graph(coords, 5);
  const Eigen::VectorXd v = Eigen::VectorXd::LinSpaced(40, 0.0, 39.0);
  EXPECT_EQ(g.to_original(g.to_ordered(v)), v);
  EXPECT_EQ(g.to_ordered(v)[0], static_cast<double>(g.order[0]));
}

TEST(Graph, BinaryRoundTrip) {
  std::mt19937_64 rng(12);
  const auto g = build_graph(testing::random_coords(60, rng), 6);
  std::stringstream buf;
  write_graph(buf, g);
  const auto back = read_graph(buf);
  EXPECT_EQ(back.order, g.order);
  EXPECT_EQ(back.neighbors, g.neighbors);
  EXPECT_EQ(back.m, g.m);
  std::stringstream bad("garbage");
  EXPECT_THROW(read_graph(bad), IoError);
}

TEST(Vecchia, ExactWhenConditioningOnAllPredecessors) {
  std::mt19937_64 rng(31);
  for (int rep = 0; rep < 6; ++rep) {
    const std::size_t n = 25 + 5 * rep;
    const auto coords = testing::random_coords(n, rng);
    const auto theta = testing::random_theta(1 + rep % 2, rng);
    const auto g = build_graph(coords, n - 1);
    const auto prec = build_precision(g, theta);
    const Eigen::MatrixXd k = permute_cov(testing::dense_cov(theta, coords, coords), g.order);
    const Eigen::MatrixXd kinv = k.inverse();
    const Eigen::MatrixXd q = Eigen::MatrixXd(prec.Q);
    EXPECT_LT((q - kinv).cwiseAbs().maxCoeff() / kinv.cwiseAbs().maxCoeff(), 1e-8);

    Eigen::VectorXd w(n);
    for (auto& v : w) v = std::normal_distribution<double>()(rng);
    const double ref = testing::dense_mvn_log_density(w, Eigen::VectorXd::Zero(n), k);
    EXPECT_NEAR(vecchia_log_density(w, prec), ref, 1e-8 * std::abs(ref));
    EXPECT_NEAR(vecchia_log_density(w, g, vecchia_factors(g, theta)), ref, 1e-8 * std::abs(ref));
  }
}

TEST(Vecchia, PrecisionIsSymmetricPositiveDefinite) {
  std::mt19937_64 rng(41);
  const auto coords = testing::random_coords(300, rng, 30.0);
  const auto g = build_graph(coords, 8);
  const auto prec = build_precision(g, testing::two_scale_theta());
  const Eigen::MatrixXd q(prec.Q);
  EXPECT_LT((q - q.transpose()).cwiseAbs().maxCoeff(), 1e-10 * q.cwiseAbs().maxCoeff());
  Eigen::LLT<Eigen::MatrixXd> llt(q);
  EXPECT_EQ(llt.info(), Eigen::Success);
  // log det via the dense factor matches -sum log F
  const double log_det = 2.0 * Eigen::MatrixXd(llt.matrixL()).diagonal().array().log().sum();
  EXPECT_NEAR(prec.log_det(), log_det, 1e-8 * std::abs(log_det));
  for (Eigen::Index i = 0; i < prec.F.size(); ++i) EXPECT_GT(prec.F[i], 0.0);
}

TEST(Vecchia, TwoFormsOfTheDensityAgree) {
  std::mt19937_64 rng(43);
  const auto coords = testing::random_coords(250, rng, 30.0);
  const auto theta = testing::random_theta(2, rng);
  const auto g = build_graph(coords, 7);
  const auto prec = build_precision(g, theta);
  Eigen::VectorXd w(250);
  for (auto& v : w) v = std::normal_distribution<double>()(rng);
  const double a = vecchia_log_density(w, prec);
  EXPECT_NEAR(a, vecchia_log_density(w, g, vecchia_factors(g, theta)), 1e-9 * std::abs(a));
}

TEST(Vecchia, DuplicateLocationsAreJitteredNotFatal) {
  std::vector<SpaceTimeCoord> c{{0, 0, 2001}, {0, 0, 2001}, {0, 0, 2001}, {1, 1, 2002}};
  const auto g = build_graph(c, 3);
  const auto f = vecchia_factors(g, testing::two_scale_theta());
  for (Eigen::Index i = 0; i < f.cond_var.size(); ++i) EXPECT_GT(f.cond_var[i], 0.0);
}

TEST(Vecchia, FactorsIndependentOfThreadCount) {
  std::mt19937_64 rng(44);
  const auto g = build_graph(testing::random_coords(500, rng, 40.0), 12);
  const auto theta = testing::two_scale_theta();
  const auto a = vecchia_factors(g, theta, 1);
  const auto b = vecchia_factors(g, theta, 4);
  EXPECT_EQ(a.cond_var, b.cond_var);
  EXPECT_EQ(a.weights, b.weights);
}

TEST(Assembler, RefillMatchesDirectPrecision) {
  std::mt19937_64 rng(46);
  const auto g = build_graph(testing::random_coords(220, rng, 25.0), 6);
  PrecisionAssembler with(g, true), without(g, false);
  Eigen::SparseMatrix<double> qa = with.pattern(), qb = without.pattern();
  for (int rep = 0; rep < 3; ++rep) {
    const auto theta = testing::random_theta(2, rng);
    const auto f = vecchia_factors(g, theta);
    with.fill(f, qa);
    without.fill(f, qb);
    const Eigen::MatrixXd ref(build_precision(g, theta).Q);
    const Eigen::MatrixXd da(qa), db(qb);
    EXPECT_LT((db - ref).cwiseAbs().maxCoeff(), 1e-12 * ref.cwiseAbs().maxCoeff());
    EXPECT_LT((da.topLeftCorner(220, 220) - ref).cwiseAbs().maxCoeff(), 1e-12 * ref.cwiseAbs().maxCoeff());
    EXPECT_EQ(da.row(220).cwiseAbs().sum(), 0.0);
  }
  EXPECT_EQ(with.diag_slots().size(), 221u);
  EXPECT_EQ(with.intercept_col_slots().size(), 220u);
}

TEST(Projection, MatchesDenseKriging) {
  std::mt19937_64 rng(51);
  const auto obs = testing::random_coords(120, rng);
  const auto pred = testing::random_coords(15, rng);
  const auto theta = testing::random_theta(2, rng);
  const std::size_t m = 9;
  const auto nb = prediction_neighbors(obs, pred, m);
  const auto proj = build_projection(obs, pred, nb, theta);
  for (std::size_t p = 0; p < pred.size(); ++p) {
    ASSERT_EQ(nb[p].size(), m);
    EXPECT_EQ(nb[p], nearest_brute_force(obs, pred[p], m, obs.size()));
    std::vector<SpaceTimeCoord> cond;
    for (auto j : nb[p]) cond.push_back(obs[j]);
    const Eigen::MatrixXd knn = testing::dense_cov(theta, cond, cond);
    const Eigen::VectorXd k = testing::dense_cov(theta, cond, {pred[p]}).col(0);
    const Eigen::VectorXd wts = knn.ldlt().solve(k);
    const double var = testing::brute_cov(theta, pred[p], pred[p]) - k.dot(wts);
    for (std::size_t a = 0; a < m; ++a) {
      EXPECT_NEAR(proj.B.coeff(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(nb[p][a])), wts[a], 1e-9);
    }
    EXPECT_NEAR(proj.F[static_cast<Eigen::Index>(p)], var, 1e-9);
  }
}

TEST(Projection, ZeroVarianceAtObservedPoint) {
  std::mt19937_64 rng(52);
  const auto obs = testing::random_coords(30, rng);
  const std::vector<SpaceTimeCoord> pred{obs[7]};
  const auto proj = build_projection(obs, pred, testing::two_scale_theta(), 5);
  EXPECT_NEAR(proj.F[0], 0.0, 1e-10);
  EXPECT_NEAR(proj.B.coeff(0, 7), 1.0, 1e-8);
}

TEST(Projection, PredictiveDrawMoments) {
  std::mt19937_64 rng(53);
  const auto obs = testing::random_coords(40, rng);
  const auto pred = testing::random_coords(3, rng);
  const auto proj = build_projection(obs, pred, testing::two_scale_theta(), 6);
  Eigen::VectorXd w(40);
  for (auto& v : w) v = std::normal_distribution<double>()(rng);
  const Eigen::VectorXd mean = proj.B * w;
  Rng draw_rng(99);
  const int reps = 20000;
  std::vector<std::vector<double>> draws(3);
  for (int r = 0; r < reps; ++r) {
    const auto d = sample_predictive_field(proj, w, draw_rng);
    for (int p = 0; p < 3; ++p) draws[p].push_back(d[p]);
  }
  for (int p = 0; p < 3; ++p) {
    const auto mo = testing::moments(draws[p]);
    const double sd = std::sqrt(proj.F[p]);
    EXPECT_NEAR(mo.mean, mean[p], 5.0 * sd / std::sqrt(reps) + 1e-12);
    EXPECT_NEAR(mo.var, proj.F[p], 6.0 * proj.F[p] * std::sqrt(2.0 / reps) + 1e-12);
  }
}

}  // namespace
}  // namespace stlgm
