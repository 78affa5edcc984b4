#include "stlgm/nngp.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numbers>
#include <numeric>
#include <ostream>
#include <string>

#include <Eigen/Cholesky>

#include "stlgm/error.hpp"
#include "stlgm/neighbor_index.hpp"
#include "stlgm/parallel.hpp"

namespace stlgm {

std::vector<std::size_t> order_points(std::span<const SpaceTimeCoord> coords) {
  std::vector<std::size_t> order(coords.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto& ca = coords[a];
    const auto& cb = coords[b];
    if (ca.t != cb.t) return ca.t < cb.t;
    if (ca.x != cb.x) return ca.x < cb.x;
    if (ca.y != cb.y) return ca.y < cb.y;
    return a < b;
  });
  return order;
}

Eigen::VectorXd NngpGraph::to_ordered(const Eigen::VectorXd& original) const {
  Eigen::VectorXd out(original.size());
  for (std::size_t k = 0; k < order.size(); ++k) {
    out[static_cast<Eigen::Index>(k)] = original[static_cast<Eigen::Index>(order[k])];
  }
  return out;
}

Eigen::VectorXd NngpGraph::to_original(const Eigen::VectorXd& ordered) const {
  Eigen::VectorXd out(ordered.size());
  for (std::size_t k = 0; k < order.size(); ++k) {
    out[static_cast<Eigen::Index>(order[k])] = ordered[static_cast<Eigen::Index>(k)];
  }
  return out;
}

NngpGraph build_graph(std::span<const SpaceTimeCoord> coords, std::size_t m) {
  if (m < 1) throw ValidationError("neighbor count m must be at least 1");
  if (coords.empty()) throw ValidationError("cannot build a neighbor graph over zero points");
  NngpGraph g;
  g.m = m;
  g.order = order_points(coords);
  const std::size_t n = coords.size();
  g.rank.resize(n);
  g.ordered_coords.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    g.rank[g.order[k]] = k;
    g.ordered_coords.push_back(coords[g.order[k]]);
  }
  g.neighbors.resize(n);
  if (n < kBruteForceBelow) {
    for (std::size_t i = 0; i < n; ++i) {
      g.neighbors[i] = nearest_brute_force(g.ordered_coords, g.ordered_coords[i], m, i);
    }
  } else {
    const NeighborIndex index(g.ordered_coords);
    for (std::size_t i = 0; i < n; ++i) {
      g.neighbors[i] = index.nearest(g.ordered_coords[i], m, i);
    }
  }
  compute_lags(g);
  return g;
}

void compute_lags(NngpGraph& graph) {
  const std::size_t n = graph.size();
  graph.lags.assign(n, {});
  for (std::size_t i = 0; i < n; ++i) {
    const auto& nb = graph.neighbors[i];
    const auto& target = graph.ordered_coords[i];
    auto& out = graph.lags[i];
    out.reserve(nb.size() * (nb.size() + 1) / 2);
    for (auto j : nb) {
      const auto& c = graph.ordered_coords[j];
      out.push_back({spatial_distance(target, c), temporal_distance(target, c)});
    }
    for (std::size_t a = 0; a < nb.size(); ++a) {
      const auto& ca = graph.ordered_coords[nb[a]];
      for (std::size_t b = 0; b < a; ++b) {
        const auto& cb = graph.ordered_coords[nb[b]];
        out.push_back({spatial_distance(ca, cb), temporal_distance(ca, cb)});
      }
    }
  }
}

namespace {

constexpr char kGraphMagic[8] = {'S', 'T', 'N', 'N', 'G', 'R', 'F', '1'};

void put_u64(std::ostream& out, std::uint64_t v) {
  unsigned char b[8];
  for (int k = 0; k < 8; ++k) b[k] = static_cast<unsigned char>(v >> (8 * k));
  out.write(reinterpret_cast<const char*>(b), 8);
}

std::uint64_t get_u64(std::istream& in) {
  unsigned char b[8];
  if (!in.read(reinterpret_cast<char*>(b), 8)) throw IoError("truncated graph file");
  std::uint64_t v = 0;
  for (int k = 0; k < 8; ++k) v |= static_cast<std::uint64_t>(b[k]) << (8 * k);
  return v;
}

}  // namespace

void write_graph(std::ostream& out, const NngpGraph& graph) {
  out.write(kGraphMagic, 8);
  put_u64(out, graph.size());
  put_u64(out, graph.m);
  for (auto o : graph.order) put_u64(out, o);
  for (const auto& nb : graph.neighbors) {
    put_u64(out, nb.size());
    for (auto j : nb) put_u64(out, j);
  }
}

NngpGraph read_graph(std::istream& in) {
  char magic[8];
  if (!in.read(magic, 8) || !std::equal(magic, magic + 8, kGraphMagic)) {
    throw IoError("not a graph dump (bad magic)");
  }
  NngpGraph g;
  const auto n = get_u64(in);
  g.m = get_u64(in);
  g.order.resize(n);
  g.rank.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    g.order[k] = get_u64(in);
    if (g.order[k] >= n) throw IoError("graph dump has an out-of-range index");
    g.rank[g.order[k]] = k;
  }
  g.neighbors.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto k = get_u64(in);
    if (k > i) throw IoError("graph dump has a non-predecessor neighbor");
    for (std::uint64_t j = 0; j < k; ++j) g.neighbors[i].push_back(get_u64(in));
  }
  return g;
}

KrigingResult krige(const CovarianceParams& theta, const SpaceTimeCoord& target,
                    std::span<const SpaceTimeCoord> conditioning, bool jitter_target) {
  const auto k = static_cast<Eigen::Index>(conditioning.size());
  const double sill = theta.sill();
  KrigingResult res;
  if (k == 0) {
    res.cond_var = sill;
    return res;
  }
  Eigen::MatrixXd knn(k, k);
  Eigen::VectorXd kin(k);
  for (Eigen::Index a = 0; a < k; ++a) {
    const auto& ca = conditioning[static_cast<std::size_t>(a)];
    knn(a, a) = sill;
    kin[a] = cov_value_unchecked(theta, spatial_distance(target, ca), temporal_distance(target, ca));
    for (Eigen::Index b = 0; b < a; ++b) {
      const auto& cb = conditioning[static_cast<std::size_t>(b)];
      knn(a, b) = knn(b, a) =
          cov_value_unchecked(theta, spatial_distance(ca, cb), temporal_distance(ca, cb));
    }
  }
  const double floor = 1e-13 * sill;
  {
    Eigen::LLT<Eigen::MatrixXd> llt(knn);
    if (llt.info() == Eigen::Success) {
      res.weights = llt.solve(kin);
      res.cond_var = sill - kin.dot(res.weights);
      if (!jitter_target) {
        res.cond_var = std::max(res.cond_var, 0.0);
        return res;
      }
      if (res.cond_var > floor) return res;
    }
  }
  const double jitter = kJitterFraction * sill;
  knn.diagonal().array() += jitter;
  Eigen::LLT<Eigen::MatrixXd> llt(knn);
  if (llt.info() != Eigen::Success) {
    res.ok = false;
    return res;
  }
  res.weights = llt.solve(kin);
  res.cond_var = sill + (jitter_target ? jitter : 0.0) - kin.dot(res.weights);
  if (jitter_target) {
    res.ok = res.cond_var > floor;
  } else {
    res.cond_var = std::max(res.cond_var, 0.0);
  }
  return res;
}

namespace {

struct KernelTerm {
  double var, inv_phi, inv_lambda;
};

double kernel(const std::vector<KernelTerm>& terms, const LagPair& lag) {
  double k = 0.0;
  for (const auto& c : terms) k += c.var * std::exp(-lag.ds * c.inv_phi - lag.dt * c.inv_lambda);
  return k;
}

// Kriging from cached lags; same contract as krige(..., jitter_target = true).
bool krige_cached(const std::vector<KernelTerm>& terms, double sill,
                  const std::vector<LagPair>& lags, std::size_t k, Eigen::MatrixXd& knn,
                  Eigen::VectorXd& kin, Eigen::VectorXd& weights, double& cond_var) {
  if (k == 0) {
    cond_var = sill;
    return true;
  }
  const auto kk = static_cast<Eigen::Index>(k);
  knn.resize(kk, kk);
  kin.resize(kk);
  std::size_t slot = 0;
  for (Eigen::Index a = 0; a < kk; ++a) kin[a] = kernel(terms, lags[slot++]);
  for (Eigen::Index a = 0; a < kk; ++a) {
    knn(a, a) = sill;
    for (Eigen::Index b = 0; b < a; ++b) knn(a, b) = knn(b, a) = kernel(terms, lags[slot++]);
  }
  const double floor = 1e-13 * sill;
  Eigen::LLT<Eigen::MatrixXd> llt(knn);
  if (llt.info() == Eigen::Success) {
    weights = llt.solve(kin);
    cond_var = sill - kin.dot(weights);
    if (cond_var > floor) return true;
  }
  const double jitter = kJitterFraction * sill;
  knn.diagonal().array() += jitter;
  llt.compute(knn);
  if (llt.info() != Eigen::Success) return false;
  weights = llt.solve(kin);
  cond_var = sill + jitter - kin.dot(weights);
  return cond_var > floor;
}

}  // namespace

VecchiaFactors vecchia_factors(const NngpGraph& graph, const CovarianceParams& theta,
                               unsigned threads) {
  theta.validate();
  const std::size_t n = graph.size();
  if (graph.lags.size() != n) {
    NngpGraph copy = graph;
    compute_lags(copy);
    return vecchia_factors(copy, theta, threads);
  }
  std::vector<KernelTerm> terms;
  for (const auto& c : theta.components) terms.push_back({c.sigma * c.sigma, 1.0 / c.phi, 1.0 / c.lambda});
  const double sill = theta.sill();
  VecchiaFactors f;
  f.weights.resize(n);
  f.cond_var.resize(static_cast<Eigen::Index>(n));
  std::vector<char> failed(n, 0);
  const std::size_t chunk = 256;
  const std::size_t chunks = (n + chunk - 1) / chunk;
  parallel_for(chunks, threads, [&](std::size_t c) {
    Eigen::MatrixXd knn;
    Eigen::VectorXd kin, weights;
    for (std::size_t i = c * chunk; i < std::min(n, (c + 1) * chunk); ++i) {
      double cond_var = 0.0;
      const std::size_t k = graph.neighbors[i].size();
      if (!krige_cached(terms, sill, graph.lags[i], k, knn, kin, weights, cond_var)) {
        failed[i] = 1;
        continue;
      }
      f.weights[i].assign(weights.data(), weights.data() + k);
      f.cond_var[static_cast<Eigen::Index>(i)] = cond_var;
    }
  });
  for (std::size_t i = 0; i < n; ++i) {
    if (failed[i]) {
      throw NumericalError("nonpositive conditional variance at ordered point " + std::to_string(i) +
                           " (original index " + std::to_string(graph.order[i]) + ") after jitter");
    }
  }
  return f;
}

double SparsePrecision::log_det() const { return -F.array().log().sum(); }

double SparsePrecision::quad_form(const Eigen::VectorXd& w) const { return w.dot(Q * w); }

PrecisionAssembler::PrecisionAssembler(const NngpGraph& graph, bool with_intercept)
    : n_(graph.size()), with_intercept_(with_intercept) {
  const auto dim = static_cast<Eigen::Index>(n_ + (with_intercept ? 1 : 0));
  std::vector<Eigen::Triplet<double>> trip;
  std::vector<std::pair<Eigen::Index, Eigen::Index>> contrib;
  for (std::size_t i = 0; i < n_; ++i) {
    std::vector<Eigen::Index> idx{static_cast<Eigen::Index>(i)};
    for (auto j : graph.neighbors[i]) idx.push_back(static_cast<Eigen::Index>(j));
    for (auto r : idx) {
      for (auto c : idx) contrib.emplace_back(r, c);
    }
  }
  trip.reserve(contrib.size() + 2 * n_ + 1);
  for (auto [r, c] : contrib) trip.emplace_back(r, c, 0.0);
  if (with_intercept) {
    const auto a = static_cast<Eigen::Index>(n_);
    for (Eigen::Index i = 0; i <= a; ++i) {
      trip.emplace_back(a, i, 0.0);
      if (i < a) trip.emplace_back(i, a, 0.0);
    }
  }
  pattern_.resize(dim, dim);
  pattern_.setFromTriplets(trip.begin(), trip.end());
  pattern_.makeCompressed();

  auto slot = [&](Eigen::Index r, Eigen::Index c) {
    const auto* outer = pattern_.outerIndexPtr();
    const auto* inner = pattern_.innerIndexPtr();
    const auto* first = inner + outer[c];
    const auto* last = inner + outer[c + 1];
    const auto* it = std::lower_bound(first, last, static_cast<int>(r));
    return static_cast<Eigen::Index>(it - inner);
  };
  contribution_slots_.reserve(contrib.size());
  for (auto [r, c] : contrib) contribution_slots_.push_back(slot(r, c));
  for (Eigen::Index i = 0; i < dim; ++i) diag_slots_.push_back(slot(i, i));
  if (with_intercept) {
    const auto a = static_cast<Eigen::Index>(n_);
    for (Eigen::Index i = 0; i < a; ++i) {
      col_slots_.push_back(slot(i, a));
      row_slots_.push_back(slot(a, i));
    }
  }
}

void PrecisionAssembler::fill(const VecchiaFactors& factors, Eigen::SparseMatrix<double>& out) const {
  double* values = out.valuePtr();
  std::fill(values, values + out.nonZeros(), 0.0);
  std::size_t s = 0;
  std::vector<double> a;
  for (std::size_t i = 0; i < n_; ++i) {
    const auto& w = factors.weights[i];
    a.assign(1, 1.0);
    for (double b : w) a.push_back(-b);
    const double inv_f = 1.0 / factors.cond_var[static_cast<Eigen::Index>(i)];
    for (double ar : a) {
      const double scale = ar * inv_f;
      for (double ac : a) values[contribution_slots_[s++]] += scale * ac;
    }
  }
}

SparsePrecision build_precision(const NngpGraph& graph, const CovarianceParams& theta,
                                unsigned threads) {
  const auto factors = vecchia_factors(graph, theta, threads);
  const auto n = static_cast<Eigen::Index>(graph.size());
  SparsePrecision p;
  p.F = factors.cond_var;
  std::vector<Eigen::Triplet<double>> trip;
  for (std::size_t i = 0; i < graph.size(); ++i) {
    for (std::size_t k = 0; k < graph.neighbors[i].size(); ++k) {
      trip.emplace_back(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(graph.neighbors[i][k]),
                        factors.weights[i][k]);
    }
  }
  p.B.resize(n, n);
  p.B.setFromTriplets(trip.begin(), trip.end());
  PrecisionAssembler assembler(graph, false);
  p.Q = assembler.pattern();
  assembler.fill(factors, p.Q);
  return p;
}

double vecchia_log_density(const Eigen::VectorXd& w, const SparsePrecision& precision) {
  if (static_cast<std::size_t>(w.size()) != precision.size()) {
    throw ValidationError("vecchia_log_density: w has length " + std::to_string(w.size()) +
                          ", precision has dimension " + std::to_string(precision.size()));
  }
  const double n = static_cast<double>(w.size());
  return -0.5 * (n * std::log(2.0 * std::numbers::pi) - precision.log_det() + precision.quad_form(w));
}

double vecchia_log_density(const Eigen::VectorXd& w, const NngpGraph& graph,
                           const VecchiaFactors& factors) {
  if (static_cast<std::size_t>(w.size()) != graph.size()) {
    throw ValidationError("vecchia_log_density: dimension mismatch");
  }
  double quad = 0.0;
  double log_f = 0.0;
  for (std::size_t i = 0; i < graph.size(); ++i) {
    double mean = 0.0;
    const auto& nb = graph.neighbors[i];
    for (std::size_t k = 0; k < nb.size(); ++k) {
      mean += factors.weights[i][k] * w[static_cast<Eigen::Index>(nb[k])];
    }
    const double f = factors.cond_var[static_cast<Eigen::Index>(i)];
    const double r = w[static_cast<Eigen::Index>(i)] - mean;
    quad += r * r / f;
    log_f += std::log(f);
  }
  const double n = static_cast<double>(graph.size());
  return -0.5 * (n * std::log(2.0 * std::numbers::pi) + log_f + quad);
}

std::vector<std::vector<std::size_t>> prediction_neighbors(std::span<const SpaceTimeCoord> observed,
                                                           std::span<const SpaceTimeCoord> predict,
                                                           std::size_t m) {
  if (observed.empty()) throw ValidationError("prediction needs at least one observed point");
  if (m < 1) throw ValidationError("neighbor count m must be at least 1");
  std::vector<std::vector<std::size_t>> out(predict.size());
  if (observed.size() < kBruteForceBelow) {
    for (std::size_t p = 0; p < predict.size(); ++p) {
      out[p] = nearest_brute_force(observed, predict[p], m, observed.size());
    }
  } else {
    const NeighborIndex index(observed);
    for (std::size_t p = 0; p < predict.size(); ++p) {
      out[p] = index.nearest(predict[p], m, observed.size());
    }
  }
  return out;
}

PredictionProjection build_projection(std::span<const SpaceTimeCoord> observed,
                                      std::span<const SpaceTimeCoord> predict,
                                      const std::vector<std::vector<std::size_t>>& neighbors,
                                      const CovarianceParams& theta) {
  theta.validate();
  if (observed.empty()) throw ValidationError("prediction needs at least one observed point");
  if (neighbors.size() != predict.size()) {
    throw ValidationError("prediction neighbor sets do not match the prediction points");
  }
  PredictionProjection proj;
  proj.F.resize(static_cast<Eigen::Index>(predict.size()));
  std::vector<Eigen::Triplet<double>> trip;
  std::vector<SpaceTimeCoord> cond;
  for (std::size_t p = 0; p < predict.size(); ++p) {
    cond.clear();
    for (auto j : neighbors[p]) cond.push_back(observed[j]);
    const auto r = krige(theta, predict[p], cond, false);
    if (!r.ok) {
      throw NumericalError("singular neighbor covariance for prediction point " + std::to_string(p));
    }
    for (std::size_t k = 0; k < neighbors[p].size(); ++k) {
      trip.emplace_back(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(neighbors[p][k]),
                        r.weights[static_cast<Eigen::Index>(k)]);
    }
    proj.F[static_cast<Eigen::Index>(p)] = r.cond_var;
  }
  proj.B.resize(static_cast<Eigen::Index>(predict.size()), static_cast<Eigen::Index>(observed.size()));
  proj.B.setFromTriplets(trip.begin(), trip.end());
  return proj;
}

PredictionProjection build_projection(std::span<const SpaceTimeCoord> observed,
                                      std::span<const SpaceTimeCoord> predict,
                                      const CovarianceParams& theta, std::size_t m) {
  return build_projection(observed, predict, prediction_neighbors(observed, predict, m), theta);
}

Eigen::VectorXd sample_predictive_field(const PredictionProjection& projection,
                                        const Eigen::VectorXd& w_observed, Rng& rng) {
  if (projection.B.cols() != w_observed.size()) {
    throw ValidationError("sample_predictive_field: w_O length does not match the projection");
  }
  Eigen::VectorXd w = projection.B * w_observed;
  for (Eigen::Index p = 0; p < w.size(); ++p) {
    w[p] += std::sqrt(projection.F[p]) * standard_normal(rng);
  }
  return w;
}

}  // namespace stlgm
