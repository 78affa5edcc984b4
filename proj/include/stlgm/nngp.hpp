#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "stlgm/covariance.hpp"
#include "stlgm/data_model.hpp"
#include "stlgm/rng.hpp"

namespace stlgm {

/// Vecchia ordering: ascending t, then x, then y, then original index.
/// Returns order[k] = original index of the k-th ordered point.
std::vector<std::size_t> order_points(std::span<const SpaceTimeCoord> coords);

/// Ordered points and their conditioning sets. All indices in `neighbors`
/// refer to ordered positions; each list is sorted best-first.
struct NngpGraph {
  std::vector<SpaceTimeCoord> ordered_coords;
  std::vector<std::size_t> order;  // ordered -> original
  std::vector<std::size_t> rank;   // original -> ordered
  std::vector<std::vector<std::size_t>> neighbors;
  /// Per point: lags to each neighbor, then lags between neighbor pairs
  /// (a, b) with b < a in row order. Depends only on the geometry.
  std::vector<std::vector<LagPair>> lags;
  std::size_t m = 0;

  std::size_t size() const noexcept { return ordered_coords.size(); }

  /// Permute a vector given in original order into graph order and back.
  Eigen::VectorXd to_ordered(const Eigen::VectorXd& original) const;
  Eigen::VectorXd to_original(const Eigen::VectorXd& ordered) const;
};

/// Neighbor sets use the k-d tree; below this size a linear scan is used.
constexpr std::size_t kBruteForceBelow = 200;

NngpGraph build_graph(std::span<const SpaceTimeCoord> coords, std::size_t m);

/// Fills graph.lags from ordered_coords and neighbors.
void compute_lags(NngpGraph& graph);

/// Binary audit dump of ordering and neighbor lists (little-endian u64).
void write_graph(std::ostream& out, const NngpGraph& graph);
NngpGraph read_graph(std::istream& in);

/// Kriging weights for each ordered point on its neighbors (aligned with
/// graph.neighbors[i]) and the conditional variances.
struct VecchiaFactors {
  std::vector<std::vector<double>> weights;
  Eigen::VectorXd cond_var;
};

VecchiaFactors vecchia_factors(const NngpGraph& graph, const CovarianceParams& theta,
                               unsigned threads = 1);

/// Q = (I - B)^T F^{-1} (I - B) over ordered indices.
struct SparsePrecision {
  Eigen::SparseMatrix<double, Eigen::RowMajor> B;
  Eigen::VectorXd F;
  Eigen::SparseMatrix<double> Q;

  std::size_t size() const { return static_cast<std::size_t>(F.size()); }
  /// log det Q = -sum log F.
  double log_det() const;
  double quad_form(const Eigen::VectorXd& w) const;
};

SparsePrecision build_precision(const NngpGraph& graph, const CovarianceParams& theta,
                                unsigned threads = 1);

/// Log density of w (ordered indices) under the Vecchia approximation.
double vecchia_log_density(const Eigen::VectorXd& w, const SparsePrecision& precision);
/// Same quantity computed from the conditional form without assembling Q.
double vecchia_log_density(const Eigen::VectorXd& w, const NngpGraph& graph,
                           const VecchiaFactors& factors);

/// Fixed sparsity pattern of Q, optionally bordered by one dense intercept
/// row/column at index n. Refilling values never changes the pattern, so a
/// symbolic Cholesky analysis can be reused across parameter updates.
class PrecisionAssembler {
 public:
  PrecisionAssembler(const NngpGraph& graph, bool with_intercept);

  const Eigen::SparseMatrix<double>& pattern() const { return pattern_; }
  std::size_t points() const { return n_; }

  /// Overwrites `out` (which must share the pattern) with Q; intercept
  /// entries are zeroed.
  void fill(const VecchiaFactors& factors, Eigen::SparseMatrix<double>& out) const;

  /// Value slots for diagonal entries (i, i), i <= n.
  const std::vector<Eigen::Index>& diag_slots() const { return diag_slots_; }
  /// Value slots for (i, n) and (n, i), i < n.
  const std::vector<Eigen::Index>& intercept_col_slots() const { return col_slots_; }
  const std::vector<Eigen::Index>& intercept_row_slots() const { return row_slots_; }

 private:
  std::size_t n_ = 0;
  bool with_intercept_ = false;
  Eigen::SparseMatrix<double> pattern_;
  std::vector<Eigen::Index> contribution_slots_;
  std::vector<Eigen::Index> diag_slots_, col_slots_, row_slots_;
};

/// Neighbor sets of prediction points among the observed points (original
/// observation indices, best-first).
std::vector<std::vector<std::size_t>> prediction_neighbors(std::span<const SpaceTimeCoord> observed,
                                                           std::span<const SpaceTimeCoord> predict,
                                                           std::size_t m);

/// w_P = B_P w_O + eta_P, eta_P ~ N(0, diag F_P). Columns of B_P index the
/// observations in their original order.
struct PredictionProjection {
  Eigen::SparseMatrix<double, Eigen::RowMajor> B;
  Eigen::VectorXd F;
};

PredictionProjection build_projection(std::span<const SpaceTimeCoord> observed,
                                      std::span<const SpaceTimeCoord> predict,
                                      const std::vector<std::vector<std::size_t>>& neighbors,
                                      const CovarianceParams& theta);

PredictionProjection build_projection(std::span<const SpaceTimeCoord> observed,
                                      std::span<const SpaceTimeCoord> predict,
                                      const CovarianceParams& theta, std::size_t m);

Eigen::VectorXd sample_predictive_field(const PredictionProjection& projection,
                                        const Eigen::VectorXd& w_observed, Rng& rng);

/// Kriging weights of `target` on `conditioning` points and the conditional
/// variance. Falls back to a jittered system when the plain one is singular
/// or yields a nonpositive variance; `ok` is false if that also fails.
struct KrigingResult {
  Eigen::VectorXd weights;
  double cond_var = 0.0;
  bool ok = true;
};

KrigingResult krige(const CovarianceParams& theta, const SpaceTimeCoord& target,
                    std::span<const SpaceTimeCoord> conditioning, bool jitter_target);

}  // namespace stlgm
