#pragma once

#include <memory>

#include <Eigen/Core>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

#include "stlgm/rng.hpp"

namespace stlgm {

/// Sparse LL^T with AMD fill-reducing ordering, P A P^T = L L^T. The
/// symbolic analysis is done once per sparsity pattern.
class SparseCholesky {
 public:
  using Matrix = Eigen::SparseMatrix<double>;

  SparseCholesky() : llt_(std::make_unique<Llt>()) {}

  void analyze(const Matrix& pattern) {
    llt_->analyzePattern(pattern);
    analyzed_ = true;
  }
  bool analyzed() const { return analyzed_; }

  /// Numeric factorization; false when A is not positive definite.
  bool factorize(const Matrix& a) {
    if (!analyzed_) analyze(a);
    llt_->factorize(a);
    return llt_->info() == Eigen::Success;
  }

  Eigen::VectorXd solve(const Eigen::VectorXd& b) const { return llt_->solve(b); }

  /// x = P^T L^{-T} z, so that Cov(x) = A^{-1} when z is standard normal.
  Eigen::VectorXd transform_standard(const Eigen::VectorXd& z) const {
    Eigen::VectorXd u = llt_->matrixU().solve(z);
    return llt_->permutationPinv() * u;
  }

  Eigen::VectorXd sample_zero_mean(Rng& rng) const {
    Eigen::VectorXd z(llt_->rows());
    for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = standard_normal(rng);
    return transform_standard(z);
  }

  double log_det() const {
    return 2.0 * llt_->matrixL().nestedExpression().diagonal().array().log().sum();
  }

  const Eigen::PermutationMatrix<Eigen::Dynamic, Eigen::Dynamic, int>& permutation() const {
    return llt_->permutationP();
  }

 private:
  using Llt = Eigen::SimplicialLLT<Matrix, Eigen::Lower, Eigen::AMDOrdering<int>>;
  // Eigen's solvers are non-copyable; the indirection makes this movable.
  std::unique_ptr<Llt> llt_;
  bool analyzed_ = false;
};

}  // namespace stlgm
