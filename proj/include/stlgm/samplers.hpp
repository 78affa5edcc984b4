#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "stlgm/covariance.hpp"
#include "stlgm/data_model.hpp"
#include "stlgm/nngp.hpp"
#include "stlgm/rng.hpp"
#include "stlgm/sparse_cholesky.hpp"

namespace stlgm {

constexpr double kAnnealStart = 1e-3;

struct McmcConfig {
  std::size_t iterations = 2000;
  std::size_t burn_in = 1000;
  std::size_t thin = 1;
  /// w is stored on every w_thin-th retained draw.
  std::size_t w_thin = 1;
  std::size_t m = 25;
  std::uint64_t seed = 1;
  bool adapt = true;
  /// Temper the likelihood during the first half of burn-in, with its
  /// weight rising geometrically from kAnnealStart to 1.
  bool anneal = true;
  double target_acceptance = 0.25;
  /// Initial proposal standard deviation of each log-parameter.
  double initial_step = 0.05;

  void validate() const;
  /// Likelihood weight applied to the Metropolis ratio at iteration `it`.
  double likelihood_weight(std::size_t it) const;
  friend bool operator==(const McmcConfig&, const McmcConfig&) = default;
};

/// Log-scale multivariate normal random-walk proposal. During burn-in the
/// covariance tracks the chain's empirical covariance and a global scale is
/// tuned toward the target acceptance rate; after burn-in it is frozen.
class MhProposal {
 public:
  MhProposal(std::size_t dim, double initial_step, double target_acceptance);

  std::size_t dim() const { return static_cast<std::size_t>(cov_.rows()); }
  const Eigen::MatrixXd& covariance() const { return cov_; }
  Eigen::VectorXd propose(const Eigen::VectorXd& log_params, Rng& rng) const;
  /// Records the post-step state and acceptance probability.
  void adapt(const Eigen::VectorXd& log_params, double accept_prob);
  /// Keeps the current proposal shape as the new base and forgets the
  /// running moments, so early drift stops shaping the covariance.
  void restart();
  void freeze() { frozen_ = true; }
  bool frozen() const { return frozen_; }

 private:
  void refresh();

  Eigen::MatrixXd base_;
  Eigen::MatrixXd cov_;
  Eigen::MatrixXd chol_;
  double log_scale_ = 0.0;
  double target_;
  Eigen::VectorXd mean_;
  Eigen::MatrixXd m2_;
  std::size_t count_ = 0;
  bool frozen_ = false;
};

struct AlphaW {
  double alpha = 0.0;
  Eigen::VectorXd w;
};

/// Gaussian full conditional of [w; alpha] (alpha last) in precision form.
struct GaussianConditional {
  Eigen::SparseMatrix<double> precision;
  Eigen::VectorXd mean;
  SparseCholesky factor;

  AlphaW draw(Rng& rng) const;
  /// Deterministic map from a standard normal vector to a draw.
  AlphaW draw_from(const Eigen::VectorXd& z) const;
};

/// (alpha, w) | y, theta, tau for the normal model. Vectors are in the
/// precision's (graph) order.
GaussianConditional alpha_w_conditional_normal(const Eigen::VectorXd& y, double tau,
                                               const PriorSpec& priors,
                                               const SparsePrecision& precision);
AlphaW sample_alpha_w_normal(const Eigen::VectorXd& y, const CovarianceParams& theta, double tau,
                             const PriorSpec& priors, const SparsePrecision& precision, Rng& rng);

/// (alpha, w) | z, omega, theta for the Bernoulli model.
GaussianConditional alpha_w_conditional_bernoulli(const Eigen::VectorXd& z,
                                                  const Eigen::VectorXd& omega,
                                                  const PriorSpec& priors,
                                                  const SparsePrecision& precision);
AlphaW sample_alpha_w_bernoulli(const Eigen::VectorXd& z, const Eigen::VectorXd& omega,
                                const CovarianceParams& theta, const PriorSpec& priors,
                                const SparsePrecision& precision, Rng& rng);

/// log N(y | m_alpha 1, D Q_mu^{-1} D^T + tau^2 I), evaluated through the
/// Woodbury identity and the determinant lemma with sparse solves only.
/// `y` is in graph order.
double marginal_log_likelihood_y(const Eigen::VectorXd& y, const NngpGraph& graph,
                                 const CovarianceParams& theta, double tau,
                                 const PriorSpec& priors);

struct ChainStateNormal {
  double alpha = 0.0;
  Eigen::VectorXd w;  // graph order
  CovarianceParams theta;
  double tau = 1.0;
  double log_marginal = 0.0;
};

struct ChainStateBernoulli {
  double alpha = 0.0;
  Eigen::VectorXd w;  // graph order
  CovarianceParams theta;
  Eigen::VectorXd omega;
  double log_target = 0.0;  // Vecchia log density of w under theta
};

/// Normal-model engine: owns the graph, a reusable Cholesky analysis, and
/// cached factorizations for the current and proposed (theta, tau).
class NormalGibbs {
 public:
  NormalGibbs(const ObservedField& observations, const PriorSpec& priors, std::size_t m);

  const NngpGraph& graph() const { return graph_; }
  const Eigen::VectorXd& y_ordered() const { return y_; }

  /// Initial state at the prior means with w = 0.
  ChainStateNormal initial_state();
  /// Refactorizes for the state's (theta, tau) and refreshes log_marginal.
  void set_state(ChainStateNormal& state);

  /// Step 1: joint conjugate draw of (alpha, w).
  void draw_alpha_w(ChainStateNormal& state, Rng& rng) const;
  /// Step 2: Metropolis-Hastings for (theta, tau) with (alpha, w)
  /// integrated out. Returns the acceptance probability via `accept_prob`.
  bool mh_step(ChainStateNormal& state, MhProposal& proposal, Rng& rng, double* accept_prob);

  /// Log marginal likelihood at arbitrary (theta, tau); nullopt when the
  /// system is numerically infeasible.
  std::optional<double> log_marginal(const CovarianceParams& theta, double tau);

  std::size_t numerical_rejections() const { return numerical_rejections_; }
  /// Multiplies the likelihood term of the Metropolis ratio (1 = exact).
  void set_likelihood_weight(double weight) { weight_ = weight; }

 private:
  struct Slot {
    VecchiaFactors factors;
    Eigen::SparseMatrix<double> qtilde;
    SparseCholesky chol;
    double tau = 1.0;
    double log_marginal = 0.0;
  };
  bool evaluate(Slot& slot, const CovarianceParams& theta, double tau) const;

  NngpGraph graph_;
  Eigen::VectorXd y_;
  PriorSpec priors_;
  PrecisionAssembler assembler_;
  Slot slots_[2];
  int current_ = 0;
  std::size_t numerical_rejections_ = 0;
  double weight_ = 1.0;
};

/// Bernoulli-model engine with Polya-Gamma augmentation.
class BernoulliGibbs {
 public:
  BernoulliGibbs(const ObservedField& observations, const PriorSpec& priors, std::size_t m);

  const NngpGraph& graph() const { return graph_; }

  ChainStateBernoulli initial_state();
  void set_state(ChainStateBernoulli& state);

  /// Step 1: (alpha, w) | z, omega, theta.
  void draw_alpha_w(ChainStateBernoulli& state, Rng& rng);
  /// Step 2: omega_i ~ PG(1, alpha + w_i).
  void draw_omega(ChainStateBernoulli& state, Rng& rng) const;
  /// Step 3: Metropolis-Hastings for theta given w.
  bool mh_step(ChainStateBernoulli& state, MhProposal& proposal, Rng& rng, double* accept_prob);

  std::size_t numerical_rejections() const { return numerical_rejections_; }
  /// Multiplies the likelihood term of the Metropolis ratio (1 = exact).
  void set_likelihood_weight(double weight) { weight_ = weight; }

 private:
  NngpGraph graph_;
  Eigen::VectorXd z_;
  PriorSpec priors_;
  PrecisionAssembler assembler_;
  VecchiaFactors factors_;
  Eigen::SparseMatrix<double> q_;       // Q(theta) on the bordered pattern
  Eigen::SparseMatrix<double> qtilde_;
  SparseCholesky chol_;
  std::size_t numerical_rejections_ = 0;
  double weight_ = 1.0;
};

/// Single MH update for the normal model using a one-off engine.
bool mh_step_theta_tau(ChainStateNormal& state, MhProposal& proposal, NormalGibbs& engine,
                       Rng& rng);
bool mh_step_theta_bernoulli(ChainStateBernoulli& state, MhProposal& proposal,
                             BernoulliGibbs& engine, Rng& rng);

enum class ModelKind { normal, bernoulli };

struct SamplerMeta {
  McmcConfig config;
  double acceptance_rate = 0.0;       // over all MH steps
  double retained_acceptance = 0.0;   // over post-burn-in steps
  std::size_t numerical_rejections = 0;
  std::vector<std::string> warnings;
};

/// Retained post-burn-in draws. Parameter columns: alpha, then
/// (sigma, phi, lambda) per component, then tau for the normal model.
struct PosteriorSamples {
  ModelKind kind = ModelKind::normal;
  std::size_t components = 0;
  std::vector<std::size_t> iteration;
  Eigen::MatrixXd params;
  std::vector<double> log_target;  // log marginal (normal) or Vecchia log density (Bernoulli)
  std::vector<int> accepted;

  std::vector<SpaceTimeCoord> coords;  // observation coordinates, original order
  std::vector<std::size_t> w_rows;     // rows of params that have a stored w
  Eigen::MatrixXd w;                   // w_rows.size() x n, original order
  SamplerMeta meta;

  std::size_t draws() const { return static_cast<std::size_t>(params.rows()); }
  double alpha(std::size_t row) const { return params(static_cast<Eigen::Index>(row), 0); }
  CovarianceParams theta(std::size_t row) const;
  std::optional<double> tau(std::size_t row) const;
  std::vector<std::string> column_names() const;
  /// Row with the largest log_target + log prior.
  std::size_t map_row(const PriorSpec& priors) const;
};

/// Alternates (theta, tau) MH with (alpha, w) conjugate draws.
PosteriorSamples run_gibbs_normal(const ObservedField& observations, const PriorSpec& priors,
                                  const McmcConfig& config);
/// Alternates (alpha, w), omega, and theta updates.
PosteriorSamples run_gibbs_bernoulli(const ObservedField& observations, const PriorSpec& priors,
                                     const McmcConfig& config);

// ---- serialization ------------------------------------------------------

void write_posterior_csv(std::ostream& out, const PosteriorSamples& samples);
/// Reads parameters back; w draws and coords come from the binary file.
PosteriorSamples read_posterior_csv(std::istream& in);
void write_w_draws(std::ostream& out, const PosteriorSamples& samples);
void read_w_draws(std::istream& in, PosteriorSamples& samples);

}  // namespace stlgm
