#include "stlgm/samplers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include <Eigen/Cholesky>

#include "stlgm/error.hpp"
#include "stlgm/polya_gamma.hpp"

namespace stlgm {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kLog2Pi = 1.8378770664093454836;

std::string describe(const CovarianceParams& theta, std::optional<double> tau) {
  std::string s = "theta=[";
  for (std::size_t l = 0; l < theta.size(); ++l) {
    const auto& c = theta.components[l];
    if (l) s += "; ";
    s += std::to_string(c.sigma) + ", " + std::to_string(c.phi) + ", " + std::to_string(c.lambda);
  }
  s += "]";
  if (tau) s += " tau=" + std::to_string(*tau);
  return s;
}

Eigen::VectorXd pack_log(const CovarianceParams& theta, std::optional<double> tau) {
  Eigen::VectorXd v = theta.to_vector();
  if (tau) {
    v.conservativeResize(v.size() + 1);
    v[v.size() - 1] = *tau;
  }
  return v.array().log();
}

/// Sparse [Q + diag(d), d; d^T, q_alpha + sum d] with alpha last.
Eigen::SparseMatrix<double> bordered_precision(const Eigen::SparseMatrix<double>& q,
                                               const Eigen::VectorXd& d, double q_alpha) {
  const Eigen::Index n = q.rows();
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<std::size_t>(q.nonZeros() + 3 * n + 1));
  for (Eigen::Index c = 0; c < q.outerSize(); ++c) {
    for (Eigen::SparseMatrix<double>::InnerIterator it(q, c); it; ++it) {
      trip.emplace_back(it.row(), it.col(), it.value());
    }
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    trip.emplace_back(i, i, d[i]);
    trip.emplace_back(i, n, d[i]);
    trip.emplace_back(n, i, d[i]);
  }
  trip.emplace_back(n, n, q_alpha + d.sum());
  Eigen::SparseMatrix<double> out(n + 1, n + 1);
  out.setFromTriplets(trip.begin(), trip.end());
  return out;
}

/// Adds the data term to a bordered pattern filled with Q: diag(d) on the
/// w block, d on the intercept border, q_alpha + sum d at the corner.
void add_data_term(const PrecisionAssembler& assembler, const Eigen::VectorXd& d, double q_alpha,
                   Eigen::SparseMatrix<double>& m) {
  double* v = m.valuePtr();
  const auto& diag = assembler.diag_slots();
  const auto& col = assembler.intercept_col_slots();
  const auto& row = assembler.intercept_row_slots();
  const std::size_t n = assembler.points();
  for (std::size_t i = 0; i < n; ++i) {
    const double di = d[static_cast<Eigen::Index>(i)];
    v[diag[i]] += di;
    v[col[i]] += di;
    v[row[i]] += di;
  }
  v[diag[n]] += q_alpha + d.sum();
}

/// Woodbury / determinant-lemma evaluation given the factor of
/// Qtilde = Q_mu + tau^-2 D^T D.
double vecchia_quad(const Eigen::VectorXd& w, const NngpGraph& graph, const VecchiaFactors& factors) {
  double quad = 0.0;
  for (std::size_t i = 0; i < graph.size(); ++i) {
    double e = w[static_cast<Eigen::Index>(i)];
    const auto& nb = graph.neighbors[i];
    for (std::size_t k = 0; k < nb.size(); ++k) e -= factors.weights[i][k] * w[static_cast<Eigen::Index>(nb[k])];
    quad += e * e / factors.cond_var[static_cast<Eigen::Index>(i)];
  }
  return quad;
}

// The quadratic form is split into the residual and prior terms at the
// conditional mean v; both are nonnegative, so small tau does not cancel.
double woodbury_marginal(const Eigen::VectorXd& y, const SparseCholesky& chol, const NngpGraph& graph,
                         const VecchiaFactors& factors, double tau, const PriorSpec& priors) {
  const auto n = y.size();
  const double inv_t2 = 1.0 / (tau * tau);
  const double q_alpha = priors.alpha.precision();
  const Eigen::VectorXd r = y.array() - priors.alpha.mean;
  Eigen::VectorXd u(n + 1);
  u.head(n) = r * inv_t2;
  u[n] = r.sum() * inv_t2;
  const Eigen::VectorXd v = chol.solve(u);
  const Eigen::VectorXd resid = r - v.head(n) - Eigen::VectorXd::Constant(n, v[n]);
  const double quad =
      resid.squaredNorm() * inv_t2 + vecchia_quad(v.head(n), graph, factors) + q_alpha * v[n] * v[n];
  const double log_det_q_mu = std::log(q_alpha) - factors.cond_var.array().log().sum();
  const double log_det_sigma =
      chol.log_det() - log_det_q_mu + static_cast<double>(n) * std::log(tau * tau);
  return -0.5 * (static_cast<double>(n) * kLog2Pi + log_det_sigma + quad);
}

}  // namespace

// ---- configuration --------------------------------------------------------

void McmcConfig::validate() const {
  if (iterations < 1) throw ValidationError("mcmc.iterations must be at least 1");
  if (burn_in > iterations) throw ValidationError("mcmc.burn_in cannot exceed mcmc.iterations");
  if (thin < 1) throw ValidationError("mcmc.thin must be at least 1");
  if (w_thin < 1) throw ValidationError("mcmc.w_thin must be at least 1");
  if (m < 1) throw ValidationError("model.neighbors must be at least 1");
  if (!(target_acceptance > 0.0 && target_acceptance < 1.0)) {
    throw ValidationError("mcmc.target_acceptance must lie in (0, 1)");
  }
  if (!(initial_step > 0.0)) throw ValidationError("mcmc.initial_step must be positive");
}

double McmcConfig::likelihood_weight(std::size_t it) const {
  const std::size_t ramp = burn_in / 2;
  if (!anneal || ramp < 2 || it >= ramp) return 1.0;
  return std::pow(kAnnealStart, 1.0 - static_cast<double>(it) / static_cast<double>(ramp));
}

// ---- proposal ---------------------------------------------------------------

MhProposal::MhProposal(std::size_t dim, double initial_step, double target_acceptance)
    : target_(target_acceptance) {
  const auto d = static_cast<Eigen::Index>(dim);
  base_ = Eigen::MatrixXd::Identity(d, d) * (initial_step * initial_step);
  mean_ = Eigen::VectorXd::Zero(d);
  m2_ = Eigen::MatrixXd::Zero(d, d);
  refresh();
}

void MhProposal::refresh() {
  const auto d = base_.rows();
  const std::size_t warmup = std::max<std::size_t>(100, 20 * static_cast<std::size_t>(d));
  Eigen::MatrixXd shape = base_;
  if (count_ > warmup) {
    shape = m2_ / static_cast<double>(count_ - 1) * (2.38 * 2.38 / static_cast<double>(d));
    shape.diagonal().array() += 1e-10;
  }
  cov_ = std::exp(2.0 * log_scale_) * shape;
  Eigen::LLT<Eigen::MatrixXd> llt(cov_);
  if (llt.info() != Eigen::Success) {
    cov_ = std::exp(2.0 * log_scale_) * base_;
    llt.compute(cov_);
  }
  chol_ = llt.matrixL();
}

void MhProposal::restart() {
  if (frozen_) return;
  base_ = cov_ * std::exp(-2.0 * log_scale_);
  mean_.setZero();
  m2_.setZero();
  count_ = 0;
  refresh();
}

Eigen::VectorXd MhProposal::propose(const Eigen::VectorXd& log_params, Rng& rng) const {
  Eigen::VectorXd z(log_params.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = standard_normal(rng);
  return log_params + chol_ * z;
}

void MhProposal::adapt(const Eigen::VectorXd& log_params, double accept_prob) {
  if (frozen_) return;
  ++count_;
  const Eigen::VectorXd delta = log_params - mean_;
  mean_ += delta / static_cast<double>(count_);
  m2_ += delta * (log_params - mean_).transpose();
  const double gain = std::pow(static_cast<double>(count_) + 1.0, -0.6);
  log_scale_ = std::clamp(log_scale_ + gain * (accept_prob - target_), -10.0, 5.0);
  refresh();
}

// ---- conjugate (alpha, w) draws ---------------------------------------------

AlphaW GaussianConditional::draw_from(const Eigen::VectorXd& z) const {
  const Eigen::VectorXd x = mean + factor.transform_standard(z);
  const auto n = x.size() - 1;
  return {x[n], x.head(n)};
}

AlphaW GaussianConditional::draw(Rng& rng) const {
  Eigen::VectorXd z(mean.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = standard_normal(rng);
  return draw_from(z);
}

GaussianConditional alpha_w_conditional_normal(const Eigen::VectorXd& y, double tau,
                                               const PriorSpec& priors,
                                               const SparsePrecision& precision) {
  const auto n = y.size();
  if (static_cast<std::size_t>(n) != precision.size()) {
    throw ValidationError("alpha/w draw: y and precision dimensions differ");
  }
  if (!(tau > 0.0)) throw ValidationError("alpha/w draw: tau must be positive");
  const double inv_t2 = 1.0 / (tau * tau);
  GaussianConditional g;
  g.precision = bordered_precision(precision.Q, Eigen::VectorXd::Constant(n, inv_t2),
                                   priors.alpha.precision());
  Eigen::VectorXd b(n + 1);
  b.head(n) = y * inv_t2;
  b[n] = priors.alpha.precision() * priors.alpha.mean + y.sum() * inv_t2;
  if (!g.factor.factorize(g.precision)) {
    throw NumericalError("Cholesky of the (alpha, w) posterior precision failed (tau=" +
                         std::to_string(tau) + ")");
  }
  g.mean = g.factor.solve(b);
  return g;
}

AlphaW sample_alpha_w_normal(const Eigen::VectorXd& y, const CovarianceParams& theta, double tau,
                             const PriorSpec& priors, const SparsePrecision& precision, Rng& rng) {
  try {
    return alpha_w_conditional_normal(y, tau, priors, precision).draw(rng);
  } catch (const NumericalError& e) {
    throw NumericalError(std::string(e.what()) + " at " + describe(theta, tau));
  }
}

GaussianConditional alpha_w_conditional_bernoulli(const Eigen::VectorXd& z,
                                                  const Eigen::VectorXd& omega,
                                                  const PriorSpec& priors,
                                                  const SparsePrecision& precision) {
  const auto n = z.size();
  if (static_cast<std::size_t>(n) != precision.size() || omega.size() != n) {
    throw ValidationError("alpha/w draw: z, omega and precision dimensions differ");
  }
  GaussianConditional g;
  g.precision = bordered_precision(precision.Q, omega, priors.alpha.precision());
  const Eigen::VectorXd kappa = z.array() - 0.5;
  Eigen::VectorXd b(n + 1);
  b.head(n) = kappa;
  b[n] = priors.alpha.precision() * priors.alpha.mean + kappa.sum();
  if (!g.factor.factorize(g.precision)) {
    throw NumericalError("Cholesky of the (alpha, w) posterior precision failed");
  }
  g.mean = g.factor.solve(b);
  return g;
}

AlphaW sample_alpha_w_bernoulli(const Eigen::VectorXd& z, const Eigen::VectorXd& omega,
                                const CovarianceParams& theta, const PriorSpec& priors,
                                const SparsePrecision& precision, Rng& rng) {
  try {
    return alpha_w_conditional_bernoulli(z, omega, priors, precision).draw(rng);
  } catch (const NumericalError& e) {
    throw NumericalError(std::string(e.what()) + " at " + describe(theta, std::nullopt));
  }
}

double marginal_log_likelihood_y(const Eigen::VectorXd& y, const NngpGraph& graph,
                                 const CovarianceParams& theta, double tau,
                                 const PriorSpec& priors) {
  if (static_cast<std::size_t>(y.size()) != graph.size()) {
    throw ValidationError("marginal likelihood: y and graph sizes differ");
  }
  if (!(tau > 0.0)) throw ValidationError("marginal likelihood: tau must be positive");
  const auto factors = vecchia_factors(graph, theta);
  PrecisionAssembler assembler(graph, true);
  Eigen::SparseMatrix<double> qt = assembler.pattern();
  assembler.fill(factors, qt);
  add_data_term(assembler, Eigen::VectorXd::Constant(y.size(), 1.0 / (tau * tau)),
                priors.alpha.precision(), qt);
  SparseCholesky chol;
  if (!chol.factorize(qt)) {
    throw NumericalError("marginal likelihood: factorization failed at " + describe(theta, tau));
  }
  return woodbury_marginal(y, chol, graph, factors, tau, priors);
}

// ---- normal engine ----------------------------------------------------------

NormalGibbs::NormalGibbs(const ObservedField& observations, const PriorSpec& priors, std::size_t m)
    : graph_(build_graph(observations.coords, m)),
      y_(graph_.to_ordered(observations.values)),
      priors_(priors),
      assembler_(graph_, true) {
  priors_.validate();
  if (!priors_.tau) throw ValidationError("normal model needs a tau prior");
  for (auto& s : slots_) {
    s.qtilde = assembler_.pattern();
    s.chol.analyze(s.qtilde);
  }
}

bool NormalGibbs::evaluate(Slot& slot, const CovarianceParams& theta, double tau) const {
  try {
    slot.factors = vecchia_factors(graph_, theta);
  } catch (const NumericalError&) {
    return false;
  }
  assembler_.fill(slot.factors, slot.qtilde);
  add_data_term(assembler_, Eigen::VectorXd::Constant(y_.size(), 1.0 / (tau * tau)),
                priors_.alpha.precision(), slot.qtilde);
  if (!slot.chol.factorize(slot.qtilde)) return false;
  slot.tau = tau;
  slot.log_marginal = woodbury_marginal(y_, slot.chol, graph_, slot.factors, tau, priors_);
  return std::isfinite(slot.log_marginal);
}

ChainStateNormal NormalGibbs::initial_state() {
  ChainStateNormal s;
  s.alpha = priors_.alpha.mean;
  s.w = Eigen::VectorXd::Zero(y_.size());
  s.theta = priors_.prior_mean_theta();
  s.tau = priors_.tau->mean;
  set_state(s);
  return s;
}

void NormalGibbs::set_state(ChainStateNormal& state) {
  state.theta.validate();
  if (!evaluate(slots_[current_], state.theta, state.tau)) {
    throw NumericalError("normal model: cannot factorize at " + describe(state.theta, state.tau));
  }
  state.log_marginal = slots_[current_].log_marginal;
}

std::optional<double> NormalGibbs::log_marginal(const CovarianceParams& theta, double tau) {
  Slot& scratch = slots_[1 - current_];
  if (!evaluate(scratch, theta, tau)) return std::nullopt;
  return scratch.log_marginal;
}

void NormalGibbs::draw_alpha_w(ChainStateNormal& state, Rng& rng) const {
  const Slot& s = slots_[current_];
  const auto n = y_.size();
  const double inv_t2 = 1.0 / (s.tau * s.tau);
  Eigen::VectorXd b(n + 1);
  b.head(n) = y_ * inv_t2;
  b[n] = priors_.alpha.precision() * priors_.alpha.mean + y_.sum() * inv_t2;
  const Eigen::VectorXd x = s.chol.solve(b) + s.chol.sample_zero_mean(rng);
  state.w = x.head(n);
  state.alpha = x[n];
}

bool NormalGibbs::mh_step(ChainStateNormal& state, MhProposal& proposal, Rng& rng,
                          double* accept_prob) {
  const Eigen::VectorXd x = pack_log(state.theta, state.tau);
  const Eigen::VectorXd xp = proposal.propose(x, rng);
  const Eigen::VectorXd pe = xp.array().exp();
  const auto d = pe.size();
  const CovarianceParams theta_p = CovarianceParams::from_vector(pe.head(d - 1));
  const double tau_p = pe[d - 1];
  const double log_u = std::log(uniform01(rng));

  double prob = 0.0;
  bool accept = false;
  const double lp_p = theta_p.valid() && std::isfinite(tau_p) && tau_p > 0.0
                          ? log_prior_theta_tau(theta_p, tau_p, priors_)
                          : kNegInf;
  if (lp_p > kNegInf) {
    Slot& cand = slots_[1 - current_];
    if (evaluate(cand, theta_p, tau_p)) {
      const double lp = log_prior_theta_tau(state.theta, state.tau, priors_);
      const double log_r = weight_ * (cand.log_marginal - state.log_marginal) + (lp_p + xp.sum()) - (lp + x.sum());
      prob = log_r >= 0.0 ? 1.0 : std::exp(log_r);
      if (log_u < log_r) {
        accept = true;
        current_ = 1 - current_;
        state.theta = theta_p;
        state.tau = tau_p;
        state.log_marginal = cand.log_marginal;
      }
    } else {
      ++numerical_rejections_;
    }
  }
  if (accept_prob) *accept_prob = prob;
  return accept;
}

bool mh_step_theta_tau(ChainStateNormal& state, MhProposal& proposal, NormalGibbs& engine,
                       Rng& rng) {
  double p = 0.0;
  const bool accepted = engine.mh_step(state, proposal, rng, &p);
  proposal.adapt(pack_log(state.theta, state.tau), p);
  return accepted;
}

// ---- Bernoulli engine -------------------------------------------------------

BernoulliGibbs::BernoulliGibbs(const ObservedField& observations, const PriorSpec& priors,
                               std::size_t m)
    : graph_(build_graph(observations.coords, m)),
      z_(graph_.to_ordered(observations.values)),
      priors_(priors),
      assembler_(graph_, true) {
  priors_.validate();
  for (Eigen::Index i = 0; i < z_.size(); ++i) {
    if (z_[i] != 0.0 && z_[i] != 1.0) throw ValidationError("Bernoulli model needs 0/1 responses");
  }
  q_ = assembler_.pattern();
  qtilde_ = assembler_.pattern();
  chol_.analyze(qtilde_);
}

ChainStateBernoulli BernoulliGibbs::initial_state() {
  ChainStateBernoulli s;
  s.alpha = priors_.alpha.mean;
  s.w = Eigen::VectorXd::Zero(z_.size());
  s.omega = Eigen::VectorXd::Constant(z_.size(), polya_gamma_mean(0.0));
  s.theta = priors_.prior_mean_theta();
  set_state(s);
  return s;
}

void BernoulliGibbs::set_state(ChainStateBernoulli& state) {
  state.theta.validate();
  factors_ = vecchia_factors(graph_, state.theta);
  assembler_.fill(factors_, q_);
  state.log_target = vecchia_log_density(state.w, graph_, factors_);
}

void BernoulliGibbs::draw_alpha_w(ChainStateBernoulli& state, Rng& rng) {
  const auto n = z_.size();
  std::copy(q_.valuePtr(), q_.valuePtr() + q_.nonZeros(), qtilde_.valuePtr());
  add_data_term(assembler_, state.omega, priors_.alpha.precision(), qtilde_);
  if (!chol_.factorize(qtilde_)) {
    throw NumericalError("Bernoulli model: Cholesky of the (alpha, w) posterior precision failed at " +
                         describe(state.theta, std::nullopt));
  }
  const Eigen::VectorXd kappa = z_.array() - 0.5;
  Eigen::VectorXd b(n + 1);
  b.head(n) = kappa;
  b[n] = priors_.alpha.precision() * priors_.alpha.mean + kappa.sum();
  const Eigen::VectorXd x = chol_.solve(b) + chol_.sample_zero_mean(rng);
  state.w = x.head(n);
  state.alpha = x[n];
  state.log_target = vecchia_log_density(state.w, graph_, factors_);
}

void BernoulliGibbs::draw_omega(ChainStateBernoulli& state, Rng& rng) const {
  for (Eigen::Index i = 0; i < state.omega.size(); ++i) {
    state.omega[i] = sample_polya_gamma(state.alpha + state.w[i], rng);
  }
}

bool BernoulliGibbs::mh_step(ChainStateBernoulli& state, MhProposal& proposal, Rng& rng,
                             double* accept_prob) {
  const Eigen::VectorXd x = pack_log(state.theta, std::nullopt);
  const Eigen::VectorXd xp = proposal.propose(x, rng);
  const CovarianceParams theta_p = CovarianceParams::from_vector(xp.array().exp());
  const double log_u = std::log(uniform01(rng));

  double prob = 0.0;
  bool accept = false;
  const double lp_p = theta_p.valid() ? log_prior_theta_tau(theta_p, std::nullopt, priors_) : kNegInf;
  if (lp_p > kNegInf) {
    VecchiaFactors cand;
    bool ok = true;
    try {
      cand = vecchia_factors(graph_, theta_p);
    } catch (const NumericalError&) {
      ok = false;
      ++numerical_rejections_;
    }
    if (ok) {
      const double lt_p = vecchia_log_density(state.w, graph_, cand);
      const double lp = log_prior_theta_tau(state.theta, std::nullopt, priors_);
      const double log_r = weight_ * (lt_p - state.log_target) + (lp_p + xp.sum()) - (lp + x.sum());
      prob = log_r >= 0.0 ? 1.0 : std::exp(log_r);
      if (log_u < log_r) {
        accept = true;
        factors_ = std::move(cand);
        assembler_.fill(factors_, q_);
        state.theta = theta_p;
        state.log_target = lt_p;
      }
    }
  }
  if (accept_prob) *accept_prob = prob;
  return accept;
}

bool mh_step_theta_bernoulli(ChainStateBernoulli& state, MhProposal& proposal,
                             BernoulliGibbs& engine, Rng& rng) {
  double p = 0.0;
  const bool accepted = engine.mh_step(state, proposal, rng, &p);
  proposal.adapt(pack_log(state.theta, std::nullopt), p);
  return accepted;
}

// ---- posterior samples ------------------------------------------------------

CovarianceParams PosteriorSamples::theta(std::size_t row) const {
  CovarianceParams t;
  const auto r = static_cast<Eigen::Index>(row);
  for (std::size_t l = 0; l < components; ++l) {
    const auto c = static_cast<Eigen::Index>(1 + 3 * l);
    t.components.push_back({params(r, c), params(r, c + 1), params(r, c + 2)});
  }
  return t;
}

std::optional<double> PosteriorSamples::tau(std::size_t row) const {
  if (kind != ModelKind::normal) return std::nullopt;
  return params(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(1 + 3 * components));
}

std::vector<std::string> PosteriorSamples::column_names() const {
  std::vector<std::string> names{"alpha"};
  for (std::size_t l = 1; l <= components; ++l) {
    names.push_back("sigma_" + std::to_string(l));
    names.push_back("phi_" + std::to_string(l));
    names.push_back("lambda_" + std::to_string(l));
  }
  if (kind == ModelKind::normal) names.emplace_back("tau");
  return names;
}

std::size_t PosteriorSamples::map_row(const PriorSpec& priors) const {
  if (draws() == 0) throw ValidationError("posterior has no retained draws");
  std::size_t best = 0;
  double best_value = kNegInf;
  for (std::size_t r = 0; r < draws(); ++r) {
    const double v = log_target[r] + log_prior_theta_tau(theta(r), tau(r), priors);
    if (v > best_value) {
      best_value = v;
      best = r;
    }
  }
  return best;
}

namespace {

template <class Engine, class State>
void record_draw(PosteriorSamples& out, const Engine& engine, const State& state, std::size_t it,
                 bool accepted, double log_target, std::optional<double> tau, bool store_w,
                 std::vector<Eigen::VectorXd>& w_store) {
  const auto row = static_cast<Eigen::Index>(out.iteration.size());
  out.iteration.push_back(it);
  out.params(row, 0) = state.alpha;
  const Eigen::VectorXd th = state.theta.to_vector();
  out.params.row(row).segment(1, th.size()) = th.transpose();
  if (tau) out.params(row, 1 + th.size()) = *tau;
  out.log_target.push_back(log_target);
  out.accepted.push_back(accepted ? 1 : 0);
  if (store_w) {
    out.w_rows.push_back(static_cast<std::size_t>(row));
    w_store.push_back(engine.graph().to_original(state.w));
  }
}

void finish(PosteriorSamples& out, std::vector<Eigen::VectorXd>& w_store, std::size_t n) {
  out.params.conservativeResize(static_cast<Eigen::Index>(out.iteration.size()), out.params.cols());
  out.w.resize(static_cast<Eigen::Index>(w_store.size()), static_cast<Eigen::Index>(n));
  for (std::size_t k = 0; k < w_store.size(); ++k) {
    out.w.row(static_cast<Eigen::Index>(k)) = w_store[k].transpose();
  }
}

std::size_t retained_count(const McmcConfig& c) { return (c.iterations - c.burn_in) / c.thin; }

}  // namespace

PosteriorSamples run_gibbs_normal(const ObservedField& observations, const PriorSpec& priors,
                                  const McmcConfig& config) {
  config.validate();
  priors.validate();
  if (observations.size() < 2) throw ValidationError("normal model needs at least 2 observations");
  NormalGibbs engine(observations, priors, config.m);
  Rng rng(config.seed);

  PosteriorSamples out;
  out.kind = ModelKind::normal;
  out.components = priors.components.size();
  out.coords = observations.coords;
  out.meta.config = config;
  const auto cols = static_cast<Eigen::Index>(2 + 3 * out.components);
  out.params.resize(static_cast<Eigen::Index>(retained_count(config)), cols);
  if (retained_count(config) == 0) {
    out.meta.warnings.push_back("no retained draws: iterations - burn_in < thin");
  }

  ChainStateNormal state = engine.initial_state();
  MhProposal proposal(3 * out.components + 1, config.initial_step, config.target_acceptance);
  std::vector<Eigen::VectorXd> w_store;
  std::size_t accepts = 0, retained_accepts = 0;
  for (std::size_t it = 1; it <= config.iterations; ++it) {
    double p = 0.0;
    engine.set_likelihood_weight(config.likelihood_weight(it));
    const bool accepted = engine.mh_step(state, proposal, rng, &p);
    accepts += accepted;
    if (it <= config.burn_in) {
      if (config.adapt) proposal.adapt(pack_log(state.theta, state.tau), p);
      if (config.adapt && it == config.burn_in / 2) proposal.restart();
      if (it == config.burn_in) proposal.freeze();
    } else {
      retained_accepts += accepted;
    }
    try {
      engine.draw_alpha_w(state, rng);
    } catch (const NumericalError& e) {
      throw NumericalError("iteration " + std::to_string(it) + ": " + e.what());
    }
    if (it > config.burn_in && (it - config.burn_in) % config.thin == 0) {
      const std::size_t k = out.iteration.size();
      record_draw(out, engine, state, it, accepted, state.log_marginal, state.tau,
                  k % config.w_thin == 0, w_store);
    }
  }
  finish(out, w_store, observations.size());
  out.meta.acceptance_rate = static_cast<double>(accepts) / static_cast<double>(config.iterations);
  const std::size_t post = config.iterations - config.burn_in;
  out.meta.retained_acceptance = post ? static_cast<double>(retained_accepts) / static_cast<double>(post) : 0.0;
  out.meta.numerical_rejections = engine.numerical_rejections();
  return out;
}

PosteriorSamples run_gibbs_bernoulli(const ObservedField& observations, const PriorSpec& priors,
                                     const McmcConfig& config) {
  config.validate();
  priors.validate();
  if (observations.size() < 2) throw ValidationError("Bernoulli model needs at least 2 observations");
  BernoulliGibbs engine(observations, priors, config.m);
  Rng rng(config.seed);

  PosteriorSamples out;
  out.kind = ModelKind::bernoulli;
  out.components = priors.components.size();
  out.coords = observations.coords;
  out.meta.config = config;
  const double ones = observations.values.sum();
  if (ones == 0.0 || ones == static_cast<double>(observations.size())) {
    out.meta.warnings.push_back(
        "all binary responses are in one class; the intercept is weakly identified");
  }
  const auto cols = static_cast<Eigen::Index>(1 + 3 * out.components);
  out.params.resize(static_cast<Eigen::Index>(retained_count(config)), cols);
  if (retained_count(config) == 0) {
    out.meta.warnings.push_back("no retained draws: iterations - burn_in < thin");
  }

  ChainStateBernoulli state = engine.initial_state();
  MhProposal proposal(3 * out.components, config.initial_step, config.target_acceptance);
  std::vector<Eigen::VectorXd> w_store;
  std::size_t accepts = 0, retained_accepts = 0;
  for (std::size_t it = 1; it <= config.iterations; ++it) {
    try {
      engine.draw_alpha_w(state, rng);
    } catch (const NumericalError& e) {
      throw NumericalError("iteration " + std::to_string(it) + ": " + e.what());
    }
    engine.draw_omega(state, rng);
    double p = 0.0;
    engine.set_likelihood_weight(config.likelihood_weight(it));
    const bool accepted = engine.mh_step(state, proposal, rng, &p);
    accepts += accepted;
    if (it <= config.burn_in) {
      if (config.adapt) proposal.adapt(pack_log(state.theta, std::nullopt), p);
      if (config.adapt && it == config.burn_in / 2) proposal.restart();
      if (it == config.burn_in) proposal.freeze();
    } else {
      retained_accepts += accepted;
    }
    if (it > config.burn_in && (it - config.burn_in) % config.thin == 0) {
      const std::size_t k = out.iteration.size();
      record_draw(out, engine, state, it, accepted, state.log_target, std::nullopt,
                  k % config.w_thin == 0, w_store);
    }
  }
  finish(out, w_store, observations.size());
  out.meta.acceptance_rate = static_cast<double>(accepts) / static_cast<double>(config.iterations);
  const std::size_t post = config.iterations - config.burn_in;
  out.meta.retained_acceptance = post ? static_cast<double>(retained_accepts) / static_cast<double>(post) : 0.0;
  out.meta.numerical_rejections = engine.numerical_rejections();
  return out;
}

}  // namespace stlgm
