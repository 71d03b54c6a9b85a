#include "svb/models.hpp"

#include <cmath>

namespace svb {

namespace {

inline double norm_logpdf(double x, double mean, double var) {
  return -0.5 * (kLogTwoPi + std::log(var)) - 0.5 * sq(x - mean) / var;
}

inline double iso_gauss_logpdf(const Vec& theta, double var) {
  return -0.5 * theta.size() * (kLogTwoPi + std::log(var)) - 0.5 * theta.squaredNorm() / var;
}

}  // namespace

// ---------------------------------------------------------------------------
// ConjugateNormalModel
// ---------------------------------------------------------------------------

ConjugateNormalModel::ConjugateNormalModel(Vec observations, double obs_var, double prior_mean,
                                           double prior_var)
    : y_(std::move(observations)), obs_var_(obs_var), prior_mean_(prior_mean),
      prior_var_(prior_var) {
  if (obs_var_ <= 0.0 || prior_var_ <= 0.0)
    throw InvalidParameterError("variances must be positive");
}

double ConjugateNormalModel::log_prior(const Vec& theta) const {
  return norm_logpdf(theta[0], prior_mean_, prior_var_);
}

double ConjugateNormalModel::window_loglik(const Vec& theta, const DataWindow& window) const {
  window.validate();
  double s = 0.0;
  for (int t = window.lo; t < window.hi; ++t) s += norm_logpdf(y_[t], theta[0], obs_var_);
  note_evals(window.length());
  return s;
}

double ConjugateNormalModel::posterior_mean(int upto) const {
  const double precision = 1.0 / prior_var_ + upto / obs_var_;
  return (prior_mean_ / prior_var_ + y_.head(upto).sum() / obs_var_) / precision;
}

double ConjugateNormalModel::posterior_var(int upto) const {
  return 1.0 / (1.0 / prior_var_ + upto / obs_var_);
}

// ---------------------------------------------------------------------------
// AR(3)
// ---------------------------------------------------------------------------

Vec Ar3Params::to_vec() const {
  Vec v(5);
  v << mu, phi1, phi2, phi3, log_sigma2;
  return v;
}

Ar3Params Ar3Params::from_vec(const Vec& theta) {
  if (theta.size() != 5) throw DimensionError("AR(3) parameter vector has five entries");
  return {theta[0], theta[1], theta[2], theta[3], theta[4]};
}

bool ar3_stationary(double phi1, double phi2, double phi3) {
  Mat companion = Mat::Zero(3, 3);
  companion(0, 0) = phi1;
  companion(0, 1) = phi2;
  companion(0, 2) = phi3;
  companion(1, 0) = 1.0;
  companion(2, 1) = 1.0;
  return companion.eigenvalues().array().abs().maxCoeff() < 1.0;
}

Ar3Params ar3_draw_params(Rng& rng) {
  std::normal_distribution<double> n01;
  std::gamma_distribution<double> gamma(5.0, 1.0 / 5.0);  // precision, shape/rate 5
  Ar3Params p;
  p.mu = n01(rng);
  do {
    p.phi1 = n01(rng);
    p.phi2 = n01(rng);
    p.phi3 = n01(rng);
  } while (!ar3_stationary(p.phi1, p.phi2, p.phi3));
  p.log_sigma2 = -std::log(gamma(rng));
  return p;
}

Vec ar3_simulate(const Ar3Params& params, int T, Rng& rng) {
  if (T < 4) throw InvalidParameterError("AR(3) simulation needs T >= 4");
  constexpr int kBurnIn = 50;
  std::normal_distribution<double> n01;
  const double sigma = std::exp(0.5 * params.log_sigma2);
  double l1 = params.mu, l2 = params.mu, l3 = params.mu;
  Vec out(T);
  for (int t = -kBurnIn; t < T; ++t) {
    const double y = params.mu + params.phi1 * (l1 - params.mu) + params.phi2 * (l2 - params.mu) +
                     params.phi3 * (l3 - params.mu) + sigma * n01(rng);
    l3 = l2;
    l2 = l1;
    l1 = y;
    if (t >= 0) out[t] = y;
  }
  return out;
}

double ar3_window_loglik(const Ar3Params& params, const Vec& series, const DataWindow& window) {
  window.validate();
  if (window.hi > series.size()) throw DimensionError("window beyond the series");
  if (window.lo > 0 && window.lo < 3) throw InvalidParameterError("window lacks its three lags");
  const double var = std::exp(params.log_sigma2);
  double s = 0.0;
  for (int t = std::max(window.lo, 3); t < window.hi; ++t) {
    const double mean = params.mu + params.phi1 * (series[t - 1] - params.mu) +
                        params.phi2 * (series[t - 2] - params.mu) +
                        params.phi3 * (series[t - 3] - params.mu);
    s += norm_logpdf(series[t], mean, var);
  }
  return s;
}

double ar3_predictive_logscore(const Mat& theta_draws, const Vec& last3, double y_next) {
  if (theta_draws.rows() < 1) throw InvalidParameterError("predictive needs at least one draw");
  if (last3.size() != 3) throw DimensionError("predictive needs exactly three lags");
  const int m = static_cast<int>(theta_draws.rows());
  Vec logs(m);
  for (int i = 0; i < m; ++i) {
    const Ar3Params p = Ar3Params::from_vec(theta_draws.row(i).transpose());
    const double mean = p.mu + p.phi1 * (last3[0] - p.mu) + p.phi2 * (last3[1] - p.mu) +
                        p.phi3 * (last3[2] - p.mu);
    logs[i] = norm_logpdf(y_next, mean, std::exp(p.log_sigma2));
  }
  return log_sum_exp(logs) - std::log(static_cast<double>(m));
}

Ar3Model::Ar3Model(Vec series, double prior_var)
    : series_(std::move(series)), prior_var_(prior_var) {
  if (series_.size() < 4) throw InvalidParameterError("AR(3) model needs at least 4 observations");
}

double Ar3Model::log_prior(const Vec& theta) const { return iso_gauss_logpdf(theta, prior_var_); }

double Ar3Model::window_loglik(const Vec& theta, const DataWindow& window) const {
  const double v = ar3_window_loglik(Ar3Params::from_vec(theta), series_, window);
  note_evals(window.length());
  return v;
}

Vec Ar3Model::last3(int upto) const {
  if (upto < 3 || upto > series_.size()) throw DimensionError("lag request outside the series");
  Vec l(3);
  l << series_[upto - 1], series_[upto - 2], series_[upto - 3];
  return l;
}

// ---------------------------------------------------------------------------
// Mixture panel
// ---------------------------------------------------------------------------

MixturePanel mixture_simulate(int units, int T, Rng& rng, double pi) {
  if (units < 1 || T < 1) throw InvalidParameterError("panel needs units >= 1 and T >= 1");
  if (pi < 0.0 || pi > 1.0) throw InvalidParameterError("pi must lie in [0, 1]");
  std::normal_distribution<double> n01;
  std::uniform_real_distribution<double> uvar(1.0, 2.0);
  std::uniform_real_distribution<double> ulabel(0.0, 1.0);
  const double mu0 = 0.5 * n01(rng), mu1 = 0.5 * n01(rng);  // N(0, 0.25)
  const double s0 = std::sqrt(uvar(rng)), s1 = std::sqrt(uvar(rng));

  MixturePanel panel;
  panel.y.resize(units, T);
  panel.labels.resize(units);
  for (int i = 0; i < units; ++i) {
    const int k = ulabel(rng) < 1.0 - pi ? 0 : 1;
    panel.labels[i] = k;
    const double mu = k == 0 ? mu0 : mu1;
    const double sd = k == 0 ? s0 : s1;
    for (int t = 0; t < T; ++t) panel.y(i, t) = mu + sd * n01(rng);
  }
  return panel;
}

double mixture_marginal_prior(int j, double alpha, double beta) {
  if (j != 0 && j != 1) throw InvalidParameterError("two-component mixture has j in {0,1}");
  const auto log_beta_fn = [](double a, double b) {
    return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
  };
  return std::exp(log_beta_fn(j + alpha, beta - j + 1.0) - log_beta_fn(alpha, beta));
}

double mixture_unit_loglik(const Vec& theta, const Mat& panel, int unit, const DataWindow& window,
                           int component) {
  const double var = std::exp(theta[component]);
  const double mu = theta[2 + component];
  double s = 0.0;
  for (int t = window.lo; t < window.hi; ++t) s += norm_logpdf(panel(unit, t), mu, var);
  return s;
}

Mat mixture_class_probs(const Mat& theta_draws, const Mat& panel, const DataWindow& window,
                        const Mat& prior_probs) {
  window.validate();
  const int n = static_cast<int>(panel.rows());
  const int m = static_cast<int>(theta_draws.rows());
  if (prior_probs.rows() != n || prior_probs.cols() != 2)
    throw DimensionError("prior probability table must be N x 2");
  for (int i = 0; i < n; ++i)
    if (std::abs(prior_probs.row(i).sum() - 1.0) > 1e-8)
      throw InvalidParameterError("prior probability rows must sum to 1");

  Mat out(n, 2);
  Vec lik(m);
  for (int i = 0; i < n; ++i) {
    double log_side[2];
    for (int j = 0; j < 2; ++j) {
      for (int l = 0; l < m; ++l)
        lik[l] = mixture_unit_loglik(theta_draws.row(l).transpose(), panel, i, window, j);
      // average of likelihoods, not of logs
      log_side[j] = log_sum_exp(lik) - std::log(static_cast<double>(m)) +
                    std::log(prior_probs(i, j));
    }
    const double total = log_sum_exp(log_side[0], log_side[1]);
    out(i, 0) = std::exp(log_side[0] - total);
    out(i, 1) = std::exp(log_side[1] - total);
  }
  return out;
}

double mixture_marginal_loglik(const Vec& theta, const Mat& panel, const DataWindow& window,
                               const Mat& prior_probs) {
  window.validate();
  const int n = static_cast<int>(panel.rows());
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    const double a =
        std::log(prior_probs(i, 0)) + mixture_unit_loglik(theta, panel, i, window, 0);
    const double b =
        std::log(prior_probs(i, 1)) + mixture_unit_loglik(theta, panel, i, window, 1);
    total += log_sum_exp(a, b);
  }
  return total;
}

double classification_accuracy(const std::vector<int>& estimated, const std::vector<int>& truth) {
  if (estimated.size() != truth.size() || truth.empty())
    throw DimensionError("label vectors must be equal-length and non-empty");
  double agree = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i)
    if (estimated[i] == truth[i]) agree += 1.0;
  agree /= static_cast<double>(truth.size());
  return std::max(agree, 1.0 - agree);
}

MixtureModel::MixtureModel(Mat panel, double alpha, double beta, double prior_var, int prob_draws)
    : panel_(std::move(panel)), alpha_(alpha), beta_(beta), prior_var_(prior_var),
      prob_draws_(prob_draws) {
  if (panel_.rows() < 1 || panel_.cols() < 1) throw InvalidParameterError("empty panel");
  reset_class_probs();
}

Mat MixtureModel::initial_probs() const {
  Mat probs(panel_.rows(), 2);
  probs.col(0).setConstant(mixture_marginal_prior(0, alpha_, beta_));
  probs.col(1).setConstant(mixture_marginal_prior(1, alpha_, beta_));
  return probs;
}

void MixtureModel::reset_class_probs() { class_probs_ = initial_probs(); }

double MixtureModel::log_prior(const Vec& theta) const {
  return iso_gauss_logpdf(theta, prior_var_);
}

double MixtureModel::window_loglik(const Vec& theta, const DataWindow& window) const {
  const double v = mixture_marginal_loglik(theta, panel_, window, class_probs_);
  note_evals(static_cast<long long>(panel_.rows()) * window.length());
  return v;
}

Mat MixtureModel::estimate_class_probs(const Mat& theta_draws, const DataWindow& window,
                                       const Mat& prior_probs) const {
  note_aux_evals(static_cast<long long>(theta_draws.rows()) * panel_.rows() * window.length() * 2);
  return mixture_class_probs(theta_draws, panel_, window, prior_probs);
}

void MixtureModel::boundary_fitted(const MixtureFamily& family, const Vec& lambda,
                                   const DataWindow& window, Rng& rng) {
  const DrawBatch batch = family.sample(lambda, prob_draws_, rng);
  class_probs_ = estimate_class_probs(batch.draws, window, class_probs_);
  label_history_.push_back(map_labels());
}

void MixtureModel::reset_history() { label_history_.clear(); }

std::vector<int> MixtureModel::map_labels() const {
  std::vector<int> labels(panel_.rows());
  for (int i = 0; i < panel_.rows(); ++i) labels[i] = class_probs_(i, 1) > class_probs_(i, 0);
  return labels;
}

// ---------------------------------------------------------------------------
// Independent Student-t benchmark
// ---------------------------------------------------------------------------

double independent_predictive_logdensity(std::span<const double> history, double y_future) {
  const int t_n = static_cast<int>(history.size());
  if (t_n < 2) throw InvalidParameterError("predictive needs at least two observations");
  double mean = 0.0;
  for (double v : history) mean += v;
  mean /= t_n;
  double s2 = 0.0;
  for (double v : history) s2 += sq(v - mean);
  s2 /= (t_n - 1);
  if (s2 <= 0.0) throw DegenerateDataError("zero sample variance in predictive");

  const double nu = t_n - 1.0;
  const double scale2 = nu * (t_n + 1.0) * s2 / t_n;  // nu * (per-t scale)^2
  return std::lgamma(0.5 * (nu + 1.0)) - std::lgamma(0.5 * nu) -
         0.5 * std::log(M_PI * scale2) -
         0.5 * (nu + 1.0) * std::log1p(t_n * sq(y_future - mean) / (nu * (t_n + 1.0) * s2));
}

}  // namespace svb
