#include "svb/mfvb.hpp"

#include <cmath>

namespace svb {

namespace {

inline double norm_logpdf(double x, double mean, double var) {
  return -0.5 * (kLogTwoPi + std::log(var)) - 0.5 * sq(x - mean) / var;
}

// E[log sigma2] from inverse-gamma draws; the scale factors out so only the
// gamma part is sampled.
double sampled_elog_sigma2(double shape, double scale, int draws, Rng& rng) {
  std::gamma_distribution<double> gamma(shape, 1.0);
  double acc = 0.0;
  for (int i = 0; i < draws; ++i) acc += std::log(gamma(rng));
  return std::log(scale) - acc / draws;
}

}  // namespace

void MfvbState::check_positive() const {
  if ((a.array() <= 0.0).any() || (b.array() <= 0.0).any() || (tau.array() <= 0.0).any() ||
      (shape.array() <= 0.0).any() || (scale.array() <= 0.0).any())
    throw NumericalError("factorized state lost positivity");
}

MfvbState mfvb_init(const Mat& panel, int upto, const MfvbHyper& hyper) {
  const int units = static_cast<int>(panel.rows());
  if (upto < 2 || upto > panel.cols()) throw InvalidParameterError("init window invalid");
  MfvbState s;
  s.a = Vec::Ones(units);
  s.b = Vec::Constant(units, hyper.alpha);
  s.gamma.resize(units);
  s.tau.resize(units);
  s.shape.resize(units);
  s.scale.resize(units);
  s.rho = Mat::Identity(units, units);
  const double t_n = static_cast<double>(upto);
  for (int j = 0; j < units; ++j) {
    double mean = 0.0, ss = 0.0;
    for (int t = 0; t < upto; ++t) mean += panel(j, t);
    mean /= t_n;
    for (int t = 0; t < upto; ++t) ss += sq(panel(j, t) - mean);
    s.gamma[j] = mean;
    s.tau[j] = std::max(ss / t_n, 1e-6) / t_n;
    s.shape[j] = hyper.alpha0 + 0.5 * t_n;
    s.scale[j] = hyper.kappa0 + 0.5 * std::max(ss, 1e-6);
  }
  return s;
}

Vec mfvb_elog_beta(const Vec& a, const Vec& b) {
  const int n = static_cast<int>(a.size());
  Vec elog(n);
  double tail = 0.0;  // running sum of E[log(1 - beta'_l)] for l < j
  for (int j = 0; j < n; ++j) {
    const double e_stick = (j == n - 1) ? 0.0 : digamma(a[j]) - digamma(a[j] + b[j]);
    elog[j] = e_stick + tail;
    if (j < n - 1) tail += digamma(b[j]) - digamma(a[j] + b[j]);
  }
  return elog;
}

void mfvb_coordinate_pass(MfvbState& state, const Mat& panel, int upto, const MfvbHyper& hyper,
                          Rng& rng) {
  const int n = static_cast<int>(panel.rows());
  if (upto < 1 || upto > panel.cols()) throw InvalidParameterError("pass boundary outside panel");
  if (state.clusters() != n || state.rho.rows() != n)
    throw DimensionError("state size does not match the panel");
  const double t_n = static_cast<double>(upto);

  // per-unit sufficient statistics over (0, upto]
  Vec sum_y(n), sum_y2(n);
  for (int i = 0; i < n; ++i) {
    double s1 = 0.0, s2 = 0.0;
    for (int t = 0; t < upto; ++t) {
      s1 += panel(i, t);
      s2 += sq(panel(i, t));
    }
    sum_y[i] = s1;
    sum_y2[i] = s2;
  }

  const Vec occupancy = state.rho.colwise().sum().transpose();

  // stick parameters
  for (int j = 0; j < n; ++j) state.a[j] = 1.0 + occupancy[j];
  {
    double suffix = 0.0;
    for (int j = n - 1; j >= 0; --j) {
      state.b[j] = hyper.alpha + suffix;
      suffix += occupancy[j];
    }
  }

  // responsibilities in log space with the freshest stick expectations
  const Vec elog_beta = mfvb_elog_beta(state.a, state.b);
  Vec elog_sigma2(n);
  for (int j = 0; j < n; ++j)
    elog_sigma2[j] = sampled_elog_sigma2(state.shape[j], state.scale[j], hyper.sigma_draws, rng);
  for (int i = 0; i < n; ++i) {
    Vec logs(n);
    for (int j = 0; j < n; ++j) {
      const double quad =
          sum_y2[i] - 2.0 * state.gamma[j] * sum_y[i] + t_n * (sq(state.gamma[j]) + state.tau[j]);
      logs[j] = -0.5 * t_n * elog_sigma2[j] -
                0.5 * (state.shape[j] / state.scale[j]) * quad + elog_beta[j];
    }
    const double total = log_sum_exp(logs);
    for (int j = 0; j < n; ++j) state.rho(i, j) = std::exp(logs[j] - total);
  }

  // cluster locations, then the inverse-gamma parameters
  const Vec occupancy_new = state.rho.colwise().sum().transpose();
  for (int j = 0; j < n; ++j) {
    const double precision_ratio = state.shape[j] / state.scale[j];
    double weighted_sum = 0.0;
    for (int i = 0; i < n; ++i) weighted_sum += state.rho(i, j) * sum_y[i];
    const double denom = hyper.mu_prior_var * t_n * precision_ratio * occupancy_new[j] + 1.0;
    state.gamma[j] = hyper.mu_prior_var * precision_ratio * weighted_sum / denom;
    state.tau[j] = hyper.mu_prior_var / denom;
  }
  for (int j = 0; j < n; ++j) {
    state.shape[j] = hyper.alpha0 + 0.5 * t_n * occupancy_new[j];
    double acc = 0.0;
    for (int i = 0; i < n; ++i)
      acc += state.rho(i, j) *
             (sum_y2[i] + t_n * (sq(state.gamma[j]) + state.tau[j]) -
              2.0 * state.gamma[j] * sum_y[i]);
    state.scale[j] = hyper.kappa0 + 0.5 * acc;
  }
  state.check_positive();
}

MfvbFit mfvb_fit(const Mat& panel, int upto, const MfvbHyper& hyper, double tol, int max_passes,
                 std::uint64_t seed) {
  if (upto < 2) throw InvalidParameterError("fit needs at least two observations per unit");
  if (tol <= 0.0 || max_passes < 1) throw InvalidParameterError("bad stopping parameters");
  Rng rng(seed);
  MfvbFit fit;
  fit.state = mfvb_init(panel, upto, hyper);

  for (int pass = 1; pass <= max_passes; ++pass) {
    const MfvbState before = fit.state;
    mfvb_coordinate_pass(fit.state, panel, upto, hyper, rng);
    fit.passes = pass;
    // relative changes: the inverse-gamma scales run orders of magnitude
    // above the responsibilities, and the sampled expectation keeps a small
    // relative noise floor per pass
    const auto rel = [](const Vec& now, const Vec& was) {
      return ((now - was).cwiseAbs().array() / (1.0 + was.cwiseAbs().array())).maxCoeff();
    };
    double delta = rel(fit.state.a, before.a);
    delta = std::max(delta, rel(fit.state.b, before.b));
    delta = std::max(delta, rel(fit.state.gamma, before.gamma));
    delta = std::max(delta, rel(fit.state.tau, before.tau));
    delta = std::max(delta, rel(fit.state.shape, before.shape));
    delta = std::max(delta, rel(fit.state.scale, before.scale));
    delta = std::max(delta, (fit.state.rho - before.rho).cwiseAbs().maxCoeff());
    if (delta < tol) {
      fit.converged = true;
      break;
    }
  }
  return fit;
}

double mfvb_predictive_logscore(const MfvbState& state, int unit, double y, int draws, Rng& rng) {
  if (draws < 1) throw InvalidParameterError("predictive needs at least one draw");
  if (unit < 0 || unit >= state.rho.rows()) throw DimensionError("unit outside the state");
  std::normal_distribution<double> n01;
  std::uniform_real_distribution<double> unif;
  const int n = state.clusters();

  Vec logs(draws);
  for (int m = 0; m < draws; ++m) {
    double u = unif(rng);
    int k = 0;
    while (k + 1 < n && (u -= state.rho(unit, k)) > 0.0) ++k;
    const double mu = state.gamma[k] + std::sqrt(state.tau[k]) * n01(rng);
    std::gamma_distribution<double> gamma(state.shape[k], 1.0);
    const double sigma2 = state.scale[k] / gamma(rng);
    logs[m] = norm_logpdf(y, mu, sigma2);
  }
  return log_sum_exp(logs) - std::log(static_cast<double>(draws));
}

}  // namespace svb
