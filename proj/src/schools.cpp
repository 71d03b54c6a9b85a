#include "svb/schools.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

namespace svb {

namespace {

inline double norm_logpdf(double x, double mean, double var) {
  return -0.5 * (kLogTwoPi + std::log(var)) - 0.5 * sq(x - mean) / var;
}

void check_order(const SchoolsData& data, const std::vector<int>& order, int n) {
  data.validate();
  if (n < 1 || n > static_cast<int>(order.size()))
    throw DimensionError("stage index outside the ordering");
  for (int idx : order)
    if (idx < 0 || idx >= data.size()) throw DimensionError("ordering indexes a missing school");
}

inline double hyper_log_prior(double mu, double log_tau) {
  return norm_logpdf(mu, 0.0, 2500.0) + norm_logpdf(log_tau, std::log(10.0), 2.25);
}

}  // namespace

SchoolsData canonical_schools() {
  SchoolsData d;
  d.y.resize(8);
  d.y << 28.0, 8.0, -3.0, 7.0, -1.0, 1.0, 18.0, 12.0;
  d.sigma.resize(8);
  d.sigma << 15.0, 10.0, 16.0, 11.0, 9.0, 11.0, 10.0, 18.0;
  return d;
}

double student_t_logpdf(double z, double nu) {
  return std::lgamma(0.5 * (nu + 1.0)) - std::lgamma(0.5 * nu) - 0.5 * std::log(nu * M_PI) -
         0.5 * (nu + 1.0) * std::log1p(z * z / nu);
}

TargetDensity schools_target(const SchoolsData& data, const std::vector<int>& order, int n) {
  check_order(data, order, n);
  TargetDensity out;
  out.label = "schools-" + std::to_string(n);
  out.log_density = [data, order, n](const Vec& theta) {
    if (theta.size() != n + 2) throw DimensionError("schools target dimension mismatch");
    const double mu = theta[0];
    const double log_tau = theta[1];
    const double tau = std::exp(log_tau);
    double v = hyper_log_prior(mu, log_tau);
    for (int j = 0; j < n; ++j) {
      const int school = order[j];
      const double effect = theta[2 + j];
      v += norm_logpdf(data.y[school], effect, sq(data.sigma[school]));
      v += student_t_logpdf((effect - mu) / tau, data.nu) - log_tau;
    }
    return v;
  };
  return out;
}

TargetDensity schools_update_target(const SchoolsData& data, const std::vector<int>& order, int n,
                                    const MixtureFamily& prev_family, const Vec& prev_lambda) {
  check_order(data, order, n + 1);
  prev_family.validate(prev_lambda);
  if (prev_family.dim() != n + 2) throw DimensionError("previous approximation has wrong size");
  auto unpacked = std::make_shared<MixtureFamily::Unpacked>(prev_family.unpack(prev_lambda));
  TargetDensity out;
  out.label = "schools-update-" + std::to_string(n + 1);
  out.log_density = [data, order, n, family = prev_family, unpacked](const Vec& theta) {
    if (theta.size() != n + 3) throw DimensionError("schools update dimension mismatch");
    const int school = order[n];
    const double mu = theta[0];
    const double log_tau = theta[1];
    const double effect = theta[2 + n];
    double v = norm_logpdf(data.y[school], effect, sq(data.sigma[school]));
    v += student_t_logpdf((effect - mu) / std::exp(log_tau), data.nu) - log_tau;
    v += family.log_density(*unpacked, theta.head(n + 2));
    return v;
  };
  return out;
}

std::pair<MixtureFamily, Vec> schools_grow_lambda(const MixtureFamily& prev_family,
                                                  const Vec& prev_lambda) {
  // appended school effect starts at the population-mean estimate with the
  // hierarchy's scale estimate
  const Vec mean = prev_family.mean_of(prev_lambda);
  const double tau_hat = std::exp(std::min(mean[1], 4.0));
  const Vec new_lambda = prev_family.grow(prev_lambda, Vec::Constant(1, mean[0]),
                                          std::clamp(tau_hat, 1.0, 25.0));
  return {MixtureFamily(prev_family.dim() + 1, 1), new_lambda};
}

SchoolsStep schools_uvb_update(const SchoolsData& data, const std::vector<int>& order, int n,
                               const MixtureFamily& prev_family, const Vec& prev_lambda,
                               int draws, const StopRule& rule, const AdamState& adam, Rng& rng) {
  auto [family, lambda0] = schools_grow_lambda(prev_family, prev_lambda);
  const TargetDensity target = schools_update_target(data, order, n, prev_family, prev_lambda);
  SgaResult sga = run_score(family, std::move(lambda0), target, draws, rule, rng, adam);
  return {family, std::move(sga.lambda), sga.iterations, sga.converged,
          static_cast<double>(draws)};
}

SchoolsStep schools_hybrid_update(const SchoolsData& data, const std::vector<int>& order, int n,
                                  const MixtureFamily& prev_family, const Vec& prev_lambda,
                                  int draws, const StopRule& rule, const AdamState& adam,
                                  Rng& rng) {
  check_order(data, order, n + 1);
  auto [family, lambda0] = schools_grow_lambda(prev_family, prev_lambda);
  const int d_old = prev_family.dim();
  const int d = family.dim();
  const int school = order[n];
  const double obs_var = sq(data.sigma[school]);

  // carried block sampled once from the previous optimum
  const DrawBatch batch = prev_family.sample(prev_lambda, draws, rng);

  SchoolsStep step{family, Vec(), 0, false, static_cast<double>(draws)};
  std::vector<int> old_coords(d_old);
  for (int i = 0; i < d_old; ++i) old_coords[i] = i;

  auto estimator = [&, family = family](const Vec& lambda, int) {
    const MixtureFamily::Unpacked u = family.unpack(lambda);
    const Vec full_mean = lambda.head(d);
    const Mat cov = u.scale[0] * u.scale[0].transpose();

    // Gaussian conditional of the appended coordinate given the carried
    // block, and the carried-block marginal for the importance weights
    Eigen::LLT<Mat> llt(cov.topLeftCorner(d_old, d_old));
    if (llt.info() != Eigen::Success)
      throw NumericalError("carried-block covariance lost positive definiteness");
    const Vec gain = llt.solve(cov.block(0, d - 1, d_old, 1));
    const double cond_var =
        cov(d - 1, d - 1) - (cov.block(0, d - 1, d_old, 1).transpose() * gain)(0, 0);
    if (cond_var <= 0.0) throw NumericalError("appended-coordinate conditional variance <= 0");
    const double cond_sd = std::sqrt(cond_var);

    const auto marginal = family.marginal(lambda, old_coords);
    const MixtureFamily::Unpacked mu_old = marginal.first.unpack(marginal.second);

    std::normal_distribution<double> n01;
    Mat scores(draws, family.lambda_size());
    Vec payoff(draws), log_w(draws);
    Vec theta(d);
    for (int j = 0; j < draws; ++j) {
      const Vec x = batch.draws.row(j).transpose();
      const double cond_mean = full_mean[d - 1] + gain.dot(x - full_mean.head(d_old));
      const double z = cond_mean + cond_sd * n01(rng);
      theta.head(d_old) = x;
      theta[d - 1] = z;

      const double mu = x[0];
      const double log_tau = x[1];
      const double log_p = norm_logpdf(data.y[school], z, obs_var) +
                           student_t_logpdf((z - mu) / std::exp(log_tau), data.nu) - log_tau +
                           batch.log_q[j];
      payoff[j] = log_p - family.log_density(u, theta);
      scores.row(j) = family.score(u, theta).transpose();
      log_w[j] = marginal.first.log_density(mu_old, x) - batch.log_q[j];
    }

    const double lse1 = log_sum_exp(log_w);
    const double lse2 = log_sum_exp((2.0 * log_w.array()).matrix());
    const double ess = std::exp(2.0 * lse1 - lse2);
    step.min_ess = std::min(step.min_ess, ess);
    if (log_w.maxCoeff() > 700.0 || log_w.maxCoeff() < -700.0)
      throw WeightDegeneracyError("hybrid update weights degenerate", ess);
    Vec weights(draws);
    for (int j = 0; j < draws; ++j) weights[j] = std::exp(log_w[j]);

    GradientEstimate est = weighted_score_estimate(scores, payoff, weights);
    est.effective_sample_size = ess;
    return est;
  };

  SgaResult sga = run_custom(std::move(lambda0), estimator, draws, rule, adam);
  step.lambda = std::move(sga.lambda);
  step.iterations = sga.iterations;
  step.converged = sga.converged;
  return step;
}

std::vector<SchoolsStep> schools_sequence(const SchoolsData& data, const std::vector<int>& order,
                                          SchoolsMethod method, int draws, const StopRule& rule,
                                          const AdamState& adam, std::uint64_t seed) {
  data.validate();
  if (order.empty()) throw DimensionError("empty school ordering");
  std::vector<SchoolsStep> steps;
  Rng rng(seed);

  for (int n = 1; n <= static_cast<int>(order.size()); ++n) {
    if (method == SchoolsMethod::Svb || n == 1) {
      MixtureFamily family(n + 2, 1);
      Vec lambda0 = family.init_lambda();
      lambda0[1] = std::log(5.0);  // start the scale parameter wide
      const TargetDensity target = schools_target(data, order, n);
      SgaResult sga = run_score(family, std::move(lambda0), target, draws, rule, rng, adam);
      steps.push_back({family, std::move(sga.lambda), sga.iterations, sga.converged,
                       static_cast<double>(draws)});
    } else if (method == SchoolsMethod::Uvb) {
      steps.push_back(schools_uvb_update(data, order, n - 1, steps.back().family,
                                         steps.back().lambda, draws, rule, adam, rng));
    } else {
      steps.push_back(schools_hybrid_update(data, order, n - 1, steps.back().family,
                                            steps.back().lambda, draws, rule, adam, rng));
    }
  }
  return steps;
}

}  // namespace svb
