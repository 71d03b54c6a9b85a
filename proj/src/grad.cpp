#include "svb/grad.hpp"

#include <cmath>
#include <vector>

namespace svb {

namespace {

// Covariate constant Cov(h f, h) / Var(h) from one index range of the batch,
// all moments taken under the batch weights. Returns 0 when the estimated
// correlation is weak: a weakly coupled a_hat adds more noise than it
// removes.
double covariate_from(const Vec& wv, const Vec& hv, const Vec& fv, int lo, int hi) {
  const int n = hi - lo;
  if (n < 2) return 0.0;
  Vec w(n), wh(n), whh(n), whf(n), whhf(n), whfhf(n);
  for (int i = 0; i < n; ++i) {
    const int j = lo + i;
    w[i] = wv[j];
    wh[i] = wv[j] * hv[j];
    whh[i] = wh[i] * hv[j];
    whf[i] = wh[i] * fv[j];
    whhf[i] = whh[i] * fv[j];
    whfhf[i] = whf[i] * hv[j] * fv[j];
  }
  const double t_w = pairwise_sum(w);
  if (!(t_w > 0.0)) return 0.0;
  const double mean_h = pairwise_sum(wh) / t_w;
  const double mean_hh = pairwise_sum(whh) / t_w;
  const double mean_hf = pairwise_sum(whf) / t_w;
  const double mean_hhf = pairwise_sum(whhf) / t_w;
  const double mean_hfhf = pairwise_sum(whfhf) / t_w;
  const double var_h = mean_hh - mean_h * mean_h;
  const double var_hf = mean_hfhf - mean_hf * mean_hf;
  const double cov = mean_hhf - mean_hf * mean_h;
  if (var_h > 1e-300 && var_hf >= 0.0 && std::isfinite(cov) &&
      cov * cov >= 0.5 * var_h * var_hf)
    return cov / var_h;
  return 0.0;
}

// Shared weighted core. Plain score gradients pass unit weights, so both
// estimators go through identical arithmetic and agree bitwise on a shared
// batch when the weights are one.
//
// Each half of the batch uses a covariate constant estimated from the other
// half. The constant is then independent of every draw it is applied to, so
// the estimator stays exactly unbiased; estimating it from the same draws
// couples it to the score sum and biases the gradient at O(1/S).
GradientEstimate weighted_estimate(const Mat& scores, const Vec& payoff, const Vec& weights,
                                   bool control_variates);

}  // namespace

GradientEstimate weighted_score_estimate(const Mat& scores, const Vec& payoff,
                                         const Vec& weights, bool control_variates) {
  return weighted_estimate(scores, payoff, weights, control_variates);
}

namespace {

GradientEstimate weighted_estimate(const Mat& scores, const Vec& payoff, const Vec& weights,
                                   bool control_variates) {
  const int s = static_cast<int>(scores.rows());
  const int p = static_cast<int>(scores.cols());
  const int half = s / 2;

  GradientEstimate out;
  out.gradient.resize(p);
  out.per_sample_variance = Vec::Zero(p);

  {
    Vec wf(s);
    for (int j = 0; j < s; ++j) wf[j] = weights[j] * payoff[j];
    out.elbo_estimate = pairwise_sum(wf) / s;
  }

  Vec column(s), contrib(s);
  for (int k = 0; k < p; ++k) {
    for (int j = 0; j < s; ++j) column[j] = scores(j, k);
    double a_front = 0.0, a_back = 0.0;
    if (control_variates) {
      a_front = covariate_from(weights, column, payoff, half, s);  // applied to [0, half)
      a_back = covariate_from(weights, column, payoff, 0, half);   // applied to [half, s)
    }
    for (int j = 0; j < s; ++j) {
      const double a_hat = j < half ? a_front : a_back;
      contrib[j] = weights[j] * column[j] * (payoff[j] - a_hat);
    }
    out.gradient[k] = pairwise_sum(contrib) / s;

    if (s >= 2) {
      const double mean_c = out.gradient[k];  // gradient is the mean contribution
      Vec dev(s);
      for (int j = 0; j < s; ++j) dev[j] = sq(contrib[j] - mean_c);
      out.per_sample_variance[k] = pairwise_sum(dev) / (s - 1);
    }
  }
  return out;
}

}  // namespace

GradientEstimate score_gradient_batch(const MixtureFamily& family, const Vec& lambda,
                                      const TargetDensity& target, const DrawBatch& batch,
                                      bool control_variates) {
  const int s = batch.size();
  if (s < 2) throw InvalidParameterError("score gradient needs at least two draws");
  const MixtureFamily::Unpacked u = family.unpack(lambda);

  Mat scores(s, family.lambda_size());
  Vec payoff(s);
  int degenerate = 0;
  for (int j = 0; j < s; ++j) {
    const Vec theta = batch.draws.row(j).transpose();
    const double log_q = family.log_density(u, theta);
    const double log_p = target(theta);
    if (!std::isfinite(log_p)) ++degenerate;
    payoff[j] = log_p - log_q;
    scores.row(j) = family.score(u, theta).transpose();
  }
  if (degenerate == s)
    throw DegenerateTargetError("target evaluated to -inf at every draw: " + target.label);

  GradientEstimate out = weighted_estimate(scores, payoff, Vec::Ones(s), control_variates);
  out.effective_sample_size = s;
  return out;
}

GradientEstimate score_gradient(const MixtureFamily& family, const Vec& lambda,
                                const TargetDensity& target, int draws, Rng& rng,
                                bool control_variates) {
  const DrawBatch batch = family.sample(lambda, draws, rng);
  return score_gradient_batch(family, lambda, target, batch, control_variates);
}

GradientEstimate is_gradient(const MixtureFamily& family, const Vec& lambda_new,
                             const MixtureFamily& proposal_family, const Vec& proposal_lambda,
                             const DrawBatch& batch, const Vec& prior_logq,
                             bool control_variates) {
  if (!(family == proposal_family))
    throw InvalidParameterError("proposal family does not match the update family");
  proposal_family.validate(proposal_lambda);
  const int s = batch.size();
  if (s < 2) throw InvalidParameterError("importance gradient needs at least two draws");
  if (!batch.has_loglik())
    throw InvalidParameterError("importance gradient requires cached window log likelihoods");
  if (prior_logq.size() != s) throw DimensionError("prior log-q length mismatch");

  const MixtureFamily::Unpacked u = family.unpack(lambda_new);
  Mat scores(s, family.lambda_size());
  Vec payoff(s), log_w(s);
  for (int j = 0; j < s; ++j) {
    const Vec theta = batch.draws.row(j).transpose();
    const double log_q_new = family.log_density(u, theta);
    payoff[j] = (batch.cached_loglik[j] + prior_logq[j]) - log_q_new;
    log_w[j] = log_q_new - batch.log_q[j];
    scores.row(j) = family.score(u, theta).transpose();
  }

  // ESS in log space, max-subtracted, so mismatch diagnostics survive extreme
  // weights even when the raw weights would not.
  const double lse1 = log_sum_exp(log_w);
  const double lse2 = log_sum_exp((2.0 * log_w.array()).matrix());
  const double ess = std::exp(2.0 * lse1 - lse2);

  // Guard on the log weights themselves: the vectorized exp clamps deep
  // underflow to denormals rather than zero.
  const double max_log_w = log_w.maxCoeff();
  if (max_log_w > 700.0)
    throw WeightDegeneracyError("importance weights overflow", ess);
  if (max_log_w < -700.0)
    throw WeightDegeneracyError("importance weights all underflow to zero", ess);
  Vec weights(s);
  for (int j = 0; j < s; ++j) weights[j] = std::exp(log_w[j]);

  GradientEstimate out = weighted_estimate(scores, payoff, weights, control_variates);
  out.effective_sample_size = ess;
  return out;
}

double elbo(const MixtureFamily& family, const Vec& lambda, const TargetDensity& target,
            int draws, Rng& rng) {
  if (draws < 1) throw InvalidParameterError("elbo needs at least one draw");
  const DrawBatch batch = family.sample(lambda, draws, rng);
  Vec payoff(draws);
  int degenerate = 0;
  for (int j = 0; j < draws; ++j) {
    const double log_p = target(batch.draws.row(j).transpose());
    if (!std::isfinite(log_p)) ++degenerate;
    payoff[j] = log_p - batch.log_q[j];
  }
  if (degenerate == draws)
    throw DegenerateTargetError("target evaluated to -inf at every draw: " + target.label);
  return pairwise_sum(payoff) / draws;
}

}  // namespace svb
