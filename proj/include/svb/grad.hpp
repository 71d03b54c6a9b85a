#pragma once

#include "svb/family.hpp"
#include "svb/target.hpp"
#include "svb/util.hpp"

namespace svb {

/// One Monte Carlo gradient estimate with its diagnostics. The per-sample
/// variance is the empirical variance across draws of the per-draw gradient
/// contributions; divide by S for the estimator variance.
struct GradientEstimate {
  Vec gradient;
  double elbo_estimate = 0.0;
  Vec per_sample_variance;
  double effective_sample_size = 0.0;
};

/// Score-function estimator with per-coordinate control variates: the
/// covariate constant for coordinate k is Cov(h_k f, h_k) / Var(h_k) where
/// h_k is the score coordinate and f the centered payoff log p - log q.
GradientEstimate score_gradient(const MixtureFamily& family, const Vec& lambda,
                                const TargetDensity& target, int draws, Rng& rng,
                                bool control_variates = true);

/// Same estimator evaluated on an existing batch drawn from `lambda`.
GradientEstimate score_gradient_batch(const MixtureFamily& family, const Vec& lambda,
                                      const TargetDensity& target, const DrawBatch& batch,
                                      bool control_variates = true);

/// Importance-sampled gradient for one update: the batch was drawn once from
/// the previous optimum, its window log likelihood is cached, and only the
/// log density and score under `lambda_new` are recomputed per call.
/// `prior_logq` holds the log density of the pseudo-posterior's carried-over
/// factor at each draw (equal to batch.log_q in the standard recursion).
GradientEstimate is_gradient(const MixtureFamily& family, const Vec& lambda_new,
                             const MixtureFamily& proposal_family, const Vec& proposal_lambda,
                             const DrawBatch& batch, const Vec& prior_logq,
                             bool control_variates = true);

/// Monte Carlo ELBO estimate (mean of log p - log q over fresh draws).
double elbo(const MixtureFamily& family, const Vec& lambda, const TargetDensity& target,
            int draws, Rng& rng);

/// Low-level core shared by every estimator in the library: rows of `scores`
/// are per-draw score vectors, `payoff` the centered log ratios, `weights`
/// the importance weights (ones for plain score estimators). Split-half
/// control variates with a relevance guard; ESS is left for the caller.
GradientEstimate weighted_score_estimate(const Mat& scores, const Vec& payoff,
                                         const Vec& weights, bool control_variates = true);

}  // namespace svb
