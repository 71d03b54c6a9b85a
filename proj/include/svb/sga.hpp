#pragma once

#include <functional>
#include <vector>

#include "svb/grad.hpp"

namespace svb {

/// Adaptive-moment state for the ascent recursion. Step sizes are additive:
/// lambda <- lambda + rate * m_hat / (sqrt(v_hat) + epsilon).
struct AdamState {
  int step = 0;
  Vec first_moment;
  Vec second_moment;
  double base_rate = 0.05;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  static AdamState create(int size, double rate = 0.05);
};

/// Stops once the moving average of the ELBO trace changes by less than
/// tolerance_rel * max(1, |average|) between consecutive iterations. The
/// check arms only after a full smoothing window, since single-draw ELBO
/// differences are too noisy to compare directly.
struct StopRule {
  double tolerance_rel = 3e-6;
  int smoothing_window = 50;
  int max_iterations = 1000;

  void validate() const {
    if (tolerance_rel <= 0.0) throw InvalidParameterError("stop tolerance must be positive");
    if (smoothing_window < 1) throw InvalidParameterError("smoothing window must be >= 1");
    if (max_iterations < 1) throw InvalidParameterError("max iterations must be >= 1");
  }
};

struct IterationRecord {
  int iteration = 0;
  double elbo = 0.0;
  double grad_norm = 0.0;
  double grad_var_median = 0.0;   // median estimator variance across coordinates
  double grad_var_first = 0.0;    // estimator variance of the first mean coordinate
  double ess = 0.0;
};

struct SgaResult {
  Vec lambda;
  std::vector<IterationRecord> trace;
  bool converged = false;
  int iterations = 0;
};

using TraceSink = std::function<void(const IterationRecord&)>;

/// One bias-corrected Adam ascent step; throws on non-finite gradients
/// without touching the state.
void adam_step(AdamState& state, Vec& lambda, const Vec& gradient);

/// SGA with fresh draws per iteration (plain score gradients).
SgaResult run_score(const MixtureFamily& family, Vec lambda0, const TargetDensity& target,
                    int draws, const StopRule& rule, Rng& rng,
                    const AdamState& adam_template = {}, const TraceSink& sink = nullptr);

/// Context for a single importance-sampled update: draws and their window
/// log likelihoods are fixed for every iteration.
struct IsContext {
  MixtureFamily proposal_family;
  Vec proposal_lambda;
  DrawBatch batch;
  Vec prior_logq;
  double ess_warn_floor = 0.0;   // <= 0 disables the warning

  explicit IsContext(MixtureFamily family) : proposal_family(std::move(family)) {}
};

struct IsRunResult : SgaResult {
  double min_ess = 0.0;
  bool ess_warning = false;
};

/// SGA where every gradient reuses the update's single batch.
IsRunResult run_is(const MixtureFamily& family, Vec lambda0, const IsContext& context,
                   const StopRule& rule, const AdamState& adam_template = {},
                   const TraceSink& sink = nullptr);

/// SGA with a caller-supplied estimator, for targets whose draw mechanics are
/// richer than a plain mixture family (indicator augmentation, hybrids).
/// `draws` is the per-iteration sample size behind the estimator, used to
/// scale per-sample variances into estimator variances for the trace.
SgaResult run_custom(Vec lambda0, const std::function<GradientEstimate(const Vec&, int)>& estimator,
                     int draws, const StopRule& rule, const AdamState& adam_template = {},
                     const TraceSink& sink = nullptr);

}  // namespace svb
