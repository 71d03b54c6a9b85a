#include "svb/sga.hpp"

#include <algorithm>
#include <cmath>

namespace svb {

AdamState AdamState::create(int size, double rate) {
  AdamState state;
  state.first_moment = Vec::Zero(size);
  state.second_moment = Vec::Zero(size);
  state.base_rate = rate;
  return state;
}

void adam_step(AdamState& state, Vec& lambda, const Vec& gradient) {
  if (!gradient.allFinite()) throw NumericalError("non-finite gradient in ascent step");
  if (gradient.size() != lambda.size() || state.first_moment.size() != lambda.size())
    throw DimensionError("gradient/state size mismatch in ascent step");
  state.step += 1;
  state.first_moment = state.beta1 * state.first_moment + (1.0 - state.beta1) * gradient;
  state.second_moment = state.beta2 * state.second_moment.array().matrix() +
                        (1.0 - state.beta2) * gradient.cwiseProduct(gradient);
  const double c1 = 1.0 - std::pow(state.beta1, state.step);
  const double c2 = 1.0 - std::pow(state.beta2, state.step);
  const Vec m_hat = state.first_moment / c1;
  const Vec v_hat = state.second_moment / c2;
  lambda += state.base_rate *
            (m_hat.array() / (v_hat.array().sqrt() + state.epsilon)).matrix();
}

namespace {

double median_of(Vec values) {
  std::sort(values.data(), values.data() + values.size());
  const Eigen::Index n = values.size();
  if (n == 0) return 0.0;
  return (n % 2 == 1) ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

double tail_mean(const std::vector<double>& values, int window) {
  const int n = static_cast<int>(values.size());
  const int w = std::min(n, window);
  double s = 0.0;
  for (int i = n - w; i < n; ++i) s += values[i];
  return s / w;
}

}  // namespace

SgaResult run_custom(Vec lambda0, const std::function<GradientEstimate(const Vec&, int)>& estimator,
                     int draws, const StopRule& rule, const AdamState& adam_template,
                     const TraceSink& sink) {
  rule.validate();
  AdamState adam = adam_template;
  if (adam.first_moment.size() != lambda0.size()) {
    const double rate = adam_template.base_rate;
    adam = AdamState::create(static_cast<int>(lambda0.size()), rate);
    adam.beta1 = adam_template.beta1;
    adam.beta2 = adam_template.beta2;
    adam.epsilon = adam_template.epsilon;
  }

  SgaResult result;
  result.lambda = std::move(lambda0);
  result.trace.reserve(std::min(rule.max_iterations, 4096));

  std::vector<double> elbos;
  double prev_average = std::numeric_limits<double>::quiet_NaN();
  int consecutive_aborts = 0;

  for (int m = 1; m <= rule.max_iterations; ++m) {
    const GradientEstimate est = estimator(result.lambda, m);

    IterationRecord rec;
    rec.iteration = m;
    rec.elbo = est.elbo_estimate;
    rec.ess = est.effective_sample_size;
    if (est.per_sample_variance.size() > 0 && draws > 0) {
      rec.grad_var_median = median_of(est.per_sample_variance) / draws;
      rec.grad_var_first = est.per_sample_variance[0] / draws;
    }

    if (!est.gradient.allFinite()) {
      if (++consecutive_aborts > 50)
        throw NumericalError("gradient non-finite for 50 consecutive iterations");
      result.trace.push_back(rec);
      if (sink) sink(rec);
      result.iterations = m;
      continue;
    }
    consecutive_aborts = 0;
    rec.grad_norm = est.gradient.norm();
    adam_step(adam, result.lambda, est.gradient);

    result.trace.push_back(rec);
    if (sink) sink(rec);
    result.iterations = m;

    elbos.push_back(est.elbo_estimate);
    const double average = tail_mean(elbos, rule.smoothing_window);
    if (m >= rule.smoothing_window && std::isfinite(prev_average)) {
      const double threshold = rule.tolerance_rel * std::max(1.0, std::abs(average));
      if (std::abs(average - prev_average) < threshold) {
        result.converged = true;
        break;
      }
    }
    prev_average = average;
  }
  return result;
}

SgaResult run_score(const MixtureFamily& family, Vec lambda0, const TargetDensity& target,
                    int draws, const StopRule& rule, Rng& rng, const AdamState& adam_template,
                    const TraceSink& sink) {
  family.validate(lambda0);
  auto estimator = [&](const Vec& lambda, int) {
    return score_gradient(family, lambda, target, draws, rng);
  };
  return run_custom(std::move(lambda0), estimator, draws, rule, adam_template, sink);
}

IsRunResult run_is(const MixtureFamily& family, Vec lambda0, const IsContext& context,
                   const StopRule& rule, const AdamState& adam_template, const TraceSink& sink) {
  family.validate(lambda0);
  IsRunResult out;
  out.min_ess = static_cast<double>(context.batch.size());
  auto estimator = [&](const Vec& lambda, int) {
    GradientEstimate est = is_gradient(family, lambda, context.proposal_family,
                                       context.proposal_lambda, context.batch,
                                       context.prior_logq);
    out.min_ess = std::min(out.min_ess, est.effective_sample_size);
    if (context.ess_warn_floor > 0.0 && est.effective_sample_size < context.ess_warn_floor)
      out.ess_warning = true;
    return est;
  };
  SgaResult base = run_custom(std::move(lambda0), estimator, context.batch.size(), rule,
                              adam_template, sink);
  out.lambda = std::move(base.lambda);
  out.trace = std::move(base.trace);
  out.converged = base.converged;
  out.iterations = base.iterations;
  return out;
}

}  // namespace svb
