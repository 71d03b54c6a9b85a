#pragma once

#include <span>
#include <vector>

#include "svb/engines.hpp"

namespace svb {

// ---------------------------------------------------------------------------
// Conjugate normal mean model (known observation variance). The closed-form
// posterior makes it the validation workhorse for every engine.
// ---------------------------------------------------------------------------

class ConjugateNormalModel : public StreamModel {
 public:
  ConjugateNormalModel(Vec observations, double obs_var = 1.0, double prior_mean = 0.0,
                       double prior_var = 1.0);

  int dim() const override { return 1; }
  int length() const override { return static_cast<int>(y_.size()); }
  double log_prior(const Vec& theta) const override;
  double window_loglik(const Vec& theta, const DataWindow& window) const override;

  double posterior_mean(int upto) const;
  double posterior_var(int upto) const;

 private:
  Vec y_;
  double obs_var_, prior_mean_, prior_var_;
};

// ---------------------------------------------------------------------------
// AR(3) time series
// ---------------------------------------------------------------------------

struct Ar3Params {
  double mu = 0.0;
  double phi1 = 0.0, phi2 = 0.0, phi3 = 0.0;
  double log_sigma2 = 0.0;

  Vec to_vec() const;
  static Ar3Params from_vec(const Vec& theta);
};

/// Coefficient/level draw for simulation studies: mu and each phi from
/// N(0,1), the phi triple rejection-sampled to the stationary region
/// (companion-matrix eigenvalues inside the unit circle), precision from
/// Gamma(5, 5).
Ar3Params ar3_draw_params(Rng& rng);

bool ar3_stationary(double phi1, double phi2, double phi3);

/// Simulates T observations after a 50-step burn-in started at the level.
Vec ar3_simulate(const Ar3Params& params, int T, Rng& rng);

/// Sum of one-step conditional normal log densities for t in (lo, hi],
/// conditioning on the three observations before each t. The first three
/// observations of the series are conditioned on, never scored.
double ar3_window_loglik(const Ar3Params& params, const Vec& series, const DataWindow& window);

/// log of the draw-averaged one-step density at y_next given the last three
/// observations (most recent first).
double ar3_predictive_logscore(const Mat& theta_draws, const Vec& last3, double y_next);

class Ar3Model : public StreamModel {
 public:
  explicit Ar3Model(Vec series, double prior_var = 10.0);

  int dim() const override { return 5; }
  int length() const override { return static_cast<int>(series_.size()); }
  double log_prior(const Vec& theta) const override;
  double window_loglik(const Vec& theta, const DataWindow& window) const override;

  const Vec& series() const { return series_; }
  Vec last3(int upto) const;  // lags for predicting y_{upto+1}

 private:
  Vec series_;
  double prior_var_;
};

// ---------------------------------------------------------------------------
// Two-component cross-sectional mixture panel
// ---------------------------------------------------------------------------

struct MixturePanel {
  Mat y;                    // N x T
  std::vector<int> labels;  // true k_i in {0, 1}
};

/// k_i ~ Bernoulli(pi), mu_j ~ N(0, 0.25), sigma2_j ~ U(1, 2).
MixturePanel mixture_simulate(int units, int T, Rng& rng, double pi = 0.5);

/// Marginal prior Pr(k_i = j) after integrating the Beta(alpha, beta) mixing
/// weight out.
double mixture_marginal_prior(int j, double alpha, double beta);

/// theta = (log sigma2_0, log sigma2_1, mu_0, mu_1); log likelihood of unit
/// rows over the window columns given component j.
double mixture_unit_loglik(const Vec& theta, const Mat& panel, int unit, const DataWindow& window,
                           int component);

/// Draw-averaged likelihood times prior, normalized per unit in log space.
Mat mixture_class_probs(const Mat& theta_draws, const Mat& panel, const DataWindow& window,
                        const Mat& prior_probs);

/// Sum over units of log sum_j window-likelihood(unit | j) * prior(unit, j):
/// the marginal target used by every gradient in the clustering study.
double mixture_marginal_loglik(const Vec& theta, const Mat& panel, const DataWindow& window,
                               const Mat& prior_probs);

/// Agreement rate folded for label switching; in [1/2, 1] for even splits.
double classification_accuracy(const std::vector<int>& estimated, const std::vector<int>& truth);

class MixtureModel : public StreamModel {
 public:
  MixtureModel(Mat panel, double alpha = 1.0, double beta = 1.0, double prior_var = 10.0,
               int prob_draws = 100);

  int dim() const override { return 4; }
  int length() const override { return static_cast<int>(panel_.cols()); }
  int units() const { return static_cast<int>(panel_.rows()); }
  double log_prior(const Vec& theta) const override;
  double window_loglik(const Vec& theta, const DataWindow& window) const override;

  /// Refreshes the per-unit class probabilities from the just-fitted
  /// approximation and the window it consumed (auxiliary counter).
  void boundary_fitted(const MixtureFamily& family, const Vec& lambda, const DataWindow& window,
                       Rng& rng) override;

  const Mat& class_probs() const { return class_probs_; }
  void reset_class_probs();
  std::vector<int> map_labels() const;

  /// Argmax labels recorded after each boundary refresh, in boundary order.
  const std::vector<std::vector<int>>& label_history() const { return label_history_; }
  void reset_history();

  /// Class probabilities from external draws over an arbitrary window and
  /// prior table (the scoring path for one-shot fits and chains).
  Mat estimate_class_probs(const Mat& theta_draws, const DataWindow& window,
                           const Mat& prior_probs) const;

  const Mat& panel() const { return panel_; }
  Mat initial_probs() const;

 private:
  Mat panel_;
  Mat class_probs_;  // N x 2, conditioned on everything consumed so far
  std::vector<std::vector<int>> label_history_;
  double alpha_, beta_, prior_var_;
  int prob_draws_;
};

// ---------------------------------------------------------------------------
// Independent per-unit benchmark predictive
// ---------------------------------------------------------------------------

/// Closed-form posterior predictive of a normal model with the uninformative
/// prior 1/sigma2: a location-scale Student-t with T-1 degrees of freedom.
double independent_predictive_logdensity(std::span<const double> history, double y_future);

}  // namespace svb
