#pragma once

#include "svb/util.hpp"

namespace svb {

/// Fully factorized coordinate-ascent comparator for the cluster panel under
/// the stick-breaking construction, truncated at N sticks. The base measure
/// on sigma2* is the conjugate inverse gamma whose parameters were fitted to
/// the lognormal(0, 10) used by the gradient-based runs.
struct MfvbHyper {
  double alpha0 = 0.15275;   // inverse-gamma shape
  double kappa0 = 0.00102;   // inverse-gamma scale
  double alpha = 1.0;        // stick concentration
  double mu_prior_var = 10.0;
  int sigma_draws = 1000;    // draws behind E[log sigma2*] per cluster per pass
};

struct MfvbState {
  Vec a, b;          // Beta parameters per stick
  Mat rho;           // N x N responsibilities, rows sum to one
  Vec gamma, tau;    // location mean / variance per cluster
  Vec shape, scale;  // inverse-gamma parameters per cluster

  int clusters() const { return static_cast<int>(a.size()); }
  void check_positive() const;
};

/// Singleton start: unit i opens stick i with moments conditioned on its own
/// window. Undifferentiated clusters would otherwise collapse onto the first
/// stick before the location updates can separate them.
MfvbState mfvb_init(const Mat& panel, int upto, const MfvbHyper& hyper);

/// E[log beta_j] under the current Beta parameters (digamma identities, with
/// the final stick forced to one).
Vec mfvb_elog_beta(const Vec& a, const Vec& b);

/// One sweep of the update equations in order (a, b, rho, gamma, tau, shape,
/// scale), each using the freshest values.
void mfvb_coordinate_pass(MfvbState& state, const Mat& panel, int upto, const MfvbHyper& hyper,
                          Rng& rng);

struct MfvbFit {
  MfvbState state;
  int passes = 0;
  bool converged = false;
};

MfvbFit mfvb_fit(const Mat& panel, int upto, const MfvbHyper& hyper, double tol, int max_passes,
                 std::uint64_t seed);

/// Draw-averaged predictive density of y for one unit under the factorized
/// approximation.
double mfvb_predictive_logscore(const MfvbState& state, int unit, double y, int draws, Rng& rng);

}  // namespace svb
