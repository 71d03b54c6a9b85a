#pragma once

#include <functional>
#include <memory>
#include <string>

#include "svb/family.hpp"
#include "svb/util.hpp"

namespace svb {

/// Half-open range of observation indices (lo, hi]. Updates consume disjoint
/// windows, so each observation enters a likelihood exactly once per run.
struct DataWindow {
  int lo = 0;
  int hi = 0;

  int length() const { return hi - lo; }
  void validate() const {
    if (lo < 0 || hi <= lo) throw ScheduleError("window (" + std::to_string(lo) + ", " +
                                                std::to_string(hi) + "] is empty or invalid");
  }
};

/// Unnormalized log density over parameter space. Evaluation is pure; -inf
/// marks points outside the support.
struct TargetDensity {
  std::function<double(const Vec&)> log_density;
  std::string label;

  double operator()(const Vec& theta) const { return log_density(theta); }
};

using WindowLogLik = std::function<double(const Vec&, const DataWindow&)>;

/// log prior + window log likelihood.
TargetDensity compose_posterior(TargetDensity log_prior, WindowLogLik log_lik,
                                DataWindow window);

/// Pseudo-posterior: window log likelihood + log density of the previous
/// optimum, which stands in for the prior at this update.
TargetDensity compose_pseudo_posterior(const MixtureFamily& prev_family, Vec prev_lambda,
                                       WindowLogLik log_lik, DataWindow window);

}  // namespace svb
