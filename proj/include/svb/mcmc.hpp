#pragma once

#include "svb/target.hpp"
#include "svb/util.hpp"

namespace svb {

/// Random-walk Metropolis-Hastings with a spherical Gaussian proposal. The
/// proposal scale adapts toward 0.234 acceptance during burn-in and is frozen
/// afterwards.
struct ChainConfig {
  int iterations = 15000;
  int burn_in = 10000;
  double initial_scale = 0.5;
  std::uint64_t seed = 1;
  Vec init;  // empty = zeros

  void validate() const {
    if (burn_in < 0 || iterations <= burn_in)
      throw InvalidParameterError("chain needs iterations > burn_in >= 0");
    if (initial_scale <= 0.0) throw InvalidParameterError("proposal scale must be positive");
  }
};

struct ChainResult {
  Mat draws;                  // retained x d
  double acceptance_rate = 0.0;  // post burn-in
  double final_scale = 0.0;
  bool stuck_warning = false;    // no acceptance over 1000 post burn-in proposals
};

ChainResult rwmh_sample(const TargetDensity& target, int dim, const ChainConfig& config);

}  // namespace svb
