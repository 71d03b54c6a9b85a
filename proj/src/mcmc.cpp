#include "svb/mcmc.hpp"

#include <cmath>

namespace svb {

ChainResult rwmh_sample(const TargetDensity& target, int dim, const ChainConfig& config) {
  config.validate();
  Rng rng(config.seed);
  std::normal_distribution<double> unit;
  std::uniform_real_distribution<double> uniform(0.0, 1.0);

  Vec current = config.init.size() == dim ? config.init : Vec::Zero(dim);
  double current_logp = target(current);
  if (!std::isfinite(current_logp))
    throw InvalidParameterError("chain initial point has zero target density");

  double log_scale = std::log(config.initial_scale);

  ChainResult result;
  result.draws.resize(config.iterations - config.burn_in, dim);
  long long accepted_post = 0;
  int since_accept = 0;

  Vec proposal(dim);
  for (int m = 1; m <= config.iterations; ++m) {
    const double scale = std::exp(log_scale);
    for (int i = 0; i < dim; ++i) proposal[i] = current[i] + scale * unit(rng);
    const double prop_logp = target(proposal);
    const double log_alpha = prop_logp - current_logp;
    const double alpha = std::isfinite(log_alpha) ? std::min(1.0, std::exp(log_alpha)) : 0.0;
    const bool accept = uniform(rng) < alpha;
    if (accept) {
      current = proposal;
      current_logp = prop_logp;
    }

    if (m <= config.burn_in) {
      // Robbins-Monro tuning toward the 0.234 acceptance target
      log_scale += std::pow(static_cast<double>(m), -0.6) * (alpha - 0.234);
    } else {
      result.draws.row(m - config.burn_in - 1) = current.transpose();
      if (accept) {
        ++accepted_post;
        since_accept = 0;
      } else if (++since_accept >= 1000) {
        result.stuck_warning = true;
      }
    }
  }
  result.acceptance_rate =
      static_cast<double>(accepted_post) / static_cast<double>(config.iterations - config.burn_in);
  result.final_scale = std::exp(log_scale);
  return result;
}

}  // namespace svb
