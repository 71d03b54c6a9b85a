#include "svb/target.hpp"

namespace svb {

TargetDensity compose_posterior(TargetDensity log_prior, WindowLogLik log_lik,
                                DataWindow window) {
  window.validate();
  TargetDensity out;
  out.label = log_prior.label.empty() ? "posterior" : "posterior(" + log_prior.label + ")";
  out.log_density = [prior = std::move(log_prior), lik = std::move(log_lik),
                     window](const Vec& theta) {
    return prior.log_density(theta) + lik(theta, window);
  };
  return out;
}

TargetDensity compose_pseudo_posterior(const MixtureFamily& prev_family, Vec prev_lambda,
                                       WindowLogLik log_lik, DataWindow window) {
  window.validate();
  prev_family.validate(prev_lambda);
  auto unpacked = std::make_shared<MixtureFamily::Unpacked>(prev_family.unpack(prev_lambda));
  TargetDensity out;
  out.label = "pseudo-posterior(" + std::to_string(window.lo) + "," +
              std::to_string(window.hi) + "]";
  out.log_density = [family = prev_family, unpacked, lik = std::move(log_lik),
                     window](const Vec& theta) {
    return lik(theta, window) + family.log_density(*unpacked, theta);
  };
  return out;
}

}  // namespace svb
