#pragma once

#include <vector>

#include "svb/grad.hpp"
#include "svb/sga.hpp"

namespace svb {

/// Hierarchical normal-means study: y_j ~ N(theta_j, sigma_j^2) with known
/// sigma_j and (theta_j - mu)/tau ~ t(nu). Parameter space is
/// (mu, log tau, theta_1, ..., theta_n). The hyper-prior is a broad proper
/// one, mu ~ N(0, 50^2) and log tau ~ N(log 10, 1.5^2): with one or two
/// schools a flat hyper-prior leaves the posterior improper, which sends the
/// first-stage KL minimization to infinite scales and poisons the recursion.
struct SchoolsData {
  Vec y;
  Vec sigma;
  double nu = 4.0;

  int size() const { return static_cast<int>(y.size()); }
  void validate() const {
    if (y.size() != sigma.size() || y.size() == 0)
      throw DimensionError("schools data needs matching non-empty y and sigma");
    if ((sigma.array() <= 0.0).any()) throw InvalidParameterError("sigma must be positive");
  }
};

/// The canonical coaching-effect dataset used throughout the literature.
SchoolsData canonical_schools();

double student_t_logpdf(double z, double nu);

/// Exact log posterior over (mu, log tau, theta_{order[0..n-1]}).
TargetDensity schools_target(const SchoolsData& data, const std::vector<int>& order, int n);

/// Pseudo-posterior appending school `order[n]`: new-school likelihood and
/// hierarchy factor times the previous optimum's density.
TargetDensity schools_update_target(const SchoolsData& data, const std::vector<int>& order, int n,
                                    const MixtureFamily& prev_family, const Vec& prev_lambda);

/// Embed the previous optimum and give the appended school a warm block.
std::pair<MixtureFamily, Vec> schools_grow_lambda(const MixtureFamily& prev_family,
                                                  const Vec& prev_lambda);

struct SchoolsStep {
  MixtureFamily family;
  Vec lambda;
  int iterations = 0;
  bool converged = false;
  double min_ess = 0.0;
};

/// One update with score gradients on the grown joint target.
SchoolsStep schools_uvb_update(const SchoolsData& data, const std::vector<int>& order, int n,
                               const MixtureFamily& prev_family, const Vec& prev_lambda,
                               int draws, const StopRule& rule, const AdamState& adam, Rng& rng);

/// One update with the hybrid estimator: the carried block (mu, log tau,
/// existing thetas) is importance-sampled from the previous optimum with a
/// batch fixed across iterations; the appended theta is drawn fresh from the
/// exact Gaussian conditional of the current candidate and contributes score
/// terms directly.
SchoolsStep schools_hybrid_update(const SchoolsData& data, const std::vector<int>& order, int n,
                                  const MixtureFamily& prev_family, const Vec& prev_lambda,
                                  int draws, const StopRule& rule, const AdamState& adam,
                                  Rng& rng);

enum class SchoolsMethod { Svb, Uvb, UvbIs };

/// Full sequential pass over the ordering; returns the per-stage optima.
std::vector<SchoolsStep> schools_sequence(const SchoolsData& data, const std::vector<int>& order,
                                          SchoolsMethod method, int draws, const StopRule& rule,
                                          const AdamState& adam, std::uint64_t seed);

}  // namespace svb
