#pragma once

#include <vector>

#include "svb/grad.hpp"
#include "svb/sga.hpp"

namespace svb {

/// Infinite-mixture panel model under a Dirichlet-process prior in its
/// sequential (restaurant) representation. Units i carry bivariate locations
/// theta*_{k_i} = (mu*, log sigma2*); the approximation keeps one bivariate
/// normal per potential cluster plus the exact indicator conditionals, so
/// dependence between locations and indicators survives the factorization.
struct DpmConfig {
  double alpha = 1.0;                 // concentration
  double base_mean = 0.0;             // G0 = N(base_mean * 1, base_var * I)
  double base_var = 10.0;
  int marginal_draws = 100;           // M for indicator marginalization/weights

  void validate() const {
    if (alpha <= 0.0) throw InvalidParameterError("concentration must be positive");
    if (base_var <= 0.0) throw InvalidParameterError("base variance must be positive");
    if (marginal_draws < 1) throw InvalidParameterError("marginal draws must be >= 1");
  }
};

/// Product of independent bivariate normals over the N unique locations:
/// per cluster (mean_mu, mean_ls, l11, l21, l22) with log-stored diagonals,
/// 5N auxiliary parameters in total.
class ClusterGaussians {
 public:
  explicit ClusterGaussians(int clusters);

  int clusters() const { return clusters_; }
  int lambda_size() const { return 5 * clusters_; }

  Vec init_lambda(Rng* rng = nullptr) const;
  void validate(const Vec& lambda) const;

  /// One joint draw of all cluster locations; out is 2 x N (mu row, ls row).
  Mat sample_locations(const Vec& lambda, Rng& rng) const;
  double log_density(const Vec& lambda, const Mat& locations) const;
  Vec score(const Vec& lambda, const Mat& locations) const;

  Vec cluster_mean(const Vec& lambda, int j) const;      // (mu, ls) means
  Mat cluster_covariance(const Vec& lambda, int j) const;

 private:
  int clusters_;
};

/// Sequential-allocation prior probabilities for unit i given the previous
/// assignments: occupancy counts over alpha + i - 1, plus the new-table mass.
Vec crp_prior_prob(double alpha, const std::vector<int>& previous);

/// Normalized product of indicator prior and per-cluster window likelihood,
/// all in log space. `log_lik` has one entry per admissible cluster.
Vec full_conditional_k(const Vec& log_lik, const Vec& prior_probs);

/// Panel state after a boundary: the fitted location parameters, the
/// marginal indicator table that fed the fit (empty at the first boundary,
/// where the sequential restaurant conditionals apply directly), and the
/// window the fit consumed.
struct ClusterState {
  Vec lambda;            // ClusterGaussians parameters
  Mat indicator_table;   // N x N marginal q(k_i = j | earlier data); empty at T1
  int boundary = 0;
  int lo = 0;
  int hi = 0;
};

class DpmModel {
 public:
  DpmModel(Mat panel, DpmConfig config);

  int units() const { return static_cast<int>(panel_.rows()); }
  int length() const { return static_cast<int>(panel_.cols()); }
  const DpmConfig& config() const { return config_; }
  const Mat& panel() const { return panel_; }

  /// Log likelihood of one unit's window under location j of a joint draw.
  double unit_window_loglik(const Mat& locations, int j, int unit,
                            const DataWindow& window) const;

  /// Marginal indicator table at a boundary: Monte Carlo average over M
  /// joint draws of (locations, earlier indicators) of the exact sequential
  /// full conditionals, consuming data (0, upto] once.
  Mat marginalize_indicators(const ClusterGaussians& family, const Vec& lambda, int upto,
                             Rng& rng) const;

  long long sga_obs_evals() const { return sga_evals_; }
  long long aux_obs_evals() const { return aux_evals_; }
  void reset_eval_counters() const { sga_evals_ = aux_evals_ = 0; }
  void note_evals(long long n) const { sga_evals_ += n; }
  void note_aux_evals(long long n) const { aux_evals_ += n; }

 private:
  Mat panel_;
  DpmConfig config_;
  mutable long long sga_evals_ = 0;
  mutable long long aux_evals_ = 0;
};

struct DpmFitRecord {
  ClusterState state;
  double wall_seconds = 0.0;
  double cum_wall_seconds = 0.0;
  int iterations = 0;
  bool converged = false;
  long long sga_obs_evals = 0;
  long long aux_obs_evals = 0;
  std::vector<IterationRecord> trace;
};

struct DpmRunResult {
  ClusterGaussians family;
  std::vector<DpmFitRecord> records;
};

struct DpmSettings {
  int draws = 25;
  StopRule stop{};
  AdamState adam{};
  bool keep_traces = false;
};

/// First-boundary augmented target fit: locations from the approximation,
/// indicators from their exact sequential conditionals under the restaurant
/// prior and the (0, T1] likelihood.
DpmFitRecord dpm_fit_t1(const DpmModel& model, const ClusterGaussians& family, int boundary,
                        const DpmSettings& settings, Rng& rng);

/// One update: marginalize indicators at the previous boundary, then fit the
/// pseudo-posterior that touches only (prev, boundary].
DpmFitRecord dpm_update(const DpmModel& model, const ClusterGaussians& family,
                        const ClusterState& previous, int boundary, const DpmSettings& settings,
                        Rng& rng);

/// Full recursion over the schedule.
DpmRunResult dpm_uvb_run(const DpmModel& model, const std::vector<int>& schedule,
                         const DpmSettings& settings, std::uint64_t seed);

/// One-shot fits at each boundary (the SVB comparator).
DpmRunResult dpm_svb_run(const DpmModel& model, const std::vector<int>& schedule,
                         const DpmSettings& settings, std::uint64_t seed);

/// Joint draws of (locations, indicators) from a fitted state; indicators
/// use the exact conditionals given each location draw.
struct DpmJointDraws {
  std::vector<Mat> locations;        // M of 2 x N
  std::vector<std::vector<int>> indicators;  // M of N
};
DpmJointDraws dpm_joint_draws(const DpmModel& model, const ClusterGaussians& family,
                              const ClusterState& state, int draws, Rng& rng);

/// log of the draw-averaged normal density of y_observed for unit i.
double dpm_predictive_logscore(const DpmModel& model, const DpmJointDraws& draws, int unit,
                               double y_observed);

/// Occupancy shares w_j over a set of joint indicator draws.
Vec cluster_weights(const std::vector<std::vector<int>>& indicator_draws, int clusters);

}  // namespace svb
