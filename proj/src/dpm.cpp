#include "svb/dpm.hpp"

#include <chrono>
#include <cmath>

namespace svb {

namespace {

inline double norm_logpdf(double x, double mean, double var) {
  return -0.5 * (kLogTwoPi + std::log(var)) - 0.5 * sq(x - mean) / var;
}

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

}  // namespace

// ---------------------------------------------------------------------------
// ClusterGaussians
// ---------------------------------------------------------------------------

ClusterGaussians::ClusterGaussians(int clusters) : clusters_(clusters) {
  if (clusters < 1) throw InvalidParameterError("need at least one cluster slot");
}

Vec ClusterGaussians::init_lambda(Rng*) const {
  // identical slot initialization: the sequential indicator draws break the
  // symmetry through their occupancy counts, and distinct slots only
  // differentiate once assignments favour them. Pre-jittering slot means
  // seeds several slots near one data mode and splits its mass permanently.
  return Vec::Zero(lambda_size());
}

void ClusterGaussians::validate(const Vec& lambda) const {
  if (lambda.size() != lambda_size())
    throw DimensionError("cluster parameter vector has wrong length");
  if (!lambda.allFinite()) throw InvalidParameterError("cluster parameters not finite");
}

Mat ClusterGaussians::sample_locations(const Vec& lambda, Rng& rng) const {
  validate(lambda);
  std::normal_distribution<double> n01;
  Mat out(2, clusters_);
  for (int j = 0; j < clusters_; ++j) {
    const double* p = lambda.data() + 5 * j;
    const double a = std::exp(p[2]), b = p[3], c = std::exp(p[4]);
    const double z1 = n01(rng), z2 = n01(rng);
    out(0, j) = p[0] + a * z1;
    out(1, j) = p[1] + b * z1 + c * z2;
  }
  return out;
}

double ClusterGaussians::log_density(const Vec& lambda, const Mat& locations) const {
  validate(lambda);
  if (locations.rows() != 2 || locations.cols() != clusters_)
    throw DimensionError("locations must be 2 x clusters");
  double total = 0.0;
  for (int j = 0; j < clusters_; ++j) {
    const double* p = lambda.data() + 5 * j;
    const double a = std::exp(p[2]), b = p[3], c = std::exp(p[4]);
    const double v1 = locations(0, j) - p[0];
    const double v2 = locations(1, j) - p[1];
    const double u1 = v1 / a;
    const double u2 = (v2 - b * u1) / c;
    total += -kLogTwoPi - p[2] - p[4] - 0.5 * (u1 * u1 + u2 * u2);
  }
  return total;
}

Vec ClusterGaussians::score(const Vec& lambda, const Mat& locations) const {
  validate(lambda);
  Vec grad(lambda_size());
  for (int j = 0; j < clusters_; ++j) {
    const double* p = lambda.data() + 5 * j;
    const double a = std::exp(p[2]), b = p[3], c = std::exp(p[4]);
    const double v1 = locations(0, j) - p[0];
    const double v2 = locations(1, j) - p[1];
    const double u1 = v1 / a;
    const double u2 = (v2 - b * u1) / c;
    // mean block: L^{-T} u
    const double x2 = u2 / c;
    const double x1 = (u1 - b * x2) / a;
    // scale block: lower triangle of L^{-T} (u u' - I), log-diagonal chain
    const double m11 = u1 * u1 - 1.0, m21 = u2 * u1, m22 = u2 * u2 - 1.0;
    const double g22 = m22 / c;
    const double g21 = m21 / c;
    const double g11 = (m11 - b * g21) / a;
    double* g = grad.data() + 5 * j;
    g[0] = x1;
    g[1] = x2;
    g[2] = g11 * a;
    g[3] = g21;
    g[4] = g22 * c;
  }
  return grad;
}

Vec ClusterGaussians::cluster_mean(const Vec& lambda, int j) const {
  validate(lambda);
  return lambda.segment(5 * j, 2);
}

Mat ClusterGaussians::cluster_covariance(const Vec& lambda, int j) const {
  validate(lambda);
  const double* p = lambda.data() + 5 * j;
  const double a = std::exp(p[2]), b = p[3], c = std::exp(p[4]);
  Mat l(2, 2);
  l << a, 0.0, b, c;
  return l * l.transpose();
}

// ---------------------------------------------------------------------------
// Indicator machinery
// ---------------------------------------------------------------------------

Vec crp_prior_prob(double alpha, const std::vector<int>& previous) {
  if (alpha <= 0.0) throw InvalidParameterError("concentration must be positive");
  int tables = 0;
  for (int k : previous) {
    if (k < 0 || k > tables) throw InvalidParameterError("assignments must be contiguous");
    if (k == tables) ++tables;
  }
  const int i = static_cast<int>(previous.size()) + 1;
  Vec probs = Vec::Zero(tables + 1);
  for (int k : previous) probs[k] += 1.0;
  probs /= (alpha + i - 1.0);
  probs[tables] = alpha / (alpha + i - 1.0);
  return probs;
}

Vec full_conditional_k(const Vec& log_lik, const Vec& prior_probs) {
  if (log_lik.size() != prior_probs.size())
    throw DimensionError("likelihood and prior lengths differ");
  Vec logs(log_lik.size());
  for (int j = 0; j < log_lik.size(); ++j)
    logs[j] = prior_probs[j] > 0.0 ? std::log(prior_probs[j]) + log_lik[j]
                                   : -std::numeric_limits<double>::infinity();
  const double total = log_sum_exp(logs);
  if (!std::isfinite(total))
    throw DegenerateTargetError("all indicator probabilities vanished");
  return (logs.array() - total).exp();
}

// ---------------------------------------------------------------------------
// DpmModel
// ---------------------------------------------------------------------------

DpmModel::DpmModel(Mat panel, DpmConfig config) : panel_(std::move(panel)), config_(config) {
  config_.validate();
  if (panel_.rows() < 1 || panel_.cols() < 1) throw InvalidParameterError("empty panel");
}

double DpmModel::unit_window_loglik(const Mat& locations, int j, int unit,
                                    const DataWindow& window) const {
  const double mu = locations(0, j);
  const double var = std::exp(locations(1, j));
  double s = 0.0;
  for (int t = window.lo; t < window.hi; ++t) s += norm_logpdf(panel_(unit, t), mu, var);
  return s;
}

Mat DpmModel::marginalize_indicators(const ClusterGaussians& family, const Vec& lambda, int upto,
                                     Rng& rng) const {
  if (upto < 1 || upto > length()) throw ScheduleError("marginalization boundary outside data");
  const int n = units();
  const DataWindow window{0, upto};
  Mat table = Mat::Zero(n, n);
  std::uniform_real_distribution<double> unif;

  for (int m = 0; m < config_.marginal_draws; ++m) {
    const Mat locations = family.sample_locations(lambda, rng);
    std::vector<int> assigned;
    assigned.reserve(n);
    for (int i = 0; i < n; ++i) {
      const Vec prior = crp_prior_prob(config_.alpha, assigned);
      Vec log_lik(prior.size());
      for (int j = 0; j < prior.size(); ++j)
        log_lik[j] = unit_window_loglik(locations, j, i, window);
      note_aux_evals(static_cast<long long>(prior.size()) * window.length());
      const Vec probs = full_conditional_k(log_lik, prior);

      table.row(i).head(probs.size()) += probs.transpose();
      double u = unif(rng);
      int pick = 0;
      while (pick + 1 < probs.size() && (u -= probs[pick]) > 0.0) ++pick;
      assigned.push_back(pick);
    }
  }
  table /= static_cast<double>(config_.marginal_draws);
  return table;
}

// ---------------------------------------------------------------------------
// Fits
// ---------------------------------------------------------------------------

namespace {

struct DrawOutcome {
  std::vector<int> indicators;
  double log_joint_indicator = 0.0;  // sum of log conditional masses used
};

// Sequential indicator draw at the first boundary: restaurant prior times the
// full first-window likelihood per admissible cluster.
DrawOutcome simulate_first_indicators(const DpmModel& model, const Mat& locations,
                                      const DataWindow& window, Rng& rng) {
  const int n = model.units();
  std::uniform_real_distribution<double> unif;
  DrawOutcome out;
  out.indicators.reserve(n);
  std::vector<int> assigned;
  for (int i = 0; i < n; ++i) {
    const Vec prior = crp_prior_prob(model.config().alpha, assigned);
    Vec log_lik(prior.size());
    for (int j = 0; j < prior.size(); ++j)
      log_lik[j] = model.unit_window_loglik(locations, j, i, window);
    model.note_aux_evals(static_cast<long long>(prior.size()) * window.length());
    const Vec probs = full_conditional_k(log_lik, prior);
    double u = unif(rng);
    int pick = 0;
    while (pick + 1 < probs.size() && (u -= probs[pick]) > 0.0) ++pick;
    assigned.push_back(pick);
    out.indicators.push_back(pick);
    out.log_joint_indicator += std::log(probs[pick]);
  }
  return out;
}

// Update-form indicator draw: marginal table row times the new-window
// likelihood, independent across units given the locations.
DrawOutcome simulate_update_indicators(const DpmModel& model, const Mat& locations,
                                       const Mat& table, const DataWindow& window, Rng& rng) {
  const int n = model.units();
  std::uniform_real_distribution<double> unif;
  DrawOutcome out;
  out.indicators.reserve(n);
  for (int i = 0; i < n; ++i) {
    // admissible clusters are those the marginal table supports
    int support = 0;
    for (int j = 0; j < n; ++j)
      if (table(i, j) > 0.0) support = j + 1;
    Vec log_lik(support), prior(support);
    long long evals = 0;
    for (int j = 0; j < support; ++j) {
      prior[j] = table(i, j);
      if (table(i, j) > 0.0) {
        log_lik[j] = model.unit_window_loglik(locations, j, i, window);
        ++evals;
      } else {
        log_lik[j] = 0.0;
      }
    }
    model.note_aux_evals(evals * window.length());
    const Vec probs = full_conditional_k(log_lik, prior);
    double u = unif(rng);
    int pick = 0;
    while (pick + 1 < probs.size() && (u -= probs[pick]) > 0.0) ++pick;
    out.indicators.push_back(pick);
    out.log_joint_indicator += std::log(probs[pick]);
  }
  return out;
}

double crp_log_prior(double alpha, const std::vector<int>& indicators) {
  double total = 0.0;
  std::vector<int> assigned;
  assigned.reserve(indicators.size());
  for (int k : indicators) {
    const Vec prior = crp_prior_prob(alpha, assigned);
    if (k < 0 || k >= prior.size()) throw InvalidParameterError("indicator outside support");
    total += std::log(prior[k]);
    assigned.push_back(k);
  }
  return total;
}

DpmFitRecord run_dpm_sga(const DpmModel& model, Vec lambda0,
                         const std::function<GradientEstimate(const Vec&, int)>& estimator,
                         const DpmSettings& settings, int boundary) {
  model.reset_eval_counters();
  const auto start = Clock::now();
  SgaResult sga = run_custom(std::move(lambda0), estimator, settings.draws, settings.stop,
                             settings.adam);
  DpmFitRecord rec;
  rec.state.lambda = std::move(sga.lambda);
  rec.state.boundary = boundary;
  rec.wall_seconds = seconds_since(start);
  rec.iterations = sga.iterations;
  rec.converged = sga.converged;
  rec.sga_obs_evals = model.sga_obs_evals();
  rec.aux_obs_evals = model.aux_obs_evals();
  if (settings.keep_traces) rec.trace = std::move(sga.trace);
  return rec;
}

}  // namespace

DpmFitRecord dpm_fit_t1(const DpmModel& model, const ClusterGaussians& family, int boundary,
                        const DpmSettings& settings, Rng& rng) {
  const int n = model.units();
  const DataWindow window{0, boundary};
  const double base_var = model.config().base_var;
  const double base_mean = model.config().base_mean;

  auto estimator = [&, window](const Vec& lambda, int) {
    const int s = settings.draws;
    Mat scores(s, family.lambda_size());
    Vec payoff(s);
    for (int d = 0; d < s; ++d) {
      const Mat locations = family.sample_locations(lambda, rng);
      const DrawOutcome draw = simulate_first_indicators(model, locations, window, rng);

      double log_p = 0.0;
      for (int j = 0; j < n; ++j) {
        log_p += norm_logpdf(locations(0, j), base_mean, base_var);
        log_p += norm_logpdf(locations(1, j), base_mean, base_var);
      }
      log_p += crp_log_prior(model.config().alpha, draw.indicators);
      for (int i = 0; i < n; ++i)
        log_p += model.unit_window_loglik(locations, draw.indicators[i], i, window);
      model.note_evals(static_cast<long long>(n) * window.length());

      const double log_q = family.log_density(lambda, locations) + draw.log_joint_indicator;
      payoff[d] = log_p - log_q;
      scores.row(d) = family.score(lambda, locations).transpose();
    }
    GradientEstimate est = weighted_score_estimate(scores, payoff, Vec::Ones(s));
    est.effective_sample_size = s;
    return est;
  };

  Vec lambda0 = family.init_lambda(&rng);
  DpmFitRecord rec = run_dpm_sga(model, std::move(lambda0), estimator, settings, boundary);
  rec.state.lo = window.lo;
  rec.state.hi = window.hi;
  return rec;
}

DpmFitRecord dpm_update(const DpmModel& model, const ClusterGaussians& family,
                        const ClusterState& previous, int boundary, const DpmSettings& settings,
                        Rng& rng) {
  if (boundary <= previous.boundary) throw ScheduleError("update boundary must advance");
  const int n = model.units();
  const DataWindow window{previous.boundary, boundary};

  // one full-data pass before the update, independent of the SGA iterations
  const Mat table =
      model.marginalize_indicators(family, previous.lambda, previous.boundary, rng);

  auto estimator = [&, window](const Vec& lambda, int) {
    const int s = settings.draws;
    Mat scores(s, family.lambda_size());
    Vec payoff(s);
    for (int d = 0; d < s; ++d) {
      const Mat locations = family.sample_locations(lambda, rng);
      const DrawOutcome draw = simulate_update_indicators(model, locations, table, window, rng);

      double log_p = family.log_density(previous.lambda, locations);
      for (int i = 0; i < n; ++i) {
        log_p += model.unit_window_loglik(locations, draw.indicators[i], i, window);
        log_p += std::log(table(i, draw.indicators[i]));
      }
      model.note_evals(static_cast<long long>(n) * window.length());

      const double log_q = family.log_density(lambda, locations) + draw.log_joint_indicator;
      payoff[d] = log_p - log_q;
      scores.row(d) = family.score(lambda, locations).transpose();
    }
    GradientEstimate est = weighted_score_estimate(scores, payoff, Vec::Ones(s));
    est.effective_sample_size = s;
    return est;
  };

  DpmFitRecord rec = run_dpm_sga(model, previous.lambda, estimator, settings, boundary);
  rec.state.indicator_table = table;
  rec.state.lo = window.lo;
  rec.state.hi = window.hi;
  return rec;
}

DpmRunResult dpm_uvb_run(const DpmModel& model, const std::vector<int>& schedule,
                         const DpmSettings& settings, std::uint64_t seed) {
  if (schedule.empty()) throw ScheduleError("empty schedule");
  ClusterGaussians family(model.units());
  DpmRunResult out{family, {}};
  Rng rng(mix_seed(seed, 0));
  double cum = 0.0;
  for (std::size_t n = 0; n < schedule.size(); ++n) {
    DpmFitRecord rec = n == 0
                           ? dpm_fit_t1(model, family, schedule[0], settings, rng)
                           : dpm_update(model, family, out.records.back().state, schedule[n],
                                        settings, rng);
    cum += rec.wall_seconds;
    rec.cum_wall_seconds = cum;
    out.records.push_back(std::move(rec));
  }
  return out;
}

DpmRunResult dpm_svb_run(const DpmModel& model, const std::vector<int>& schedule,
                         const DpmSettings& settings, std::uint64_t seed) {
  if (schedule.empty()) throw ScheduleError("empty schedule");
  ClusterGaussians family(model.units());
  DpmRunResult out{family, {}};
  double cum = 0.0;
  for (std::size_t n = 0; n < schedule.size(); ++n) {
    Rng rng(mix_seed(seed, n));
    DpmFitRecord rec = dpm_fit_t1(model, family, schedule[n], settings, rng);
    cum += rec.wall_seconds;
    rec.cum_wall_seconds = cum;
    out.records.push_back(std::move(rec));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Predictives and summaries
// ---------------------------------------------------------------------------

DpmJointDraws dpm_joint_draws(const DpmModel& model, const ClusterGaussians& family,
                              const ClusterState& state, int draws, Rng& rng) {
  if (draws < 1) throw InvalidParameterError("need at least one draw");
  const DataWindow window{state.lo, state.hi};
  DpmJointDraws out;
  out.locations.reserve(draws);
  out.indicators.reserve(draws);
  for (int m = 0; m < draws; ++m) {
    Mat locations = family.sample_locations(state.lambda, rng);
    DrawOutcome draw =
        state.indicator_table.size() == 0
            ? simulate_first_indicators(model, locations, window, rng)
            : simulate_update_indicators(model, locations, state.indicator_table, window, rng);
    out.locations.push_back(std::move(locations));
    out.indicators.push_back(std::move(draw.indicators));
  }
  return out;
}

double dpm_predictive_logscore(const DpmModel& model, const DpmJointDraws& draws, int unit,
                               double y_observed) {
  const int m = static_cast<int>(draws.locations.size());
  if (m < 1) throw InvalidParameterError("predictive needs at least one draw");
  if (unit < 0 || unit >= model.units()) throw DimensionError("unit outside panel");
  Vec logs(m);
  for (int i = 0; i < m; ++i) {
    const int k = draws.indicators[i][unit];
    logs[i] = norm_logpdf(y_observed, draws.locations[i](0, k),
                          std::exp(draws.locations[i](1, k)));
  }
  return log_sum_exp(logs) - std::log(static_cast<double>(m));
}

Vec cluster_weights(const std::vector<std::vector<int>>& indicator_draws, int clusters) {
  if (indicator_draws.empty()) throw InvalidParameterError("no indicator draws");
  Vec w = Vec::Zero(clusters);
  long long total = 0;
  for (const auto& draw : indicator_draws)
    for (int k : draw) {
      if (k < 0 || k >= clusters) throw DimensionError("indicator outside cluster range");
      w[k] += 1.0;
      ++total;
    }
  return w / static_cast<double>(total);
}

}  // namespace svb
