#pragma once

#include <vector>

#include "svb/sga.hpp"
#include "svb/target.hpp"

namespace svb {

/// Strictly increasing observation counts at which a posterior is wanted.
struct UpdateSchedule {
  std::vector<int> boundaries;

  void validate(int data_length) const {
    if (boundaries.empty()) throw ScheduleError("schedule needs at least one boundary");
    int prev = 0;
    for (int b : boundaries) {
      if (b <= prev) throw ScheduleError("boundaries must be strictly increasing and positive");
      prev = b;
    }
    if (prev > data_length) throw ScheduleError("schedule exceeds the data length");
  }
};

/// A model consumed through disjoint windows. Implementations count every
/// observation-level likelihood term they evaluate: window terms from the
/// SGA path in the main counter, per-boundary bookkeeping (class-probability
/// refreshes and the like) in the auxiliary counter.
class StreamModel {
 public:
  virtual ~StreamModel() = default;

  virtual int dim() const = 0;
  virtual int length() const = 0;
  virtual double log_prior(const Vec& theta) const = 0;
  virtual double window_loglik(const Vec& theta, const DataWindow& window) const = 0;

  /// Called once per boundary with the freshly fitted approximation and the
  /// window it consumed, before the next update is composed.
  virtual void boundary_fitted(const MixtureFamily&, const Vec&, const DataWindow&, Rng&) {}

  long long sga_obs_evals() const { return sga_evals_; }
  long long aux_obs_evals() const { return aux_evals_; }
  void reset_eval_counters() const { sga_evals_ = aux_evals_ = 0; }

 protected:
  void note_evals(long long n) const { sga_evals_ += n; }
  void note_aux_evals(long long n) const { aux_evals_ += n; }

 private:
  mutable long long sga_evals_ = 0;
  mutable long long aux_evals_ = 0;
};

struct EngineSettings {
  int draws = 25;                 // score-gradient sample size
  int is_draws = 100;             // importance-sampled update sample size
  StopRule stop{};
  AdamState adam{};
  double ess_warn_fraction = 0.1; // warn when ESS falls under this share of is_draws
  bool keep_traces = true;
};

struct FitRecord {
  int boundary = 0;
  Vec lambda;
  double wall_seconds = 0.0;
  double cum_wall_seconds = 0.0;
  int iterations = 0;
  bool converged = false;
  long long sga_obs_evals = 0;
  long long aux_obs_evals = 0;
  double min_ess = 0.0;
  bool ess_warning = false;
  std::vector<IterationRecord> trace;
};

struct PosteriorSequence {
  MixtureFamily family;
  std::vector<FitRecord> records;
};

/// One cold SGA fit of the posterior over y_{1:T_n}.
FitRecord svb_fit(StreamModel& model, int boundary, const MixtureFamily& family,
                  const EngineSettings& settings, std::uint64_t seed);

/// Independent SVB refits at every boundary (the non-recursive comparator).
PosteriorSequence svb_sequence(StreamModel& model, const UpdateSchedule& schedule,
                               const MixtureFamily& family, const EngineSettings& settings,
                               std::uint64_t seed);

/// The updating recursion: SVB at the first boundary, then one SGA per
/// update targeting window-likelihood x previous optimum, warm-started at
/// the previous optimum.
PosteriorSequence uvb_run(StreamModel& model, const UpdateSchedule& schedule,
                          const MixtureFamily& family, const EngineSettings& settings,
                          std::uint64_t seed);

/// The importance-sampled recursion: each update samples once from the
/// previous optimum, caches the window log likelihood per draw, and reuses
/// the batch for every gradient of the update.
PosteriorSequence uvbis_run(StreamModel& model, const UpdateSchedule& schedule,
                            const MixtureFamily& family, const EngineSettings& settings,
                            std::uint64_t seed);

}  // namespace svb
