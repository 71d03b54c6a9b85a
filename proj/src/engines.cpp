#include "svb/engines.hpp"

#include <chrono>

namespace svb {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

TargetDensity model_posterior(const StreamModel& model, const DataWindow& window) {
  TargetDensity prior{[&model](const Vec& theta) { return model.log_prior(theta); }, "prior"};
  return compose_posterior(std::move(prior),
                           [&model](const Vec& theta, const DataWindow& w) {
                             return model.window_loglik(theta, w);
                           },
                           window);
}

FitRecord run_and_record(StreamModel& model, int boundary, const MixtureFamily& family,
                         Vec lambda0, const TargetDensity& target,
                         const EngineSettings& settings, Rng& rng) {
  model.reset_eval_counters();
  const auto start = Clock::now();
  SgaResult sga = run_score(family, std::move(lambda0), target, settings.draws, settings.stop,
                            rng, settings.adam);
  FitRecord rec;
  rec.boundary = boundary;
  rec.lambda = std::move(sga.lambda);
  rec.wall_seconds = seconds_since(start);
  rec.iterations = sga.iterations;
  rec.converged = sga.converged;
  rec.sga_obs_evals = model.sga_obs_evals();
  rec.min_ess = settings.draws;
  if (settings.keep_traces) rec.trace = std::move(sga.trace);
  return rec;
}

}  // namespace

FitRecord svb_fit(StreamModel& model, int boundary, const MixtureFamily& family,
                  const EngineSettings& settings, std::uint64_t seed) {
  if (boundary < 1 || boundary > model.length())
    throw ScheduleError("fit boundary outside the data");
  Rng rng(seed);
  const Vec lambda0 = family.init_lambda(&rng);
  const DataWindow window{0, boundary};
  FitRecord rec =
      run_and_record(model, boundary, family, lambda0, model_posterior(model, window), settings,
                     rng);
  rec.cum_wall_seconds = rec.wall_seconds;
  return rec;
}

PosteriorSequence svb_sequence(StreamModel& model, const UpdateSchedule& schedule,
                               const MixtureFamily& family, const EngineSettings& settings,
                               std::uint64_t seed) {
  schedule.validate(model.length());
  PosteriorSequence out{family, {}};
  double cum = 0.0;
  for (std::size_t n = 0; n < schedule.boundaries.size(); ++n) {
    // every refit is from scratch: no state carries across boundaries, so the
    // boundary hook is deliberately not invoked here
    FitRecord rec = svb_fit(model, schedule.boundaries[n], family, settings, mix_seed(seed, n));
    cum += rec.wall_seconds;
    rec.cum_wall_seconds = cum;
    out.records.push_back(std::move(rec));
  }
  return out;
}

PosteriorSequence uvb_run(StreamModel& model, const UpdateSchedule& schedule,
                          const MixtureFamily& family, const EngineSettings& settings,
                          std::uint64_t seed) {
  schedule.validate(model.length());
  PosteriorSequence out{family, {}};
  double cum = 0.0;
  Rng rng(mix_seed(seed, 0));

  for (std::size_t n = 0; n < schedule.boundaries.size(); ++n) {
    const DataWindow window{n == 0 ? 0 : schedule.boundaries[n - 1], schedule.boundaries[n]};
    FitRecord rec;
    if (n == 0) {
      const Vec lambda0 = family.init_lambda(&rng);
      rec = run_and_record(model, window.hi, family, lambda0, model_posterior(model, window),
                           settings, rng);
    } else {
      const Vec& warm = out.records.back().lambda;  // bitwise warm start
      const TargetDensity target = compose_pseudo_posterior(
          family, warm,
          [&model](const Vec& theta, const DataWindow& w) { return model.window_loglik(theta, w); },
          window);
      rec = run_and_record(model, window.hi, family, warm, target, settings, rng);
    }
    cum += rec.wall_seconds;
    rec.cum_wall_seconds = cum;
    model.boundary_fitted(family, rec.lambda, window, rng);
    rec.aux_obs_evals = model.aux_obs_evals();
    out.records.push_back(std::move(rec));
  }
  return out;
}

PosteriorSequence uvbis_run(StreamModel& model, const UpdateSchedule& schedule,
                            const MixtureFamily& family, const EngineSettings& settings,
                            std::uint64_t seed) {
  schedule.validate(model.length());
  PosteriorSequence out{family, {}};
  double cum = 0.0;
  Rng rng(mix_seed(seed, 0));

  for (std::size_t n = 0; n < schedule.boundaries.size(); ++n) {
    const DataWindow window{n == 0 ? 0 : schedule.boundaries[n - 1], schedule.boundaries[n]};
    FitRecord rec;
    if (n == 0) {
      const Vec lambda0 = family.init_lambda(&rng);
      rec = run_and_record(model, window.hi, family, lambda0, model_posterior(model, window),
                           settings, rng);
    } else {
      const Vec& warm = out.records.back().lambda;
      model.reset_eval_counters();
      const auto start = Clock::now();

      // One sampling pass per update: the window likelihood is evaluated
      // once per draw and reused by every SGA iteration.
      IsContext ctx(family);
      ctx.proposal_lambda = warm;
      ctx.batch = family.sample(warm, settings.is_draws, rng);
      ctx.batch.cached_loglik.resize(settings.is_draws);
      for (int j = 0; j < settings.is_draws; ++j)
        ctx.batch.cached_loglik[j] =
            model.window_loglik(ctx.batch.draws.row(j).transpose(), window);
      ctx.prior_logq = ctx.batch.log_q;
      ctx.ess_warn_floor = settings.ess_warn_fraction * settings.is_draws;

      IsRunResult is = run_is(family, warm, ctx, settings.stop, settings.adam);
      rec.boundary = window.hi;
      rec.lambda = std::move(is.lambda);
      rec.wall_seconds = seconds_since(start);
      rec.iterations = is.iterations;
      rec.converged = is.converged;
      rec.sga_obs_evals = model.sga_obs_evals();
      rec.min_ess = is.min_ess;
      rec.ess_warning = is.ess_warning;
      if (settings.keep_traces) rec.trace = std::move(is.trace);
    }
    cum += rec.wall_seconds;
    rec.cum_wall_seconds = cum;
    model.boundary_fitted(family, rec.lambda, window, rng);
    rec.aux_obs_evals = model.aux_obs_evals();
    out.records.push_back(std::move(rec));
  }
  return out;
}

}  // namespace svb
