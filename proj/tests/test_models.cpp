#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "svb/models.hpp"

using namespace svb;

TEST_SUITE("models") {

TEST_CASE("ar3 simulation") {
  SUBCASE("vanishing innovation variance pins the series at the level") {
    Ar3Params p{1.7, 0.4, 0.2, 0.1, std::log(1e-12)};
    Rng rng(3u);
    const Vec y = ar3_simulate(p, 50, rng);
    for (int t = 0; t < 50; ++t) CHECK(y[t] == doctest::Approx(1.7).epsilon(1e-4));
  }

  SUBCASE("zero coefficients give iid noise with the right variance") {
    Ar3Params p{0.5, 0.0, 0.0, 0.0, std::log(2.0)};
    Rng rng(4u);
    const Vec y = ar3_simulate(p, 10000, rng);
    const double mean = y.mean();
    const double var = (y.array() - mean).square().sum() / (y.size() - 1);
    CHECK(var == doctest::Approx(2.0).epsilon(0.1));
    CHECK(mean == doctest::Approx(0.5).epsilon(0.2));
  }

  SUBCASE("drawn coefficients always pass the companion-matrix check") {
    Rng rng(5u);
    for (int i = 0; i < 10000; ++i) {
      const Ar3Params p = ar3_draw_params(rng);
      CHECK(oracle::ar_stationary(p.phi1, p.phi2, p.phi3));
    }
  }
}

TEST_CASE("ar3 window log likelihood") {
  SUBCASE("unit-variance white noise at zero") {
    Vec series = Vec::Zero(5);
    const Ar3Params p{0.0, 0.0, 0.0, 0.0, 0.0};
    // two scored observations
    CHECK(ar3_window_loglik(p, series, {3, 5}) ==
          doctest::Approx(-std::log(2.0 * M_PI)).epsilon(1e-12));
  }

  SUBCASE("windows telescope") {
    Rng rng(6u);
    const Ar3Params truth = ar3_draw_params(rng);
    const Vec y = ar3_simulate(truth, 60, rng);
    const Ar3Params p{0.3, 0.5, -0.2, 0.1, std::log(1.4)};
    const double full = ar3_window_loglik(p, y, {0, 60});
    const double split = ar3_window_loglik(p, y, {0, 25}) + ar3_window_loglik(p, y, {25, 40}) +
                         ar3_window_loglik(p, y, {40, 60});
    CHECK(full == doctest::Approx(split).epsilon(1e-12));
  }

  SUBCASE("matches a direct product of conditional densities") {
    Rng rng(7u);
    const Ar3Params truth = ar3_draw_params(rng);
    const Vec y = ar3_simulate(truth, 20, rng);
    const Ar3Params p{-0.2, 0.3, 0.1, -0.25, std::log(0.8)};
    double direct = 1.0;
    const double sd = std::exp(0.5 * p.log_sigma2);
    for (int t = 3; t < 20; ++t) {
      const double mean = p.mu + p.phi1 * (y[t - 1] - p.mu) + p.phi2 * (y[t - 2] - p.mu) +
                          p.phi3 * (y[t - 3] - p.mu);
      direct *= (1.0 / (sd * std::sqrt(2.0 * M_PI))) *
                std::exp(-0.5 * ((y[t] - mean) / sd) * ((y[t] - mean) / sd));
    }
    CHECK(ar3_window_loglik(p, y, {0, 20}) == doctest::Approx(std::log(direct)).epsilon(1e-10));
  }

  SUBCASE("missing lags rejected") {
    const Ar3Params p{0.0, 0.0, 0.0, 0.0, 0.0};
    Vec y = Vec::Zero(10);
    CHECK_THROWS_AS(ar3_window_loglik(p, y, {1, 5}), InvalidParameterError);
  }
}

TEST_CASE("ar3 predictive log score") {
  Vec last3(3);
  last3 << 0.0, 0.0, 0.0;

  SUBCASE("single white-noise draw at the observation") {
    Mat draws = Mat::Zero(1, 5);
    CHECK(ar3_predictive_logscore(draws, last3, 0.0) ==
          doctest::Approx(-0.9189385332).epsilon(1e-9));
  }

  SUBCASE("equal-density draws reduce to the common density") {
    Mat draws = Mat::Zero(2, 5);
    draws(0, 0) = 0.4;   // mu = +0.4 and -0.4 give the same density at 0
    draws(1, 0) = -0.4;
    const double d = oracle::norm_logpdf(0.0, 0.4, 1.0);
    CHECK(ar3_predictive_logscore(draws, last3, 0.0) == doctest::Approx(d).epsilon(1e-12));
  }

  SUBCASE("draw-averaged density converges to the analytic mixture") {
    // mu ~ N(0.3, 0.5^2), phi = 0, sigma2 = 1: predictive is N(0.3, 1.25)
    Rng rng(8u);
    std::normal_distribution<double> n01;
    const int m = 2000000;
    Mat draws = Mat::Zero(m, 5);
    for (int i = 0; i < m; ++i) draws(i, 0) = 0.3 + 0.5 * n01(rng);
    const double got = ar3_predictive_logscore(draws, last3, 0.9);
    CHECK(got == doctest::Approx(oracle::norm_logpdf(0.9, 0.3, 1.25)).epsilon(1e-3));
  }
}

TEST_CASE("mixture simulation") {
  SUBCASE("forced single label") {
    Rng rng(9u);
    const MixturePanel p = mixture_simulate(200, 3, rng, 1.0);
    for (int k : p.labels) CHECK(k == 1);
  }

  SUBCASE("label shares and within-cluster variance") {
    Rng rng(10u);
    const MixturePanel p = mixture_simulate(10000, 4, rng);
    double share = 0.0;
    for (int k : p.labels) share += k;
    share /= p.labels.size();
    CHECK(share == doctest::Approx(0.5).epsilon(0.05));

    // pool within-cluster deviations
    for (int cluster : {0, 1}) {
      std::vector<double> values;
      for (int i = 0; i < p.y.rows(); ++i)
        if (p.labels[i] == cluster)
          for (int t = 0; t < p.y.cols(); ++t) values.push_back(p.y(i, t));
      const double var = oracle::var_of(values);
      CHECK(var > 0.9);
      CHECK(var < 2.2);
    }
  }
}

TEST_CASE("mixture class probabilities") {
  Mat panel(3, 4);
  panel << 0.1, -0.2, 0.3, 0.0, 2.9, 3.1, 3.0, 2.8, 0.2, 0.1, -0.1, 0.4;

  SUBCASE("identical components return the prior unchanged") {
    Vec theta(4);
    theta << 0.0, 0.0, 1.0, 1.0;  // same variance, same mean
    Mat draws = theta.transpose().replicate(5, 1);
    Mat prior(3, 2);
    prior << 0.3, 0.7, 0.5, 0.5, 0.9, 0.1;
    const Mat probs = mixture_class_probs(draws, panel, {0, 4}, prior);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 2; ++j) CHECK(probs(i, j) == doctest::Approx(prior(i, j)).epsilon(1e-12));
  }

  SUBCASE("absorbing prior stays absorbing") {
    Vec theta(4);
    theta << 0.0, 0.0, 0.0, 3.0;
    Mat draws = theta.transpose().replicate(3, 1);
    Mat prior(3, 2);
    prior << 1.0, 0.0, 1.0, 0.0, 1.0, 0.0;
    const Mat probs = mixture_class_probs(draws, panel, {0, 4}, prior);
    for (int i = 0; i < 3; ++i) {
      CHECK(probs(i, 0) == doctest::Approx(1.0));
      CHECK(probs(i, 1) == doctest::Approx(0.0));
    }
  }

  SUBCASE("well-separated clusters classify a seeded instance perfectly") {
    Rng rng(11u);
    std::normal_distribution<double> n01;
    const int n = 20, t = 50;
    Mat y(n, t);
    std::vector<int> truth(n);
    for (int i = 0; i < n; ++i) {
      truth[i] = i % 2;
      for (int s = 0; s < t; ++s) y(i, s) = (truth[i] == 0 ? -3.0 : 3.0) + n01(rng);
    }
    Vec theta(4);
    theta << 0.0, 0.0, -3.0, 3.0;
    Mat draws = theta.transpose().replicate(10, 1);
    Mat prior = Mat::Constant(n, 2, 0.5);
    const Mat probs = mixture_class_probs(draws, y, {0, t}, prior);
    std::vector<int> labels(n);
    for (int i = 0; i < n; ++i) labels[i] = probs(i, 1) > probs(i, 0);
    CHECK(classification_accuracy(labels, truth) == doctest::Approx(1.0));
    for (int i = 0; i < n; ++i) CHECK(probs.row(i).sum() == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("mixture marginal log likelihood") {
  SUBCASE("symmetric Beta(1,1) marginal prior") {
    CHECK(mixture_marginal_prior(0, 1.0, 1.0) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(mixture_marginal_prior(1, 1.0, 1.0) == doctest::Approx(0.5).epsilon(1e-12));
  }

  SUBCASE("absorbing prior reduces to a single component") {
    Mat panel(1, 3);
    panel << 0.5, -0.1, 0.2;
    Vec theta(4);
    theta << std::log(1.3), std::log(0.7), 0.1, -0.4;
    Mat prior(1, 2);
    prior << 1.0, 0.0;
    const double got = mixture_marginal_loglik(theta, panel, {0, 3}, prior);
    CHECK(got == doctest::Approx(mixture_unit_loglik(theta, panel, 0, {0, 3}, 0)).epsilon(1e-12));
  }

  SUBCASE("matches exhaustive enumeration over the indicators") {
    Rng rng(12u);
    std::normal_distribution<double> n01;
    Mat panel(3, 5);
    for (int i = 0; i < 3; ++i)
      for (int t = 0; t < 5; ++t) panel(i, t) = n01(rng);
    Vec theta(4);
    theta << std::log(1.1), std::log(1.8), -0.3, 0.6;
    Mat prior(3, 2);
    prior << 0.5, 0.5, 0.2, 0.8, 0.7, 0.3;

    // sum over the 8 joint indicator configurations
    Vec joint(8);
    for (int mask = 0; mask < 8; ++mask) {
      double v = 0.0;
      for (int i = 0; i < 3; ++i) {
        const int j = (mask >> i) & 1;
        v += std::log(prior(i, j)) + mixture_unit_loglik(theta, panel, i, {0, 5}, j);
      }
      joint[mask] = v;
    }
    CHECK(mixture_marginal_loglik(theta, panel, {0, 5}, prior) ==
          doctest::Approx(log_sum_exp(joint)).epsilon(1e-12));
  }
}

TEST_CASE("classification accuracy folds label switching") {
  CHECK(classification_accuracy({1, 0, 1, 0}, {1, 0, 1, 0}) == 1.0);
  CHECK(classification_accuracy({0, 1, 0, 1}, {1, 0, 1, 0}) == 1.0);
  CHECK(classification_accuracy({1, 1, 0, 0}, {1, 0, 1, 0}) == 0.5);
  CHECK_THROWS_AS(classification_accuracy({1}, {1, 0}), DimensionError);
}

TEST_CASE("independent Student-t predictive") {
  SUBCASE("two symmetric observations") {
    const std::vector<double> y = {-1.0, 1.0};
    CHECK(independent_predictive_logdensity(y, 0.0) ==
          doctest::Approx(std::log(1.0 / (M_PI * std::sqrt(3.0)))).epsilon(1e-12));
  }

  SUBCASE("symmetry about the sample mean") {
    const std::vector<double> y = {2.0, 3.5, 1.5, 4.0, 3.0};
    const double mean = oracle::mean_of(y);
    for (double delta : {0.3, 1.1, 2.7})
      CHECK(independent_predictive_logdensity(y, mean + delta) ==
            doctest::Approx(independent_predictive_logdensity(y, mean - delta)).epsilon(1e-12));
  }

  SUBCASE("density integrates to one") {
    const std::vector<double> y = {0.4, -0.8, 1.3, 0.1};
    const double total = oracle::simpson(
        [&](double x) { return std::exp(independent_predictive_logdensity(y, x)); }, -250.0,
        250.0, 200000);
    CHECK(total == doctest::Approx(1.0).epsilon(1e-6));
  }

  SUBCASE("degenerate data rejected") {
    CHECK_THROWS_AS(independent_predictive_logdensity(std::vector<double>{1.0}, 0.0),
                    InvalidParameterError);
    CHECK_THROWS_AS(independent_predictive_logdensity(std::vector<double>{1.0, 1.0}, 0.0),
                    DegenerateDataError);
  }
}

TEST_CASE("augmented and marginal mixture gradients share their expectation") {
  // indicator-augmented estimator with exact conditionals versus the marginal
  // estimator on a small panel; their means agree
  Rng rng(13u);
  std::normal_distribution<double> n01;
  Mat panel(3, 5);
  for (int i = 0; i < 3; ++i)
    for (int t = 0; t < 5; ++t) panel(i, t) = (i == 0 ? -1.0 : 1.0) + 0.8 * n01(rng);
  Mat prior = Mat::Constant(3, 2, 0.5);
  const double prior_var = 10.0;

  MixtureFamily f(4, 1);
  Vec lambda = f.init_lambda();
  lambda[2] = -0.5;  // nudge the component means apart
  lambda[3] = 0.5;

  const DataWindow w{0, 5};
  const int reps = 3000, s = 8;
  Vec mean_aug = Vec::Zero(f.lambda_size());
  Vec mean_marg = Vec::Zero(f.lambda_size());
  Vec m2_aug = Vec::Zero(f.lambda_size());
  Vec m2_marg = Vec::Zero(f.lambda_size());

  TargetDensity marginal{[&](const Vec& theta) {
                           return -0.5 * theta.squaredNorm() / prior_var -
                                  2.0 * (kLogTwoPi + std::log(prior_var)) +
                                  mixture_marginal_loglik(theta, panel, w, prior);
                         },
                         "marginal"};

  for (int r = 0; r < reps; ++r) {
    Rng ra(mix_seed(500, r));
    const GradientEstimate marg = score_gradient(f, lambda, marginal, s, ra);
    mean_marg += marg.gradient;
    m2_marg += marg.gradient.cwiseProduct(marg.gradient);

    // augmented: draw theta, then k_i from its exact conditional; the payoff
    // adds the joint indicator terms and subtracts the conditional mass
    Rng rb(mix_seed(501, r));
    const DrawBatch batch = f.sample(lambda, s, rb);
    const MixtureFamily::Unpacked u = f.unpack(lambda);
    Mat scores(s, f.lambda_size());
    Vec payoff(s);
    std::uniform_real_distribution<double> unif;
    for (int j = 0; j < s; ++j) {
      const Vec theta = batch.draws.row(j).transpose();
      double log_p = -0.5 * theta.squaredNorm() / prior_var -
                     2.0 * (kLogTwoPi + std::log(prior_var));
      double log_cond = 0.0;
      for (int i = 0; i < 3; ++i) {
        const double l0 = std::log(prior(i, 0)) + mixture_unit_loglik(theta, panel, i, w, 0);
        const double l1 = std::log(prior(i, 1)) + mixture_unit_loglik(theta, panel, i, w, 1);
        const double total = log_sum_exp(l0, l1);
        const double p1 = std::exp(l1 - total);
        const int k = unif(rb) < p1 ? 1 : 0;
        log_p += (k == 1 ? l1 : l0);
        log_cond += (k == 1 ? l1 : l0) - total;
      }
      payoff[j] = log_p - (batch.log_q[j] + log_cond);
      scores.row(j) = f.score(u, theta).transpose();
    }
    const GradientEstimate aug = weighted_score_estimate(scores, payoff, Vec::Ones(s));
    mean_aug += aug.gradient;
    m2_aug += aug.gradient.cwiseProduct(aug.gradient);
  }
  mean_aug /= reps;
  mean_marg /= reps;
  for (int i = 0; i < f.lambda_size(); ++i) {
    const double var_a = m2_aug[i] / reps - sq(mean_aug[i]);
    const double var_m = m2_marg[i] / reps - sq(mean_marg[i]);
    const double se = std::sqrt((var_a + var_m) / reps);
    CHECK(std::abs(mean_aug[i] - mean_marg[i]) <= 4.0 * se + 1e-9);
  }
}

TEST_CASE("conjugate model closed forms") {
  Vec y(4);
  y << 0.5, 1.5, -0.5, 1.0;
  ConjugateNormalModel model(y);
  const auto post = oracle::normal_normal_posterior(0.0, 1.0, {0.5, 1.5, -0.5, 1.0}, 1.0);
  CHECK(model.posterior_mean(4) == doctest::Approx(post.mean).epsilon(1e-12));
  CHECK(model.posterior_var(4) == doctest::Approx(post.var).epsilon(1e-12));
}

}  // TEST_SUITE
