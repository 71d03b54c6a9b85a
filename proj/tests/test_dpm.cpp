#include <doctest.h>

#include <cmath>
#include <functional>
#include <map>

#include "oracles.hpp"
#include "svb/dpm.hpp"

using namespace svb;

namespace {

Mat two_group_panel(int units, int t, Rng& rng, double sep = 3.0) {
  std::normal_distribution<double> n01;
  Mat y(units, t);
  for (int i = 0; i < units; ++i) {
    const double mu = (i % 2 == 0) ? -sep / 2 : sep / 2;
    for (int s = 0; s < t; ++s) y(i, s) = mu + n01(rng);
  }
  return y;
}

double norm_logpdf(double x, double mean, double var) {
  return -0.5 * std::log(2.0 * M_PI * var) - 0.5 * (x - mean) * (x - mean) / var;
}

}  // namespace

TEST_SUITE("dpm") {

TEST_CASE("sequential allocation prior") {
  CHECK(crp_prior_prob(1.0, {}).size() == 1);
  CHECK(crp_prior_prob(1.0, {})[0] == doctest::Approx(1.0));

  // second unit with one table of size one at alpha = 1: (1/2, 1/2)
  const Vec second = crp_prior_prob(1.0, {0});
  REQUIRE(second.size() == 2);
  CHECK(second[0] == doctest::Approx(0.5));
  CHECK(second[1] == doctest::Approx(0.5));

  // arbitrary state normalizes
  const Vec probs = crp_prior_prob(0.7, {0, 0, 1, 2, 1, 0});
  CHECK(probs.sum() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(probs.size() == 4);

  CHECK_THROWS_AS(crp_prior_prob(0.0, {}), InvalidParameterError);
  CHECK_THROWS_AS(crp_prior_prob(1.0, {1}), InvalidParameterError);
}

TEST_CASE("allocation simulation matches enumerated sequence probabilities") {
  const double alpha = 1.0;
  std::map<std::vector<int>, double> expected;
  std::function<void(std::vector<int>&)> recurse = [&](std::vector<int>& prefix) {
    if (prefix.size() == 4) {
      double p = 1.0;
      std::vector<int> head;
      for (int k : prefix) {
        p *= crp_prior_prob(alpha, head)[k];
        head.push_back(k);
      }
      expected[prefix] = p;
      return;
    }
    int tables = 0;
    for (int k : prefix) tables = std::max(tables, k + 1);
    for (int k = 0; k <= tables; ++k) {
      prefix.push_back(k);
      recurse(prefix);
      prefix.pop_back();
    }
  };
  std::vector<int> prefix;
  recurse(prefix);

  double total_p = 0.0;
  for (const auto& [seq, p] : expected) total_p += p;
  CHECK(total_p == doctest::Approx(1.0).epsilon(1e-12));

  Rng rng(15u);
  std::uniform_real_distribution<double> unif;
  std::map<std::vector<int>, int> counts;
  const int reps = 100000;
  for (int r = 0; r < reps; ++r) {
    std::vector<int> seq;
    for (int i = 0; i < 4; ++i) {
      const Vec probs = crp_prior_prob(alpha, seq);
      double u = unif(rng);
      int pick = 0;
      while (pick + 1 < probs.size() && (u -= probs[pick]) > 0.0) ++pick;
      seq.push_back(pick);
    }
    counts[seq] += 1;
  }
  double chi2 = 0.0;
  for (const auto& [seq, p] : expected) {
    const double expect = reps * p;
    const double got = counts[seq];
    chi2 += (got - expect) * (got - expect) / expect;
  }
  // 14 degrees of freedom (15 sequences); 99.9th percentile is ~36.1
  CHECK(chi2 < 36.1);
}

TEST_CASE("full conditional normalization") {
  SUBCASE("uniform likelihood returns the prior") {
    Vec prior(3);
    prior << 0.2, 0.5, 0.3;
    const Vec probs = full_conditional_k(Vec::Constant(3, -7.3), prior);
    for (int j = 0; j < 3; ++j) CHECK(probs[j] == doctest::Approx(prior[j]).epsilon(1e-12));
  }

  SUBCASE("dominant likelihood concentrates") {
    Vec prior(2);
    prior << 0.5, 0.5;
    Vec log_lik(2);
    log_lik << 0.0, -1e6;
    const Vec probs = full_conditional_k(log_lik, prior);
    CHECK(probs[0] == doctest::Approx(1.0));
  }

  SUBCASE("matches direct normalization on a random case") {
    Rng rng(16u);
    std::uniform_real_distribution<double> unif(0.1, 1.0);
    Vec prior(5), log_lik(5);
    double z = 0.0;
    for (int j = 0; j < 5; ++j) {
      prior[j] = unif(rng);
      z += prior[j];
      log_lik[j] = -10.0 * unif(rng);
    }
    prior /= z;
    const Vec probs = full_conditional_k(log_lik, prior);
    double direct_total = 0.0;
    for (int j = 0; j < 5; ++j) direct_total += prior[j] * std::exp(log_lik[j]);
    for (int j = 0; j < 5; ++j)
      CHECK(probs[j] ==
            doctest::Approx(prior[j] * std::exp(log_lik[j]) / direct_total).epsilon(1e-12));
  }

  SUBCASE("all vanished raises") {
    Vec prior(2);
    prior << 0.5, 0.5;
    CHECK_THROWS_AS(
        full_conditional_k(Vec::Constant(2, -std::numeric_limits<double>::infinity()), prior),
        DegenerateTargetError);
  }
}

TEST_CASE("cluster gaussian family") {
  ClusterGaussians family(3);
  CHECK(family.lambda_size() == 15);
  Rng rng(17u);
  Vec lambda = family.init_lambda(&rng);
  lambda[3] = 0.4;  // off-diagonal

  SUBCASE("log density matches the bivariate formula") {
    const Mat loc = family.sample_locations(lambda, rng);
    double direct = 0.0;
    for (int j = 0; j < 3; ++j) {
      const Vec mean = family.cluster_mean(lambda, j);
      const Mat cov = family.cluster_covariance(lambda, j);
      const Vec v = loc.col(j) - mean;
      const double det = cov(0, 0) * cov(1, 1) - cov(0, 1) * cov(1, 0);
      const Mat inv = (Mat(2, 2) << cov(1, 1), -cov(0, 1), -cov(1, 0), cov(0, 0)).finished() / det;
      direct += -std::log(2.0 * M_PI) - 0.5 * std::log(det) - 0.5 * v.dot(inv * v);
    }
    CHECK(family.log_density(lambda, loc) == doctest::Approx(direct).epsilon(1e-10));
  }

  SUBCASE("score matches finite differences") {
    const Mat loc = family.sample_locations(lambda, rng);
    const Vec analytic = family.score(lambda, loc);
    const Vec fd = oracle::fd_gradient(
        [&](const Vec& l) { return family.log_density(l, loc); }, lambda, 1e-6);
    for (int i = 0; i < family.lambda_size(); ++i)
      CHECK(analytic[i] ==
            doctest::Approx(fd[i]).epsilon(1e-5).scale(std::max(1.0, std::abs(analytic[i]))));
  }

  SUBCASE("sampling moments") {
    Vec probe = Vec::Zero(family.lambda_size());
    probe[0] = 1.5;
    probe[3] = 0.8;  // covariance between mu and log sigma2 of cluster 0
    Rng r2(18u);
    const int m = 40000;
    double acc_mu = 0.0, acc_cov = 0.0, acc_ls = 0.0;
    for (int i = 0; i < m; ++i) {
      const Mat loc = family.sample_locations(probe, r2);
      acc_mu += loc(0, 0);
      acc_ls += loc(1, 0);
      acc_cov += (loc(0, 0) - 1.5) * loc(1, 0);
    }
    CHECK(acc_mu / m == doctest::Approx(1.5).epsilon(0.02));
    CHECK(std::abs(acc_ls / m) < 0.03);
    CHECK(acc_cov / m == doctest::Approx(0.8).epsilon(0.08));  // l21 * l11 = 0.8
  }
}

TEST_CASE("single-unit likelihood matches a direct product") {
  Mat panel(1, 6);
  for (int t = 0; t < 6; ++t) panel(0, t) = 0.5 + 0.1 * t;
  DpmModel model(panel, DpmConfig{});
  const Mat loc = (Mat(2, 1) << 0.4, std::log(1.3)).finished();
  double direct = 0.0;
  for (int t = 0; t < 6; ++t) direct += norm_logpdf(panel(0, t), 0.4, 1.3);
  CHECK(model.unit_window_loglik(loc, 0, 0, {0, 6}) == doctest::Approx(direct).epsilon(1e-12));
}

TEST_CASE("joint indicator marginal is exchangeable across unit orderings") {
  // The sequential prior factorization depends on the unit order, but after
  // integrating the iid base-measure locations per block, partition masses
  // must not. Block likelihood integrals come from a product grid over
  // (mu, log sigma2); identical blocks share identical arithmetic, so the
  // comparison is exact up to rounding.
  Rng rng(20u);
  std::normal_distribution<double> n01;
  Mat panel(3, 4);
  for (int i = 0; i < 3; ++i)
    for (int t = 0; t < 4; ++t) panel(i, t) = n01(rng);
  DpmModel model(panel, DpmConfig{});

  const auto block_integral = [&](const std::vector<int>& block) {
    double acc = 0.0;
    for (int a = -12; a <= 12; ++a)
      for (int b = -12; b <= 12; ++b) {
        const double mu = a * 0.35;
        const double ls = b * 0.35;
        Mat loc(2, 1);
        loc << mu, ls;
        double log_term = norm_logpdf(mu, 0.0, 10.0) + norm_logpdf(ls, 0.0, 10.0);
        for (int unit : block) log_term += model.unit_window_loglik(loc, 0, unit, {0, 4});
        acc += std::exp(log_term);
      }
    return std::log(acc);  // common grid constant cancels in normalization
  };

  const auto joint_partitions = [&](const std::vector<int>& order) {
    std::map<std::vector<int>, double> mass;
    std::function<void(std::vector<int>&, double)> recurse = [&](std::vector<int>& prefix,
                                                                 double log_crp) {
      if (prefix.size() == 3) {
        std::vector<int> canon(3, -1);
        for (int pos = 0; pos < 3; ++pos) canon[order[pos]] = prefix[pos];
        std::map<int, int> relabel;
        int next = 0;
        for (int unit = 0; unit < 3; ++unit) {
          if (!relabel.count(canon[unit])) relabel[canon[unit]] = next++;
          canon[unit] = relabel[canon[unit]];
        }
        // blocks in original unit numbering
        std::map<int, std::vector<int>> blocks;
        for (int unit = 0; unit < 3; ++unit) blocks[canon[unit]].push_back(unit);
        double log_p = log_crp;
        for (auto& [label, block] : blocks) log_p += block_integral(block);
        mass[canon] += std::exp(log_p);
        return;
      }
      const Vec prior = crp_prior_prob(1.0, prefix);
      for (int k = 0; k < prior.size(); ++k) {
        prefix.push_back(k);
        recurse(prefix, log_crp + std::log(prior[k]));
        prefix.pop_back();
      }
    };
    std::vector<int> prefix;
    recurse(prefix, 0.0);
    return mass;
  };

  auto base = joint_partitions({0, 1, 2});
  auto permuted = joint_partitions({2, 0, 1});
  double zb = 0.0, zp = 0.0;
  for (auto& [k, v] : base) zb += v;
  for (auto& [k, v] : permuted) zp += v;
  REQUIRE(zb > 0.0);
  for (auto& [partition, v] : base)
    CHECK(v / zb == doctest::Approx(permuted[partition] / zp).epsilon(1e-10));
}

TEST_CASE("marginal table behaviour") {
  Rng rng(21u);
  Mat panel = two_group_panel(6, 10, rng);
  DpmConfig config;
  config.marginal_draws = 40;
  DpmModel model(panel, config);
  ClusterGaussians family(6);

  // near-point-mass approximation: tiny scales around fixed locations
  Vec lambda = Vec::Zero(family.lambda_size());
  for (int j = 0; j < 6; ++j) {
    lambda[5 * j] = (j % 2 == 0) ? -1.5 : 1.5;
    lambda[5 * j + 1] = 0.0;
    lambda[5 * j + 2] = std::log(1e-8);
    lambda[5 * j + 4] = std::log(1e-8);
  }
  const Mat table = model.marginalize_indicators(family, lambda, 10, rng);
  for (int i = 0; i < 6; ++i) CHECK(table.row(i).sum() == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(table(0, 0) == doctest::Approx(1.0).epsilon(1e-9));  // first unit opens table one

  SUBCASE("seeded reproducibility") {
    Rng r1(5u), r2(5u);
    const Mat a = model.marginalize_indicators(family, lambda, 10, r1);
    const Mat b = model.marginalize_indicators(family, lambda, 10, r2);
    CHECK(a == b);
  }

  SUBCASE("boundary validation") {
    CHECK_THROWS_AS(model.marginalize_indicators(family, lambda, 0, rng), ScheduleError);
    CHECK_THROWS_AS(model.marginalize_indicators(family, lambda, 99, rng), ScheduleError);
  }
}

TEST_CASE("two-unit marginalization against enumeration with quadrature") {
  // N=2: row two of the table is Pr(k_2 = same table as unit 1), averaged
  // over the location uncertainty; a product grid over the four location
  // coordinates provides the reference value
  Mat panel(2, 3);
  panel << 0.2, -0.1, 0.4, 0.3, 0.0, 0.5;
  DpmConfig config;
  config.marginal_draws = 4000;
  DpmModel model(panel, config);
  ClusterGaussians family(2);

  Vec lambda(family.lambda_size());
  lambda << 0.1, 0.0, std::log(0.4), 0.0, std::log(0.3),
            -0.2, 0.1, std::log(0.5), 0.0, std::log(0.4);

  Rng rng(23u);
  const Mat table = model.marginalize_indicators(family, lambda, 3, rng);

  const auto grid = [](double mean, double sd) {
    std::vector<std::pair<double, double>> pts;
    for (int i = -6; i <= 6; ++i)
      pts.push_back({mean + sd * i * 0.4, std::exp(-0.5 * (i * 0.4) * (i * 0.4))});
    return pts;
  };
  const auto g_mu1 = grid(lambda[0], 0.4), g_ls1 = grid(lambda[1], 0.3);
  const auto g_mu2 = grid(lambda[5], 0.5), g_ls2 = grid(lambda[6], 0.4);
  double acc_same = 0.0, acc_total = 0.0;
  for (const auto& [mu1, w1] : g_mu1)
    for (const auto& [ls1, w2] : g_ls1)
      for (const auto& [mu2, w3] : g_mu2)
        for (const auto& [ls2, w4] : g_ls2) {
          const double w = w1 * w2 * w3 * w4;
          const Mat loc = (Mat(2, 2) << mu1, mu2, ls1, ls2).finished();
          const double lik_same = std::exp(model.unit_window_loglik(loc, 0, 1, {0, 3}));
          const double lik_new = std::exp(model.unit_window_loglik(loc, 1, 1, {0, 3}));
          acc_same += w * (0.5 * lik_same / (0.5 * lik_same + 0.5 * lik_new));
          acc_total += w;
        }
  CHECK(table(1, 0) == doctest::Approx(acc_same / acc_total).epsilon(0.05));
}

TEST_CASE("updating run on a separated panel") {
  Rng rng(24u);
  Mat panel = two_group_panel(10, 30, rng, 4.0);
  DpmConfig config;
  config.marginal_draws = 60;
  DpmModel model(panel, config);

  DpmSettings settings;
  settings.draws = 15;
  settings.stop = StopRule{1e-5, 40, 500};

  const DpmRunResult run = dpm_uvb_run(model, {10, 20, 30}, settings, 31);
  REQUIRE(run.records.size() == 3);

  SUBCASE("top clusters absorb the panel") {
    Rng drng(3u);
    const DpmJointDraws draws =
        dpm_joint_draws(model, run.family, run.records.back().state, 100, drng);
    const Vec w = cluster_weights(draws.indicators, model.units());
    CHECK(w.sum() == doctest::Approx(1.0).epsilon(1e-12));
    Vec sorted = w;
    std::sort(sorted.data(), sorted.data() + sorted.size(), std::greater<double>());
    CHECK(sorted[0] + sorted[1] >= 0.9);
  }

  SUBCASE("update accounting: target evaluations are S x N x window per iteration") {
    const DpmFitRecord& update = run.records[1];
    CHECK(update.sga_obs_evals ==
          static_cast<long long>(update.iterations) * settings.draws * 10 * 10);
  }

  SUBCASE("seeded determinism") {
    const DpmRunResult again = dpm_uvb_run(model, {10, 20, 30}, settings, 31);
    CHECK(again.records.back().state.lambda == run.records.back().state.lambda);
  }

  SUBCASE("single-boundary run matches the one-shot fit") {
    const DpmRunResult single = dpm_uvb_run(model, {10}, settings, 77);
    const DpmRunResult svb = dpm_svb_run(model, {10}, settings, 77);
    CHECK(single.records[0].state.lambda == svb.records[0].state.lambda);
  }
}

TEST_CASE("single-unit run recovers its generating location") {
  Rng rng(25u);
  Mat panel(1, 20);
  std::normal_distribution<double> n01;
  for (int t = 0; t < 20; ++t) panel(0, t) = 2.0 + 0.5 * n01(rng);
  DpmConfig config;
  config.marginal_draws = 50;
  DpmModel model(panel, config);

  DpmSettings settings;
  settings.draws = 15;
  settings.stop = StopRule{1e-5, 40, 600};

  const DpmRunResult run = dpm_uvb_run(model, {10, 20}, settings, 41);
  const Vec mean = run.family.cluster_mean(run.records.back().state.lambda, 0);
  CHECK(std::abs(mean[0] - 2.0) < 0.5);
}

TEST_CASE("predictive log score reductions") {
  Mat panel(2, 10);
  for (int t = 0; t < 10; ++t) {
    panel(0, t) = -1.0;
    panel(1, t) = 1.0;
  }
  DpmModel model(panel, DpmConfig{});

  SUBCASE("single known cluster collapses to the normal density") {
    DpmJointDraws draws;
    Mat loc(2, 2);
    loc << 0.7, 0.0, std::log(1.6), 0.0;
    draws.locations.push_back(loc);
    draws.indicators.push_back({0, 0});
    const double got = dpm_predictive_logscore(model, draws, 0, 0.2);
    CHECK(got == doctest::Approx(norm_logpdf(0.2, 0.7, 1.6)).epsilon(1e-12));
  }

  SUBCASE("equal-density draws reduce to the common density") {
    DpmJointDraws draws;
    Mat a(2, 2), b(2, 2);
    a << 0.5, 0.0, 0.0, 0.0;
    b << -0.5, 0.0, 0.0, 0.0;
    draws.locations = {a, b};
    draws.indicators = {{0, 0}, {0, 0}};
    const double got = dpm_predictive_logscore(model, draws, 0, 0.0);
    CHECK(got == doctest::Approx(norm_logpdf(0.0, 0.5, 1.0)).epsilon(1e-12));
  }

  SUBCASE("draw-averaged predictive approaches the exact two-point mixture") {
    Mat loc(2, 2);
    loc << -1.0, 1.0, 0.0, 0.0;
    DpmJointDraws draws;
    Rng drng(9u);
    std::uniform_real_distribution<double> unif;
    const int m = 100000;
    for (int i = 0; i < m; ++i) {
      draws.locations.push_back(loc);
      draws.indicators.push_back({unif(drng) < 0.5 ? 0 : 1, 0});
    }
    const double got = dpm_predictive_logscore(model, draws, 0, 0.3);
    const double exact = std::log(0.5 * std::exp(norm_logpdf(0.3, -1.0, 1.0)) +
                                  0.5 * std::exp(norm_logpdf(0.3, 1.0, 1.0)));
    CHECK(got == doctest::Approx(exact).epsilon(2e-3));
  }
}

TEST_CASE("cluster weight counting") {
  CHECK(cluster_weights({{0, 0, 0}}, 3)[0] == doctest::Approx(1.0));
  const Vec w = cluster_weights({{0, 1}}, 2);
  CHECK(w[0] == doctest::Approx(0.5));
  CHECK(w[1] == doctest::Approx(0.5));

  Rng rng(27u);
  std::uniform_int_distribution<int> pick(0, 4);
  std::vector<std::vector<int>> draws(50, std::vector<int>(7));
  Eigen::VectorXi counts = Eigen::VectorXi::Zero(5);
  for (auto& d : draws)
    for (int& k : d) {
      k = pick(rng);
      counts[k] += 1;
    }
  const Vec got = cluster_weights(draws, 5);
  for (int j = 0; j < 5; ++j)
    CHECK(got[j] == doctest::Approx(counts[j] / 350.0).epsilon(1e-12));
}

TEST_CASE("augmented location gradient matches the enumerated marginal target") {
  // N=2, T=3: enumerate the indicator sum exactly and compare the mean
  // augmented score gradient with the score gradient of the enumerated
  // marginal target
  Mat panel(2, 3);
  panel << -0.6, -0.8, -0.4, 0.7, 0.5, 0.9;
  DpmConfig config;
  DpmModel model(panel, config);
  ClusterGaussians family(2);
  Rng init_rng(29u);
  const Vec lambda = family.init_lambda(&init_rng);
  const DataWindow w{0, 3};

  // enumerated marginal: sum over k2 in {same, new} (k1 = first table)
  const auto marginal_logp = [&](const Mat& loc) {
    const double prior_part =
        norm_logpdf(loc(0, 0), 0.0, 10.0) + norm_logpdf(loc(1, 0), 0.0, 10.0) +
        norm_logpdf(loc(0, 1), 0.0, 10.0) + norm_logpdf(loc(1, 1), 0.0, 10.0);
    const double l1 = model.unit_window_loglik(loc, 0, 0, w);
    const double same = std::log(0.5) + model.unit_window_loglik(loc, 0, 1, w);
    const double anew = std::log(0.5) + model.unit_window_loglik(loc, 1, 1, w);
    return prior_part + l1 + log_sum_exp(same, anew);
  };

  const int reps = 4000, s = 8;
  Vec mean_aug = Vec::Zero(family.lambda_size());
  Vec mean_marg = Vec::Zero(family.lambda_size());
  Vec m2_aug = Vec::Zero(family.lambda_size());
  Vec m2_marg = Vec::Zero(family.lambda_size());
  std::uniform_real_distribution<double> unif;

  for (int r = 0; r < reps; ++r) {
    Rng ra(mix_seed(600, r)), rb(mix_seed(601, r));
    Mat scores_a(s, family.lambda_size()), scores_m(s, family.lambda_size());
    Vec payoff_a(s), payoff_m(s);
    for (int d = 0; d < s; ++d) {
      // augmented draw
      {
        const Mat loc = family.sample_locations(lambda, ra);
        const double l_same = std::log(0.5) + model.unit_window_loglik(loc, 0, 1, w);
        const double l_new = std::log(0.5) + model.unit_window_loglik(loc, 1, 1, w);
        const double total = log_sum_exp(l_same, l_new);
        const double p_new = std::exp(l_new - total);
        const int k2 = unif(ra) < p_new ? 1 : 0;
        const double prior_part =
            norm_logpdf(loc(0, 0), 0.0, 10.0) + norm_logpdf(loc(1, 0), 0.0, 10.0) +
            norm_logpdf(loc(0, 1), 0.0, 10.0) + norm_logpdf(loc(1, 1), 0.0, 10.0);
        const double log_p = prior_part + model.unit_window_loglik(loc, 0, 0, w) +
                             (k2 == 0 ? l_same : l_new);
        const double log_cond = (k2 == 0 ? l_same : l_new) - total;
        payoff_a[d] = log_p - (family.log_density(lambda, loc) + log_cond);
        scores_a.row(d) = family.score(lambda, loc).transpose();
      }
      // marginal draw
      {
        const Mat loc = family.sample_locations(lambda, rb);
        payoff_m[d] = marginal_logp(loc) - family.log_density(lambda, loc);
        scores_m.row(d) = family.score(lambda, loc).transpose();
      }
    }
    const Vec ga = weighted_score_estimate(scores_a, payoff_a, Vec::Ones(s)).gradient;
    const Vec gm = weighted_score_estimate(scores_m, payoff_m, Vec::Ones(s)).gradient;
    mean_aug += ga;
    m2_aug += ga.cwiseProduct(ga);
    mean_marg += gm;
    m2_marg += gm.cwiseProduct(gm);
  }
  mean_aug /= reps;
  mean_marg /= reps;
  for (int i = 0; i < family.lambda_size(); ++i) {
    const double var_a = m2_aug[i] / reps - mean_aug[i] * mean_aug[i];
    const double var_m = m2_marg[i] / reps - mean_marg[i] * mean_marg[i];
    const double se = std::sqrt((var_a + var_m) / reps);
    CHECK(std::abs(mean_aug[i] - mean_marg[i]) <= 4.0 * se + 1e-9);
  }
}

}  // TEST_SUITE
