#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "svb/family.hpp"

using namespace svb;

namespace {

// Build lambda from explicit component pieces, mirroring the documented
// layout: per component mean then row-major lower scale (log diagonal), then
// the logits.
Vec pack_lambda(const MixtureFamily& family, const std::vector<Vec>& means,
                const std::vector<Mat>& scales, const Vec& logits) {
  const int d = family.dim();
  Vec lambda(family.lambda_size());
  int pos = 0;
  for (int k = 0; k < family.components(); ++k) {
    for (int i = 0; i < d; ++i) lambda[pos++] = means[k][i];
    for (int i = 0; i < d; ++i)
      for (int j = 0; j <= i; ++j)
        lambda[pos++] = (i == j) ? std::log(scales[k](i, i)) : scales[k](i, j);
  }
  for (int k = 0; k < family.components(); ++k) lambda[pos++] = logits[k];
  return lambda;
}

Vec standard_lambda(const MixtureFamily& family) {
  std::vector<Vec> means(family.components(), Vec::Zero(family.dim()));
  std::vector<Mat> scales(family.components(), Mat::Identity(family.dim(), family.dim()));
  return pack_lambda(family, means, scales, Vec::Zero(family.components()));
}

Vec random_lambda(const MixtureFamily& family, Rng& rng) {
  std::normal_distribution<double> n01;
  Vec lambda(family.lambda_size());
  for (int i = 0; i < family.lambda_size(); ++i) lambda[i] = 0.5 * n01(rng);
  return lambda;
}

}  // namespace

TEST_SUITE("family") {

TEST_CASE("log density closed forms") {
  MixtureFamily f1(1, 1);
  const Vec l1 = standard_lambda(f1);
  CHECK(f1.log_density(l1, Vec::Zero(1)) == doctest::Approx(-0.9189385332046727).epsilon(1e-12));

  // two identical components collapse to the single-component value
  MixtureFamily f2(1, 2);
  std::vector<Vec> means(2, Vec::Zero(1));
  std::vector<Mat> scales(2, Mat::Identity(1, 1));
  const Vec l2 = pack_lambda(f2, means, scales, Vec::Zero(2));
  CHECK(f2.log_density(l2, Vec::Zero(1)) ==
        doctest::Approx(f1.log_density(l1, Vec::Zero(1))).epsilon(1e-12));

  MixtureFamily fb(2, 1);
  const Vec lb = standard_lambda(fb);
  Vec theta(2);
  theta << 1.0, 1.0;
  CHECK(fb.log_density(lb, theta) ==
        doctest::Approx(-std::log(2.0 * M_PI) - 1.0).epsilon(1e-12));
}

TEST_CASE("log density errors") {
  MixtureFamily f(2, 1);
  const Vec l = standard_lambda(f);
  CHECK_THROWS_AS(f.log_density(l, Vec::Zero(3)), DimensionError);
  Vec bad = l;
  bad[0] = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(f.log_density(bad, Vec::Zero(2)), InvalidParameterError);
  CHECK_THROWS_AS(f.log_density(Vec::Zero(3), Vec::Zero(2)), DimensionError);
}

TEST_CASE("sampling moments and determinism") {
  MixtureFamily f(1, 1);
  const Vec l = standard_lambda(f);

  Rng rng(71u);
  const int s = 100000;
  const DrawBatch batch = f.sample(l, s, rng);
  CHECK(std::abs(batch.draws.col(0).mean()) < 4.0 / std::sqrt(static_cast<double>(s)));

  Rng r1(9001u), r2(9001u);
  const DrawBatch a = f.sample(l, 300, r1);
  const DrawBatch b = f.sample(l, 300, r2);
  CHECK(a.draws == b.draws);
  CHECK(a.log_q == b.log_q);

  // log_q is populated with the generating density
  for (int j = 0; j < 20; ++j)
    CHECK(a.log_q[j] == doctest::Approx(f.log_density(l, a.draws.row(j).transpose())));
}

TEST_CASE("component occupancy of a separated mixture") {
  MixtureFamily f(1, 2);
  std::vector<Vec> means = {Vec::Constant(1, -10.0), Vec::Constant(1, 10.0)};
  std::vector<Mat> scales(2, 0.1 * Mat::Identity(1, 1));
  const Vec l = pack_lambda(f, means, scales, Vec::Zero(2));
  Rng rng(5u);
  const DrawBatch batch = f.sample(l, 10000, rng);
  const double share = (batch.draws.col(0).array() > 0).cast<double>().mean();
  CHECK(share == doctest::Approx(0.5).epsilon(0.04));
}

TEST_CASE("score at the mean has a zero mean block") {
  MixtureFamily f(3, 1);
  Rng rng(11u);
  const Vec l = random_lambda(f, rng);
  const Vec mu = l.head(3);
  const Vec g = f.score(l, mu);
  CHECK(g.head(3).norm() == doctest::Approx(0.0).epsilon(1e-14));
}

TEST_CASE("score matches central finite differences") {
  Rng rng(2024u);
  std::normal_distribution<double> n01;
  for (int k : {1, 2, 3}) {
    for (int d : {1, 2, 5}) {
      MixtureFamily f(d, k);
      for (int rep = 0; rep < 12; ++rep) {
        const Vec lambda = random_lambda(f, rng);
        Vec theta(d);
        for (int i = 0; i < d; ++i) theta[i] = 1.5 * n01(rng);
        const Vec analytic = f.score(lambda, theta);
        const Vec fd = oracle::fd_gradient(
            [&](const Vec& l) { return f.log_density(l, theta); }, lambda, 1e-5);
        for (int i = 0; i < f.lambda_size(); ++i)
          CHECK(analytic[i] ==
                doctest::Approx(fd[i]).epsilon(1e-5).scale(std::max(1.0, std::abs(analytic[i]))));
      }
    }
  }
}

TEST_CASE("logit gradient is responsibility minus weight in the far tail") {
  MixtureFamily f(1, 2);
  std::vector<Vec> means = {Vec::Constant(1, 0.0), Vec::Constant(1, 40.0)};
  std::vector<Mat> scales(2, Mat::Identity(1, 1));
  Vec logits(2);
  logits << 0.3, -0.3;
  const Vec l = pack_lambda(f, means, scales, logits);

  Vec theta = Vec::Constant(1, -3.0);  // deep in component 1 territory
  const Vec g = f.score(l, theta);

  // responsibility oracle
  const double lw1 = logits[0] - std::log(std::exp(logits[0]) + std::exp(logits[1]));
  const double lw2 = logits[1] - std::log(std::exp(logits[0]) + std::exp(logits[1]));
  const double a1 = lw1 + oracle::norm_logpdf(theta[0], 0.0, 1.0);
  const double a2 = lw2 + oracle::norm_logpdf(theta[0], 40.0, 1.0);
  const double r1 = 1.0 / (1.0 + std::exp(a2 - a1));
  CHECK(r1 > 0.999999);
  const int p = f.lambda_size();
  CHECK(g[p - 2] == doctest::Approx(r1 - std::exp(lw1)).epsilon(1e-9));
  CHECK(g[p - 1] == doctest::Approx((1.0 - r1) - std::exp(lw2)).epsilon(1e-9));
}

TEST_CASE("conditional slice") {
  SUBCASE("diagonal covariance reduces to the marginal") {
    MixtureFamily f(3, 1);
    std::vector<Vec> means = {Vec::Zero(3)};
    means[0] << 1.0, -2.0, 0.5;
    Mat scale = Mat::Zero(3, 3);
    scale.diagonal() << 0.7, 1.3, 2.0;
    const Vec l = pack_lambda(f, means, {scale}, Vec::Zero(1));
    const auto [cf, cl] = f.conditional(l, {1}, Vec::Constant(1, 4.0));
    CHECK(cf.dim() == 2);
    const Vec cm = cf.mean_of(cl);
    CHECK(cm[0] == doctest::Approx(1.0));
    CHECK(cm[1] == doctest::Approx(0.5));
    const Mat cc = cf.covariance_of(cl);
    CHECK(cc(0, 0) == doctest::Approx(0.49));
    CHECK(cc(1, 1) == doctest::Approx(4.0));
    CHECK(cc(0, 1) == doctest::Approx(0.0));
  }

  SUBCASE("correlated pair matches the hand Schur complement") {
    // unit variances, rho = 0.5, x2 fixed at 1, means zero:
    // mean = mu1 + 0.5 * (1 - mu2) = 0.5, var = 1 - 0.25 = 0.75
    MixtureFamily f(2, 1);
    Mat sigma(2, 2);
    sigma << 1.0, 0.5, 0.5, 1.0;
    const Mat l_chol = Eigen::LLT<Mat>(sigma).matrixL();
    const Vec l = pack_lambda(f, {Vec::Zero(2)}, {l_chol}, Vec::Zero(1));
    const auto [cf, cl] = f.conditional(l, {1}, Vec::Constant(1, 1.0));
    CHECK(cf.mean_of(cl)[0] == doctest::Approx(0.5).epsilon(1e-10));
    CHECK(cf.covariance_of(cl)(0, 0) == doctest::Approx(0.75).epsilon(1e-10));
  }

  SUBCASE("fixing nothing is the identity") {
    MixtureFamily f(2, 1);
    Rng rng(3u);
    const Vec l = random_lambda(f, rng);
    const auto [cf, cl] = f.conditional(l, {}, Vec());
    CHECK(cf.dim() == 2);
    CHECK(cl == l);
  }
}

TEST_CASE("density integrates to one on a wide grid") {
  Rng rng(17u);
  SUBCASE("one dimension, three components") {
    MixtureFamily f(1, 3);
    const Vec l = random_lambda(f, rng);
    const double total = oracle::simpson(
        [&](double x) { return std::exp(f.log_density(l, Vec::Constant(1, x))); }, -14.0, 14.0,
        4000);
    CHECK(total == doctest::Approx(1.0).epsilon(1e-4));
  }
  SUBCASE("two dimensions, two components") {
    MixtureFamily f(2, 2);
    const Vec l = random_lambda(f, rng);
    const auto inner = [&](double x) {
      return oracle::simpson(
          [&](double y) {
            Vec t(2);
            t << x, y;
            return std::exp(f.log_density(l, t));
          },
          -12.0, 12.0, 360);
    };
    const double total = oracle::simpson(inner, -12.0, 12.0, 360);
    CHECK(total == doctest::Approx(1.0).epsilon(1e-4));
  }
}

TEST_CASE("score identity: E[d log q / d lambda] is zero") {
  MixtureFamily f(2, 2);
  Rng rng(23u);
  const Vec lambda = random_lambda(f, rng);
  const int s = 100000;
  const DrawBatch batch = f.sample(lambda, s, rng);
  const MixtureFamily::Unpacked u = f.unpack(lambda);
  Vec mean = Vec::Zero(f.lambda_size());
  Mat sq_sum = Mat::Zero(f.lambda_size(), 1);
  std::vector<Vec> rows;
  Vec m2 = Vec::Zero(f.lambda_size());
  for (int j = 0; j < s; ++j) {
    const Vec g = f.score(u, batch.draws.row(j).transpose());
    mean += g;
    m2 += g.cwiseProduct(g);
  }
  mean /= s;
  m2 /= s;
  for (int i = 0; i < f.lambda_size(); ++i) {
    const double se = std::sqrt(std::max(m2[i] - mean[i] * mean[i], 1e-300) / s);
    CHECK(std::abs(mean[i]) < 5.0 * se + 1e-12);
  }
}

TEST_CASE("serialization round trip is bit exact") {
  MixtureFamily f(3, 2);
  Rng rng(29u);
  Vec lambda = random_lambda(f, rng);
  lambda[0] = 0.1 + 1e-17;
  lambda[1] = -1.2345678901234567e-3;
  const std::string text = f.to_json(lambda);
  const auto [g, back] = MixtureFamily::from_json(text);
  REQUIRE(g.dim() == f.dim());
  REQUIRE(g.components() == f.components());
  REQUIRE(back.size() == lambda.size());
  for (int i = 0; i < lambda.size(); ++i) CHECK(back[i] == lambda[i]);
}

TEST_CASE("lambda layout length") {
  CHECK(MixtureFamily(1, 1).lambda_size() == 1 + 1 + 1);
  CHECK(MixtureFamily(5, 3).lambda_size() == 3 * (5 + 15) + 3);
  CHECK_THROWS_AS(MixtureFamily(0, 1), InvalidParameterError);
  CHECK_THROWS_AS(MixtureFamily(1, 0), InvalidParameterError);
}

}  // TEST_SUITE
