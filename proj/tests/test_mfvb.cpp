#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "svb/mfvb.hpp"

using namespace svb;

namespace {

Mat separated_panel(int units, int t, Rng& rng, double sep = 4.0) {
  std::normal_distribution<double> n01;
  Mat y(units, t);
  for (int i = 0; i < units; ++i) {
    const double mu = (i % 2 == 0) ? -sep / 2 : sep / 2;
    for (int s = 0; s < t; ++s) y(i, s) = mu + n01(rng);
  }
  return y;
}

}  // namespace

TEST_SUITE("mfvb") {

TEST_CASE("stick parameter update from pinned responsibilities") {
  Rng rng(3u);
  Mat panel = separated_panel(3, 6, rng);
  MfvbHyper hyper;
  MfvbState state = mfvb_init(panel, 6, hyper);
  state.rho.setZero();
  state.rho.col(0).setOnes();  // every unit on the first stick
  mfvb_coordinate_pass(state, panel, 6, hyper, rng);
  CHECK(state.a[0] == doctest::Approx(4.0).epsilon(1e-12));  // 1 + 3
  CHECK(state.b[0] == doctest::Approx(hyper.alpha).epsilon(1e-12));
}

TEST_CASE("stick expectations follow the digamma identities") {
  // digamma(2) - digamma(1) = 1
  CHECK(digamma(2.0) - digamma(1.0) == doctest::Approx(1.0).epsilon(1e-10));
  Vec a = Vec::Ones(3), b = Vec::Ones(3);
  const Vec elog = mfvb_elog_beta(a, b);
  // first stick: E[log beta'_1] = digamma(1) - digamma(2) = -1
  CHECK(elog[0] == doctest::Approx(-1.0).epsilon(1e-10));
  // second: -1 + E[log(1 - beta'_1)] = -2
  CHECK(elog[1] == doctest::Approx(-2.0).epsilon(1e-10));
  // last stick is forced to one: only the accumulated tail remains
  CHECK(elog[2] == doctest::Approx(-2.0).epsilon(1e-10));
}

TEST_CASE("responsibility rows stay normalized") {
  Rng rng(5u);
  Mat panel = separated_panel(8, 10, rng);
  MfvbHyper hyper;
  MfvbState state = mfvb_init(panel, 10, hyper);
  for (int pass = 0; pass < 3; ++pass) {
    mfvb_coordinate_pass(state, panel, 10, hyper, rng);
    for (int i = 0; i < 8; ++i)
      CHECK(state.rho.row(i).sum() == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("positivity survives random states") {
  Rng rng(7u);
  std::uniform_real_distribution<double> unif(0.1, 3.0);
  Mat panel = separated_panel(5, 8, rng);
  MfvbHyper hyper;
  for (int rep = 0; rep < 300; ++rep) {
    MfvbState state = mfvb_init(panel, 8, hyper);
    for (int j = 0; j < 5; ++j) {
      state.gamma[j] = unif(rng) - 1.5;
      state.tau[j] = unif(rng);
      state.shape[j] = unif(rng);
      state.scale[j] = unif(rng);
    }
    CHECK_NOTHROW(mfvb_coordinate_pass(state, panel, 8, hyper, rng));
  }
}

TEST_CASE("separated groups concentrate the responsibilities") {
  Rng rng(9u);
  Mat panel = separated_panel(10, 40, rng);
  const MfvbFit fit = mfvb_fit(panel, 40, MfvbHyper{}, 1e-3, 300, 11);
  CHECK(fit.converged);

  std::vector<int> label(10);
  for (int i = 0; i < 10; ++i) {
    int best = 0;
    for (int j = 1; j < 10; ++j)
      if (fit.state.rho(i, j) > fit.state.rho(i, best)) best = j;
    label[i] = best;
    CHECK(fit.state.rho(i, best) > 0.95);
  }
  // partition matches the even/odd truth up to labels
  for (int i = 2; i < 10; ++i) {
    CHECK(label[i] == label[i % 2]);
    CHECK(label[0] != label[1]);
  }
}

TEST_CASE("stopping behaviour") {
  Rng rng(13u);
  Mat panel = separated_panel(6, 12, rng);

  SUBCASE("huge tolerance stops after exactly one pass") {
    const MfvbFit fit = mfvb_fit(panel, 12, MfvbHyper{}, 1e9, 50, 3);
    CHECK(fit.passes == 1);
    CHECK(fit.converged);
  }

  SUBCASE("seeded repeat is identical") {
    const MfvbFit a = mfvb_fit(panel, 12, MfvbHyper{}, 1e-3, 200, 5);
    const MfvbFit b = mfvb_fit(panel, 12, MfvbHyper{}, 1e-3, 200, 5);
    CHECK(a.passes == b.passes);
    CHECK(a.state.rho == b.state.rho);
    CHECK(a.state.gamma == b.state.gamma);
  }

  SUBCASE("pass budget exhaustion flags non-convergence") {
    const MfvbFit fit = mfvb_fit(panel, 12, MfvbHyper{}, 1e-15, 3, 5);
    CHECK_FALSE(fit.converged);
    CHECK(fit.passes == 3);
  }
}

TEST_CASE("converged state is a fixed point") {
  Rng rng(17u);
  Mat panel = separated_panel(8, 30, rng);
  const double tol = 2e-3;
  MfvbFit fit = mfvb_fit(panel, 30, MfvbHyper{}, tol, 500, 7);
  REQUIRE(fit.converged);

  // one extra pass moves nothing beyond the stopping tolerance
  MfvbState after = fit.state;
  Rng extra(99u);
  mfvb_coordinate_pass(after, panel, 30, MfvbHyper{}, extra);
  CHECK((after.a - fit.state.a).cwiseAbs().maxCoeff() /
            (1.0 + fit.state.a.cwiseAbs().maxCoeff()) < tol);
  CHECK((after.gamma - fit.state.gamma).cwiseAbs().maxCoeff() < 1e-2);
  CHECK((after.rho - fit.state.rho).cwiseAbs().maxCoeff() < tol);
}

TEST_CASE("factorized predictive reductions") {
  MfvbHyper hyper;
  MfvbState state;
  state.a = Vec::Ones(2);
  state.b = Vec::Ones(2);
  state.rho.resize(2, 2);
  state.rho << 1.0, 0.0, 0.0, 1.0;
  state.gamma = Vec::Zero(2);
  state.gamma[0] = 0.7;
  state.tau = Vec::Constant(2, 1e-18);
  state.shape = Vec::Constant(2, 1e7);  // sigma2 pinned at scale/shape
  state.scale = Vec::Constant(2, 1.6e7);

  SUBCASE("point-mass cluster collapses to the normal density") {
    Rng rng(19u);
    const double got = mfvb_predictive_logscore(state, 0, 0.2, 4000, rng);
    CHECK(got == doctest::Approx(oracle::norm_logpdf(0.2, 0.7, 1.6)).epsilon(1e-3));
  }

  SUBCASE("equal-density mixture reduces to the common density") {
    MfvbState mixed = state;
    mixed.rho.row(0) << 0.5, 0.5;
    mixed.gamma[0] = 0.5;
    mixed.gamma[1] = -0.5;
    mixed.scale = Vec::Constant(2, 1e7);  // unit variance
    Rng rng(23u);
    const double got = mfvb_predictive_logscore(mixed, 0, 0.0, 4000, rng);
    CHECK(got == doctest::Approx(oracle::norm_logpdf(0.0, 0.5, 1.0)).epsilon(1e-3));
  }

  SUBCASE("two-cluster mixture approaches the quadrature mixture value") {
    MfvbState mixed = state;
    mixed.rho.row(0) << 0.5, 0.5;
    mixed.gamma[0] = -1.0;
    mixed.gamma[1] = 1.0;
    mixed.scale = Vec::Constant(2, 1e7);
    Rng rng(29u);
    const double got = mfvb_predictive_logscore(mixed, 0, 0.3, 200000, rng);
    const double exact = std::log(0.5 * std::exp(oracle::norm_logpdf(0.3, -1.0, 1.0)) +
                                  0.5 * std::exp(oracle::norm_logpdf(0.3, 1.0, 1.0)));
    CHECK(got == doctest::Approx(exact).epsilon(3e-3));
  }
}

}  // TEST_SUITE
