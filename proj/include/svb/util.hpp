#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>

namespace svb {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using Rng = std::mt19937_64;

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct InvalidParameterError : Error {
  using Error::Error;
};
struct DimensionError : Error {
  using Error::Error;
};
struct NumericalError : Error {
  using Error::Error;
};
struct ScheduleError : Error {
  using Error::Error;
};
struct DegenerateTargetError : Error {
  using Error::Error;
};
struct DegenerateDataError : Error {
  using Error::Error;
};

/// Importance weights collapsed; carries the effective sample size observed.
struct WeightDegeneracyError : Error {
  double ess;
  WeightDegeneracyError(const std::string& msg, double ess_in)
      : Error(msg), ess(ess_in) {}
};

struct ConfigError : Error {
  int line;
  ConfigError(const std::string& msg, int line_in) : Error(msg), line(line_in) {}
};

// ---------------------------------------------------------------------------
// Seed derivation
// ---------------------------------------------------------------------------

/// splitmix64 step; derives decorrelated stream seeds from a base seed.
inline std::uint64_t mix_seed(std::uint64_t base, std::uint64_t stream) {
  std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline Rng make_rng(std::uint64_t seed) { return Rng(seed); }

// ---------------------------------------------------------------------------
// Numerics
// ---------------------------------------------------------------------------

inline double log_sum_exp(const Vec& v) {
  const double m = v.maxCoeff();
  if (!std::isfinite(m)) return m;  // all -inf (or a nan) dominates
  double s = 0.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) s += std::exp(v[i] - m);
  return m + std::log(s);
}

inline double log_sum_exp(double a, double b) {
  const double m = std::max(a, b);
  if (!std::isfinite(m)) return m;
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

/// Pairwise (cascade) summation; fixed reduction order regardless of caller.
inline double pairwise_sum(std::span<const double> x) {
  if (x.size() <= 8) {
    double s = 0.0;
    for (double v : x) s += v;
    return s;
  }
  const std::size_t half = x.size() / 2;
  return pairwise_sum(x.first(half)) + pairwise_sum(x.subspan(half));
}

inline double pairwise_sum(const Vec& x) {
  return pairwise_sum(std::span<const double>(x.data(), static_cast<std::size_t>(x.size())));
}

/// Digamma via upward recurrence into the asymptotic region.
inline double digamma(double x) {
  if (x <= 0.0 && x == std::floor(x)) return std::numeric_limits<double>::quiet_NaN();
  double result = 0.0;
  while (x < 6.0) {
    result -= 1.0 / x;
    x += 1.0;
  }
  const double inv = 1.0 / x;
  const double inv2 = inv * inv;
  result += std::log(x) - 0.5 * inv -
            inv2 * (1.0 / 12.0 - inv2 * (1.0 / 120.0 - inv2 * (1.0 / 252.0 - inv2 / 240.0)));
  return result;
}

inline double sq(double x) { return x * x; }

inline constexpr double kLogTwoPi = 1.8378770664093454836;

}  // namespace svb
