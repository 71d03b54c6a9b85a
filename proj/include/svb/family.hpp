#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "svb/util.hpp"

namespace svb {

/// A batch of S parameter draws with the values needed to reuse them later:
/// the generating density at each draw and, optionally, cached window
/// log-likelihoods and per-draw score rows.
struct DrawBatch {
  Mat draws;                 // S x d
  Vec log_q;                 // S
  Vec cached_loglik;         // S or empty
  Mat scores;                // S x |lambda| or empty

  int size() const { return static_cast<int>(draws.rows()); }
  bool has_loglik() const { return cached_loglik.size() == draws.rows(); }
};

/// K-component mixture of multivariate normals over R^d, parameterized by a
/// flat auxiliary vector: per component the mean, then the row-major lower
/// triangle of the covariance scale factor (diagonal entries log-stored),
/// then K component logits at the tail. Softmax of the logits gives the
/// weights, so every lambda in R^|lambda| is a valid member.
class MixtureFamily {
 public:
  MixtureFamily(int dim, int components);

  int dim() const { return dim_; }
  int components() const { return components_; }
  int lambda_size() const;
  int component_block() const { return dim_ + dim_ * (dim_ + 1) / 2; }

  bool operator==(const MixtureFamily& other) const {
    return dim_ == other.dim_ && components_ == other.components_;
  }

  /// Zero-mean, unit-scale member; K > 1 gets seeded mean jitter since the
  /// perfectly symmetric member is a stationary point of the score gradient.
  Vec init_lambda(Rng* rng = nullptr) const;

  void validate(const Vec& lambda) const;

  /// Per-lambda unpacked view used by the evaluation routines; build once per
  /// lambda when evaluating many points.
  struct Unpacked {
    std::vector<Vec> mean;                       // K of d
    std::vector<Mat> scale;                      // K of d x d lower triangular
    Vec log_weight;                              // K
  };
  Unpacked unpack(const Vec& lambda) const;

  DrawBatch sample(const Vec& lambda, int count, Rng& rng) const;

  double log_density(const Vec& lambda, const Vec& theta) const;
  double log_density(const Unpacked& u, const Vec& theta) const;

  /// Analytic d log q / d lambda, chain rule through the log-diagonal storage
  /// and the weight softmax.
  Vec score(const Vec& lambda, const Vec& theta) const;
  Vec score(const Unpacked& u, const Vec& theta) const;

  /// Exact Gaussian conditional of the free coordinates given fixed ones
  /// (K = 1 only). Returns the family and lambda of the conditional.
  std::pair<MixtureFamily, Vec> conditional(const Vec& lambda,
                                            const std::vector<int>& fixed,
                                            const Vec& values) const;

  /// Gaussian marginal over a coordinate subset (K = 1 only).
  std::pair<MixtureFamily, Vec> marginal(const Vec& lambda,
                                         const std::vector<int>& keep) const;

  /// K = 1 moments.
  Vec mean_of(const Vec& lambda) const;
  Mat covariance_of(const Vec& lambda) const;

  /// Embed a K = 1 lambda into a family with extra trailing coordinates; the
  /// new block starts independent with the given mean and standard deviation.
  Vec grow(const Vec& lambda, const Vec& new_mean, double new_sd) const;

  std::string to_json(const Vec& lambda) const;
  static std::pair<MixtureFamily, Vec> from_json(const std::string& text);

 private:
  int dim_;
  int components_;

  Vec component_scores(const Unpacked& u, const Vec& theta) const;  // K log-densities
};

}  // namespace svb
