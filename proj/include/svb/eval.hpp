#pragma once

#include <string>
#include <vector>

#include "svb/util.hpp"

namespace svb {

/// Long-format metric rows; wall time is carried separately from the metric
/// value so metric files stay byte-reproducible across reruns.
struct ScoreRow {
  int replication = 0;
  std::string method;
  int components = 0;
  int boundary = 0;
  std::string metric;
  double value = 0.0;
  double cum_wall_time = 0.0;
};

struct ScoreTable {
  std::vector<ScoreRow> rows;

  void append(ScoreRow row) { rows.push_back(std::move(row)); }
  /// CSV without the timing column (deterministic), or with it.
  std::string to_csv(bool include_timing) const;
};

/// Prefix sums of per-boundary log scores. A -inf entry poisons the tail and
/// flips the flag.
struct CumulativeScores {
  std::vector<double> values;
  bool degenerate = false;
};
CumulativeScores cumulative_log_score(const std::vector<double>& log_scores);

/// Nearest-neighbour Kullback-Leibler estimate between two sample sets of
/// equal dimension. Zero-distance neighbours fall through to the next
/// strictly positive one; the estimate is clipped below at zero.
double knn_kl(const Mat& samples_p, const Mat& samples_q, int k = 1);

/// Cumulative mean runtimes divided by the reference cell.
std::vector<double> rcmr(const std::vector<double>& cumulative_mean_runtimes, double reference);

/// Per-iteration median across replications of a chosen trace column,
/// truncated to the shortest trace.
std::vector<double> gradient_variance_trace(const std::vector<std::vector<double>>& traces);

}  // namespace svb
