#include "svb/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

namespace svb {

std::string ScoreTable::to_csv(bool include_timing) const {
  std::string out = include_timing
                        ? "replication,method,K,boundary,metric,value,cum_wall_time\n"
                        : "replication,method,K,boundary,metric,value\n";
  char buf[160];
  for (const ScoreRow& r : rows) {
    if (include_timing)
      std::snprintf(buf, sizeof(buf), "%d,%s,%d,%d,%s,%.17g,%.17g\n", r.replication,
                    r.method.c_str(), r.components, r.boundary, r.metric.c_str(), r.value,
                    r.cum_wall_time);
    else
      std::snprintf(buf, sizeof(buf), "%d,%s,%d,%d,%s,%.17g\n", r.replication, r.method.c_str(),
                    r.components, r.boundary, r.metric.c_str(), r.value);
    out += buf;
  }
  return out;
}

CumulativeScores cumulative_log_score(const std::vector<double>& log_scores) {
  CumulativeScores out;
  out.values.reserve(log_scores.size());
  double acc = 0.0;
  for (double v : log_scores) {
    if (std::isnan(v)) throw InvalidParameterError("log score is NaN");
    acc += v;
    if (!std::isfinite(acc)) {
      acc = -std::numeric_limits<double>::infinity();
      out.degenerate = true;
    }
    out.values.push_back(acc);
  }
  return out;
}

namespace {

// k-th smallest strictly positive distance from x to the rows of m,
// optionally skipping one row (the query itself).
double kth_positive_distance(const Vec& x, const Mat& m, int k, int skip) {
  std::vector<double> dist;
  dist.reserve(m.rows());
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    if (r == skip) continue;
    const double d = (m.row(r).transpose() - x).norm();
    if (d > 0.0) dist.push_back(d);
  }
  if (static_cast<int>(dist.size()) < k) return 0.0;
  std::nth_element(dist.begin(), dist.begin() + (k - 1), dist.end());
  return dist[k - 1];
}

}  // namespace

double knn_kl(const Mat& samples_p, const Mat& samples_q, int k) {
  if (samples_p.cols() != samples_q.cols())
    throw DimensionError("sample sets differ in dimension");
  if (samples_p.rows() < 50 || samples_q.rows() < 50)
    throw InvalidParameterError("kl estimate needs at least 50 samples per side");
  if (k < 1) throw InvalidParameterError("k must be >= 1");

  const int n = static_cast<int>(samples_p.rows());
  const int m = static_cast<int>(samples_q.rows());
  const int d = static_cast<int>(samples_p.cols());

  double acc = 0.0;
  int used = 0;
  for (int i = 0; i < n; ++i) {
    const Vec x = samples_p.row(i).transpose();
    const double rho = kth_positive_distance(x, samples_p, k, i);
    const double nu = kth_positive_distance(x, samples_q, k, -1);
    if (rho <= 0.0 || nu <= 0.0) continue;  // not enough distinct points
    acc += std::log(nu / rho);
    ++used;
  }
  if (used == 0) return 0.0;
  const double estimate =
      (static_cast<double>(d) / used) * acc + std::log(static_cast<double>(m) / (n - 1.0));
  return std::max(0.0, estimate);
}

std::vector<double> rcmr(const std::vector<double>& cumulative_mean_runtimes, double reference) {
  if (reference <= 0.0) throw InvalidParameterError("reference runtime must be positive");
  std::vector<double> out;
  out.reserve(cumulative_mean_runtimes.size());
  for (double v : cumulative_mean_runtimes) out.push_back(v / reference);
  return out;
}

std::vector<double> gradient_variance_trace(const std::vector<std::vector<double>>& traces) {
  if (traces.empty()) throw InvalidParameterError("no traces supplied");
  std::size_t len = traces.front().size();
  for (const auto& t : traces) len = std::min(len, t.size());
  std::vector<double> medians(len);
  std::vector<double> column(traces.size());
  for (std::size_t i = 0; i < len; ++i) {
    for (std::size_t r = 0; r < traces.size(); ++r) column[r] = traces[r][i];
    std::sort(column.begin(), column.end());
    const std::size_t c = column.size();
    medians[i] = (c % 2 == 1) ? column[c / 2] : 0.5 * (column[c / 2 - 1] + column[c / 2]);
  }
  return medians;
}

}  // namespace svb
