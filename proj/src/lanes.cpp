#include "svb/lanes.hpp"

#include <Eigen/Sparse>

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <numeric>

#include "svb/io.hpp"

namespace svb {

Vec path_distance(const Trajectory& trajectory) {
  const int n = trajectory.size();
  if (n < 2) throw InvalidParameterError("trajectory needs at least two points");
  Vec d(n);
  d[0] = 0.0;
  for (int t = 1; t < n; ++t)
    d[t] = d[t - 1] + std::hypot(trajectory.x[t] - trajectory.x[t - 1],
                                 trajectory.y[t] - trajectory.y[t - 1]);
  return d;
}

namespace {

struct BinnedData {
  Vec t;        // strictly increasing knots
  Vec y;        // bin means
  Vec weight;   // bin counts
};

BinnedData bin_duplicates(const Vec& t, const Vec& y) {
  if (t.size() != y.size() || t.size() < 4)
    throw InvalidParameterError("spline needs at least four points");
  std::vector<int> order(t.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) { return t[a] < t[b]; });
  const double span = t[order.back()] - t[order.front()];
  if (!(span > 0.0)) throw InvalidParameterError("degenerate abscissa span");
  const double merge_tol = 1e-9 * span;

  std::vector<double> kt, ky, kw;
  for (int idx : order) {
    if (!kt.empty() && t[idx] - kt.back() <= merge_tol) {
      const double w = kw.back();
      ky.back() = (ky.back() * w + y[idx]) / (w + 1.0);
      kw.back() = w + 1.0;
    } else {
      kt.push_back(t[idx]);
      ky.push_back(y[idx]);
      kw.push_back(1.0);
    }
  }
  if (kt.size() < 4) throw NumericalError("rank-deficient design after binning");
  BinnedData out;
  out.t = Eigen::Map<Vec>(kt.data(), static_cast<Eigen::Index>(kt.size()));
  out.y = Eigen::Map<Vec>(ky.data(), static_cast<Eigen::Index>(ky.size()));
  out.weight = Eigen::Map<Vec>(kw.data(), static_cast<Eigen::Index>(kw.size()));
  return out;
}

using Sparse = Eigen::SparseMatrix<double>;

struct BandedSystem {
  Sparse b;            // R + lambda Q' W^-1 Q
  Sparse q;            // n x (n-2)
  Sparse qwq;          // Q' W^-1 Q
  Vec h;
};

BandedSystem build_system(const BinnedData& data, double lambda) {
  const int n = static_cast<int>(data.t.size());
  const int m = n - 2;
  BandedSystem sys;
  sys.h = data.t.tail(n - 1) - data.t.head(n - 1);

  std::vector<Eigen::Triplet<double>> q_trip, r_trip;
  for (int j = 0; j < m; ++j) {
    q_trip.emplace_back(j, j, 1.0 / sys.h[j]);
    q_trip.emplace_back(j + 1, j, -1.0 / sys.h[j] - 1.0 / sys.h[j + 1]);
    q_trip.emplace_back(j + 2, j, 1.0 / sys.h[j + 1]);
    r_trip.emplace_back(j, j, (sys.h[j] + sys.h[j + 1]) / 3.0);
    if (j + 1 < m) {
      r_trip.emplace_back(j, j + 1, sys.h[j + 1] / 6.0);
      r_trip.emplace_back(j + 1, j, sys.h[j + 1] / 6.0);
    }
  }
  sys.q.resize(n, m);
  sys.q.setFromTriplets(q_trip.begin(), q_trip.end());
  Sparse r(m, m);
  r.setFromTriplets(r_trip.begin(), r_trip.end());

  Sparse w_inv(n, n);
  std::vector<Eigen::Triplet<double>> w_trip;
  for (int i = 0; i < n; ++i) w_trip.emplace_back(i, i, 1.0 / data.weight[i]);
  w_inv.setFromTriplets(w_trip.begin(), w_trip.end());

  sys.qwq = sys.q.transpose() * w_inv * sys.q;
  sys.b = r + lambda * sys.qwq;
  return sys;
}

struct SplineSolution {
  Vec fitted;
  Vec gamma;     // interior second derivatives
  double gcv = 0.0;
};

SplineSolution solve_spline(const BinnedData& data, double lambda, bool want_gcv) {
  const int n = static_cast<int>(data.t.size());
  const BandedSystem sys = build_system(data, lambda);
  Eigen::SimplicialLDLT<Sparse> solver(sys.b);
  if (solver.info() != Eigen::Success) throw NumericalError("spline system factorization failed");

  SplineSolution sol;
  const Vec rhs = sys.q.transpose() * data.y;
  sol.gamma = solver.solve(rhs);
  Vec correction = sys.q * sol.gamma;
  for (int i = 0; i < n; ++i) correction[i] *= lambda / data.weight[i];
  sol.fitted = data.y - correction;

  if (want_gcv) {
    // stochastic trace of B^-1 (Q' W^-1 Q) with fixed Rademacher probes
    Rng rng(0x5eedu);
    std::uniform_int_distribution<int> coin(0, 1);
    const int probes = 64;
    const int m = n - 2;
    double trace = 0.0;
    Vec z(m);
    for (int p = 0; p < probes; ++p) {
      for (int i = 0; i < m; ++i) z[i] = coin(rng) == 0 ? -1.0 : 1.0;
      const Vec cz = sys.qwq * z;
      trace += z.dot(solver.solve(cz));
    }
    trace /= probes;
    const double effective_df = n - lambda * trace;
    double rss = 0.0;
    for (int i = 0; i < n; ++i) rss += data.weight[i] * sq(data.y[i] - sol.fitted[i]);
    // n * RSS / (n - tr A)^2 with tr A = effective_df
    const double denom = std::max(n - effective_df, 1e-3);
    sol.gcv = n * rss / sq(denom);
  }
  return sol;
}

}  // namespace

SmoothingSpline SmoothingSpline::fit(const Vec& t, const Vec& y, double lambda) {
  if (lambda < 0.0) throw InvalidParameterError("smoothing parameter must be nonnegative");
  const BinnedData data = bin_duplicates(t, y);
  const SplineSolution sol = solve_spline(data, lambda, false);
  SmoothingSpline out;
  out.knots_ = data.t;
  out.values_ = sol.fitted;
  out.second_ = Vec::Zero(data.t.size());
  out.second_.segment(1, data.t.size() - 2) = sol.gamma;
  out.lambda_ = lambda;
  return out;
}

SmoothingSpline SmoothingSpline::fit_gcv(const Vec& t, const Vec& y) {
  const BinnedData data = bin_duplicates(t, y);
  const double span = data.t[data.t.size() - 1] - data.t[0];
  const double scale = std::pow(span / data.t.size(), 3) * data.weight.sum();

  double best_lambda = scale;
  double best_gcv = std::numeric_limits<double>::infinity();
  for (int k = -10; k <= 10; ++k) {
    const double lambda = scale * std::pow(10.0, 0.5 * k);
    const SplineSolution sol = solve_spline(data, lambda, true);
    if (sol.gcv < best_gcv) {
      best_gcv = sol.gcv;
      best_lambda = lambda;
    }
  }
  return fit(t, y, best_lambda);
}

double SmoothingSpline::operator()(double t) const {
  const int n = static_cast<int>(knots_.size());
  if (t <= knots_[0]) return values_[0] + derivative(knots_[0]) * (t - knots_[0]);
  if (t >= knots_[n - 1])
    return values_[n - 1] + derivative(knots_[n - 1]) * (t - knots_[n - 1]);
  const int i = static_cast<int>(
                    std::upper_bound(knots_.data(), knots_.data() + n, t) - knots_.data()) -
                1;
  const double h = knots_[i + 1] - knots_[i];
  const double a = (knots_[i + 1] - t) / h;
  const double b = (t - knots_[i]) / h;
  return a * values_[i] + b * values_[i + 1] +
         ((a * a * a - a) * second_[i] + (b * b * b - b) * second_[i + 1]) * h * h / 6.0;
}

double SmoothingSpline::derivative(double t) const {
  const int n = static_cast<int>(knots_.size());
  double tc = std::clamp(t, knots_[0], knots_[n - 1]);
  int i;
  if (tc >= knots_[n - 1])
    i = n - 2;
  else
    i = std::max(
        0, static_cast<int>(std::upper_bound(knots_.data(), knots_.data() + n, tc) -
                            knots_.data()) -
               1);
  const double h = knots_[i + 1] - knots_[i];
  const double a = (knots_[i + 1] - tc) / h;
  const double b = (tc - knots_[i]) / h;
  return (values_[i + 1] - values_[i]) / h -
         (3.0 * a * a - 1.0) * h * second_[i] / 6.0 +
         (3.0 * b * b - 1.0) * h * second_[i + 1] / 6.0;
}

CentreLine fit_centre_line(const std::vector<Trajectory>& sample, double smoothing) {
  std::vector<double> d_all, x_all, y_all;
  for (const Trajectory& traj : sample) {
    const Vec d = path_distance(traj);
    for (int t = 0; t < traj.size(); ++t) {
      d_all.push_back(d[t]);
      x_all.push_back(traj.x[t]);
      y_all.push_back(traj.y[t]);
    }
  }
  if (d_all.size() < 10) throw InvalidParameterError("centre line needs at least ten points");
  const Vec d = Eigen::Map<Vec>(d_all.data(), static_cast<Eigen::Index>(d_all.size()));
  const Vec x = Eigen::Map<Vec>(x_all.data(), static_cast<Eigen::Index>(x_all.size()));
  const Vec y = Eigen::Map<Vec>(y_all.data(), static_cast<Eigen::Index>(y_all.size()));

  CentreLine centre;
  centre.fx = smoothing < 0.0 ? SmoothingSpline::fit_gcv(d, x) : SmoothingSpline::fit(d, x, smoothing);
  centre.fy = smoothing < 0.0 ? SmoothingSpline::fit_gcv(d, y) : SmoothingSpline::fit(d, y, smoothing);
  centre.d_max = d.maxCoeff();
  return centre;
}

LateralDeviation lateral_deviation(double px, double py, const CentreLine& centre) {
  const auto sq_dist = [&](double d) {
    return sq(px - centre.fx(d)) + sq(py - centre.fy(d));
  };

  // coarse grid bracket
  const int grid = 600;
  const double lo = centre.fx.min_knot();
  const double hi = centre.d_max;
  double best_d = lo;
  double best_v = sq_dist(lo);
  for (int i = 1; i <= grid; ++i) {
    const double d = lo + (hi - lo) * i / grid;
    const double v = sq_dist(d);
    if (v < best_v) {
      best_v = v;
      best_d = d;
    }
  }

  // golden-section refinement on the bracketing cell pair
  const double cell = (hi - lo) / grid;
  double a = std::max(lo, best_d - cell);
  double b = std::min(hi, best_d + cell);
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = sq_dist(c), fd = sq_dist(d);
  for (int it = 0; it < 60; ++it) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = sq_dist(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = sq_dist(d);
    }
  }
  const double d_hat = 0.5 * (a + b);

  LateralDeviation out;
  out.x_star = d_hat;
  const double cx = centre.fx(d_hat);
  const double cy = centre.fy(d_hat);
  const double tangent_x = centre.fx.derivative(d_hat);
  const double tangent_y = centre.fy.derivative(d_hat);
  const double off_x = px - cx;
  const double off_y = py - cy;
  const double cross = tangent_x * off_y - tangent_y * off_x;
  const double magnitude = std::hypot(off_x, off_y);
  // left of the direction of travel carries the negative sign
  out.y_star = cross > 0.0 ? -magnitude : magnitude;
  out.boundary = d_hat <= lo + 1e-6 * (hi - lo) || d_hat >= hi - 1e-6 * (hi - lo);
  return out;
}

std::vector<Trajectory> load_trajectories_csv(const std::string& path) {
  const CsvTable table = read_csv(path);
  const int c_vehicle = table.column("vehicle_id");
  const int c_frame = table.column("frame");
  const int c_x = table.column("x");
  const int c_y = table.column("y");
  const int c_lane = table.column("lane");

  std::map<int, std::vector<std::array<double, 3>>> by_vehicle;  // frame, x, y
  std::map<int, int> lanes;
  for (const auto& row : table.rows) {
    const int id = static_cast<int>(row[c_vehicle]);
    by_vehicle[id].push_back({row[c_frame], row[c_x], row[c_y]});
    lanes[id] = static_cast<int>(row[c_lane]);
  }
  std::vector<Trajectory> out;
  for (auto& [id, rows] : by_vehicle) {
    std::sort(rows.begin(), rows.end(),
              [](const auto& a, const auto& b) { return a[0] < b[0]; });
    Trajectory traj;
    traj.vehicle_id = id;
    traj.lane_id = lanes[id];
    for (const auto& r : rows) {
      traj.x.push_back(r[1]);
      traj.y.push_back(r[2]);
    }
    out.push_back(std::move(traj));
  }
  return out;
}

void write_deviation_panel_csv(const std::string& path, const Mat& panel) {
  std::vector<std::vector<double>> rows;
  rows.reserve(panel.rows() * panel.cols());
  for (int i = 0; i < panel.rows(); ++i)
    for (int t = 0; t < panel.cols(); ++t)
      rows.push_back({static_cast<double>(i), static_cast<double>(t), panel(i, t)});
  write_csv(path, {"unit", "t", "y"}, rows);
}

Mat read_deviation_panel_csv(const std::string& path) {
  const CsvTable table = read_csv(path);
  const int c_unit = table.column("unit");
  const int c_t = table.column("t");
  const int c_y = table.column("y");
  int units = 0, length = 0;
  for (const auto& row : table.rows) {
    units = std::max(units, static_cast<int>(row[c_unit]) + 1);
    length = std::max(length, static_cast<int>(row[c_t]) + 1);
  }
  Mat panel = Mat::Zero(units, length);
  for (const auto& row : table.rows)
    panel(static_cast<int>(row[c_unit]), static_cast<int>(row[c_t])) = row[c_y];
  return panel;
}

}  // namespace svb
