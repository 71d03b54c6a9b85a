#pragma once

#include <string>
#include <vector>

#include "svb/util.hpp"

namespace svb {

/// One vehicle's positions at fixed 100 ms steps.
struct Trajectory {
  int vehicle_id = 0;
  int lane_id = 0;
  std::vector<double> x;
  std::vector<double> y;

  int size() const { return static_cast<int>(x.size()); }
};

/// Cumulative Euclidean path length; first entry is zero.
Vec path_distance(const Trajectory& trajectory);

/// Natural cubic smoothing spline fitted by the banded second-derivative
/// formulation; duplicate abscissae are binned with counts as weights.
class SmoothingSpline {
 public:
  static SmoothingSpline fit(const Vec& t, const Vec& y, double lambda);
  /// Smoothing chosen by generalized cross-validation over a log grid.
  static SmoothingSpline fit_gcv(const Vec& t, const Vec& y);

  double operator()(double t) const;
  double derivative(double t) const;
  double min_knot() const { return knots_[0]; }
  double max_knot() const { return knots_[knots_.size() - 1]; }
  double gcv_lambda() const { return lambda_; }

 private:
  Vec knots_;
  Vec values_;
  Vec second_;   // natural boundary: zero at both ends
  double lambda_ = 0.0;
};

/// Lane centre as two coordinate splines against arc length.
struct CentreLine {
  SmoothingSpline fx;
  SmoothingSpline fy;
  double d_max = 0.0;
};

/// Pool the sample trajectories (shared arc-length origin) and fit the two
/// coordinate splines; negative smoothing means GCV.
CentreLine fit_centre_line(const std::vector<Trajectory>& sample, double smoothing = -1.0);

struct LateralDeviation {
  double x_star = 0.0;   // arc length of the projection
  double y_star = 0.0;   // signed deviation, left of travel negative
  bool boundary = false; // projection pinned at the domain edge
};

/// Projects the point onto the centre line by a coarse grid plus
/// golden-section refinement; sign from the tangent-offset orientation.
LateralDeviation lateral_deviation(double px, double py, const CentreLine& centre);

/// CSV schemas: trajectories as {vehicle_id, frame, x, y, lane}; deviation
/// panels as {unit, t, y}.
std::vector<Trajectory> load_trajectories_csv(const std::string& path);
void write_deviation_panel_csv(const std::string& path, const Mat& panel);
Mat read_deviation_panel_csv(const std::string& path);

}  // namespace svb
