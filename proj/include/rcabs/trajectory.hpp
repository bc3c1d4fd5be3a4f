#pragma once

#include <iosfwd>
#include <string>

#include "rcabs/types.hpp"

namespace rcabs {

/// Uniformly sampled multivariate time series. Column i holds the state at
/// time t0 + i * dt.
class Trajectory {
 public:
  Trajectory(Mat states, double dt, double t0 = 0.0);

  Index dimension() const { return states_.rows(); }
  Index length() const { return states_.cols(); }
  double dt() const { return dt_; }
  double t0() const { return t0_; }
  double duration() const { return static_cast<double>(length() - 1) * dt_; }
  double time(Index i) const { return t0_ + static_cast<double>(i) * dt_; }

  auto state(Index i) const { return states_.col(i); }
  const Mat& states() const { return states_; }

  /// Samples [begin, end) as a new trajectory starting at time(begin).
  Trajectory slice(Index begin, Index end) const;
  /// State at time(i) + dt/2 by cubic interpolation through the samples
  /// i-1 .. i+2 (quadratic at the ends, linear for two samples).
  Vec midpoint(Index i) const;
  Vec mean() const;

 private:
  Mat states_;
  double dt_;
  double t0_;
};

/// Decimal with 17 significant digits (lossless for doubles).
std::string format_double(double v);

/// Header `t,x1,...,xk`, one row per sample.
void write_csv(std::ostream& out, const Trajectory& traj, const std::string& prefix = "x");
void write_csv_file(const std::string& path, const Trajectory& traj,
                    const std::string& prefix = "x");

}  // namespace rcabs
