#include "rcabs/trajectory.hpp"

#include <charconv>
#include <fstream>
#include <ostream>

#include "rcabs/errors.hpp"

namespace rcabs {

Trajectory::Trajectory(Mat states, double dt, double t0)
    : states_(std::move(states)), dt_(dt), t0_(t0) {
  if (!(dt_ > 0.0)) throw ContractViolation("trajectory dt must be positive");
  if (states_.cols() < 1) throw ContractViolation("trajectory must hold at least one state");
  if (states_.rows() < 1) throw ContractViolation("trajectory states must have dimension >= 1");
}

Trajectory Trajectory::slice(Index begin, Index end) const {
  if (begin < 0 || end > length() || begin >= end) {
    throw ContractViolation("trajectory slice out of range");
  }
  return Trajectory(states_.middleCols(begin, end - begin), dt_, time(begin));
}

Vec Trajectory::midpoint(Index i) const {
  if (i < 0 || i + 1 >= length()) throw ContractViolation("trajectory midpoint out of range");
  const Index n = length();
  if (n == 2) return 0.5 * (states_.col(0) + states_.col(1));
  if (i == 0) return (3.0 * states_.col(0) + 6.0 * states_.col(1) - states_.col(2)) / 8.0;
  if (i + 2 == n) return (-states_.col(i - 1) + 6.0 * states_.col(i) + 3.0 * states_.col(i + 1)) / 8.0;
  return (-states_.col(i - 1) + 9.0 * states_.col(i) + 9.0 * states_.col(i + 1) - states_.col(i + 2)) / 16.0;
}

Vec Trajectory::mean() const { return states_.rowwise().mean(); }

std::string format_double(double v) {
  char buf[40];
  auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

void write_csv(std::ostream& out, const Trajectory& traj, const std::string& prefix) {
  out << "t";
  for (Index j = 0; j < traj.dimension(); ++j) out << ',' << prefix << (j + 1);
  out << '\n';
  for (Index i = 0; i < traj.length(); ++i) {
    out << format_double(traj.time(i));
    for (Index j = 0; j < traj.dimension(); ++j) out << ',' << format_double(traj.states()(j, i));
    out << '\n';
  }
}

void write_csv_file(const std::string& path, const Trajectory& traj, const std::string& prefix) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path + " for writing");
  write_csv(out, traj, prefix);
  if (!out) throw IoError("failed writing " + path);
}

}  // namespace rcabs
