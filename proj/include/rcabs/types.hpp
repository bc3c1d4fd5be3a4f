#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

namespace rcabs {

using Index = Eigen::Index;
using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using SparseMat = Eigen::SparseMatrix<double, Eigen::RowMajor>;

// Component magnitude beyond which a simulated state counts as diverged.
inline constexpr double kDivergenceBound = 1e6;

}  // namespace rcabs
