#pragma once

#include <cmath>
#include <filesystem>
#include <random>
#include <string>

#include "rcabs/reservoir.hpp"
#include "rcabs/types.hpp"

namespace testing {

inline rcabs::Mat random_matrix(rcabs::Index rows, rcabs::Index cols, std::uint64_t seed, double scale = 1.0) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> u(-scale, scale);
  rcabs::Mat m(rows, cols);
  for (rcabs::Index j = 0; j < cols; ++j) {
    for (rcabs::Index i = 0; i < rows; ++i) m(i, j) = u(gen);
  }
  return m;
}

inline rcabs::Vec random_vector(rcabs::Index n, std::uint64_t seed, double scale = 1.0) {
  return random_matrix(n, 1, seed, scale).col(0);
}

inline double rel_error(const rcabs::Mat& a, const rcabs::Mat& b) {
  const double denom = std::max(b.norm(), 1e-300);
  return (a - b).norm() / denom;
}

/// Small hand-built reservoir with explicit matrices.
inline rcabs::Reservoir make_reservoir(const rcabs::Mat& A, const rcabs::Mat& B, const rcabs::Vec& d, double gamma) {
  rcabs::Reservoir res;
  res.A = A.sparseView();
  res.A.makeCompressed();
  res.B = B;
  res.d = d;
  res.gamma = gamma;
  res.params.n_neurons = A.rows();
  res.params.gamma = gamma;
  return res;
}

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    path_ = std::filesystem::temp_directory_path() /
            ("rcabs_" + tag + "_" + std::to_string(std::random_device{}()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace testing
