// Copyright 2026 The otfusion Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef OTFUSION_TESTS_SUPPORT_HPP_
#define OTFUSION_TESTS_SUPPORT_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "otfusion/matrix.hpp"

namespace testing {

using Grid = std::vector<std::vector<double>>;

inline otfusion::Matrix random_matrix(std::mt19937_64& rng, std::size_t n,
                                      std::size_t k, double lo = 0.0,
                                      double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  otfusion::Matrix m(n, k);
  for (double& x : m.values()) x = u(rng);
  return m;
}

inline otfusion::Matrix random_stochastic(std::mt19937_64& rng, std::size_t n,
                                          std::size_t k) {
  otfusion::Matrix m = random_matrix(rng, n, k, 0.01, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0;
    for (double x : m.row(i)) s += x;
    for (double& x : m.row(i)) x /= s;
  }
  return m;
}

inline Grid to_grid(const otfusion::Matrix& m) {
  Grid g(m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i) g[i].assign(m.row(i).begin(), m.row(i).end());
  return g;
}

inline double max_abs_diff(const otfusion::Matrix& a, const Grid& b) {
  double worst = 0;
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j)
      worst = std::max(worst, std::abs(a(i, j) - b[i][j]));
  return worst;
}

inline double max_abs_diff(const otfusion::Matrix& a, const otfusion::Matrix& b) {
  double worst = 0;
  for (std::size_t t = 0; t < a.size(); ++t)
    worst = std::max(worst, std::abs(a.values()[t] - b.values()[t]));
  return worst;
}

// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("otfusion_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace testing

#endif  // OTFUSION_TESTS_SUPPORT_HPP_
