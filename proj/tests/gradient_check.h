// Copyright 2026 The Tasteseq Authors.
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

#ifndef TASTESEQ_TESTS_GRADIENT_CHECK_H_
#define TASTESEQ_TESTS_GRADIENT_CHECK_H_

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>

namespace tasteseq::testing {

// Central differences (f(p + h e_i) - f(p - h e_i)) / 2h for every i.
inline Eigen::VectorXd CentralDifference(
    const std::function<double(const Eigen::VectorXd&)>& f,
    const Eigen::VectorXd& at, double step) {
  Eigen::VectorXd grad(at.size());
  Eigen::VectorXd p = at;
  for (Eigen::Index i = 0; i < at.size(); ++i) {
    p(i) = at(i) + step;
    const double up = f(p);
    p(i) = at(i) - step;
    const double down = f(p);
    p(i) = at(i);
    grad(i) = (up - down) / (2 * step);
  }
  f(at);
  return grad;
}

// max_i |a_i - n_i| / max(|a_i|, |n_i|, floor).
inline double MaxRelativeError(const Eigen::VectorXd& analytic,
                               const Eigen::VectorXd& numeric,
                               double floor = 1e-7) {
  double worst = 0;
  for (Eigen::Index i = 0; i < analytic.size(); ++i) {
    const double scale =
        std::max({std::abs(analytic(i)), std::abs(numeric(i)), floor});
    worst = std::max(worst, std::abs(analytic(i) - numeric(i)) / scale);
  }
  return worst;
}

}  // namespace tasteseq::testing

#endif  // TASTESEQ_TESTS_GRADIENT_CHECK_H_
