/* Copyright 2026 The CSLR Toolkit Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include "cslr/dbscan.hpp"

#include <deque>
#include <limits>

namespace cslr {

std::vector<int> dbscan(const std::vector<Eigen::Vector2d>& points,
                        const DbscanParams& params) {
  params.validate();
  const std::size_t n = points.size();
  if (n == 0) return {};

  const double eps2 = params.eps * params.eps;
  std::vector<std::vector<std::size_t>> neighbors(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if ((points[i] - points[j]).squaredNorm() <= eps2)
        neighbors[i].push_back(j);

  std::vector<bool> core(n);
  for (std::size_t i = 0; i < n; ++i)
    core[i] = neighbors[i].size() >= static_cast<std::size_t>(params.min_pts);

  std::vector<int> labels(n, kDbscanNoise);
  int next_cluster = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!core[i] || labels[i] != kDbscanNoise) continue;
    const int cluster = next_cluster++;
    std::deque<std::size_t> frontier{i};
    labels[i] = cluster;
    while (!frontier.empty()) {
      const std::size_t p = frontier.front();
      frontier.pop_front();
      for (std::size_t q : neighbors[p]) {
        if (!core[q] || labels[q] != kDbscanNoise) continue;
        labels[q] = cluster;
        frontier.push_back(q);
      }
    }
  }

  // Border points: nearest core within eps, ties to the lowest core index.
  for (std::size_t i = 0; i < n; ++i) {
    if (core[i]) continue;
    double best = std::numeric_limits<double>::infinity();
    int best_label = kDbscanNoise;
    for (std::size_t q : neighbors[i]) {
      if (!core[q]) continue;
      const double d2 = (points[i] - points[q]).squaredNorm();
      if (d2 < best) {
        best = d2;
        best_label = labels[q];
      }
    }
    labels[i] = best_label;
  }
  return labels;
}

}  // namespace cslr
