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

#pragma once

#include <Eigen/Dense>

#include <vector>

#include "cslr/errors.hpp"

namespace cslr {

inline constexpr int kDbscanNoise = -1;

struct DbscanParams {
  double eps = 0.25;  // radius in normalized coordinate units
  int min_pts = 4;

  void validate() const {
    if (!(eps > 0.0)) throw ConfigError("dbscan: eps must be > 0");
    if (min_pts < 1) throw ConfigError("dbscan: min_pts must be >= 1");
  }
};

// Density-based clustering on 2-D points. A point is core iff its closed
// eps-ball (self included) holds >= min_pts points; clusters are the
// density-connected components of core points, ids assigned in first-touched
// index order. A non-core point within eps of a core joins the cluster of
// its nearest core (ties to the lowest index), which makes the labeling
// independent of input order up to renaming; everything else is NOISE.
std::vector<int> dbscan(const std::vector<Eigen::Vector2d>& points,
                        const DbscanParams& params);

}  // namespace cslr
