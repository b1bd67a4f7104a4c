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

#include <filesystem>
#include <vector>

#include "cslr/data.hpp"

namespace cslr {

struct DisplacementEntry {
  int index;            // keypoint index
  double displacement;  // D_i, normalized coordinate units after aggregation
  int rank;             // 1-based, descending displacement, ties by index
};

struct DisplacementReport {
  std::vector<DisplacementEntry> per_keypoint;  // in keypoint-index order
  int n_samples_analyzed = 0;
};

// D_i = sum over consecutive frame pairs where keypoint i is valid in both
// of the Euclidean step length; invalid endpoints contribute 0. Raw
// coordinates, no normalization.
Eigen::VectorXd compute_displacement(const KeypointSequence& seq);

// Sums per-sample displacement over the first n_samples records of `split`
// in manifest order, after normalizing each sample's coordinates by its
// global valid bounding box (scale = max(width, height)) so samples are
// scale-comparable. Fewer than n_samples available uses what exists.
DisplacementReport aggregate_displacement(const DatasetManifest& manifest,
                                          const std::string& split,
                                          int n_samples, int threads = 1);

// First k indices by rank; k larger than the keypoint count is clamped.
std::vector<int> top_k(const DisplacementReport& report, int k);

void write_displacement_csv(const DisplacementReport& report,
                            const std::filesystem::path& path);
void write_topk_csv(const DisplacementReport& report, int k,
                    const std::filesystem::path& path);

}  // namespace cslr
