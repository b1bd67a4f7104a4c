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

#include "cslr/eda.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "cslr/parallel.hpp"

namespace cslr {

Eigen::VectorXd compute_displacement(const KeypointSequence& seq) {
  if (seq.num_frames() < 2)
    throw ValidationError("compute_displacement: sample '" + seq.sample_id +
                          "' has fewer than 2 frames");
  const Eigen::Index k_count = seq.num_keypoints();
  Eigen::VectorXd d = Eigen::VectorXd::Zero(k_count);
  for (Eigen::Index t = 0; t + 1 < seq.num_frames(); ++t)
    for (Eigen::Index k = 0; k < k_count; ++k) {
      if (!seq.valid(t, k) || !seq.valid(t + 1, k)) continue;
      const double dx = static_cast<double>(seq.x(t + 1, k)) - seq.x(t, k);
      const double dy = static_cast<double>(seq.y(t + 1, k)) - seq.y(t, k);
      d[k] += std::sqrt(dx * dx + dy * dy);
    }
  return d;
}

namespace {

// Displacement of one sample with coordinates normalized by the sample's
// global valid bounding box; a degenerate box contributes zero.
Eigen::VectorXd normalized_displacement(const KeypointSequence& seq) {
  double min_x = std::numeric_limits<double>::infinity();
  double min_y = min_x;
  double max_x = -min_x, max_y = -min_x;
  bool any = false;
  for (Eigen::Index t = 0; t < seq.num_frames(); ++t)
    for (Eigen::Index k = 0; k < seq.num_keypoints(); ++k) {
      if (!seq.valid(t, k)) continue;
      any = true;
      min_x = std::min(min_x, static_cast<double>(seq.x(t, k)));
      max_x = std::max(max_x, static_cast<double>(seq.x(t, k)));
      min_y = std::min(min_y, static_cast<double>(seq.y(t, k)));
      max_y = std::max(max_y, static_cast<double>(seq.y(t, k)));
    }
  const double scale = any ? std::max(max_x - min_x, max_y - min_y) : 0.0;
  if (scale <= 0.0) return Eigen::VectorXd::Zero(seq.num_keypoints());
  return compute_displacement(seq) / scale;
}

void assign_ranks(DisplacementReport* report) {
  std::vector<int> order(report->per_keypoint.size());
  for (std::size_t i = 0; i < order.size(); ++i)
    order[i] = static_cast<int>(i);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    const double da = report->per_keypoint[a].displacement;
    const double db = report->per_keypoint[b].displacement;
    if (da != db) return da > db;
    return a < b;
  });
  for (std::size_t r = 0; r < order.size(); ++r)
    report->per_keypoint[static_cast<std::size_t>(order[r])].rank =
        static_cast<int>(r) + 1;
}

}  // namespace

DisplacementReport aggregate_displacement(const DatasetManifest& manifest,
                                          const std::string& split,
                                          int n_samples, int threads) {
  if (n_samples < 1)
    throw ValidationError("aggregate_displacement: n_samples must be >= 1");
  const auto records = manifest.split_records(split);
  if (records.empty())
    throw ValidationError("aggregate_displacement: split '" + split +
                          "' is empty");
  const std::size_t use =
      std::min(records.size(), static_cast<std::size_t>(n_samples));

  std::vector<Eigen::VectorXd> per_sample(use);
  parallel_for(use, threads, [&](std::size_t i) {
    per_sample[i] =
        normalized_displacement(read_keypoint_file(manifest.resolve(*records[i])));
  });

  Eigen::VectorXd total;
  for (std::size_t i = 0; i < use; ++i) {  // fixed order regardless of threads
    if (i == 0)
      total = per_sample[i];
    else if (per_sample[i].size() != total.size())
      throw ValidationError(
          "aggregate_displacement: keypoint count differs across samples");
    else
      total += per_sample[i];
  }

  DisplacementReport report;
  report.n_samples_analyzed = static_cast<int>(use);
  report.per_keypoint.resize(static_cast<std::size_t>(total.size()));
  for (Eigen::Index k = 0; k < total.size(); ++k) {
    report.per_keypoint[static_cast<std::size_t>(k)].index =
        static_cast<int>(k);
    report.per_keypoint[static_cast<std::size_t>(k)].displacement = total[k];
  }
  assign_ranks(&report);
  return report;
}

std::vector<int> top_k(const DisplacementReport& report, int k) {
  const int k_count = static_cast<int>(report.per_keypoint.size());
  if (k < 1)
    throw ValidationError("top_k: k must be >= 1, got " + std::to_string(k));
  std::vector<int> by_rank(static_cast<std::size_t>(k_count));
  for (const auto& e : report.per_keypoint)
    by_rank[static_cast<std::size_t>(e.rank) - 1] = e.index;
  by_rank.resize(static_cast<std::size_t>(std::min(k, k_count)));
  return by_rank;
}

void write_displacement_csv(const DisplacementReport& report,
                            const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw Error("cannot write " + path.string());
  os << "keypoint_index,displacement,rank\n";
  char buf[64];
  for (const auto& e : report.per_keypoint) {
    std::snprintf(buf, sizeof(buf), "%.17g", e.displacement);
    os << e.index << ',' << buf << ',' << e.rank << '\n';
  }
  if (!os) throw Error("write failed: " + path.string());
}

void write_topk_csv(const DisplacementReport& report, int k,
                    const std::filesystem::path& path) {
  const std::vector<int> top = top_k(report, k);
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw Error("cannot write " + path.string());
  os << "rank,keypoint_index,displacement\n";
  char buf[64];
  for (std::size_t r = 0; r < top.size(); ++r) {
    const auto& e = report.per_keypoint[static_cast<std::size_t>(top[r])];
    std::snprintf(buf, sizeof(buf), "%.17g", e.displacement);
    os << r + 1 << ',' << e.index << ',' << buf << '\n';
  }
  if (!os) throw Error("write failed: " + path.string());
}

}  // namespace cslr
