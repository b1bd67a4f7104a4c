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

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "cslr/data.hpp"
#include "cslr/dbscan.hpp"
#include "cslr/errors.hpp"

namespace cslr {

// Keypoints surviving the DBSCAN pass on the reference sample. Applied
// uniformly to every sample so feature dimensionality is constant.
struct MasterMask {
  std::vector<std::uint8_t> keep;  // length K_raw
  int k_kept = 0;
  std::string reference_sample_id;
  DbscanParams params;

  void validate() const;
};

// Frame-level scale and translation normalization. bbox over valid points;
// scaled = (pos - bbox_min) / max(width, height); output = scaled - mean of
// the scaled valid points. Invalid points map to (0, 0); if nothing is valid
// or the scale is zero, everything maps to (0, 0). Idempotent.
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, 2> normalize_frame(
    const Eigen::Matrix<Scalar, Eigen::Dynamic, 2>& positions,
    const std::vector<std::uint8_t>& valid) {
  const Eigen::Index k_count = positions.rows();
  if (static_cast<Eigen::Index>(valid.size()) != k_count)
    throw ValidationError("normalize_frame: validity length mismatch");
  Eigen::Matrix<Scalar, Eigen::Dynamic, 2> out =
      Eigen::Matrix<Scalar, Eigen::Dynamic, 2>::Zero(k_count, 2);

  Scalar min_x = std::numeric_limits<Scalar>::max();
  Scalar min_y = min_x;
  Scalar max_x = std::numeric_limits<Scalar>::lowest();
  Scalar max_y = max_x;
  Eigen::Index n_valid = 0;
  for (Eigen::Index k = 0; k < k_count; ++k) {
    if (!valid[static_cast<std::size_t>(k)]) continue;
    ++n_valid;
    min_x = std::min(min_x, positions(k, 0));
    max_x = std::max(max_x, positions(k, 0));
    min_y = std::min(min_y, positions(k, 1));
    max_y = std::max(max_y, positions(k, 1));
  }
  if (n_valid == 0) return out;
  const Scalar scale = std::max(max_x - min_x, max_y - min_y);
  if (!(scale > Scalar(0))) return out;

  Scalar mean_x = 0, mean_y = 0;
  for (Eigen::Index k = 0; k < k_count; ++k) {
    if (!valid[static_cast<std::size_t>(k)]) continue;
    mean_x += (positions(k, 0) - min_x) / scale;
    mean_y += (positions(k, 1) - min_y) / scale;
  }
  mean_x /= static_cast<Scalar>(n_valid);
  mean_y /= static_cast<Scalar>(n_valid);

  for (Eigen::Index k = 0; k < k_count; ++k) {
    if (!valid[static_cast<std::size_t>(k)]) continue;
    out(k, 0) = (positions(k, 0) - min_x) / scale - mean_x;
    out(k, 1) = (positions(k, 1) - min_y) / scale - mean_y;
  }
  return out;
}

// Central difference with replicate padding: v(t) = (p(t+1) - p(t-1)) / 2,
// p(-1) := p(0) and p(T) := p(T-1).
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic,
              Eigen::RowMajor>
central_difference(const Eigen::MatrixBase<Derived>& p) {
  using Out = Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic,
                            Eigen::Dynamic, Eigen::RowMajor>;
  const Eigen::Index t_count = p.rows();
  if (t_count < 1) throw ValidationError("central_difference: empty input");
  Out v(t_count, p.cols());
  for (Eigen::Index t = 0; t < t_count; ++t) {
    const Eigen::Index next = std::min(t + 1, t_count - 1);
    const Eigen::Index prev = std::max(t - 1, Eigen::Index(0));
    v.row(t) = (p.row(next) - p.row(prev)) / typename Derived::Scalar(2);
  }
  return v;
}

template <typename Derived>
auto compute_velocity(const Eigen::MatrixBase<Derived>& positions) {
  return central_difference(positions);
}

template <typename Derived>
auto compute_acceleration(const Eigen::MatrixBase<Derived>& velocities) {
  return central_difference(velocities);
}

// Length-5 moving average along time with replicate padding at the ends;
// the optional pre-smoother in front of the derivative chain.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic,
              Eigen::RowMajor>
moving_average5(const Eigen::MatrixBase<Derived>& p) {
  using Out = Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic,
                            Eigen::Dynamic, Eigen::RowMajor>;
  const Eigen::Index t_count = p.rows();
  if (t_count < 1) throw ValidationError("moving_average5: empty input");
  using Scalar = typename Derived::Scalar;
  Out out(t_count, p.cols());
  for (Eigen::Index t = 0; t < t_count; ++t) {
    Eigen::Matrix<Scalar, 1, Eigen::Dynamic> acc =
        Eigen::Matrix<Scalar, 1, Eigen::Dynamic>::Zero(p.cols());
    for (Eigen::Index d = -2; d <= 2; ++d) {
      const Eigen::Index s = std::clamp(t + d, Eigen::Index(0), t_count - 1);
      acc += p.row(s);
    }
    out.row(t) = acc / Scalar(5);
  }
  return out;
}

using FeatureMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Mask -> per-frame Eq. 2 normalization -> T x 2k position matrix ->
// [position | velocity | acceleration] concatenated to T x (6 * k_kept).
// When smooth is set, positions pass through the 5-frame moving average
// before differentiation.
FeatureMatrix assemble_features(const KeypointSequence& seq,
                                const MasterMask& mask, bool smooth = false);

// Reference selection: the split sample with the highest fraction of valid
// detections; ties resolved to the lexicographically smallest sample_id.
std::string select_reference_sample(const DatasetManifest& manifest,
                                    const std::string& split);

MasterMask build_master_mask(const KeypointSequence& reference,
                             const DbscanParams& params);

// Mask file: "K_raw k_kept" / space-separated 0-1 flags / provenance line
// "reference <sample_id> eps <eps> min_pts <min_pts>".
void write_mask_file(const MasterMask& mask, const std::filesystem::path& path);
MasterMask read_mask_file(const std::filesystem::path& path);

}  // namespace cslr
