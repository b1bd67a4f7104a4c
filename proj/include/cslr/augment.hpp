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

#include <cmath>
#include <vector>

#include "cslr/errors.hpp"
#include "cslr/rng.hpp"

namespace cslr {

// SpecAugment-style masking. Each of n_time_masks draws fires with
// probability p_time and zeroes a contiguous band of frames of width uniform
// in [1, max_time_width]; feature masks do the same along channels.
struct AugmentConfig {
  double p_time = 0.08;
  double p_feat = 0.2;
  int n_time_masks = 2;
  int n_feat_masks = 2;
  int max_time_width = 0;   // 0 resolves to ceil(0.05 * T) per sequence
  int max_feat_width = 32;

  void validate() const {
    if (p_time < 0.0 || p_time > 1.0 || p_feat < 0.0 || p_feat > 1.0)
      throw ConfigError("augment: probabilities must be in [0, 1]");
    if (n_time_masks < 0 || n_feat_masks < 0)
      throw ConfigError("augment: mask counts must be >= 0");
    if (max_time_width < 0 || max_feat_width < 1)
      throw ConfigError("augment: mask widths must be >= 1 (time width 0 = auto)");
  }
};

struct MaskBand {
  bool time;  // else feature axis
  Eigen::Index start, width;
};

// Draws the bands for a T x F input. Time draws come first, then feature
// draws; the rng advances only for draws that fire, which keeps a fixed
// seed reproducible.
inline std::vector<MaskBand> draw_mask_bands(Eigen::Index rows,
                                             Eigen::Index cols,
                                             const AugmentConfig& cfg,
                                             Rng& rng) {
  cfg.validate();
  if (rows < 1 || cols < 1)
    throw ValidationError("spec_augment: empty input");
  std::vector<MaskBand> bands;
  const Eigen::Index max_t = std::min<Eigen::Index>(
      rows, cfg.max_time_width > 0
                ? cfg.max_time_width
                : static_cast<Eigen::Index>(
                      std::ceil(0.05 * static_cast<double>(rows))));
  for (int m = 0; m < cfg.n_time_masks; ++m) {
    if (!rng.bernoulli(cfg.p_time)) continue;
    const Eigen::Index width =
        static_cast<Eigen::Index>(rng.uniform_int(1, max_t));
    const Eigen::Index start =
        static_cast<Eigen::Index>(rng.uniform_int(0, rows - width));
    bands.push_back({true, start, width});
  }
  const Eigen::Index max_f =
      std::min<Eigen::Index>(cols, cfg.max_feat_width);
  for (int m = 0; m < cfg.n_feat_masks; ++m) {
    if (!rng.bernoulli(cfg.p_feat)) continue;
    const Eigen::Index width =
        static_cast<Eigen::Index>(rng.uniform_int(1, max_f));
    const Eigen::Index start =
        static_cast<Eigen::Index>(rng.uniform_int(0, cols - width));
    bands.push_back({false, start, width});
  }
  return bands;
}

// Multiplicative 0/1 mask with the drawn bands zeroed; applying it to a
// tensor via an elementwise product keeps the op autograd-friendly.
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>
spec_augment_mask(Eigen::Index rows, Eigen::Index cols,
                  const AugmentConfig& cfg, Rng& rng) {
  using Out =
      Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  Out mask = Out::Ones(rows, cols);
  for (const MaskBand& b : draw_mask_bands(rows, cols, cfg, rng)) {
    if (b.time)
      mask.middleRows(b.start, b.width).setZero();
    else
      mask.middleCols(b.start, b.width).setZero();
  }
  return mask;
}

// Training-time augmentation of a feature matrix; eval mode is the identity.
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>
spec_augment(
    const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic,
                        Eigen::RowMajor>& x,
    const AugmentConfig& cfg, bool training, Rng& rng) {
  if (!training) {
    cfg.validate();
    return x;
  }
  return x.cwiseProduct(spec_augment_mask<Scalar>(x.rows(), x.cols(), cfg, rng));
}

}  // namespace cslr
