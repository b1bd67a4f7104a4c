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

#include <cstdint>
#include <filesystem>
#include <vector>

#include "cslr/data.hpp"

namespace cslr {

// Synthetic keypoint-language generator. Each gloss token owns a smooth
// prototype trajectory of the "hand" keypoints; samples concatenate per-gloss
// segments with linear co-articulation blends, then apply a signer-specific
// affine distortion and Gaussian jitter. The last n_noisy keypoints are
// planted far from the body with heavy-tailed jitter so the DBSCAN master
// mask has something real to remove. Splits are signer-disjoint.
struct SynthConfig {
  int vocab_size = 12;       // V, >= 2
  int n_signers = 4;
  int n_samples = 40;
  int n_keypoints = 16;      // K, >= 6
  int n_hands = 6;           // active prototype keypoints, indices [0, n_hands)
  int n_noisy = 3;           // planted outliers, indices [K - n_noisy, K)
  int gloss_len_min = 2;
  int gloss_len_max = 4;
  int frames_per_gloss_min = 10;  // >= 8 keeps every target CTC-feasible
  int frames_per_gloss_max = 14;
  double noise_sigma = 0.01;
  double invalid_prob = 0.0;      // per keypoint-frame dropout to confidence 0
  int blend_frames = 2;           // half-width of the co-articulation window
  int train_signers = 2;
  int dev_signers = 1;
  int test_signers = 1;
  std::uint64_t seed = 1;

  void validate() const;
};

// Generator ground truth used by tests: which keypoints are the active hands,
// which are the planted noisy ones, and each gloss's fixed segment length.
struct SynthGroundTruth {
  std::vector<int> hand_indices;
  std::vector<int> noisy_indices;
  std::vector<int> gloss_frames;  // indexed by gloss id - 1
};

SynthGroundTruth synth_ground_truth(const SynthConfig& cfg);

// Writes keypoints/<sample_id>.kpsq files plus manifest.tsv under out_dir and
// returns the manifest.
DatasetManifest generate_synthetic_dataset(const SynthConfig& cfg,
                                           const std::filesystem::path& out_dir);

}  // namespace cslr
