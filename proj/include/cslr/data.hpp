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

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "cslr/errors.hpp"

namespace cslr {

using FloatMatrix =
    Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// One sample: T frames of K keypoints, each (x, y, confidence), stored as a
// T x 3K row-major matrix, plus the gloss transcription. A keypoint with
// confidence == 0 is invalid and its coordinates are ignored downstream.
struct KeypointSequence {
  std::string sample_id;
  std::string signer_id;
  FloatMatrix frames;  // T x (3*K)
  std::vector<std::string> glosses;

  Eigen::Index num_frames() const { return frames.rows(); }
  Eigen::Index num_keypoints() const { return frames.cols() / 3; }

  float x(Eigen::Index t, Eigen::Index k) const { return frames(t, 3 * k); }
  float y(Eigen::Index t, Eigen::Index k) const { return frames(t, 3 * k + 1); }
  float confidence(Eigen::Index t, Eigen::Index k) const {
    return frames(t, 3 * k + 2);
  }
  bool valid(Eigen::Index t, Eigen::Index k) const {
    return confidence(t, k) > 0.0f;
  }

  void set(Eigen::Index t, Eigen::Index k, float px, float py, float conf) {
    frames(t, 3 * k) = px;
    frames(t, 3 * k + 1) = py;
    frames(t, 3 * k + 2) = conf;
  }

  // Checks T >= 1, K >= 1 and confidence in [0, 1].
  void validate() const;
};

// Binary keypoint container: magic "KPSQ", u32 version, u32 T, u32 K,
// u32 C, then T*K*C little-endian f32, frame-major then keypoint then
// channel. version 1 carries keypoint data (C == 3); version 2 carries a
// preprocessed feature matrix (K == 1, C == feature dimension).
inline constexpr std::uint32_t kContainerVersionKeypoints = 1;
inline constexpr std::uint32_t kContainerVersionFeatures = 2;

void write_keypoint_file(const KeypointSequence& seq,
                         const std::filesystem::path& path);
KeypointSequence read_keypoint_file(const std::filesystem::path& path);

void write_feature_file(const FloatMatrix& features,
                        const std::filesystem::path& path);
FloatMatrix read_feature_file(const std::filesystem::path& path);

// Tab-separated manifest: sample_id, split, signer_id, path, gloss tokens
// (space separated). '#' lines are comments. Paths are relative to the
// manifest's directory.
struct ManifestRecord {
  std::string sample_id;
  std::string split;  // train | dev | test
  std::string signer_id;
  std::string path;
  std::vector<std::string> glosses;
};

struct DatasetManifest {
  std::vector<ManifestRecord> records;
  std::filesystem::path base_dir;

  static DatasetManifest read(const std::filesystem::path& path);
  void write(const std::filesystem::path& path) const;

  std::vector<const ManifestRecord*> split_records(
      const std::string& split) const;
  std::set<std::string> signers(const std::string& split) const;
  std::filesystem::path resolve(const ManifestRecord& rec) const {
    return base_dir / rec.path;
  }

  // Unique ids, known split names, referenced files present.
  void validate(bool check_files = true) const;
};

// Gloss token <-> id mapping. Ids run 1..V; id 0 is the CTC blank and is
// never a vocabulary token.
class GlossVocabulary {
 public:
  static constexpr int kBlankId = 0;

  GlossVocabulary() = default;
  explicit GlossVocabulary(std::vector<std::string> tokens);

  // Sorted-unique tokens drawn from the gloss strings of the given splits.
  static GlossVocabulary build(const DatasetManifest& manifest,
                               const std::vector<std::string>& splits);

  static GlossVocabulary read(const std::filesystem::path& path);
  void write(const std::filesystem::path& path) const;

  int size() const { return static_cast<int>(tokens_.size()); }
  bool contains(const std::string& token) const {
    return index_.count(token) > 0;
  }
  // Returns the 1-based id; throws ValidationError for unknown tokens.
  int id(const std::string& token) const;
  const std::string& token(int id) const;
  const std::vector<std::string>& tokens() const { return tokens_; }

  std::vector<int> to_ids(const std::vector<std::string>& glosses) const;
  std::vector<std::string> to_tokens(const std::vector<int>& ids) const;

  // Content hash over the ordered token list.
  std::uint64_t hash() const;

 private:
  std::vector<std::string> tokens_;
  std::map<std::string, int> index_;
};

}  // namespace cslr
