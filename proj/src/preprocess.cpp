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

#include "cslr/preprocess.hpp"

#include <fstream>
#include <map>
#include <sstream>

namespace cslr {

void MasterMask::validate() const {
  if (keep.empty()) throw ValidationError("mask: empty keep vector");
  int count = 0;
  for (std::uint8_t f : keep) {
    if (f != 0 && f != 1) throw ValidationError("mask: flags must be 0 or 1");
    count += f;
  }
  if (count != k_kept)
    throw ValidationError("mask: k_kept=" + std::to_string(k_kept) +
                          " disagrees with " + std::to_string(count) +
                          " set flags");
  if (k_kept < 1) throw ValidationError("mask: keeps no keypoints");
}

FeatureMatrix assemble_features(const KeypointSequence& seq,
                                const MasterMask& mask, bool smooth) {
  mask.validate();
  if (static_cast<Eigen::Index>(mask.keep.size()) != seq.num_keypoints())
    throw ValidationError(
        "assemble_features: mask covers " + std::to_string(mask.keep.size()) +
        " keypoints but sample '" + seq.sample_id + "' has " +
        std::to_string(seq.num_keypoints()));

  const Eigen::Index t_count = seq.num_frames();
  const int kept = mask.k_kept;
  FeatureMatrix pos(t_count, 2 * kept);
  Eigen::Matrix<double, Eigen::Dynamic, 2> frame(kept, 2);
  std::vector<std::uint8_t> valid(static_cast<std::size_t>(kept));
  for (Eigen::Index t = 0; t < t_count; ++t) {
    Eigen::Index row = 0;
    for (Eigen::Index k = 0; k < seq.num_keypoints(); ++k) {
      if (!mask.keep[static_cast<std::size_t>(k)]) continue;
      frame(row, 0) = seq.x(t, k);
      frame(row, 1) = seq.y(t, k);
      valid[static_cast<std::size_t>(row)] = seq.valid(t, k) ? 1 : 0;
      ++row;
    }
    const auto norm = normalize_frame<double>(frame, valid);
    for (Eigen::Index k = 0; k < kept; ++k) {
      pos(t, 2 * k) = norm(k, 0);
      pos(t, 2 * k + 1) = norm(k, 1);
    }
  }

  if (smooth) pos = moving_average5(pos);
  const FeatureMatrix vel = compute_velocity(pos);
  const FeatureMatrix acc = compute_acceleration(vel);

  FeatureMatrix features(t_count, 6 * kept);
  features << pos, vel, acc;
  return features;
}

std::string select_reference_sample(const DatasetManifest& manifest,
                                    const std::string& split) {
  const auto records = manifest.split_records(split);
  if (records.empty())
    throw ValidationError("select_reference_sample: split '" + split +
                          "' is empty");
  std::string best_id;
  double best_fraction = -1.0;
  for (const auto* rec : records) {
    const KeypointSequence seq = read_keypoint_file(manifest.resolve(*rec));
    Eigen::Index n_valid = 0;
    for (Eigen::Index t = 0; t < seq.num_frames(); ++t)
      for (Eigen::Index k = 0; k < seq.num_keypoints(); ++k)
        if (seq.valid(t, k)) ++n_valid;
    const double fraction =
        static_cast<double>(n_valid) /
        static_cast<double>(seq.num_frames() * seq.num_keypoints());
    if (fraction > best_fraction ||
        (fraction == best_fraction && rec->sample_id < best_id)) {
      best_fraction = fraction;
      best_id = rec->sample_id;
    }
  }
  return best_id;
}

MasterMask build_master_mask(const KeypointSequence& reference,
                             const DbscanParams& params) {
  params.validate();
  if (reference.num_frames() < 2)
    throw ValidationError("build_master_mask: reference needs T >= 2");

  const Eigen::Index k_count = reference.num_keypoints();
  Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(k_count, 2);
  Eigen::VectorXd n_valid = Eigen::VectorXd::Zero(k_count);
  Eigen::Matrix<double, Eigen::Dynamic, 2> frame(k_count, 2);
  std::vector<std::uint8_t> valid(static_cast<std::size_t>(k_count));
  for (Eigen::Index t = 0; t < reference.num_frames(); ++t) {
    for (Eigen::Index k = 0; k < k_count; ++k) {
      frame(k, 0) = reference.x(t, k);
      frame(k, 1) = reference.y(t, k);
      valid[static_cast<std::size_t>(k)] = reference.valid(t, k) ? 1 : 0;
    }
    const auto norm = normalize_frame<double>(frame, valid);
    for (Eigen::Index k = 0; k < k_count; ++k) {
      if (!valid[static_cast<std::size_t>(k)]) continue;
      sum.row(k) += norm.row(k);
      n_valid[k] += 1.0;
    }
  }

  // Never-valid keypoints have no position to cluster; they are dropped.
  std::vector<Eigen::Vector2d> means;
  std::vector<Eigen::Index> owner;
  for (Eigen::Index k = 0; k < k_count; ++k) {
    if (n_valid[k] == 0.0) continue;
    means.emplace_back(sum(k, 0) / n_valid[k], sum(k, 1) / n_valid[k]);
    owner.push_back(k);
  }
  if (means.empty())
    throw ValidationError(
        "build_master_mask: reference has no valid keypoints");

  const std::vector<int> labels = dbscan(means, params);
  std::map<int, int> cluster_size;
  for (int label : labels)
    if (label != kDbscanNoise) ++cluster_size[label];
  if (cluster_size.empty())
    throw ValidationError(
        "build_master_mask: every keypoint is DBSCAN noise; eps/min_pts "
        "unusable for this reference");

  // Largest cluster; ties resolve to the one containing the lowest index,
  // which is the lowest cluster id because ids are assigned in index order.
  int best_label = -1, best_size = -1;
  for (const auto& [label, size] : cluster_size)
    if (size > best_size) {
      best_size = size;
      best_label = label;
    }

  MasterMask mask;
  mask.keep.assign(static_cast<std::size_t>(k_count), 0);
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] == best_label)
      mask.keep[static_cast<std::size_t>(owner[i])] = 1;
  mask.k_kept = best_size;
  mask.reference_sample_id = reference.sample_id;
  mask.params = params;
  mask.validate();
  return mask;
}

void write_mask_file(const MasterMask& mask,
                     const std::filesystem::path& path) {
  mask.validate();
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw Error("cannot write mask: " + path.string());
  os << mask.keep.size() << ' ' << mask.k_kept << '\n';
  for (std::size_t k = 0; k < mask.keep.size(); ++k) {
    if (k) os << ' ';
    os << static_cast<int>(mask.keep[k]);
  }
  os << '\n';
  char buf[160];
  std::snprintf(buf, sizeof(buf), "reference %s eps %.17g min_pts %d",
                mask.reference_sample_id.c_str(), mask.params.eps,
                mask.params.min_pts);
  os << buf << '\n';
  if (!os) throw Error("mask write failed: " + path.string());
}

MasterMask read_mask_file(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw Error("cannot open mask: " + path.string());
  std::string line;
  if (!std::getline(is, line))
    throw ParseError("mask " + path.string() + ": missing header line");
  std::istringstream header(line);
  std::size_t k_raw = 0;
  int k_kept = 0;
  if (!(header >> k_raw >> k_kept) || k_raw == 0)
    throw ParseError("mask " + path.string() + ": bad header '" + line + "'");

  if (!std::getline(is, line))
    throw ParseError("mask " + path.string() + ": missing flag line");
  std::istringstream flags(line);
  MasterMask mask;
  mask.k_kept = k_kept;
  int flag;
  while (flags >> flag) {
    if (flag != 0 && flag != 1)
      throw ParseError("mask " + path.string() + ": flag must be 0 or 1");
    mask.keep.push_back(static_cast<std::uint8_t>(flag));
  }
  if (mask.keep.size() != k_raw)
    throw ParseError("mask " + path.string() + ": header claims " +
                     std::to_string(k_raw) + " flags, found " +
                     std::to_string(mask.keep.size()));

  if (!std::getline(is, line))
    throw ParseError("mask " + path.string() + ": missing provenance line");
  std::istringstream prov(line);
  std::string key;
  while (prov >> key) {
    if (key == "reference")
      prov >> mask.reference_sample_id;
    else if (key == "eps")
      prov >> mask.params.eps;
    else if (key == "min_pts")
      prov >> mask.params.min_pts;
    else
      throw ParseError("mask " + path.string() +
                       ": unknown provenance key '" + key + "'");
  }
  mask.validate();
  return mask;
}

}  // namespace cslr
