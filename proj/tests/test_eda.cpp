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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>
#include <set>

#include "cslr/data.hpp"
#include "cslr/eda.hpp"
#include "cslr/errors.hpp"
#include "cslr/synth.hpp"
#include "helpers.hpp"

using namespace cslr;
using cslr_test::scratch_dir;

namespace {

KeypointSequence blank_sequence(int t, int k) {
  KeypointSequence seq;
  seq.sample_id = "s";
  seq.frames = FloatMatrix::Zero(t, 3 * k);
  for (int f = 0; f < t; ++f)
    for (int j = 0; j < k; ++j) seq.set(f, j, 0.0f, 0.0f, 1.0f);
  return seq;
}

}  // namespace

TEST_CASE("displacement sums Euclidean step lengths") {
  // Keypoint 0 walks a 3-4-5 triangle leg per step; keypoint 1 is still.
  KeypointSequence seq = blank_sequence(3, 2);
  seq.set(0, 0, 0.0f, 0.0f, 1.0f);
  seq.set(1, 0, 3.0f, 4.0f, 1.0f);  // step length 5
  seq.set(2, 0, 3.0f, 1.0f, 1.0f);  // step length 3
  const Eigen::VectorXd d = compute_displacement(seq);
  CHECK(d(0) == doctest::Approx(8.0).epsilon(1e-12));
  CHECK(d(1) == doctest::Approx(0.0));
}

TEST_CASE("displacement skips steps with an invalid endpoint") {
  KeypointSequence seq = blank_sequence(4, 1);
  seq.set(0, 0, 0.0f, 0.0f, 1.0f);
  seq.set(1, 0, 1.0f, 0.0f, 0.0f);  // invalid: kills steps 0->1 and 1->2
  seq.set(2, 0, 2.0f, 0.0f, 1.0f);
  seq.set(3, 0, 6.0f, 0.0f, 1.0f);  // only valid pair, length 4
  const Eigen::VectorXd d = compute_displacement(seq);
  CHECK(d(0) == doctest::Approx(4.0).epsilon(1e-12));
}

TEST_CASE("displacement requires at least two frames") {
  CHECK_THROWS_AS(compute_displacement(blank_sequence(1, 2)), ValidationError);
}

TEST_CASE("displacement is translation invariant") {
  Rng rng(7);
  KeypointSequence seq = blank_sequence(10, 3);
  for (int t = 0; t < 10; ++t)
    for (int k = 0; k < 3; ++k)
      seq.set(t, k, static_cast<float>(rng.uniform(0.0, 1.0)),
              static_cast<float>(rng.uniform(0.0, 1.0)), 1.0f);
  KeypointSequence moved = seq;
  for (int t = 0; t < 10; ++t)
    for (int k = 0; k < 3; ++k)
      moved.set(t, k, seq.x(t, k) + 5.0f, seq.y(t, k) - 2.0f, 1.0f);
  const Eigen::VectorXd a = compute_displacement(seq);
  const Eigen::VectorXd b = compute_displacement(moved);
  CHECK((a - b).cwiseAbs().maxCoeff() < 1e-4);  // float storage noise
}

TEST_CASE("displacement scales linearly with coordinates") {
  KeypointSequence seq = blank_sequence(5, 1);
  for (int t = 0; t < 5; ++t)
    seq.set(t, 0, 0.1f * static_cast<float>(t * t), 0.0f, 1.0f);
  KeypointSequence scaled = seq;
  for (int t = 0; t < 5; ++t)
    scaled.set(t, 0, 3.0f * seq.x(t, 0), 3.0f * seq.y(t, 0), 1.0f);
  CHECK(compute_displacement(scaled)(0) ==
        doctest::Approx(3.0 * compute_displacement(seq)(0)).epsilon(1e-5));
}

TEST_CASE("aggregation normalizes per sample and ranks deterministically") {
  const auto dir = scratch_dir("eda_agg");
  std::filesystem::create_directories(dir / "keypoints");

  // Two samples, identical motion, the second uniformly scaled 10x. After
  // per-sample bbox normalization they contribute equally.
  auto make = [&](const std::string& id, float scale) {
    KeypointSequence seq = blank_sequence(4, 3);
    for (int t = 0; t < 4; ++t) {
      // Keypoint 0 sweeps, keypoint 1 wiggles, keypoint 2 rests; keypoints 1
      // and 2 pin the bbox so normalization is by x-extent.
      seq.set(t, 0, scale * 0.25f * static_cast<float>(t), scale * 0.0f, 1.0f);
      seq.set(t, 1, scale * (t % 2 ? 0.80f : 0.75f), scale * 0.1f, 1.0f);
      seq.set(t, 2, scale * 1.0f, scale * 1.0f, 1.0f);
    }
    write_keypoint_file(seq, dir / "keypoints" / (id + ".kpsq"));
    return ManifestRecord{id, "train", "S0", "keypoints/" + id + ".kpsq", {"G"}};
  };
  DatasetManifest m;
  m.base_dir = dir;
  m.records.push_back(make("a", 1.0f));
  m.records.push_back(make("b", 10.0f));
  m.write(dir / "manifest.tsv");

  const DisplacementReport rep = aggregate_displacement(m, "train", 10);
  CHECK(rep.n_samples_analyzed == 2);
  REQUIRE(rep.per_keypoint.size() == 3);
  // Both samples: keypoint 0 moves 0.75 raw over bbox 1.0 -> 0.75 each.
  CHECK(rep.per_keypoint[0].displacement == doctest::Approx(1.5).epsilon(1e-5));
  CHECK(rep.per_keypoint[1].displacement ==
        doctest::Approx(2.0 * 3 * 0.05).epsilon(1e-4));
  CHECK(rep.per_keypoint[2].displacement == doctest::Approx(0.0));
  CHECK(rep.per_keypoint[0].rank == 1);
  CHECK(rep.per_keypoint[1].rank == 2);
  CHECK(rep.per_keypoint[2].rank == 3);
  CHECK(top_k(rep, 2) == std::vector<int>{0, 1});
  // k beyond the keypoint count clamps.
  CHECK(top_k(rep, 50).size() == 3);
  CHECK_THROWS_AS(top_k(rep, 0), ValidationError);

  // n_samples = 1 uses only the first record.
  const DisplacementReport one = aggregate_displacement(m, "train", 1);
  CHECK(one.n_samples_analyzed == 1);
  CHECK(one.per_keypoint[0].displacement ==
        doctest::Approx(0.75).epsilon(1e-5));

  // Threaded aggregation matches single-threaded bit-for-bit.
  const DisplacementReport threaded = aggregate_displacement(m, "train", 10, 3);
  for (int k = 0; k < 3; ++k)
    CHECK(threaded.per_keypoint[static_cast<std::size_t>(k)].displacement ==
          rep.per_keypoint[static_cast<std::size_t>(k)].displacement);
}

TEST_CASE("rank ties break toward the lower keypoint index") {
  const auto dir = scratch_dir("eda_ties");
  std::filesystem::create_directories(dir / "keypoints");
  KeypointSequence seq = blank_sequence(2, 3);
  // Keypoints 1 and 2 move identically; keypoint 0 is still. Keypoint 0 and
  // a fixed far corner define the bbox.
  seq.set(0, 0, 0.0f, 0.0f, 1.0f);
  seq.set(1, 0, 0.0f, 0.0f, 1.0f);
  seq.set(0, 1, 0.2f, 0.0f, 1.0f);
  seq.set(1, 1, 0.2f, 0.5f, 1.0f);
  seq.set(0, 2, 0.4f, 0.0f, 1.0f);
  seq.set(1, 2, 0.4f, 0.5f, 1.0f);
  write_keypoint_file(seq, dir / "keypoints" / "t.kpsq");
  DatasetManifest m;
  m.base_dir = dir;
  m.records.push_back({"t", "train", "S0", "keypoints/t.kpsq", {"G"}});
  m.write(dir / "manifest.tsv");

  const DisplacementReport rep = aggregate_displacement(m, "train", 1);
  CHECK(rep.per_keypoint[1].displacement ==
        doctest::Approx(rep.per_keypoint[2].displacement));
  CHECK(rep.per_keypoint[1].rank == 1);
  CHECK(rep.per_keypoint[2].rank == 2);
  CHECK(rep.per_keypoint[0].rank == 3);
}

TEST_CASE("hand keypoints out-rank body keypoints on clean synthetic data") {
  const auto dir = scratch_dir("eda_hands");
  SynthConfig cfg;
  cfg.n_noisy = 0;  // clean scene: hands are the only macroscopic motion
  cfg.n_samples = 16;
  cfg.seed = 31;
  const DatasetManifest m = generate_synthetic_dataset(cfg, dir);
  const SynthGroundTruth gt = synth_ground_truth(cfg);

  const DisplacementReport rep =
      aggregate_displacement(m, "train", cfg.n_samples);
  std::set<int> top;
  for (const auto& e : rep.per_keypoint)
    if (e.rank <= static_cast<int>(gt.hand_indices.size())) top.insert(e.index);
  CHECK(top == std::set<int>(gt.hand_indices.begin(), gt.hand_indices.end()));
}

TEST_CASE("csv reports are stable and complete") {
  const auto dir = scratch_dir("eda_csv");
  DisplacementReport rep;
  rep.n_samples_analyzed = 1;
  rep.per_keypoint = {{0, 0.5, 2}, {1, 2.25, 1}, {2, 0.125, 3}};
  write_displacement_csv(rep, dir / "d.csv");
  write_topk_csv(rep, 2, dir / "k.csv");

  std::ifstream d(dir / "d.csv");
  std::string line;
  std::getline(d, line);
  CHECK(line == "keypoint_index,displacement,rank");
  std::getline(d, line);
  CHECK(line == "0,0.5,2");
  std::getline(d, line);
  CHECK(line == "1,2.25,1");

  std::ifstream k(dir / "k.csv");
  std::getline(k, line);
  CHECK(line == "rank,keypoint_index,displacement");
  std::getline(k, line);
  CHECK(line == "1,1,2.25");
  std::getline(k, line);
  CHECK(line == "2,0,0.5");
  CHECK_FALSE(std::getline(k, line));
}
