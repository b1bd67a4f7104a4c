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

#include "cslr/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "cslr/rng.hpp"

namespace cslr {
namespace {

// Seed-derivation tags for the generator's independent substreams.
constexpr std::uint64_t kTagSynth = 0x53594e54;   // "SYNT"
constexpr std::uint64_t kTagProto = 1;
constexpr std::uint64_t kTagSigner = 2;
constexpr std::uint64_t kTagSample = 3;

struct Point {
  double x, y;
};

// Per-(gloss, hand) smooth trajectory parameters.
struct HandMotion {
  double freq_x, freq_y, phase_x, phase_y;
};

struct Prototypes {
  std::vector<int> frames;                       // per gloss
  std::vector<std::vector<HandMotion>> motion;   // [gloss][hand]
};

std::string gloss_token(int id) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "G%04d", id);
  return buf;
}

// Rest pose: hands and body share a compact cluster around (0.5, 0.5);
// noisy keypoints sit far outside it so their mean position stays an
// outlier under any bounded jitter.
Point base_position(const SynthConfig& cfg, int k) {
  const int first_noisy = cfg.n_keypoints - cfg.n_noisy;
  if (k >= first_noisy) {
    const int m = k - first_noisy;
    return {4.0 + 1.5 * m, -3.0 - 1.2 * m};
  }
  if (k < cfg.n_hands) {
    const double u = cfg.n_hands == 1
                         ? 0.5
                         : static_cast<double>(k) / (cfg.n_hands - 1);
    return {0.35 + 0.3 * u, 0.50};
  }
  // Body grid inside [0.38, 0.62] x [0.30, 0.55].
  const int b = k - cfg.n_hands;
  const int cols = 4;
  const double gx = 0.38 + 0.24 * ((b % cols) / 3.0);
  const double gy = 0.30 + 0.25 * (std::min(b / cols, 5) / 5.0);
  return {gx, gy};
}

double hand_amplitude(const SynthConfig& cfg, int hand) {
  return 0.05 * (1.0 + static_cast<double>(hand) / cfg.n_hands);
}

Prototypes build_prototypes(const SynthConfig& cfg) {
  Rng rng(derive_seed(cfg.seed, {kTagSynth, kTagProto}));
  Prototypes proto;
  proto.frames.resize(static_cast<std::size_t>(cfg.vocab_size));
  proto.motion.resize(static_cast<std::size_t>(cfg.vocab_size));
  for (int g = 0; g < cfg.vocab_size; ++g) {
    proto.frames[g] = static_cast<int>(
        rng.uniform_int(cfg.frames_per_gloss_min, cfg.frames_per_gloss_max));
    proto.motion[g].resize(static_cast<std::size_t>(cfg.n_hands));
    for (int h = 0; h < cfg.n_hands; ++h) {
      HandMotion& m = proto.motion[g][h];
      m.freq_x = rng.uniform_int(1, 3);
      m.freq_y = rng.uniform_int(1, 3);
      m.phase_x = rng.uniform(0.0, 2.0 * M_PI);
      m.phase_y = rng.uniform(0.0, 2.0 * M_PI);
    }
  }
  return proto;
}

// Hand position inside gloss g at phase u in [0, 1]; u outside that range is
// allowed and continues the trajectory smoothly (used by the blends).
Point hand_at(const SynthConfig& cfg, const Prototypes& proto, int g, int h,
              double u) {
  const Point base = base_position(cfg, h);
  const HandMotion& m = proto.motion[static_cast<std::size_t>(g)][h];
  const double a = hand_amplitude(cfg, h);
  return {base.x + a * std::sin(2.0 * M_PI * m.freq_x * u + m.phase_x),
          base.y + a * std::cos(2.0 * M_PI * m.freq_y * u + m.phase_y)};
}

// Slight idle sway so body keypoints are not exactly stationary.
Point body_at(const SynthConfig& cfg, int k, double t_abs) {
  const Point base = base_position(cfg, k);
  const double ph = 0.7 * k;
  return {base.x + 0.003 * std::sin(0.13 * t_abs + ph),
          base.y + 0.003 * std::cos(0.11 * t_abs + ph)};
}

struct SignerStyle {
  double cos_r, sin_r, scale, tx, ty;
};

SignerStyle signer_style(const SynthConfig& cfg, int signer) {
  Rng rng(derive_seed(cfg.seed, {kTagSynth, kTagSigner,
                                 static_cast<std::uint64_t>(signer)}));
  const double angle = rng.normal(0.0, 0.05);
  SignerStyle s;
  s.cos_r = std::cos(angle);
  s.sin_r = std::sin(angle);
  s.scale = 1.0 + rng.normal(0.0, 0.05);
  s.tx = rng.normal(0.0, 0.03);
  s.ty = rng.normal(0.0, 0.03);
  return s;
}

// Rotation + scale about (0.5, 0.5), then translation.
Point apply_style(const SignerStyle& s, Point p) {
  const double cx = p.x - 0.5, cy = p.y - 0.5;
  return {0.5 + s.scale * (s.cos_r * cx - s.sin_r * cy) + s.tx,
          0.5 + s.scale * (s.sin_r * cx + s.cos_r * cy) + s.ty};
}

}  // namespace

void SynthConfig::validate() const {
  if (vocab_size < 2)
    throw ConfigError("synth: vocab_size must be >= 2, got " +
                      std::to_string(vocab_size));
  if (n_keypoints < 6)
    throw ConfigError("synth: n_keypoints must be >= 6, got " +
                      std::to_string(n_keypoints));
  if (n_hands < 1 || n_hands + n_noisy >= n_keypoints)
    throw ConfigError("synth: need 1 <= n_hands and n_hands + n_noisy < K");
  if (n_noisy < 0 || 2 * n_noisy >= n_keypoints)
    throw ConfigError(
        "synth: n_noisy must satisfy 0 <= 2*n_noisy < K so the body remains "
        "the largest cluster");
  if (gloss_len_min < 1 || gloss_len_max < gloss_len_min)
    throw ConfigError("synth: bad gloss_len range");
  if (frames_per_gloss_min < 8)
    throw ConfigError(
        "synth: frames_per_gloss_min must be >= 8 so ceil(T/4) subsampled "
        "frames always admit the CTC alignment");
  if (frames_per_gloss_max < frames_per_gloss_min)
    throw ConfigError("synth: bad frames_per_gloss range");
  if (noise_sigma < 0.0)
    throw ConfigError("synth: noise_sigma must be >= 0");
  if (invalid_prob < 0.0 || invalid_prob >= 1.0)
    throw ConfigError("synth: invalid_prob must be in [0, 1)");
  if (blend_frames < 0) throw ConfigError("synth: blend_frames must be >= 0");
  if (train_signers < 1 || dev_signers < 0 || test_signers < 0)
    throw ConfigError("synth: train needs a signer; counts must be >= 0");
  if (train_signers + dev_signers + test_signers != n_signers)
    throw ConfigError("synth: split signers must sum to n_signers");
  if (n_samples < 1) throw ConfigError("synth: n_samples must be >= 1");
}

SynthGroundTruth synth_ground_truth(const SynthConfig& cfg) {
  cfg.validate();
  SynthGroundTruth gt;
  for (int h = 0; h < cfg.n_hands; ++h) gt.hand_indices.push_back(h);
  for (int m = cfg.n_keypoints - cfg.n_noisy; m < cfg.n_keypoints; ++m)
    gt.noisy_indices.push_back(m);
  gt.gloss_frames = build_prototypes(cfg).frames;
  return gt;
}

DatasetManifest generate_synthetic_dataset(
    const SynthConfig& cfg, const std::filesystem::path& out_dir) {
  cfg.validate();
  const Prototypes proto = build_prototypes(cfg);

  std::vector<SignerStyle> styles;
  std::vector<std::string> splits;
  for (int s = 0; s < cfg.n_signers; ++s) {
    styles.push_back(signer_style(cfg, s));
    splits.push_back(s < cfg.train_signers ? "train"
                     : s < cfg.train_signers + cfg.dev_signers ? "dev"
                                                               : "test");
  }

  std::filesystem::create_directories(out_dir / "keypoints");
  DatasetManifest manifest;
  manifest.base_dir = out_dir;

  int train_counter = 0;
  for (int i = 0; i < cfg.n_samples; ++i) {
    const int signer = i % cfg.n_signers;
    const std::string split = splits[static_cast<std::size_t>(signer)];
    Rng rng(derive_seed(cfg.seed, {kTagSynth, kTagSample,
                                   static_cast<std::uint64_t>(i)}));

    const int len = static_cast<int>(
        rng.uniform_int(cfg.gloss_len_min, cfg.gloss_len_max));
    std::vector<int> glosses(static_cast<std::size_t>(len));
    for (int& g : glosses)
      g = static_cast<int>(rng.uniform_int(1, cfg.vocab_size));
    if (split == "train") {
      // Cycle the leading token so the training split covers the whole
      // vocabulary; this is what keeps the OOV count at zero.
      glosses[0] = train_counter % cfg.vocab_size + 1;
      ++train_counter;
    }

    std::vector<int> seg_start(static_cast<std::size_t>(len) + 1, 0);
    for (int j = 0; j < len; ++j)
      seg_start[j + 1] = seg_start[j] + proto.frames[glosses[j] - 1];
    const int total = seg_start[static_cast<std::size_t>(len)];

    KeypointSequence seq;
    char sid[32];
    std::snprintf(sid, sizeof(sid), "%s_%04d", split.c_str(), i);
    seq.sample_id = sid;
    char sgn[16];
    std::snprintf(sgn, sizeof(sgn), "S%02d", signer);
    seq.signer_id = sgn;
    for (int g : glosses) seq.glosses.push_back(gloss_token(g));
    seq.frames.resize(total, 3 * cfg.n_keypoints);

    const SignerStyle& style = styles[static_cast<std::size_t>(signer)];
    const int first_noisy = cfg.n_keypoints - cfg.n_noisy;
    for (int t = 0; t < total; ++t) {
      // Segment index and local phase for this frame.
      int seg = 0;
      while (seg + 1 < len && t >= seg_start[seg + 1]) ++seg;
      const auto phase = [&](int s, int tt) {
        const int dur = proto.frames[glosses[s] - 1];
        return dur > 1 ? static_cast<double>(tt - seg_start[s]) / (dur - 1)
                       : 0.0;
      };
      for (int k = 0; k < cfg.n_keypoints; ++k) {
        Point p;
        if (k >= first_noisy) {
          p = base_position(cfg, k);
        } else if (k < cfg.n_hands) {
          p = hand_at(cfg, proto, glosses[seg] - 1, k, phase(seg, t));
          // Linear co-articulation blend across segment boundaries: extend
          // the neighboring prototype past its end/start and cross-fade.
          const int w = cfg.blend_frames;
          if (w > 0) {
            if (seg + 1 < len && t >= seg_start[seg + 1] - w) {
              const double a =
                  (t - (seg_start[seg + 1] - w) + 1.0) / (2.0 * w + 1.0);
              const Point q = hand_at(cfg, proto, glosses[seg + 1] - 1, k,
                                      phase(seg + 1, t));
              p = {(1.0 - a) * p.x + a * q.x, (1.0 - a) * p.y + a * q.y};
            } else if (seg > 0 && t < seg_start[seg] + w) {
              const double a =
                  (t - (seg_start[seg] - w) + 1.0) / (2.0 * w + 1.0);
              const Point q =
                  hand_at(cfg, proto, glosses[seg - 1] - 1, k, phase(seg - 1, t));
              p = {a * p.x + (1.0 - a) * q.x, a * p.y + (1.0 - a) * q.y};
            }
          }
        } else {
          p = body_at(cfg, k, t);
        }
        p = apply_style(style, p);
        if (cfg.noise_sigma > 0.0) {
          p.x += rng.normal(0.0, cfg.noise_sigma);
          p.y += rng.normal(0.0, cfg.noise_sigma);
        }
        if (k >= first_noisy) {
          // Heavy-tailed but bounded jitter: the mean stays near the far
          // base, so the mask decision is deterministic for every seed.
          p.x += std::clamp(rng.cauchy(0.08), -1.0, 1.0);
          p.y += std::clamp(rng.cauchy(0.08), -1.0, 1.0);
        }
        float conf = 1.0f;
        if (cfg.invalid_prob > 0.0 && rng.bernoulli(cfg.invalid_prob))
          conf = 0.0f;
        seq.set(t, k, static_cast<float>(p.x), static_cast<float>(p.y), conf);
      }
    }

    const std::string rel = "keypoints/" + seq.sample_id + ".kpsq";
    write_keypoint_file(seq, out_dir / rel);

    ManifestRecord rec;
    rec.sample_id = seq.sample_id;
    rec.split = split;
    rec.signer_id = seq.signer_id;
    rec.path = rel;
    rec.glosses = seq.glosses;
    manifest.records.push_back(std::move(rec));
  }

  manifest.write(out_dir / "manifest.tsv");
  manifest.validate(true);
  return manifest;
}

}  // namespace cslr
