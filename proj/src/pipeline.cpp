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

#include "cslr/pipeline.hpp"

#include <cstdio>
#include <fstream>

#include "cslr/ctc.hpp"
#include "cslr/eda.hpp"
#include "cslr/preprocess.hpp"
#include "cslr/provenance.hpp"
#include "cslr/wer.hpp"

namespace cslr {

const std::set<std::string>& known_config_keys() {
  static const std::set<std::string> keys = {
      "seed",
      "threads",
      // synth.*
      "synth.vocab_size", "synth.n_signers", "synth.n_samples",
      "synth.n_keypoints", "synth.n_hands", "synth.n_noisy",
      "synth.gloss_len_min", "synth.gloss_len_max",
      "synth.frames_per_gloss_min", "synth.frames_per_gloss_max",
      "synth.noise_sigma", "synth.invalid_prob", "synth.blend_frames",
      "synth.train_signers", "synth.dev_signers", "synth.test_signers",
      // eda.*
      "eda.n_samples", "eda.top_k",
      // preprocess.*
      "preprocess.eps", "preprocess.min_pts", "preprocess.reference",
      "preprocess.smooth",
      // model.*
      "model.d_model", "model.n_blocks", "model.n_heads", "model.d_ff",
      "model.dropout", "model.conv_kernel", "model.subsample_factor",
      "model.layer_drop",
      // schedule.*
      "schedule.warmup_epochs", "schedule.total_epochs", "schedule.lr_peak",
      "schedule.lr_floor",
      // train.*
      "train.batch_size", "train.patience", "train.weight_decay",
      "train.beta1", "train.beta2", "train.eps", "train.grad_clip",
      "train.decoder", "train.beam_width", "train.per_step_schedule",
      "train.swa_enabled", "train.swa_start_epoch", "train.track_train_wer",
      "train.stop_at_train_wer",
      // augment.*
      "augment.p_time", "augment.p_feat", "augment.n_time_masks",
      "augment.n_feat_masks", "augment.max_time_width",
      "augment.max_feat_width",
  };
  return keys;
}

SynthConfig synth_config_from(const Config& cfg, std::uint64_t seed) {
  SynthConfig s;
  s.vocab_size = static_cast<int>(cfg.get_int("synth.vocab_size", s.vocab_size));
  s.n_signers = static_cast<int>(cfg.get_int("synth.n_signers", s.n_signers));
  s.n_samples = static_cast<int>(cfg.get_int("synth.n_samples", s.n_samples));
  s.n_keypoints =
      static_cast<int>(cfg.get_int("synth.n_keypoints", s.n_keypoints));
  s.n_hands = static_cast<int>(cfg.get_int("synth.n_hands", s.n_hands));
  s.n_noisy = static_cast<int>(cfg.get_int("synth.n_noisy", s.n_noisy));
  s.gloss_len_min =
      static_cast<int>(cfg.get_int("synth.gloss_len_min", s.gloss_len_min));
  s.gloss_len_max =
      static_cast<int>(cfg.get_int("synth.gloss_len_max", s.gloss_len_max));
  s.frames_per_gloss_min = static_cast<int>(
      cfg.get_int("synth.frames_per_gloss_min", s.frames_per_gloss_min));
  s.frames_per_gloss_max = static_cast<int>(
      cfg.get_int("synth.frames_per_gloss_max", s.frames_per_gloss_max));
  s.noise_sigma = cfg.get_double("synth.noise_sigma", s.noise_sigma);
  s.invalid_prob = cfg.get_double("synth.invalid_prob", s.invalid_prob);
  s.blend_frames =
      static_cast<int>(cfg.get_int("synth.blend_frames", s.blend_frames));
  s.train_signers =
      static_cast<int>(cfg.get_int("synth.train_signers", s.train_signers));
  s.dev_signers =
      static_cast<int>(cfg.get_int("synth.dev_signers", s.dev_signers));
  s.test_signers =
      static_cast<int>(cfg.get_int("synth.test_signers", s.test_signers));
  s.seed = seed;
  s.validate();
  return s;
}

DbscanParams dbscan_params_from(const Config& cfg) {
  DbscanParams p;
  p.eps = cfg.get_double("preprocess.eps", p.eps);
  p.min_pts = static_cast<int>(cfg.get_int("preprocess.min_pts", p.min_pts));
  p.validate();
  return p;
}

ModelConfig model_config_from(const Config& cfg, int input_dim,
                              int vocab_size) {
  ModelConfig m;
  m.input_dim = input_dim;
  m.vocab_size = vocab_size;
  m.d_model = static_cast<int>(cfg.get_int("model.d_model", m.d_model));
  m.n_blocks = static_cast<int>(cfg.get_int("model.n_blocks", m.n_blocks));
  m.n_heads = static_cast<int>(cfg.get_int("model.n_heads", m.n_heads));
  m.d_ff = static_cast<int>(cfg.get_int("model.d_ff", m.d_ff));
  m.dropout = cfg.get_double("model.dropout", m.dropout);
  m.conv_kernel =
      static_cast<int>(cfg.get_int("model.conv_kernel", m.conv_kernel));
  m.subsample_factor = static_cast<int>(
      cfg.get_int("model.subsample_factor", m.subsample_factor));
  m.layer_drop = cfg.get_double("model.layer_drop", m.layer_drop);
  m.validate();
  return m;
}

ScheduleConfig schedule_config_from(const Config& cfg) {
  ScheduleConfig s;
  s.warmup_epochs =
      static_cast<int>(cfg.get_int("schedule.warmup_epochs", s.warmup_epochs));
  s.total_epochs =
      static_cast<int>(cfg.get_int("schedule.total_epochs", s.total_epochs));
  s.lr_peak = cfg.get_double("schedule.lr_peak", s.lr_peak);
  s.lr_floor = cfg.get_double("schedule.lr_floor", s.lr_floor);
  s.validate();
  return s;
}

AugmentConfig augment_config_from(const Config& cfg) {
  AugmentConfig a;
  a.p_time = cfg.get_double("augment.p_time", a.p_time);
  a.p_feat = cfg.get_double("augment.p_feat", a.p_feat);
  a.n_time_masks =
      static_cast<int>(cfg.get_int("augment.n_time_masks", a.n_time_masks));
  a.n_feat_masks =
      static_cast<int>(cfg.get_int("augment.n_feat_masks", a.n_feat_masks));
  a.max_time_width =
      static_cast<int>(cfg.get_int("augment.max_time_width", a.max_time_width));
  a.max_feat_width =
      static_cast<int>(cfg.get_int("augment.max_feat_width", a.max_feat_width));
  a.validate();
  return a;
}

TrainConfig train_config_from(const Config& cfg, int threads) {
  TrainConfig t;
  t.batch_size = static_cast<int>(cfg.get_int("train.batch_size", t.batch_size));
  t.patience = static_cast<int>(cfg.get_int("train.patience", t.patience));
  t.optimizer.weight_decay =
      cfg.get_double("train.weight_decay", t.optimizer.weight_decay);
  t.optimizer.beta1 = cfg.get_double("train.beta1", t.optimizer.beta1);
  t.optimizer.beta2 = cfg.get_double("train.beta2", t.optimizer.beta2);
  t.optimizer.eps = cfg.get_double("train.eps", t.optimizer.eps);
  t.grad_clip = cfg.get_double("train.grad_clip", t.grad_clip);
  t.decoder = cfg.get_string("train.decoder", t.decoder);
  t.beam_width = static_cast<int>(cfg.get_int("train.beam_width", t.beam_width));
  t.per_step_schedule =
      cfg.get_bool("train.per_step_schedule", t.per_step_schedule);
  t.swa_enabled = cfg.get_bool("train.swa_enabled", t.swa_enabled);
  t.swa_start_epoch =
      static_cast<int>(cfg.get_int("train.swa_start_epoch", t.swa_start_epoch));
  t.track_train_wer =
      cfg.get_bool("train.track_train_wer", t.track_train_wer);
  t.stop_at_train_wer =
      cfg.get_double("train.stop_at_train_wer", t.stop_at_train_wer);
  t.threads = threads;
  t.validate();
  return t;
}

namespace {

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw Error("cannot write " + path.string());
  os.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!os) throw Error("write failed: " + path.string());
}

// Resolved config + stamp covering the stage's output files.
void finish_stage(const RunContext& ctx, const std::string& stage,
                  const std::vector<std::filesystem::path>& outputs) {
  Config resolved = ctx.config;
  resolved.set("seed", std::to_string(ctx.seed));
  resolved.set("threads", std::to_string(ctx.threads));
  write_text(ctx.out_dir / "config.resolved.cfg", resolved.serialize());

  Stamp stamp;
  stamp.stage = stage;
  stamp_add_file(&stamp, ctx.out_dir, ctx.out_dir / "config.resolved.cfg");
  for (const auto& file : outputs) stamp_add_file(&stamp, ctx.out_dir, file);
  write_stamp(ctx.out_dir, stamp);
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// Loads the feature matrix plus targets for every record of a split. Files
// are hash-verified against the preprocess stamp before use.
template <typename Scalar>
std::vector<TrainSample<Scalar>> load_split_features(
    const DatasetManifest& manifest, const std::string& split,
    const std::filesystem::path& features_dir, const GlossVocabulary& vocab) {
  std::vector<TrainSample<Scalar>> out;
  for (const auto* rec : manifest.split_records(split)) {
    const auto path = features_dir / "features" / (rec->sample_id + ".kpf");
    verify_stamped_file(features_dir, path);
    TrainSample<Scalar> sample;
    sample.sample_id = rec->sample_id;
    sample.features = read_feature_file(path).cast<Scalar>();
    sample.target_ids = vocab.to_ids(rec->glosses);
    out.push_back(std::move(sample));
  }
  return out;
}

DatasetManifest load_manifest_checked(
    const std::filesystem::path& manifest_path) {
  DatasetManifest manifest = DatasetManifest::read(manifest_path);
  manifest.validate(true);
  return manifest;
}

// The dataset directory is stamped by cmd_synth; verify only the files this
// stage actually reads.
void verify_dataset_files(const DatasetManifest& manifest,
                          const std::vector<const ManifestRecord*>& records) {
  verify_stamped_file(manifest.base_dir,
                      manifest.base_dir / "manifest.tsv");
  for (const auto* rec : records)
    verify_stamped_file(manifest.base_dir, manifest.resolve(*rec));
}

}  // namespace

void cmd_synth(const RunContext& ctx) {
  const SynthConfig synth_cfg = synth_config_from(ctx.config, ctx.seed);
  std::filesystem::create_directories(ctx.out_dir);
  const DatasetManifest manifest =
      generate_synthetic_dataset(synth_cfg, ctx.out_dir);
  std::vector<std::filesystem::path> outputs{ctx.out_dir / "manifest.tsv"};
  for (const auto& rec : manifest.records)
    outputs.push_back(manifest.resolve(rec));
  finish_stage(ctx, "synth", outputs);
}

void cmd_eda(const RunContext& ctx, const std::filesystem::path& manifest_path,
             int n_samples, int top_k_count) {
  const DatasetManifest manifest = load_manifest_checked(manifest_path);
  const auto records = manifest.split_records("train");
  verify_dataset_files(
      manifest,
      std::vector<const ManifestRecord*>(
          records.begin(),
          records.begin() +
              static_cast<std::ptrdiff_t>(std::min(
                  records.size(), static_cast<std::size_t>(
                                      std::max(n_samples, 1))))));
  const DisplacementReport report =
      aggregate_displacement(manifest, "train", n_samples, ctx.threads);
  std::filesystem::create_directories(ctx.out_dir);
  write_displacement_csv(report, ctx.out_dir / "displacement.csv");
  write_topk_csv(report, top_k_count, ctx.out_dir / "displacement_topk.csv");
  finish_stage(ctx, "eda",
               {ctx.out_dir / "displacement.csv",
                ctx.out_dir / "displacement_topk.csv"});
}

void cmd_mask(const RunContext& ctx,
              const std::filesystem::path& manifest_path) {
  const DatasetManifest manifest = load_manifest_checked(manifest_path);
  const DbscanParams params = dbscan_params_from(ctx.config);
  std::string reference_id = ctx.config.get_string("preprocess.reference", "");
  if (reference_id.empty())
    reference_id = select_reference_sample(manifest, "train");

  const ManifestRecord* reference = nullptr;
  for (const auto& rec : manifest.records)
    if (rec.sample_id == reference_id) reference = &rec;
  if (reference == nullptr)
    throw ValidationError("mask: reference sample '" + reference_id +
                          "' not in manifest");
  verify_dataset_files(manifest, {reference});

  const KeypointSequence seq =
      read_keypoint_file(manifest.resolve(*reference));
  const MasterMask mask = build_master_mask(seq, params);
  std::filesystem::create_directories(ctx.out_dir);
  write_mask_file(mask, ctx.out_dir / "mask.txt");
  finish_stage(ctx, "mask", {ctx.out_dir / "mask.txt"});
}

void cmd_preprocess(const RunContext& ctx,
                    const std::filesystem::path& manifest_path,
                    const std::filesystem::path& mask_path) {
  const DatasetManifest manifest = load_manifest_checked(manifest_path);
  verify_stamped_file(mask_path.parent_path(), mask_path);
  const MasterMask mask = read_mask_file(mask_path);
  const bool smooth = ctx.config.get_bool("preprocess.smooth", false);

  std::vector<const ManifestRecord*> records;
  for (const auto& rec : manifest.records) records.push_back(&rec);
  verify_dataset_files(manifest, records);

  std::filesystem::create_directories(ctx.out_dir / "features");
  std::vector<std::filesystem::path> outputs(records.size());
  parallel_for(records.size(), ctx.threads, [&](std::size_t i) {
    const KeypointSequence seq =
        read_keypoint_file(manifest.resolve(*records[i]));
    const FeatureMatrix features = assemble_features(seq, mask, smooth);
    const auto path =
        ctx.out_dir / "features" / (records[i]->sample_id + ".kpf");
    write_feature_file(features.cast<float>(), path);
    outputs[i] = path;
  });
  finish_stage(ctx, "preprocess", outputs);
}

void cmd_train(const RunContext& ctx,
               const std::filesystem::path& manifest_path,
               const std::filesystem::path& features_dir) {
  const DatasetManifest manifest = load_manifest_checked(manifest_path);
  const GlossVocabulary vocab =
      GlossVocabulary::build(manifest, {"train", "dev"});

  const auto train_samples =
      load_split_features<float>(manifest, "train", features_dir, vocab);
  const auto dev_samples =
      load_split_features<float>(manifest, "dev", features_dir, vocab);
  if (train_samples.empty())
    throw ValidationError("train: no training samples");
  const int input_dim = static_cast<int>(train_samples.front().features.cols());

  const ModelConfig model_cfg =
      model_config_from(ctx.config, input_dim, vocab.size());
  const ScheduleConfig schedule_cfg = schedule_config_from(ctx.config);
  const AugmentConfig augment_cfg = augment_config_from(ctx.config);
  const TrainConfig train_cfg = train_config_from(ctx.config, ctx.threads);

  TrainResult<float> result =
      train_loop<float>(train_samples, dev_samples, model_cfg, schedule_cfg,
                        augment_cfg, train_cfg, ctx.seed);

  std::filesystem::create_directories(ctx.out_dir);
  write_text(ctx.out_dir / "curves.csv",
             curve_to_csv(result.curve, train_cfg.track_train_wer));
  vocab.write(ctx.out_dir / "vocab.txt");
  save_checkpoint(ctx.out_dir / "best.ckpt", result.best_params, model_cfg,
                  vocab);
  save_checkpoint(ctx.out_dir / "last.ckpt", result.last_params, model_cfg,
                  vocab);
  std::vector<std::filesystem::path> outputs{
      ctx.out_dir / "curves.csv", ctx.out_dir / "vocab.txt",
      ctx.out_dir / "best.ckpt", ctx.out_dir / "last.ckpt"};
  if (result.swa_params.has_value()) {
    save_checkpoint(ctx.out_dir / "swa.ckpt", *result.swa_params, model_cfg,
                    vocab);
    outputs.push_back(ctx.out_dir / "swa.ckpt");
  }

  std::string summary;
  summary += "best_epoch " + std::to_string(result.best_epoch) + "\n";
  summary += "best_dev_wer " + format_double(result.best_dev_wer) + "\n";
  summary += "epochs_run " + std::to_string(result.epochs_run) + "\n";
  summary += "stop_reason " + result.stop_reason + "\n";
  summary +=
      "skipped_samples " + std::to_string(result.skipped_samples.size()) + "\n";
  for (const auto& id : result.skipped_samples)
    summary += "skipped " + id + "\n";
  write_text(ctx.out_dir / "train_summary.txt", summary);
  outputs.push_back(ctx.out_dir / "train_summary.txt");
  finish_stage(ctx, "train", outputs);
}

namespace {

template <typename Fn>
void run_decoding(const RunContext& ctx,
                  const std::filesystem::path& checkpoint_path,
                  const std::filesystem::path& manifest_path,
                  const std::filesystem::path& features_dir,
                  const std::string& split, const std::string& decoder,
                  int beam_width, Fn&& consume) {
  if (decoder != "greedy" && decoder != "beam")
    throw ConfigError("decoder must be 'greedy' or 'beam', got '" + decoder +
                      "'");
  if (beam_width < 1) throw ConfigError("beam width must be >= 1");
  verify_stamped_file(checkpoint_path.parent_path(), checkpoint_path);
  Checkpoint<float> ckpt = load_checkpoint<float>(checkpoint_path);

  const DatasetManifest manifest = load_manifest_checked(manifest_path);
  const auto records = manifest.split_records(split);
  if (records.empty())
    throw ValidationError("split '" + split + "' is empty");

  std::vector<std::vector<std::string>> hyps(records.size());
  parallel_for(records.size(), ctx.threads, [&](std::size_t i) {
    const auto path =
        features_dir / "features" / (records[i]->sample_id + ".kpf");
    verify_stamped_file(features_dir, path);
    const DenseMatrix<float> features = read_feature_file(path);
    NoGradGuard no_grad;
    const ForwardResult<float> out =
        forward<float>(features, features.rows(), ckpt.params, ckpt.config,
                       /*training=*/false);
    const DenseMatrix<float> window =
        out.log_probs.value().topRows(out.valid_len);
    const std::vector<int> ids = decoder == "beam"
                                     ? beam_search_decode(window, beam_width)
                                     : greedy_decode(window);
    hyps[i] = ckpt.vocab.to_tokens(ids);
  });
  consume(ckpt, records, hyps);
}

}  // namespace

void cmd_evaluate(const RunContext& ctx,
                  const std::filesystem::path& checkpoint_path,
                  const std::filesystem::path& manifest_path,
                  const std::filesystem::path& features_dir,
                  const std::string& split, const std::string& decoder,
                  int beam_width) {
  run_decoding(
      ctx, checkpoint_path, manifest_path, features_dir, split, decoder,
      beam_width,
      [&](const Checkpoint<float>& ckpt,
          const std::vector<const ManifestRecord*>& records,
          const std::vector<std::vector<std::string>>& hyps) {
        std::string report = "sample_id,S,D,I,N,wer\n";
        WerBreakdown total;
        std::vector<std::vector<std::string>> refs;
        for (std::size_t i = 0; i < records.size(); ++i) {
          const WerBreakdown one =
              word_error_counts(records[i]->glosses, hyps[i]);
          total.substitutions += one.substitutions;
          total.deletions += one.deletions;
          total.insertions += one.insertions;
          total.ref_words += one.ref_words;
          report += records[i]->sample_id + "," +
                    std::to_string(one.substitutions) + "," +
                    std::to_string(one.deletions) + "," +
                    std::to_string(one.insertions) + "," +
                    std::to_string(one.ref_words) + "," +
                    format_double(one.wer()) + "\n";
          refs.push_back(records[i]->glosses);
        }
        report += "TOTAL," + std::to_string(total.substitutions) + "," +
                  std::to_string(total.deletions) + "," +
                  std::to_string(total.insertions) + "," +
                  std::to_string(total.ref_words) + "," +
                  format_double(total.wer()) + "\n";
        std::filesystem::create_directories(ctx.out_dir);
        write_text(ctx.out_dir / "wer_report.csv", report);

        const OovReport oov = oov_report(ckpt.vocab, refs);
        std::string oov_text =
            "oov_total " + std::to_string(oov.total) + "\n";
        for (const auto& [token, count] : oov.counts)
          oov_text += token + " " + std::to_string(count) + "\n";
        write_text(ctx.out_dir / "oov_report.txt", oov_text);
        finish_stage(ctx, "evaluate",
                     {ctx.out_dir / "wer_report.csv",
                      ctx.out_dir / "oov_report.txt"});
      });
}

void cmd_decode(const RunContext& ctx,
                const std::filesystem::path& checkpoint_path,
                const std::filesystem::path& manifest_path,
                const std::filesystem::path& features_dir,
                const std::string& split, const std::string& decoder,
                int beam_width) {
  run_decoding(
      ctx, checkpoint_path, manifest_path, features_dir, split, decoder,
      beam_width,
      [&](const Checkpoint<float>&,
          const std::vector<const ManifestRecord*>& records,
          const std::vector<std::vector<std::string>>& hyps) {
        std::string lines;
        for (std::size_t i = 0; i < records.size(); ++i) {
          lines += records[i]->sample_id;
          lines += '\t';
          for (std::size_t j = 0; j < hyps[i].size(); ++j) {
            if (j) lines += ' ';
            lines += hyps[i][j];
          }
          lines += '\n';
        }
        std::filesystem::create_directories(ctx.out_dir);
        write_text(ctx.out_dir / "hypotheses.tsv", lines);
        finish_stage(ctx, "decode", {ctx.out_dir / "hypotheses.tsv"});
      });
}

}  // namespace cslr
