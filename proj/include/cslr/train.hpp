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

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "cslr/augment.hpp"
#include "cslr/ctc.hpp"
#include "cslr/model.hpp"
#include "cslr/parallel.hpp"
#include "cslr/schedule.hpp"
#include "cslr/wer.hpp"

namespace cslr {

template <typename Scalar>
struct TrainSample {
  std::string sample_id;
  DenseMatrix<Scalar> features;  // T x F
  std::vector<int> target_ids;   // gloss ids, 1..V
};

struct TrainConfig {
  int batch_size = 128;
  int patience = 30;
  AdamWConfig optimizer;
  double grad_clip = 0.0;         // 0 disables clipping
  std::string decoder = "greedy"; // greedy | beam
  int beam_width = 20;
  bool per_step_schedule = false;
  bool swa_enabled = false;
  int swa_start_epoch = 0;
  bool track_train_wer = false;
  double stop_at_train_wer = -1.0;  // < 0 disables the extra stop rule
  int threads = 1;

  // Test hook: replaces the computed dev WER (epoch, computed) -> used value.
  // Lets the early-stopping contract be exercised on a rigged plateau.
  std::function<double(int, double)> dev_wer_hook;

  void validate() const {
    if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
    if (patience < 1) throw ConfigError("train: patience must be >= 1");
    optimizer.validate();
    if (grad_clip < 0.0) throw ConfigError("train: grad_clip must be >= 0");
    if (decoder != "greedy" && decoder != "beam")
      throw ConfigError("train: decoder must be 'greedy' or 'beam', got '" +
                        decoder + "'");
    if (beam_width < 1) throw ConfigError("train: beam_width must be >= 1");
    if (swa_start_epoch < 0)
      throw ConfigError("train: swa_start_epoch must be >= 0");
    if (threads < 1) throw ConfigError("train: threads must be >= 1");
  }
};

struct EpochRow {
  int epoch;
  double train_ctc_loss;
  double dev_wer;
  double lr;
  double train_wer = -1.0;  // only filled when tracked
};

template <typename Scalar>
struct TrainResult {
  std::vector<EpochRow> curve;
  ModelParams<Scalar> best_params;
  ModelParams<Scalar> last_params;
  std::optional<ModelParams<Scalar>> swa_params;
  int best_epoch = -1;
  double best_dev_wer = std::numeric_limits<double>::infinity();
  int epochs_run = 0;
  std::vector<std::string> skipped_samples;  // infeasible CTC targets
  std::string stop_reason;  // early_stop | train_wer_target | total_epochs
};

namespace detail {

template <typename Scalar>
std::vector<int> decode_sample(const DenseMatrix<Scalar>& log_probs,
                               Eigen::Index valid_len,
                               const TrainConfig& cfg) {
  const DenseMatrix<Scalar> window = log_probs.topRows(valid_len);
  return cfg.decoder == "beam" ? beam_search_decode(window, cfg.beam_width)
                               : greedy_decode(window);
}

// Corpus WER of the model over a sample set, eval mode, parallel across
// samples with an ordered reduction.
template <typename Scalar>
double evaluate_wer(const std::vector<TrainSample<Scalar>>& samples,
                    ModelParams<Scalar>& params, const ModelConfig& model_cfg,
                    const TrainConfig& train_cfg) {
  std::vector<WerBreakdown> per_sample(samples.size());
  parallel_for(samples.size(), train_cfg.threads, [&](std::size_t i) {
    NoGradGuard no_grad;
    const ForwardResult<Scalar> out = forward<Scalar>(
        samples[i].features, samples[i].features.rows(), params, model_cfg,
        /*training=*/false);
    const std::vector<int> hyp =
        decode_sample(out.log_probs.value(), out.valid_len, train_cfg);
    per_sample[i] = word_error_counts(samples[i].target_ids, hyp);
  });
  WerBreakdown total;
  for (const WerBreakdown& one : per_sample) {
    total.substitutions += one.substitutions;
    total.deletions += one.deletions;
    total.insertions += one.insertions;
    total.ref_words += one.ref_words;
  }
  return total.wer();
}

}  // namespace detail

// The training loop: seeded shuffle, length-bucketed batches with padding
// and valid-length masks, mean CTC loss per batch, AdamW with the warmup +
// cosine schedule, dev-WER early stopping, optional SWA averaging.
template <typename Scalar>
TrainResult<Scalar> train_loop(const std::vector<TrainSample<Scalar>>& train,
                               const std::vector<TrainSample<Scalar>>& dev,
                               const ModelConfig& model_cfg,
                               const ScheduleConfig& schedule_cfg,
                               const AugmentConfig& augment_cfg,
                               const TrainConfig& train_cfg,
                               std::uint64_t seed) {
  model_cfg.validate();
  schedule_cfg.validate();
  augment_cfg.validate();
  train_cfg.validate();
  if (train.empty()) throw ValidationError("train_loop: no training samples");
  if (dev.empty()) throw ValidationError("train_loop: no dev samples");

  TrainResult<Scalar> result;

  // Infeasible targets are a data problem, detected once up front: the
  // sample is reported and excluded rather than failing mid-epoch.
  std::vector<std::size_t> usable;
  for (std::size_t i = 0; i < train.size(); ++i) {
    const auto target =
        CtcTarget::from_ids(train[i].target_ids, model_cfg.n_classes());
    const Eigen::Index t_sub = subsampled_length(train[i].features.rows());
    if (t_sub < target.min_frames())
      result.skipped_samples.push_back(train[i].sample_id);
    else
      usable.push_back(i);
  }
  if (usable.empty())
    throw ValidationError("train_loop: every training sample is CTC-infeasible");

  ModelParams<Scalar> params =
      init_params<Scalar>(model_cfg, derive_seed(seed, {0x4d4f44454cull}));
  AdamW<Scalar> optimizer(params.named(), train_cfg.optimizer);
  EarlyStopper stopper(train_cfg.patience);
  Rng rng(derive_seed(seed, {0x545241494eull}));

  std::optional<ModelParams<Scalar>> swa;
  std::int64_t swa_count = 0;

  result.stop_reason = "total_epochs";
  for (int epoch = 0; epoch < schedule_cfg.total_epochs; ++epoch) {
    // Seeded shuffle, then a stable sort by length so batches hold similar
    // lengths while the order within a length class stays epoch-dependent.
    std::vector<std::size_t> order = usable;
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1],
                order[static_cast<std::size_t>(rng.uniform_int(
                    0, static_cast<std::int64_t>(i) - 1))]);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) {
                       return train[a].features.rows() < train[b].features.rows();
                     });
    std::vector<std::vector<std::size_t>> batches;
    for (std::size_t at = 0; at < order.size();
         at += static_cast<std::size_t>(train_cfg.batch_size))
      batches.emplace_back(
          order.begin() + static_cast<std::ptrdiff_t>(at),
          order.begin() +
              static_cast<std::ptrdiff_t>(std::min(
                  at + static_cast<std::size_t>(train_cfg.batch_size),
                  order.size())));
    for (std::size_t i = batches.size(); i > 1; --i)
      std::swap(batches[i - 1],
                batches[static_cast<std::size_t>(rng.uniform_int(
                    0, static_cast<std::int64_t>(i) - 1))]);

    const int steps_per_epoch = static_cast<int>(batches.size());
    double loss_sum = 0.0;
    std::size_t loss_count = 0;
    int step_index = 0;
    for (const auto& batch : batches) {
      const double lr =
          train_cfg.per_step_schedule
              ? lr_at_continuous(
                    epoch + static_cast<double>(step_index) / steps_per_epoch,
                    schedule_cfg)
              : lr_at(epoch, schedule_cfg);
      ++step_index;

      Eigen::Index max_len = 0;
      for (std::size_t idx : batch)
        max_len = std::max(max_len, train[idx].features.rows());

      params.visit(
          [](const std::string&, Tensor<Scalar>& t) { t.zero_grad(); });
      const Scalar inv_batch = Scalar(1) / static_cast<Scalar>(batch.size());
      for (std::size_t idx : batch) {
        const TrainSample<Scalar>& sample = train[idx];
        DenseMatrix<Scalar> padded =
            DenseMatrix<Scalar>::Zero(max_len, sample.features.cols());
        padded.topRows(sample.features.rows()) = sample.features;
        ForwardResult<Scalar> out;
        try {
          out = forward<Scalar>(padded, sample.features.rows(), params,
                                model_cfg, /*training=*/true, &rng,
                                &augment_cfg);
          const auto target =
              CtcTarget::from_ids(sample.target_ids, model_cfg.n_classes());
          Tensor<Scalar> loss =
              ctc_loss_node(out.log_probs, target, out.valid_len);
          loss_sum += static_cast<double>(loss.value()(0, 0));
          ++loss_count;
          // Per-sample backward of loss/B accumulates the batch-mean
          // gradient while keeping only one graph alive at a time.
          backward(scale(loss, inv_batch));
        } catch (const UsageError& e) {
          throw Error("train_loop: epoch " + std::to_string(epoch) +
                      ", sample '" + sample.sample_id + "': " + e.what());
        }
      }
      if (train_cfg.grad_clip > 0.0)
        optimizer.clip_grad_norm(train_cfg.grad_clip);
      optimizer.step(lr);
    }

    EpochRow row;
    row.epoch = epoch;
    row.train_ctc_loss = loss_count > 0 ? loss_sum / static_cast<double>(loss_count) : 0.0;
    row.lr = lr_at(epoch, schedule_cfg);
    const double computed_dev =
        detail::evaluate_wer(dev, params, model_cfg, train_cfg);
    row.dev_wer = train_cfg.dev_wer_hook
                      ? train_cfg.dev_wer_hook(epoch, computed_dev)
                      : computed_dev;
    if (train_cfg.track_train_wer)
      row.train_wer = detail::evaluate_wer(train, params, model_cfg, train_cfg);
    result.curve.push_back(row);
    result.epochs_run = epoch + 1;

    if (train_cfg.swa_enabled && epoch >= train_cfg.swa_start_epoch) {
      if (!swa.has_value()) swa = clone_params(params);
      auto named_now = params.named();
      auto named_avg = swa->named();
      for (std::size_t i = 0; i < named_now.size(); ++i) {
        DenseMatrix<Scalar> avg = named_avg[i].second->value();
        swa_update(avg, named_now[i].second->value(), swa_count);
        named_avg[i].second->mutable_value() = avg;
      }
      ++swa_count;
    }

    const EarlyStopper::Action action = stopper.record(row.dev_wer);
    if (action == EarlyStopper::Action::kImproved) {
      result.best_params = clone_params(params);
      result.best_epoch = epoch;
      result.best_dev_wer = row.dev_wer;
    }
    if (action == EarlyStopper::Action::kStop) {
      result.stop_reason = "early_stop";
      break;
    }
    if (train_cfg.track_train_wer && train_cfg.stop_at_train_wer >= 0.0 &&
        row.train_wer <= train_cfg.stop_at_train_wer) {
      result.stop_reason = "train_wer_target";
      break;
    }
  }

  result.last_params = clone_params(params);
  if (result.best_epoch < 0) {
    result.best_params = clone_params(params);
    result.best_epoch = result.epochs_run - 1;
    result.best_dev_wer = result.curve.empty()
                              ? std::numeric_limits<double>::infinity()
                              : result.curve.back().dev_wer;
  }
  if (swa.has_value()) result.swa_params = std::move(swa);
  return result;
}

// curves.csv serialization; the train_wer column appears only when tracked.
inline std::string curve_to_csv(const std::vector<EpochRow>& curve,
                                bool with_train_wer) {
  std::string out = with_train_wer
                        ? "epoch,train_ctc_loss,dev_wer,lr,train_wer\n"
                        : "epoch,train_ctc_loss,dev_wer,lr\n";
  char buf[128];
  for (const EpochRow& row : curve) {
    std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.17g", row.epoch,
                  row.train_ctc_loss, row.dev_wer, row.lr);
    out += buf;
    if (with_train_wer) {
      std::snprintf(buf, sizeof(buf), ",%.17g", row.train_wer);
      out += buf;
    }
    out += '\n';
  }
  return out;
}

}  // namespace cslr
