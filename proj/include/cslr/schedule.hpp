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

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "cslr/errors.hpp"
#include "cslr/tensor.hpp"

namespace cslr {

// Linear warmup to lr_peak over warmup_epochs, then cosine annealing to
// lr_floor across the remaining epochs.
struct ScheduleConfig {
  int warmup_epochs = 15;
  int total_epochs = 300;
  double lr_peak = 3e-4;
  double lr_floor = 0.0;

  void validate() const {
    if (warmup_epochs < 1 || warmup_epochs >= total_epochs)
      throw ConfigError("schedule: need 0 < warmup_epochs < total_epochs");
    if (lr_peak <= 0.0 || lr_floor < 0.0 || lr_floor > lr_peak)
      throw ConfigError("schedule: need 0 <= lr_floor <= lr_peak, lr_peak > 0");
  }
};

// Fractional epochs supported for the optional per-step schedule. The cosine
// phase is parameterized so its last epoch lands on cos(pi) exactly, making
// lr(total_epochs - 1) == lr_floor to machine precision.
inline double lr_at_continuous(double epoch, const ScheduleConfig& cfg) {
  cfg.validate();
  if (epoch < 0.0 || epoch >= static_cast<double>(cfg.total_epochs))
    throw ValidationError("lr_at: epoch " + std::to_string(epoch) +
                          " outside [0, " + std::to_string(cfg.total_epochs) +
                          ")");
  if (epoch < static_cast<double>(cfg.warmup_epochs))
    return cfg.lr_peak * (epoch + 1.0) / static_cast<double>(cfg.warmup_epochs);
  const double span =
      static_cast<double>(cfg.total_epochs - cfg.warmup_epochs - 1);
  const double progress =
      span > 0.0 ? (epoch - static_cast<double>(cfg.warmup_epochs)) / span
                 : 1.0;
  return cfg.lr_floor +
         0.5 * (cfg.lr_peak - cfg.lr_floor) * (1.0 + std::cos(M_PI * progress));
}

inline double lr_at(int epoch, const ScheduleConfig& cfg) {
  return lr_at_continuous(static_cast<double>(epoch), cfg);
}

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-2;

  void validate() const {
    if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0)
      throw ConfigError("adamw: betas must be in [0, 1)");
    if (eps <= 0.0) throw ConfigError("adamw: eps must be > 0");
    if (weight_decay < 0.0) throw ConfigError("adamw: weight_decay >= 0");
  }
};

// Decoupled-weight-decay Adam over a fixed list of named parameters:
// p <- p - lr*wd*p - lr * m_hat / (sqrt(v_hat) + eps).
template <typename Scalar>
class AdamW {
 public:
  AdamW(std::vector<std::pair<std::string, Tensor<Scalar>*>> params,
        const AdamWConfig& cfg)
      : params_(std::move(params)), cfg_(cfg) {
    cfg_.validate();
    slots_.resize(params_.size());
    for (std::size_t i = 0; i < params_.size(); ++i) {
      Tensor<Scalar>& t = *params_[i].second;
      // Parameters absent from a step's graph (stochastic depth skips) must
      // still decay; a pre-allocated zero gradient makes that uniform.
      t.mutable_grad();
      slots_[i].m = DenseMatrix<Scalar>::Zero(t.rows(), t.cols());
      slots_[i].v = DenseMatrix<Scalar>::Zero(t.rows(), t.cols());
    }
  }

  std::int64_t step_count() const { return step_; }

  void step(double lr) {
    if (!(lr >= 0.0) || !std::isfinite(lr))
      throw ValidationError("adamw: non-finite learning rate");
    ++step_;
    const Scalar b1 = static_cast<Scalar>(cfg_.beta1);
    const Scalar b2 = static_cast<Scalar>(cfg_.beta2);
    const Scalar corr1 =
        Scalar(1) - static_cast<Scalar>(
                        std::pow(cfg_.beta1, static_cast<double>(step_)));
    const Scalar corr2 =
        Scalar(1) - static_cast<Scalar>(
                        std::pow(cfg_.beta2, static_cast<double>(step_)));
    for (std::size_t i = 0; i < params_.size(); ++i) {
      Tensor<Scalar>& p = *params_[i].second;
      if (!p.has_grad())
        throw UsageError("adamw: parameter '" + params_[i].first +
                         "' has no gradient");
      const DenseMatrix<Scalar>& g = p.grad();
      if (!g.allFinite())
        throw UsageError("adamw: non-finite gradient in '" + params_[i].first +
                         "'");
      Slot& s = slots_[i];
      s.m = b1 * s.m + (Scalar(1) - b1) * g;
      s.v = b2 * s.v.array() + (Scalar(1) - b2) * g.array().square();
      auto& value = p.mutable_value();
      value -= static_cast<Scalar>(lr * cfg_.weight_decay) * value;
      value.array() -= static_cast<Scalar>(lr) * (s.m.array() / corr1) /
                       ((s.v.array() / corr2).sqrt() + static_cast<Scalar>(cfg_.eps));
    }
  }

  // Global gradient-norm clipping; returns the pre-clip norm.
  double clip_grad_norm(double max_norm) {
    if (max_norm <= 0.0)
      throw ConfigError("clip_grad_norm: max_norm must be > 0");
    double total = 0.0;
    for (auto& [name, p] : params_)
      if (p->has_grad())
        total += static_cast<double>(
            p->grad().template cast<double>().array().square().sum());
    const double norm = std::sqrt(total);
    if (norm > max_norm) {
      const Scalar factor = static_cast<Scalar>(max_norm / norm);
      for (auto& [name, p] : params_)
        if (p->has_grad()) p->mutable_grad() *= factor;
    }
    return norm;
  }

 private:
  struct Slot {
    DenseMatrix<Scalar> m, v;
  };
  std::vector<std::pair<std::string, Tensor<Scalar>*>> params_;
  AdamWConfig cfg_;
  std::vector<Slot> slots_;
  std::int64_t step_ = 0;
};

// Dev-WER early stopping: a strictly lower value resets the counter; once
// the counter reaches `patience` the run stops.
class EarlyStopper {
 public:
  explicit EarlyStopper(int patience) : patience_(patience) {
    if (patience < 1) throw ConfigError("early stop: patience must be >= 1");
  }

  enum class Action { kImproved, kContinue, kStop };

  Action record(double metric) {
    if (metric < best_) {
      best_ = metric;
      since_improvement_ = 0;
      return Action::kImproved;
    }
    ++since_improvement_;
    return since_improvement_ >= patience_ ? Action::kStop : Action::kContinue;
  }

  double best() const { return best_; }
  int epochs_since_improvement() const { return since_improvement_; }

 private:
  int patience_;
  double best_ = std::numeric_limits<double>::infinity();
  int since_improvement_ = 0;
};

// Running mean: avg <- (avg * n + next) / (n + 1).
template <typename Scalar>
void swa_update(DenseMatrix<Scalar>& avg, const DenseMatrix<Scalar>& next,
                std::int64_t n_models) {
  if (n_models < 0) throw ValidationError("swa_update: n_models must be >= 0");
  if (n_models == 0) {
    avg = next;
    return;
  }
  if (avg.rows() != next.rows() || avg.cols() != next.cols())
    throw ValidationError("swa_update: shape mismatch");
  const Scalar n = static_cast<Scalar>(n_models);
  avg = (avg * n + next) / (n + Scalar(1));
}

}  // namespace cslr
