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
#include <cmath>
#include <limits>
#include <map>
#include <vector>

#include "cslr/errors.hpp"
#include "cslr/tensor.hpp"

namespace cslr {

inline constexpr int kCtcBlank = 0;

namespace detail {

template <typename Scalar>
Scalar log_sum_exp(Scalar a, Scalar b) {
  const Scalar hi = std::max(a, b), lo = std::min(a, b);
  if (hi == -std::numeric_limits<Scalar>::infinity()) return hi;
  return hi + std::log1p(std::exp(lo - hi));
}

template <typename Scalar>
Scalar log_sum_exp(Scalar a, Scalar b, Scalar c) {
  return log_sum_exp(log_sum_exp(a, b), c);
}

}  // namespace detail

// A label sequence for CTC: ids in [1, n_classes), blank (0) excluded.
struct CtcTarget {
  std::vector<int> ids;

  static CtcTarget from_ids(std::vector<int> ids, int n_classes) {
    for (int id : ids) {
      if (id == kCtcBlank)
        throw ValidationError("ctc target contains the blank id");
      if (id < 1 || id >= n_classes)
        throw ValidationError("ctc target id " + std::to_string(id) +
                              " outside [1, " + std::to_string(n_classes) +
                              ")");
    }
    return CtcTarget{std::move(ids)};
  }

  // Expanded target l' = blank, y1, blank, y2, ..., blank; length 2L + 1.
  int expanded_length() const { return 2 * static_cast<int>(ids.size()) + 1; }
  int expanded_label(int u) const {
    return u % 2 == 0 ? kCtcBlank : ids[static_cast<std::size_t>(u) / 2];
  }

  // Shortest frame count admitting an alignment: L plus one extra frame per
  // adjacent repeated label (the separating blank is mandatory there).
  int min_frames() const {
    int repeats = 0;
    for (std::size_t i = 1; i < ids.size(); ++i)
      if (ids[i] == ids[i - 1]) ++repeats;
    return static_cast<int>(ids.size()) + repeats;
  }
};

template <typename Scalar>
struct CtcResult {
  Scalar loss = 0;                       // negative log-likelihood
  DenseMatrix<Scalar> grad_log_probs;    // dLoss / dlog p_t(k), T x C
};

// CTC negative log-likelihood with its analytic gradient, computed by the
// log-space forward-backward recursion over the expanded target. Rows of
// log_probs must each be a normalized log-distribution over C classes.
// alpha(t, u) includes the emission at t; beta(t, u) excludes it, so
// alpha + beta imports each emission exactly once and
// sum_u exp(alpha(t, u) + beta(t, u)) = P(target) at every t.
template <typename Scalar>
CtcResult<Scalar> ctc_loss(const DenseMatrix<Scalar>& log_probs,
                           const CtcTarget& target) {
  const Eigen::Index t_count = log_probs.rows();
  const Eigen::Index n_classes = log_probs.cols();
  if (t_count < 1) throw ValidationError("ctc_loss: no frames");
  if (n_classes < 2)
    throw ValidationError("ctc_loss: need blank plus at least one label");
  for (int id : target.ids)
    if (id >= n_classes)
      throw ValidationError("ctc_loss: target id " + std::to_string(id) +
                            " outside class range");
  if (t_count < target.min_frames())
    throw InfeasibleTargetError(
        "ctc_loss: target needs at least " +
        std::to_string(target.min_frames()) + " frames, got " +
        std::to_string(t_count));

  constexpr Scalar kNegInf = -std::numeric_limits<Scalar>::infinity();
  const int u_count = target.expanded_length();
  const auto label = [&](int u) { return target.expanded_label(u); };

  DenseMatrix<Scalar> alpha(t_count, u_count), beta(t_count, u_count);
  alpha.setConstant(kNegInf);
  beta.setConstant(kNegInf);

  alpha(0, 0) = log_probs(0, kCtcBlank);
  if (u_count > 1) alpha(0, 1) = log_probs(0, label(1));
  for (Eigen::Index t = 1; t < t_count; ++t)
    for (int u = 0; u < u_count; ++u) {
      Scalar a = alpha(t - 1, u);
      if (u >= 1) a = detail::log_sum_exp(a, alpha(t - 1, u - 1));
      // The skip over a blank is legal only between distinct labels.
      if (u >= 2 && label(u) != kCtcBlank && label(u) != label(u - 2))
        a = detail::log_sum_exp(a, alpha(t - 1, u - 2));
      alpha(t, u) = a + log_probs(t, label(u));
    }

  beta(t_count - 1, u_count - 1) = 0;
  if (u_count > 1) beta(t_count - 1, u_count - 2) = 0;
  for (Eigen::Index t = t_count - 2; t >= 0; --t)
    for (int u = u_count - 1; u >= 0; --u) {
      Scalar b = beta(t + 1, u) + log_probs(t + 1, label(u));
      if (u + 1 < u_count)
        b = detail::log_sum_exp(
            b, beta(t + 1, u + 1) + log_probs(t + 1, label(u + 1)));
      if (u + 2 < u_count && label(u + 2) != kCtcBlank &&
          label(u + 2) != label(u))
        b = detail::log_sum_exp(
            b, beta(t + 1, u + 2) + log_probs(t + 1, label(u + 2)));
      beta(t, u) = b;
    }

  Scalar log_p = alpha(t_count - 1, u_count - 1);
  if (u_count > 1)
    log_p = detail::log_sum_exp(log_p, alpha(t_count - 1, u_count - 2));
  if (log_p == kNegInf)
    throw Error("ctc_loss: zero path probability (log-probs degenerate)");

  CtcResult<Scalar> result;
  result.loss = -log_p;
  result.grad_log_probs = DenseMatrix<Scalar>::Zero(t_count, n_classes);
  for (Eigen::Index t = 0; t < t_count; ++t)
    for (int u = 0; u < u_count; ++u) {
      const Scalar joint = alpha(t, u) + beta(t, u);
      if (joint == kNegInf) continue;
      // d(-log P)/dlog p_t(k) = -sum over expanded states with label k of
      // the posterior occupancy gamma(t, u).
      result.grad_log_probs(t, label(u)) -= std::exp(joint - log_p);
    }
  return result;
}

// Wraps ctc_loss as a graph node over the first valid_len rows of a
// log-probability tensor; gradient rows past valid_len are zero.
template <typename Scalar>
Tensor<Scalar> ctc_loss_node(const Tensor<Scalar>& log_probs,
                             const CtcTarget& target, Eigen::Index valid_len) {
  if (valid_len < 1 || valid_len > log_probs.rows())
    throw ValidationError("ctc_loss_node: valid_len outside [1, T]");
  const DenseMatrix<Scalar> window =
      log_probs.value().topRows(valid_len);
  CtcResult<Scalar> result = ctc_loss(window, target);
  DenseMatrix<Scalar> grad =
      DenseMatrix<Scalar>::Zero(log_probs.rows(), log_probs.cols());
  grad.topRows(valid_len) = result.grad_log_probs;
  return custom_scalar_op(log_probs, result.loss, std::move(grad));
}

// Best path decode: per-frame argmax (ties to the lowest class id), then
// collapse repeats and strip blanks.
template <typename Scalar>
std::vector<int> greedy_decode(const DenseMatrix<Scalar>& log_probs) {
  if (log_probs.rows() < 1 || log_probs.cols() < 2)
    throw ValidationError("greedy_decode: bad shape");
  std::vector<int> out;
  int prev = -1;
  for (Eigen::Index t = 0; t < log_probs.rows(); ++t) {
    int arg = 0;
    for (Eigen::Index c = 1; c < log_probs.cols(); ++c)
      if (log_probs(t, c) > log_probs(t, arg)) arg = static_cast<int>(c);
    if (arg != prev && arg != kCtcBlank) out.push_back(arg);
    prev = arg;
  }
  return out;
}

// Prefix beam search over label prefixes, tracking per-prefix blank and
// non-blank path masses in log space. Pruning keeps beam_width prefixes by
// total mass, ties broken by lexicographically smaller prefix; the ordered
// map keeps every step deterministic.
template <typename Scalar>
std::vector<int> beam_search_decode(const DenseMatrix<Scalar>& log_probs,
                                    int beam_width) {
  if (beam_width < 1)
    throw ValidationError("beam_search_decode: beam_width must be >= 1");
  if (log_probs.rows() < 1 || log_probs.cols() < 2)
    throw ValidationError("beam_search_decode: bad shape");
  constexpr Scalar kNegInf = -std::numeric_limits<Scalar>::infinity();

  struct Mass {
    Scalar blank = -std::numeric_limits<Scalar>::infinity();
    Scalar label = -std::numeric_limits<Scalar>::infinity();
    Scalar total() const { return detail::log_sum_exp(blank, label); }
  };
  using Beam = std::map<std::vector<int>, Mass>;

  Beam beam;
  beam[{}] = Mass{0, kNegInf};

  for (Eigen::Index t = 0; t < log_probs.rows(); ++t) {
    Beam next;
    const auto add = [&](const std::vector<int>& prefix, Scalar blank,
                         Scalar label) {
      Mass& m = next[prefix];
      if (blank != kNegInf) m.blank = detail::log_sum_exp(m.blank, blank);
      if (label != kNegInf) m.label = detail::log_sum_exp(m.label, label);
    };
    for (const auto& [prefix, mass] : beam) {
      const Scalar total = mass.total();
      add(prefix, total + log_probs(t, kCtcBlank), kNegInf);
      for (int c = 1; c < static_cast<int>(log_probs.cols()); ++c) {
        const Scalar lp = log_probs(t, c);
        if (!prefix.empty() && prefix.back() == c) {
          // Repeating the last label extends only blank-terminated paths;
          // label-terminated ones collapse into the same prefix.
          add(prefix, kNegInf, mass.label + lp);
          std::vector<int> grown = prefix;
          grown.push_back(c);
          add(grown, kNegInf, mass.blank + lp);
        } else {
          std::vector<int> grown = prefix;
          grown.push_back(c);
          add(grown, kNegInf, total + lp);
        }
      }
    }

    if (static_cast<int>(next.size()) > beam_width) {
      std::vector<typename Beam::const_iterator> order;
      order.reserve(next.size());
      for (auto it = next.begin(); it != next.end(); ++it)
        order.push_back(it);
      std::sort(order.begin(), order.end(),
                [](const auto& a, const auto& b) {
                  const Scalar ta = a->second.total(), tb = b->second.total();
                  if (ta != tb) return ta > tb;
                  return a->first < b->first;
                });
      Beam pruned;
      for (int i = 0; i < beam_width; ++i)
        pruned.insert(*order[static_cast<std::size_t>(i)]);
      next = std::move(pruned);
    }
    beam = std::move(next);
  }

  const std::vector<int>* best = nullptr;
  Scalar best_total = kNegInf;
  for (const auto& [prefix, mass] : beam) {
    const Scalar total = mass.total();
    if (best == nullptr || total > best_total ||
        (total == best_total && prefix < *best)) {
      best = &prefix;
      best_total = total;
    }
  }
  return *best;
}

}  // namespace cslr
