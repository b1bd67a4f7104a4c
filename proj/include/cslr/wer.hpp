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
#include <map>
#include <vector>

#include "cslr/data.hpp"
#include "cslr/errors.hpp"

namespace cslr {

// Levenshtein alignment counts at word level. WER = (S + D + I) / N with
// N = reference length; an empty reference is scored against max(N, 1) and
// flagged so callers can surface the degenerate case.
struct WerBreakdown {
  std::int64_t substitutions = 0;
  std::int64_t deletions = 0;
  std::int64_t insertions = 0;
  std::int64_t ref_words = 0;
  bool degenerate_reference = false;  // N == 0 but errors were counted

  std::int64_t errors() const { return substitutions + deletions + insertions; }
  double wer() const {
    return static_cast<double>(errors()) /
           static_cast<double>(std::max<std::int64_t>(ref_words, 1));
  }
};

// Minimum-edit alignment via the standard dynamic program. When several
// alignments reach the minimum, backtrace prefers match, then substitution,
// then deletion, then insertion, so the breakdown is deterministic.
template <typename Token>
WerBreakdown word_error_counts(const std::vector<Token>& reference,
                               const std::vector<Token>& hypothesis) {
  const std::size_t n = reference.size(), m = hypothesis.size();
  std::vector<std::vector<std::int32_t>> cost(
      n + 1, std::vector<std::int32_t>(m + 1));
  for (std::size_t i = 0; i <= n; ++i) cost[i][0] = static_cast<std::int32_t>(i);
  for (std::size_t j = 0; j <= m; ++j) cost[0][j] = static_cast<std::int32_t>(j);
  for (std::size_t i = 1; i <= n; ++i)
    for (std::size_t j = 1; j <= m; ++j) {
      const std::int32_t match =
          cost[i - 1][j - 1] + (reference[i - 1] == hypothesis[j - 1] ? 0 : 1);
      cost[i][j] = std::min({match, cost[i - 1][j] + 1, cost[i][j - 1] + 1});
    }

  WerBreakdown out;
  out.ref_words = static_cast<std::int64_t>(n);
  std::size_t i = n, j = m;
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0 && cost[i][j] == cost[i - 1][j - 1] &&
        reference[i - 1] == hypothesis[j - 1]) {
      --i;
      --j;
    } else if (i > 0 && j > 0 && cost[i][j] == cost[i - 1][j - 1] + 1) {
      ++out.substitutions;
      --i;
      --j;
    } else if (i > 0 && cost[i][j] == cost[i - 1][j] + 1) {
      ++out.deletions;
      --i;
    } else {
      ++out.insertions;
      --j;
    }
  }
  out.degenerate_reference = (n == 0 && out.errors() > 0);
  return out;
}

// Corpus WER pools the counts first (sum of errors over sum of reference
// lengths), which is not the mean of per-sample rates.
template <typename Token>
WerBreakdown corpus_word_error(
    const std::vector<std::pair<std::vector<Token>, std::vector<Token>>>&
        ref_hyp_pairs) {
  if (ref_hyp_pairs.empty())
    throw ValidationError("corpus_word_error: no pairs");
  WerBreakdown total;
  for (const auto& [ref, hyp] : ref_hyp_pairs) {
    const WerBreakdown one = word_error_counts(ref, hyp);
    total.substitutions += one.substitutions;
    total.deletions += one.deletions;
    total.insertions += one.insertions;
    total.ref_words += one.ref_words;
    total.degenerate_reference |= one.degenerate_reference;
  }
  return total;
}

// Reference tokens absent from the vocabulary, with occurrence counts.
struct OovReport {
  std::map<std::string, int> counts;
  int total = 0;
};

inline OovReport oov_report(const GlossVocabulary& vocab,
                            const std::vector<std::vector<std::string>>& refs) {
  OovReport report;
  for (const auto& ref : refs)
    for (const auto& token : ref)
      if (!vocab.contains(token)) {
        ++report.counts[token];
        ++report.total;
      }
  return report;
}

}  // namespace cslr
