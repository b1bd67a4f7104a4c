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

#include <map>
#include <string>
#include <vector>

#include "cslr/rng.hpp"
#include "cslr/wer.hpp"

using namespace cslr;

namespace {

// Independent oracle: top-down memoized edit distance (unit costs).
int edit_distance_oracle(const std::vector<int>& a, const std::vector<int>& b) {
  std::map<std::pair<int, int>, int> memo;
  std::function<int(int, int)> go = [&](int i, int j) -> int {
    if (i == 0) return j;
    if (j == 0) return i;
    const auto key = std::make_pair(i, j);
    if (auto it = memo.find(key); it != memo.end()) return it->second;
    int best = go(i - 1, j - 1) + (a[i - 1] == b[j - 1] ? 0 : 1);
    best = std::min(best, go(i - 1, j) + 1);
    best = std::min(best, go(i, j - 1) + 1);
    memo[key] = best;
    return best;
  };
  return go(static_cast<int>(a.size()), static_cast<int>(b.size()));
}

std::vector<int> random_sequence(Rng& rng, int max_len, int alphabet) {
  const int len = static_cast<int>(rng.uniform_int(0, max_len));
  std::vector<int> out;
  for (int i = 0; i < len; ++i)
    out.push_back(static_cast<int>(rng.uniform_int(0, alphabet - 1)));
  return out;
}

}  // namespace

TEST_CASE("hand-computed alignments") {
  using V = std::vector<std::string>;
  SUBCASE("identical sequences have zero errors") {
    const V ref{"a", "b", "c"};
    const auto r = word_error_counts(ref, ref);
    CHECK(r.errors() == 0);
    CHECK(r.ref_words == 3);
    CHECK(r.wer() == 0.0);
  }
  SUBCASE("empty hypothesis is all deletions") {
    const auto r = word_error_counts(V{"x", "y"}, V{});
    CHECK(r.deletions == 2);
    CHECK(r.substitutions == 0);
    CHECK(r.insertions == 0);
    CHECK(r.wer() == 1.0);
  }
  SUBCASE("empty reference is all insertions and flagged degenerate") {
    const auto r = word_error_counts(V{}, V{"x", "y", "z"});
    CHECK(r.insertions == 3);
    CHECK(r.ref_words == 0);
    CHECK(r.degenerate_reference);
    CHECK(r.wer() == 3.0);  // denominator floored at 1
  }
  SUBCASE("both empty is clean") {
    const auto r = word_error_counts(V{}, V{});
    CHECK(r.errors() == 0);
    CHECK_FALSE(r.degenerate_reference);
    CHECK(r.wer() == 0.0);
  }
  SUBCASE("single substitution in context") {
    const auto r = word_error_counts(V{"a", "b", "c"}, V{"a", "x", "c"});
    CHECK(r.substitutions == 1);
    CHECK(r.deletions == 0);
    CHECK(r.insertions == 0);
    CHECK(r.wer() == doctest::Approx(1.0 / 3).epsilon(1e-12));
  }
  SUBCASE("mixed edit") {
    // ref: a b c d, hyp: a x c  -> one substitution (b->x), one deletion (d)
    const auto r = word_error_counts(V{"a", "b", "c", "d"}, V{"a", "x", "c"});
    CHECK(r.substitutions == 1);
    CHECK(r.deletions == 1);
    CHECK(r.insertions == 0);
    CHECK(r.errors() == 2);
  }
}

TEST_CASE("backtrace split is deterministic: match, then substitution") {
  using V = std::vector<std::string>;
  // Swapped pair: both (S, S) and (D, I, ...) decompositions exist at
  // distance 2; the backtrace preference pins substitutions.
  const auto r = word_error_counts(V{"a", "b"}, V{"b", "a"});
  CHECK(r.errors() == 2);
  CHECK(r.substitutions == 2);
  CHECK(r.deletions == 0);
  CHECK(r.insertions == 0);
  // Repeated runs agree exactly.
  for (int i = 0; i < 5; ++i) {
    const auto again = word_error_counts(V{"a", "b"}, V{"b", "a"});
    CHECK(again.substitutions == r.substitutions);
    CHECK(again.deletions == r.deletions);
    CHECK(again.insertions == r.insertions);
  }
}

TEST_CASE("S+D+I equals the memoized oracle on 1000 random pairs") {
  Rng rng(201);
  for (int trial = 0; trial < 1000; ++trial) {
    const int alphabet = 1 + static_cast<int>(rng.uniform_int(0, 7));
    const auto ref = random_sequence(rng, 12, alphabet);
    const auto hyp = random_sequence(rng, 12, alphabet);
    const auto r = word_error_counts(ref, hyp);
    CAPTURE(trial);
    CHECK(r.errors() == edit_distance_oracle(ref, hyp));
    CHECK(r.ref_words == static_cast<std::int64_t>(ref.size()));
  }
}

TEST_CASE("edit distance properties hold on random triples") {
  Rng rng(202);
  for (int trial = 0; trial < 300; ++trial) {
    const auto a = random_sequence(rng, 10, 4);
    const auto b = random_sequence(rng, 10, 4);
    const auto c = random_sequence(rng, 10, 4);
    const auto d_ab = word_error_counts(a, b).errors();
    const auto d_ba = word_error_counts(b, a).errors();
    const auto d_bc = word_error_counts(b, c).errors();
    const auto d_ac = word_error_counts(a, c).errors();
    CAPTURE(trial);
    // Symmetry of the distance (split differs; total does not).
    CHECK(d_ab == d_ba);
    // Triangle inequality.
    CHECK(d_ac <= d_ab + d_bc);
    // Length bounds.
    const auto diff = static_cast<std::int64_t>(
        std::max(a.size(), b.size()) - std::min(a.size(), b.size()));
    CHECK(d_ab >= diff);
    CHECK(d_ab <=
          static_cast<std::int64_t>(std::max(a.size(), b.size())));
  }
}

TEST_CASE("published error tally maps to the expected rate") {
  // 1474 total errors over 18017 reference words.
  WerBreakdown r;
  r.substitutions = 700;
  r.deletions = 500;
  r.insertions = 274;
  r.ref_words = 18017;
  CHECK(r.errors() == 1474);
  CHECK(r.wer() == 1474.0 / 18017.0);
  CHECK(r.wer() == doctest::Approx(0.0818).epsilon(2e-3));
}

TEST_CASE("corpus WER pools counts, not per-sample rates") {
  using V = std::vector<int>;
  std::vector<std::pair<V, V>> pairs;
  // Pair 1: 1 error over 1 word (rate 1.0). Pair 2: 1 error over 9 words.
  pairs.push_back({V{1}, V{2}});
  pairs.push_back({V{1, 2, 3, 4, 5, 6, 7, 8, 9}, V{1, 2, 3, 4, 5, 6, 7, 8}});
  const auto total = corpus_word_error(pairs);
  CHECK(total.ref_words == 10);
  CHECK(total.errors() == 2);
  CHECK(total.wer() == doctest::Approx(0.2).epsilon(1e-12));
  // Mean of rates would be (1.0 + 1/9) / 2, which is different.
  CHECK(total.wer() != doctest::Approx((1.0 + 1.0 / 9) / 2).epsilon(1e-6));
  // Counts are the exact sums of the per-pair breakdowns.
  const auto one = word_error_counts(pairs[0].first, pairs[0].second);
  const auto two = word_error_counts(pairs[1].first, pairs[1].second);
  CHECK(total.substitutions == one.substitutions + two.substitutions);
  CHECK(total.deletions == one.deletions + two.deletions);
  CHECK(total.insertions == one.insertions + two.insertions);

  CHECK_THROWS_AS(corpus_word_error(std::vector<std::pair<V, V>>{}),
                  ValidationError);
}

TEST_CASE("oov report counts reference tokens missing from the vocabulary") {
  const GlossVocabulary vocab(std::vector<std::string>{"alpha", "beta"});
  const std::vector<std::vector<std::string>> refs{
      {"alpha", "gamma", "beta"}, {"gamma", "delta"}, {"beta"}};
  const auto report = oov_report(vocab, refs);
  CHECK(report.total == 3);
  CHECK(report.counts.at("gamma") == 2);
  CHECK(report.counts.at("delta") == 1);
  CHECK(report.counts.count("alpha") == 0);
  CHECK(report.counts.count("beta") == 0);

  const auto clean = oov_report(vocab, {{"alpha"}, {"beta", "alpha"}});
  CHECK(clean.total == 0);
  CHECK(clean.counts.empty());
}
