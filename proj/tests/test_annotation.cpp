//
// Copyright 2026 The Clinsum Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "clinsum/annotation.hpp"
#include "clinsum/text.hpp"
#include "test_support.hpp"

namespace clinsum {
namespace {

using testing::TempDir;

// Multiset of character trigrams built with substr and a map.
std::map<std::string, int> oracle_grams(const std::string& s) {
  std::map<std::string, int> g;
  if (s.empty()) return g;
  if (s.size() < 3) {
    g[s] = 1;
    return g;
  }
  for (std::size_t i = 0; i + 3 <= s.size(); ++i) ++g[s.substr(i, 3)];
  return g;
}

double oracle_similarity(const std::string& a, const std::string& b) {
  if (a == b) return 1.0;
  auto ga = oracle_grams(a), gb = oracle_grams(b);
  int inter = 0, uni = 0;
  std::map<std::string, std::pair<int, int>> both;
  for (auto& [k, v] : ga) both[k].first = v;
  for (auto& [k, v] : gb) both[k].second = v;
  for (auto& [k, v] : both) {
    inter += std::min(v.first, v.second);
    uni += std::max(v.first, v.second);
  }
  if (uni == 0) return 0.0;
  const double j = static_cast<double>(inter) / uni;
  return j >= 1.0 ? std::nextafter(1.0, 0.0) : j;
}

std::string random_string(Rng& rng, std::size_t max_len) {
  static const std::string alphabet = "abcde ";
  std::string s;
  const std::size_t n = rng.below(max_len + 1);
  for (std::size_t i = 0; i < n; ++i) s += alphabet[rng.below(alphabet.size())];
  return s;
}

TEST(TrigramSimilarity, MatchesOracleOnRandomStrings) {
  Rng rng(11);
  for (int i = 0; i < 5000; ++i) {
    const auto a = random_string(rng, 9), b = random_string(rng, 9);
    EXPECT_DOUBLE_EQ(trigram_similarity(a, b), oracle_similarity(a, b)) << a << " | " << b;
  }
}

TEST(TrigramSimilarity, RangeSymmetryAndIdentity) {
  Rng rng(12);
  for (int i = 0; i < 3000; ++i) {
    const auto a = random_string(rng, 12), b = random_string(rng, 12);
    const double s = trigram_similarity(a, b);
    EXPECT_GE(s, 0.0);
    EXPECT_LE(s, 1.0);
    EXPECT_EQ(s, trigram_similarity(b, a));
    EXPECT_EQ(s == 1.0, a == b) << a << " | " << b;
  }
}

TEST(TrigramSimilarity, PermutedGramsStayBelowOne) {
  // Same trigram multiset, different strings.
  EXPECT_LT(trigram_similarity("abab", "baba") , 1.0);
  EXPECT_LT(trigram_similarity("aaaa", "aaa"), 1.0);
}

TEST(NgramSimilarity, NormalizesCaseAndRejectsEmpty) {
  const std::vector<std::string> a = {"Heart", "Failure"}, b = {"heart", "failure"};
  EXPECT_EQ(ngram_similarity(a, b), 1.0);
  const std::vector<std::string> c = {"heart", "failures"};
  EXPECT_GT(ngram_similarity(a, c), 0.7);
  EXPECT_LT(ngram_similarity(a, c), 1.0);
  EXPECT_THROW(ngram_similarity({}, b), ArgumentError);
}

TEST(TermDictionary, NormalizesAndDeduplicates) {
  const std::vector<std::string> terms = {"Heart  Failure", "heart failure", "", "CHF"};
  auto d = TermDictionary::from_terms(terms, "umls");
  EXPECT_EQ(d.size(), 2u);
  EXPECT_TRUE(d.contains("heart failure"));
  EXPECT_TRUE(d.contains("chf"));
  const std::vector<std::string> none = {"", "  "};
  EXPECT_THROW(TermDictionary::from_terms(none, "x"), ConfigError);
}

TEST(TermDictionary, BestMatchAgreesWithLinearScan) {
  Rng rng(21);
  std::vector<std::string> terms;
  for (int i = 0; i < 300; ++i) {
    auto s = random_string(rng, 10);
    if (!trim(s).empty()) terms.push_back(s);
  }
  const auto dict = TermDictionary::from_terms(terms, "random");
  for (double threshold : {0.3, 0.5, 0.7, 0.9}) {
    for (int q = 0; q < 400; ++q) {
      auto query = join(normalized_words(random_string(rng, 10)), " ");
      if (query.empty()) continue;
      std::optional<std::pair<std::size_t, double>> expect;
      for (std::size_t e = 0; e < dict.size(); ++e) {
        const double s = oracle_similarity(query, dict.entries()[e].text);
        if (s + 1e-12 < threshold) continue;
        if (!expect || s > expect->second) expect = std::pair{e, s};
      }
      const auto got = dict.best_match(query, threshold);
      ASSERT_EQ(got.has_value(), expect.has_value()) << query << " t=" << threshold;
      if (got) {
        EXPECT_EQ(got->entry, expect->first) << query;
        EXPECT_DOUBLE_EQ(got->score, expect->second);
      }
    }
  }
}

TEST(Annotate, ThresholdOneMatchesExactWindowScan) {
  const auto dict = TermDictionary::from_terms(testing::umls_terms(), "umls");
  Rng rng(5);
  for (int trial = 0; trial < 300; ++trial) {
    const auto sentence = testing::synthetic_sentence(rng);
    const auto tokens = token_strings(sentence, tokenize_words(sentence));
    // Oracle: exact windows, then longest-first, leftmost-first selection.
    std::vector<std::pair<std::size_t, std::size_t>> windows;
    for (std::size_t b = 0; b < tokens.size(); ++b)
      for (std::size_t e = b + 1; e <= std::min(tokens.size(), b + 6); ++e) {
        std::vector<std::string> w(tokens.begin() + b, tokens.begin() + e);
        if (dict.contains(normalize_tokens(w))) windows.push_back({b, e});
      }
    std::stable_sort(windows.begin(), windows.end(), [](auto x, auto y) {
      if (x.second - x.first != y.second - y.first) return x.second - x.first > y.second - y.first;
      return x.first < y.first;
    });
    std::vector<std::pair<std::size_t, std::size_t>> chosen;
    for (auto w : windows)
      if (std::none_of(chosen.begin(), chosen.end(),
                       [&](auto c) { return w.first < c.second && c.first < w.second; }))
        chosen.push_back(w);
    std::sort(chosen.begin(), chosen.end());

    const auto spans = annotate(tokens, dict, 1.0, 6);
    ASSERT_EQ(spans.size(), chosen.size()) << sentence;
    for (std::size_t i = 0; i < spans.size(); ++i) {
      EXPECT_EQ(spans[i].start, chosen[i].first);
      EXPECT_EQ(spans[i].end, chosen[i].second);
      EXPECT_EQ(spans[i].score, 1.0);
    }
  }
}

TEST(Annotate, SpansAreOrderedNonOverlappingAndAboveThreshold) {
  const auto dict = TermDictionary::from_terms(testing::umls_terms(), "umls");
  Rng rng(6);
  for (int trial = 0; trial < 300; ++trial) {
    const auto sentence = testing::synthetic_sentence(rng);
    const auto tokens = token_strings(sentence, tokenize_words(sentence));
    const auto spans = annotate(tokens, dict, 0.6, 6);
    for (std::size_t i = 0; i < spans.size(); ++i) {
      EXPECT_LT(spans[i].start, spans[i].end);
      EXPECT_LE(spans[i].end, tokens.size());
      EXPECT_LE(spans[i].length(), 6u);
      EXPECT_GE(spans[i].score, 0.6);
      if (i) { EXPECT_LE(spans[i - 1].end, spans[i].start); }
    }
  }
}

TEST(Annotate, ApproximateMatchFindsMisspelling) {
  const auto dict = TermDictionary::from_terms(testing::umls_terms(), "umls");
  const std::vector<std::string> tokens = {"history", "of", "hypertensoin", "noted"};
  const auto spans = annotate(tokens, dict, 0.5, 6);
  ASSERT_EQ(spans.size(), 1u);
  EXPECT_EQ(spans[0].start, 2u);
  EXPECT_EQ(spans[0].surface, "hypertensoin");
  EXPECT_LT(spans[0].score, 1.0);
  EXPECT_TRUE(annotate(tokens, dict, 1.0, 6).empty());
}

TEST(Annotate, RejectsBadArguments) {
  const auto dict = TermDictionary::from_terms(testing::umls_terms(), "umls");
  const std::vector<std::string> tokens = {"edema"};
  EXPECT_THROW(annotate(tokens, dict, 0.0, 6), ArgumentError);
  EXPECT_THROW(annotate(tokens, dict, 1.5, 6), ArgumentError);
  EXPECT_THROW(annotate(tokens, dict, 0.7, 0), ArgumentError);
  EXPECT_TRUE(annotate(std::vector<std::string>{}, dict, 0.7, 6).empty());
}

TEST(ResolveOverlaps, PrefersScoreThenLengthThenStart) {
  std::vector<EntitySpan> spans = {
      {0, 2, "a b", Channel::kUmls, 0.8},
      {1, 4, "b c d", Channel::kUmls, 0.8},
      {3, 5, "d e", Channel::kUmls, 0.95},
      {6, 7, "g", Channel::kUmls, 0.7},
  };
  const auto kept = resolve_overlaps(spans);
  ASSERT_EQ(kept.size(), 3u);
  EXPECT_EQ(kept[0].start, 0u);
  EXPECT_EQ(kept[1].start, 3u);
  EXPECT_EQ(kept[2].start, 6u);
}

TEST(StandoffIndex, ParsesAndReportsLineNumbers) {
  const std::vector<std::string> lines = {"# comment", "d1\t0\t1\t3\tproblem", "", "d1\t2\t0\t1\ttest"};
  const auto idx = StandoffIndex::parse(lines, "f.tsv");
  ASSERT_EQ(idx.lookup("d1", 0).size(), 1u);
  EXPECT_EQ(idx.lookup("d1", 0)[0].end, 3u);
  EXPECT_TRUE(idx.lookup("d1", 1).empty());
  EXPECT_TRUE(idx.lookup("d2", 0).empty());

  const std::vector<std::string> bad = {"d1\t0\t1\tproblem"};
  try {
    StandoffIndex::parse(bad, "f.tsv");
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("f.tsv:1"), std::string::npos);
  }
  const std::vector<std::string> inverted = {"d1\t0\t3\t1\tproblem"};
  EXPECT_THROW(StandoffIndex::parse(inverted), FormatError);
}

TEST(AnnotateSentence, UsesBothChannelsAndKeepsOriginalSurface) {
  const auto umls = TermDictionary::from_terms(testing::umls_terms(), "umls");
  const std::vector<std::string> lines = {"doc\t0\t0\t2\tproblem", "doc\t0\t5\t99\tproblem"};
  const I2b2Source standoff = std::make_shared<const StandoffIndex>(StandoffIndex::parse(lines));
  const auto s = annotate_sentence("Worsening dyspnea with Heart Failure.", 10, "doc", 0, umls, standoff);
  EXPECT_EQ(s.offset, 10u);
  ASSERT_EQ(s.umls_spans.size(), 1u);
  EXPECT_EQ(s.umls_spans[0].surface, "Heart Failure");
  EXPECT_EQ(s.span_text(s.umls_spans[0].start, s.umls_spans[0].end), "Heart Failure");
  ASSERT_EQ(s.i2b2_spans.size(), 1u);  // the out-of-range record is dropped
  EXPECT_EQ(s.i2b2_spans[0].channel, Channel::kI2b2);
  EXPECT_EQ(s.i2b2_spans[0].surface, "Worsening dyspnea");

  const I2b2Source dict = std::make_shared<const TermDictionary>(
      TermDictionary::from_terms(testing::i2b2_terms(), "i2b2"));
  const auto t = annotate_sentence("Worsening dyspnea with Heart Failure.", 0, "doc", 0, umls, dict);
  ASSERT_EQ(t.i2b2_spans.size(), 1u);
  EXPECT_EQ(t.i2b2_spans[0].surface, "Worsening dyspnea");
}

TEST(LoadI2b2Source, ChoosesBackendByPrefixAndExtension) {
  TempDir dir;
  testing::write_text(dir / "terms.txt", "fevers\nvolume overload\n");
  testing::write_text(dir / "spans.tsv", "d\t0\t0\t1\tproblem\n");
  EXPECT_TRUE(std::holds_alternative<std::shared_ptr<const TermDictionary>>(
      load_i2b2_source((dir / "terms.txt").string())));
  EXPECT_TRUE(std::holds_alternative<std::shared_ptr<const StandoffIndex>>(
      load_i2b2_source((dir / "spans.tsv").string())));
  EXPECT_TRUE(std::holds_alternative<std::shared_ptr<const TermDictionary>>(
      load_i2b2_source("dict:" + (dir / "spans.tsv").string())));
  EXPECT_TRUE(std::holds_alternative<std::shared_ptr<const StandoffIndex>>(load_i2b2_source("")));
  EXPECT_THROW(load_i2b2_source((dir / "missing.txt").string()), IoError);
}

TEST(Tokenizer, OffsetsCoverEveryNonSpaceByte) {
  Rng rng(3);
  for (int i = 0; i < 500; ++i) {
    const auto doc = testing::synthetic_document(rng, 3);
    const auto toks = tokenize_words(doc);
    std::string rebuilt(doc.size(), ' ');
    std::size_t prev_end = 0;
    for (const auto& t : toks) {
      ASSERT_GE(t.begin, prev_end);
      ASSERT_LT(t.begin, t.end);
      for (std::size_t k = prev_end; k < t.begin; ++k) ASSERT_TRUE(is_space(doc[k]));
      rebuilt.replace(t.begin, t.size(), doc.substr(t.begin, t.size()));
      prev_end = t.end;
    }
    for (std::size_t k = 0; k < doc.size(); ++k)
      if (!is_space(doc[k])) { ASSERT_EQ(rebuilt[k], doc[k]); }
  }
  const std::string s = "s/p CABG, 2.5 mg o'clock non-tender.";
  EXPECT_EQ(token_strings(s, tokenize_words(s)),
            (std::vector<std::string>{"s/p", "CABG", ",", "2.5", "mg", "o'clock", "non-tender", "."}));
}

}  // namespace
}  // namespace clinsum
