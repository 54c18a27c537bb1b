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

// ROUGE-N and summary-level ROUGE-L (LCS). Texts are lowercased and split
// on whitespace; Porter stemming is optional.

#pragma once

#include <algorithm>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "clinsum/errors.hpp"
#include "clinsum/porter_stemmer.hpp"
#include "clinsum/text.hpp"

namespace clinsum {

struct PrfScore {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;

  static PrfScore from_pr(double p, double r) {
    return {p, r, (p + r) == 0.0 ? 0.0 : 2.0 * p * r / (p + r)};
  }
};

struct RougeScore {
  PrfScore r1;
  PrfScore r2;
  PrfScore rl;
};

struct RougeOptions {
  bool stem = false;
};

inline std::vector<std::string> rouge_tokens(std::string_view text,
                                             const RougeOptions& opt = {}) {
  auto toks = split_whitespace(to_lower(text));
  if (opt.stem)
    for (auto& t : toks) t = PorterStemmer::stem(t);
  return toks;
}

/// Clipped n-gram overlap over pre-tokenized sequences.
inline PrfScore rouge_n_tokens(std::span<const std::string> cand,
                               std::span<const std::string> ref, std::size_t n) {
  if (n < 1) throw ArgumentError("rouge", "n must be at least 1");
  if (cand.size() < n || ref.size() < n) return {};
  auto count = [n](std::span<const std::string> toks) {
    std::map<std::vector<std::string>, std::size_t> grams;
    for (std::size_t i = 0; i + n <= toks.size(); ++i)
      ++grams[std::vector<std::string>(toks.begin() + i, toks.begin() + i + n)];
    return grams;
  };
  const auto cg = count(cand);
  const auto rg = count(ref);
  std::size_t overlap = 0;
  for (const auto& [g, c] : cg)
    if (auto it = rg.find(g); it != rg.end()) overlap += std::min(c, it->second);
  const double p = static_cast<double>(overlap) / static_cast<double>(cand.size() - n + 1);
  const double r = static_cast<double>(overlap) / static_cast<double>(ref.size() - n + 1);
  return PrfScore::from_pr(p, r);
}

inline std::size_t lcs_length(std::span<const std::string> a,
                              std::span<const std::string> b) {
  if (a.empty() || b.empty()) return 0;
  if (a.size() < b.size()) std::swap(a, b);
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j)
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

inline PrfScore rouge_l_tokens(std::span<const std::string> cand,
                               std::span<const std::string> ref) {
  if (cand.empty() || ref.empty()) return {};
  const double lcs = static_cast<double>(lcs_length(cand, ref));
  return PrfScore::from_pr(lcs / cand.size(), lcs / ref.size());
}

inline PrfScore rouge_n(std::string_view candidate, std::string_view reference,
                        std::size_t n, const RougeOptions& opt = {}) {
  return rouge_n_tokens(rouge_tokens(candidate, opt), rouge_tokens(reference, opt), n);
}

inline PrfScore rouge_l(std::string_view candidate, std::string_view reference,
                        const RougeOptions& opt = {}) {
  return rouge_l_tokens(rouge_tokens(candidate, opt), rouge_tokens(reference, opt));
}

inline RougeScore rouge_all(std::string_view candidate, std::string_view reference,
                            const RougeOptions& opt = {}) {
  const auto c = rouge_tokens(candidate, opt);
  const auto r = rouge_tokens(reference, opt);
  return {rouge_n_tokens(c, r, 1), rouge_n_tokens(c, r, 2), rouge_l_tokens(c, r)};
}

/// Arithmetic mean of per-pair scores, component by component.
inline RougeScore evaluate_corpus(std::span<const std::string> predictions,
                                  std::span<const std::string> references,
                                  const RougeOptions& opt = {}) {
  if (predictions.size() != references.size())
    throw ArgumentError("rouge", "got " + std::to_string(predictions.size()) +
                                     " predictions for " +
                                     std::to_string(references.size()) + " references");
  RougeScore mean;
  if (predictions.empty()) return mean;
  auto add = [](PrfScore& acc, const PrfScore& s) {
    acc.precision += s.precision;
    acc.recall += s.recall;
    acc.f1 += s.f1;
  };
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const auto s = rouge_all(predictions[i], references[i], opt);
    add(mean.r1, s.r1);
    add(mean.r2, s.r2);
    add(mean.rl, s.rl);
  }
  const double n = static_cast<double>(predictions.size());
  for (PrfScore* s : {&mean.r1, &mean.r2, &mean.rl}) {
    s->precision /= n;
    s->recall /= n;
    s->f1 /= n;
  }
  return mean;
}

}  // namespace clinsum
