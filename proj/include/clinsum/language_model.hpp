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

#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "clinsum/errors.hpp"
#include "clinsum/rng.hpp"
#include "clinsum/text.hpp"

namespace clinsum {

using TokenId = std::uint32_t;

/// Next-token interface every generation backend implements. Implementations
/// must be safe for concurrent const calls.
class LanguageModel {
 public:
  virtual ~LanguageModel() = default;

  virtual std::size_t vocab_size() const = 0;
  virtual std::vector<TokenId> encode(std::string_view text) const = 0;
  virtual std::string_view token_text(TokenId id) const = 0;

  /// Probability of each vocabulary entry following `prefix`. Must be
  /// non-negative and sum to 1 within 1e-9.
  virtual std::vector<double> next_token_distribution(
      std::span<const TokenId> prefix) const = 0;

  /// Token that ends generation without being emitted, if the model has one.
  virtual std::optional<TokenId> end_token() const { return std::nullopt; }
};

inline std::string detokenize(const LanguageModel& lm, std::span<const TokenId> ids) {
  std::string out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i) out += ' ';
    out += lm.token_text(ids[i]);
  }
  return out;
}

struct BigramLMOptions {
  double smoothing = 0.05;     // additive mass per vocabulary entry
  double prompt_weight = 0.3;  // mixture weight of the prefix unigram
  double cue_weight = 0.6;     // mixture weight of cue-word biases
  std::uint64_t seed = 0;      // jitters the smoothing mass per token
};

/// Toy backend: a smoothed bigram model over word tokens, mixed with
///   - a copy distribution over the tokens that followed earlier occurrences
///     of the last token (the prefix unigram when there are none), so the
///     source sentence in the prompt steers the continuation, and
///   - optional cue biases: when a cue word appears anywhere in the prefix,
///     a fixed distribution is mixed in.
///
///   p(t | prefix) = wb * bigram(t | last) + wp * copy(t | prefix)
///                 + wc * mean(cue_bias(t) for cues in prefix)
///
/// Absent components drop out and the remaining weights are renormalized.
/// Token 0 is <unk> and never receives probability.
class BigramLM : public LanguageModel {
 public:
  static constexpr TokenId kUnk = 0;

  static BigramLM train(std::span<const std::string> texts, BigramLMOptions opt = {}) {
    if (opt.prompt_weight < 0 || opt.cue_weight < 0 ||
        opt.prompt_weight + opt.cue_weight >= 1.0 || opt.smoothing <= 0)
      throw ConfigError("augmentation", "invalid bigram LM mixture weights");
    BigramLM lm;
    lm.opt_ = opt;
    lm.words_.push_back("<unk>");
    std::vector<std::vector<TokenId>> encoded;
    for (const auto& t : texts) {
      std::vector<TokenId> ids;
      for (const auto& off : tokenize_words(t)) ids.push_back(lm.intern(t.substr(off.begin, off.size())));
      encoded.push_back(std::move(ids));
    }
    const std::size_t v = lm.words_.size();
    lm.rows_.assign(v, {});
    lm.row_totals_.assign(v, 0);
    for (const auto& ids : encoded) {
      for (std::size_t i = 1; i < ids.size(); ++i) {
        auto& row = lm.rows_[ids[i - 1]];
        ++row[ids[i]];
        ++lm.row_totals_[ids[i - 1]];
      }
    }
    Rng rng(derive_seed(opt.seed, "bigram-lm", "jitter"));
    lm.jitter_.assign(v, 0.0);
    for (std::size_t t = 1; t < v; ++t) lm.jitter_[t] = 0.5 + rng.uniform();
    lm.jitter_sum_ = std::accumulate(lm.jitter_.begin(), lm.jitter_.end(), 0.0);
    return lm;
  }

  /// Whenever `cue` occurs in a prefix, mix in `bias` (word -> weight,
  /// normalized here). Unknown words in `bias` are ignored.
  void add_cue(std::string_view cue, std::span<const std::pair<std::string, double>> bias) {
    auto cue_id = lookup(cue);
    if (!cue_id) throw ConfigError("augmentation", "cue word not in vocabulary: " + std::string(cue));
    std::vector<double> dist(words_.size(), 0.0);
    double total = 0;
    for (const auto& [w, weight] : bias) {
      if (auto id = lookup(w); id && weight > 0) {
        dist[*id] += weight;
        total += weight;
      }
    }
    if (total <= 0) throw ConfigError("augmentation", "cue bias has no known words");
    for (auto& d : dist) d /= total;
    cues_[*cue_id] = std::move(dist);
  }

  std::size_t vocab_size() const override { return words_.size(); }

  std::vector<TokenId> encode(std::string_view text) const override {
    std::vector<TokenId> out;
    for (const auto& off : tokenize_words(text))
      out.push_back(lookup(text.substr(off.begin, off.size())).value_or(kUnk));
    return out;
  }

  std::string_view token_text(TokenId id) const override { return words_.at(id); }

  std::optional<TokenId> lookup(std::string_view word) const {
    auto it = index_.find(std::string(word));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  std::vector<double> next_token_distribution(std::span<const TokenId> prefix) const override {
    const std::size_t v = words_.size();
    std::vector<double> bigram(v, 0.0);
    const TokenId last = prefix.empty() ? kUnk : prefix.back();
    const double denom = static_cast<double>(row_totals_.at(last)) + opt_.smoothing * jitter_sum_;
    for (std::size_t t = 1; t < v; ++t) bigram[t] = opt_.smoothing * jitter_[t] / denom;
    for (const auto& [t, c] : rows_[last])
      if (t != kUnk) bigram[t] += c / denom;

    // Copy component: tokens that followed earlier occurrences of `last`,
    // or the plain prefix unigram when `last` has no earlier occurrence.
    std::vector<double> unigram(v, 0.0), copy(v, 0.0);
    double n_prefix = 0, n_copy = 0;
    std::vector<const std::vector<double>*> active_cues;
    for (std::size_t i = 0; i < prefix.size(); ++i) {
      const TokenId t = prefix[i];
      if (t == kUnk || t >= v) continue;
      unigram[t] += 1;
      n_prefix += 1;
      if (i > 0 && i + 1 < prefix.size() && prefix[i - 1] == last) {
        copy[t] += 1;
        n_copy += 1;
      }
      if (auto it = cues_.find(t); it != cues_.end() &&
          std::find(active_cues.begin(), active_cues.end(), &it->second) == active_cues.end())
        active_cues.push_back(&it->second);
    }
    if (n_copy > 0) {
      unigram.swap(copy);
      n_prefix = n_copy;
    }

    double wb = 1.0 - opt_.prompt_weight - opt_.cue_weight;
    double wp = n_prefix > 0 ? opt_.prompt_weight : 0.0;
    double wc = active_cues.empty() ? 0.0 : opt_.cue_weight;
    const double wsum = wb + wp + wc;
    wb /= wsum;
    wp /= wsum;
    wc /= wsum;

    std::vector<double> out(v, 0.0);
    for (std::size_t t = 1; t < v; ++t) {
      double p = wb * bigram[t];
      if (wp > 0) p += wp * unigram[t] / n_prefix;
      if (wc > 0) {
        double c = 0;
        for (const auto* cue : active_cues) c += (*cue)[t];
        p += wc * c / static_cast<double>(active_cues.size());
      }
      out[t] = p;
    }
    const double total = std::accumulate(out.begin(), out.end(), 0.0);
    for (auto& p : out) p /= total;
    return out;
  }

 private:
  TokenId intern(std::string_view w) {
    auto [it, inserted] = index_.emplace(std::string(w), static_cast<TokenId>(words_.size()));
    if (inserted) words_.emplace_back(w);
    return it->second;
  }

  BigramLMOptions opt_;
  std::vector<std::string> words_;
  std::unordered_map<std::string, TokenId> index_;
  std::vector<std::unordered_map<TokenId, std::uint32_t>> rows_;
  std::vector<std::uint64_t> row_totals_;
  std::vector<double> jitter_;
  double jitter_sum_ = 0;
  std::unordered_map<TokenId, std::vector<double>> cues_;
};

}  // namespace clinsum
