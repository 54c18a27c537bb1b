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

// Similarity scoring and top-fraction filtering of generated pairs.
//
// The primary scorer is BERTScore-style greedy matching: every candidate
// token is matched to its most similar reference token (and vice versa)
// under a pluggable token embedding. A second scorer slot defaults to
// character-trigram Jaccard. Scores are combined by a weighted mean and
// only the best keep_fraction of pairs survive.

#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <memory>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "clinsum/annotation.hpp"
#include "clinsum/augmentation.hpp"
#include "clinsum/errors.hpp"
#include "clinsum/rng.hpp"
#include "clinsum/text.hpp"

namespace clinsum {

// ---------------------------------------------------------------------------
// Embeddings

inline double cosine(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ArgumentError("similarity", "embedding dimensions differ");
  double dot = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0 || nb == 0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

/// Maps a token to a fixed-dimension vector. The same token always yields
/// the same vector. Implementations must be safe for concurrent const use.
class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  virtual std::size_t dimension() const = 0;
  virtual std::vector<double> embed(std::string_view token) const = 0;

  /// Cosine similarity of two tokens' embeddings.
  virtual double similarity(std::string_view a, std::string_view b) const {
    return cosine(embed(a), embed(b));
  }
};

/// One-hot vectors over an open vocabulary: similarity is 1 for identical
/// tokens and 0 otherwise. embed() materializes vectors for the tokens given
/// at construction; everything else shares a final out-of-vocabulary slot,
/// so use similarity() rather than comparing embed() outputs.
class OneHotEmbedder : public EmbeddingProvider {
 public:
  OneHotEmbedder() = default;
  explicit OneHotEmbedder(std::span<const std::string> vocabulary) {
    for (const auto& w : vocabulary) index_.emplace(w, index_.size());
  }

  std::size_t dimension() const override { return index_.size() + 1; }

  std::vector<double> embed(std::string_view token) const override {
    std::vector<double> v(dimension(), 0.0);
    auto it = index_.find(std::string(token));
    v[it == index_.end() ? index_.size() : it->second] = 1.0;
    return v;
  }

  double similarity(std::string_view a, std::string_view b) const override {
    return a == b ? 1.0 : 0.0;
  }

 private:
  std::unordered_map<std::string, std::size_t> index_;
};

/// Pseudo-random vectors with entries uniform in [-1, 1), seeded per token.
class HashedRandomEmbedder : public EmbeddingProvider {
 public:
  explicit HashedRandomEmbedder(std::uint64_t seed, std::size_t dim = 64)
      : seed_(seed), dim_(dim) {
    if (dim_ == 0) throw ConfigError("similarity", "embedding dimension must be positive");
  }

  std::size_t dimension() const override { return dim_; }

  std::vector<double> embed(std::string_view token) const override {
    Rng rng = Rng::for_record(seed_, "embedding", token);
    std::vector<double> v(dim_);
    for (auto& x : v) x = 2.0 * rng.uniform() - 1.0;
    return v;
  }

  double similarity(std::string_view a, std::string_view b) const override {
    if (a == b) return 1.0;
    return cosine(embed(a), embed(b));
  }

 private:
  std::uint64_t seed_;
  std::size_t dim_;
};

/// Precomputed vectors, one per line: `token v1 v2 ... vd`. Tokens missing
/// from the file fall back to identity similarity.
class FileEmbedder : public EmbeddingProvider {
 public:
  static FileEmbedder load(const std::filesystem::path& path) {
    FileEmbedder e;
    const auto lines = read_lines(path, "similarity");
    for (std::size_t n = 0; n < lines.size(); ++n) {
      auto fields = split_whitespace(lines[n]);
      if (fields.empty()) continue;
      auto where = path.string() + ":" + std::to_string(n + 1) + ": ";
      if (fields.size() < 2) throw FormatError("similarity", where + "vector has no components");
      std::vector<double> v;
      for (std::size_t i = 1; i < fields.size(); ++i) {
        try {
          std::size_t used = 0;
          v.push_back(std::stod(fields[i], &used));
          if (used != fields[i].size()) throw std::invalid_argument("trailing");
        } catch (const std::exception&) {
          throw FormatError("similarity", where + "bad number '" + fields[i] + "'");
        }
      }
      if (e.dim_ == 0) e.dim_ = v.size();
      if (v.size() != e.dim_) throw FormatError("similarity", where + "inconsistent dimension");
      if (std::all_of(v.begin(), v.end(), [](double x) { return x == 0.0; }))
        throw FormatError("similarity", where + "zero vector");
      e.vectors_[fields[0]] = std::move(v);
    }
    if (e.vectors_.empty()) throw ConfigError("similarity", "no vectors in " + path.string());
    return e;
  }

  std::size_t dimension() const override { return dim_; }

  std::vector<double> embed(std::string_view token) const override {
    auto it = vectors_.find(std::string(token));
    if (it == vectors_.end())
      throw ArgumentError("similarity", "no vector for token '" + std::string(token) + "'");
    return it->second;
  }

  double similarity(std::string_view a, std::string_view b) const override {
    auto ia = vectors_.find(std::string(a));
    auto ib = vectors_.find(std::string(b));
    if (ia == vectors_.end() || ib == vectors_.end()) return a == b ? 1.0 : 0.0;
    return cosine(ia->second, ib->second);
  }

 private:
  std::size_t dim_ = 0;
  std::unordered_map<std::string, std::vector<double>> vectors_;
};

/// "onehot", "hashed-random" / "hashed-random(<seed>)", or "file:<path>".
inline std::unique_ptr<EmbeddingProvider> make_embedder(std::string_view spec,
                                                        std::uint64_t default_seed = 0) {
  if (spec == "onehot") return std::make_unique<OneHotEmbedder>();
  if (spec == "hashed-random") return std::make_unique<HashedRandomEmbedder>(default_seed);
  constexpr std::string_view kHashed = "hashed-random(";
  if (spec.substr(0, kHashed.size()) == kHashed && spec.back() == ')') {
    const std::string num(spec.substr(kHashed.size(), spec.size() - kHashed.size() - 1));
    try {
      std::size_t used = 0;
      const auto seed = std::stoull(num, &used);
      if (used == num.size()) return std::make_unique<HashedRandomEmbedder>(seed);
    } catch (const std::exception&) {
    }
    throw ConfigError("similarity", "bad seed in embedder spec '" + std::string(spec) + "'");
  }
  if (spec.substr(0, 5) == "file:")
    return std::make_unique<FileEmbedder>(FileEmbedder::load(std::string(spec.substr(5))));
  throw ConfigError("similarity", "unknown embedder '" + std::string(spec) + "'");
}

// ---------------------------------------------------------------------------
// Greedy matching

struct MatchScore {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

using IdfWeights = std::unordered_map<std::string, double>;

/// idf(w) = log((M + 1) / (df(w) + 1)) over M reference documents.
inline IdfWeights compute_idf(std::span<const std::vector<std::string>> documents) {
  std::unordered_map<std::string, std::size_t> df;
  for (const auto& doc : documents) {
    std::unordered_set<std::string> uniq(doc.begin(), doc.end());
    for (const auto& w : uniq) ++df[w];
  }
  IdfWeights idf;
  const double m = static_cast<double>(documents.size());
  for (const auto& [w, n] : df) idf[w] = std::log((m + 1.0) / (static_cast<double>(n) + 1.0));
  idf[""] = std::log(m + 1.0);  // weight for unseen tokens
  return idf;
}

/// Precision: mean over candidate tokens of the best similarity to any
/// reference token; recall symmetrically; F1 their harmonic mean. With IDF
/// weights the means become weighted means.
inline MatchScore greedy_match_f1(std::span<const std::string> candidate,
                                  std::span<const std::string> reference,
                                  const EmbeddingProvider& embedder,
                                  const IdfWeights* idf = nullptr) {
  if (candidate.empty() || reference.empty())
    throw ArgumentError("similarity", "greedy matching needs non-empty token lists");
  std::vector<std::vector<double>> sim(candidate.size(), std::vector<double>(reference.size()));
  for (std::size_t i = 0; i < candidate.size(); ++i)
    for (std::size_t j = 0; j < reference.size(); ++j)
      sim[i][j] = embedder.similarity(candidate[i], reference[j]);

  auto weight = [&](const std::string& w) {
    if (!idf) return 1.0;
    auto it = idf->find(w);
    if (it != idf->end()) return it->second;
    auto unseen = idf->find("");
    return unseen != idf->end() ? unseen->second : 1.0;
  };
  auto directional = [&](std::size_t n, std::size_t m, bool rows,
                         std::span<const std::string> toks) {
    double num = 0, den = 0;
    for (std::size_t i = 0; i < n; ++i) {
      double best = -1.0;
      for (std::size_t j = 0; j < m; ++j) best = std::max(best, rows ? sim[i][j] : sim[j][i]);
      const double w = weight(toks[i]);
      num += w * best;
      den += w;
    }
    return den == 0 ? 0.0 : num / den;
  };
  MatchScore s;
  s.precision = directional(candidate.size(), reference.size(), true, candidate);
  s.recall = directional(reference.size(), candidate.size(), false, reference);
  s.f1 = (s.precision + s.recall) <= 0 ? 0.0
                                       : 2 * s.precision * s.recall / (s.precision + s.recall);
  return s;
}

// ---------------------------------------------------------------------------
// Combination and filtering

struct FilterConfig {
  double keep_fraction = 0.15;
  std::map<std::string, double> weights = {{"bertscore", 0.5}, {"trigram", 0.5}};
  std::string embedder = "onehot";
  bool idf = false;

  std::vector<std::string> problems() const {
    std::vector<std::string> out;
    if (!(keep_fraction > 0.0 && keep_fraction <= 1.0))
      out.push_back("filter.keep_fraction: must be within (0, 1]");
    double sum = 0;
    for (const auto& [name, w] : weights) {
      if (!(w >= 0.0)) out.push_back("filter.weights." + name + ": must be >= 0");
      sum += w;
    }
    if (weights.empty() || std::abs(sum - 1.0) > 1e-9)
      out.push_back("filter.weights: must sum to 1");
    return out;
  }
};

/// Weighted mean of named scores. Scores without a weight are ignored; a
/// weight naming a missing score is a configuration error.
inline double combined_score(const std::map<std::string, double>& scores,
                             const std::map<std::string, double>& weights) {
  double sum_w = 0, total = 0;
  for (const auto& [name, w] : weights) {
    auto it = scores.find(name);
    if (it == scores.end()) throw ConfigError("similarity", "unknown scorer '" + name + "'");
    total += w * it->second;
    sum_w += w;
  }
  if (weights.empty() || std::abs(sum_w - 1.0) > 1e-9)
    throw ConfigError("similarity", "scorer weights must sum to 1");
  return total;
}

/// Indices of the ceil(keep_fraction * n) highest scores, returned in input
/// order. Equal scores keep their input order.
inline std::vector<std::size_t> filter_top_fraction(std::span<const double> scores,
                                                    double keep_fraction) {
  if (!(keep_fraction > 0.0 && keep_fraction <= 1.0))
    throw ArgumentError("similarity", "keep_fraction must be within (0, 1]");
  const std::size_t n = scores.size();
  if (n == 0) return {};
  // The epsilon absorbs representation error such as 0.15 * 20 = 3.0000...04.
  const auto keep = std::min<std::size_t>(
      n, static_cast<std::size_t>(std::ceil(keep_fraction * static_cast<double>(n) - 1e-9)));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  auto key = [&](std::size_t i) { return std::isnan(scores[i]) ? -INFINITY : scores[i]; };
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return key(a) > key(b); });
  order.resize(std::max<std::size_t>(keep, 1));
  std::sort(order.begin(), order.end());
  return order;
}

/// Fills pair.scores with "bertscore" (greedy-match F1 of generated vs
/// source), "trigram" and the weighted "combined" score.
inline void score_pairs(std::span<GeneratedPair> pairs, const EmbeddingProvider& embedder,
                        const FilterConfig& cfg) {
  std::vector<std::vector<std::string>> sources;
  sources.reserve(pairs.size());
  for (const auto& p : pairs) sources.push_back(normalized_words(p.source));
  IdfWeights idf;
  if (cfg.idf) idf = compute_idf(sources);
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    auto& p = pairs[i];
    const auto gen = normalized_words(p.generated);
    if (gen.empty() || sources[i].empty()) {
      p.scores["bertscore"] = 0.0;
      p.scores["trigram"] = 0.0;
    } else {
      p.scores["bertscore"] = greedy_match_f1(gen, sources[i], embedder, cfg.idf ? &idf : nullptr).f1;
      p.scores["trigram"] = trigram_similarity(join(gen, " "), join(sources[i], " "));
    }
    p.scores["combined"] = combined_score(p.scores, cfg.weights);
  }
}

inline std::vector<GeneratedPair> filter_pairs(std::span<const GeneratedPair> scored,
                                               double keep_fraction) {
  std::vector<double> s;
  s.reserve(scored.size());
  for (const auto& p : scored) {
    auto it = p.scores.find("combined");
    if (it == p.scores.end()) throw ArgumentError("similarity", "pair has no combined score");
    s.push_back(it->second);
  }
  std::vector<GeneratedPair> kept;
  for (std::size_t i : filter_top_fraction(s, keep_fraction)) kept.push_back(scored[i]);
  return kept;
}

}  // namespace clinsum
