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

// Approximate dictionary entity linking.
//
// Two annotation channels feed the masking policy: a UMLS-style vocabulary
// matched approximately, and an i2b2-style channel that is either a second
// dictionary or precomputed standoff annotations. Matching scores a token
// window against dictionary entries with multiset Jaccard over character
// trigrams; an inverted index over trigrams keeps lookups independent of
// dictionary size.

#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <variant>
#include <vector>

#include "clinsum/errors.hpp"
#include "clinsum/text.hpp"

namespace clinsum {

enum class Channel { kUmls, kI2b2 };

inline const char* to_string(Channel c) {
  return c == Channel::kUmls ? "UMLS" : "I2B2";
}

/// A matched concept: tokens [start, end) of one sentence.
struct EntitySpan {
  std::size_t start = 0;
  std::size_t end = 0;
  std::string surface;
  Channel channel = Channel::kUmls;
  double score = 0.0;

  std::size_t length() const { return end - start; }
  bool overlaps(const EntitySpan& o) const {
    return start < o.end && o.start < end;
  }
};

struct AnnotationConfig {
  double threshold = 0.7;
  std::size_t max_window = 6;
};

// ---------------------------------------------------------------------------
// Character trigrams

/// A gram packed into 32 bits: up to three bytes plus the length in the top
/// byte. Strings shorter than three bytes contribute themselves as a single
/// gram so that every non-empty string has at least one feature.
using Gram = std::uint32_t;

struct GramCount {
  Gram gram;
  std::uint32_t count;
};

inline Gram pack_gram(std::string_view s) {
  Gram g = static_cast<Gram>(s.size()) << 24;
  for (std::size_t i = 0; i < s.size(); ++i)
    g |= static_cast<Gram>(static_cast<unsigned char>(s[i])) << (8 * i);
  return g;
}

/// Sorted multiset of trigrams, run-length encoded.
inline std::vector<GramCount> gram_counts(std::string_view s) {
  std::vector<Gram> grams;
  if (s.size() < 3) {
    if (!s.empty()) grams.push_back(pack_gram(s));
  } else {
    grams.reserve(s.size() - 2);
    for (std::size_t i = 0; i + 3 <= s.size(); ++i)
      grams.push_back(pack_gram(s.substr(i, 3)));
  }
  std::sort(grams.begin(), grams.end());
  std::vector<GramCount> out;
  for (Gram g : grams) {
    if (!out.empty() && out.back().gram == g)
      ++out.back().count;
    else
      out.push_back({g, 1});
  }
  return out;
}

inline std::uint32_t gram_total(std::span<const GramCount> g) {
  std::uint32_t n = 0;
  for (const auto& x : g) n += x.count;
  return n;
}

namespace detail {

// Distinct strings never score exactly 1; keeps "1.0 iff equal" even when
// two different strings share a trigram multiset.
inline double cap_distinct(double jaccard) {
  return jaccard >= 1.0 ? std::nextafter(1.0, 0.0) : jaccard;
}

inline double jaccard_from_overlap(std::uint32_t overlap, std::uint32_t a,
                                   std::uint32_t b) {
  const std::uint32_t uni = a + b - overlap;
  return uni == 0 ? 0.0 : static_cast<double>(overlap) / uni;
}

}  // namespace detail

/// Multiset Jaccard over character trigrams of two already-normalized
/// strings.
inline double trigram_similarity(std::string_view a, std::string_view b) {
  if (a == b) return 1.0;
  const auto ga = gram_counts(a);
  const auto gb = gram_counts(b);
  std::uint32_t overlap = 0;
  std::size_t i = 0, j = 0;
  while (i < ga.size() && j < gb.size()) {
    if (ga[i].gram < gb[j].gram) {
      ++i;
    } else if (gb[j].gram < ga[i].gram) {
      ++j;
    } else {
      overlap += std::min(ga[i].count, gb[j].count);
      ++i;
      ++j;
    }
  }
  return detail::cap_distinct(
      detail::jaccard_from_overlap(overlap, gram_total(ga), gram_total(gb)));
}

/// Normalized form of a token sequence: lowercased tokens joined by single
/// spaces.
inline std::string normalize_tokens(std::span<const std::string> tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += to_lower(tokens[i]);
  }
  return out;
}

/// Similarity of two token sequences in [0, 1]; symmetric, and 1.0 exactly
/// when the normalized strings are equal.
inline double ngram_similarity(std::span<const std::string> a,
                               std::span<const std::string> b) {
  if (a.empty() || b.empty())
    throw ArgumentError("annotation", "ngram_similarity needs non-empty token sequences");
  return trigram_similarity(normalize_tokens(a), normalize_tokens(b));
}

// ---------------------------------------------------------------------------
// Dictionary

/// Immutable, normalized term vocabulary with a trigram inverted index.
/// Safe to share across threads once built.
class TermDictionary {
 public:
  struct Entry {
    std::vector<std::string> tokens;
    std::string text;  // normalized tokens joined by single spaces
    std::uint32_t grams = 0;
  };

  /// Normalizes (lowercase, tokenize, collapse whitespace) and deduplicates.
  static TermDictionary from_terms(std::span<const std::string> terms,
                                   std::string name) {
    TermDictionary d;
    d.name_ = std::move(name);
    std::unordered_set<std::string> seen;
    for (const auto& raw : terms) {
      auto toks = normalized_words(raw);
      if (toks.empty()) continue;
      std::string text = join(toks, " ");
      if (!seen.insert(text).second) continue;
      d.add(std::move(toks), std::move(text));
    }
    if (d.entries_.empty())
      throw ConfigError("annotation", "dictionary '" + d.name_ + "' has no terms");
    return d;
  }

  const std::string& name() const { return name_; }
  std::size_t size() const { return entries_.size(); }
  const std::vector<Entry>& entries() const { return entries_; }

  bool contains(std::string_view normalized) const {
    return by_text_.count(std::string(normalized)) > 0;
  }

  struct Match {
    std::size_t entry = 0;
    double score = 0.0;
  };

  /// Best entry for an already-normalized query string, if any reaches
  /// `threshold`. Ties go to the entry loaded first.
  std::optional<Match> best_match(std::string_view query,
                                  double threshold) const {
    if (auto it = by_text_.find(std::string(query)); it != by_text_.end())
      return Match{it->second, 1.0};
    if (threshold >= 1.0) return std::nullopt;

    const auto q = gram_counts(query);
    const std::uint32_t qn = gram_total(q);
    std::unordered_map<std::uint32_t, std::uint32_t> overlap;
    for (const auto& g : q) {
      auto it = postings_.find(g.gram);
      if (it == postings_.end()) continue;
      for (const auto& p : it->second) overlap[p.entry] += std::min(g.count, p.count);
    }
    std::optional<Match> best;
    for (const auto& [entry, ov] : overlap) {
      const std::uint32_t yn = entries_[entry].grams;
      // Jaccard >= t implies t*|X| <= |Y| <= |X|/t.
      if (yn + 1e-9 < threshold * qn || yn * threshold > qn + 1e-9) continue;
      const double s = detail::cap_distinct(detail::jaccard_from_overlap(ov, qn, yn));
      if (s + 1e-12 < threshold) continue;
      if (!best || s > best->score || (s == best->score && entry < best->entry))
        best = Match{entry, s};
    }
    return best;
  }

 private:
  struct Posting {
    std::uint32_t entry;
    std::uint32_t count;
  };

  void add(std::vector<std::string> toks, std::string text) {
    const auto id = static_cast<std::uint32_t>(entries_.size());
    const auto g = gram_counts(text);
    for (const auto& x : g) postings_[x.gram].push_back({id, x.count});
    by_text_.emplace(text, id);
    entries_.push_back({std::move(toks), std::move(text), gram_total(g)});
  }

  std::string name_;
  std::vector<Entry> entries_;
  std::unordered_map<std::string, std::size_t> by_text_;
  std::unordered_map<Gram, std::vector<Posting>> postings_;
};

/// One term per line, UTF-8. Blank lines are ignored.
inline TermDictionary load_dictionary(const std::filesystem::path& path,
                                      std::string name) {
  const auto lines = read_lines(path, "annotation");
  return TermDictionary::from_terms(lines, std::move(name));
}

// ---------------------------------------------------------------------------
// Span selection

/// Greedy non-overlapping subset: prefer higher score, then longer span,
/// then earlier start. Result sorted by start.
inline std::vector<EntitySpan> resolve_overlaps(std::vector<EntitySpan> spans) {
  std::stable_sort(spans.begin(), spans.end(),
                   [](const EntitySpan& a, const EntitySpan& b) {
                     if (a.score != b.score) return a.score > b.score;
                     if (a.length() != b.length()) return a.length() > b.length();
                     return a.start < b.start;
                   });
  std::vector<EntitySpan> kept;
  for (auto& s : spans) {
    bool clash = std::any_of(kept.begin(), kept.end(),
                             [&](const EntitySpan& k) { return k.overlaps(s); });
    if (!clash) kept.push_back(std::move(s));
  }
  std::sort(kept.begin(), kept.end(),
            [](const EntitySpan& a, const EntitySpan& b) { return a.start < b.start; });
  return kept;
}

/// Scans every window of 1..max_window tokens and keeps the windows whose
/// best dictionary similarity reaches `threshold`, then resolves overlaps.
inline std::vector<EntitySpan> annotate(std::span<const std::string> tokens,
                                        const TermDictionary& dict,
                                        double threshold,
                                        std::size_t max_window,
                                        Channel channel = Channel::kUmls) {
  if (!(threshold > 0.0 && threshold <= 1.0))
    throw ArgumentError("annotation", "threshold must be in (0, 1]");
  if (max_window < 1)
    throw ArgumentError("annotation", "max_window must be at least 1");

  std::vector<std::string> lowered;
  lowered.reserve(tokens.size());
  for (const auto& t : tokens) lowered.push_back(to_lower(t));

  std::vector<EntitySpan> candidates;
  for (std::size_t start = 0; start < lowered.size(); ++start) {
    std::string window;
    const std::size_t last = std::min(lowered.size(), start + max_window);
    for (std::size_t end = start + 1; end <= last; ++end) {
      if (end > start + 1) window += ' ';
      window += lowered[end - 1];
      auto m = dict.best_match(window, threshold);
      if (!m) continue;
      candidates.push_back(EntitySpan{
          start, end, join(tokens.subspan(start, end - start), " "), channel,
          m->score});
    }
  }
  return resolve_overlaps(std::move(candidates));
}

// ---------------------------------------------------------------------------
// Standoff annotations

/// Precomputed spans keyed by (doc_id, sentence index). Record format, one
/// per line, tab separated: doc_id, sentence_index, start_token, end_token,
/// label. Lines starting with '#' are comments.
class StandoffIndex {
 public:
  struct Record {
    std::size_t start = 0;
    std::size_t end = 0;
    std::string label;
  };

  static StandoffIndex parse(std::span<const std::string> lines,
                             const std::string& source = "<standoff>") {
    StandoffIndex idx;
    for (std::size_t n = 0; n < lines.size(); ++n) {
      std::string_view line = lines[n];
      if (trim(line).empty() || line.front() == '#') continue;
      std::vector<std::string_view> f;
      std::size_t pos = 0;
      while (true) {
        auto tab = line.find('\t', pos);
        f.push_back(line.substr(pos, tab == std::string_view::npos ? tab : tab - pos));
        if (tab == std::string_view::npos) break;
        pos = tab + 1;
      }
      auto where = [&] { return source + ":" + std::to_string(n + 1) + ": "; };
      if (f.size() != 5)
        throw FormatError("annotation", where() + "expected 5 tab-separated fields");
      std::size_t sent = 0, start = 0, end = 0;
      if (!parse_index(f[1], sent) || !parse_index(f[2], start) || !parse_index(f[3], end))
        throw FormatError("annotation", where() + "non-numeric index field");
      if (start >= end)
        throw FormatError("annotation", where() + "start_token must be < end_token");
      idx.records_[key(f[0], sent)].push_back({start, end, std::string(f[4])});
    }
    return idx;
  }

  static StandoffIndex load(const std::filesystem::path& path) {
    return parse(read_lines(path, "annotation"), path.string());
  }

  /// Empty when nothing was recorded for the sentence; a miss is not an error.
  std::span<const Record> lookup(std::string_view doc_id,
                                 std::size_t sentence_index) const {
    auto it = records_.find(key(doc_id, sentence_index));
    if (it == records_.end()) return {};
    return it->second;
  }

  std::size_t size() const { return records_.size(); }

 private:
  static bool parse_index(std::string_view s, std::size_t& out) {
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc() && p == s.data() + s.size() && !s.empty();
  }
  static std::string key(std::string_view doc, std::size_t sent) {
    std::string k(doc);
    k += '\x1f';
    k += std::to_string(sent);
    return k;
  }

  std::unordered_map<std::string, std::vector<Record>> records_;
};

/// The second channel's backend: a dictionary or a standoff lookup.
using I2b2Source = std::variant<std::shared_ptr<const TermDictionary>,
                                std::shared_ptr<const StandoffIndex>>;

/// "dict:<path>" or "standoff:<path>". Without a prefix, .tsv and .standoff
/// files are standoff annotations and anything else is a dictionary. An
/// empty spec yields an empty standoff index.
inline I2b2Source load_i2b2_source(std::string_view spec) {
  auto strip = [&](std::string_view p) {
    if (spec.substr(0, p.size()) != p) return false;
    spec.remove_prefix(p.size());
    return true;
  };
  if (spec.empty()) return std::make_shared<const StandoffIndex>();
  if (strip("dict:")) return std::make_shared<const TermDictionary>(load_dictionary(spec, "i2b2"));
  if (strip("standoff:")) return std::make_shared<const StandoffIndex>(StandoffIndex::load(spec));
  const auto ext = std::filesystem::path(spec).extension().string();
  if (ext == ".tsv" || ext == ".standoff")
    return std::make_shared<const StandoffIndex>(StandoffIndex::load(spec));
  return std::make_shared<const TermDictionary>(load_dictionary(spec, "i2b2"));
}

// ---------------------------------------------------------------------------
// Sentence annotation

/// One sentence of a document with both annotation channels. `offset` is the
/// sentence's byte position in the document; token offsets are relative to
/// `text`.
struct AnnotatedSentence {
  std::string text;
  std::size_t offset = 0;
  std::vector<TokenOffset> tokens;
  std::vector<EntitySpan> umls_spans;
  std::vector<EntitySpan> i2b2_spans;

  std::string_view token_text(std::size_t i) const {
    return std::string_view(text).substr(tokens[i].begin, tokens[i].size());
  }
  /// Bytes covered by tokens [start, end), including interior whitespace.
  std::string_view span_text(std::size_t start, std::size_t end) const {
    const std::size_t b = tokens[start].begin;
    return std::string_view(text).substr(b, tokens[end - 1].end - b);
  }
};

inline AnnotatedSentence annotate_sentence(std::string text, std::size_t offset,
                                           std::string_view doc_id,
                                           std::size_t sentence_index,
                                           const TermDictionary& umls,
                                           const I2b2Source& i2b2,
                                           const AnnotationConfig& cfg = {}) {
  AnnotatedSentence s;
  s.text = std::move(text);
  s.offset = offset;
  s.tokens = tokenize_words(s.text);
  const auto words = token_strings(s.text, s.tokens);

  s.umls_spans = annotate(words, umls, cfg.threshold, cfg.max_window, Channel::kUmls);
  for (auto& sp : s.umls_spans) sp.surface = std::string(s.span_text(sp.start, sp.end));

  if (const auto* dict = std::get_if<std::shared_ptr<const TermDictionary>>(&i2b2)) {
    s.i2b2_spans = annotate(words, **dict, cfg.threshold, cfg.max_window, Channel::kI2b2);
    for (auto& sp : s.i2b2_spans) sp.surface = std::string(s.span_text(sp.start, sp.end));
  } else {
    const auto& standoff = *std::get<std::shared_ptr<const StandoffIndex>>(i2b2);
    std::vector<EntitySpan> spans;
    for (const auto& r : standoff.lookup(doc_id, sentence_index)) {
      if (r.end > s.tokens.size()) continue;  // stale record for this tokenization
      spans.push_back({r.start, r.end, std::string(s.span_text(r.start, r.end)),
                       Channel::kI2b2, 1.0});
    }
    s.i2b2_spans = resolve_overlaps(std::move(spans));
  }
  return s;
}

}  // namespace clinsum
