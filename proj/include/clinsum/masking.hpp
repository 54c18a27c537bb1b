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

// Concept masking with sentinel targets.
//
// Per sentence, one of three policies applies:
//   * both channels found entities: one Bernoulli(p_umls) draw picks the
//     UMLS channel, otherwise the i2b2 channel; all spans of the chosen
//     channel are masked;
//   * exactly one channel found entities: its spans are masked, no draw;
//   * no entities: one Bernoulli(p_sentence) draw masks the whole sentence.
//
// Masked regions are replaced left to right by sentinels 0, 1, 2, ... and
// the target lists "<sentinel_i> text" for each region followed by one
// terminating sentinel, e.g.
//
//   input:  pt on <extra_id_0> overnight . noted <extra_id_1> twice .
//   target: <extra_id_0> CPAP <extra_id_1> sat drifts <extra_id_2>

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "clinsum/annotation.hpp"
#include "clinsum/errors.hpp"
#include "clinsum/rng.hpp"

namespace clinsum {

struct MaskPolicyConfig {
  double p_umls = 0.7;
  double p_i2b2 = 0.3;
  double p_sentence = 0.15;
  std::uint64_t seed = 0;
  std::string sentinel_format = "<extra_id_{i}>";

  /// Field-qualified problems; empty when valid.
  std::vector<std::string> problems() const;
};

/// A parsed sentinel template: literal prefix, decimal index, literal suffix.
class SentinelFormat {
 public:
  static constexpr std::string_view kPlaceholder = "{i}";

  explicit SentinelFormat(std::string_view format) {
    const auto pos = format.find(kPlaceholder);
    if (pos == std::string_view::npos ||
        format.find(kPlaceholder, pos + 1) != std::string_view::npos)
      throw ConfigError("masking", "sentinel format must contain exactly one {i}");
    prefix_ = format.substr(0, pos);
    suffix_ = format.substr(pos + kPlaceholder.size());
    if (prefix_.empty())
      throw ConfigError("masking", "sentinel format needs a literal prefix before {i}");
  }

  std::string make(std::size_t index) const {
    return prefix_ + std::to_string(index) + suffix_;
  }

  struct Occurrence {
    std::size_t pos = 0;
    std::size_t len = 0;
    std::size_t index = 0;
  };

  /// All sentinels in `s`, in order of appearance.
  std::vector<Occurrence> find_all(std::string_view s) const {
    std::vector<Occurrence> out;
    std::size_t from = 0;
    while ((from = s.find(prefix_, from)) != std::string_view::npos) {
      std::size_t p = from + prefix_.size();
      std::size_t digits_begin = p;
      std::size_t value = 0;
      while (p < s.size() && s[p] >= '0' && s[p] <= '9' && p - digits_begin < 18) {
        value = value * 10 + static_cast<std::size_t>(s[p] - '0');
        ++p;
      }
      if (p > digits_begin && s.substr(p, suffix_.size()) == suffix_) {
        const std::size_t len = p + suffix_.size() - from;
        out.push_back({from, len, value});
        from += len;
      } else {
        ++from;
      }
    }
    return out;
  }

 private:
  std::string prefix_;
  std::string suffix_;
};

inline std::vector<std::string> MaskPolicyConfig::problems() const {
  std::vector<std::string> out;
  auto prob = [&](const char* name, double v) {
    if (!(v >= 0.0 && v <= 1.0))
      out.push_back(std::string("masking.") + name + ": must be within [0, 1]");
  };
  prob("p_umls", p_umls);
  prob("p_i2b2", p_i2b2);
  prob("p_sentence", p_sentence);
  if (std::abs(p_umls + p_i2b2 - 1.0) > 1e-9)
    out.push_back("masking.p_i2b2: p_umls + p_i2b2 must equal 1");
  try {
    SentinelFormat{sentinel_format};
  } catch (const Error& e) {
    out.push_back(std::string("masking.sentinel_format: ") + e.what());
  }
  return out;
}

enum class MaskKind { kUmlsSpans, kI2b2Spans, kWholeSentence, kNoMask };

inline const char* to_string(MaskKind k) {
  switch (k) {
    case MaskKind::kUmlsSpans: return "MASK_UMLS_SPANS";
    case MaskKind::kI2b2Spans: return "MASK_I2B2_SPANS";
    case MaskKind::kWholeSentence: return "MASK_WHOLE_SENTENCE";
    case MaskKind::kNoMask: return "NO_MASK";
  }
  return "?";
}

struct MaskDecision {
  std::size_t sentence_index = 0;
  MaskKind kind = MaskKind::kNoMask;
  std::vector<EntitySpan> spans;  // empty for whole-sentence and no-mask
};

struct MaskedExample {
  std::string doc_id;
  std::string input_text;
  std::string target_text;
  std::size_t num_masks = 0;

  bool operator==(const MaskedExample&) const = default;
};

/// Draws from `rng` only when the policy needs a coin: one draw when both
/// channels have spans, one when neither does, none otherwise.
inline MaskDecision choose_mask_source(const AnnotatedSentence& sentence,
                                       std::size_t sentence_index,
                                       const MaskPolicyConfig& cfg, Rng& rng) {
  MaskDecision d;
  d.sentence_index = sentence_index;
  const bool has_umls = !sentence.umls_spans.empty();
  const bool has_i2b2 = !sentence.i2b2_spans.empty();
  if (has_umls && has_i2b2) {
    if (rng.bernoulli(cfg.p_umls)) {
      d.kind = MaskKind::kUmlsSpans;
      d.spans = sentence.umls_spans;
    } else {
      d.kind = MaskKind::kI2b2Spans;
      d.spans = sentence.i2b2_spans;
    }
  } else if (has_umls) {
    d.kind = MaskKind::kUmlsSpans;
    d.spans = sentence.umls_spans;
  } else if (has_i2b2) {
    d.kind = MaskKind::kI2b2Spans;
    d.spans = sentence.i2b2_spans;
  } else {
    d.kind = rng.bernoulli(cfg.p_sentence) ? MaskKind::kWholeSentence
                                           : MaskKind::kNoMask;
  }
  return d;
}

/// Sorts spans and merges neighbours separated by fewer than two tokens.
/// Overlapping input spans violate the annotator contract.
inline std::vector<EntitySpan> merge_adjacent_spans(std::vector<EntitySpan> spans) {
  std::sort(spans.begin(), spans.end(),
            [](const EntitySpan& a, const EntitySpan& b) { return a.start < b.start; });
  std::vector<EntitySpan> out;
  for (auto& s : spans) {
    if (s.start >= s.end)
      throw InternalError("masking", "empty span in mask decision");
    if (!out.empty()) {
      auto& last = out.back();
      if (s.start < last.end)
        throw InternalError("masking", "overlapping spans in one mask decision");
      if (s.start - last.end < 2) {
        last.end = s.end;
        last.score = std::min(last.score, s.score);
        continue;
      }
    }
    out.push_back(std::move(s));
  }
  return out;
}

namespace detail {

struct ByteRange {
  std::size_t begin;
  std::size_t end;
};

}  // namespace detail

/// Rewrites `document` with sentinels according to `decisions` (one per
/// sentence). Unmasked bytes are copied verbatim.
inline MaskedExample apply_mask(std::string_view doc_id, std::string_view document,
                                std::span<const AnnotatedSentence> sentences,
                                std::span<const MaskDecision> decisions,
                                const MaskPolicyConfig& cfg) {
  const SentinelFormat fmt(cfg.sentinel_format);
  if (!fmt.find_all(document).empty())
    throw DataError("masking", "document '" + std::string(doc_id) +
                                   "' already contains sentinel-like text");
  if (decisions.size() != sentences.size())
    throw ArgumentError("masking", "need exactly one decision per sentence");

  std::vector<const MaskDecision*> by_sentence(sentences.size(), nullptr);
  for (const auto& d : decisions) {
    if (d.sentence_index >= sentences.size() || by_sentence[d.sentence_index])
      throw ArgumentError("masking", "decisions must cover each sentence exactly once");
    by_sentence[d.sentence_index] = &d;
  }

  std::vector<detail::ByteRange> ranges;
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    const auto& sent = sentences[i];
    const auto& d = *by_sentence[i];
    switch (d.kind) {
      case MaskKind::kNoMask:
        break;
      case MaskKind::kWholeSentence:
        ranges.push_back({sent.offset, sent.offset + sent.text.size()});
        break;
      case MaskKind::kUmlsSpans:
      case MaskKind::kI2b2Spans: {
        if (d.spans.empty())
          throw InternalError("masking", "span decision without spans");
        for (const auto& sp : merge_adjacent_spans(d.spans)) {
          if (sp.end > sent.tokens.size())
            throw InternalError("masking", "span exceeds sentence tokens");
          ranges.push_back({sent.offset + sent.tokens[sp.start].begin,
                            sent.offset + sent.tokens[sp.end - 1].end});
        }
        break;
      }
    }
  }
  for (std::size_t i = 1; i < ranges.size(); ++i)
    if (ranges[i].begin < ranges[i - 1].end)
      throw InternalError("masking", "sentences overlap in document");

  MaskedExample ex;
  ex.doc_id = std::string(doc_id);
  ex.num_masks = ranges.size();
  std::size_t cursor = 0;
  for (std::size_t k = 0; k < ranges.size(); ++k) {
    const auto& r = ranges[k];
    const std::string sentinel = fmt.make(k);
    ex.input_text.append(document.substr(cursor, r.begin - cursor));
    ex.input_text += sentinel;
    ex.target_text += sentinel;
    ex.target_text += ' ';
    ex.target_text.append(document.substr(r.begin, r.end - r.begin));
    ex.target_text += ' ';
    cursor = r.end;
  }
  ex.input_text.append(document.substr(cursor));
  ex.target_text += fmt.make(ranges.size());
  return ex;
}

/// Splices each target span back into its sentinel. Inverse of apply_mask.
inline std::string reconstruct(std::string_view input, std::string_view target,
                               const MaskPolicyConfig& cfg) {
  const SentinelFormat fmt(cfg.sentinel_format);
  const auto in_marks = fmt.find_all(input);
  const auto tgt_marks = fmt.find_all(target);
  if (tgt_marks.size() != in_marks.size() + 1)
    throw FormatError("masking", "input has " + std::to_string(in_marks.size()) +
                                     " sentinels but target has " +
                                     std::to_string(tgt_marks.size()) +
                                     " (expected one more)");
  for (std::size_t k = 0; k < tgt_marks.size(); ++k) {
    if (tgt_marks[k].index != k || (k < in_marks.size() && in_marks[k].index != k))
      throw FormatError("masking", "sentinel indices out of order");
  }
  if (tgt_marks.front().pos != 0 ||
      tgt_marks.back().pos + tgt_marks.back().len != target.size())
    throw FormatError("masking", "target must start and end with a sentinel");

  std::string out;
  std::size_t cursor = 0;
  for (std::size_t k = 0; k < in_marks.size(); ++k) {
    const std::size_t span_begin = tgt_marks[k].pos + tgt_marks[k].len;
    const std::size_t span_end = tgt_marks[k + 1].pos;
    if (span_end < span_begin + 2 || target[span_begin] != ' ' ||
        target[span_end - 1] != ' ')
      throw FormatError("masking", "target span " + std::to_string(k) +
                                       " is not space-delimited");
    out.append(input.substr(cursor, in_marks[k].pos - cursor));
    out.append(target.substr(span_begin + 1, span_end - span_begin - 2));
    cursor = in_marks[k].pos + in_marks[k].len;
  }
  out.append(input.substr(cursor));
  return out;
}

}  // namespace clinsum
