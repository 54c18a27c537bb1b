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

// Fine-tuning set assembly for problem-list generation.

#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "clinsum/augmentation.hpp"
#include "clinsum/corpus.hpp"
#include "clinsum/errors.hpp"
#include "clinsum/text.hpp"

namespace clinsum {

/// A: assessment only. ASO: assessment, subjective, objective.
enum class CompositionMode { kA, kASO };

inline CompositionMode parse_composition_mode(std::string_view s) {
  const auto l = to_lower(s);
  if (l == "a") return CompositionMode::kA;
  if (l == "aso") return CompositionMode::kASO;
  throw ConfigError("task_dataset", "unknown composition mode '" + std::string(s) + "'");
}

inline const char* to_string(CompositionMode m) {
  return m == CompositionMode::kA ? "a" : "aso";
}

struct TaskConfig {
  CompositionMode mode = CompositionMode::kASO;
  /// Placed before each section after the assessment; "{section}" expands
  /// to the section name.
  std::string separator = "\n{section}: ";
  std::size_t target_size = 1000;
  std::size_t max_input_tokens = 0;  // 0 disables truncation
};

namespace detail {

inline std::string expand_separator(std::string_view sep, std::string_view section) {
  std::string out(sep);
  constexpr std::string_view kKey = "{section}";
  for (auto pos = out.find(kKey); pos != std::string::npos; pos = out.find(kKey, pos + section.size()))
    out.replace(pos, kKey.size(), section);
  return out;
}

inline const std::string& require_section(const ProgressNote& note,
                                          const std::optional<std::string>& section,
                                          const char* name) {
  if (!section || trim(*section).empty())
    throw DataError("task_dataset", "note '" + note.doc_id + "' is missing section '" + name + "'");
  return *section;
}

}  // namespace detail

/// The assessment always comes first, so the ASO input extends the A input.
inline std::string compose_input(const ProgressNote& note, CompositionMode mode,
                                 std::string_view separator = "\n{section}: ") {
  std::string out = detail::require_section(note, note.assessment, "assessment");
  if (mode == CompositionMode::kASO) {
    const auto& s = detail::require_section(note, note.subjective, "subjective");
    const auto& o = detail::require_section(note, note.objective, "objective");
    out += detail::expand_separator(separator, "Subjective");
    out += s;
    out += detail::expand_separator(separator, "Objective");
    out += o;
  }
  return out;
}

/// First `max_tokens` whitespace tokens joined by single spaces.
inline std::string truncate_tokens(std::string_view text, std::size_t max_tokens) {
  if (max_tokens < 1) throw ArgumentError("task_dataset", "max_tokens must be at least 1");
  auto toks = split_whitespace(text);
  if (toks.size() <= max_tokens) return std::string(text);
  toks.resize(max_tokens);
  return join(toks, " ");
}

enum class Provenance { kOriginal, kAugmented };

inline const char* to_string(Provenance p) {
  return p == Provenance::kOriginal ? "original" : "augmented";
}

struct TaskInstance {
  std::string doc_id;
  std::string input_text;
  std::string target_text;
  Provenance provenance = Provenance::kOriginal;

  bool operator==(const TaskInstance&) const = default;
};

struct AssembleStats {
  std::size_t originals = 0;
  std::size_t augmented = 0;
  std::size_t skipped_unknown_doc = 0;
  std::size_t skipped_no_source = 0;
  std::size_t skipped_label = 0;
  std::size_t skipped_duplicate = 0;
};

/// Every original note becomes an instance; the remaining capacity up to
/// target_size is filled with augmented variants (the generated sentence
/// replaces its source in the note's assessment), best combined score
/// first.
inline std::vector<TaskInstance> assemble_training_set(
    std::span<const ProgressNote> notes, std::span<const GeneratedPair> pairs,
    const TaskConfig& cfg, AssembleStats* stats = nullptr,
    const WarningSink& warn = stderr_warnings("task_dataset")) {
  AssembleStats local;
  AssembleStats& st = stats ? *stats : local;
  if (cfg.target_size < notes.size())
    throw DataError("task_dataset", "target size " + std::to_string(cfg.target_size) +
                                        " is smaller than the " + std::to_string(notes.size()) +
                                        " original instances");

  auto finish_input = [&](std::string s) {
    return cfg.max_input_tokens ? truncate_tokens(s, cfg.max_input_tokens) : s;
  };

  std::vector<TaskInstance> out;
  std::set<std::pair<std::string, std::string>> seen;
  std::unordered_map<std::string, const ProgressNote*> by_id;
  for (const auto& note : notes) {
    const auto& target = detail::require_section(note, note.summary, "summary");
    TaskInstance inst{note.doc_id, finish_input(compose_input(note, cfg.mode, cfg.separator)),
                      target, Provenance::kOriginal};
    if (!seen.insert({inst.doc_id, inst.input_text}).second)
      throw DataError("task_dataset", "duplicate original instance for '" + note.doc_id + "'");
    by_id.emplace(note.doc_id, &note);
    out.push_back(std::move(inst));
  }
  st.originals = out.size();

  std::vector<std::size_t> order(pairs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  auto score = [&](std::size_t i) {
    auto it = pairs[i].scores.find("combined");
    return it == pairs[i].scores.end() ? 0.0 : it->second;
  };
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return score(a) > score(b); });

  for (std::size_t i : order) {
    if (out.size() >= cfg.target_size) break;
    const auto& pair = pairs[i];
    if (pair.label != Label::kSameThing) {
      ++st.skipped_label;
      continue;
    }
    auto it = by_id.find(pair.doc_id);
    if (it == by_id.end()) {
      ++st.skipped_unknown_doc;
      warn("skipping pair for unknown doc_id '" + pair.doc_id + "'");
      continue;
    }
    ProgressNote variant = *it->second;
    auto pos = variant.assessment->find(pair.source);
    if (pos == std::string::npos || pair.source.empty()) {
      ++st.skipped_no_source;
      warn("source sentence not found in assessment of '" + pair.doc_id + "'");
      continue;
    }
    variant.assessment->replace(pos, pair.source.size(), pair.generated);
    TaskInstance inst{variant.doc_id, finish_input(compose_input(variant, cfg.mode, cfg.separator)),
                      *variant.summary, Provenance::kAugmented};
    if (!seen.insert({inst.doc_id, inst.input_text}).second) {
      ++st.skipped_duplicate;
      continue;
    }
    out.push_back(std::move(inst));
    ++st.augmented;
  }
  return out;
}

inline Json instance_to_json(const TaskInstance& t) {
  Json j;
  j["doc_id"] = t.doc_id;
  j["input"] = t.input_text;
  j["target"] = t.target_text;
  j["provenance"] = to_string(t.provenance);
  return j;
}

inline void write_instances(std::span<const TaskInstance> items, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("task_dataset", "cannot open " + path.string() + " for writing");
  for (const auto& t : items) out << instance_to_json(t).dump() << '\n';
  out.flush();
  if (!out) throw IoError("task_dataset", "write failed for " + path.string());
}

/// Notes from a line-delimited file; malformed lines are data errors here
/// because every note must map to an instance.
inline std::vector<ProgressNote> read_notes(const std::filesystem::path& path,
                                            std::string_view list_delim = "\n") {
  const auto lines = read_lines(path, "task_dataset");
  std::vector<ProgressNote> out;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (trim(lines[i]).empty()) continue;
    const auto where = path.string() + ":" + std::to_string(i + 1) + ": ";
    try {
      out.push_back(note_from_json(Json::parse(lines[i]), list_delim));
    } catch (const Json::exception& e) {
      throw FormatError("task_dataset", where + e.what());
    } catch (const DataError& e) {
      throw DataError("task_dataset", where + e.what());
    }
  }
  return out;
}

}  // namespace clinsum
