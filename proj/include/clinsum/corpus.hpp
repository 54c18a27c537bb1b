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

// Pre-training corpus construction: note ingestion, sentence segmentation,
// annotate + mask per note, line-delimited corpus I/O and the coverage
// report.

#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <unordered_set>
#include <variant>
#include <vector>

#include "clinsum/annotation.hpp"
#include "clinsum/errors.hpp"
#include "clinsum/masking.hpp"
#include "clinsum/rng.hpp"
#include "clinsum/text.hpp"
#include "json.hpp"

namespace clinsum {

using Json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Notes

struct ProgressNote {
  std::string doc_id;
  std::string text;
  std::optional<std::string> assessment;
  std::optional<std::string> subjective;
  std::optional<std::string> objective;
  std::optional<std::string> summary;  // problem list
};

namespace detail {

inline std::optional<std::string> optional_text(const Json& j, const char* key,
                                                std::string_view list_delim) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  if (it->is_string()) return it->get<std::string>();
  if (it->is_array()) {
    std::string out;
    for (std::size_t i = 0; i < it->size(); ++i) {
      if (!(*it)[i].is_string())
        throw DataError("corpus", std::string("field '") + key + "' must hold strings");
      if (i) out += list_delim;
      out += (*it)[i].get<std::string>();
    }
    return out;
  }
  throw DataError("corpus", std::string("field '") + key + "' must be a string");
}

}  // namespace detail

/// Accepts {"doc_id", "text"} and/or the section fields
/// {"assessment", "subjective", "objective", "summary"}. A list-valued
/// summary is joined with `list_delim`. Without "text", the body is the
/// available sections joined by newlines.
inline ProgressNote note_from_json(const Json& j, std::string_view list_delim = "\n") {
  if (!j.is_object()) throw DataError("corpus", "note record must be an object");
  auto id = j.find("doc_id");
  if (id == j.end() || !(id->is_string() || id->is_number_integer()))
    throw DataError("corpus", "note record lacks a doc_id");
  ProgressNote n;
  n.doc_id = id->is_string() ? id->get<std::string>() : id->dump();
  if (n.doc_id.empty()) throw DataError("corpus", "empty doc_id");
  n.assessment = detail::optional_text(j, "assessment", list_delim);
  n.subjective = detail::optional_text(j, "subjective", list_delim);
  n.objective = detail::optional_text(j, "objective", list_delim);
  n.summary = detail::optional_text(j, "summary", list_delim);
  if (auto t = detail::optional_text(j, "text", list_delim)) {
    n.text = std::move(*t);
  } else {
    for (const auto* sec : {&n.assessment, &n.subjective, &n.objective}) {
      if (!*sec) continue;
      if (!n.text.empty()) n.text += '\n';
      n.text += **sec;
    }
  }
  return n;
}

inline Json note_to_json(const ProgressNote& n) {
  Json j;
  j["doc_id"] = n.doc_id;
  if (!n.text.empty()) j["text"] = n.text;
  if (n.assessment) j["assessment"] = *n.assessment;
  if (n.subjective) j["subjective"] = *n.subjective;
  if (n.objective) j["objective"] = *n.objective;
  if (n.summary) j["summary"] = *n.summary;
  return j;
}

/// A record that could not be turned into a note.
struct SkippedRecord {
  std::string where;
  std::string reason;
};

/// Streams notes from a .jsonl file, a plain-text file (one note, doc_id is
/// the file stem) or a directory of such files visited in sorted order.
class NoteReader {
 public:
  using Item = std::variant<ProgressNote, SkippedRecord>;

  explicit NoteReader(const std::filesystem::path& input,
                      std::string list_delim = "\n")
      : list_delim_(std::move(list_delim)) {
    namespace fs = std::filesystem;
    std::error_code ec;
    if (fs::is_directory(input, ec)) {
      for (const auto& e : fs::directory_iterator(input))
        if (e.is_regular_file()) files_.push_back(e.path());
      std::sort(files_.begin(), files_.end());
    } else if (fs::is_regular_file(input, ec)) {
      files_.push_back(input);
    } else {
      throw IoError("corpus", "no such input: " + input.string());
    }
  }

  std::optional<Item> next() {
    while (true) {
      if (lines_) {
        std::string line;
        while (std::getline(*lines_, line)) {
          ++line_no_;
          if (!line.empty() && line.back() == '\r') line.pop_back();
          if (trim(line).empty()) continue;
          const std::string where = current_.string() + ":" + std::to_string(line_no_);
          try {
            return Item{note_from_json(Json::parse(line), list_delim_)};
          } catch (const Json::exception& e) {
            return Item{SkippedRecord{where, e.what()}};
          } catch (const DataError& e) {
            return Item{SkippedRecord{where, e.what()}};
          }
        }
        if (lines_->bad()) throw IoError("corpus", "read failed for " + current_.string());
        lines_.reset();
      }
      if (next_file_ >= files_.size()) return std::nullopt;
      current_ = files_[next_file_++];
      const auto ext = current_.extension().string();
      if (ext == ".jsonl" || ext == ".json" || ext == ".ndjson") {
        lines_.emplace(current_, std::ios::binary);
        if (!*lines_) throw IoError("corpus", "cannot open " + current_.string());
        line_no_ = 0;
      } else {
        ProgressNote n;
        n.doc_id = current_.stem().string();
        n.text = read_file(current_, "corpus");
        return Item{std::move(n)};
      }
    }
  }

 private:
  std::string list_delim_;
  std::vector<std::filesystem::path> files_;
  std::size_t next_file_ = 0;
  std::filesystem::path current_;
  std::optional<std::ifstream> lines_;
  std::size_t line_no_ = 0;
};

// ---------------------------------------------------------------------------
// Sentence segmentation

struct Sentence {
  std::string text;
  std::size_t begin = 0;
  std::size_t end = 0;
};

/// Rule-based splitter: a boundary is terminal punctuation (optionally
/// followed by closing quotes or brackets), then whitespace, then an ASCII
/// uppercase letter. Sentences carry no leading or trailing whitespace, so
/// the text is exactly the sentences plus the whitespace between them.
inline std::vector<Sentence> segment_sentences(std::string_view text) {
  auto is_closer = [](char c) {
    return c == ')' || c == ']' || c == '"' || c == '\'';
  };
  std::vector<Sentence> out;
  auto emit = [&](std::size_t b, std::size_t e) {
    while (e > b && is_space(text[e - 1])) --e;
    if (e > b) out.push_back({std::string(text.substr(b, e - b)), b, e});
  };
  const std::size_t n = text.size();
  std::size_t start = 0;
  while (start < n && is_space(text[start])) ++start;
  std::size_t i = start;
  while (i < n) {
    const char c = text[i];
    if (c != '.' && c != '!' && c != '?') {
      ++i;
      continue;
    }
    std::size_t j = i + 1;
    while (j < n && is_closer(text[j])) ++j;
    if (j < n && is_space(text[j])) {
      std::size_t k = j;
      while (k < n && is_space(text[k])) ++k;
      if (k < n && is_ascii_upper(text[k])) {
        emit(start, j);
        start = k;
        i = k;
        continue;
      }
    }
    i = j;
  }
  if (start < n) emit(start, n);
  return out;
}

// ---------------------------------------------------------------------------
// Statistics

/// Coverage counters. A row is one note.
struct CorpusStats {
  std::uint64_t total_rows = 0;
  std::uint64_t rows_no_umls = 0;
  std::uint64_t rows_no_i2b2 = 0;
  std::uint64_t rows_no_entities = 0;
  std::uint64_t masks_total = 0;
  std::uint64_t sentences_total = 0;
  std::uint64_t skipped_rows = 0;

  bool operator==(const CorpusStats&) const = default;

  Json to_json() const {
    Json j;
    j["total_rows"] = total_rows;
    j["rows_no_umls"] = rows_no_umls;
    j["rows_no_i2b2"] = rows_no_i2b2;
    j["rows_no_entities"] = rows_no_entities;
    j["masks_total"] = masks_total;
    j["sentences_total"] = sentences_total;
    j["skipped_rows"] = skipped_rows;
    return j;
  }
};

// ---------------------------------------------------------------------------
// Per-note processing

struct PretrainSetup {
  std::shared_ptr<const TermDictionary> umls;
  I2b2Source i2b2;
  AnnotationConfig annotation;
  MaskPolicyConfig masking;
};

struct NoteResult {
  MaskedExample example;
  std::size_t sentences = 0;
  bool no_umls = true;
  bool no_i2b2 = true;
};

/// Annotates and masks one note. The random stream is derived from
/// (masking seed, doc_id), so the result does not depend on which worker
/// runs it or in which order.
inline NoteResult process_note(const ProgressNote& note, const PretrainSetup& setup) {
  if (trim(note.text).empty())
    throw DataError("corpus", "note '" + note.doc_id + "' has empty text");
  const auto slices = segment_sentences(note.text);
  std::vector<AnnotatedSentence> sentences;
  sentences.reserve(slices.size());
  for (std::size_t i = 0; i < slices.size(); ++i)
    sentences.push_back(annotate_sentence(slices[i].text, slices[i].begin, note.doc_id,
                                          i, *setup.umls, setup.i2b2, setup.annotation));

  Rng rng = Rng::for_record(setup.masking.seed, "masking", note.doc_id);
  std::vector<MaskDecision> decisions;
  decisions.reserve(sentences.size());
  NoteResult r;
  r.sentences = sentences.size();
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    if (!sentences[i].umls_spans.empty()) r.no_umls = false;
    if (!sentences[i].i2b2_spans.empty()) r.no_i2b2 = false;
    decisions.push_back(choose_mask_source(sentences[i], i, setup.masking, rng));
  }
  r.example = apply_mask(note.doc_id, note.text, sentences, decisions, setup.masking);
  return r;
}

using ExampleSink = std::function<void(const MaskedExample&)>;

/// Streams every note from `reader` through annotate + mask and hands the
/// examples to `sink` in input order. Notes are processed in bounded batches
/// by `workers` threads; output is identical for any worker count.
/// Malformed records, duplicate doc_ids and notes that cannot be masked are
/// skipped, reported to `warn` and counted.
inline CorpusStats build_pretrain_corpus(NoteReader& reader, const PretrainSetup& setup,
                                         const ExampleSink& sink, std::size_t workers = 1,
                                         const WarningSink& warn = stderr_warnings("corpus"),
                                         std::size_t batch_size = 1024) {
  if (!setup.umls) throw ArgumentError("corpus", "UMLS dictionary is required");
  if (auto p = setup.masking.problems(); !p.empty()) throw ConfigError("corpus", p.front());
  workers = std::max<std::size_t>(1, workers);
  batch_size = std::max<std::size_t>(1, batch_size);

  CorpusStats stats;
  std::unordered_set<std::string> seen_ids;
  using Outcome = std::variant<NoteResult, std::string>;

  std::vector<ProgressNote> batch;
  std::vector<Outcome> outcomes;
  bool exhausted = false;
  while (!exhausted) {
    batch.clear();
    while (batch.size() < batch_size) {
      auto item = reader.next();
      if (!item) {
        exhausted = true;
        break;
      }
      if (auto* skip = std::get_if<SkippedRecord>(&*item)) {
        ++stats.skipped_rows;
        warn("skipping " + skip->where + ": " + skip->reason);
        continue;
      }
      auto& note = std::get<ProgressNote>(*item);
      if (!seen_ids.insert(note.doc_id).second) {
        ++stats.skipped_rows;
        warn("skipping duplicate doc_id '" + note.doc_id + "'");
        continue;
      }
      batch.push_back(std::move(note));
    }
    if (batch.empty()) continue;

    outcomes.assign(batch.size(), Outcome{});
    auto run_one = [&](std::size_t i) {
      try {
        outcomes[i] = process_note(batch[i], setup);
      } catch (const DataError& e) {
        outcomes[i] = std::string(e.what());
      }
    };
    if (workers == 1 || batch.size() == 1) {
      for (std::size_t i = 0; i < batch.size(); ++i) run_one(i);
    } else {
      std::atomic<std::size_t> next{0};
      std::vector<std::jthread> pool;
      const std::size_t n = std::min(workers, batch.size());
      pool.reserve(n);
      for (std::size_t w = 0; w < n; ++w)
        pool.emplace_back([&] {
          for (std::size_t i; (i = next.fetch_add(1)) < batch.size();) run_one(i);
        });
    }

    for (std::size_t i = 0; i < batch.size(); ++i) {
      if (auto* err = std::get_if<std::string>(&outcomes[i])) {
        ++stats.skipped_rows;
        warn("skipping note '" + batch[i].doc_id + "': " + *err);
        continue;
      }
      const auto& r = std::get<NoteResult>(outcomes[i]);
      ++stats.total_rows;
      stats.rows_no_umls += r.no_umls;
      stats.rows_no_i2b2 += r.no_i2b2;
      stats.rows_no_entities += (r.no_umls && r.no_i2b2);
      stats.masks_total += r.example.num_masks;
      stats.sentences_total += r.sentences;
      sink(r.example);
    }
  }
  return stats;
}

// ---------------------------------------------------------------------------
// Corpus files: one JSON object per line with doc_id, input, target.

inline Json example_to_json(const MaskedExample& ex) {
  Json j;
  j["doc_id"] = ex.doc_id;
  j["input"] = ex.input_text;
  j["target"] = ex.target_text;
  return j;
}

class CorpusWriter {
 public:
  explicit CorpusWriter(const std::filesystem::path& path)
      : path_(path), out_(path, std::ios::binary | std::ios::trunc) {
    if (!out_) throw IoError("corpus", "cannot open " + path.string() + " for writing");
  }

  void write(const MaskedExample& ex) {
    out_ << example_to_json(ex).dump() << '\n';
    ++lines_;
    if (!out_)
      throw IoError("corpus", path_.string() + ":" + std::to_string(lines_) + ": write failed");
  }

  void close() {
    out_.flush();
    if (!out_) throw IoError("corpus", "flush failed for " + path_.string());
    out_.close();
  }

 private:
  std::filesystem::path path_;
  std::ofstream out_;
  std::size_t lines_ = 0;
};

inline void write_corpus(std::span<const MaskedExample> examples,
                         const std::filesystem::path& path) {
  CorpusWriter w(path);
  for (const auto& ex : examples) w.write(ex);
  w.close();
}

inline std::vector<MaskedExample> read_corpus(const std::filesystem::path& path,
                                              std::string_view sentinel_format = "<extra_id_{i}>") {
  const SentinelFormat fmt(sentinel_format);
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("corpus", "cannot open " + path.string());
  std::vector<MaskedExample> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto where = [&] { return path.string() + ":" + std::to_string(line_no) + ": "; };
    try {
      const auto j = Json::parse(line);
      MaskedExample ex;
      ex.doc_id = j.at("doc_id").get<std::string>();
      ex.input_text = j.at("input").get<std::string>();
      ex.target_text = j.at("target").get<std::string>();
      const auto marks = fmt.find_all(ex.target_text).size();
      if (marks == 0) throw FormatError("corpus", "target has no terminating sentinel");
      ex.num_masks = marks - 1;
      out.push_back(std::move(ex));
    } catch (const Json::exception& e) {
      throw FormatError("corpus", where() + e.what());
    } catch (const FormatError& e) {
      throw FormatError("corpus", where() + e.what());
    }
  }
  if (in.bad()) throw IoError("corpus", "read failed for " + path.string());
  return out;
}

}  // namespace clinsum
