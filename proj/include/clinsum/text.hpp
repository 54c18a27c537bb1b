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

// String helpers shared by every stage: case folding, the word tokenizer
// used for annotation and generation, and whitespace splitting.

#pragma once

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "clinsum/errors.hpp"

namespace clinsum {

inline bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' ||
         c == '\v';
}

inline bool is_ascii_upper(char c) { return c >= 'A' && c <= 'Z'; }

inline char ascii_lower(char c) {
  return is_ascii_upper(c) ? static_cast<char>(c - 'A' + 'a') : c;
}

/// ASCII lowercasing; bytes >= 0x80 pass through untouched so UTF-8 stays
/// valid.
inline std::string to_lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = ascii_lower(c);
  return out;
}

inline std::string_view trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && is_space(s[b])) ++b;
  while (e > b && is_space(s[e - 1])) --e;
  return s.substr(b, e - b);
}

inline std::vector<std::string> split_whitespace(std::string_view s) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && is_space(s[i])) ++i;
    std::size_t start = i;
    while (i < s.size() && !is_space(s[i])) ++i;
    if (i > start) out.emplace_back(s.substr(start, i - start));
  }
  return out;
}

inline std::string join(std::span<const std::string> parts,
                        std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

/// Byte range of one token, relative to the string it was cut from.
struct TokenOffset {
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t size() const { return end - begin; }
  bool operator==(const TokenOffset&) const = default;
};

namespace detail {

inline bool is_word_byte(unsigned char c) {
  return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') ||
         (c >= 'A' && c <= 'Z') || c >= 0x80;
}

// Joiners stay inside a word only when flanked by word bytes: "s/p",
// "2.5", "o'clock", "non-tender".
inline bool is_joiner(char c) {
  return c == '-' || c == '/' || c == '.' || c == '\'' || c == '_';
}

}  // namespace detail

/// Word tokenizer: runs of alphanumerics (with internal joiners) or single
/// punctuation characters. Whitespace is never part of a token, so the
/// bytes between tokens can be restored exactly from the offsets.
inline std::vector<TokenOffset> tokenize_words(std::string_view s) {
  std::vector<TokenOffset> out;
  std::size_t i = 0;
  const std::size_t n = s.size();
  while (i < n) {
    const auto c = static_cast<unsigned char>(s[i]);
    if (is_space(s[i])) {
      ++i;
      continue;
    }
    if (!detail::is_word_byte(c)) {
      out.push_back({i, i + 1});
      ++i;
      continue;
    }
    std::size_t start = i;
    while (i < n) {
      const auto d = static_cast<unsigned char>(s[i]);
      if (detail::is_word_byte(d)) {
        ++i;
      } else if (detail::is_joiner(s[i]) && i + 1 < n &&
                 detail::is_word_byte(static_cast<unsigned char>(s[i + 1]))) {
        ++i;
      } else {
        break;
      }
    }
    out.push_back({start, i});
  }
  return out;
}

inline std::vector<std::string> token_strings(
    std::string_view s, std::span<const TokenOffset> offsets) {
  std::vector<std::string> out;
  out.reserve(offsets.size());
  for (const auto& t : offsets) out.emplace_back(s.substr(t.begin, t.size()));
  return out;
}

/// Lowercased word tokens; the canonical form for dictionary matching and
/// term comparison.
inline std::vector<std::string> normalized_words(std::string_view s) {
  auto offs = tokenize_words(s);
  std::vector<std::string> out;
  out.reserve(offs.size());
  for (const auto& t : offs) out.push_back(to_lower(s.substr(t.begin, t.size())));
  return out;
}

/// Warning sink used by streaming stages for skip-and-continue conditions.
using WarningSink = std::function<void(const std::string&)>;

inline WarningSink stderr_warnings(std::string module) {
  return [module = std::move(module)](const std::string& msg) {
    std::cerr << "[warn] " << module << ": " << msg << '\n';
  };
}

inline std::string read_file(const std::filesystem::path& path,
                             const std::string& module) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(module, "cannot open " + path.string());
  std::string data((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError(module, "read failed for " + path.string());
  return data;
}

inline std::vector<std::string> read_lines(const std::filesystem::path& path,
                                           const std::string& module) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(module, "cannot open " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
  }
  if (in.bad()) throw IoError(module, "read failed for " + path.string());
  return lines;
}

}  // namespace clinsum
