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

// Shared fixtures for the test suites: temporary directories and seeded
// synthetic clinical text.

#pragma once

#include <unistd.h>

#include <atomic>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

#include "clinsum/rng.hpp"

namespace clinsum::testing {

class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("clinsum-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(std::string_view name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline void write_text(const std::filesystem::path& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << content;
}

inline std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline const std::vector<std::string>& umls_terms() {
  static const std::vector<std::string> terms = {
      "heart failure", "hypertension", "chest pain", "edema", "pneumonia",
      "insulin", "acute kidney injury", "diabetes mellitus", "furosemide",
      "shortness of breath", "atrial fibrillation", "metoprolol", "sepsis",
      "anemia", "cellulitis", "warfarin"};
  return terms;
}

inline const std::vector<std::string>& i2b2_terms() {
  static const std::vector<std::string> terms = {
      "volume overload", "poorly controlled", "worsening dyspnea", "fevers",
      "productive cough", "lower extremity swelling", "chest pain"};
  return terms;
}

inline const std::vector<std::string>& filler_words() {
  static const std::vector<std::string> words = {
      "patient", "reports", "the", "with", "and", "stable", "noted", "today",
      "continue", "monitor", "plan", "history", "of", "on", "exam", "labs",
      "mild", "no", "acute", "distress", "s/p", "2.5", "mg", "daily", "bid",
      "non-tender", "o'clock", "x-ray", "ordered", "follow-up", "q6h"};
  return words;
}

/// A sentence of 4..14 words, capitalized and ending in '.', mixing filler
/// words, dictionary terms and stray punctuation.
inline std::string synthetic_sentence(Rng& rng, bool allow_terms = true) {
  std::string s;
  const std::size_t n = 4 + rng.below(11);
  for (std::size_t i = 0; i < n; ++i) {
    std::string w;
    const double u = rng.uniform();
    if (allow_terms && u < 0.15)
      w = umls_terms()[rng.below(umls_terms().size())];
    else if (allow_terms && u < 0.25)
      w = i2b2_terms()[rng.below(i2b2_terms().size())];
    else
      w = filler_words()[rng.below(filler_words().size())];
    if (i == 0) w[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(w[0])));
    if (i) s += rng.uniform() < 0.1 ? "  " : " ";
    s += w;
    if (i + 1 < n && rng.uniform() < 0.08) s += rng.uniform() < 0.5 ? "," : ";";
  }
  s += '.';
  return s;
}

inline std::string synthetic_document(Rng& rng, std::size_t sentences, bool allow_terms = true) {
  std::string doc;
  for (std::size_t i = 0; i < sentences; ++i) {
    if (i) doc += rng.uniform() < 0.2 ? "\n" : " ";
    doc += synthetic_sentence(rng, allow_terms);
  }
  return doc;
}

}  // namespace clinsum::testing
