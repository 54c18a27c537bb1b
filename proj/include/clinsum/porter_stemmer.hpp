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

// Porter (1980) suffix-stripping stemmer, following the reference C
// implementation. Input must be lowercase ASCII letters; anything else is
// returned unchanged.

#pragma once

#include <initializer_list>
#include <string>
#include <string_view>

namespace clinsum {

class PorterStemmer {
 public:
  static std::string stem(std::string_view word) {
    for (char c : word)
      if (c < 'a' || c > 'z') return std::string(word);
    if (word.size() <= 2) return std::string(word);
    PorterStemmer s(word);
    s.step1ab();
    if (s.k_ > 0) {
      s.step1c();
      s.step2();
      s.step3();
      s.step4();
      s.step5();
    }
    return s.b_.substr(0, static_cast<std::size_t>(s.k_) + 1);
  }

 private:
  explicit PorterStemmer(std::string_view w)
      : b_(w), k_(static_cast<int>(w.size()) - 1) {}

  bool cons(int i) const {
    switch (b_[i]) {
      case 'a': case 'e': case 'i': case 'o': case 'u': return false;
      case 'y': return i == 0 ? true : !cons(i - 1);
      default: return true;
    }
  }

  // Number of VC sequences in b[0..j].
  int m() const {
    int n = 0, i = 0;
    while (true) {
      if (i > j_) return n;
      if (!cons(i)) break;
      ++i;
    }
    ++i;
    while (true) {
      while (true) {
        if (i > j_) return n;
        if (cons(i)) break;
        ++i;
      }
      ++i;
      ++n;
      while (true) {
        if (i > j_) return n;
        if (!cons(i)) break;
        ++i;
      }
      ++i;
    }
  }

  bool vowel_in_stem() const {
    for (int i = 0; i <= j_; ++i)
      if (!cons(i)) return true;
    return false;
  }

  bool doublec(int j) const {
    return j >= 1 && b_[j] == b_[j - 1] && cons(j);
  }

  bool cvc(int i) const {
    if (i < 2 || !cons(i) || cons(i - 1) || !cons(i - 2)) return false;
    const char ch = b_[i];
    return ch != 'w' && ch != 'x' && ch != 'y';
  }

  bool ends(std::string_view s) {
    const int len = static_cast<int>(s.size());
    if (len > k_ + 1) return false;
    if (std::string_view(b_).substr(k_ - len + 1, len) != s) return false;
    j_ = k_ - len;
    return true;
  }

  void setto(std::string_view s) {
    b_.replace(j_ + 1, k_ - j_, s);
    k_ = j_ + static_cast<int>(s.size());
  }

  void r(std::string_view s) {
    if (m() > 0) setto(s);
  }

  void step1ab() {
    if (b_[k_] == 's') {
      if (ends("sses")) {
        k_ -= 2;
      } else if (ends("ies")) {
        setto("i");
      } else if (b_[k_ - 1] != 's') {
        --k_;
      }
    }
    if (ends("eed")) {
      if (m() > 0) --k_;
    } else if ((ends("ed") || ends("ing")) && vowel_in_stem()) {
      k_ = j_;
      b_.resize(k_ + 1);
      if (ends("at")) {
        setto("ate");
      } else if (ends("bl")) {
        setto("ble");
      } else if (ends("iz")) {
        setto("ize");
      } else if (doublec(k_)) {
        --k_;
        const char ch = b_[k_];
        if (ch == 'l' || ch == 's' || ch == 'z') ++k_;
      } else {
        j_ = k_;
        if (m() == 1 && cvc(k_)) setto("e");
      }
    }
  }

  void step1c() {
    if (ends("y") && vowel_in_stem()) b_[k_] = 'i';
  }

  // Tries each (suffix, replacement) in order; the first suffix that matches
  // ends the search whether or not the measure condition allows the rewrite.
  template <std::size_t N>
  void rewrite_first(const std::string_view (&rules)[N][2]) {
    for (const auto& rule : rules) {
      if (ends(rule[0])) {
        r(rule[1]);
        return;
      }
    }
  }

  void step2() {
    if (k_ < 1) return;
    switch (b_[k_ - 1]) {
      case 'a': {
        static constexpr std::string_view rules[][2] = {{"ational", "ate"}, {"tional", "tion"}};
        rewrite_first(rules);
        break;
      }
      case 'c': {
        static constexpr std::string_view rules[][2] = {{"enci", "ence"}, {"anci", "ance"}};
        rewrite_first(rules);
        break;
      }
      case 'e': {
        static constexpr std::string_view rules[][2] = {{"izer", "ize"}};
        rewrite_first(rules);
        break;
      }
      case 'l': {
        static constexpr std::string_view rules[][2] = {
            {"bli", "ble"}, {"alli", "al"}, {"entli", "ent"}, {"eli", "e"}, {"ousli", "ous"}};
        rewrite_first(rules);
        break;
      }
      case 'o': {
        static constexpr std::string_view rules[][2] = {
            {"ization", "ize"}, {"ation", "ate"}, {"ator", "ate"}};
        rewrite_first(rules);
        break;
      }
      case 's': {
        static constexpr std::string_view rules[][2] = {
            {"alism", "al"}, {"iveness", "ive"}, {"fulness", "ful"}, {"ousness", "ous"}};
        rewrite_first(rules);
        break;
      }
      case 't': {
        static constexpr std::string_view rules[][2] = {
            {"aliti", "al"}, {"iviti", "ive"}, {"biliti", "ble"}};
        rewrite_first(rules);
        break;
      }
      case 'g': {
        static constexpr std::string_view rules[][2] = {{"logi", "log"}};
        rewrite_first(rules);
        break;
      }
      default:
        break;
    }
  }

  void step3() {
    switch (b_[k_]) {
      case 'e': {
        static constexpr std::string_view rules[][2] = {
            {"icate", "ic"}, {"ative", ""}, {"alize", "al"}};
        rewrite_first(rules);
        break;
      }
      case 'i': {
        static constexpr std::string_view rules[][2] = {{"iciti", "ic"}};
        rewrite_first(rules);
        break;
      }
      case 'l': {
        static constexpr std::string_view rules[][2] = {{"ical", "ic"}, {"ful", ""}};
        rewrite_first(rules);
        break;
      }
      case 's': {
        static constexpr std::string_view rules[][2] = {{"ness", ""}};
        rewrite_first(rules);
        break;
      }
      default:
        break;
    }
  }

  void step4() {
    if (k_ < 1) return;
    auto any = [&](std::initializer_list<std::string_view> suffixes) {
      for (auto s : suffixes)
        if (ends(s)) return true;
      return false;
    };
    bool hit = false;
    switch (b_[k_ - 1]) {
      case 'a': hit = any({"al"}); break;
      case 'c': hit = any({"ance", "ence"}); break;
      case 'e': hit = any({"er"}); break;
      case 'i': hit = any({"ic"}); break;
      case 'l': hit = any({"able", "ible"}); break;
      case 'n': hit = any({"ant", "ement", "ment", "ent"}); break;
      case 'o':
        if (ends("ion") && j_ >= 0 && (b_[j_] == 's' || b_[j_] == 't'))
          hit = true;
        else
          hit = ends("ou");
        break;
      case 's': hit = any({"ism"}); break;
      case 't': hit = any({"ate", "iti"}); break;
      case 'u': hit = any({"ous"}); break;
      case 'v': hit = any({"ive"}); break;
      case 'z': hit = any({"ize"}); break;
      default: break;
    }
    if (hit && m() > 1) k_ = j_;
  }

  void step5() {
    j_ = k_;
    if (b_[k_] == 'e') {
      const int a = m();
      if (a > 1 || (a == 1 && !cvc(k_ - 1))) --k_;
    }
    if (b_[k_] == 'l' && doublec(k_) && m() > 1) --k_;
  }

  std::string b_;
  int k_;
  int j_ = 0;
};

}  // namespace clinsum
