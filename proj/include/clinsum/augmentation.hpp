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

// Instruction-driven paraphrase generation with self-debiasing.
//
// A source sentence is wrapped in an instruction for the target label
// ("mean the same thing but keep these terms ...") and in instructions for
// every counter label. Decoding advances all prompts with the same emitted
// tokens; at each step the target distribution is pushed away from tokens
// the counter prompts favour:
//
//   s(t) = max(0, p_target(t) - lambda * max_c p_c(t))
//
// renormalized, falling back to p_target when every s(t) is zero.

#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <regex>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "clinsum/corpus.hpp"
#include "clinsum/errors.hpp"
#include "clinsum/language_model.hpp"
#include "clinsum/rng.hpp"
#include "clinsum/text.hpp"
#include "json.hpp"

namespace clinsum {

// ---------------------------------------------------------------------------
// Labels and templates

enum class Label { kSameThing, kSomewhatSimilar, kDifferentTopics };

inline constexpr std::array<Label, 3> kAllLabels = {
    Label::kSameThing, Label::kSomewhatSimilar, Label::kDifferentTopics};

inline double label_value(Label l) {
  switch (l) {
    case Label::kSameThing: return 1.0;
    case Label::kSomewhatSimilar: return 0.5;
    case Label::kDifferentTopics: return 0.0;
  }
  return 0.0;
}

inline std::string label_name(Label l) {
  switch (l) {
    case Label::kSameThing: return "1";
    case Label::kSomewhatSimilar: return "0.5";
    case Label::kDifferentTopics: return "0";
  }
  return "?";
}

inline Label label_from_value(double v) {
  if (v == 1.0) return Label::kSameThing;
  if (v == 0.5) return Label::kSomewhatSimilar;
  if (v == 0.0) return Label::kDifferentTopics;
  throw DataError("augmentation", "label must be one of 1, 0.5, 0");
}

inline Label label_from_name(std::string_view s) {
  if (s == "1" || s == "1.0") return Label::kSameThing;
  if (s == "0.5" || s == ".5") return Label::kSomewhatSimilar;
  if (s == "0" || s == "0.0") return Label::kDifferentTopics;
  throw ConfigError("augmentation", "unknown label '" + std::string(s) + "'");
}

/// Placeholders: [Source] and [Term 1] .. [Term k].
struct InstructionTemplate {
  Label label = Label::kSameThing;
  std::string text;

  /// Number of distinct [Term k] placeholders; they must be numbered 1..k.
  std::size_t arity() const {
    static const std::regex term(R"(\[Term (\d+)\])");
    std::size_t max_k = 0;
    for (auto it = std::sregex_iterator(text.begin(), text.end(), term);
         it != std::sregex_iterator(); ++it)
      max_k = std::max<std::size_t>(max_k, std::stoul((*it)[1].str()));
    return max_k;
  }

  std::vector<std::string> problems() const {
    std::vector<std::string> out;
    std::string_view t = trim(text);
    if (text.find("[Source]") == std::string::npos) out.push_back("missing [Source]");
    constexpr std::string_view kEnd = "Sentence 2:";
    if (t.size() < kEnd.size() || t.substr(t.size() - kEnd.size()) != kEnd)
      out.push_back("must end with \"Sentence 2:\"");
    if (label == Label::kSameThing && arity() > 0 && text.find("keep") == std::string::npos)
      out.push_back("label-1 template with terms needs a term-preservation clause");
    return out;
  }
};

/// Substitutes placeholders in one left-to-right pass; substituted text is
/// never rescanned. Surplus terms are ignored.
inline std::string instantiate_template(const InstructionTemplate& tmpl,
                                        std::span<const std::string> terms,
                                        std::string_view source) {
  if (terms.size() < tmpl.arity())
    throw ArgumentError("augmentation", "template for label " + label_name(tmpl.label) +
                                            " needs " + std::to_string(tmpl.arity()) +
                                            " terms, got " + std::to_string(terms.size()));
  static const std::regex placeholder(R"(\[Source\]|\[Term (\d+)\])");
  std::string out;
  auto last = tmpl.text.cbegin();
  for (auto it = std::sregex_iterator(tmpl.text.begin(), tmpl.text.end(), placeholder);
       it != std::sregex_iterator(); ++it) {
    const auto& m = *it;
    out.append(last, m[0].first);
    if (m[1].matched) {
      const std::size_t k = std::stoul(m[1].str());
      if (k == 0) throw ArgumentError("augmentation", "terms are numbered from 1");
      out += terms[k - 1];
    } else {
      out += source;
    }
    last = m[0].second;
  }
  out.append(last, tmpl.text.cend());
  return std::string(trim(out));
}

/// Templates keyed by (label, arity). Lower-arity variants cover sources
/// that share fewer terms with the problem list.
class TemplateSet {
 public:
  static TemplateSet defaults() {
    TemplateSet s;
    s.add({Label::kSameThing,
           "Write two sentences that mean the same thing but keep these two healthcare "
           "terms [Term 1],[Term 2]. Sentence 1: [Source] Sentence 2:"});
    s.add({Label::kSameThing,
           "Write two sentences that mean the same thing but keep this healthcare term "
           "[Term 1]. Sentence 1: [Source] Sentence 2:"});
    s.add({Label::kSameThing,
           "Write two sentences that mean the same thing. Sentence 1: [Source] Sentence 2:"});
    s.add({Label::kSomewhatSimilar,
           "Write two sentences that are somewhat similar. Sentence 1: [Source] Sentence 2:"});
    s.add({Label::kDifferentTopics,
           "Write two sentences that are on completely different topics. Sentence 1: "
           "[Source] Sentence 2:"});
    return s;
  }

  void add(InstructionTemplate t) {
    if (auto p = t.problems(); !p.empty())
      throw ConfigError("augmentation", "template for label " + label_name(t.label) + ": " + p.front());
    const std::size_t k = t.arity();
    templates_[{t.label, k}] = std::move(t);
  }

  /// Highest-arity template for `label` that needs at most `available_terms`.
  const InstructionTemplate& select(Label label, std::size_t available_terms) const {
    const InstructionTemplate* best = nullptr;
    for (const auto& [key, t] : templates_)
      if (key.first == label && key.second <= available_terms) best = &t;
    if (!best)
      throw ConfigError("augmentation", "no template for label " + label_name(label) +
                                            " with at most " + std::to_string(available_terms) +
                                            " terms");
    return *best;
  }

  std::size_t size() const { return templates_.size(); }

  std::vector<InstructionTemplate> all() const {
    std::vector<InstructionTemplate> out;
    for (const auto& [key, t] : templates_) out.push_back(t);
    return out;
  }

  static std::string file_name(Label l, std::size_t arity) {
    return "label_" + label_name(l) + "_terms_" + std::to_string(arity) + ".txt";
  }

  /// Reads every `label_<1|0.5|0>_terms_<k>.txt` in `dir`.
  static TemplateSet load(const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir)) throw IoError("augmentation", "no template directory " + dir.string());
    static const std::regex name(R"(label_(1|0\.5|0)_terms_(\d+)\.txt)");
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir))
      if (e.is_regular_file()) files.push_back(e.path());
    std::sort(files.begin(), files.end());
    TemplateSet s;
    for (const auto& f : files) {
      std::smatch m;
      const std::string fname = f.filename().string();
      if (!std::regex_match(fname, m, name)) continue;
      InstructionTemplate t{label_from_name(m[1].str()), std::string(trim(read_file(f, "augmentation")))};
      if (t.arity() != std::stoul(m[2].str()))
        throw ConfigError("augmentation", fname + ": placeholder count does not match file name");
      s.add(std::move(t));
    }
    if (s.templates_.empty()) throw ConfigError("augmentation", "no templates found in " + dir.string());
    return s;
  }

  void save(const std::filesystem::path& dir) const {
    std::filesystem::create_directories(dir);
    for (const auto& [key, t] : templates_) {
      std::ofstream out(dir / file_name(key.first, key.second), std::ios::binary | std::ios::trunc);
      out << t.text << '\n';
      if (!out) throw IoError("augmentation", "cannot write templates to " + dir.string());
    }
  }

 private:
  std::map<std::pair<Label, std::size_t>, InstructionTemplate> templates_;
};

// ---------------------------------------------------------------------------
// Terms

namespace detail {

inline bool contains_sequence(std::span<const std::string> hay,
                              std::span<const std::string> needle, std::size_t* at = nullptr) {
  if (needle.empty() || needle.size() > hay.size()) return false;
  for (std::size_t i = 0; i + needle.size() <= hay.size(); ++i) {
    if (std::equal(needle.begin(), needle.end(), hay.begin() + i)) {
      if (at) *at = i;
      return true;
    }
  }
  return false;
}

// Strips "1.", "2)", "-", "*" and similar list markers.
inline std::string_view strip_list_marker(std::string_view item) {
  item = trim(item);
  std::size_t i = 0;
  while (i < item.size() && (std::isdigit(static_cast<unsigned char>(item[i])) != 0)) ++i;
  if (i > 0 && i < item.size() && (item[i] == '.' || item[i] == ')')) item.remove_prefix(i + 1);
  else if (!item.empty() && (item[0] == '-' || item[0] == '*' || item[0] == '#')) item.remove_prefix(1);
  return trim(item);
}

}  // namespace detail

/// Problem-list items (split on ';', ',' and newlines) that also occur in the
/// source as whole tokens, case-insensitively. Longest first, at most two,
/// returned with the source's spelling.
inline std::vector<std::string> select_terms(std::string_view source,
                                             std::string_view problem_list,
                                             std::size_t max_terms = 2) {
  const auto src_offsets = tokenize_words(source);
  std::vector<std::string> src_norm;
  for (const auto& o : src_offsets) src_norm.push_back(to_lower(source.substr(o.begin, o.size())));

  struct Candidate {
    std::string surface;
    std::string norm;
    std::size_t order;
  };
  std::vector<Candidate> found;
  std::unordered_set<std::string> seen;
  std::size_t order = 0;
  std::size_t pos = 0;
  while (pos <= problem_list.size()) {
    std::size_t cut = problem_list.find_first_of(";,\n", pos);
    if (cut == std::string_view::npos) cut = problem_list.size();
    const auto item = detail::strip_list_marker(problem_list.substr(pos, cut - pos));
    pos = cut + 1;
    const auto words = normalized_words(item);
    std::size_t at = 0;
    if (words.empty() || !detail::contains_sequence(src_norm, words, &at)) continue;
    std::string norm = join(words, " ");
    if (!seen.insert(norm).second) continue;
    const std::size_t b = src_offsets[at].begin;
    const std::size_t e = src_offsets[at + words.size() - 1].end;
    found.push_back({std::string(source.substr(b, e - b)), std::move(norm), order++});
  }
  std::stable_sort(found.begin(), found.end(), [](const Candidate& a, const Candidate& b) {
    return a.norm.size() > b.norm.size();
  });
  std::vector<std::string> out;
  for (std::size_t i = 0; i < found.size() && i < max_terms; ++i) out.push_back(found[i].surface);
  return out;
}

/// True iff every term occurs in `generated` as a whole-token sequence,
/// ignoring case.
inline bool validate_terms(std::string_view generated, std::span<const std::string> terms) {
  const auto gen = normalized_words(generated);
  for (const auto& t : terms) {
    const auto words = normalized_words(t);
    if (words.empty()) continue;
    if (!detail::contains_sequence(gen, words)) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Self-debiasing

/// Unnormalized scores max(0, p_target - lambda * max_c p_c).
inline std::vector<double> debias_scores(std::span<const double> target,
                                         std::span<const std::vector<double>> counters,
                                         double lambda) {
  std::vector<double> s(target.begin(), target.end());
  for (const auto& c : counters)
    if (c.size() != target.size())
      throw ArgumentError("augmentation", "counter distribution size differs from target");
  for (std::size_t t = 0; t < s.size(); ++t) {
    double worst = 0.0;
    for (const auto& c : counters) worst = std::max(worst, c[t]);
    s[t] = std::max(0.0, target[t] - lambda * worst);
  }
  return s;
}

inline std::vector<double> self_debias_step(std::span<const double> target,
                                            std::span<const std::vector<double>> counters,
                                            double lambda) {
  if (lambda < 0) throw ArgumentError("augmentation", "lambda must be non-negative");
  auto s = debias_scores(target, counters, lambda);
  if (lambda == 0.0 || counters.empty()) return {target.begin(), target.end()};
  const double total = std::accumulate(s.begin(), s.end(), 0.0);
  if (total <= 0.0) return {target.begin(), target.end()};
  for (auto& x : s) x /= total;
  return s;
}

// ---------------------------------------------------------------------------
// Decoding

enum class Decoding { kGreedy, kTopK };

struct GenerationConfig {
  std::size_t max_output_tokens = 40;
  double lambda = 1.0;
  Decoding decoding = Decoding::kGreedy;
  std::size_t top_k = 10;  // used by kTopK
  std::uint64_t seed = 0;

  std::vector<std::string> problems() const {
    std::vector<std::string> out;
    if (max_output_tokens < 1) out.push_back("generation.max_output_tokens: must be >= 1");
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) out.push_back("generation.lambda: must be >= 0");
    if (decoding == Decoding::kTopK && top_k < 1) out.push_back("generation.top_k: must be >= 1");
    return out;
  }
};

namespace detail {

inline void check_distribution(std::span<const double> p, std::size_t vocab) {
  if (p.size() != vocab)
    throw BackendError("augmentation", "distribution size does not match vocabulary");
  double sum = 0;
  for (double x : p) {
    if (!(x >= 0.0) || !std::isfinite(x))
      throw BackendError("augmentation", "distribution has a negative or non-finite entry");
    sum += x;
  }
  if (std::abs(sum - 1.0) > 1e-9)
    throw BackendError("augmentation", "distribution does not sum to 1");
}

inline bool is_sentence_final(std::string_view tok) {
  return tok == "." || tok == "!" || tok == "?";
}

}  // namespace detail

/// Decodes a continuation of `target_prompt`. Every counter prompt is
/// extended with the same emitted tokens. Stops after sentence-final
/// punctuation, at the model's end token, or at max_output_tokens.
/// `sample_key` selects the random substream for top-k sampling.
inline std::string generate(const LanguageModel& lm, std::string_view target_prompt,
                            std::span<const std::string> counter_prompts,
                            const GenerationConfig& cfg, std::string_view sample_key = "") {
  if (auto p = cfg.problems(); !p.empty()) throw ConfigError("augmentation", p.front());
  const std::size_t vocab = lm.vocab_size();
  std::vector<TokenId> target = lm.encode(target_prompt);
  std::vector<std::vector<TokenId>> counters;
  for (const auto& c : counter_prompts) counters.push_back(lm.encode(c));
  Rng rng = Rng::for_record(cfg.seed, "generation", sample_key);
  const auto end = lm.end_token();

  std::vector<TokenId> emitted;
  std::vector<std::vector<double>> counter_dists(counters.size());
  while (emitted.size() < cfg.max_output_tokens) {
    const auto p_target = lm.next_token_distribution(target);
    detail::check_distribution(p_target, vocab);
    for (std::size_t c = 0; c < counters.size(); ++c) {
      counter_dists[c] = lm.next_token_distribution(counters[c]);
      detail::check_distribution(counter_dists[c], vocab);
    }
    const auto adjusted = self_debias_step(p_target, counter_dists, cfg.lambda);

    TokenId next = 0;
    if (cfg.decoding == Decoding::kGreedy) {
      next = static_cast<TokenId>(std::max_element(adjusted.begin(), adjusted.end()) -
                                  adjusted.begin());
    } else {
      std::vector<TokenId> order(vocab);
      std::iota(order.begin(), order.end(), 0);
      const std::size_t k = std::min(cfg.top_k, vocab);
      std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                        [&](TokenId a, TokenId b) {
                          return adjusted[a] != adjusted[b] ? adjusted[a] > adjusted[b] : a < b;
                        });
      double mass = 0;
      for (std::size_t i = 0; i < k; ++i) mass += adjusted[order[i]];
      double u = rng.uniform() * mass;
      next = order[0];
      for (std::size_t i = 0; i < k; ++i) {
        if (adjusted[order[i]] <= 0) continue;
        next = order[i];
        u -= adjusted[order[i]];
        if (u < 0) break;
      }
    }
    if (end && next == *end) break;
    emitted.push_back(next);
    target.push_back(next);
    for (auto& c : counters) c.push_back(next);
    if (detail::is_sentence_final(lm.token_text(next))) break;
  }
  return detokenize(lm, emitted);
}

// ---------------------------------------------------------------------------
// Generated pairs

struct GeneratedPair {
  std::string doc_id;
  std::string source;
  std::string generated;
  Label label = Label::kSameThing;
  std::vector<std::string> required_terms;
  std::map<std::string, double> scores;

  bool operator==(const GeneratedPair&) const = default;
};

inline Json pair_to_json(const GeneratedPair& p) {
  Json j;
  j["doc_id"] = p.doc_id;
  j["source"] = p.source;
  j["generated"] = p.generated;
  j["label"] = label_value(p.label);
  j["required_terms"] = p.required_terms;
  j["scores"] = Json::object();
  for (const auto& [k, v] : p.scores) j["scores"][k] = v;
  return j;
}

inline GeneratedPair pair_from_json(const Json& j) {
  GeneratedPair p;
  p.doc_id = j.at("doc_id").get<std::string>();
  p.source = j.at("source").get<std::string>();
  p.generated = j.at("generated").get<std::string>();
  p.label = label_from_value(j.at("label").get<double>());
  if (auto it = j.find("required_terms"); it != j.end())
    p.required_terms = it->get<std::vector<std::string>>();
  if (auto it = j.find("scores"); it != j.end())
    for (const auto& [k, v] : it->items()) p.scores[k] = v.get<double>();
  return p;
}

inline void write_pairs(std::span<const GeneratedPair> pairs, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("augmentation", "cannot open " + path.string() + " for writing");
  for (const auto& p : pairs) out << pair_to_json(p).dump() << '\n';
  out.flush();
  if (!out) throw IoError("augmentation", "write failed for " + path.string());
}

inline std::vector<GeneratedPair> read_pairs(const std::filesystem::path& path) {
  const auto lines = read_lines(path, "augmentation");
  std::vector<GeneratedPair> out;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (trim(lines[i]).empty()) continue;
    try {
      out.push_back(pair_from_json(Json::parse(lines[i])));
    } catch (const Json::exception& e) {
      throw FormatError("augmentation", path.string() + ":" + std::to_string(i + 1) + ": " + e.what());
    } catch (const DataError& e) {
      throw FormatError("augmentation", path.string() + ":" + std::to_string(i + 1) + ": " + e.what());
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Driver

struct AugmentStats {
  std::size_t sources = 0;
  std::size_t generated = 0;
  std::size_t rejected_terms = 0;
  std::size_t rejected_empty = 0;
  std::size_t skipped_notes = 0;
};

/// Generates pairs for every assessment sentence of every note. Counter
/// labels are all labels other than the target. Label-1 outputs that drop a
/// required term, and empty outputs, are rejected.
inline std::vector<GeneratedPair> generate_pairs(std::span<const ProgressNote> notes,
                                                 const LanguageModel& lm,
                                                 const TemplateSet& templates,
                                                 const GenerationConfig& cfg,
                                                 std::span<const Label> target_labels,
                                                 AugmentStats* stats = nullptr,
                                                 const WarningSink& warn = stderr_warnings("augmentation")) {
  AugmentStats local;
  AugmentStats& st = stats ? *stats : local;
  std::vector<GeneratedPair> out;
  for (const auto& note : notes) {
    if (!note.assessment || !note.summary || trim(*note.assessment).empty()) {
      ++st.skipped_notes;
      warn("note '" + note.doc_id + "' lacks an assessment or problem list");
      continue;
    }
    const auto sentences = segment_sentences(*note.assessment);
    for (std::size_t si = 0; si < sentences.size(); ++si) {
      const std::string& source = sentences[si].text;
      const auto terms = select_terms(source, *note.summary);
      ++st.sources;
      for (Label target : target_labels) {
        const auto& tmpl = templates.select(target, terms.size());
        const std::vector<std::string> used(terms.begin(),
                                            terms.begin() + static_cast<std::ptrdiff_t>(tmpl.arity()));
        const std::string prompt = instantiate_template(tmpl, used, source);
        std::vector<std::string> counter_prompts;
        for (Label counter : kAllLabels) {
          if (counter == target) continue;
          const auto& ct = templates.select(counter, terms.size());
          counter_prompts.push_back(instantiate_template(ct, terms, source));
        }
        const std::string key = note.doc_id + "#" + std::to_string(si) + "#" + label_name(target);
        std::string text = generate(lm, prompt, counter_prompts, cfg, key);
        if (trim(text).empty()) {
          ++st.rejected_empty;
          continue;
        }
        GeneratedPair pair{note.doc_id, source, std::move(text), target, {}, {}};
        if (target == Label::kSameThing) {
          pair.required_terms = used;
          if (!validate_terms(pair.generated, pair.required_terms)) {
            ++st.rejected_terms;
            continue;
          }
        }
        ++st.generated;
        out.push_back(std::move(pair));
      }
    }
  }
  return out;
}

}  // namespace clinsum
