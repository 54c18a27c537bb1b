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

// Pipeline configuration: a JSON document, optionally overlaid with values
// from command-line flags, validated in one pass so every problem is
// reported together with its field path.
//
//   {
//     "seed": 1, "workers": 1,
//     "paths":      {"umls_dict": "...", "i2b2_source": "...", "templates": "..."},
//     "annotation": {"threshold": 0.7, "max_window": 6},
//     "masking":    {"p_umls": 0.7, "p_i2b2": 0.3, "p_sentence": 0.15,
//                    "sentinel_format": "<extra_id_{i}>"},
//     "generation": {"max_output_tokens": 40, "lambda": 1.0,
//                    "decoding": "greedy", "top_k": 10},
//     "filter":     {"keep_fraction": 0.15, "embedder": "onehot", "idf": false,
//                    "weights": {"bertscore": 0.5, "trigram": 0.5}},
//     "task":       {"mode": "aso", "target_size": 1000, "separator": "\n{section}: ",
//                    "max_input_tokens": 0, "problem_delimiter": "\n"},
//     "rouge":      {"stem": false}
//   }

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "clinsum/annotation.hpp"
#include "clinsum/augmentation.hpp"
#include "clinsum/errors.hpp"
#include "clinsum/masking.hpp"
#include "clinsum/similarity.hpp"
#include "clinsum/task_dataset.hpp"
#include "json.hpp"

namespace clinsum {

struct PipelineConfig {
  std::uint64_t seed = 1;
  std::size_t workers = 1;
  struct Paths {
    std::string umls_dict;
    std::string i2b2_source;  // "dict:<path>", "standoff:<path>" or a path
    std::string templates;
  } paths;
  AnnotationConfig annotation;
  MaskPolicyConfig masking;
  GenerationConfig generation;
  FilterConfig filter;
  TaskConfig task;
  std::string problem_delimiter = "\n";
  bool rouge_stem = false;
};

namespace detail {

class ConfigReader {
 public:
  explicit ConfigReader(std::vector<std::string>& errors) : errors_(errors) {}

  template <typename T>
  void read(const Json& obj, const char* key, const std::string& path, T& out) {
    auto it = obj.find(key);
    if (it == obj.end()) return;
    const std::string field = path.empty() ? key : path + "." + key;
    try {
      if constexpr (std::is_same_v<T, bool>) {
        if (!it->is_boolean()) throw std::invalid_argument("expected a boolean");
      } else if constexpr (std::is_integral_v<T>) {
        if (!it->is_number_integer() || (it->is_number_integer() && *it < 0 && std::is_unsigned_v<T>))
          throw std::invalid_argument("expected a non-negative integer");
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!it->is_number()) throw std::invalid_argument("expected a number");
      } else {
        if (!it->is_string()) throw std::invalid_argument("expected a string");
      }
      out = it->get<T>();
    } catch (const std::exception& e) {
      errors_.push_back(field + ": " + e.what());
    }
  }

  const Json* section(const Json& root, const char* key) {
    auto it = root.find(key);
    if (it == root.end()) return nullptr;
    if (!it->is_object()) {
      errors_.push_back(std::string(key) + ": expected an object");
      return nullptr;
    }
    return &*it;
  }

  void reject_unknown(const Json& obj, const std::string& path,
                      std::initializer_list<std::string_view> known) {
    for (const auto& [k, v] : obj.items()) {
      bool ok = false;
      for (auto name : known) ok = ok || k == name;
      if (!ok) errors_.push_back((path.empty() ? k : path + "." + k) + ": unknown field");
    }
  }

 private:
  std::vector<std::string>& errors_;
};

inline std::string strip_source_prefix(std::string_view s) {
  for (std::string_view p : {"dict:", "standoff:"})
    if (s.substr(0, p.size()) == p) return std::string(s.substr(p.size()));
  return std::string(s);
}

}  // namespace detail

/// Field-qualified problems with a parsed configuration; empty when valid.
inline std::vector<std::string> validate_config(const PipelineConfig& c) {
  std::vector<std::string> out;
  auto append = [&](std::vector<std::string> more) {
    out.insert(out.end(), more.begin(), more.end());
  };
  if (c.workers < 1) out.push_back("workers: must be >= 1");
  if (!(c.annotation.threshold > 0.0 && c.annotation.threshold <= 1.0))
    out.push_back("annotation.threshold: must be within (0, 1]");
  if (c.annotation.max_window < 1) out.push_back("annotation.max_window: must be >= 1");
  append(c.masking.problems());
  append(c.generation.problems());
  append(c.filter.problems());
  if (c.task.target_size < 1) out.push_back("task.target_size: must be >= 1");
  auto check_path = [&](const std::string& field, const std::string& value) {
    if (value.empty()) return;
    std::error_code ec;
    if (!std::filesystem::exists(detail::strip_source_prefix(value), ec))
      out.push_back(field + ": path does not exist: " + value);
  };
  check_path("paths.umls_dict", c.paths.umls_dict);
  check_path("paths.i2b2_source", c.paths.i2b2_source);
  check_path("paths.templates", c.paths.templates);
  return out;
}

/// Builds a configuration from `file` with `overrides` merged on top (both
/// JSON objects of the documented shape). Setting masking.p_umls without
/// masking.p_i2b2 in the same layer sets p_i2b2 to its complement. Throws
/// ConfigError listing every problem.
inline PipelineConfig parse_config(const Json& file, const Json& overrides = Json::object()) {
  std::vector<std::string> errors;
  if (!file.is_object() || !overrides.is_object())
    throw ConfigError("config", "configuration must be a JSON object");

  auto complement = [](Json layer) {
    auto m = layer.find("masking");
    if (m != layer.end() && m->is_object() && m->contains("p_umls") && !m->contains("p_i2b2") &&
        (*m)["p_umls"].is_number())
      (*m)["p_i2b2"] = 1.0 - (*m)["p_umls"].get<double>();
    return layer;
  };
  Json merged = complement(file);
  merged.merge_patch(complement(overrides));

  PipelineConfig c;
  detail::ConfigReader r(errors);
  r.reject_unknown(merged, "", {"seed", "workers", "paths", "annotation", "masking",
                                "generation", "filter", "task", "rouge"});
  r.read(merged, "seed", "", c.seed);
  r.read(merged, "workers", "", c.workers);
  if (const Json* s = r.section(merged, "paths")) {
    r.reject_unknown(*s, "paths", {"umls_dict", "i2b2_source", "templates"});
    r.read(*s, "umls_dict", "paths", c.paths.umls_dict);
    r.read(*s, "i2b2_source", "paths", c.paths.i2b2_source);
    r.read(*s, "templates", "paths", c.paths.templates);
  }
  if (const Json* s = r.section(merged, "annotation")) {
    r.reject_unknown(*s, "annotation", {"threshold", "max_window"});
    r.read(*s, "threshold", "annotation", c.annotation.threshold);
    r.read(*s, "max_window", "annotation", c.annotation.max_window);
  }
  if (const Json* s = r.section(merged, "masking")) {
    r.reject_unknown(*s, "masking", {"p_umls", "p_i2b2", "p_sentence", "sentinel_format"});
    r.read(*s, "p_umls", "masking", c.masking.p_umls);
    r.read(*s, "p_i2b2", "masking", c.masking.p_i2b2);
    r.read(*s, "p_sentence", "masking", c.masking.p_sentence);
    r.read(*s, "sentinel_format", "masking", c.masking.sentinel_format);
  }
  if (const Json* s = r.section(merged, "generation")) {
    r.reject_unknown(*s, "generation", {"max_output_tokens", "lambda", "decoding", "top_k"});
    r.read(*s, "max_output_tokens", "generation", c.generation.max_output_tokens);
    r.read(*s, "lambda", "generation", c.generation.lambda);
    r.read(*s, "top_k", "generation", c.generation.top_k);
    std::string decoding = c.generation.decoding == Decoding::kGreedy ? "greedy" : "top-k";
    r.read(*s, "decoding", "generation", decoding);
    if (decoding == "greedy")
      c.generation.decoding = Decoding::kGreedy;
    else if (decoding == "top-k" || decoding == "topk")
      c.generation.decoding = Decoding::kTopK;
    else
      errors.push_back("generation.decoding: expected \"greedy\" or \"top-k\"");
  }
  if (const Json* s = r.section(merged, "filter")) {
    r.reject_unknown(*s, "filter", {"keep_fraction", "weights", "embedder", "idf"});
    r.read(*s, "keep_fraction", "filter", c.filter.keep_fraction);
    r.read(*s, "embedder", "filter", c.filter.embedder);
    r.read(*s, "idf", "filter", c.filter.idf);
    if (const Json* w = r.section(*s, "weights")) {
      c.filter.weights.clear();
      for (const auto& [name, value] : w->items()) {
        if (!value.is_number())
          errors.push_back("filter.weights." + name + ": expected a number");
        else
          c.filter.weights[name] = value.get<double>();
      }
    }
  }
  if (const Json* s = r.section(merged, "task")) {
    r.reject_unknown(*s, "task", {"mode", "target_size", "separator", "max_input_tokens",
                                  "problem_delimiter"});
    std::string mode = to_string(c.task.mode);
    r.read(*s, "mode", "task", mode);
    try {
      c.task.mode = parse_composition_mode(mode);
    } catch (const ConfigError& e) {
      errors.push_back(std::string("task.mode: ") + e.what());
    }
    r.read(*s, "target_size", "task", c.task.target_size);
    r.read(*s, "separator", "task", c.task.separator);
    r.read(*s, "max_input_tokens", "task", c.task.max_input_tokens);
    r.read(*s, "problem_delimiter", "task", c.problem_delimiter);
  }
  if (const Json* s = r.section(merged, "rouge")) {
    r.reject_unknown(*s, "rouge", {"stem"});
    r.read(*s, "stem", "rouge", c.rouge_stem);
  }

  // One global seed fans out to every module.
  c.masking.seed = c.seed;
  c.generation.seed = c.seed;

  auto more = validate_config(c);
  errors.insert(errors.end(), more.begin(), more.end());
  if (!errors.empty()) {
    std::string msg = "invalid configuration:";
    for (const auto& e : errors) msg += "\n  " + e;
    throw ConfigError("config", msg);
  }
  return c;
}

/// Reads a configuration file. Relative entries under "paths" are resolved
/// against the file's directory.
inline Json load_config_file(const std::filesystem::path& path) {
  Json j;
  try {
    j = Json::parse(read_file(path, "config"));
  } catch (const Json::exception& e) {
    throw ConfigError("config", path.string() + ": " + e.what());
  }
  auto paths = j.find("paths");
  if (paths == j.end() || !paths->is_object()) return j;
  const auto base = path.parent_path();
  for (auto& [key, value] : paths->items()) {
    if (!value.is_string()) continue;
    std::string v = value.get<std::string>();
    std::string prefix;
    for (std::string_view p : {"dict:", "standoff:"})
      if (std::string_view(v).substr(0, p.size()) == p) prefix = std::string(p);
    std::filesystem::path rest = v.substr(prefix.size());
    if (!rest.empty() && rest.is_relative()) value = prefix + (base / rest).string();
  }
  return j;
}

}  // namespace clinsum
