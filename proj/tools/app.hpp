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

// The clinsum command line. Kept in a header so tests can drive run()
// in-process with captured streams.
//
// Exit codes: 0 success, 1 usage or configuration, 2 data, 3 internal.

#pragma once

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <memory>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "clinsum/annotation.hpp"
#include "clinsum/augmentation.hpp"
#include "clinsum/config.hpp"
#include "clinsum/corpus.hpp"
#include "clinsum/errors.hpp"
#include "clinsum/language_model.hpp"
#include "clinsum/rouge.hpp"
#include "clinsum/similarity.hpp"
#include "clinsum/task_dataset.hpp"

namespace clinsum::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kData = 2, kInternal = 3 };

inline int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kConfig:
      return kUsage;
    case ErrorKind::kInternal:
      return kInternal;
    default:
      return kData;
  }
}

/// Structured "[level] module: message" lines on the error stream.
class Logger {
 public:
  Logger(std::ostream& err, bool quiet) : err_(err), quiet_(quiet) {}

  void info(const std::string& module, const std::string& msg) const {
    if (!quiet_) err_ << "[info] " << module << ": " << msg << '\n';
  }
  void warn(const std::string& module, const std::string& msg) const {
    err_ << "[warn] " << module << ": " << msg << '\n';
  }
  void error(const std::string& module, const std::string& msg) const {
    err_ << "[error] " << module << ": " << msg << '\n';
  }
  WarningSink sink(std::string module) const {
    return [this, module = std::move(module)](const std::string& m) { warn(module, m); };
  }

 private:
  std::ostream& err_;
  bool quiet_;
};

namespace detail {

/// Collects flag values that were actually given into a JSON overlay.
class Overlay {
 public:
  template <typename T>
  CLI::Option* add(CLI::App* app, const std::string& flag, T& storage,
                   std::vector<std::string> path, const std::string& help) {
    auto* opt = app->add_option(flag, storage, help);
    entries_.push_back({opt, [&storage, path = std::move(path)](Json& j) {
                          Json* node = &j;
                          for (std::size_t i = 0; i + 1 < path.size(); ++i) node = &(*node)[path[i]];
                          (*node)[path.back()] = storage;
                        }});
    return opt;
  }

  CLI::Option* add_flag(CLI::App* app, const std::string& flag, bool& storage,
                        std::vector<std::string> path, const std::string& help) {
    auto* opt = app->add_flag(flag, storage, help);
    entries_.push_back({opt, [&storage, path = std::move(path)](Json& j) {
                          Json* node = &j;
                          for (std::size_t i = 0; i + 1 < path.size(); ++i) node = &(*node)[path[i]];
                          (*node)[path.back()] = storage;
                        }});
    return opt;
  }

  Json build() const {
    Json j = Json::object();
    for (const auto& e : entries_)
      if (e.opt->count() > 0) e.apply(j);
    return j;
  }

 private:
  struct Entry {
    CLI::Option* opt;
    std::function<void(Json&)> apply;
  };
  std::vector<Entry> entries_;
};

inline std::map<std::string, double> parse_weights(const std::string& spec) {
  std::map<std::string, double> out;
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto eq = item.find('=');
    if (eq == std::string::npos)
      throw ConfigError("cli", "weights must look like name=value[,name=value]: '" + spec + "'");
    const std::string name(trim(std::string_view(item).substr(0, eq)));
    try {
      out[name] = std::stod(item.substr(eq + 1));
    } catch (const std::exception&) {
      throw ConfigError("cli", "bad weight value in '" + item + "'");
    }
  }
  return out;
}

inline std::vector<Label> parse_labels(const std::string& spec) {
  std::vector<Label> out;
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      out.push_back(label_from_name(trim(item)));
    } catch (const Error& e) {
      throw ConfigError("cli", e.what());
    }
  }
  if (out.empty()) throw ConfigError("cli", "no target labels given");
  return out;
}

/// One text per record: plain text files hold one per line; .jsonl / .json
/// lines take `field`, or the first of prediction / summary / target / text.
inline std::vector<std::string> read_texts(const std::filesystem::path& path,
                                           const std::string& field) {
  const auto lines = read_lines(path, "rouge");
  const auto ext = path.extension().string();
  if (ext != ".jsonl" && ext != ".json" && ext != ".ndjson") return lines;
  std::vector<std::string> out;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (trim(lines[i]).empty()) continue;
    const auto where = path.string() + ":" + std::to_string(i + 1) + ": ";
    Json j;
    try {
      j = Json::parse(lines[i]);
    } catch (const Json::exception& e) {
      throw FormatError("rouge", where + e.what());
    }
    std::vector<std::string> keys;
    if (!field.empty())
      keys = {field};
    else
      keys = {"prediction", "summary", "target", "text"};
    bool found = false;
    for (const auto& k : keys) {
      auto it = j.find(k);
      if (it == j.end()) continue;
      if (it->is_string()) {
        out.push_back(it->get<std::string>());
      } else if (it->is_array()) {
        std::vector<std::string> parts;
        for (const auto& p : *it) parts.push_back(p.get<std::string>());
        out.push_back(join(parts, "\n"));
      } else {
        throw FormatError("rouge", where + "field '" + k + "' must be a string or array");
      }
      found = true;
      break;
    }
    if (!found) throw FormatError("rouge", where + "no text field found");
  }
  return out;
}

inline PretrainSetup make_pretrain_setup(const PipelineConfig& cfg) {
  if (cfg.paths.umls_dict.empty())
    throw ConfigError("cli", "a UMLS dictionary is required (--umls-dict or paths.umls_dict)");
  PretrainSetup setup;
  setup.umls = std::make_shared<const TermDictionary>(load_dictionary(cfg.paths.umls_dict, "umls"));
  setup.i2b2 = load_i2b2_source(cfg.paths.i2b2_source);
  setup.annotation = cfg.annotation;
  setup.masking = cfg.masking;
  return setup;
}

/// Toy generation backend trained on the notes themselves.
inline BigramLM train_note_lm(std::span<const ProgressNote> notes, const TemplateSet& templates,
                              std::uint64_t seed) {
  std::vector<std::string> texts;
  for (const auto& n : notes) {
    texts.push_back(n.text);
    for (const auto* s : {&n.assessment, &n.subjective, &n.objective, &n.summary})
      if (*s) texts.push_back(**s);
  }
  for (const auto& t : templates.all()) texts.push_back(t.text);
  BigramLMOptions opt;
  opt.seed = seed;
  return BigramLM::train(texts, opt);
}

inline void write_json_file(const Json& j, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cli", "cannot open " + path.string() + " for writing");
  out << j.dump(2) << '\n';
  if (!out) throw IoError("cli", "write failed for " + path.string());
}

inline std::string fixed(double v, int digits = 2) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(digits) << v;
  return s.str();
}

}  // namespace detail

/// Runs one invocation. `args` excludes the program name.
inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Clinical note pre-training, augmentation and evaluation pipeline", "clinsum"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  bool quiet = false;
  detail::Overlay overlay;
  std::uint64_t seed = 0;
  std::size_t workers = 1;
  app.add_option("--config", config_path, "JSON configuration file")->check(CLI::ExistingFile);
  app.add_flag("-q,--quiet", quiet, "Only log warnings and errors");
  overlay.add(&app, "--seed", seed, {"seed"}, "Global random seed");
  overlay.add(&app, "--workers", workers, {"workers"}, "Worker threads");

  // Pre-training corpus options are shared by build-pretrain and stats.
  std::string input, out_path, stats_path, umls_dict, i2b2_source, sentinel_format, list_delim;
  double p_umls = 0, p_i2b2 = 0, p_sentence = 0, threshold = 0;
  std::size_t max_window = 0;
  auto add_corpus_options = [&](CLI::App* sub) {
    sub->add_option("--input", input, "Notes: .jsonl file, text file or directory")->required();
    overlay.add(sub, "--umls-dict", umls_dict, {"paths", "umls_dict"}, "UMLS term list, one per line");
    overlay.add(sub, "--i2b2-source", i2b2_source, {"paths", "i2b2_source"},
                "i2b2 dictionary or standoff file (dict:<path> / standoff:<path>)");
    overlay.add(sub, "--p-umls", p_umls, {"masking", "p_umls"}, "UMLS channel probability");
    overlay.add(sub, "--p-i2b2", p_i2b2, {"masking", "p_i2b2"}, "i2b2 channel probability");
    overlay.add(sub, "--p-sentence", p_sentence, {"masking", "p_sentence"},
                "Whole-sentence mask probability");
    overlay.add(sub, "--threshold", threshold, {"annotation", "threshold"}, "Match threshold");
    overlay.add(sub, "--max-window", max_window, {"annotation", "max_window"},
                "Longest candidate span in tokens");
    overlay.add(sub, "--sentinel-format", sentinel_format, {"masking", "sentinel_format"},
                "Sentinel pattern with one {i}");
    overlay.add(sub, "--list-delim", list_delim, {"task", "problem_delimiter"},
                "Joiner for problem lists given as arrays");
  };

  auto* build = app.add_subcommand("build-pretrain", "Annotate and mask notes into a pre-training corpus");
  add_corpus_options(build);
  build->add_option("--out", out_path, "Output .jsonl")->required();
  build->add_option("--stats", stats_path, "Write corpus statistics JSON here");

  auto* stats = app.add_subcommand("stats", "Print corpus statistics without writing examples");
  add_corpus_options(stats);

  std::string train_path, templates_dir, labels_spec = "1", decoding;
  double lambda = 0;
  std::size_t max_out = 0, top_k = 0;
  auto* augment = app.add_subcommand("augment", "Generate self-debiased paraphrase pairs");
  augment->add_option("--train", train_path, "Training notes .jsonl")->required()->check(CLI::ExistingFile);
  overlay.add(augment, "--templates", templates_dir, {"paths", "templates"}, "Template directory");
  overlay.add(augment, "--lambda", lambda, {"generation", "lambda"}, "Debiasing strength");
  overlay.add(augment, "--max-out", max_out, {"generation", "max_output_tokens"}, "Output token limit");
  overlay.add(augment, "--decoding", decoding, {"generation", "decoding"}, "greedy or top-k");
  overlay.add(augment, "--top-k", top_k, {"generation", "top_k"}, "k for top-k decoding");
  augment->add_option("--labels", labels_spec, "Target labels, comma separated (1, 0.5, 0)");
  std::string augment_out;
  augment->add_option("--out", augment_out, "Output pairs .jsonl")->required();

  std::string filter_in, filter_out, embedder, weights_spec;
  double keep = 0;
  bool idf = false;
  auto* filter = app.add_subcommand("filter", "Score pairs and keep the most similar fraction");
  filter->add_option("--in", filter_in, "Pairs .jsonl")->required()->check(CLI::ExistingFile);
  filter->add_option("--out", filter_out, "Kept pairs .jsonl")->required();
  overlay.add(filter, "--keep", keep, {"filter", "keep_fraction"}, "Fraction to keep");
  overlay.add(filter, "--embedder", embedder, {"filter", "embedder"},
              "onehot, hashed-random(<seed>) or file:<path>");
  overlay.add_flag(filter, "--idf", idf, {"filter", "idf"}, "IDF-weight the greedy match");
  auto* weights_opt =
      filter->add_option("--weights", weights_spec, "Scorer weights, e.g. bertscore=0.5,trigram=0.5");

  std::string notes_path, pairs_path, mode, separator, assemble_out;
  std::size_t target_size = 0, max_input_tokens = 0;
  auto* assemble = app.add_subcommand("assemble", "Build the problem-list fine-tuning set");
  assemble->add_option("--notes", notes_path, "Notes .jsonl")->required()->check(CLI::ExistingFile);
  assemble->add_option("--pairs", pairs_path, "Filtered pairs .jsonl")->check(CLI::ExistingFile);
  overlay.add(assemble, "--mode", mode, {"task", "mode"}, "a or aso");
  overlay.add(assemble, "--target-size", target_size, {"task", "target_size"}, "Instances to produce");
  overlay.add(assemble, "--max-input-tokens", max_input_tokens, {"task", "max_input_tokens"},
              "Truncate inputs (0 keeps everything)");
  overlay.add(assemble, "--separator", separator, {"task", "separator"}, "Section separator");
  assemble->add_option("--out", assemble_out, "Output .jsonl")->required();

  std::string pred_path, ref_path, field;
  bool stem = false, as_json = false;
  auto* evaluate = app.add_subcommand("evaluate", "ROUGE-1/2/L of predictions against references");
  evaluate->add_option("--pred", pred_path, "Predictions")->required()->check(CLI::ExistingFile);
  evaluate->add_option("--ref", ref_path, "References")->required()->check(CLI::ExistingFile);
  evaluate->add_option("--field", field, "JSON field holding the text");
  overlay.add_flag(evaluate, "--stem", stem, {"rouge", "stem"}, "Porter-stem tokens");
  evaluate->add_flag("--json", as_json, "Print JSON instead of a table");

  std::vector<const char*> argv{"clinsum"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    if (app.get_subcommands().empty()) err << app.help();
    return kUsage;
  }

  const Logger log(err, quiet);
  try {
    Json file = config_path.empty() ? Json::object() : load_config_file(config_path);
    Json flags = overlay.build();
    if (weights_opt->count()) {
      Json w = Json::object();
      for (const auto& [k, v] : detail::parse_weights(weights_spec)) w[k] = v;
      flags["filter"]["weights"] = w;
      if (file.contains("filter") && file["filter"].is_object()) file["filter"].erase("weights");
    }
    const PipelineConfig cfg = parse_config(file, flags);

    if (build->parsed() || stats->parsed()) {
      const auto setup = detail::make_pretrain_setup(cfg);
      NoteReader reader(input, cfg.problem_delimiter);
      CorpusStats st;
      if (build->parsed()) {
        CorpusWriter writer(out_path);
        st = build_pretrain_corpus(reader, setup, [&](const MaskedExample& ex) { writer.write(ex); },
                                   cfg.workers, log.sink("corpus"));
        writer.close();
        log.info("corpus", "wrote " + std::to_string(st.total_rows) + " examples to " + out_path);
        if (!stats_path.empty())
          detail::write_json_file(st.to_json(), stats_path);
        else
          out << st.to_json().dump(2) << '\n';
      } else {
        st = build_pretrain_corpus(reader, setup, [](const MaskedExample&) {}, cfg.workers,
                                   log.sink("corpus"));
        out << st.to_json().dump(2) << '\n';
      }
      return kOk;
    }

    if (augment->parsed()) {
      const auto notes = read_notes(train_path, cfg.problem_delimiter);
      const TemplateSet templates =
          cfg.paths.templates.empty() ? TemplateSet::defaults() : TemplateSet::load(cfg.paths.templates);
      const BigramLM lm = detail::train_note_lm(notes, templates, cfg.seed);
      const auto labels = detail::parse_labels(labels_spec);
      AugmentStats st;
      const auto pairs = generate_pairs(notes, lm, templates, cfg.generation, labels, &st,
                                        log.sink("augmentation"));
      write_pairs(pairs, augment_out);
      log.info("augmentation", "sources " + std::to_string(st.sources) + ", kept " +
                                   std::to_string(pairs.size()) + ", rejected (terms) " +
                                   std::to_string(st.rejected_terms) + ", rejected (empty) " +
                                   std::to_string(st.rejected_empty));
      return kOk;
    }

    if (filter->parsed()) {
      auto pairs = read_pairs(filter_in);
      const auto emb = make_embedder(cfg.filter.embedder, cfg.seed);
      score_pairs(pairs, *emb, cfg.filter);
      const auto kept = filter_pairs(pairs, cfg.filter.keep_fraction);
      write_pairs(kept, filter_out);
      log.info("similarity", "kept " + std::to_string(kept.size()) + " of " +
                                 std::to_string(pairs.size()) + " pairs");
      return kOk;
    }

    if (assemble->parsed()) {
      const auto notes = read_notes(notes_path, cfg.problem_delimiter);
      std::vector<GeneratedPair> pairs;
      if (!pairs_path.empty()) pairs = read_pairs(pairs_path);
      AssembleStats st;
      const auto items = assemble_training_set(notes, pairs, cfg.task, &st, log.sink("task_dataset"));
      write_instances(items, assemble_out);
      log.info("task_dataset", "wrote " + std::to_string(st.originals) + " original and " +
                                   std::to_string(st.augmented) + " augmented instances");
      return kOk;
    }

    if (evaluate->parsed()) {
      const auto preds = detail::read_texts(pred_path, field);
      const auto refs = detail::read_texts(ref_path, field);
      const auto s = evaluate_corpus(preds, refs, RougeOptions{cfg.rouge_stem});
      if (as_json) {
        Json j;
        for (const auto& [name, p] : {std::pair{"rouge1", s.r1}, {"rouge2", s.r2}, {"rougeL", s.rl}})
          j[name] = {{"precision", p.precision}, {"recall", p.recall}, {"f1", p.f1}};
        j["count"] = preds.size();
        out << j.dump(2) << '\n';
      } else {
        out << "metric    F1      P       R\n";
        for (const auto& [name, p] : {std::pair{"R-1", s.r1}, {"R-2", s.r2}, {"R-L", s.rl}})
          out << std::left << std::setw(10) << name << std::setw(8) << detail::fixed(100 * p.f1)
              << std::setw(8) << detail::fixed(100 * p.precision) << detail::fixed(100 * p.recall)
              << '\n';
      }
      return kOk;
    }
    err << app.help();
    return kUsage;
  } catch (const Error& e) {
    log.error(e.module(), e.what());
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    log.error("cli", std::string("internal error: ") + e.what());
    return kInternal;
  }
}

}  // namespace clinsum::cli
