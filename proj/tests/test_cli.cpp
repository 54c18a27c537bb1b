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

#include <gtest/gtest.h>

#include <sstream>
#include <string>
#include <vector>

#include "app.hpp"
#include "clinsum/config.hpp"
#include "test_support.hpp"

namespace clinsum {
namespace {

using testing::TempDir;

const std::filesystem::path kSamples = CLINSUM_SAMPLES_DIR;

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome run_cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

TEST(ParseConfig, DefaultsCarryPipelineConstants) {
  const auto c = parse_config(Json::object());
  EXPECT_EQ(c.masking.p_umls, 0.7);
  EXPECT_EQ(c.masking.p_i2b2, 0.3);
  EXPECT_EQ(c.masking.p_sentence, 0.15);
  EXPECT_EQ(c.filter.keep_fraction, 0.15);
  EXPECT_EQ(c.generation.max_output_tokens, 40u);
  EXPECT_EQ(c.task.mode, CompositionMode::kASO);
  EXPECT_EQ(c.task.target_size, 1000u);
}

TEST(ParseConfig, FlagsOverrideFileAndSeedFansOut) {
  const Json file = Json::parse(R"({"seed": 3, "masking": {"p_umls": 0.6}, "filter": {"keep_fraction": 0.2}})");
  const Json flags = Json::parse(R"({"masking": {"p_umls": 0.9}, "seed": 11})");
  const auto c = parse_config(file, flags);
  EXPECT_EQ(c.masking.p_umls, 0.9);
  EXPECT_NEAR(c.masking.p_i2b2, 0.1, 1e-12);
  EXPECT_EQ(c.filter.keep_fraction, 0.2);
  EXPECT_EQ(c.seed, 11u);
  EXPECT_EQ(c.masking.seed, 11u);
  EXPECT_EQ(c.generation.seed, 11u);
}

TEST(ParseConfig, ReportsAllProblemsWithFieldPaths) {
  const Json file = Json::parse(R"({"masking": {"p_umls": 1.1, "p_i2b2": 0.0, "p_sentence": "x"},
                                    "filter": {"keep_fraction": 0},
                                    "paths": {"umls_dict": "/nonexistent/umls.txt"},
                                    "bogus": 1})");
  try {
    parse_config(file);
    FAIL();
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    for (const char* field : {"masking.p_umls", "masking.p_sentence", "filter.keep_fraction",
                              "paths.umls_dict", "bogus"})
      EXPECT_NE(msg.find(field), std::string::npos) << field << "\n" << msg;
  }
}

TEST(LoadConfigFile, ResolvesPathsAgainstFileDirectory) {
  const auto j = load_config_file(kSamples / "config.json");
  EXPECT_EQ(j["paths"]["umls_dict"], (kSamples / "umls_terms.txt").string());
  EXPECT_EQ(j["paths"]["i2b2_source"], "dict:" + (kSamples / "i2b2_problems.txt").string());
  EXPECT_NO_THROW(parse_config(j));
}

TEST(Cli, UnknownSubcommandPrintsUsage) {
  const auto r = run_cli({"frobnicate"});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("Usage"), std::string::npos);
  EXPECT_EQ(run_cli({}).code, 1);
  EXPECT_EQ(run_cli({"--help"}).code, 0);
}

TEST(Cli, InvalidProbabilityIsConfigError) {
  TempDir dir;
  const auto r = run_cli({"build-pretrain", "--input", (kSamples / "notes.jsonl").string(), "--out",
                          (dir / "o.jsonl").string(), "--umls-dict", (kSamples / "umls_terms.txt").string(),
                          "--p-umls", "1.1"});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("masking.p_umls"), std::string::npos);
}

TEST(Cli, BuildPretrainWritesCorpusAndStats) {
  TempDir dir;
  const auto r = run_cli({"--config", (kSamples / "config.json").string(), "build-pretrain", "--input",
                          (kSamples / "notes.jsonl").string(), "--out", (dir / "pre.jsonl").string(),
                          "--stats", (dir / "stats.json").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto stats = Json::parse(testing::slurp(dir / "stats.json"));
  EXPECT_EQ(stats["total_rows"], 5);
  EXPECT_EQ(read_corpus(dir / "pre.jsonl").size(), 5u);

  const auto s = run_cli({"--config", (kSamples / "config.json").string(), "stats", "--input",
                          (kSamples / "notes.jsonl").string()});
  ASSERT_EQ(s.code, 0) << s.err;
  EXPECT_EQ(Json::parse(s.out), stats);
}

TEST(Cli, EvaluateReportsTableAndRejectsMismatch) {
  TempDir dir;
  testing::write_text(dir / "p.txt", "the cat sat\n");
  testing::write_text(dir / "r.txt", "the cat ate\n");
  const auto r = run_cli({"evaluate", "--pred", (dir / "p.txt").string(), "--ref", (dir / "r.txt").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("R-1       66.67"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("R-2       50.00"), std::string::npos) << r.out;
  const auto j = run_cli({"evaluate", "--json", "--pred", (dir / "p.txt").string(), "--ref",
                          (dir / "r.txt").string()});
  EXPECT_NEAR(Json::parse(j.out)["rougeL"]["f1"].get<double>(), 2.0 / 3, 1e-12);

  testing::write_text(dir / "r2.txt", "the cat ate\nmore\n");
  const auto bad = run_cli({"evaluate", "--pred", (dir / "p.txt").string(), "--ref", (dir / "r2.txt").string()});
  EXPECT_EQ(bad.code, 2);
  EXPECT_NE(bad.err.find("rouge"), std::string::npos);
}

TEST(Cli, MissingInputIsDataError) {
  TempDir dir;
  const auto r = run_cli({"build-pretrain", "--input", (dir / "none.jsonl").string(), "--out",
                          (dir / "o.jsonl").string(), "--umls-dict", (kSamples / "umls_terms.txt").string()});
  EXPECT_EQ(r.code, 2);
}

// The full chain twice with one seed gives byte-identical files.
TEST(Cli, EndToEndChainIsDeterministic) {
  auto chain = [](const TempDir& dir) {
    const std::string cfg = (kSamples / "config.json").string();
    const std::string notes = (kSamples / "notes.jsonl").string();
    std::vector<std::vector<std::string>> steps = {
        {"-q", "--config", cfg, "build-pretrain", "--input", notes, "--out", (dir / "pre.jsonl").string(),
         "--stats", (dir / "stats.json").string()},
        {"-q", "--config", cfg, "augment", "--train", notes, "--labels", "1,0.5,0", "--out",
         (dir / "pairs.jsonl").string()},
        {"-q", "--config", cfg, "filter", "--in", (dir / "pairs.jsonl").string(), "--out",
         (dir / "kept.jsonl").string()},
        {"-q", "--config", cfg, "assemble", "--notes", notes, "--pairs", (dir / "kept.jsonl").string(),
         "--out", (dir / "task.jsonl").string()},
    };
    for (const auto& s : steps) {
      const auto r = run_cli(s);
      EXPECT_EQ(r.code, 0) << r.err;
    }
    testing::write_text(dir / "pred.txt", "congestive heart failure\nacute pancreatitis\n");
    testing::write_text(dir / "ref.txt", "congestive heart failure hypertension\ncholelithiasis\n");
    const auto eval = run_cli({"evaluate", "--pred", (dir / "pred.txt").string(), "--ref",
                               (dir / "ref.txt").string()});
    EXPECT_EQ(eval.code, 0);
    std::string all;
    for (const char* f : {"pre.jsonl", "stats.json", "pairs.jsonl", "kept.jsonl", "task.jsonl"})
      all += testing::slurp(dir / f) + "\x1e";
    return all + eval.out;
  };
  TempDir a, b;
  const auto first = chain(a);
  EXPECT_EQ(first, chain(b));
  EXPECT_NE(testing::slurp(a / "task.jsonl").find("augmented"), std::string::npos);
}

}  // namespace
}  // namespace clinsum
