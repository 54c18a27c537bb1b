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

#include <string>
#include <vector>

#include "clinsum/corpus.hpp"
#include "test_support.hpp"

namespace clinsum {
namespace {

using testing::TempDir;

PretrainSetup make_setup(I2b2Source i2b2) {
  PretrainSetup s;
  s.umls = std::make_shared<const TermDictionary>(
      TermDictionary::from_terms(testing::umls_terms(), "umls"));
  s.i2b2 = std::move(i2b2);
  s.masking.seed = 3;
  return s;
}

PretrainSetup default_setup() {
  return make_setup(std::make_shared<const TermDictionary>(
      TermDictionary::from_terms(testing::i2b2_terms(), "i2b2")));
}

std::vector<MaskedExample> run_corpus(const std::filesystem::path& input, const PretrainSetup& setup,
                                      std::size_t workers, CorpusStats* stats = nullptr,
                                      std::size_t batch = 1024, std::vector<std::string>* warnings = nullptr) {
  NoteReader reader(input);
  std::vector<MaskedExample> out;
  auto st = build_pretrain_corpus(
      reader, setup, [&](const MaskedExample& ex) { out.push_back(ex); }, workers,
      [&](const std::string& w) {
        if (warnings) warnings->push_back(w);
      },
      batch);
  if (stats) *stats = st;
  return out;
}

TEST(SegmentSentences, SplitsOnTerminalPunctuationBeforeCapital) {
  const std::string text = "Pt stable.  BP 120/80 (improved.) Continue meds? yes. Dr. Smith saw pt.";
  const auto s = segment_sentences(text);
  ASSERT_EQ(s.size(), 5u);
  EXPECT_EQ(s[0].text, "Pt stable.");
  EXPECT_EQ(s[1].text, "BP 120/80 (improved.)");
  EXPECT_EQ(s[2].text, "Continue meds? yes.");
  EXPECT_EQ(s[3].text, "Dr.");
  for (const auto& x : s) EXPECT_EQ(text.substr(x.begin, x.end - x.begin), x.text);
  EXPECT_TRUE(segment_sentences("   ").empty());
}

TEST(SegmentSentences, OnlyWhitespaceBetweenSentences) {
  Rng rng(8);
  for (int i = 0; i < 300; ++i) {
    const auto doc = "  " + testing::synthetic_document(rng, 1 + rng.below(8)) + " \n";
    const auto s = segment_sentences(doc);
    std::size_t cursor = 0;
    for (const auto& x : s) {
      for (std::size_t k = cursor; k < x.begin; ++k) ASSERT_TRUE(is_space(doc[k]));
      cursor = x.end;
    }
    for (std::size_t k = cursor; k < doc.size(); ++k) ASSERT_TRUE(is_space(doc[k]));
  }
}

TEST(NoteFromJson, AcceptsTextOrSectionsAndListSummaries) {
  auto n = note_from_json(Json::parse(R"({"doc_id": 17, "assessment": "A.", "objective": "O.",
                                          "summary": ["x", "y"]})"),
                          "; ");
  EXPECT_EQ(n.doc_id, "17");
  EXPECT_EQ(n.text, "A.\nO.");
  EXPECT_EQ(*n.summary, "x; y");
  EXPECT_FALSE(n.subjective.has_value());
  EXPECT_THROW(note_from_json(Json::parse(R"({"text": "x"})")), DataError);
  EXPECT_THROW(note_from_json(Json::parse(R"({"doc_id": "a", "text": 5})")), DataError);
  EXPECT_EQ(note_from_json(note_to_json(n)).summary, n.summary);
}

TEST(NoteReader, SkipsMalformedLinesAndReadsDirectories) {
  TempDir dir;
  testing::write_text(dir / "b.jsonl", "{\"doc_id\": \"b1\", \"text\": \"Edema.\"}\n{broken\n\n");
  testing::write_text(dir / "a.txt", "Plain text note.");
  NoteReader reader(dir.path());
  std::vector<std::string> seen;
  std::size_t skipped = 0;
  while (auto item = reader.next()) {
    if (auto* n = std::get_if<ProgressNote>(&*item))
      seen.push_back(n->doc_id);
    else
      ++skipped;
  }
  EXPECT_EQ(seen, (std::vector<std::string>{"a", "b1"}));
  EXPECT_EQ(skipped, 1u);
  EXPECT_THROW(NoteReader(dir / "missing"), IoError);
}

// Three notes with known coverage: one with both channels, one with only
// UMLS concepts, one with neither.
TEST(BuildPretrainCorpus, StatsMatchHandCounts) {
  TempDir dir;
  testing::write_text(dir / "notes.jsonl",
                      "{\"doc_id\": \"both\", \"text\": \"Worsening dyspnea and edema. Fevers noted.\"}\n"
                      "{\"doc_id\": \"umls\", \"text\": \"History of anemia.\"}\n"
                      "{\"doc_id\": \"none\", \"text\": \"Patient resting comfortably.\"}\n");
  CorpusStats st;
  const auto out = run_corpus(dir / "notes.jsonl", default_setup(), 1, &st);
  ASSERT_EQ(out.size(), 3u);
  EXPECT_EQ(st.total_rows, 3u);
  EXPECT_EQ(st.rows_no_umls, 1u);
  EXPECT_EQ(st.rows_no_i2b2, 2u);
  EXPECT_EQ(st.rows_no_entities, 1u);
  EXPECT_EQ(st.sentences_total, 4u);
  EXPECT_EQ(st.skipped_rows, 0u);
}

TEST(BuildPretrainCorpus, SkipsDuplicatesMalformedAndSentinelNotes) {
  TempDir dir;
  testing::write_text(dir / "notes.jsonl",
                      "{\"doc_id\": \"a\", \"text\": \"Edema.\"}\n"
                      "{\"doc_id\": \"a\", \"text\": \"Anemia.\"}\n"
                      "not json\n"
                      "{\"doc_id\": \"s\", \"text\": \"Has <extra_id_0> inside.\"}\n"
                      "{\"doc_id\": \"e\", \"text\": \"   \"}\n"
                      "{\"doc_id\": \"b\", \"text\": \"Sepsis.\"}\n");
  CorpusStats st;
  std::vector<std::string> warnings;
  const auto out = run_corpus(dir / "notes.jsonl", default_setup(), 2, &st, 1024, &warnings);
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[0].doc_id, "a");
  EXPECT_EQ(out[1].doc_id, "b");
  EXPECT_EQ(st.total_rows, 2u);
  EXPECT_EQ(st.skipped_rows, 4u);
  EXPECT_EQ(warnings.size(), 4u);
}

TEST(BuildPretrainCorpus, OutputIndependentOfWorkersAndBatchSize) {
  TempDir dir;
  Rng rng(17);
  std::string lines;
  for (int i = 0; i < 400; ++i)
    lines += note_to_json({"n" + std::to_string(i), testing::synthetic_document(rng, 4), {}, {}, {}, {}})
                 .dump() +
             "\n";
  testing::write_text(dir / "notes.jsonl", lines);
  CorpusStats s1, s2, s3;
  const auto a = run_corpus(dir / "notes.jsonl", default_setup(), 1, &s1);
  const auto b = run_corpus(dir / "notes.jsonl", default_setup(), 4, &s2, 7);
  const auto c = run_corpus(dir / "notes.jsonl", default_setup(), 8, &s3, 64);
  EXPECT_EQ(a, b);
  EXPECT_EQ(a, c);
  EXPECT_EQ(s1, s2);
  EXPECT_EQ(s1, s3);
}

TEST(BuildPretrainCorpus, StandoffSourceFeedsSecondChannel) {
  TempDir dir;
  testing::write_text(dir / "notes.jsonl", "{\"doc_id\": \"d\", \"text\": \"Pain in left knee.\"}\n");
  const std::vector<std::string> lines = {"d\t0\t0\t1\tproblem", "d\t0\t3\t5\tproblem"};
  CorpusStats st;
  const auto out = run_corpus(dir / "notes.jsonl",
                              make_setup(std::make_shared<const StandoffIndex>(StandoffIndex::parse(lines))),
                              1, &st);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].input_text, "<extra_id_0> in left <extra_id_1>");
  EXPECT_EQ(st.rows_no_i2b2, 0u);
  EXPECT_EQ(st.rows_no_umls, 1u);
}

TEST(CorpusFiles, WriteThenReadRoundTrips) {
  TempDir dir;
  Rng rng(2);
  std::vector<MaskedExample> examples;
  const auto setup = default_setup();
  for (int i = 0; i < 50; ++i)
    examples.push_back(
        process_note({"n" + std::to_string(i), testing::synthetic_document(rng, 3), {}, {}, {}, {}}, setup)
            .example);
  write_corpus(examples, dir / "c.jsonl");
  EXPECT_EQ(read_corpus(dir / "c.jsonl"), examples);

  testing::write_text(dir / "bad.jsonl", "{\"doc_id\": \"x\", \"input\": \"a\", \"target\": \"b\"}\n");
  try {
    read_corpus(dir / "bad.jsonl");
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("bad.jsonl:1"), std::string::npos);
  }
}

TEST(CorpusStats, SerializesAllCounters) {
  CorpusStats s;
  s.total_rows = 3;
  s.rows_no_umls = 1;
  const auto j = s.to_json();
  EXPECT_EQ(j["total_rows"], 3);
  EXPECT_EQ(j["rows_no_umls"], 1);
  EXPECT_TRUE(j.contains("rows_no_entities"));
  EXPECT_TRUE(j.contains("skipped_rows"));
}

}  // namespace
}  // namespace clinsum
