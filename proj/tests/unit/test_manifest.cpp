#include <sstream>

#include <gtest/gtest.h>

#include "serprobe/featureio/manifest.hpp"
#include "support/testing.hpp"

namespace serprobe {
namespace {

TEST(Manifest, ParsesHeaderAndEntries) {
  std::istringstream in(
      R"({"label_names":["neutral","happy","sad","angry"],"hook":"post-ln"})"
      "\n"
      R"({"utterance_id":"a","speaker_id":"Ses01_F","session_id":"Ses01","label_name":"sad","feature_path":"f/a.serf","duration_s":1.5})"
      "\n\n"
      R"({"utterance_id":"b","speaker_id":"Ses01_M","session_id":"Ses01","label_index":3,"feature_path":"/abs/b.serf","aux_feature_path":"x/b.serf"})"
      "\n");
  const auto m = parse_manifest(in, "/data");
  ASSERT_EQ(m.num_classes(), 4u);
  ASSERT_EQ(m.entries.size(), 2u);
  EXPECT_EQ(m.entries[0].label_index, 2);
  EXPECT_DOUBLE_EQ(m.entries[0].duration_s, 1.5);
  EXPECT_FALSE(m.entries[0].has_aux());
  EXPECT_TRUE(m.entries[1].has_aux());
  EXPECT_EQ(m.header_extra.at("hook"), "post-ln");
  EXPECT_EQ(m.resolve(m.entries[0].feature_path), std::filesystem::path("/data/f/a.serf"));
  EXPECT_EQ(m.resolve(m.entries[1].feature_path), std::filesystem::path("/abs/b.serf"));
}

TEST(Manifest, FormatParseRoundTrip) {
  DatasetManifest m;
  m.label_names = {"x", "y"};
  m.header_extra = {{"source", "unit"}};
  for (int i = 0; i < 5; ++i) {
    ManifestEntry e;
    e.utterance_id = "u" + std::to_string(i);
    e.speaker_id = "Actor_0" + std::to_string(i);
    e.session_id = "S";
    e.label_index = i % 2;
    e.label_name = m.label_names[i % 2];
    e.feature_path = "features/u" + std::to_string(i) + ".serf";
    if (i == 3) e.aux_feature_path = "aux/u3.serf";
    e.duration_s = 0.25 * i;
    m.entries.push_back(e);
  }
  std::istringstream in(format_manifest(m));
  const auto back = parse_manifest(in);
  EXPECT_EQ(format_manifest(back), format_manifest(m));
  EXPECT_EQ(back.entries[3].aux_feature_path, "aux/u3.serf");
}

TEST(Manifest, Errors) {
  auto parse = [](const std::string& text) {
    std::istringstream in(text);
    return parse_manifest(in);
  };
  EXPECT_THROW(parse(""), ManifestError);
  EXPECT_THROW(parse("{\"utterance_id\":\"a\"}\n"), ManifestError);
  EXPECT_THROW(parse("{\"label_names\":[\"a\"]}\nnot json\n"), ManifestError);
  EXPECT_THROW(parse("{\"label_names\":[\"a\"]}\n{\"utterance_id\":\"a\",\"speaker_id\":\"s\",\"label_index\":1}\n"),
               ManifestError);
  EXPECT_THROW(parse("{\"label_names\":[\"a\"]}\n"
                     "{\"utterance_id\":\"a\",\"speaker_id\":\"s\",\"label_index\":0}\n"
                     "{\"utterance_id\":\"a\",\"speaker_id\":\"s\",\"label_index\":0}\n"),
               ManifestError);
  EXPECT_THROW(parse("{\"label_names\":[\"a\",\"b\"]}\n"
                     "{\"utterance_id\":\"a\",\"speaker_id\":\"s\",\"label_index\":0,\"label_name\":\"b\"}\n"),
               ManifestError);
  EXPECT_THROW(parse("{\"label_names\":[\"a\"]}\n{\"utterance_id\":\"a\",\"speaker_id\":\"s\",\"label_index\":\"0\"}\n"),
               ManifestError);
}

TEST(Manifest, OpenCorpusChecksFilesAndReconcilesIds) {
  testing::TempDir dir;
  std::mt19937_64 rng(2);
  DatasetManifest m;
  m.label_names = {"a", "b"};
  for (int i = 0; i < 3; ++i) {
    // empty id fields in the file are filled from the manifest
    auto r = testing::random_record(rng, 2, 4, 3, i == 0 ? "" : "u" + std::to_string(i), "", "");
    write_feature_file(r, dir / ("u" + std::to_string(i) + ".serf"));
    ManifestEntry e;
    e.utterance_id = "u" + std::to_string(i);
    e.speaker_id = "spk";
    e.session_id = "S1";
    e.label_index = i % 2;
    e.feature_path = "u" + std::to_string(i) + ".serf";
    m.entries.push_back(e);
  }
  write_manifest(m, dir / "manifest.jsonl");
  const Corpus c = open_corpus(dir / "manifest.jsonl");
  ASSERT_EQ(c.size(), 3u);
  const auto r0 = c.store->features(0);
  EXPECT_EQ(r0->utterance_id, "u0");
  EXPECT_EQ(r0->speaker_id, "spk");
  EXPECT_EQ(r0->label, 0);
  EXPECT_EQ(c.store->features(1)->label, 1);
  EXPECT_EQ(c.store->aux(1), nullptr);

  auto bad = m;
  bad.entries[1].utterance_id = "other";
  write_manifest(bad, dir / "bad.jsonl");
  const Corpus cb = open_corpus(dir / "bad.jsonl");
  EXPECT_THROW(cb.store->features(1), ManifestError);

  auto missing = m;
  missing.entries[2].feature_path = "nope.serf";
  write_manifest(missing, dir / "missing.jsonl");
  EXPECT_THROW(open_corpus(dir / "missing.jsonl"), Error);
}

}  // namespace
}  // namespace serprobe
