#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "serprobe/cli/app.hpp"
#include "serprobe/dsp/spectrogram.hpp"
#include "serprobe/eval/synthetic.hpp"
#include "support/testing.hpp"

namespace serprobe {
namespace {

struct Invocation {
  int code;
  std::string out;
  std::string err;
};

Invocation invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "serprobe");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

void write_json(const std::filesystem::path& p, const nlohmann::json& j) {
  std::ofstream(p) << j.dump(2);
}

TEST(Cli, HelpAndUsageErrors) {
  const auto help = invoke({"--help"});
  EXPECT_EQ(help.code, 0);
  EXPECT_NE(help.out.find("train-eval"), std::string::npos);
  const auto sub = invoke({"train-eval", "--help"});
  EXPECT_EQ(sub.code, 0);
  EXPECT_NE(sub.out.find("[32]"), std::string::npos);
  EXPECT_NE(sub.out.find("[0.001]"), std::string::npos);
  EXPECT_EQ(invoke({}).code, 1);
  EXPECT_EQ(invoke({"bogus"}).code, 1);
  EXPECT_EQ(invoke({"train-eval", "--config", "x.json", "--norm", "weird"}).code, 1);
}

TEST(Cli, ConfigRejectsUnknownKeysNamingTheField) {
  testing::TempDir dir;
  write_json(dir / "c.json", {{"manifest", "m.jsonl"}, {"train", {{"batch_sz", 3}}}});
  const auto r = invoke({"train-eval", "--config", (dir / "c.json").string()});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("train.batch_sz"), std::string::npos) << r.err;
  EXPECT_THROW(cli::parse_experiment_config({{"manifest", "m"}, {"dataset", "timit"}}), ValidationError);
  EXPECT_THROW(cli::parse_experiment_config({{"manifest", "m"}, {"model", {{"hidden", "big"}}}}), ValidationError);
  EXPECT_THROW(cli::parse_experiment_config(nlohmann::json::object()), ValidationError);
}

TEST(Cli, DatasetDefaults) {
  auto iemocap = cli::parse_experiment_config({{"manifest", "m"}, {"dataset", "iemocap-like"}});
  EXPECT_EQ(iemocap.spec.train.max_frames, 400u);
  EXPECT_EQ(iemocap.spec.protocol.kind, eval::Protocol::loso_session);
  auto ravdess = cli::parse_experiment_config({{"manifest", "m"}, {"dataset", "ravdess-like"}});
  EXPECT_EQ(ravdess.spec.train.max_frames, 250u);
  EXPECT_EQ(ravdess.spec.protocol.kind, eval::Protocol::fixed_actor_split);
  EXPECT_EQ(ravdess.spec.train.batch_size, 32u);
  EXPECT_EQ(ravdess.spec.train.patience, 4);
  EXPECT_DOUBLE_EQ(ravdess.spec.train.adam.learning_rate, 0.001);
  EXPECT_EQ(ravdess.spec.seeds, (std::vector<std::uint64_t>{1, 2, 3, 4, 5}));
  EXPECT_EQ(cli::parse_seed_list("4,5,9"), (std::vector<std::uint64_t>{4, 5, 9}));
  EXPECT_THROW(cli::parse_seed_list("1,,2"), ValidationError);
}

TEST(Cli, MissingManifestIsValidationError) {
  testing::TempDir dir;
  write_json(dir / "c.json", {{"manifest", "absent.jsonl"}});
  EXPECT_EQ(invoke({"train-eval", "--config", (dir / "c.json").string()}).code, 1);
}

TEST(Cli, TrainEvalReportAndInspect) {
  testing::TempDir dir;
  const auto synth = invoke({"synth-corpus", "--out", (dir / "corpus").string(), "--utterances", "8"});
  ASSERT_EQ(synth.code, 0) << synth.err;
  write_json(dir / "c.json", {{"manifest", "corpus/manifest.jsonl"},
                              {"label", "cli"},
                              {"model", {{"hidden", 8}}},
                              {"train", {{"max_epochs", 2}}}});
  const auto run = invoke({"train-eval", "--config", (dir / "c.json").string(), "--seed-list", "7",
                           "--out", (dir / "out").string(), "--quiet"});
  ASSERT_EQ(run.code, 0) << run.err;
  EXPECT_TRUE(run.err.empty()) << run.err;
  EXPECT_NE(run.out.find("cli"), std::string::npos);
  EXPECT_TRUE(std::filesystem::exists(dir / "out" / "runs" / "fold5_seed7" / "model.ckpt"));

  const auto verbose = invoke({"train-eval", "--config", (dir / "c.json").string(), "--seed-list", "7",
                               "--out", (dir / "out2").string()});
  ASSERT_EQ(verbose.code, 0);

  const auto rep = invoke({"report", (dir / "out").string(), (dir / "out2").string()});
  EXPECT_EQ(rep.code, 0) << rep.err;
  EXPECT_NE(rep.out.find("top layers"), std::string::npos);
  EXPECT_EQ(invoke({"report", (dir / "missing").string()}).code, 2);

  const auto first = (dir / "corpus" / "features" / "Actor_01_u000.serf").string();
  const auto insp = invoke({"inspect-features", first});
  EXPECT_EQ(insp.code, 0);
  EXPECT_NE(insp.out.find("speaker_id: Actor_01"), std::string::npos);
  EXPECT_NE(insp.out.find("layers: 4"), std::string::npos);
  EXPECT_EQ(invoke({"inspect-features", (dir / "c.json").string()}).code, 2);
}

TEST(Cli, ExtractSpectrogram) {
  testing::TempDir dir;
  std::filesystem::create_directories(dir / "audio");
  for (const char* id : {"a", "b"}) {
    Waveform w;
    w.sample_rate = 16000;
    w.samples.resize(8000);
    for (std::size_t i = 0; i < w.samples.size(); ++i) w.samples[i] = 0.3f * std::sin(0.39f * static_cast<float>(i));
    write_wav_pcm16(w, dir / "audio" / (std::string(id) + ".wav"));
  }
  std::ofstream(dir / "in.jsonl") << R"({"label_names":["x","y"]})" << "\n"
                                   << R"({"utterance_id":"a","speaker_id":"s1","session_id":"S1","label_index":0})" << "\n"
                                   << R"({"utterance_id":"b","speaker_id":"s2","session_id":"S1","label_index":1})" << "\n";
  const auto r = invoke({"extract-spectrogram", "--audio-dir", (dir / "audio").string(), "--manifest",
                         (dir / "in.jsonl").string(), "--out", (dir / "out").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const Corpus c = open_corpus(dir / "out" / "manifest.jsonl");
  ASSERT_EQ(c.size(), 2u);
  const auto rec = c.store->features(1);
  EXPECT_EQ(rec->num_layers, 1u);
  EXPECT_EQ(rec->dim, 257u);
  EXPECT_EQ(rec->num_frames, (1u + (8000u - 400u) / 160u) / 2u);
  EXPECT_EQ(rec->label, 1);

  std::ofstream(dir / "in.jsonl", std::ios::app)
      << R"({"utterance_id":"c","speaker_id":"s3","session_id":"S1","label_index":0})" << "\n";
  const auto partial = invoke({"extract-spectrogram", "--audio-dir", (dir / "audio").string(), "--manifest",
                               (dir / "in.jsonl").string(), "--out", (dir / "out3").string()});
  EXPECT_EQ(partial.code, 2);
  EXPECT_NE(partial.err.find("c:"), std::string::npos);
}

}  // namespace
}  // namespace serprobe
