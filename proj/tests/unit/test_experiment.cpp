#include <gtest/gtest.h>

#include "serprobe/eval/experiment.hpp"
#include "serprobe/eval/report.hpp"
#include "serprobe/eval/synthetic.hpp"
#include "support/properties.hpp"

namespace serprobe {
namespace {

eval::ExperimentSpec quick_spec() {
  eval::ExperimentSpec spec;
  spec.model.hidden = 16;
  spec.train.max_epochs = 8;
  spec.seeds = {1, 2};
  spec.protocol = {eval::Protocol::loso_session, 5, 0};
  return spec;
}

TEST(Experiment, PlantedLayerIsRecovered) {
  eval::SyntheticCorpusSpec cs;
  cs.planted_layer = 1;
  const Corpus corpus = eval::make_synthetic_corpus(cs);
  auto spec = quick_spec();
  spec.model.hidden = 32;
  spec.train.max_epochs = 100;
  const auto report = eval::run_experiment(corpus, spec);
  EXPECT_GT(report.mean_uar, 0.95);
  for (int k : testing::per_seed_argmax_alpha(report)) EXPECT_EQ(k, 1);
}

TEST(Experiment, AggregatesAreConsistent) {
  const Corpus corpus = eval::make_synthetic_corpus({});
  const auto report = eval::run_experiment(corpus, quick_spec());
  ASSERT_EQ(report.runs.size(), 10u);
  ASSERT_EQ(report.seeds.size(), 2u);
  std::vector<double> pooled;
  for (const auto& s : report.seeds) {
    double sum = 0;
    for (const auto& r : report.runs) {
      if (r.seed == s.seed) sum += r.recall.uar;
    }
    EXPECT_NEAR(s.pooled_uar, sum / 5.0, 1e-12);
    pooled.push_back(s.pooled_uar);
  }
  EXPECT_NEAR(report.mean_uar, (pooled[0] + pooled[1]) / 2.0, 1e-12);
  EXPECT_NEAR(report.std_uar, std::abs(pooled[0] - pooled[1]) / 2.0, 1e-12);
  for (const auto& r : report.runs) {
    EXPECT_EQ(r.confusion.sum(), static_cast<long long>(r.num_test));
    EXPECT_GE(r.recall.uar, 0.0);
    EXPECT_LE(r.recall.uar, 1.0);
    double total = 0;
    for (double w : r.weights.normalized) total += w;
    EXPECT_NEAR(total, 1.0, 1e-9);
  }
}

TEST(Experiment, SingleFoldSingleSeedSeparable) {
  eval::SyntheticCorpusSpec cs;
  cs.num_speakers = 24;
  cs.utterances_per_speaker = 8;
  cs.signal = 3.0;
  const Corpus corpus = eval::make_synthetic_corpus(cs);
  auto spec = quick_spec();
  spec.protocol.kind = eval::Protocol::fixed_actor_split;
  spec.seeds = {1};
  spec.train.max_epochs = 30;
  const auto report = eval::run_experiment(corpus, spec);
  ASSERT_EQ(report.runs.size(), 1u);
  EXPECT_DOUBLE_EQ(report.runs[0].recall.uar, 1.0);
  EXPECT_EQ(report.runs[0].num_test, 16u);
}

TEST(Experiment, ParallelRunsMatchSerial) {
  const Corpus corpus = eval::make_synthetic_corpus({});
  auto spec = quick_spec();
  spec.train.max_epochs = 3;
  const auto serial = eval::to_json(eval::run_experiment(corpus, spec)).dump();
  spec.jobs = 3;
  auto parallel = eval::to_json(eval::run_experiment(corpus, spec));
  parallel["config"]["jobs"] = nullptr;
  auto s = nlohmann::json::parse(serial);
  s["config"]["jobs"] = nullptr;
  EXPECT_EQ(s.dump(), parallel.dump());
}

TEST(Experiment, GlobalStatsUseOnlyTrainingPartitions) {
  const Corpus corpus = eval::make_synthetic_corpus({});
  const auto check = testing::check_global_scope(corpus, {eval::Protocol::loso_session, 5, 0});
  EXPECT_TRUE(check.test_invariant);
  EXPECT_TRUE(check.train_sensitive);
}

TEST(Experiment, SpeakerStatsSeeTestData) {
  const Corpus corpus = eval::make_synthetic_corpus({});
  const auto fold = eval::make_folds(corpus.manifest, {eval::Protocol::loso_session, 5, 0})[0];
  const auto base = eval::fold_normalizer(corpus, fold, NormMode::speaker, false).primary;
  const auto moved = testing::perturbed_copy(corpus, fold.test, 1.0f);
  EXPECT_FALSE(testing::same_stats(base, eval::fold_normalizer(moved, fold, NormMode::speaker, false).primary));
}

TEST(Experiment, FusionWithAuxStream) {
  eval::SyntheticCorpusSpec cs;
  cs.aux_dim = 5;
  const Corpus corpus = eval::make_synthetic_corpus(cs);
  auto spec = quick_spec();
  spec.model.variant = nn::Variant::fusion;
  spec.seeds = {1};
  spec.train.max_epochs = 2;
  spec.norm = NormMode::global;
  const auto report = eval::run_experiment(corpus, spec);
  EXPECT_EQ(report.model.aux_dim, 5);
  EXPECT_EQ(report.runs.size(), 5u);
}

TEST(Experiment, FailureNamesFoldAndSeed) {
  const Corpus corpus = eval::make_synthetic_corpus({});
  auto spec = quick_spec();
  spec.model.variant = nn::Variant::fusion;  // no aux stream in this corpus
  EXPECT_THROW(eval::run_experiment(corpus, spec), ValidationError);
  spec = quick_spec();
  spec.protocol.folds = 4;
  EXPECT_THROW(eval::run_experiment(corpus, spec), eval::ProtocolError);
}

TEST(LayerWeights, ReportAndScaleInvariance) {
  nn::ParamSet<float> p;
  p.set(nn::param::alpha, (Matrix<float>(2, 1) << 2.0f, 2.0f).finished());
  auto w = eval::report_layer_weights(p);
  EXPECT_EQ(w.normalized, (std::vector<double>{0.5, 0.5}));
  p.set(nn::param::alpha, (Matrix<float>(3, 1) << 0.5f, 1.5f, 2.0f).finished());
  const auto a = eval::report_layer_weights(p);
  p.set(nn::param::alpha, (Matrix<float>(3, 1) << 1.5f, 4.5f, 6.0f).finished());
  const auto b = eval::report_layer_weights(p);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(a.normalized[i], b.normalized[i], 1e-12);
  EXPECT_EQ(eval::layer_weights_csv(a).substr(0, 35), "layer_index,raw_alpha,normalized_al");
  p.set(nn::param::alpha, Matrix<float>::Ones(1, 1));
  EXPECT_FALSE(eval::report_layer_weights(p).aggregating);
}

TEST(Synthetic, CorpusShape) {
  eval::SyntheticCorpusSpec cs;
  cs.aux_dim = 3;
  const Corpus c = eval::make_synthetic_corpus(cs);
  EXPECT_EQ(c.size(), 160u);
  std::set<std::string> sessions;
  for (const auto& e : c.manifest.entries) sessions.insert(e.session_id);
  EXPECT_EQ(sessions.size(), 5u);
  const auto r = c.store->features(0);
  EXPECT_EQ(r->num_layers, 4u);
  EXPECT_EQ(r->dim, 16u);
  EXPECT_EQ(c.store->aux(0)->dim, 3u);
  EXPECT_EQ(c.store->aux(0)->num_frames, r->num_frames);
  const Corpus again = eval::make_synthetic_corpus(cs);
  EXPECT_EQ(*again.store->features(17), *c.store->features(17));
}

}  // namespace
}  // namespace serprobe
