#include <gtest/gtest.h>

#include "serprobe/nn/model.hpp"
#include "support/gradcheck.hpp"

namespace serprobe {
namespace {

struct ModelCase {
  nn::Variant variant;
  bool training;
};

std::string case_name(const ::testing::TestParamInfo<ModelCase>& info) {
  return nn::to_string(info.param.variant) + (info.param.training ? "_train" : "_eval");
}

class ModelGradient : public ::testing::TestWithParam<ModelCase> {};

TEST_P(ModelGradient, MatchesCentralDifferences) {
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    std::mt19937_64 rng(seed);
    for (const auto& [name, err] : testing::check_model(GetParam().variant, rng, GetParam().training)) {
      EXPECT_LT(err, 1e-4) << name << " seed " << seed;
    }
  }
}

INSTANTIATE_TEST_SUITE_P(Variants, ModelGradient,
                         ::testing::Values(ModelCase{nn::Variant::dense, false}, ModelCase{nn::Variant::dense, true},
                                           ModelCase{nn::Variant::lstm, false}, ModelCase{nn::Variant::lstm, true},
                                           ModelCase{nn::Variant::fusion, false},
                                           ModelCase{nn::Variant::fusion, true}),
                         case_name);

nn::ModelConfig config(nn::Variant v) {
  nn::ModelConfig c;
  c.variant = v;
  c.num_layers = 13;
  c.input_dim = 768;
  c.aux_dim = v == nn::Variant::fusion ? 25 : 0;
  return c;
}

TEST(Model, ParameterShapes) {
  const auto dense = nn::init_params<float>(config(nn::Variant::dense), 1);
  EXPECT_EQ(dense.size(), 7u);
  EXPECT_EQ(dense.at(nn::param::alpha).rows(), 13);
  EXPECT_EQ(dense.at(nn::param::dense1_w).rows(), 768);
  EXPECT_EQ(dense.at(nn::param::dense1_w).cols(), 128);
  EXPECT_EQ(dense.at(nn::param::dense2_w).rows(), 128);
  EXPECT_EQ(dense.at(nn::param::head_w).cols(), 4);
  EXPECT_EQ(dense.at(nn::param::head_b).rows(), 1);

  const auto lstm = nn::init_params<float>(config(nn::Variant::lstm), 1);
  EXPECT_EQ(lstm.at(nn::param::lstm_wx).cols(), 512);
  EXPECT_EQ(lstm.at(nn::param::lstm_wh).rows(), 128);
  const Matrix<float>& b = lstm.at(nn::param::lstm_b);
  EXPECT_EQ(b.leftCols(128).norm(), 0.0f);
  EXPECT_TRUE((b.middleCols(128, 128).array() == 1.0f).all());
  EXPECT_EQ(b.rightCols(256).norm(), 0.0f);

  const auto fusion = nn::init_params<float>(config(nn::Variant::fusion), 1);
  EXPECT_EQ(fusion.at(nn::param::aux_w).rows(), 25);
  EXPECT_EQ(fusion.at(nn::param::fused_w).rows(), 256);
  EXPECT_FALSE(fusion.contains(nn::param::dense2_w));
}

TEST(Model, InitialisationStatistics) {
  const auto p = nn::init_params<double>(config(nn::Variant::dense), 42);
  EXPECT_TRUE((p.at(nn::param::alpha).array() == 1.0).all());
  EXPECT_EQ(p.at(nn::param::dense1_b).norm(), 0.0);
  // Glorot uniform on (-a, a): mean 0, variance a^2 / 3 = 2 / (fan_in + fan_out)
  const Matrix<double>& w = p.at(nn::param::dense1_w);
  const double limit = std::sqrt(6.0 / (768 + 128));
  EXPECT_LE(w.cwiseAbs().maxCoeff(), limit);
  EXPECT_NEAR(w.mean(), 0.0, 0.002);
  EXPECT_NEAR((w.array() - w.mean()).square().mean(), 2.0 / (768 + 128), 2e-4);
  EXPECT_EQ(nn::init_params<double>(config(nn::Variant::dense), 42), p);
  EXPECT_FALSE(nn::init_params<double>(config(nn::Variant::dense), 43) == p);
}

TEST(Model, UntrainedWeightsAreUniform) {
  const auto p = nn::init_params<float>(config(nn::Variant::dense), 5);
  const auto w = nn::normalized_alpha(p);
  for (Eigen::Index i = 0; i < w.size(); ++i) EXPECT_FLOAT_EQ(w[i], 1.0f / 13.0f);
}

TEST(Model, PaddingDoesNotChangePredictions) {
  std::mt19937_64 rng(9);
  const auto m = testing::tiny_model(nn::Variant::lstm, rng);
  const auto params = nn::init_params<double>(m.config, 3);
  std::mt19937_64 unused(0);
  const auto together = nn::model_forward(m.config, params, m.batch, false, unused);
  // second utterance on its own, without padding
  std::vector<FeatureRecord> alone = {make_record("b", "s", "x", 2, 3, 4, 5)};
  for (std::size_t l = 0; l < 3; ++l) alone[0].layer(l) = m.batch.layer(1, l).topRows(4);
  const Batch single = assemble_batch(std::span<const FeatureRecord>(alone), 400);
  const auto solo = nn::model_forward(m.config, params, single, false, unused);
  EXPECT_LT((together.probs.row(1) - solo.probs.row(0)).norm(), 1e-6);
}

TEST(Model, ConfigValidationAndJson) {
  auto c = config(nn::Variant::fusion);
  EXPECT_EQ(nn::model_config_from_json(nn::to_json(c)).aux_dim, 25);
  c.aux_dim = 0;
  EXPECT_THROW(nn::validate(c), ValidationError);
  EXPECT_THROW(nn::parse_variant("cnn"), ValidationError);
  c = config(nn::Variant::dense);
  c.dropout = 1.0;
  EXPECT_THROW(nn::validate(c), ValidationError);
}

TEST(Model, ShapeMismatchIsReported) {
  std::mt19937_64 rng(1);
  auto m = testing::tiny_model(nn::Variant::dense, rng);
  auto c = m.config;
  c.input_dim = 6;
  const auto params = nn::init_params<float>(c, 1);
  std::mt19937_64 unused(0);
  EXPECT_THROW(nn::model_forward(c, params, m.batch, false, unused), nn::ShapeError);
  auto f = m.config;
  f.variant = nn::Variant::fusion;
  f.aux_dim = 2;
  EXPECT_THROW(nn::model_forward(f, nn::init_params<float>(f, 1), m.batch, false, unused), nn::ShapeError);
}

}  // namespace
}  // namespace serprobe
