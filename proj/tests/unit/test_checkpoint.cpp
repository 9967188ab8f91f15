#include <gtest/gtest.h>

#include "serprobe/nn/checkpoint.hpp"
#include "support/testing.hpp"

namespace serprobe {
namespace {

TEST(Checkpoint, RoundTripIsBitExact) {
  testing::TempDir dir;
  for (auto v : {nn::Variant::dense, nn::Variant::lstm, nn::Variant::fusion}) {
    nn::ModelConfig c;
    c.variant = v;
    c.hidden = 6;
    c.num_layers = 13;
    c.input_dim = 9;
    c.aux_dim = v == nn::Variant::fusion ? 4 : 0;
    const auto params = nn::init_params<float>(c, 7);
    const auto path = dir / (nn::to_string(v) + ".ckpt");
    nn::save_checkpoint(c, params, path);
    const auto back = nn::load_checkpoint(path);
    EXPECT_EQ(back.params, params);
    EXPECT_EQ(nn::to_json(back.config), nn::to_json(c));
    EXPECT_EQ(nn::encode_checkpoint(back.config, back.params), nn::encode_checkpoint(c, params));
  }
}

TEST(Checkpoint, CorruptionDetected) {
  nn::ModelConfig c;
  c.num_layers = 2;
  c.input_dim = 3;
  c.hidden = 2;
  auto bytes = nn::encode_checkpoint(c, nn::init_params<float>(c, 1));
  auto bad_magic = bytes;
  bad_magic[1] = 'X';
  EXPECT_THROW(nn::decode_checkpoint(bad_magic), Error);
  auto cut = bytes;
  cut.resize(cut.size() - 3);
  EXPECT_THROW(nn::decode_checkpoint(cut), Error);
  auto version = bytes;
  version[4] = 9;
  EXPECT_THROW(nn::decode_checkpoint(version), Error);
}

}  // namespace
}  // namespace serprobe
