#pragma once

#include <cstdint>
#include <filesystem>

#include "serprobe/featureio/manifest.hpp"

namespace serprobe::eval {

// Planted-signal corpus: class information lives only in one layer.
//
// Every frame of every layer is N(0, 1) noise plus a per-speaker, per-layer
// offset of scale speaker_offset. In planted_layer the frame additionally
// carries signal * prototype[label], where each class prototype is a fixed
// unit-variance random vector. Speakers are numbered Actor_01.. and assigned
// to sessions Ses01.. in contiguous groups.
struct SyntheticCorpusSpec {
  int num_layers = 4;
  int dim = 16;
  int num_classes = 4;
  int planted_layer = 2;
  double signal = 1.0;
  double speaker_offset = 2.0;
  int num_speakers = 10;
  int num_sessions = 5;
  int utterances_per_speaker = 16;
  int min_frames = 12;
  int max_frames = 24;
  int aux_dim = 0;  // > 0 adds an aux stream carrying the same class signal
  std::uint64_t seed = 7;
};

Corpus make_synthetic_corpus(const SyntheticCorpusSpec& spec);

// Writes features/<utt>.serf (and aux/<utt>.serf) plus manifest.jsonl under
// dir; returns the manifest path.
std::filesystem::path write_synthetic_corpus(const SyntheticCorpusSpec& spec,
                                             const std::filesystem::path& dir);

}  // namespace serprobe::eval
