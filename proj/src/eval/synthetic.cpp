#include "serprobe/eval/synthetic.hpp"

#include <cstdio>
#include <random>

namespace serprobe::eval {

namespace {

struct Generated {
  DatasetManifest manifest;
  std::vector<FeatureRecord> features;
  std::vector<FeatureRecord> aux;
};

Generated generate(const SyntheticCorpusSpec& spec) {
  if (spec.num_layers < 1 || spec.dim < 1 || spec.num_classes < 2 || spec.num_speakers < 1 ||
      spec.num_sessions < 1 || spec.num_sessions > spec.num_speakers ||
      spec.utterances_per_speaker < 1 || spec.min_frames < 1 || spec.max_frames < spec.min_frames ||
      spec.planted_layer < 0 || spec.planted_layer >= spec.num_layers) {
    throw ValidationError("invalid synthetic corpus specification");
  }
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_int_distribution<int> frames(spec.min_frames, spec.max_frames);

  auto random_matrix = [&](int rows, int cols, double scale) {
    Eigen::MatrixXd m(rows, cols);
    for (int r = 0; r < rows; ++r) {
      for (int c = 0; c < cols; ++c) m(r, c) = scale * normal(rng);
    }
    return m;
  };
  const Eigen::MatrixXd prototypes = random_matrix(spec.num_classes, spec.dim, 1.0);
  const Eigen::MatrixXd aux_prototypes =
      spec.aux_dim > 0 ? random_matrix(spec.num_classes, spec.aux_dim, 1.0) : Eigen::MatrixXd();

  Generated g;
  for (int c = 0; c < spec.num_classes; ++c) {
    g.manifest.label_names.push_back("class" + std::to_string(c));
  }
  char buf[64];
  for (int a = 1; a <= spec.num_speakers; ++a) {
    std::snprintf(buf, sizeof buf, "Actor_%02d", a);
    const std::string speaker = buf;
    const int session = (a - 1) * spec.num_sessions / spec.num_speakers + 1;
    std::snprintf(buf, sizeof buf, "Ses%02d", session);
    const std::string session_id = buf;
    const Eigen::MatrixXd offsets = random_matrix(spec.num_layers, spec.dim, spec.speaker_offset);
    const Eigen::MatrixXd aux_offsets =
        spec.aux_dim > 0 ? random_matrix(1, spec.aux_dim, spec.speaker_offset) : Eigen::MatrixXd();
    for (int u = 0; u < spec.utterances_per_speaker; ++u) {
      const int label = u % spec.num_classes;
      std::snprintf(buf, sizeof buf, "%s_u%03d", speaker.c_str(), u);
      const std::string utt = buf;
      const int T = frames(rng);
      FeatureRecord r = make_record(utt, speaker, session_id, label, static_cast<std::uint32_t>(spec.num_layers),
                                    static_cast<std::uint32_t>(T), static_cast<std::uint32_t>(spec.dim));
      for (int l = 0; l < spec.num_layers; ++l) {
        auto layer = r.layer(static_cast<std::size_t>(l));
        for (int t = 0; t < T; ++t) {
          for (int j = 0; j < spec.dim; ++j) {
            double v = normal(rng) + offsets(l, j);
            if (l == spec.planted_layer) v += spec.signal * prototypes(label, j);
            layer(t, j) = static_cast<float>(v);
          }
        }
      }
      ManifestEntry e;
      e.utterance_id = utt;
      e.speaker_id = speaker;
      e.session_id = session_id;
      e.label_index = label;
      e.label_name = g.manifest.label_names[static_cast<std::size_t>(label)];
      e.feature_path = "features/" + utt + ".serf";
      e.duration_s = 0.02 * T;
      if (spec.aux_dim > 0) {
        FeatureRecord x = make_record(utt, speaker, session_id, label, 1, static_cast<std::uint32_t>(T),
                                      static_cast<std::uint32_t>(spec.aux_dim));
        auto layer = x.layer(0);
        for (int t = 0; t < T; ++t) {
          for (int j = 0; j < spec.aux_dim; ++j) {
            layer(t, j) = static_cast<float>(normal(rng) + aux_offsets(0, j) +
                                             spec.signal * aux_prototypes(label, j));
          }
        }
        e.aux_feature_path = "aux/" + utt + ".serf";
        g.aux.push_back(std::move(x));
      }
      g.manifest.entries.push_back(std::move(e));
      g.features.push_back(std::move(r));
    }
  }
  return g;
}

}  // namespace

Corpus make_synthetic_corpus(const SyntheticCorpusSpec& spec) {
  Generated g = generate(spec);
  auto store = std::make_shared<InMemoryFeatureStore>();
  for (std::size_t i = 0; i < g.features.size(); ++i) {
    if (spec.aux_dim > 0) {
      store->add(std::move(g.features[i]), std::move(g.aux[i]));
    } else {
      store->add(std::move(g.features[i]));
    }
  }
  return Corpus{std::move(g.manifest), std::move(store)};
}

std::filesystem::path write_synthetic_corpus(const SyntheticCorpusSpec& spec,
                                             const std::filesystem::path& dir) {
  Generated g = generate(spec);
  for (std::size_t i = 0; i < g.features.size(); ++i) {
    write_feature_file(g.features[i], dir / g.manifest.entries[i].feature_path);
    if (spec.aux_dim > 0) write_feature_file(g.aux[i], dir / g.manifest.entries[i].aux_feature_path);
  }
  const auto path = dir / "manifest.jsonl";
  write_manifest(g.manifest, path);
  return path;
}

}  // namespace serprobe::eval
