#pragma once

#include <random>

#include "support/gradcheck.hpp"

namespace serprobe::testing {

struct ScaleInvarianceResult {
  double max_aggregate_diff = 0.0;
  double max_prob_diff = 0.0;
  int trials = 0;
};

// Rescales alpha by c and compares the aggregated output and the model's
// eval-mode probabilities against the unscaled ones.
template <typename S>
ScaleInvarianceResult scale_invariance(int trials, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> alpha_value(0.05, 2.0);
  std::uniform_real_distribution<double> magnitude(-3.0, 3.0);
  std::bernoulli_distribution negative(0.3);
  ScaleInvarianceResult out;
  for (int i = 0; i < trials; ++i) {
    const TinyModel m = tiny_model(nn::Variant::dense, rng);
    auto params = nn::init_params<S>(m.config, rng());
    Vector<S> alpha(3);
    for (int l = 0; l < 3; ++l) alpha[l] = static_cast<S>(alpha_value(rng));
    double c = std::pow(10.0, magnitude(rng));
    if (negative(rng)) c = -c;
    if (std::abs(c * static_cast<double>(alpha.sum())) < 1e-6) continue;
    ++out.trials;

    std::vector<Matrix<S>> layers;
    for (int l = 0; l < 3; ++l) layers.push_back(random_matrix<S>(rng, 6, 5));
    const Matrix<S> base = nn::weighted_aggregate<S>(layers, alpha);
    const Matrix<S> scaled = nn::weighted_aggregate<S>(layers, Vector<S>(alpha * static_cast<S>(c)));
    out.max_aggregate_diff = std::max(out.max_aggregate_diff, static_cast<double>((base - scaled).cwiseAbs().maxCoeff()));

    std::mt19937_64 unused(0);
    params.at(nn::param::alpha) = alpha;
    const auto p0 = nn::model_forward(m.config, params, m.batch, false, unused).probs;
    params.at(nn::param::alpha) = alpha * static_cast<S>(c);
    const auto p1 = nn::model_forward(m.config, params, m.batch, false, unused).probs;
    out.max_prob_diff = std::max(out.max_prob_diff, static_cast<double>((p0 - p1).cwiseAbs().maxCoeff()));
  }
  return out;
}

}  // namespace serprobe::testing

#include "serprobe/optim/trainer.hpp"

namespace serprobe::testing {

// 64 utterances, 4 classes, class means far apart relative to the noise.
inline std::shared_ptr<InMemoryFeatureStore> separable_store(std::size_t copies, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> noise(0.0f, 0.5f);
  Eigen::MatrixXf centers = Eigen::MatrixXf::Zero(4, 8);
  for (int c = 0; c < 4; ++c) centers(c, 2 * c) = 2.0f;
  std::vector<FeatureRecord> base;
  for (int i = 0; i < 64; ++i) {
    const int label = i % 4;
    auto r = make_record("u" + std::to_string(i), "s" + std::to_string(i % 8), "S1", label, 2, 10 + i % 7, 8);
    for (std::uint32_t l = 0; l < 2; ++l) {
      for (std::uint32_t t = 0; t < r.num_frames; ++t) {
        for (int j = 0; j < 8; ++j) r.layer(l)(t, j) = centers(label, j) + noise(rng);
      }
    }
    base.push_back(std::move(r));
  }
  auto store = std::make_shared<InMemoryFeatureStore>();
  for (std::size_t c = 0; c < copies; ++c) {
    for (const auto& r : base) store->add(r);
  }
  return store;
}

struct OverfitResult {
  int first_perfect_epoch = -1;  // -1: never reached within the budget
  double final_accuracy = 0.0;
};

// Dense model trained on the 64-utterance set, validated on an identical copy
// so the per-epoch validation UAR is the training-set UAR.
inline OverfitResult overfit_dense(int max_epochs, std::uint64_t seed) {
  const auto store = separable_store(2, seed);
  nn::ModelConfig model;
  model.num_layers = 2;
  model.input_dim = 8;
  model.num_classes = 4;
  optim::ExampleSet train_set{store.get(), nullptr, {}, false};
  optim::ExampleSet copy_set{store.get(), nullptr, {}, false};
  for (std::size_t i = 0; i < 64; ++i) {
    train_set.indices.push_back(i);
    copy_set.indices.push_back(64 + i);
  }
  optim::TrainConfig cfg;
  cfg.seed = seed;
  cfg.max_epochs = max_epochs;
  cfg.patience = max_epochs;
  const auto result = optim::train(model, train_set, copy_set, cfg);
  OverfitResult out;
  for (const auto& e : result.history.epochs) {
    if (e.val_uar == 1.0) {
      out.first_perfect_epoch = e.epoch;
      break;
    }
  }
  const auto ev = optim::evaluate(model, result.params, train_set, cfg.max_frames, 32);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < ev.preds.size(); ++i) correct += ev.preds[i] == ev.labels[i];
  out.final_accuracy = static_cast<double>(correct) / static_cast<double>(ev.preds.size());
  return out;
}

}  // namespace serprobe::testing

#include <set>

#include "serprobe/eval/folds.hpp"
#include "serprobe/eval/metrics.hpp"

namespace serprobe::testing {

// Largest deviation between the library's UAR / confusion matrix and a
// direct per-class recall count, over random prediction sets.
inline double metric_oracle_deviation(int trials, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> classes(2, 8), length(1, 300);
  double worst = 0.0;
  for (int trial = 0; trial < trials; ++trial) {
    const int C = classes(rng);
    const int N = length(rng);
    std::uniform_int_distribution<int> cls(0, C - 1);
    std::vector<int> labels(N), preds(N);
    for (int i = 0; i < N; ++i) labels[i] = cls(rng), preds[i] = cls(rng);
    const auto m = eval::confusion_matrix(preds, labels, C);
    double recall_sum = 0.0;
    int present = 0;
    for (int c = 0; c < C; ++c) {
      long long support = 0, hits = 0;
      for (int i = 0; i < N; ++i) {
        if (labels[i] != c) continue;
        ++support;
        hits += preds[i] == c;
        if (m(c, preds[i]) <= 0) return 1.0;
      }
      for (int j = 0; j < C; ++j) {
        long long count = 0;
        for (int i = 0; i < N; ++i) count += labels[i] == c && preds[i] == j;
        if (m(c, j) != count) return 1.0;
      }
      if (support > 0) {
        recall_sum += static_cast<double>(hits) / static_cast<double>(support);
        ++present;
      }
    }
    worst = std::max(worst, std::abs(eval::unweighted_average_recall(m) - recall_sum / present));
  }
  return worst;
}

// 24 actors (Actor_01..Actor_24) spread over 5 sessions, 3 utterances each.
inline DatasetManifest actor_session_manifest() {
  DatasetManifest m;
  m.label_names = {"neutral", "happy", "sad", "angry"};
  for (int a = 1; a <= 24; ++a) {
    for (int u = 0; u < 3; ++u) {
      ManifestEntry e;
      char actor[16];
      std::snprintf(actor, sizeof actor, "Actor_%02d", a);
      e.speaker_id = actor;
      e.session_id = "Ses0" + std::to_string(1 + (a - 1) % 5);
      e.utterance_id = e.speaker_id + "_" + std::to_string(u);
      e.label_index = (a + u) % 4;
      e.feature_path = e.utterance_id + ".serf";
      m.entries.push_back(e);
    }
  }
  return m;
}

struct ProtocolCheck {
  bool ok = true;
  std::string detail;
  void fail(const std::string& why) {
    if (ok) detail = why;
    ok = false;
  }
};

inline std::set<std::string> speakers_of(const DatasetManifest& m, const std::vector<std::size_t>& idx) {
  std::set<std::string> s;
  for (auto i : idx) s.insert(m.entries[i].speaker_id);
  return s;
}

inline bool disjoint(const std::set<std::string>& a, const std::set<std::string>& b) {
  for (const auto& x : a) {
    if (b.count(x)) return false;
  }
  return true;
}

// LOSO: one fold per session, test sets cover every session exactly once,
// partitions disjoint and speaker-disjoint. Actor split: 20/2/2 actors.
inline ProtocolCheck check_protocols(const DatasetManifest& m) {
  ProtocolCheck check;
  const auto loso = eval::make_folds(m, {eval::Protocol::loso_session, 5, 0});
  if (loso.size() != 5) check.fail("LOSO produced " + std::to_string(loso.size()) + " folds");
  std::set<std::string> tested_sessions;
  std::multiset<std::size_t> tested;
  for (const auto& f : loso) {
    std::set<std::string> sessions;
    for (auto i : f.test) sessions.insert(m.entries[i].session_id);
    if (sessions.size() != 1) check.fail("fold " + std::to_string(f.fold_id) + " tests more than one session");
    tested_sessions.insert(sessions.begin(), sessions.end());
    tested.insert(f.test.begin(), f.test.end());
    std::set<std::string> val_sessions;
    for (auto i : f.val) val_sessions.insert(m.entries[i].session_id);
    if (val_sessions.size() != 1 || val_sessions == sessions) check.fail("validation is not one other session");
    const auto tr = speakers_of(m, f.train), va = speakers_of(m, f.val), te = speakers_of(m, f.test);
    if (!disjoint(tr, va) || !disjoint(tr, te) || !disjoint(va, te)) {
      check.fail("fold " + std::to_string(f.fold_id) + " shares a speaker across partitions");
    }
    if (f.train.size() + f.val.size() + f.test.size() != m.entries.size()) check.fail("LOSO fold drops utterances");
  }
  if (tested_sessions.size() != 5) check.fail("LOSO test sets do not cover all sessions");
  if (tested.size() != m.entries.size() || std::set<std::size_t>(tested.begin(), tested.end()).size() != tested.size()) {
    check.fail("LOSO test sets are not an exact cover");
  }

  const auto actor = eval::make_folds(m, {eval::Protocol::fixed_actor_split, 5, 0});
  if (actor.size() != 1) {
    check.fail("actor split produced " + std::to_string(actor.size()) + " folds");
    return check;
  }
  const auto tr = speakers_of(m, actor[0].train), va = speakers_of(m, actor[0].val), te = speakers_of(m, actor[0].test);
  if (tr.size() != 20 || va.size() != 2 || te.size() != 2) {
    check.fail("actor split sizes " + std::to_string(tr.size()) + "/" + std::to_string(va.size()) + "/" +
               std::to_string(te.size()));
  }
  for (const auto& s : tr) {
    if (eval::parse_actor_number(s) > 20) check.fail("actor " + s + " in train");
  }
  if (va != std::set<std::string>{"Actor_21", "Actor_22"}) check.fail("validation actors are not 21-22");
  if (te != std::set<std::string>{"Actor_23", "Actor_24"}) check.fail("test actors are not 23-24");
  return check;
}

}  // namespace serprobe::testing

#include "serprobe/eval/experiment.hpp"
#include "serprobe/eval/synthetic.hpp"

namespace serprobe::testing {

// Per seed: argmax over layers of the fold-averaged normalized alpha.
inline std::vector<int> per_seed_argmax_alpha(const eval::RunReport& report) {
  std::vector<int> out;
  for (const auto& s : report.seeds) {
    std::vector<double> mean;
    int n = 0;
    for (const auto& r : report.runs) {
      if (r.seed != s.seed) continue;
      if (mean.empty()) mean.assign(r.weights.normalized.size(), 0.0);
      for (std::size_t l = 0; l < mean.size(); ++l) mean[l] += r.weights.normalized[l];
      ++n;
    }
    out.push_back(static_cast<int>(std::max_element(mean.begin(), mean.end()) - mean.begin()));
  }
  return out;
}

// Copy of the corpus with `delta` added to every feature of the listed utterances.
inline Corpus perturbed_copy(const Corpus& corpus, const std::vector<std::size_t>& which, float delta) {
  auto store = std::make_shared<InMemoryFeatureStore>();
  std::set<std::size_t> hit(which.begin(), which.end());
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    FeatureRecord r = *corpus.store->features(i);
    if (hit.count(i)) {
      for (auto& v : r.data) v += delta;
    }
    store->add(std::move(r));
  }
  return Corpus{corpus.manifest, store};
}

inline bool same_stats(const NormStats& a, const NormStats& b) {
  if (a.per_key.size() != b.per_key.size()) return false;
  for (const auto& [key, layers] : a.per_key) {
    auto it = b.per_key.find(key);
    if (it == b.per_key.end() || it->second.size() != layers.size()) return false;
    for (std::size_t l = 0; l < layers.size(); ++l) {
      if (layers[l].mean != it->second[l].mean || layers[l].std != it->second[l].std) return false;
    }
  }
  return true;
}

struct GlobalScopeCheck {
  bool test_invariant = true;   // perturbing test utterances leaves every fold's stats unchanged
  bool train_sensitive = true;  // perturbing a training utterance does change them
};

inline GlobalScopeCheck check_global_scope(const Corpus& corpus, const eval::ProtocolSpec& protocol) {
  GlobalScopeCheck out;
  for (const auto& fold : eval::make_folds(corpus.manifest, protocol)) {
    const auto base = eval::fold_normalizer(corpus, fold, NormMode::global, false).primary;
    const auto moved_test = perturbed_copy(corpus, fold.test, 100.0f);
    const auto after = eval::fold_normalizer(moved_test, fold, NormMode::global, false).primary;
    out.test_invariant = out.test_invariant && same_stats(base, after);
    const auto moved_train = perturbed_copy(corpus, {fold.train.front()}, 100.0f);
    const auto changed = eval::fold_normalizer(moved_train, fold, NormMode::global, false).primary;
    out.train_sensitive = out.train_sensitive && !same_stats(base, changed);
  }
  return out;
}

}  // namespace serprobe::testing
