#include "serprobe/eval/folds.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <numeric>
#include <random>
#include <set>

#include "serprobe/optim/trainer.hpp"

namespace serprobe::eval {

std::string to_string(Protocol p) {
  switch (p) {
    case Protocol::loso_session: return "loso";
    case Protocol::fixed_actor_split: return "actor-split";
    case Protocol::random_kfold: return "random-kfold";
  }
  return "?";
}

Protocol parse_protocol(const std::string& text) {
  if (text == "loso" || text == "loso_session") return Protocol::loso_session;
  if (text == "actor-split" || text == "fixed_actor_split") return Protocol::fixed_actor_split;
  if (text == "random-kfold" || text == "random_kfold") return Protocol::random_kfold;
  throw ValidationError("protocol must be one of loso, actor-split, random-kfold; got '" + text + "'");
}

int parse_actor_number(const std::string& speaker_id) {
  std::size_t end = speaker_id.size();
  std::size_t begin = end;
  while (begin > 0 && std::isdigit(static_cast<unsigned char>(speaker_id[begin - 1]))) --begin;
  if (begin == end) {
    throw ProtocolError("speaker id '" + speaker_id + "' carries no numeric actor id");
  }
  return std::stoi(speaker_id.substr(begin, end - begin));
}

std::string protocol_note(const ProtocolSpec& spec) {
  switch (spec.kind) {
    case Protocol::loso_session:
      return "leave-one-session-out; validation session = next session after the test session (cyclic)";
    case Protocol::fixed_actor_split:
      return "actor split: train actors 1-20, validation actors 21-22, test actors 23-24";
    case Protocol::random_kfold:
      return "random " + std::to_string(spec.folds) + "-fold utterance split (seed " +
             std::to_string(spec.seed) + "); validation = next chunk (cyclic)";
  }
  return "";
}

namespace {

std::vector<FoldSpec> loso_folds(const DatasetManifest& m, const ProtocolSpec& spec) {
  std::map<std::string, std::vector<std::size_t>> by_session;
  for (std::size_t i = 0; i < m.entries.size(); ++i) {
    const auto& s = m.entries[i].session_id;
    if (s.empty()) {
      throw ProtocolError("loso: entry '" + m.entries[i].utterance_id + "' has no session_id");
    }
    by_session[s].push_back(i);
  }
  const int n = static_cast<int>(by_session.size());
  if (n < spec.folds) {
    throw ProtocolError("loso: " + std::to_string(n) + " sessions, fewer than the " +
                        std::to_string(spec.folds) + " folds requested");
  }
  if (n != spec.folds) {
    throw ProtocolError("loso: " + std::to_string(n) + " sessions but " +
                        std::to_string(spec.folds) + " folds requested");
  }
  if (n < 3) throw ProtocolError("loso needs at least 3 sessions");
  std::vector<std::string> sessions;
  for (const auto& [s, _] : by_session) sessions.push_back(s);

  std::vector<FoldSpec> folds;
  for (int k = 0; k < n; ++k) {
    FoldSpec f;
    f.fold_id = k + 1;
    f.protocol = Protocol::loso_session;
    f.test_group = sessions[k];
    f.val_group = sessions[(k + 1) % n];
    for (int s = 0; s < n; ++s) {
      const auto& idx = by_session[sessions[s]];
      auto& dst = s == k ? f.test : (s == (k + 1) % n ? f.val : f.train);
      dst.insert(dst.end(), idx.begin(), idx.end());
    }
    folds.push_back(std::move(f));
  }
  return folds;
}

std::vector<FoldSpec> actor_folds(const DatasetManifest& m) {
  FoldSpec f;
  f.fold_id = 1;
  f.protocol = Protocol::fixed_actor_split;
  f.test_group = "actors 23-24";
  f.val_group = "actors 21-22";
  for (std::size_t i = 0; i < m.entries.size(); ++i) {
    const int actor = parse_actor_number(m.entries[i].speaker_id);
    if (actor >= 1 && actor <= 20) {
      f.train.push_back(i);
    } else if (actor >= 21 && actor <= 22) {
      f.val.push_back(i);
    } else if (actor >= 23 && actor <= 24) {
      f.test.push_back(i);
    } else {
      throw ProtocolError("actor-split: actor id " + std::to_string(actor) + " of '" +
                          m.entries[i].speaker_id + "' is outside 1-24");
    }
  }
  if (f.train.empty() || f.val.empty() || f.test.empty()) {
    throw ProtocolError("actor-split: a partition is empty (train " + std::to_string(f.train.size()) +
                        ", val " + std::to_string(f.val.size()) + ", test " +
                        std::to_string(f.test.size()) + " utterances)");
  }
  return {f};
}

std::vector<FoldSpec> random_folds(const DatasetManifest& m, const ProtocolSpec& spec) {
  const int k = spec.folds;
  const std::size_t n = m.entries.size();
  if (k < 3) throw ProtocolError("random-kfold needs k >= 3 (test, validation and training chunks)");
  if (n < static_cast<std::size_t>(k)) throw ProtocolError("random-kfold: fewer utterances than folds");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto rng = optim::make_rng(spec.seed, optim::RngStream::folds);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::vector<std::size_t>> chunks(static_cast<std::size_t>(k));
  for (int c = 0; c < k; ++c) {
    const std::size_t lo = n * static_cast<std::size_t>(c) / static_cast<std::size_t>(k);
    const std::size_t hi = n * static_cast<std::size_t>(c + 1) / static_cast<std::size_t>(k);
    chunks[static_cast<std::size_t>(c)].assign(order.begin() + static_cast<std::ptrdiff_t>(lo),
                                               order.begin() + static_cast<std::ptrdiff_t>(hi));
    std::sort(chunks[static_cast<std::size_t>(c)].begin(), chunks[static_cast<std::size_t>(c)].end());
  }
  std::vector<FoldSpec> folds;
  for (int c = 0; c < k; ++c) {
    FoldSpec f;
    f.fold_id = c + 1;
    f.protocol = Protocol::random_kfold;
    f.test_group = "chunk " + std::to_string(c + 1);
    f.val_group = "chunk " + std::to_string((c + 1) % k + 1);
    for (int o = 0; o < k; ++o) {
      const auto& idx = chunks[static_cast<std::size_t>(o)];
      auto& dst = o == c ? f.test : (o == (c + 1) % k ? f.val : f.train);
      dst.insert(dst.end(), idx.begin(), idx.end());
    }
    std::sort(f.train.begin(), f.train.end());
    folds.push_back(std::move(f));
  }
  return folds;
}

}  // namespace

std::vector<FoldSpec> make_folds(const DatasetManifest& manifest, const ProtocolSpec& spec) {
  if (manifest.entries.empty()) throw ProtocolError("manifest has no entries");
  switch (spec.kind) {
    case Protocol::loso_session: return loso_folds(manifest, spec);
    case Protocol::fixed_actor_split: return actor_folds(manifest);
    case Protocol::random_kfold: return random_folds(manifest, spec);
  }
  throw ProtocolError("unknown protocol");
}

}  // namespace serprobe::eval
