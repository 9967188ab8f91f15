#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "serprobe/featureio/manifest.hpp"

namespace serprobe::eval {

enum class Protocol { loso_session, fixed_actor_split, random_kfold };

std::string to_string(Protocol p);
// Accepts the CLI spellings (loso, actor-split, random-kfold) and the long names.
Protocol parse_protocol(const std::string& text);

struct ProtocolSpec {
  Protocol kind = Protocol::loso_session;
  int folds = 5;           // expected session count for LOSO, k for random k-fold
  std::uint64_t seed = 0;  // random k-fold only
};

// Partition of manifest entry indices. The three sets are pairwise disjoint.
struct FoldSpec {
  int fold_id = 0;
  Protocol protocol = Protocol::loso_session;
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;
  std::string test_group;  // session id, actor range, or chunk number
  std::string val_group;
};

class ProtocolError : public Error {
 public:
  using Error::Error;
};

// loso_session: one fold per session (sorted by id); test = session k,
//   validation = the next session cyclically, train = the rest.
// fixed_actor_split: one fold, actors 1-20 train, 21-22 validation, 23-24 test.
// random_kfold: seeded utterance shuffle cut into k chunks; chunk i is test,
//   chunk i+1 (cyclic) validation, the rest train.
std::vector<FoldSpec> make_folds(const DatasetManifest& manifest, const ProtocolSpec& spec);

// Trailing decimal digits of a speaker id ("Actor_07" -> 7). Throws if none.
int parse_actor_number(const std::string& speaker_id);

std::string protocol_note(const ProtocolSpec& spec);

}  // namespace serprobe::eval
