#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "serprobe/featureio/serf.hpp"

namespace serprobe {

struct ManifestEntry {
  std::string utterance_id;
  std::string speaker_id;
  std::string session_id;
  std::string label_name;
  int label_index = -1;
  std::string feature_path;
  std::string aux_feature_path;  // empty when absent
  double duration_s = 0.0;
  std::string audio_path;        // optional; only used by spectrogram extraction

  bool has_aux() const { return !aux_feature_path.empty(); }
};

// JSON-lines manifest: one header object carrying "label_names", then one
// entry object per line. Relative paths are resolved against base_dir.
struct DatasetManifest {
  std::vector<std::string> label_names;
  std::vector<ManifestEntry> entries;
  nlohmann::json header_extra = nlohmann::json::object();
  std::filesystem::path base_dir;

  std::size_t num_classes() const { return label_names.size(); }
  std::filesystem::path resolve(const std::string& path) const;
};

class ManifestError : public Error {
 public:
  using Error::Error;
};

// Checks label ranges and id uniqueness; throws ManifestError.
void validate(const DatasetManifest& manifest);

DatasetManifest parse_manifest(std::istream& in, const std::filesystem::path& base_dir = {});
DatasetManifest read_manifest(const std::filesystem::path& path);
std::string format_manifest(const DatasetManifest& manifest);
void write_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);

// Random access to the primary and optional auxiliary (Fusion) stream of each
// utterance, indexed like the manifest entries.
class FeatureStore {
 public:
  virtual ~FeatureStore() = default;
  virtual std::size_t size() const = 0;
  virtual std::shared_ptr<const FeatureRecord> features(std::size_t index) const = 0;
  virtual std::shared_ptr<const FeatureRecord> aux(std::size_t index) const = 0;  // may be null
};

class InMemoryFeatureStore final : public FeatureStore {
 public:
  InMemoryFeatureStore() = default;
  void add(FeatureRecord features, std::optional<FeatureRecord> aux = std::nullopt);

  std::size_t size() const override { return features_.size(); }
  std::shared_ptr<const FeatureRecord> features(std::size_t index) const override;
  std::shared_ptr<const FeatureRecord> aux(std::size_t index) const override;

 private:
  std::vector<std::shared_ptr<const FeatureRecord>> features_;
  std::vector<std::shared_ptr<const FeatureRecord>> aux_;
};

// Reads SERF files on demand. Identity fields left empty in a file are filled
// from the manifest; non-empty fields that disagree with it are an error.
class FileFeatureStore final : public FeatureStore {
 public:
  explicit FileFeatureStore(DatasetManifest manifest);

  std::size_t size() const override { return manifest_.entries.size(); }
  std::shared_ptr<const FeatureRecord> features(std::size_t index) const override;
  std::shared_ptr<const FeatureRecord> aux(std::size_t index) const override;

 private:
  std::shared_ptr<const FeatureRecord> load(std::size_t index, const std::string& path) const;

  DatasetManifest manifest_;
};

// A manifest paired with the features it references.
struct Corpus {
  DatasetManifest manifest;
  std::shared_ptr<const FeatureStore> store;

  std::size_t size() const { return manifest.entries.size(); }
  const ManifestEntry& entry(std::size_t i) const { return manifest.entries[i]; }
};

// Opens every manifest path to check it resolves and carries a valid header,
// then returns a file-backed corpus.
Corpus open_corpus(const std::filesystem::path& manifest_path);

}  // namespace serprobe
